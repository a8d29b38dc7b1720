//! Common planner outcome type.

use paydiff_core::trajectory::Trajectory;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerStatus {
    Success,
    Timeout,
    Infeasible,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannerResult {
    pub trajectory: Option<Trajectory>,
    /// Wall-clock seconds to the first solution (or to giving up).
    pub planning_time: f64,
    pub iterations: usize,
    pub status: PlannerStatus,
    /// Per-iteration merit values for optimizers; empty for samplers.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub merit_history: Vec<f64>,
}

impl PlannerResult {
    pub fn success(trajectory: Trajectory, planning_time: f64, iterations: usize) -> Self {
        PlannerResult {
            trajectory: Some(trajectory),
            planning_time,
            iterations,
            status: PlannerStatus::Success,
            merit_history: Vec::new(),
        }
    }

    pub fn failure(status: PlannerStatus, planning_time: f64, iterations: usize) -> Self {
        assert_ne!(status, PlannerStatus::Success, "failure result cannot be success");
        PlannerResult { trajectory: None, planning_time, iterations, status, merit_history: Vec::new() }
    }

    /// Invariant: a trajectory is present iff the status is success.
    pub fn is_consistent(&self) -> bool {
        self.trajectory.is_some() == (self.status == PlannerStatus::Success)
    }
}

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("planner timed out after {0:.3} s")]
    Timeout(f64),
    #[error("invalid planner input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Core(#[from] paydiff_core::model::ModelError),
    #[error(transparent)]
    Dynamics(#[from] paydiff_core::dynamics::DynamicsError),
}
