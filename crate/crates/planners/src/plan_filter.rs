//! Plan-and-filter: plan a geometric path, time-parameterize it, and keep
//! the first candidate whose trajectory passes full validation at the
//! target payload.

use crate::result::{PlannerError, PlannerResult, PlannerStatus};
use crate::rrt::{rrt_connect, shortcut_path, RrtConfig};
use crate::validity::check_trajectory;
use paydiff_core::model::RobotModel;
use paydiff_core::scene::CollisionProxySet;
use paydiff_core::timeparam::{time_parameterize, time_parameterize_fixed};
use paydiff_core::trajectory::{Problem, Trajectory};
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct PlanFilterConfig {
    pub rrt: RrtConfig,
    pub max_attempts: usize,
    pub dt: f64,
    /// Fixed output horizon (dataset generation); None keeps the natural
    /// motion duration.
    pub horizon: Option<usize>,
    pub shortcut_attempts: usize,
}

impl Default for PlanFilterConfig {
    fn default() -> Self {
        PlanFilterConfig {
            rrt: RrtConfig::default(),
            max_attempts: 20,
            dt: 0.08,
            horizon: None,
            shortcut_attempts: 60,
        }
    }
}

fn constant_trajectory(q: &[f64], dt: f64, horizon: usize) -> Trajectory {
    let positions = vec![q.to_vec(); horizon.max(2)];
    Trajectory::from_positions(dt, q.len(), &positions).expect("constant trajectory is valid")
}

/// Repeats {plan, parameterize, validate at payload} until a feasible
/// trajectory appears or the attempt budget is exhausted.
pub fn plan_and_filter(
    model: &RobotModel,
    proxies: &CollisionProxySet,
    problem: &Problem,
    config: &PlanFilterConfig,
) -> Result<PlannerResult, PlannerError> {
    if problem.payload < 0.0 {
        return Err(PlannerError::InvalidInput("payload must be >= 0".into()));
    }
    let clock = Instant::now();
    if problem.start == problem.goal {
        let traj = constant_trajectory(&problem.start, config.dt, config.horizon.unwrap_or(2));
        if check_trajectory(model, proxies, &problem.scene, &traj, problem.payload) {
            return Ok(PlannerResult::success(traj, clock.elapsed().as_secs_f64(), 1));
        }
        return Ok(PlannerResult::failure(PlannerStatus::Infeasible, clock.elapsed().as_secs_f64(), 1));
    }

    for attempt in 0..config.max_attempts {
        // Each attempt continues the sampler sequence so retries explore
        // different homotopy classes while staying deterministic.
        let mut rrt_config = config.rrt.clone();
        rrt_config.seed = config.rrt.seed.wrapping_add(attempt as u64);
        let path = match rrt_connect(model, proxies, &problem.scene, &problem.start, &problem.goal, &rrt_config) {
            Ok(p) => p,
            Err(PlannerError::Timeout(_)) => continue,
            Err(e) => return Err(e),
        };
        let path = shortcut_path(
            model,
            proxies,
            &problem.scene,
            &path,
            rrt_config.edge_resolution,
            config.shortcut_attempts,
            rrt_config.seed,
        );
        let parameterized = match config.horizon {
            Some(h) => time_parameterize_fixed(&path, &model.limits, config.dt, h),
            None => time_parameterize(&path, &model.limits, config.dt),
        };
        let traj = match parameterized {
            Ok(t) => t,
            Err(_) => continue,
        };
        if check_trajectory(model, proxies, &problem.scene, &traj, problem.payload) {
            return Ok(PlannerResult::success(traj, clock.elapsed().as_secs_f64(), attempt + 1));
        }
    }
    Ok(PlannerResult::failure(
        PlannerStatus::Infeasible,
        clock.elapsed().as_secs_f64(),
        config.max_attempts,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use paydiff_core::dynamics::validate_torques;
    use paydiff_core::model::planar3;
    use paydiff_core::scene::Scene;

    fn problem(payload: f64) -> (paydiff_core::model::RobotModel, CollisionProxySet, Problem) {
        let model = planar3();
        let proxies = CollisionProxySet::along_links(&model, 3, 0.05);
        let scene = Scene::tabletop(0.0, None);
        let problem = Problem {
            start: vec![0.5, 0.4, 0.3],
            goal: vec![2.2, -0.6, 0.5],
            scene,
            payload,
        };
        (model, proxies, problem)
    }

    #[test]
    fn zero_payload_succeeds_and_validates() {
        let (model, proxies, problem) = problem(0.0);
        let result = plan_and_filter(&model, &proxies, &problem, &PlanFilterConfig::default()).unwrap();
        assert_eq!(result.status, PlannerStatus::Success);
        assert!(result.is_consistent());
        let traj = result.trajectory.unwrap();
        assert!(validate_torques(&model, &traj, 0.0).unwrap().feasible);
        assert!(check_trajectory(&model, &proxies, &problem.scene, &traj, 0.0));
    }

    #[test]
    fn impossible_payload_exhausts_attempts() {
        let (model, proxies, problem) = problem(250.0);
        let config = PlanFilterConfig { max_attempts: 3, ..PlanFilterConfig::default() };
        let result = plan_and_filter(&model, &proxies, &problem, &config).unwrap();
        assert_eq!(result.status, PlannerStatus::Infeasible);
        assert!(result.trajectory.is_none());
        assert_eq!(result.iterations, 3);
    }

    #[test]
    fn returned_trajectory_passes_requested_payload() {
        let (model, proxies, problem) = problem(1.0);
        let result = plan_and_filter(&model, &proxies, &problem, &PlanFilterConfig::default()).unwrap();
        if let Some(traj) = &result.trajectory {
            assert!(validate_torques(&model, traj, 1.0).unwrap().feasible);
        }
    }

    #[test]
    fn start_equals_goal_constant_trajectory() {
        let (model, proxies, mut problem) = problem(0.0);
        problem.goal = problem.start.clone();
        let result = plan_and_filter(&model, &proxies, &problem, &PlanFilterConfig::default()).unwrap();
        assert_eq!(result.status, PlannerStatus::Success);
        let traj = result.trajectory.unwrap();
        assert_eq!(traj.position(0), problem.start.as_slice());
        assert_eq!(traj.position(traj.horizon() - 1), problem.start.as_slice());
    }

    #[test]
    fn fixed_horizon_output() {
        let (model, proxies, problem) = problem(0.0);
        let config = PlanFilterConfig { horizon: Some(64), ..PlanFilterConfig::default() };
        let result = plan_and_filter(&model, &proxies, &problem, &config).unwrap();
        assert_eq!(result.trajectory.unwrap().horizon(), 64);
    }
}
