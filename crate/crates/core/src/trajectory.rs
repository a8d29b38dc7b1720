//! Fixed-horizon joint-space trajectories storing the full state
//! (q, qd, qdd) per waypoint, plus consistency checking, time scaling, and
//! a binary exchange format.

use crate::model::RobotModel;
use crate::scene::Scene;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const TRAJECTORY_MAGIC: [u8; 4] = *b"PDTJ";
pub const TRAJECTORY_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("trajectory must have horizon >= 2, got {0}")]
    HorizonTooShort(usize),
    #[error("dt must be > 0, got {0}")]
    BadDt(f64),
    #[error("time scale factor must be > 0, got {0}")]
    BadScale(f64),
    #[error("state row length {got} does not match 3 * n_dof = {expected}")]
    BadStateWidth { got: usize, expected: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes; not a trajectory file")]
    BadMagic,
    #[error("unsupported trajectory file version {0}")]
    BadVersion(u32),
    #[error("corrupt trajectory file: {0}")]
    Corrupt(String),
}

/// A trajectory of `horizon` waypoints at uniform spacing `dt`; each
/// waypoint stores `[q, qd, qdd]` concatenated (3 * n_dof values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub n_dof: usize,
    /// Row-major `horizon x (3 n_dof)` state matrix.
    pub states: Vec<f64>,
}

impl Trajectory {
    pub fn new(dt: f64, n_dof: usize, states: Vec<f64>) -> Result<Self, TrajectoryError> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(TrajectoryError::BadDt(dt));
        }
        let width = 3 * n_dof;
        if width == 0 || states.len() % width != 0 {
            return Err(TrajectoryError::BadStateWidth { got: states.len(), expected: width });
        }
        let horizon = states.len() / width;
        if horizon < 2 {
            return Err(TrajectoryError::HorizonTooShort(horizon));
        }
        Ok(Trajectory { dt, n_dof, states })
    }

    /// Builds the state sequence from positions alone: velocities are the
    /// central differences of positions and accelerations the central
    /// differences of those velocities, with rest (zero) boundary rows.
    /// Trajectories built this way are exactly finite-difference consistent.
    pub fn from_positions(dt: f64, n_dof: usize, positions: &[Vec<f64>]) -> Result<Self, TrajectoryError> {
        let horizon = positions.len();
        if horizon < 2 {
            return Err(TrajectoryError::HorizonTooShort(horizon));
        }
        for row in positions {
            if row.len() != n_dof {
                return Err(TrajectoryError::BadStateWidth { got: row.len(), expected: n_dof });
            }
        }
        let mut vel = vec![vec![0.0; n_dof]; horizon];
        for t in 1..horizon - 1 {
            for j in 0..n_dof {
                vel[t][j] = (positions[t + 1][j] - positions[t - 1][j]) / (2.0 * dt);
            }
        }
        let mut acc = vec![vec![0.0; n_dof]; horizon];
        for t in 1..horizon - 1 {
            for j in 0..n_dof {
                acc[t][j] = (vel[t + 1][j] - vel[t - 1][j]) / (2.0 * dt);
            }
        }
        let mut states = Vec::with_capacity(horizon * 3 * n_dof);
        for t in 0..horizon {
            states.extend_from_slice(&positions[t]);
            states.extend_from_slice(&vel[t]);
            states.extend_from_slice(&acc[t]);
        }
        Trajectory::new(dt, n_dof, states)
    }

    pub fn horizon(&self) -> usize {
        self.states.len() / (3 * self.n_dof)
    }

    pub fn duration(&self) -> f64 {
        (self.horizon() - 1) as f64 * self.dt
    }

    pub fn state(&self, t: usize) -> &[f64] {
        let w = 3 * self.n_dof;
        &self.states[t * w..(t + 1) * w]
    }

    pub fn state_mut(&mut self, t: usize) -> &mut [f64] {
        let w = 3 * self.n_dof;
        &mut self.states[t * w..(t + 1) * w]
    }

    pub fn position(&self, t: usize) -> &[f64] {
        &self.state(t)[..self.n_dof]
    }

    pub fn velocity(&self, t: usize) -> &[f64] {
        &self.state(t)[self.n_dof..2 * self.n_dof]
    }

    pub fn acceleration(&self, t: usize) -> &[f64] {
        &self.state(t)[2 * self.n_dof..]
    }

    /// dt' = s dt, positions unchanged, velocities / s, accelerations / s^2.
    pub fn time_scale(&self, s: f64) -> Result<Trajectory, TrajectoryError> {
        if s <= 0.0 || !s.is_finite() {
            return Err(TrajectoryError::BadScale(s));
        }
        let mut out = self.clone();
        out.dt = self.dt * s;
        let n = self.n_dof;
        for t in 0..self.horizon() {
            let row = out.state_mut(t);
            for j in 0..n {
                row[n + j] /= s;
                row[2 * n + j] /= s * s;
            }
        }
        Ok(out)
    }

    /// Maximum deviation between stored derivatives and central finite
    /// differences of the stored positions/velocities over interior waypoints.
    pub fn check_consistency(&self, tol: f64) -> ConsistencyReport {
        let n = self.n_dof;
        let h = self.horizon();
        let mut max_vel_dev: f64 = 0.0;
        let mut max_acc_dev: f64 = 0.0;
        for t in 1..h - 1 {
            for j in 0..n {
                let fd_v = (self.position(t + 1)[j] - self.position(t - 1)[j]) / (2.0 * self.dt);
                max_vel_dev = max_vel_dev.max((fd_v - self.velocity(t)[j]).abs());
                let fd_a = (self.velocity(t + 1)[j] - self.velocity(t - 1)[j]) / (2.0 * self.dt);
                max_acc_dev = max_acc_dev.max((fd_a - self.acceleration(t)[j]).abs());
            }
        }
        ConsistencyReport { max_vel_dev, max_acc_dev, tol, pass: max_vel_dev <= tol && max_acc_dev <= tol }
    }

    /// True when every waypoint satisfies the model's position, velocity, and
    /// acceleration limits within `eps`.
    pub fn within_kinematic_limits(&self, model: &RobotModel, eps: f64) -> bool {
        for t in 0..self.horizon() {
            for (j, lim) in model.limits.iter().enumerate() {
                if self.position(t)[j] < lim.q_min - eps || self.position(t)[j] > lim.q_max + eps {
                    return false;
                }
                if self.velocity(t)[j].abs() > lim.v_max + eps {
                    return false;
                }
                if self.acceleration(t)[j].abs() > lim.a_max + eps {
                    return false;
                }
            }
        }
        true
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), TrajectoryError> {
        w.write_all(&TRAJECTORY_MAGIC)?;
        w.write_all(&TRAJECTORY_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_dof as u32).to_le_bytes())?;
        w.write_all(&(self.horizon() as u32).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        for v in &self.states {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, TrajectoryError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| TrajectoryError::Corrupt("truncated header".into()))?;
        if magic != TRAJECTORY_MAGIC {
            return Err(TrajectoryError::BadMagic);
        }
        let version = read_u32(r)?;
        if version != TRAJECTORY_VERSION {
            return Err(TrajectoryError::BadVersion(version));
        }
        let n_dof = read_u32(r)? as usize;
        let horizon = read_u32(r)? as usize;
        let dt = read_f64(r)?;
        let count = horizon
            .checked_mul(3 * n_dof)
            .ok_or_else(|| TrajectoryError::Corrupt("state count overflow".into()))?;
        let mut states = Vec::with_capacity(count);
        for _ in 0..count {
            states.push(read_f64(r)?);
        }
        Trajectory::new(dt, n_dof, states)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrajectoryError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrajectoryError> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut file)
    }

    /// Human-readable JSON dump for debugging.
    pub fn to_debug_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serialization cannot fail")
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32, TrajectoryError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| TrajectoryError::Corrupt("truncated u32".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read) -> Result<f64, TrajectoryError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|_| TrajectoryError::Corrupt("truncated f64".into()))?;
    Ok(f64::from_le_bytes(buf))
}

#[derive(Debug, Clone, Copy)]
pub struct ConsistencyReport {
    pub max_vel_dev: f64,
    pub max_acc_dev: f64,
    pub tol: f64,
    pub pass: bool,
}

/// A point-to-point planning task: rest-to-rest motion between two joint
/// configurations through a scene, carrying `payload` kg.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Problem {
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    pub scene: Scene,
    pub payload: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quintic_blend(s: f64) -> (f64, f64, f64) {
        let p = 10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5);
        let v = 30.0 * s.powi(2) - 60.0 * s.powi(3) + 30.0 * s.powi(4);
        let a = 60.0 * s - 180.0 * s.powi(2) + 120.0 * s.powi(3);
        (p, v, a)
    }

    /// Rest-to-rest quintic of displacement `d` over duration `big_t`,
    /// sampled with analytic derivatives.
    fn quintic_trajectory(d: f64, big_t: f64, dt: f64) -> Trajectory {
        let horizon = (big_t / dt).round() as usize + 1;
        let mut states = Vec::new();
        for t in 0..horizon {
            let s = (t as f64 * dt / big_t).min(1.0);
            let (p, v, a) = quintic_blend(s);
            states.push(d * p);
            states.push(d * v / big_t);
            states.push(d * a / (big_t * big_t));
        }
        Trajectory::new(dt, 1, states).unwrap()
    }

    #[test]
    fn quintic_sampled_is_consistent() {
        let traj = quintic_trajectory(1.0, 2.0, 0.01);
        let report = traj.check_consistency(1e-3);
        assert!(report.pass, "vel dev {} acc dev {}", report.max_vel_dev, report.max_acc_dev);
    }

    #[test]
    fn constant_trajectory_has_zero_deviation() {
        let states: Vec<f64> = [0.7, 0.0, 0.0].repeat(10);
        let traj = Trajectory::new(0.05, 1, states).unwrap();
        let report = traj.check_consistency(0.0);
        assert_eq!(report.max_vel_dev, 0.0);
        assert_eq!(report.max_acc_dev, 0.0);
        assert!(report.pass);
    }

    #[test]
    fn corrupted_velocity_fails_consistency() {
        let mut traj = quintic_trajectory(1.0, 2.0, 0.01);
        let mid = traj.horizon() / 2;
        traj.state_mut(mid)[1] += 0.1;
        assert!(!traj.check_consistency(1e-3).pass);
    }

    #[test]
    fn from_positions_is_exactly_consistent() {
        let positions: Vec<Vec<f64>> =
            (0..30).map(|t| vec![(t as f64 * 0.1).sin(), (t as f64 * 0.07).cos()]).collect();
        let traj = Trajectory::from_positions(0.08, 2, &positions).unwrap();
        let report = traj.check_consistency(0.0);
        assert_eq!(report.max_vel_dev, 0.0);
        assert_eq!(report.max_acc_dev, 0.0);
        assert_eq!(traj.velocity(0), &[0.0, 0.0]);
        assert_eq!(traj.acceleration(traj.horizon() - 1), &[0.0, 0.0]);
    }

    #[test]
    fn time_scale_identity_and_chain_rule() {
        let traj = quintic_trajectory(1.0, 2.0, 0.02);
        let same = traj.time_scale(1.0).unwrap();
        assert_eq!(traj, same);
        let slow = traj.time_scale(2.0).unwrap();
        assert_eq!(slow.dt, traj.dt * 2.0);
        for t in 0..traj.horizon() {
            assert_eq!(slow.position(t)[0], traj.position(t)[0]);
            assert_eq!(slow.velocity(t)[0], traj.velocity(t)[0] / 2.0);
            assert_eq!(slow.acceleration(t)[0], traj.acceleration(t)[0] / 4.0);
        }
        assert!(traj.time_scale(0.0).is_err());
        assert!(traj.time_scale(-1.0).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let traj = quintic_trajectory(0.8, 1.5, 0.05);
        let mut buf = Vec::new();
        traj.write_to(&mut buf).unwrap();
        let back = Trajectory::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(traj, back);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let traj = quintic_trajectory(0.8, 1.5, 0.05);
        let mut buf = Vec::new();
        traj.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 5);
        match Trajectory::read_from(&mut buf.as_slice()) {
            Err(TrajectoryError::Corrupt(_)) => {}
            other => panic!("expected corrupt error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let buf = b"NOPE0000000000000000000000000000".to_vec();
        assert!(matches!(Trajectory::read_from(&mut buf.as_slice()), Err(TrajectoryError::BadMagic)));
    }

    #[test]
    fn horizon_one_rejected() {
        assert!(matches!(
            Trajectory::new(0.1, 1, vec![0.0, 0.0, 0.0]),
            Err(TrajectoryError::HorizonTooShort(1))
        ));
    }
}
