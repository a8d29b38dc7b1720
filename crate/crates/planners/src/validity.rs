//! Internal full-validity gate every planner runs before reporting success.
//! The eval crate re-implements this check independently for scoring.

use paydiff_core::dynamics::validate_torques;
use paydiff_core::model::RobotModel;
use paydiff_core::scene::{in_collision, CollisionProxySet, Scene};
use paydiff_core::trajectory::Trajectory;

/// Consistency tolerances derived from the model's jerk limits and the
/// sample spacing: central differences of a jerk-limited signal deviate from
/// the true derivative by at most j dt^2 / 6 (velocity check) and j dt / 2
/// (acceleration check at jerk discontinuities).
pub fn consistency_tolerances(model: &RobotModel, dt: f64) -> (f64, f64) {
    let j_max = model.limits.iter().map(|l| l.j_max).fold(0.0, f64::max);
    let tol_vel = (j_max * dt * dt / 4.0).max(1e-6);
    let tol_acc = (j_max * dt * 0.75).max(1e-6);
    (tol_vel, tol_acc)
}

/// True when the trajectory respects kinematic limits, stays collision-free,
/// is finite-difference consistent, and satisfies torque limits at `payload`.
pub fn check_trajectory(
    model: &RobotModel,
    proxies: &CollisionProxySet,
    scene: &Scene,
    traj: &Trajectory,
    payload: f64,
) -> bool {
    if !traj.within_kinematic_limits(model, 1e-9) {
        return false;
    }
    let (tol_vel, tol_acc) = consistency_tolerances(model, traj.dt);
    let report = traj.check_consistency(tol_vel.max(tol_acc));
    if report.max_vel_dev > tol_vel || report.max_acc_dev > tol_acc {
        return false;
    }
    for t in 0..traj.horizon() {
        if in_collision(model, proxies, scene, traj.position(t)) {
            return false;
        }
    }
    match validate_torques(model, traj, payload) {
        Ok(profile) => profile.feasible,
        Err(_) => false,
    }
}
