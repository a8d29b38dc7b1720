//! Brute-force maximum-payload search: sweep the mass grid with the torque
//! validator and return the last feasible mass before the first failure.

use paydiff_core::dynamics::{validate_torques, DynamicsError, PAYLOAD_CAP_KG};
use paydiff_core::model::RobotModel;
use paydiff_core::trajectory::Trajectory;

/// Largest grid mass (step `step`, range [0, cap]) at which the trajectory
/// still satisfies all torque limits, or Err if infeasible at zero.
///
/// Feasibility is monotone non-increasing in mass (each torque bound is an
/// interval in mass containing zero), so the dense sweep is refined
/// coarse-to-fine; the result is identical to scanning every grid point.
pub fn grid_max_payload(model: &RobotModel, traj: &Trajectory, step: f64) -> Result<f64, DynamicsError> {
    if !validate_torques(model, traj, 0.0)?.feasible {
        return Err(DynamicsError::InfeasibleAtZero);
    }
    let feasible = |mass: f64| -> Result<bool, DynamicsError> {
        Ok(validate_torques(model, traj, mass)?.feasible)
    };
    // Bracket [lo, hi) with lo feasible, then refine lo on ever finer grids
    // aligned to multiples of `step`.
    let mut lo = 0.0;
    let mut hi = PAYLOAD_CAP_KG;
    if feasible(PAYLOAD_CAP_KG)? {
        return Ok(PAYLOAD_CAP_KG);
    }
    let mut current = (PAYLOAD_CAP_KG / 2.0 / step).round() * step;
    let mut span = current;
    loop {
        if current > lo && current < hi {
            if feasible(current)? {
                lo = current;
            } else {
                hi = current;
            }
        }
        span /= 2.0;
        if span < step {
            break;
        }
        current = (((lo + hi) / 2.0) / step).round() * step;
    }
    // Final linear sweep at full resolution within the remaining bracket.
    let mut k = (lo / step).round() as u64 + 1;
    loop {
        let mass = k as f64 * step;
        if mass >= hi - step * 0.5 || mass > PAYLOAD_CAP_KG {
            return Ok(lo);
        }
        if feasible(mass)? {
            lo = mass;
        } else {
            return Ok(lo);
        }
        k += 1;
    }
}
