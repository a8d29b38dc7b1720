//! Inverse dynamics by recursive Newton-Euler over the chain, the payload
//! gravity-wrench mapping, torque-limit validation, and closed-form
//! maximum-supported-payload labeling.
//!
//! The external wrench enters the torque equation as `J^T f_ext`. The
//! payload is a point mass at the end-effector whose gravity wrench is
//! `m g [0, 0, -1, 0, 0, 0]` in the world frame, so for fixed states the
//! torque is affine in the payload mass.

use crate::kinematics::forward_kinematics;
use crate::model::{ModelError, RobotModel};
use crate::trajectory::Trajectory;
use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use thiserror::Error;

/// Payload masses are labeled within [0, 18] kg, matching the 19-bin
/// payload encodings.
pub const PAYLOAD_CAP_KG: f64 = 18.0;

pub const GRAVITY_ACCEL: f64 = 9.81;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("dimension mismatch: expected {expected} values for {what}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("non-finite input in {0}")]
    NonFinite(&'static str),
    #[error("payload mass must be >= 0, got {0}")]
    NegativeMass(f64),
    #[error("trajectory has zero horizon")]
    EmptyTrajectory,
    #[error("trajectory is infeasible at zero payload")]
    InfeasibleAtZero,
}

/// Gravity wrench of a point-mass payload at the end-effector, world frame.
#[derive(Debug, Clone, Copy)]
pub struct PayloadWrench {
    pub mass: f64,
    pub wrench_world: Vector6<f64>,
}

impl PayloadWrench {
    pub fn new(mass: f64) -> Result<Self, DynamicsError> {
        if mass < 0.0 {
            return Err(DynamicsError::NegativeMass(mass));
        }
        let mut wrench = Vector6::zeros();
        wrench[2] = -mass * GRAVITY_ACCEL;
        Ok(PayloadWrench { mass, wrench_world: wrench })
    }
}

/// Joint torques along a trajectory at one payload, with per-joint margins
/// to the torque limit.
#[derive(Debug, Clone)]
pub struct TorqueProfile {
    /// Row-major `horizon x n_dof` torques, N m.
    pub torques: Vec<Vec<f64>>,
    /// `tau_max - |tau|` per waypoint and joint; negative means violation.
    pub margins: Vec<Vec<f64>>,
    pub feasible: bool,
}

impl TorqueProfile {
    pub fn min_margin(&self) -> f64 {
        self.margins
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_vec(name: &'static str, v: &[f64], n: usize) -> Result<(), DynamicsError> {
    if v.len() != n {
        return Err(DynamicsError::Dimension { what: name, expected: n, got: v.len() });
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(DynamicsError::NonFinite(name));
    }
    Ok(())
}

/// Joint torques for the given motion state and external end-effector
/// wrench (world frame, `[force; torque]`):
/// `tau = M(q) qdd + C(q, qd) qd + g(q) + f(qd) + J^T f_ext`.
///
/// Computed by a world-frame Newton-Euler recursion with gravity folded in
/// as a fictitious base acceleration.
pub fn inverse_dynamics(
    model: &RobotModel,
    q: &[f64],
    qd: &[f64],
    qdd: &[f64],
    f_ext: &Vector6<f64>,
) -> Result<DVector<f64>, DynamicsError> {
    let n = model.n_dof();
    check_vec("q", q, n)?;
    check_vec("qd", qd, n)?;
    check_vec("qdd", qdd, n)?;
    if !f_ext.iter().all(|x| x.is_finite()) {
        return Err(DynamicsError::NonFinite("f_ext"));
    }

    let frames = forward_kinematics(model, q)?;
    let ee_pos = frames.ee_position();

    // Forward pass: world-frame angular/linear velocity and acceleration of
    // each joint frame origin. The base "accelerates" at -g so gravity
    // appears in every link's Newton equation automatically.
    let mut omega = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    let mut acc = Vec::with_capacity(n);
    let mut prev_omega = Vector3::zeros();
    let mut prev_alpha = Vector3::zeros();
    let mut prev_acc = -model.gravity_vector();
    let mut prev_pos = Vector3::zeros();
    for i in 0..n {
        let pos = frames.joint_position(i);
        let axis = frames.joint_axis(model, i);
        let r = pos - prev_pos;
        let a_here = prev_acc + prev_alpha.cross(&r) + prev_omega.cross(&prev_omega.cross(&r));
        let w = prev_omega + axis * qd[i];
        let al = prev_alpha + axis * qdd[i] + prev_omega.cross(&(axis * qd[i]));
        omega.push(w);
        alpha.push(al);
        acc.push(a_here);
        prev_omega = w;
        prev_alpha = al;
        prev_acc = a_here;
        prev_pos = pos;
    }

    // Per-link inertial force/torque at the COM.
    let mut com_world = Vec::with_capacity(n);
    let mut force_inertial = Vec::with_capacity(n);
    let mut torque_inertial = Vec::with_capacity(n);
    for i in 0..n {
        let rot = frames.joints[i].rotation;
        let r_c = rot * model.links[i].com_vector();
        let c = frames.joint_position(i) + r_c;
        let a_c = acc[i] + alpha[i].cross(&r_c) + omega[i].cross(&omega[i].cross(&r_c));
        let rot_m = rot.to_rotation_matrix();
        let inertia_w = rot_m.matrix() * model.links[i].inertia_matrix() * rot_m.matrix().transpose();
        com_world.push(c);
        force_inertial.push(model.links[i].mass * a_c);
        torque_inertial.push(inertia_w * alpha[i] + omega[i].cross(&(inertia_w * omega[i])));
    }

    // Backward pass. f_ext uses the robot-acts-on-environment sign so the
    // result carries +J^T f_ext.
    let ext_force = Vector3::new(f_ext[0], f_ext[1], f_ext[2]);
    let ext_torque = Vector3::new(f_ext[3], f_ext[4], f_ext[5]);
    let mut tau = DVector::zeros(n);
    let mut child_force = Vector3::zeros();
    let mut child_torque = Vector3::zeros();
    let mut child_pos = Vector3::zeros();
    for i in (0..n).rev() {
        let c = com_world[i];
        let p = frames.joint_position(i);
        let mut f = force_inertial[i] + child_force;
        let mut t = torque_inertial[i] + child_torque + (child_pos - c).cross(&child_force);
        if i == n - 1 {
            f += ext_force;
            t += ext_torque + (ee_pos - c).cross(&ext_force);
        }
        // Move the torque reference point from the COM to the joint origin.
        let n_joint = t + (c - p).cross(&f);
        let axis = frames.joint_axis(model, i);
        tau[i] = axis.dot(&n_joint) + model.friction[i].torque(qd[i]);
        child_force = f;
        child_torque = n_joint;
        child_pos = p;
    }
    Ok(tau)
}

/// Gravity-compensation torque `g(q)` plus zero-velocity friction (zero).
pub fn gravity_torque(model: &RobotModel, q: &[f64]) -> Result<DVector<f64>, DynamicsError> {
    let zeros = vec![0.0; model.n_dof()];
    inverse_dynamics(model, q, &zeros, &zeros, &Vector6::zeros())
}

/// Joint-space inertia matrix assembled column by column:
/// column j = inverse_dynamics(q, 0, e_j, 0) - g(q).
pub fn mass_matrix(model: &RobotModel, q: &[f64]) -> Result<DMatrix<f64>, DynamicsError> {
    let n = model.n_dof();
    let gravity = gravity_torque(model, q)?;
    let zeros = vec![0.0; n];
    let mut m = DMatrix::zeros(n, n);
    let mut unit = vec![0.0; n];
    for j in 0..n {
        unit[j] = 1.0;
        let tau = inverse_dynamics(model, q, &zeros, &unit, &Vector6::zeros())?;
        for i in 0..n {
            m[(i, j)] = tau[i] - gravity[i];
        }
        unit[j] = 0.0;
    }
    Ok(m)
}

/// Joint torques induced by a payload of `mass` kg held at the
/// end-effector: `J(q)^T * PayloadWrench(mass)`. Linear in mass.
pub fn payload_torque(model: &RobotModel, q: &[f64], mass: f64) -> Result<DVector<f64>, DynamicsError> {
    let wrench = PayloadWrench::new(mass)?;
    let jac = crate::kinematics::jacobian(model, q)?;
    Ok(jac.transpose() * wrench.wrench_world)
}

/// Torque profile of a trajectory carrying `mass` kg; feasible iff every
/// waypoint and joint satisfies |tau| <= tau_max.
pub fn validate_torques(
    model: &RobotModel,
    traj: &Trajectory,
    mass: f64,
) -> Result<TorqueProfile, DynamicsError> {
    if traj.horizon() == 0 {
        return Err(DynamicsError::EmptyTrajectory);
    }
    let wrench = PayloadWrench::new(mass)?;
    let n = model.n_dof();
    let mut torques = Vec::with_capacity(traj.horizon());
    let mut margins = Vec::with_capacity(traj.horizon());
    let mut feasible = true;
    for t in 0..traj.horizon() {
        let tau = inverse_dynamics(
            model,
            traj.position(t),
            traj.velocity(t),
            traj.acceleration(t),
            &wrench.wrench_world,
        )?;
        let mut margin_row = Vec::with_capacity(n);
        for j in 0..n {
            let margin = model.limits[j].tau_max - tau[j].abs();
            if margin < 0.0 {
                feasible = false;
            }
            margin_row.push(margin);
        }
        torques.push(tau.iter().copied().collect());
        margins.push(margin_row);
    }
    Ok(TorqueProfile { torques, margins, feasible })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxPayload {
    /// Largest feasible mass, clamped to [0, PAYLOAD_CAP_KG].
    Supported(f64),
    /// The trajectory violates torque limits already with no payload.
    InfeasibleAtZero,
}

impl MaxPayload {
    pub fn mass(&self) -> Option<f64> {
        match self {
            MaxPayload::Supported(m) => Some(*m),
            MaxPayload::InfeasibleAtZero => None,
        }
    }
}

/// Closed-form maximum supported payload. Since
/// `tau_t(m) = tau_t(0) + m * payload_torque(q_t, 1)`, each (waypoint,
/// joint) pair constrains the mass to an interval; the answer is the
/// minimum of the interval upper bounds over all pairs, clamped to the cap.
pub fn max_supported_payload(model: &RobotModel, traj: &Trajectory) -> Result<MaxPayload, DynamicsError> {
    if traj.horizon() == 0 {
        return Err(DynamicsError::EmptyTrajectory);
    }
    let n = model.n_dof();
    let mut upper = PAYLOAD_CAP_KG;
    for t in 0..traj.horizon() {
        let q = traj.position(t);
        let tau0 = inverse_dynamics(model, q, traj.velocity(t), traj.acceleration(t), &Vector6::zeros())?;
        let slope = payload_torque(model, q, 1.0)?;
        for j in 0..n {
            let tau_max = model.limits[j].tau_max;
            if tau0[j].abs() > tau_max {
                return Ok(MaxPayload::InfeasibleAtZero);
            }
            let s = slope[j];
            if s.abs() < 1e-12 {
                continue;
            }
            // |tau0 + m s| <= tau_max for m in [lo, hi]; with m = 0 feasible
            // the binding bound for m >= 0 is the positive-side root.
            let hi = if s > 0.0 { (tau_max - tau0[j]) / s } else { (-tau_max - tau0[j]) / s };
            upper = upper.min(hi);
        }
    }
    Ok(MaxPayload::Supported(upper.clamp(0.0, PAYLOAD_CAP_KG)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_models, pendulum, planar2, planar3};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_state(model: &RobotModel, rng: &mut ChaCha12Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let q = model.limits.iter().map(|l| rng.random_range(l.q_min..l.q_max)).collect();
        let qd = model.limits.iter().map(|l| rng.random_range(-l.v_max..l.v_max)).collect();
        let qdd = model.limits.iter().map(|l| rng.random_range(-l.a_max..l.a_max)).collect();
        (q, qd, qdd)
    }

    #[test]
    fn pendulum_horizontal_static_torque() {
        let model = pendulum(1.0, 1.0, 50.0);
        let tau = inverse_dynamics(&model, &[0.0], &[0.0], &[0.0], &Vector6::zeros()).unwrap();
        assert_abs_diff_eq!(tau[0], 9.81, epsilon = 1e-12);
    }

    #[test]
    fn pendulum_vertical_zero_torque() {
        let model = pendulum(1.0, 1.0, 50.0);
        let q = [std::f64::consts::FRAC_PI_2];
        let tau = inverse_dynamics(&model, &q, &[0.0], &[0.0], &Vector6::zeros()).unwrap();
        assert_abs_diff_eq!(tau[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn planar2_mass_matrix_closed_form() {
        // Unit point masses at unit link tips: M(0) = [[5, 2], [2, 1]].
        let model = planar2();
        let m = mass_matrix(&model, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(m[(0, 0)], 5.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m[(0, 1)], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m[(1, 0)], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m[(1, 1)], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn mass_matrix_symmetric_positive_definite() {
        for name in ["planar2", "planar3", "arm7"] {
            let model = builtin_models(name).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(9);
            for _ in 0..50 {
                let (q, _, _) = random_state(&model, &mut rng);
                let m = mass_matrix(&model, &q).unwrap();
                assert!((m.clone() - m.transpose()).norm() <= 1e-9, "{name}: asymmetry");
                for _ in 0..10 {
                    let x: DVector<f64> =
                        DVector::from_fn(model.n_dof(), |_, _| rng.random_range(-1.0..1.0));
                    if x.norm() > 1e-6 {
                        assert!((x.transpose() * &m * &x)[0] > 0.0, "{name}: not PD");
                    }
                }
            }
        }
    }

    #[test]
    fn payload_torque_zero_mass() {
        let model = planar3();
        let tau = payload_torque(&model, &[0.5, -0.3, 0.2], 0.0).unwrap();
        assert!(tau.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn payload_torque_rejects_negative_mass() {
        let model = planar3();
        assert!(matches!(
            payload_torque(&model, &[0.0, 0.0, 0.0], -1.0),
            Err(DynamicsError::NegativeMass(_))
        ));
    }

    #[test]
    fn payload_wrench_is_pure_downward_force() {
        let w = PayloadWrench::new(2.0).unwrap();
        assert_eq!(w.wrench_world[2], -2.0 * GRAVITY_ACCEL);
        for i in [0, 1, 3, 4, 5] {
            assert_eq!(w.wrench_world[i], 0.0);
        }
    }

    #[test]
    fn payload_torque_matches_rnea_difference() {
        for name in ["planar3", "arm7"] {
            let model = builtin_models(name).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(5);
            for _ in 0..30 {
                let (q, _, _) = random_state(&model, &mut rng);
                let zeros = vec![0.0; model.n_dof()];
                let mass = rng.random_range(0.0..6.0);
                let wrench = PayloadWrench::new(mass).unwrap();
                let with = inverse_dynamics(&model, &q, &zeros, &zeros, &wrench.wrench_world).unwrap();
                let without = inverse_dynamics(&model, &q, &zeros, &zeros, &Vector6::zeros()).unwrap();
                let direct = payload_torque(&model, &q, mass).unwrap();
                for j in 0..model.n_dof() {
                    assert_abs_diff_eq!(with[j] - without[j], direct[j], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn torque_is_affine_in_mass() {
        let model = builtin_models("arm7").unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..20 {
            let (q, qd, qdd) = random_state(&model, &mut rng);
            let taus: Vec<DVector<f64>> = [0.0, 1.0, 2.0]
                .iter()
                .map(|&m| {
                    let w = PayloadWrench::new(m).unwrap();
                    inverse_dynamics(&model, &q, &qd, &qdd, &w.wrench_world).unwrap()
                })
                .collect();
            for j in 0..model.n_dof() {
                // Three-point collinearity: tau(2) - 2 tau(1) + tau(0) = 0.
                let second_diff = taus[2][j] - 2.0 * taus[1][j] + taus[0][j];
                assert!(second_diff.abs() <= 1e-10, "joint {j}: {second_diff}");
            }
        }
    }

    #[test]
    fn static_feasibility_examples() {
        // All-zero static trajectory with generous limits is feasible.
        let model = planar2();
        let states = vec![0.0; 3 * 2 * 4];
        let traj = Trajectory::new(0.1, 2, states).unwrap();
        let profile = validate_torques(&model, &traj, 0.0).unwrap();
        assert!(profile.feasible);

        // Horizontal pendulum with tau_max = 5 and gravity torque 9.81.
        let weak = pendulum(1.0, 1.0, 5.0);
        let static_traj = Trajectory::new(0.1, 1, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let profile = validate_torques(&weak, &static_traj, 0.0).unwrap();
        assert!(!profile.feasible);
        assert!(profile.min_margin() < 0.0);
    }

    #[test]
    fn max_payload_pendulum_closed_form() {
        // Massless horizontal link, tau_max = 50: m_max = 50 / 9.81.
        let model = pendulum(0.0, 1.0, 50.0);
        let static_traj = Trajectory::new(0.1, 1, vec![0.0; 6]).unwrap();
        let label = max_supported_payload(&model, &static_traj).unwrap();
        assert_abs_diff_eq!(label.mass().unwrap(), 50.0 / 9.81, epsilon = 1e-9);
    }

    #[test]
    fn max_payload_caps_when_no_moment_arm() {
        // Vertical chain directly above the base: the payload wrench has no
        // moment arm so any mass within the cap is supported.
        let model = pendulum(0.0, 1.0, 50.0);
        let q = std::f64::consts::FRAC_PI_2;
        let states = vec![q, 0.0, 0.0, q, 0.0, 0.0];
        let traj = Trajectory::new(0.1, 1, states).unwrap();
        let label = max_supported_payload(&model, &traj).unwrap();
        assert_eq!(label, MaxPayload::Supported(PAYLOAD_CAP_KG));
    }

    #[test]
    fn max_payload_infeasible_at_zero() {
        let model = pendulum(10.0, 1.0, 5.0);
        let traj = Trajectory::new(0.1, 1, vec![0.0; 6]).unwrap();
        assert_eq!(max_supported_payload(&model, &traj).unwrap(), MaxPayload::InfeasibleAtZero);
    }

    #[test]
    fn feasibility_monotone_in_mass() {
        let model = planar3();
        let mut rng = ChaCha12Rng::seed_from_u64(2024);
        for _ in 0..25 {
            // Smooth random rest-to-rest motion built from positions.
            let q0: Vec<f64> = model.limits.iter().map(|l| rng.random_range(l.q_min..l.q_max)).collect();
            let q1: Vec<f64> = model.limits.iter().map(|l| rng.random_range(l.q_min..l.q_max)).collect();
            let horizon = 40;
            let positions: Vec<Vec<f64>> = (0..horizon)
                .map(|t| {
                    let s = t as f64 / (horizon - 1) as f64;
                    let blend = 10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5);
                    q0.iter().zip(&q1).map(|(a, b)| a + (b - a) * blend).collect()
                })
                .collect();
            let traj = Trajectory::from_positions(0.12, 3, &positions).unwrap();

            // Feasibility is monotone non-increasing over the mass grid.
            let mut last = true;
            let mut mass = 0.0;
            while mass <= PAYLOAD_CAP_KG {
                let feasible = validate_torques(&model, &traj, mass).unwrap().feasible;
                assert!(!feasible || last, "feasibility regained at mass {mass}");
                last = feasible;
                mass += 0.5;
            }
        }
    }

    #[test]
    fn dimension_and_finite_checks() {
        let model = planar2();
        assert!(inverse_dynamics(&model, &[0.0], &[0.0, 0.0], &[0.0, 0.0], &Vector6::zeros()).is_err());
        assert!(inverse_dynamics(&model, &[f64::NAN, 0.0], &[0.0, 0.0], &[0.0, 0.0], &Vector6::zeros()).is_err());
    }
}
