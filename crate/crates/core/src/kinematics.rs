//! Forward kinematics and geometric Jacobians for serial revolute chains.

use crate::model::{ModelError, RobotModel};
use nalgebra::{DMatrix, Isometry3, UnitQuaternion, Vector3};

/// World transforms of every joint frame plus the end-effector pose.
#[derive(Debug, Clone)]
pub struct Frames {
    pub joints: Vec<Isometry3<f64>>,
    pub ee_pose: Isometry3<f64>,
}

impl Frames {
    pub fn joint_position(&self, i: usize) -> Vector3<f64> {
        self.joints[i].translation.vector
    }

    /// World-frame rotation axis of joint `i`.
    pub fn joint_axis(&self, model: &RobotModel, i: usize) -> Vector3<f64> {
        self.joints[i].rotation * model.joints[i].axis_vector()
    }

    pub fn ee_position(&self) -> Vector3<f64> {
        self.ee_pose.translation.vector
    }
}

fn check_dim(model: &RobotModel, q: &[f64]) -> Result<(), ModelError> {
    if q.len() != model.n_dof() {
        return Err(ModelError::Invalid {
            path: "q".into(),
            message: format!("expected {} joint values, got {}", model.n_dof(), q.len()),
        });
    }
    Ok(())
}

/// Composes the chain of fixed transforms and joint rotations left to right
/// from the base; `ee_pose` is the last joint frame composed with the
/// end-effector offset.
pub fn forward_kinematics(model: &RobotModel, q: &[f64]) -> Result<Frames, ModelError> {
    check_dim(model, q)?;
    let mut joints = Vec::with_capacity(model.n_dof());
    let mut current = Isometry3::identity();
    for (joint, &angle) in model.joints.iter().zip(q) {
        let spin = UnitQuaternion::from_axis_angle(
            &nalgebra::Unit::new_normalize(joint.axis_vector()),
            angle,
        );
        current = current * joint.fixed_transform() * Isometry3::from_parts(nalgebra::Translation3::identity(), spin);
        joints.push(current);
    }
    let ee_pose = current * model.ee_offset.fixed_transform();
    Ok(Frames { joints, ee_pose })
}

/// 6 x n geometric Jacobian at the end-effector, linear rows on top:
/// column i = [z_i x (p_ee - p_i); z_i] for revolute joint i.
pub fn jacobian(model: &RobotModel, q: &[f64]) -> Result<DMatrix<f64>, ModelError> {
    let frames = forward_kinematics(model, q)?;
    Ok(point_jacobian_full(model, &frames, frames.ee_position(), model.n_dof()))
}

/// 3 x n positional Jacobian of an arbitrary world point rigidly attached to
/// `link_index` (joints beyond the link do not move the point).
pub fn point_jacobian(
    model: &RobotModel,
    frames: &Frames,
    point_world: Vector3<f64>,
    link_index: usize,
) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(3, model.n_dof());
    for i in 0..=link_index {
        let axis = frames.joint_axis(model, i);
        let lin = axis.cross(&(point_world - frames.joint_position(i)));
        for r in 0..3 {
            jac[(r, i)] = lin[r];
        }
    }
    jac
}

fn point_jacobian_full(
    model: &RobotModel,
    frames: &Frames,
    point_world: Vector3<f64>,
    n_moving: usize,
) -> DMatrix<f64> {
    let n = model.n_dof();
    let mut jac = DMatrix::zeros(6, n);
    for i in 0..n_moving {
        let axis = frames.joint_axis(model, i);
        let lin = axis.cross(&(point_world - frames.joint_position(i)));
        for r in 0..3 {
            jac[(r, i)] = lin[r];
            jac[(r + 3, i)] = axis[r];
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_models, planar2};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    /// Closed-form planar FK: x = sum l_i cos(phi_i), y = sum l_i sin(phi_i).
    fn planar_fk_oracle(lengths: &[f64], q: &[f64]) -> (f64, f64) {
        let (mut x, mut y, mut phi) = (0.0, 0.0, 0.0);
        for (l, qi) in lengths.iter().zip(q) {
            phi += qi;
            x += l * phi.cos();
            y += l * phi.sin();
        }
        (x, y)
    }

    #[test]
    fn planar2_straight_chain() {
        let model = planar2();
        let frames = forward_kinematics(&model, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(frames.ee_position(), Vector3::new(2.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn planar2_rigid_rotation() {
        let model = planar2();
        let q = [std::f64::consts::FRAC_PI_2, 0.0];
        let frames = forward_kinematics(&model, &q).unwrap();
        assert_abs_diff_eq!(frames.ee_position(), Vector3::new(0.0, 2.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn planar2_elbow_matches_planar_oracle() {
        let model = planar2();
        let q = [std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2];
        let frames = forward_kinematics(&model, &q).unwrap();
        let (x, y) = planar_fk_oracle(&[1.0, 1.0], &q);
        assert_abs_diff_eq!(frames.ee_position(), Vector3::new(x, y, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(frames.ee_position(), Vector3::new(1.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn fk_at_zero_reproduces_fixed_transforms() {
        for name in ["planar2", "planar3", "arm7"] {
            let model = builtin_models(name).unwrap();
            let frames = forward_kinematics(&model, &vec![0.0; model.n_dof()]).unwrap();
            let mut expected = Isometry3::identity();
            for (i, joint) in model.joints.iter().enumerate() {
                expected *= joint.fixed_transform();
                assert_abs_diff_eq!(
                    frames.joints[i].to_homogeneous(),
                    expected.to_homogeneous(),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn fk_dimension_mismatch() {
        let model = planar2();
        assert!(forward_kinematics(&model, &[0.0]).is_err());
        assert!(jacobian(&model, &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn frames_are_orthonormal() {
        let model = builtin_models("arm7").unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let q: Vec<f64> = model
                .limits
                .iter()
                .map(|l| rng.random_range(l.q_min..l.q_max))
                .collect();
            let frames = forward_kinematics(&model, &q).unwrap();
            for frame in frames.joints.iter().chain(std::iter::once(&frames.ee_pose)) {
                let rot = frame.rotation.to_rotation_matrix();
                let gram = rot.matrix().transpose() * rot.matrix();
                assert!((gram - nalgebra::Matrix3::identity()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn planar2_jacobian_known_columns() {
        let model = planar2();
        let jac = jacobian(&model, &[0.0, 0.0]).unwrap();
        let expected = [[0.0, 2.0, 0.0], [0.0, 1.0, 0.0]];
        for (col, exp) in expected.iter().enumerate() {
            for r in 0..3 {
                assert_abs_diff_eq!(jac[(r, col)], exp[r], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_angular_columns_are_world_axes() {
        for name in ["planar3", "arm7"] {
            let model = builtin_models(name).unwrap();
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
            for _ in 0..20 {
                let q: Vec<f64> = model
                    .limits
                    .iter()
                    .map(|l| rng.random_range(l.q_min..l.q_max))
                    .collect();
                let frames = forward_kinematics(&model, &q).unwrap();
                let jac = jacobian(&model, &q).unwrap();
                for i in 0..model.n_dof() {
                    let axis = frames.joint_axis(&model, i);
                    for r in 0..3 {
                        assert_abs_diff_eq!(jac[(r + 3, i)], axis[r], epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for name in ["planar2", "planar3", "arm7"] {
            let model = builtin_models(name).unwrap();
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1234);
            for _ in 0..100 {
                let q: Vec<f64> = model
                    .limits
                    .iter()
                    .map(|l| rng.random_range(l.q_min..l.q_max))
                    .collect();
                let jac = jacobian(&model, &q).unwrap();
                let step = 1e-6;
                for i in 0..model.n_dof() {
                    let mut qp = q.clone();
                    let mut qm = q.clone();
                    qp[i] += step;
                    qm[i] -= step;
                    let fp = forward_kinematics(&model, &qp).unwrap().ee_position();
                    let fm = forward_kinematics(&model, &qm).unwrap().ee_position();
                    let fd = (fp - fm) / (2.0 * step);
                    for r in 0..3 {
                        assert!(
                            (jac[(r, i)] - fd[r]).abs() <= 1e-5,
                            "{name}: J[{r},{i}] = {} vs fd {}",
                            jac[(r, i)],
                            fd[r]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn jacobian_transpose_matches_virtual_work() {
        // tau = J^T [F; 0] must equal the finite-difference gradient of the
        // potential of a point force acting at the end-effector.
        let model = builtin_models("arm7").unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(77);
        for _ in 0..20 {
            let q: Vec<f64> = model
                .limits
                .iter()
                .map(|l| rng.random_range(l.q_min..l.q_max))
                .collect();
            let force = Vector3::new(
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
            );
            let jac = jacobian(&model, &q).unwrap();
            let step = 1e-6;
            for i in 0..model.n_dof() {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[i] += step;
                qm[i] -= step;
                // Potential of a constant force F is -F . p_ee, so the
                // generalized force is +F . d(p_ee)/dq_i.
                let pp = forward_kinematics(&model, &qp).unwrap().ee_position();
                let pm = forward_kinematics(&model, &qm).unwrap().ee_position();
                let fd_tau = force.dot(&((pp - pm) / (2.0 * step)));
                let jt_tau: f64 = (0..3).map(|r| jac[(r, i)] * force[r]).sum();
                assert!((fd_tau - jt_tau).abs() < 1e-5);
            }
        }
    }
}
