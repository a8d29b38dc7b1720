//! Serial-manipulator description: per-joint fixed transforms and rotation
//! axes, link inertial parameters, kinematic and actuation limits, and
//! velocity-dependent friction. Models are immutable after validation and
//! safe to share across threads.

use nalgebra::{Isometry3, Matrix3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("failed to read model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse model file: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ModelError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::Invalid { path: path.into(), message: message.into() }
    }
}

/// One revolute joint: a fixed rigid transform from the parent frame to the
/// joint frame, followed by rotation about `axis` by the joint angle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointSpec {
    /// Joint type tag; only "revolute" is accepted.
    #[serde(default = "default_joint_type")]
    pub joint_type: String,
    /// Translation of the joint frame origin in the parent frame, m.
    pub origin: [f64; 3],
    /// Fixed rotation applied before the joint angle, as a unit quaternion [w,x,y,z].
    #[serde(default = "default_quat")]
    pub orientation: [f64; 4],
    /// Unit rotation axis in the joint frame.
    pub axis: [f64; 3],
}

fn default_joint_type() -> String {
    "revolute".into()
}

fn default_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl JointSpec {
    pub fn fixed_transform(&self) -> Isometry3<f64> {
        let [w, x, y, z] = self.orientation;
        let rot = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z));
        Isometry3::from_parts(Translation3::new(self.origin[0], self.origin[1], self.origin[2]), rot)
    }

    pub fn axis_vector(&self) -> Vector3<f64> {
        Vector3::new(self.axis[0], self.axis[1], self.axis[2])
    }
}

/// Link mass, center of mass, and rotational inertia about the COM, all in
/// the link (= joint) frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkInertia {
    pub mass: f64,
    pub com: [f64; 3],
    /// Row-major 3x3 inertia tensor about the COM, kg m^2.
    pub inertia: [[f64; 3]; 3],
}

impl LinkInertia {
    pub fn point_mass(mass: f64, com: [f64; 3]) -> Self {
        LinkInertia { mass, com, inertia: [[0.0; 3]; 3] }
    }

    /// Uniform thin rod of length `len` along local +x, COM at the middle.
    pub fn rod_x(mass: f64, len: f64) -> Self {
        let i = mass * len * len / 12.0;
        LinkInertia {
            mass,
            com: [len / 2.0, 0.0, 0.0],
            inertia: [[0.0, 0.0, 0.0], [0.0, i, 0.0], [0.0, 0.0, i]],
        }
    }

    pub fn com_vector(&self) -> Vector3<f64> {
        Vector3::new(self.com[0], self.com[1], self.com[2])
    }

    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.inertia[r][c])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointLimits {
    pub q_min: f64,
    pub q_max: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub j_max: f64,
    pub tau_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrictionParams {
    /// Viscous coefficient, N m s/rad.
    pub viscous: f64,
    /// Coulomb magnitude, N m.
    pub coulomb: f64,
    /// Velocity scale of the tanh smoothing, rad/s.
    pub smoothing_eps: f64,
}

impl FrictionParams {
    pub fn zero() -> Self {
        FrictionParams { viscous: 0.0, coulomb: 0.0, smoothing_eps: 0.05 }
    }

    /// Smoothed friction torque f(v) = viscous*v + coulomb*tanh(v/eps).
    pub fn torque(&self, velocity: f64) -> f64 {
        self.viscous * velocity + self.coulomb * (velocity / self.smoothing_eps).tanh()
    }
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

/// Kinematic and dynamic description of a serial revolute-joint arm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobotModel {
    pub name: String,
    pub joints: Vec<JointSpec>,
    pub links: Vec<LinkInertia>,
    pub limits: Vec<JointLimits>,
    pub friction: Vec<FrictionParams>,
    /// Fixed transform from the last joint frame to the end-effector frame.
    pub ee_offset: JointSpec,
    /// Gravity acceleration in the world frame, m/s^2.
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    /// Manufacturer-style rated payload, kg. Used by workspace metrics.
    pub nominal_payload: f64,
}

impl RobotModel {
    pub fn n_dof(&self) -> usize {
        self.joints.len()
    }

    pub fn gravity_vector(&self) -> Vector3<f64> {
        Vector3::new(self.gravity[0], self.gravity[1], self.gravity[2])
    }

    /// Validates every structural invariant, reporting the offending field path.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.joints.len();
        if n < 1 {
            return Err(ModelError::invalid("joints", "at least one joint required"));
        }
        if self.links.len() != n {
            return Err(ModelError::invalid("links", format!("expected {n} entries, got {}", self.links.len())));
        }
        if self.limits.len() != n {
            return Err(ModelError::invalid("limits", format!("expected {n} entries, got {}", self.limits.len())));
        }
        if self.friction.len() != n {
            return Err(ModelError::invalid("friction", format!("expected {n} entries, got {}", self.friction.len())));
        }
        for (i, joint) in self.joints.iter().enumerate() {
            if joint.joint_type != "revolute" {
                return Err(ModelError::invalid(
                    format!("joints[{i}].joint_type"),
                    format!("only revolute joints are supported, got {:?}", joint.joint_type),
                ));
            }
            let axis_norm = joint.axis_vector().norm();
            if (axis_norm - 1.0).abs() > 1e-9 {
                return Err(ModelError::invalid(
                    format!("joints[{i}].axis"),
                    format!("axis must be unit-norm, |axis| = {axis_norm}"),
                ));
            }
            let quat_norm =
                (joint.orientation.iter().map(|v| v * v).sum::<f64>()).sqrt();
            if (quat_norm - 1.0).abs() > 1e-9 {
                return Err(ModelError::invalid(
                    format!("joints[{i}].orientation"),
                    "orientation quaternion must be unit-norm",
                ));
            }
            if !joint.origin.iter().all(|v| v.is_finite()) {
                return Err(ModelError::invalid(format!("joints[{i}].origin"), "non-finite origin"));
            }
        }
        for (i, link) in self.links.iter().enumerate() {
            validate_link(link, i)?;
        }
        for (i, lim) in self.limits.iter().enumerate() {
            let path = |f: &str| format!("limits[{i}].{f}");
            if !(lim.q_min < lim.q_max) {
                return Err(ModelError::invalid(path("q_min"), "q_min must be strictly below q_max"));
            }
            for (field, v) in [("v_max", lim.v_max), ("a_max", lim.a_max), ("j_max", lim.j_max), ("tau_max", lim.tau_max)] {
                if !(v > 0.0) {
                    return Err(ModelError::invalid(path(field), format!("must be > 0, got {v}")));
                }
            }
        }
        for (i, fr) in self.friction.iter().enumerate() {
            if fr.viscous < 0.0 {
                return Err(ModelError::invalid(format!("friction[{i}].viscous"), "must be >= 0"));
            }
            if fr.coulomb < 0.0 {
                return Err(ModelError::invalid(format!("friction[{i}].coulomb"), "must be >= 0"));
            }
            if !(fr.smoothing_eps > 0.0) {
                return Err(ModelError::invalid(format!("friction[{i}].smoothing_eps"), "must be > 0"));
            }
        }
        if !self.gravity.iter().all(|v| v.is_finite()) {
            return Err(ModelError::invalid("gravity", "non-finite gravity"));
        }
        if !(self.nominal_payload >= 0.0) {
            return Err(ModelError::invalid("nominal_payload", "must be >= 0"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let model: RobotModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    /// Canonical serialization used for dataset/checkpoint compatibility hashes.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.iter()
            .zip(&self.limits)
            .all(|(&qi, lim)| qi >= lim.q_min && qi <= lim.q_max)
    }

    pub fn clamp_position(&self, q: &mut [f64]) {
        for (qi, lim) in q.iter_mut().zip(&self.limits) {
            *qi = qi.clamp(lim.q_min, lim.q_max);
        }
    }
}

fn validate_link(link: &LinkInertia, index: usize) -> Result<(), ModelError> {
    let path = |f: &str| format!("links[{index}].{f}");
    if !(link.mass >= 0.0) {
        return Err(ModelError::invalid(path("mass"), format!("must be >= 0, got {}", link.mass)));
    }
    let inertia = link.inertia_matrix();
    if (inertia - inertia.transpose()).norm() > 1e-9 {
        return Err(ModelError::invalid(path("inertia"), "inertia tensor must be symmetric"));
    }
    let eig = inertia.symmetric_eigenvalues();
    let mut ev: Vec<f64> = eig.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if ev[0] < -1e-9 {
        return Err(ModelError::invalid(path("inertia"), format!("negative principal moment {:.3e}", ev[0])));
    }
    // Principal moments of any rigid body satisfy the triangle inequality.
    if link.mass > 0.0 && ev[0] + ev[1] < ev[2] - 1e-9 {
        return Err(ModelError::invalid(
            path("inertia"),
            format!("principal moments violate triangle inequality: {:.3e} + {:.3e} < {:.3e}", ev[0], ev[1], ev[2]),
        ));
    }
    Ok(())
}

fn revolute(origin: [f64; 3], axis: [f64; 3]) -> JointSpec {
    JointSpec { joint_type: "revolute".into(), origin, orientation: default_quat(), axis }
}

fn ee(origin: [f64; 3]) -> JointSpec {
    revolute(origin, [0.0, 0.0, 1.0])
}

/// Two-link arm in the world x-y plane (joint axes +z), unit link lengths,
/// unit point masses at the link tips. Gravity acts in-plane along -y, as for
/// a wall-mounted arm expressed in its base frame. The world -z payload
/// wrench is orthogonal to this plane, so the model is payload-insensitive;
/// it exists for closed-form kinematics and dynamics checks.
pub fn planar2() -> RobotModel {
    let limits = JointLimits { q_min: -3.0, q_max: 3.0, v_max: 2.5, a_max: 6.0, j_max: 40.0, tau_max: 80.0 };
    let model = RobotModel {
        name: "planar2".into(),
        joints: vec![
            revolute([0.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
            revolute([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
        ],
        links: vec![
            LinkInertia::point_mass(1.0, [1.0, 0.0, 0.0]),
            LinkInertia::point_mass(1.0, [1.0, 0.0, 0.0]),
        ],
        limits: vec![limits.clone(), limits],
        friction: vec![FrictionParams::zero(), FrictionParams::zero()],
        ee_offset: ee([1.0, 0.0, 0.0]),
        gravity: [0.0, -9.81, 0.0],
        nominal_payload: 2.0,
    };
    model.validate().expect("builtin model must validate");
    model
}

/// Three-link arm operating in the vertical world x-z plane: every joint
/// axis is -y, so positive joint angles lift the links from +x toward +z and
/// the world -z payload wrench produces gravity torques in-plane. The base
/// joint sits on a 0.3 m pedestal above the tabletop at z = 0.
pub fn planar3() -> RobotModel {
    let lengths = [0.75, 0.6, 0.45];
    let masses = [4.0, 3.0, 2.0];
    let q_ranges = [(-0.35, std::f64::consts::PI + 0.35), (-2.6, 2.6), (-2.6, 2.6)];
    let tau_max = [140.0, 60.0, 25.0];
    let mut joints = Vec::new();
    let mut links = Vec::new();
    let mut limits = Vec::new();
    for i in 0..3 {
        let origin = if i == 0 { [0.0, 0.0, 0.3] } else { [lengths[i - 1], 0.0, 0.0] };
        joints.push(revolute(origin, [0.0, -1.0, 0.0]));
        links.push(LinkInertia::rod_x(masses[i], lengths[i]));
        limits.push(JointLimits {
            q_min: q_ranges[i].0,
            q_max: q_ranges[i].1,
            v_max: 2.5,
            a_max: 6.0,
            j_max: 40.0,
            tau_max: tau_max[i],
        });
    }
    let model = RobotModel {
        name: "planar3".into(),
        joints,
        links,
        limits,
        friction: vec![
            FrictionParams { viscous: 0.5, coulomb: 0.4, smoothing_eps: 0.05 };
            3
        ],
        ee_offset: ee([lengths[2], 0.0, 0.0]),
        gravity: [0.0, 0.0, -9.81],
        nominal_payload: 1.5,
    };
    model.validate().expect("builtin model must validate");
    model
}

/// Illustrative 7-DoF desk-scale arm with alternating shoulder/elbow axes
/// and manufacturer-style torque limits. The inertial values are plausible
/// hand-set numbers, not calibrated data for any specific robot.
pub fn arm7() -> RobotModel {
    let axes: [[f64; 3]; 7] = [
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
    ];
    let origins: [[f64; 3]; 7] = [
        [0.0, 0.0, 0.333],
        [0.0, 0.0, 0.0],
        [0.0, 0.0, 0.316],
        [0.0825, 0.0, 0.0],
        [-0.0825, 0.0, 0.384],
        [0.0, 0.0, 0.0],
        [0.088, 0.0, 0.107],
    ];
    let masses: [f64; 7] = [4.5, 4.5, 3.5, 3.5, 2.5, 1.5, 0.8];
    let coms: [[f64; 3]; 7] = [
        [0.0, -0.03, -0.08],
        [0.0, -0.07, 0.03],
        [0.03, 0.03, -0.06],
        [-0.03, 0.10, 0.03],
        [0.0, 0.03, -0.10],
        [0.06, 0.02, 0.0],
        [0.0, 0.0, 0.08],
    ];
    let tau_max = [87.0, 87.0, 87.0, 87.0, 12.0, 12.0, 12.0];
    let q_lims: [(f64, f64); 7] = [
        (-2.8, 2.8),
        (-1.75, 1.75),
        (-2.8, 2.8),
        (-3.0, -0.1),
        (-2.8, 2.8),
        (0.0, 3.7),
        (-2.8, 2.8),
    ];
    let mut joints = Vec::new();
    let mut links = Vec::new();
    let mut limits = Vec::new();
    let mut friction = Vec::new();
    for i in 0..7 {
        joints.push(revolute(origins[i], axes[i]));
        // Solid-sphere style inertia around the COM, scaled with link mass.
        let r2 = 0.05 * masses[i].max(0.5);
        links.push(LinkInertia {
            mass: masses[i],
            com: coms[i],
            inertia: [[r2 * 0.4, 0.0, 0.0], [0.0, r2 * 0.4, 0.0], [0.0, 0.0, r2 * 0.4]],
        });
        limits.push(JointLimits {
            q_min: q_lims[i].0,
            q_max: q_lims[i].1,
            v_max: 2.2,
            a_max: 8.0,
            j_max: 60.0,
            tau_max: tau_max[i],
        });
        friction.push(FrictionParams { viscous: 0.8, coulomb: 0.5, smoothing_eps: 0.05 });
    }
    let model = RobotModel {
        name: "arm7".into(),
        joints,
        links,
        limits,
        friction,
        ee_offset: ee([0.0, 0.0, 0.1]),
        gravity: [0.0, 0.0, -9.81],
        nominal_payload: 3.0,
    };
    model.validate().expect("builtin model must validate");
    model
}

/// Single-link pendulum rotating about -y in the vertical x-z plane:
/// q = 0 points along +x (horizontal), positive q lifts toward +z.
pub fn pendulum(mass: f64, length: f64, tau_max: f64) -> RobotModel {
    let model = RobotModel {
        name: "pendulum".into(),
        joints: vec![revolute([0.0, 0.0, 0.0], [0.0, -1.0, 0.0])],
        links: vec![LinkInertia::point_mass(mass, [length, 0.0, 0.0])],
        limits: vec![JointLimits { q_min: -3.1, q_max: 3.1, v_max: 4.0, a_max: 20.0, j_max: 200.0, tau_max }],
        friction: vec![FrictionParams::zero()],
        ee_offset: ee([length, 0.0, 0.0]),
        gravity: [0.0, 0.0, -9.81],
        nominal_payload: 1.0,
    };
    model.validate().expect("pendulum model must validate");
    model
}

/// Named presets. `planar2`/`planar3` admit closed-form planar dynamics
/// oracles; `arm7` is a spatial 7-DoF stand-in with a 3 kg nominal rating.
pub fn builtin_models(name: &str) -> Option<RobotModel> {
    match name {
        "planar2" => Some(planar2()),
        "planar3" => Some(planar3()),
        "arm7" => Some(arm7()),
        _ => None,
    }
}
