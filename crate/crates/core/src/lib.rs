//! Core robotics primitives for payload-aware trajectory generation:
//! robot models, forward kinematics, inverse dynamics, a sphere-proxy
//! collision world, and trajectory containers with jerk-limited
//! point-to-point profiles.

pub mod dynamics;
pub mod kinematics;
pub mod model;
pub mod profile;
pub mod scene;
pub mod timeparam;
pub mod trajectory;

pub use dynamics::{
    gravity_torque, inverse_dynamics, mass_matrix, max_supported_payload, payload_torque,
    validate_torques, DynamicsError, MaxPayload, PayloadWrench, TorqueProfile, PAYLOAD_CAP_KG,
};
pub use kinematics::{forward_kinematics, jacobian, point_jacobian, Frames};
pub use model::{
    builtin_models, FrictionParams, JointLimits, JointSpec, LinkInertia, ModelError, RobotModel,
};
pub use profile::{jerk_limited_profile, JerkProfile, ProfileError};
pub use scene::{
    collision_cost, collision_cost_gradient, in_collision, CollisionProxy, CollisionProxySet,
    Obstacle, Scene,
};
pub use timeparam::{time_parameterize, TimeParamError};
pub use trajectory::{ConsistencyReport, Problem, Trajectory, TrajectoryError};
