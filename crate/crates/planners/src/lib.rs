//! Classical planning baselines over the core robot model: bidirectional
//! RRT-Connect with deterministic or random sampling, the plan-and-filter
//! pipeline, steering-based kinodynamic RRT in the full (q, qd, qdd) state
//! space, and SQP trajectory optimization with torque constraints.

pub mod kinodynamic;
pub mod plan_filter;
pub mod result;
pub mod rrt;
pub mod sqp;
pub mod validity;

pub use kinodynamic::{kinodynamic_rrt, KinodynamicConfig};
pub use plan_filter::{plan_and_filter, PlanFilterConfig};
pub use result::{PlannerError, PlannerResult, PlannerStatus};
pub use rrt::{rrt_connect, shortcut_path, RrtConfig, SamplerKind};
pub use sqp::{sqp_optimize, SqpConfig};
pub use validity::check_trajectory;
