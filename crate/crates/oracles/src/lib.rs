//! Independent reference implementations used by test suites to check the
//! production code: closed-form planar Euler-Lagrange dynamics, brute-force
//! payload search, quintic minimum-jerk values, and a grid search for
//! time-optimal jerk-limited profiles.
//!
//! Nothing in this crate shares algorithmic structure with the production
//! implementations; it exists solely as a dev-dependency.

pub mod payload_grid;
pub mod planar;
pub mod profile_search;
pub mod quintic;
