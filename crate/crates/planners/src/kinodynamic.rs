//! Steering-based kinodynamic RRT planning directly in the (q, qd, qdd)
//! state space. Extensions steer with jerk-limited profiles toward sampled
//! rest targets and may stop mid-profile, so tree nodes carry nonzero
//! velocities and accelerations. Every edge is validated for collision,
//! kinematic limits, torque at the target payload, and smoothness before
//! insertion.

use crate::result::{PlannerError, PlannerResult, PlannerStatus};
use crate::validity::check_trajectory;
use nalgebra::Vector6;
use paydiff_core::dynamics::{inverse_dynamics, PayloadWrench};
use paydiff_core::model::RobotModel;
use paydiff_core::profile::{synchronized_profiles, JerkProfile};
use paydiff_core::scene::{in_collision, CollisionProxySet};
use paydiff_core::trajectory::{Problem, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct KinodynamicConfig {
    pub seed: u64,
    pub timeout: f64,
    /// Longest edge kept after truncation, s.
    pub max_edge_duration: f64,
    /// Time between validity checks along an edge, s.
    pub check_dt: f64,
    pub goal_bias: f64,
    /// Velocity/acceleration sampling margins as fractions of the limits.
    pub velocity_fraction: f64,
    pub acceleration_fraction: f64,
    /// Output sample spacing, s.
    pub dt: f64,
    pub max_iterations: usize,
}

impl Default for KinodynamicConfig {
    fn default() -> Self {
        KinodynamicConfig {
            seed: 0,
            timeout: 120.0,
            max_edge_duration: 0.7,
            check_dt: 0.02,
            goal_bias: 0.15,
            velocity_fraction: 0.5,
            acceleration_fraction: 0.4,
            dt: 0.08,
            max_iterations: 2_000_000,
        }
    }
}

#[derive(Clone)]
struct State {
    q: Vec<f64>,
    v: Vec<f64>,
    a: Vec<f64>,
}

struct Edge {
    profiles: Vec<JerkProfile>,
    duration: f64,
}

struct Node {
    state: State,
    parent: usize,
    edge: Option<Edge>,
}

fn state_distance(a: &State, b: &State) -> f64 {
    let mut d = 0.0;
    for j in 0..a.q.len() {
        d += (a.q[j] - b.q[j]).abs() + 0.3 * (a.v[j] - b.v[j]).abs() + 0.05 * (a.a[j] - b.a[j]).abs();
    }
    d
}

fn profile_state(profiles: &[JerkProfile], t: f64) -> State {
    let mut q = Vec::with_capacity(profiles.len());
    let mut v = Vec::with_capacity(profiles.len());
    let mut a = Vec::with_capacity(profiles.len());
    for p in profiles {
        let (x, vel, acc) = p.state_at(t);
        q.push(x);
        v.push(vel);
        a.push(acc);
    }
    State { q, v, a }
}

/// A state can root a new edge only if the jerk-limited stop phase cannot
/// push any joint past its velocity limit.
fn steerable(model: &RobotModel, state: &State) -> bool {
    for (j, lim) in model.limits.iter().enumerate() {
        let overshoot = state.a[j] * state.a[j] / (2.0 * lim.j_max);
        if state.v[j].abs() + overshoot > lim.v_max * 0.98 {
            return false;
        }
        if state.a[j].abs() > lim.a_max * 0.98 {
            return false;
        }
    }
    true
}

struct EdgeChecker<'a> {
    model: &'a RobotModel,
    proxies: &'a CollisionProxySet,
    scene: &'a paydiff_core::scene::Scene,
    wrench: Vector6<f64>,
}

impl EdgeChecker<'_> {
    /// Collision, kinematic-limit, and torque checks at `check_dt` spacing.
    /// Smoothness holds by construction (constant-jerk segments within
    /// j_max) and is spot-checked via the sampled accelerations.
    fn edge_valid(&self, profiles: &[JerkProfile], duration: f64, check_dt: f64) -> bool {
        let steps = (duration / check_dt).ceil().max(1.0) as usize;
        let mut prev_a: Option<Vec<f64>> = None;
        for s in 0..=steps {
            let t = (s as f64 * check_dt).min(duration);
            let state = profile_state(profiles, t);
            for (j, lim) in self.model.limits.iter().enumerate() {
                if state.q[j] < lim.q_min - 1e-9 || state.q[j] > lim.q_max + 1e-9 {
                    return false;
                }
                if state.v[j].abs() > lim.v_max + 1e-9 || state.a[j].abs() > lim.a_max + 1e-9 {
                    return false;
                }
                if let Some(pa) = &prev_a {
                    let jerk = (state.a[j] - pa[j]) / check_dt;
                    if jerk.abs() > lim.j_max * (1.0 + 1e-6) {
                        return false;
                    }
                }
            }
            if in_collision(self.model, self.proxies, self.scene, &state.q) {
                return false;
            }
            match inverse_dynamics(self.model, &state.q, &state.v, &state.a, &self.wrench) {
                Ok(tau) => {
                    for (j, lim) in self.model.limits.iter().enumerate() {
                        if tau[j].abs() > lim.tau_max {
                            return false;
                        }
                    }
                }
                Err(_) => return false,
            }
            prev_a = Some(state.a);
        }
        true
    }
}

/// Steering-based kinodynamic RRT. Often times out on hard problems; that
/// is the expected failure mode rather than an error.
pub fn kinodynamic_rrt(
    model: &RobotModel,
    proxies: &CollisionProxySet,
    problem: &Problem,
    config: &KinodynamicConfig,
) -> Result<PlannerResult, PlannerError> {
    if problem.payload < 0.0 {
        return Err(PlannerError::InvalidInput("payload must be >= 0".into()));
    }
    let n = model.n_dof();
    if problem.start.len() != n || problem.goal.len() != n {
        return Err(PlannerError::InvalidInput("start/goal dimension mismatch".into()));
    }
    let clock = Instant::now();
    let wrench = PayloadWrench::new(problem.payload)?.wrench_world;
    let checker = EdgeChecker { model, proxies, scene: &problem.scene, wrench };

    if problem.start == problem.goal {
        let traj = Trajectory::from_positions(config.dt, n, &vec![problem.start.clone(); 2])
            .expect("constant trajectory");
        if check_trajectory(model, proxies, &problem.scene, &traj, problem.payload) {
            return Ok(PlannerResult::success(traj, clock.elapsed().as_secs_f64(), 0));
        }
        return Ok(PlannerResult::failure(PlannerStatus::Infeasible, clock.elapsed().as_secs_f64(), 0));
    }

    let root = State { q: problem.start.clone(), v: vec![0.0; n], a: vec![0.0; n] };
    let mut nodes = vec![Node { state: root, parent: usize::MAX, edge: None }];
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);

    for iteration in 0..config.max_iterations {
        if clock.elapsed().as_secs_f64() > config.timeout {
            return Ok(PlannerResult::failure(PlannerStatus::Timeout, clock.elapsed().as_secs_f64(), iteration));
        }
        let toward_goal = rng.random_range(0.0..1.0) < config.goal_bias;
        let target = if toward_goal {
            State { q: problem.goal.clone(), v: vec![0.0; n], a: vec![0.0; n] }
        } else {
            State {
                q: model.limits.iter().map(|l| rng.random_range(l.q_min..l.q_max)).collect(),
                v: model
                    .limits
                    .iter()
                    .map(|l| rng.random_range(-l.v_max * config.velocity_fraction..l.v_max * config.velocity_fraction))
                    .collect(),
                a: model
                    .limits
                    .iter()
                    .map(|l| {
                        rng.random_range(
                            -l.a_max * config.acceleration_fraction..l.a_max * config.acceleration_fraction,
                        )
                    })
                    .collect(),
            }
        };

        // Nearest steerable node.
        let mut near = usize::MAX;
        let mut near_d = f64::INFINITY;
        for (i, node) in nodes.iter().enumerate() {
            let d = state_distance(&node.state, &target);
            if d < near_d && steerable(model, &node.state) {
                near_d = d;
                near = i;
            }
        }
        if near == usize::MAX {
            continue;
        }
        let from = nodes[near].state.clone();
        let starts: Vec<(f64, f64, f64)> =
            (0..n).map(|j| (from.q[j], from.v[j], from.a[j])).collect();
        let (profiles, total) = match synchronized_profiles(&starts, &target.q, &model.limits, None) {
            Ok(r) => r,
            Err(_) => continue,
        };

        if toward_goal {
            // Full connection attempt: must arrive at rest on the goal.
            if checker.edge_valid(&profiles, total, config.check_dt) {
                let edge = Edge { profiles, duration: total };
                nodes.push(Node { state: target, parent: near, edge: Some(edge) });
                let traj = assemble(&nodes, nodes.len() - 1, config.dt, n);
                if check_trajectory(model, proxies, &problem.scene, &traj, problem.payload) {
                    return Ok(PlannerResult::success(traj, clock.elapsed().as_secs_f64(), iteration + 1));
                }
                nodes.pop();
            }
        } else {
            // Truncate to the latest steerable state within the edge budget.
            let cut = total.min(config.max_edge_duration);
            let mut t_new = cut;
            let mut accepted = false;
            while t_new > config.check_dt {
                let state = profile_state(&profiles, t_new);
                if steerable(model, &state) {
                    accepted = true;
                    break;
                }
                t_new -= config.check_dt;
            }
            if !accepted {
                continue;
            }
            if checker.edge_valid(&profiles, t_new, config.check_dt) {
                let state = profile_state(&profiles, t_new);
                nodes.push(Node {
                    state,
                    parent: near,
                    edge: Some(Edge { profiles, duration: t_new }),
                });
            }
        }
    }
    Ok(PlannerResult::failure(PlannerStatus::Timeout, clock.elapsed().as_secs_f64(), config.max_iterations))
}

/// Concatenates the edge profiles from root to `leaf` and resamples the
/// whole motion on the uniform output grid.
fn assemble(nodes: &[Node], leaf: usize, dt: f64, n: usize) -> Trajectory {
    let mut chain = Vec::new();
    let mut idx = leaf;
    while idx != usize::MAX {
        if let Some(edge) = &nodes[idx].edge {
            chain.push(edge);
        }
        idx = nodes[idx].parent;
    }
    chain.reverse();
    let total: f64 = chain.iter().map(|e| e.duration).sum();
    let horizon = ((total / dt - 1e-12).ceil().max(1.0) as usize + 1).max(2);
    let mut positions = Vec::with_capacity(horizon);
    for s in 0..horizon {
        let mut t = (s as f64 * dt).min(total);
        let mut q = None;
        for edge in &chain {
            if t <= edge.duration || std::ptr::eq(*edge, *chain.last().unwrap()) {
                q = Some(profile_state(&edge.profiles, t.min(edge.duration)).q);
                break;
            }
            t -= edge.duration;
        }
        positions.push(q.unwrap_or_else(|| profile_state(&chain.last().unwrap().profiles, t).q));
    }
    Trajectory::from_positions(dt, n, &positions).expect("assembled trajectory is valid")
}
