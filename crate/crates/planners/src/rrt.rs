//! Bidirectional RRT-Connect in joint space with deterministic (Halton) or
//! seeded uniform sampling, fixed-resolution edge checks, and randomized
//! path shortcutting.

use crate::result::PlannerError;
use paydiff_core::model::RobotModel;
use paydiff_core::scene::{in_collision, CollisionProxySet, Scene};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Low-dispersion deterministic Halton sequence.
    Halton,
    /// Seeded uniform sampling.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct RrtConfig {
    pub sampler: SamplerKind,
    pub seed: u64,
    pub timeout: f64,
    /// Maximum per-joint displacement between collision checks, rad.
    pub edge_resolution: f64,
    /// Largest extension step in joint L2 distance, rad.
    pub step_size: f64,
    pub max_iterations: usize,
}

impl Default for RrtConfig {
    fn default() -> Self {
        RrtConfig {
            sampler: SamplerKind::Halton,
            seed: 0,
            timeout: 5.0,
            edge_resolution: 0.02,
            step_size: 0.5,
            max_iterations: 200_000,
        }
    }
}

const HALTON_PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical-inverse Halton point in [0, 1)^d for 1-based index `i`.
fn halton_point(i: u64, dims: usize) -> Vec<f64> {
    (0..dims)
        .map(|d| {
            let base = HALTON_PRIMES[d % HALTON_PRIMES.len()];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut n = i;
            while n > 0 {
                f /= base as f64;
                r += f * (n % base) as f64;
                n /= base;
            }
            r
        })
        .collect()
}

enum Sampler {
    Halton { index: u64, dims: usize },
    Uniform(ChaCha12Rng),
}

impl Sampler {
    fn sample(&mut self, model: &RobotModel) -> Vec<f64> {
        match self {
            Sampler::Halton { index, dims } => {
                *index += 1;
                halton_point(*index, *dims)
                    .iter()
                    .zip(&model.limits)
                    .map(|(&u, lim)| lim.q_min + u * (lim.q_max - lim.q_min))
                    .collect()
            }
            Sampler::Uniform(rng) => model
                .limits
                .iter()
                .map(|lim| rng.random_range(lim.q_min..lim.q_max))
                .collect(),
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Collision check along the straight joint-space segment at fixed
/// per-joint resolution, endpoints included.
fn edge_free(
    model: &RobotModel,
    proxies: &CollisionProxySet,
    scene: &Scene,
    from: &[f64],
    to: &[f64],
    resolution: f64,
) -> bool {
    let max_step = from
        .iter()
        .zip(to)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let steps = (max_step / resolution).ceil().max(1.0) as usize;
    for s in 0..=steps {
        let alpha = s as f64 / steps as f64;
        let q: Vec<f64> = from.iter().zip(to).map(|(a, b)| a + (b - a) * alpha).collect();
        if in_collision(model, proxies, scene, &q) {
            return false;
        }
    }
    true
}

struct Tree {
    nodes: Vec<Vec<f64>>,
    parents: Vec<usize>,
}

impl Tree {
    fn new(root: Vec<f64>) -> Self {
        Tree { nodes: vec![root], parents: vec![usize::MAX] }
    }

    fn nearest(&self, q: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, node) in self.nodes.iter().enumerate() {
            let d = distance(node, q);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn path_to_root(&self, mut idx: usize) -> Vec<Vec<f64>> {
        let mut path = Vec::new();
        while idx != usize::MAX {
            path.push(self.nodes[idx].clone());
            idx = self.parents[idx];
        }
        path
    }
}

enum Extend {
    Reached(usize),
    Advanced(usize),
    Trapped,
}

fn extend(
    tree: &mut Tree,
    target: &[f64],
    model: &RobotModel,
    proxies: &CollisionProxySet,
    scene: &Scene,
    config: &RrtConfig,
) -> Extend {
    let near = tree.nearest(target);
    let from = tree.nodes[near].clone();
    let dist = distance(&from, target);
    let (next, reached) = if dist <= config.step_size {
        (target.to_vec(), true)
    } else {
        let alpha = config.step_size / dist;
        let q: Vec<f64> = from.iter().zip(target).map(|(a, b)| a + (b - a) * alpha).collect();
        (q, false)
    };
    if !edge_free(model, proxies, scene, &from, &next, config.edge_resolution) {
        return Extend::Trapped;
    }
    tree.nodes.push(next);
    tree.parents.push(near);
    let idx = tree.nodes.len() - 1;
    if reached {
        Extend::Reached(idx)
    } else {
        Extend::Advanced(idx)
    }
}

/// Collision-free joint-space path from start to goal. Deterministic for
/// the Halton sampler, and for the uniform sampler given its seed.
pub fn rrt_connect(
    model: &RobotModel,
    proxies: &CollisionProxySet,
    scene: &Scene,
    start: &[f64],
    goal: &[f64],
    config: &RrtConfig,
) -> Result<Vec<Vec<f64>>, PlannerError> {
    let n = model.n_dof();
    if start.len() != n || goal.len() != n {
        return Err(PlannerError::InvalidInput("start/goal dimension mismatch".into()));
    }
    if !model.within_limits(start) || !model.within_limits(goal) {
        return Err(PlannerError::InvalidInput("start/goal outside joint limits".into()));
    }
    if in_collision(model, proxies, scene, start) || in_collision(model, proxies, scene, goal) {
        return Err(PlannerError::InvalidInput("start or goal in collision".into()));
    }
    if start == goal {
        return Ok(vec![start.to_vec(), goal.to_vec()]);
    }
    // Straight-line connect attempt before growing any tree.
    if edge_free(model, proxies, scene, start, goal, config.edge_resolution) {
        return Ok(vec![start.to_vec(), goal.to_vec()]);
    }

    let clock = Instant::now();
    let mut sampler = match config.sampler {
        SamplerKind::Halton => Sampler::Halton { index: config.seed.wrapping_mul(7919), dims: n },
        SamplerKind::Uniform => Sampler::Uniform(ChaCha12Rng::seed_from_u64(config.seed)),
    };
    let mut tree_a = Tree::new(start.to_vec());
    let mut tree_b = Tree::new(goal.to_vec());
    let mut a_is_start = true;

    for _ in 0..config.max_iterations {
        if clock.elapsed().as_secs_f64() > config.timeout {
            return Err(PlannerError::Timeout(clock.elapsed().as_secs_f64()));
        }
        let q_rand = sampler.sample(model);
        let grown = match extend(&mut tree_a, &q_rand, model, proxies, scene, config) {
            Extend::Trapped => None,
            Extend::Reached(i) | Extend::Advanced(i) => Some(i),
        };
        if let Some(new_idx) = grown {
            // CONNECT: greedily extend the other tree toward the new node.
            let target = tree_a.nodes[new_idx].clone();
            loop {
                match extend(&mut tree_b, &target, model, proxies, scene, config) {
                    Extend::Trapped => break,
                    Extend::Advanced(_) => continue,
                    Extend::Reached(meet_idx) => {
                        let mut path_a = tree_a.path_to_root(new_idx);
                        path_a.reverse();
                        let path_b = tree_b.path_to_root(meet_idx);
                        let mut full = path_a;
                        full.extend(path_b.into_iter().skip(1));
                        if !a_is_start {
                            full.reverse();
                        }
                        return Ok(full);
                    }
                }
            }
        }
        std::mem::swap(&mut tree_a, &mut tree_b);
        a_is_start = !a_is_start;
    }
    Err(PlannerError::Timeout(clock.elapsed().as_secs_f64()))
}

/// Randomized shortcutting: repeatedly try to splice out path sections whose
/// direct segment is collision-free. Deterministic given the seed.
pub fn shortcut_path(
    model: &RobotModel,
    proxies: &CollisionProxySet,
    scene: &Scene,
    path: &[Vec<f64>],
    resolution: f64,
    attempts: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut path = path.to_vec();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..attempts {
        if path.len() < 3 {
            break;
        }
        let i = rng.random_range(0..path.len() - 2);
        let j = rng.random_range(i + 2..path.len());
        if edge_free(model, proxies, scene, &path[i], &path[j], resolution) {
            path.drain(i + 1..j);
        }
    }
    path
}
