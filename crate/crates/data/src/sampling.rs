//! Tabletop problem sampling: rejection-sample joint configurations whose
//! end-effector lies inside the workspace box and which are collision-free.

use paydiff_core::kinematics::forward_kinematics;
use paydiff_core::model::RobotModel;
use paydiff_core::scene::{in_collision, CollisionProxySet, Scene};
use paydiff_core::trajectory::Problem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkspaceSpec {
    pub ee_min: [f64; 3],
    pub ee_max: [f64; 3],
    /// Rejection budget per endpoint.
    pub max_tries: usize,
}

#[derive(Debug, thiserror::Error)]
#[error("rejection budget exhausted after {0} tries")]
pub struct RejectionBudget(pub usize);

/// Default tabletop workspace for a model: a box spanning the reachable
/// space above the table plane.
pub fn bundled_workspace(model: &RobotModel) -> WorkspaceSpec {
    match model.name.as_str() {
        "planar3" => WorkspaceSpec { ee_min: [-1.7, -0.1, 0.05], ee_max: [1.7, 0.1, 1.9], max_tries: 20_000 },
        "planar2" => WorkspaceSpec { ee_min: [-2.0, -2.0, -0.1], ee_max: [2.0, 2.0, 0.1], max_tries: 20_000 },
        _ => WorkspaceSpec { ee_min: [-1.0, -1.0, 0.02], ee_max: [1.0, 1.0, 1.3], max_tries: 20_000 },
    }
}

/// Bundled tabletop scene: floor plane plus one box block.
pub fn bundled_scene(model: &RobotModel) -> Scene {
    match model.name.as_str() {
        "planar3" => Scene::tabletop(0.0, Some(([0.95, 0.0], 0.12, 0.45))),
        "planar2" => Scene::empty(),
        _ => Scene::tabletop(0.0, Some(([0.5, 0.2], 0.1, 0.3))),
    }
}

fn sample_endpoint(
    model: &RobotModel,
    proxies: &CollisionProxySet,
    scene: &Scene,
    workspace: &WorkspaceSpec,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<f64>, RejectionBudget> {
    for _ in 0..workspace.max_tries {
        let q: Vec<f64> = model
            .limits
            .iter()
            .map(|lim| rng.random_range(lim.q_min..lim.q_max))
            .collect();
        if in_collision(model, proxies, scene, &q) {
            continue;
        }
        let ee = forward_kinematics(model, &q).expect("sampled q has model dimension").ee_position();
        let inside = (0..3).all(|i| ee[i] >= workspace.ee_min[i] && ee[i] <= workspace.ee_max[i]);
        if inside {
            return Ok(q);
        }
    }
    Err(RejectionBudget(workspace.max_tries))
}

/// Samples a rest-to-rest tabletop task with collision-free endpoints whose
/// end-effector positions lie inside the workspace box.
pub fn sample_problem(
    model: &RobotModel,
    proxies: &CollisionProxySet,
    scene: &Scene,
    workspace: &WorkspaceSpec,
    payload: f64,
    rng: &mut ChaCha12Rng,
) -> Result<Problem, RejectionBudget> {
    let start = sample_endpoint(model, proxies, scene, workspace, rng)?;
    let goal = sample_endpoint(model, proxies, scene, workspace, rng)?;
    Ok(Problem { start, goal, scene: scene.clone(), payload })
}

/// Deterministic problem suite used by benchmarks and tests: problem `i` is
/// generated from stream `i` of the seed, independent of iteration order.
pub fn bundled_problems(
    model: &RobotModel,
    proxies: &CollisionProxySet,
    scene: &Scene,
    workspace: &WorkspaceSpec,
    count: usize,
    seed: u64,
) -> Vec<Problem> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sample_problem(model, proxies, scene, workspace, 0.0, &mut rng)
                .expect("bundled workspace must admit samples")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use paydiff_core::model::planar3;

    #[test]
    fn fixed_seed_reproduces_problem() {
        let model = planar3();
        let proxies = CollisionProxySet::along_links(&model, 3, 0.05);
        let scene = bundled_scene(&model);
        let ws = bundled_workspace(&model);
        let mut rng1 = ChaCha12Rng::seed_from_u64(5);
        let mut rng2 = ChaCha12Rng::seed_from_u64(5);
        let a = sample_problem(&model, &proxies, &scene, &ws, 0.0, &mut rng1).unwrap();
        let b = sample_problem(&model, &proxies, &scene, &ws, 0.0, &mut rng2).unwrap();
        assert_eq!(a.start, b.start);
        assert_eq!(a.goal, b.goal);
    }

    #[test]
    fn sampled_endpoints_are_valid() {
        let model = planar3();
        let proxies = CollisionProxySet::along_links(&model, 3, 0.05);
        let scene = bundled_scene(&model);
        let ws = bundled_workspace(&model);
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for _ in 0..200 {
            let p = sample_problem(&model, &proxies, &scene, &ws, 0.0, &mut rng).unwrap();
            for q in [&p.start, &p.goal] {
                assert!(model.within_limits(q));
                assert!(!in_collision(&model, &proxies, &scene, q));
                let ee = forward_kinematics(&model, q).unwrap().ee_position();
                for i in 0..3 {
                    assert!(ee[i] >= ws.ee_min[i] - 1e-12 && ee[i] <= ws.ee_max[i] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn bundled_suite_is_deterministic_and_order_independent() {
        let model = planar3();
        let proxies = CollisionProxySet::along_links(&model, 3, 0.05);
        let scene = bundled_scene(&model);
        let ws = bundled_workspace(&model);
        let a = bundled_problems(&model, &proxies, &scene, &ws, 10, 99);
        let b = bundled_problems(&model, &proxies, &scene, &ws, 10, 99);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.start, y.start);
            assert_eq!(x.goal, y.goal);
        }
        // Problem i does not depend on how many problems precede it.
        let c = bundled_problems(&model, &proxies, &scene, &ws, 3, 99);
        assert_eq!(a[2].start, c[2].start);
    }
}
