//! Tabletop collision environment: sphere/box/halfspace obstacles, sphere
//! proxies attached to robot links, boolean collision checks, and the
//! differentiable quadratic-hinge collision cost used for sampler guidance.

use crate::kinematics::{forward_kinematics, point_jacobian, Frames};
use crate::model::{ModelError, RobotModel};
use crate::trajectory::Trajectory;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Obstacle {
    Sphere { center: [f64; 3], radius: f64 },
    Box { min: [f64; 3], max: [f64; 3] },
    /// Points with normal . p - offset >= 0 are outside (safe).
    Halfspace { normal: [f64; 3], offset: f64 },
}

impl Obstacle {
    /// Signed distance from a point to the obstacle surface, positive
    /// outside.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Obstacle::Sphere { center, radius } => {
                (p - Vector3::from(*center)).norm() - radius
            }
            Obstacle::Box { min, max } => {
                let mut outside2 = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for i in 0..3 {
                    let lo = min[i] - p[i];
                    let hi = p[i] - max[i];
                    let d = lo.max(hi);
                    if d > 0.0 {
                        outside2 += d * d;
                    } else {
                        inside = inside.max(d);
                    }
                }
                if outside2 > 0.0 {
                    outside2.sqrt()
                } else {
                    inside
                }
            }
            Obstacle::Halfspace { normal, offset } => {
                let n = Vector3::from(*normal);
                n.dot(p) / n.norm() - offset
            }
        }
    }

    /// Gradient of the signed distance with respect to the point.
    pub fn distance_gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        match self {
            Obstacle::Sphere { center, .. } => {
                let d = p - Vector3::from(*center);
                let norm = d.norm();
                if norm < 1e-12 {
                    Vector3::z()
                } else {
                    d / norm
                }
            }
            Obstacle::Box { min, max } => {
                let mut delta = Vector3::zeros();
                let mut any_outside = false;
                for i in 0..3 {
                    if p[i] < min[i] {
                        delta[i] = p[i] - min[i];
                        any_outside = true;
                    } else if p[i] > max[i] {
                        delta[i] = p[i] - max[i];
                        any_outside = true;
                    }
                }
                if any_outside {
                    let norm = delta.norm();
                    if norm < 1e-12 { Vector3::z() } else { delta / norm }
                } else {
                    // Inside: gradient points out through the nearest face.
                    let mut best_axis = 0;
                    let mut best_d = f64::NEG_INFINITY;
                    let mut sign = 1.0;
                    for i in 0..3 {
                        let lo = min[i] - p[i];
                        let hi = p[i] - max[i];
                        if hi > best_d {
                            best_d = hi;
                            best_axis = i;
                            sign = 1.0;
                        }
                        if lo > best_d {
                            best_d = lo;
                            best_axis = i;
                            sign = -1.0;
                        }
                    }
                    let mut g = Vector3::zeros();
                    g[best_axis] = sign;
                    g
                }
            }
            Obstacle::Halfspace { normal, .. } => {
                let n = Vector3::from(*normal);
                n / n.norm()
            }
        }
    }

    pub fn validate(&self, path: &str) -> Result<(), ModelError> {
        match self {
            Obstacle::Sphere { radius, .. } if *radius <= 0.0 => Err(ModelError::Invalid {
                path: format!("{path}.radius"),
                message: format!("must be > 0, got {radius}"),
            }),
            Obstacle::Box { min, max } => {
                for i in 0..3 {
                    if min[i] >= max[i] {
                        return Err(ModelError::Invalid {
                            path: format!("{path}.min[{i}]"),
                            message: "box min must be componentwise below max".into(),
                        });
                    }
                }
                Ok(())
            }
            Obstacle::Halfspace { normal, .. } => {
                if Vector3::from(*normal).norm() < 1e-9 {
                    return Err(ModelError::Invalid {
                        path: format!("{path}.normal"),
                        message: "normal must be nonzero".into(),
                    });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scene {
    pub obstacles: Vec<Obstacle>,
    /// Required clearance in metres added around every obstacle.
    pub margin: f64,
}

impl Scene {
    pub fn empty() -> Self {
        Scene { obstacles: Vec::new(), margin: 0.01 }
    }

    /// Tabletop template: a floor halfspace at z = `table_z` and an optional
    /// box block resting on it.
    pub fn tabletop(table_z: f64, block: Option<([f64; 2], f64, f64)>) -> Self {
        let mut obstacles = vec![Obstacle::Halfspace { normal: [0.0, 0.0, 1.0], offset: table_z }];
        if let Some(([cx, cy], half_extent, height)) = block {
            obstacles.push(Obstacle::Box {
                min: [cx - half_extent, cy - half_extent, table_z],
                max: [cx + half_extent, cy + half_extent, table_z + height],
            });
        }
        Scene { obstacles, margin: 0.01 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.margin < 0.0 {
            return Err(ModelError::Invalid { path: "margin".into(), message: "must be >= 0".into() });
        }
        for (i, obs) in self.obstacles.iter().enumerate() {
            obs.validate(&format!("obstacles[{i}]"))?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialization cannot fail")
    }
}

/// One collision sphere rigidly attached to a link.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollisionProxy {
    pub link_index: usize,
    pub local_offset: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollisionProxySet {
    pub proxies: Vec<CollisionProxy>,
}

impl CollisionProxySet {
    /// Spheres spaced along each link's local x axis, radius `radius`,
    /// `per_link` spheres per link. Produces a reasonable default proxy set
    /// for the builtin chain models.
    pub fn along_links(model: &RobotModel, per_link: usize, radius: f64) -> Self {
        let n = model.n_dof();
        let mut proxies = Vec::new();
        for link in 0..n {
            let next_origin = if link + 1 < n {
                Vector3::from(model.joints[link + 1].origin)
            } else {
                Vector3::from(model.ee_offset.origin)
            };
            for s in 0..per_link {
                let frac = (s as f64 + 1.0) / per_link as f64;
                let p = next_origin * frac;
                proxies.push(CollisionProxy { link_index: link, local_offset: [p.x, p.y, p.z], radius });
            }
        }
        CollisionProxySet { proxies }
    }

    pub fn validate(&self, model: &RobotModel) -> Result<(), ModelError> {
        for (i, p) in self.proxies.iter().enumerate() {
            if p.link_index >= model.n_dof() {
                return Err(ModelError::Invalid {
                    path: format!("proxies[{i}].link_index"),
                    message: format!("link {} out of range (n_dof {})", p.link_index, model.n_dof()),
                });
            }
            if p.radius <= 0.0 {
                return Err(ModelError::Invalid {
                    path: format!("proxies[{i}].radius"),
                    message: "must be > 0".into(),
                });
            }
        }
        Ok(())
    }

    pub fn world_centers(&self, frames: &Frames) -> Vec<Vector3<f64>> {
        self.proxies
            .iter()
            .map(|p| frames.joints[p.link_index] * nalgebra::Point3::from(Vector3::from(p.local_offset)))
            .map(|pt| pt.coords)
            .collect()
    }
}

/// True iff any proxy sphere penetrates any obstacle inflated by the scene
/// margin at configuration `q`.
pub fn in_collision(model: &RobotModel, proxies: &CollisionProxySet, scene: &Scene, q: &[f64]) -> bool {
    let frames = match forward_kinematics(model, q) {
        Ok(f) => f,
        Err(_) => return true,
    };
    let centers = proxies.world_centers(&frames);
    for (proxy, center) in proxies.proxies.iter().zip(&centers) {
        for obs in &scene.obstacles {
            if obs.signed_distance(center) < proxy.radius + scene.margin {
                return true;
            }
        }
    }
    false
}

fn waypoint_cost(
    model: &RobotModel,
    proxies: &CollisionProxySet,
    scene: &Scene,
    q: &[f64],
) -> f64 {
    let frames = forward_kinematics(model, q).expect("trajectory dimension checked by caller");
    let centers = proxies.world_centers(&frames);
    let mut cost = 0.0;
    for (proxy, center) in proxies.proxies.iter().zip(&centers) {
        for obs in &scene.obstacles {
            let pen = proxy.radius + scene.margin - obs.signed_distance(center);
            if pen > 0.0 {
                cost += pen * pen;
            }
        }
    }
    cost
}

/// Sum over waypoints and proxies of squared margin violation:
/// `sum max(0, radius + margin - signed_distance)^2`. Zero iff the
/// clearance is at least the margin everywhere.
pub fn collision_cost(
    model: &RobotModel,
    proxies: &CollisionProxySet,
    scene: &Scene,
    traj: &Trajectory,
) -> f64 {
    (0..traj.horizon()).map(|t| waypoint_cost(model, proxies, scene, traj.position(t))).sum()
}

/// Cost gradient with respect to each waypoint's joint positions
/// (`horizon x n_dof`); velocity and acceleration channels have zero
/// gradient and are not represented.
pub fn collision_cost_gradient(
    model: &RobotModel,
    proxies: &CollisionProxySet,
    scene: &Scene,
    traj: &Trajectory,
) -> Vec<Vec<f64>> {
    let n = model.n_dof();
    let mut grad = vec![vec![0.0; n]; traj.horizon()];
    for t in 0..traj.horizon() {
        let q = traj.position(t);
        let frames = forward_kinematics(model, q).expect("trajectory dimension checked by caller");
        let centers = proxies.world_centers(&frames);
        for (proxy, center) in proxies.proxies.iter().zip(&centers) {
            let mut accumulated = Vector3::zeros();
            let mut touched = false;
            for obs in &scene.obstacles {
                let pen = proxy.radius + scene.margin - obs.signed_distance(center);
                if pen > 0.0 {
                    // d/dp of pen^2 = -2 pen * grad_sd(p)
                    accumulated += -2.0 * pen * obs.distance_gradient(center);
                    touched = true;
                }
            }
            if touched {
                let jac = point_jacobian(model, &frames, *center, proxy.link_index);
                for j in 0..n {
                    for r in 0..3 {
                        grad[t][j] += jac[(r, j)] * accumulated[r];
                    }
                }
            }
        }
    }
    grad
}
