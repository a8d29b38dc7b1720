//! Closed-form Euler-Lagrange dynamics for planar serial chains, written in
//! planar coordinates with explicit Christoffel symbols. Derived from the
//! Lagrangian; shares no code with the Newton-Euler recursion it checks.

use paydiff_core::model::RobotModel;

/// Planar chain parameters: link lengths, masses, COM distances along the
/// link, scalar inertias about the plane normal, and in-plane gravity
/// magnitude (pointing toward negative plane-Y).
#[derive(Debug, Clone)]
pub struct PlanarParams {
    pub lengths: Vec<f64>,
    pub masses: Vec<f64>,
    pub coms: Vec<f64>,
    pub inertias: Vec<f64>,
    pub gravity: f64,
}

/// Extracts planar parameters from a model whose joints all share one
/// rotation axis (+z with in-plane gravity along -y, or -y with gravity
/// along -z). Returns None for non-planar models.
pub fn planar_params_from_model(model: &RobotModel) -> Option<PlanarParams> {
    let n = model.n_dof();
    let axis = model.joints[0].axis;
    let planar_z = axis == [0.0, 0.0, 1.0];
    let planar_y = axis == [0.0, -1.0, 0.0];
    if !planar_z && !planar_y {
        return None;
    }
    for joint in &model.joints {
        if joint.axis != axis {
            return None;
        }
    }
    // Plane normal component of the inertia tensor: zz for +z chains,
    // yy for -y chains.
    let normal_idx = if planar_z { 2 } else { 1 };
    let gravity = if planar_z { -model.gravity[1] } else { -model.gravity[2] };
    let mut lengths = Vec::with_capacity(n);
    for i in 0..n {
        let next_origin = if i + 1 < n { model.joints[i + 1].origin } else { model.ee_offset.origin };
        lengths.push(next_origin[0]);
    }
    Some(PlanarParams {
        lengths,
        masses: model.links.iter().map(|l| l.mass).collect(),
        coms: model.links.iter().map(|l| l.com[0]).collect(),
        inertias: model.links.iter().map(|l| l.inertia[normal_idx][normal_idx]).collect(),
        gravity,
    })
}

struct Geometry {
    joint_x: Vec<f64>,
    joint_y: Vec<f64>,
    com_x: Vec<f64>,
    com_y: Vec<f64>,
}

fn geometry(p: &PlanarParams, q: &[f64]) -> Geometry {
    let n = q.len();
    let mut phi = 0.0;
    let mut jx = vec![0.0; n];
    let mut jy = vec![0.0; n];
    let mut cx = vec![0.0; n];
    let mut cy = vec![0.0; n];
    let (mut x, mut y) = (0.0, 0.0);
    for k in 0..n {
        phi += q[k];
        jx[k] = x;
        jy[k] = y;
        cx[k] = x + p.coms[k] * phi.cos();
        cy[k] = y + p.coms[k] * phi.sin();
        x += p.lengths[k] * phi.cos();
        y += p.lengths[k] * phi.sin();
    }
    Geometry { joint_x: jx, joint_y: jy, com_x: cx, com_y: cy }
}

/// Mass matrix M(q): M_ij = sum_k m_k (p_k - j_i).(p_k - j_j) + I_k over
/// links k >= max(i, j).
pub fn planar_mass_matrix(p: &PlanarParams, q: &[f64]) -> Vec<Vec<f64>> {
    let n = q.len();
    let g = geometry(p, q);
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in i.max(j)..n {
                let ax = g.com_x[k] - g.joint_x[i];
                let ay = g.com_y[k] - g.joint_y[i];
                let bx = g.com_x[k] - g.joint_x[j];
                let by = g.com_y[k] - g.joint_y[j];
                m[i][j] += p.masses[k] * (ax * bx + ay * by) + p.inertias[k];
            }
        }
    }
    m
}

/// Analytic dM/dq_s using d p / d q_s = perp(p - j_s) for s <= index.
fn d_mass_matrix(p: &PlanarParams, q: &[f64], s: usize) -> Vec<Vec<f64>> {
    let n = q.len();
    let g = geometry(p, q);
    let perp = |vx: f64, vy: f64| (-vy, vx);
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in i.max(j)..n {
                let a = (g.com_x[k] - g.joint_x[i], g.com_y[k] - g.joint_y[i]);
                let b = (g.com_x[k] - g.joint_x[j], g.com_y[k] - g.joint_y[j]);
                let mut da = (0.0, 0.0);
                let mut db = (0.0, 0.0);
                if s <= k {
                    let v = perp(g.com_x[k] - g.joint_x[s], g.com_y[k] - g.joint_y[s]);
                    da.0 += v.0;
                    da.1 += v.1;
                    db.0 += v.0;
                    db.1 += v.1;
                }
                if i > 0 && s <= i - 1 {
                    let v = perp(g.joint_x[i] - g.joint_x[s], g.joint_y[i] - g.joint_y[s]);
                    da.0 -= v.0;
                    da.1 -= v.1;
                }
                if j > 0 && s <= j - 1 {
                    let v = perp(g.joint_x[j] - g.joint_x[s], g.joint_y[j] - g.joint_y[s]);
                    db.0 -= v.0;
                    db.1 -= v.1;
                }
                d[i][j] += p.masses[k] * (da.0 * b.0 + da.1 * b.1 + a.0 * db.0 + a.1 * db.1);
            }
        }
    }
    d
}

/// Torque without friction or external wrench:
/// tau = M(q) qdd + C(q, qd) qd + g(q) via Christoffel symbols.
pub fn planar_tau(p: &PlanarParams, q: &[f64], qd: &[f64], qdd: &[f64]) -> Vec<f64> {
    let n = q.len();
    let m = planar_mass_matrix(p, q);
    let dm: Vec<Vec<Vec<f64>>> = (0..n).map(|s| d_mass_matrix(p, q, s)).collect();
    let g = geometry(p, q);
    let mut tau = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            tau[i] += m[i][j] * qdd[j];
        }
        for j in 0..n {
            for k in 0..n {
                let christoffel = 0.5 * (dm[k][i][j] + dm[j][i][k] - dm[i][j][k]);
                tau[i] += christoffel * qd[j] * qd[k];
            }
        }
        // Gravity: d/dq_i of sum_k m_k g y_k is m_k g (p_k - j_i)_x.
        for k in i..n {
            tau[i] += p.masses[k] * p.gravity * (g.com_x[k] - g.joint_x[i]);
        }
    }
    tau
}

/// Total mechanical energy (kinetic + potential) for the energy-balance test.
pub fn planar_energy(p: &PlanarParams, q: &[f64], qd: &[f64]) -> f64 {
    let n = q.len();
    let m = planar_mass_matrix(p, q);
    let g = geometry(p, q);
    let mut kinetic = 0.0;
    for i in 0..n {
        for j in 0..n {
            kinetic += 0.5 * m[i][j] * qd[i] * qd[j];
        }
    }
    let potential: f64 = (0..n).map(|k| p.masses[k] * p.gravity * g.com_y[k]).sum();
    kinetic + potential
}
