//! Fixed-duration trajectory optimization: minimize sum-squared jerk subject
//! to joint/velocity/acceleration boxes, linearized torque limits, and
//! collision clearance, with pinned rest endpoints. Augmented-Lagrangian
//! outer loop around a dense box-QP inner step with an l-infinity trust
//! region.

use crate::result::{PlannerError, PlannerResult, PlannerStatus};
use crate::validity::check_trajectory;
use nalgebra::{DMatrix, DVector, Vector6};
use paydiff_core::dynamics::{inverse_dynamics, PayloadWrench};
use paydiff_core::model::RobotModel;
use paydiff_core::scene::{collision_cost_gradient, CollisionProxySet, Scene};
use paydiff_core::trajectory::{Problem, Trajectory};
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct SqpConfig {
    /// Fixed trajectory duration, s.
    pub duration: f64,
    pub dt: f64,
    pub max_iter: usize,
    pub trust_radius: f64,
    pub penalty_init: f64,
    pub tol_kkt: f64,
    pub tol_step: f64,
    /// Largest constraint violation still counted as feasible at exit.
    pub tol_feasible: f64,
}

impl Default for SqpConfig {
    fn default() -> Self {
        SqpConfig {
            duration: 5.04,
            dt: 0.08,
            max_iter: 60,
            trust_radius: 0.1,
            penalty_init: 10.0,
            tol_kkt: 1e-6,
            tol_step: 1e-9,
            tol_feasible: 1e-4,
        }
    }
}

/// Positions-only decision vector with the first two and last two waypoints
/// pinned (rest endpoints under the central-difference convention).
struct Discretization {
    horizon: usize,
    n: usize,
    dt: f64,
    free_offset: usize, // first free waypoint index (2)
}

impl Discretization {
    fn free_count(&self) -> usize {
        (self.horizon - 4) * self.n
    }

    fn var_index(&self, t: usize, j: usize) -> Option<usize> {
        if t < self.free_offset || t >= self.horizon - 2 {
            None
        } else {
            Some((t - self.free_offset) * self.n + j)
        }
    }

    fn velocities(&self, q: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut v = vec![vec![0.0; self.n]; self.horizon];
        for t in 1..self.horizon - 1 {
            for j in 0..self.n {
                v[t][j] = (q[t + 1][j] - q[t - 1][j]) / (2.0 * self.dt);
            }
        }
        v
    }

    fn accelerations(&self, v: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.horizon];
        for t in 1..self.horizon - 1 {
            for j in 0..self.n {
                a[t][j] = (v[t + 1][j] - v[t - 1][j]) / (2.0 * self.dt);
            }
        }
        a
    }

    fn jerks(&self, a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut jerk = vec![vec![0.0; self.n]; self.horizon - 1];
        for t in 0..self.horizon - 1 {
            for j in 0..self.n {
                jerk[t][j] = (a[t + 1][j] - a[t][j]) / self.dt;
            }
        }
        jerk
    }

    /// dq-space coefficients of v_t, a_t, jerk_t as (waypoint, weight) lists.
    fn velocity_stencil(&self, t: usize) -> Vec<(usize, f64)> {
        if t == 0 || t == self.horizon - 1 {
            return Vec::new();
        }
        vec![(t + 1, 1.0 / (2.0 * self.dt)), (t - 1, -1.0 / (2.0 * self.dt))]
    }

    fn acceleration_stencil(&self, t: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        if t == 0 || t == self.horizon - 1 {
            return out;
        }
        for (vt, w) in [(t + 1, 1.0 / (2.0 * self.dt)), (t - 1, -1.0 / (2.0 * self.dt))] {
            for (qt, wv) in self.velocity_stencil(vt) {
                out.push((qt, w * wv));
            }
        }
        out
    }

    fn jerk_stencil(&self, t: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for (at, w) in [(t + 1, 1.0 / self.dt), (t, -1.0 / self.dt)] {
            for (qt, wa) in self.acceleration_stencil(at) {
                out.push((qt, w * wa));
            }
        }
        out
    }
}

struct ConstraintGrad {
    /// Sparse gradient over free variables.
    entries: Vec<(usize, f64)>,
    value: f64,
}

struct Evaluation {
    objective: f64,
    q: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
}

struct SqpProblem<'a> {
    model: &'a RobotModel,
    proxies: &'a CollisionProxySet,
    scene: &'a Scene,
    wrench: Vector6<f64>,
    disc: Discretization,
    q_fixed: Vec<Vec<f64>>, // pinned rows (all rows; free ones overwritten)
}

impl SqpProblem<'_> {
    fn positions(&self, x: &DVector<f64>) -> Vec<Vec<f64>> {
        let mut q = self.q_fixed.clone();
        for t in self.disc.free_offset..self.disc.horizon - 2 {
            for j in 0..self.disc.n {
                q[t][j] = x[self.disc.var_index(t, j).unwrap()];
            }
        }
        q
    }

    fn evaluate(&self, x: &DVector<f64>) -> Evaluation {
        let q = self.positions(x);
        let v = self.disc.velocities(&q);
        let a = self.disc.accelerations(&v);
        let jerks = self.disc.jerks(&a);
        let objective: f64 =
            jerks.iter().flatten().map(|&jk| jk * jk).sum::<f64>() * self.disc.dt;
        Evaluation { objective, q, v, a }
    }

    fn objective_gradient(&self, eval: &Evaluation) -> DVector<f64> {
        let mut grad = DVector::zeros(self.disc.free_count());
        let jerks = self.disc.jerks(&eval.a);
        for t in 0..self.disc.horizon - 1 {
            for j in 0..self.disc.n {
                let w = 2.0 * self.disc.dt * jerks[t][j];
                if w == 0.0 {
                    continue;
                }
                for (qt, coeff) in self.disc.jerk_stencil(t) {
                    if let Some(idx) = self.disc.var_index(qt, j) {
                        grad[idx] += w * coeff;
                    }
                }
            }
        }
        grad
    }

    /// Inequality constraints g <= 0 with sparse gradients at the current
    /// point: velocity/acceleration bounds, torque bounds (linearized via
    /// finite differences of the dynamics), and per-waypoint collision cost.
    fn constraints(&self, eval: &Evaluation) -> Vec<ConstraintGrad> {
        let mut out = Vec::new();
        let disc = &self.disc;
        let n = disc.n;
        for t in 1..disc.horizon - 1 {
            for j in 0..n {
                let lim = &self.model.limits[j];
                // |v| <= v_max
                let gv = eval.v[t][j].abs() - lim.v_max;
                if gv > -0.5 * lim.v_max {
                    let sign = eval.v[t][j].signum();
                    let mut entries = Vec::new();
                    for (qt, w) in disc.velocity_stencil(t) {
                        if let Some(idx) = disc.var_index(qt, j) {
                            entries.push((idx, sign * w));
                        }
                    }
                    out.push(ConstraintGrad { entries, value: gv });
                }
                // |a| <= a_max
                let ga = eval.a[t][j].abs() - lim.a_max;
                if ga > -0.5 * lim.a_max {
                    let sign = eval.a[t][j].signum();
                    let mut entries = Vec::new();
                    for (qt, w) in disc.acceleration_stencil(t) {
                        if let Some(idx) = disc.var_index(qt, j) {
                            entries.push((idx, sign * w));
                        }
                    }
                    out.push(ConstraintGrad { entries, value: ga });
                }
            }
        }
        // Torque limits at every waypoint.
        let h = 1e-6;
        for t in 0..disc.horizon {
            let tau = match inverse_dynamics(self.model, &eval.q[t], &eval.v[t], &eval.a[t], &self.wrench) {
                Ok(tau) => tau,
                Err(_) => continue,
            };
            // Jacobians d tau / d (q, v, a) by central differences.
            let mut dq = vec![vec![0.0; n]; n];
            let mut dv = vec![vec![0.0; n]; n];
            let mut da = vec![vec![0.0; n]; n];
            for k in 0..n {
                for (target, store) in [(0usize, &mut dq), (1, &mut dv), (2, &mut da)] {
                    let mut qp = eval.q[t].clone();
                    let mut vp = eval.v[t].clone();
                    let mut ap = eval.a[t].clone();
                    let mut qm = qp.clone();
                    let mut vm = vp.clone();
                    let mut am = ap.clone();
                    match target {
                        0 => {
                            qp[k] += h;
                            qm[k] -= h;
                        }
                        1 => {
                            vp[k] += h;
                            vm[k] -= h;
                        }
                        _ => {
                            ap[k] += h;
                            am[k] -= h;
                        }
                    }
                    let tp = inverse_dynamics(self.model, &qp, &vp, &ap, &self.wrench);
                    let tm = inverse_dynamics(self.model, &qm, &vm, &am, &self.wrench);
                    if let (Ok(tp), Ok(tm)) = (tp, tm) {
                        for j in 0..n {
                            store[j][k] = (tp[j] - tm[j]) / (2.0 * h);
                        }
                    }
                }
            }
            for j in 0..n {
                let lim = &self.model.limits[j];
                let g = tau[j].abs() - lim.tau_max;
                if g <= -0.5 * lim.tau_max {
                    continue;
                }
                let sign = tau[j].signum();
                let mut entries: Vec<(usize, f64)> = Vec::new();
                let mut push = |idx: Option<usize>, w: f64| {
                    if let Some(i) = idx {
                        entries.push((i, w));
                    }
                };
                for k in 0..n {
                    push(disc.var_index(t, k), sign * dq[j][k]);
                    for (qt, w) in disc.velocity_stencil(t) {
                        push(disc.var_index(qt, k), sign * dv[j][k] * w);
                    }
                    for (qt, w) in disc.acceleration_stencil(t) {
                        push(disc.var_index(qt, k), sign * da[j][k] * w);
                    }
                }
                out.push(ConstraintGrad { entries, value: g });
            }
        }
        // Collision: per-waypoint hinge cost must be zero.
        let traj = self.to_trajectory(eval);
        let cost_grad = collision_cost_gradient(self.model, self.proxies, self.scene, &traj);
        for t in 0..disc.horizon {
            let q = traj.position(t);
            let single = Trajectory::from_positions(disc.dt, n, &vec![q.to_vec(); 2]).unwrap();
            let cost = paydiff_core::scene::collision_cost(self.model, self.proxies, self.scene, &single) / 2.0;
            if cost > 0.0 {
                let mut entries = Vec::new();
                for j in 0..n {
                    if let Some(idx) = disc.var_index(t, j) {
                        entries.push((idx, cost_grad[t][j]));
                    }
                }
                out.push(ConstraintGrad { entries, value: cost });
            }
        }
        out
    }

    fn to_trajectory(&self, eval: &Evaluation) -> Trajectory {
        Trajectory::from_positions(self.disc.dt, self.disc.n, &eval.q).expect("positions valid")
    }
}

fn merit(problem: &SqpProblem, x: &DVector<f64>, lambdas: &[f64], rho: f64) -> (f64, f64, Evaluation) {
    let eval = problem.evaluate(x);
    let constraints = problem.constraints(&eval);
    let mut merit = eval.objective;
    let mut max_violation: f64 = 0.0;
    for (i, c) in constraints.iter().enumerate() {
        let lambda = lambdas.get(i).copied().unwrap_or(0.0);
        let shifted = (c.value + lambda / rho).max(0.0);
        merit += 0.5 * rho * shifted * shifted - 0.5 * lambda * lambda / rho;
        max_violation = max_violation.max(c.value.max(0.0));
    }
    (merit, max_violation, eval)
}

/// Box-QP solve of `min g.x + x.H x / 2` over `lo <= x <= hi` by
/// active-set iteration with dense Cholesky on the free block.
fn solve_box_qp(hessian: &DMatrix<f64>, grad: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    let m = grad.len();
    let mut x = DVector::zeros(m);
    let mut clamped = vec![0i8; m]; // -1 lower, 0 free, 1 upper
    for _ in 0..12 {
        let free: Vec<usize> = (0..m).filter(|&i| clamped[i] == 0).collect();
        if free.is_empty() {
            break;
        }
        let mut h = DMatrix::zeros(free.len(), free.len());
        let mut rhs = DVector::zeros(free.len());
        for (ri, &i) in free.iter().enumerate() {
            let mut r = -grad[i];
            for k in 0..m {
                if clamped[k] != 0 {
                    r -= hessian[(i, k)] * x[k];
                }
            }
            rhs[ri] = r;
            for (ci, &jj) in free.iter().enumerate() {
                h[(ri, ci)] = hessian[(i, jj)];
            }
        }
        // Levenberg regularization keeps the factorization well-posed.
        for d in 0..free.len() {
            h[(d, d)] += 1e-9;
        }
        let sol = match h.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => break,
        };
        let mut changed = false;
        for (ri, &i) in free.iter().enumerate() {
            let v = sol[ri];
            if v < lo[i] - 1e-15 {
                x[i] = lo[i];
                clamped[i] = -1;
                changed = true;
            } else if v > hi[i] + 1e-15 {
                x[i] = hi[i];
                clamped[i] = 1;
                changed = true;
            } else {
                x[i] = v;
            }
        }
        if !changed {
            // Release clamps whose multiplier sign says the bound no longer
            // binds.
            let mut released = false;
            for i in 0..m {
                if clamped[i] != 0 {
                    let mut gi = grad[i];
                    for k in 0..m {
                        gi += hessian[(i, k)] * x[k];
                    }
                    if (clamped[i] == -1 && gi < -1e-12) || (clamped[i] == 1 && gi > 1e-12) {
                        clamped[i] = 0;
                        released = true;
                    }
                }
            }
            if !released {
                break;
            }
        }
    }
    x
}

/// SQP with fixed duration and pinned rest endpoints. Builds the initial
/// guess as a quintic-blended straight line when `init` is absent.
pub fn sqp_optimize(
    model: &RobotModel,
    proxies: &CollisionProxySet,
    problem: &Problem,
    init: Option<&Trajectory>,
    config: &SqpConfig,
) -> Result<PlannerResult, PlannerError> {
    let clock = Instant::now();
    let n = model.n_dof();
    let horizon = (config.duration / config.dt).round() as usize + 1;
    if horizon < 6 {
        return Err(PlannerError::InvalidInput("duration too short for the sample spacing".into()));
    }
    let wrench = PayloadWrench::new(problem.payload)?.wrench_world;

    let mut q_init: Vec<Vec<f64>> = match init {
        Some(t) => {
            if t.horizon() != horizon || t.n_dof != n {
                return Err(PlannerError::InvalidInput("init trajectory shape mismatch".into()));
            }
            (0..horizon).map(|i| t.position(i).to_vec()).collect()
        }
        None => (0..horizon)
            .map(|i| {
                let s = i as f64 / (horizon - 1) as f64;
                let blend = 10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5);
                problem
                    .start
                    .iter()
                    .zip(&problem.goal)
                    .map(|(a, b)| a + (b - a) * blend)
                    .collect()
            })
            .collect(),
    };
    // Pin the rest-endpoint rows exactly.
    q_init[0] = problem.start.clone();
    q_init[1] = problem.start.clone();
    q_init[horizon - 2] = problem.goal.clone();
    q_init[horizon - 1] = problem.goal.clone();

    let disc = Discretization { horizon, n, dt: config.dt, free_offset: 2 };
    let sqp = SqpProblem { model, proxies, scene: &problem.scene, wrench, disc, q_fixed: q_init.clone() };

    let mut x = DVector::zeros(sqp.disc.free_count());
    for t in 2..horizon - 2 {
        for j in 0..n {
            x[sqp.disc.var_index(t, j).unwrap()] = q_init[t][j];
        }
    }

    // Base jerk Hessian (constant), assembled from the stencils.
    let m = sqp.disc.free_count();
    let mut h_base = DMatrix::zeros(m, m);
    for t in 0..horizon - 1 {
        for j in 0..n {
            let stencil: Vec<(usize, f64)> = sqp
                .disc
                .jerk_stencil(t)
                .into_iter()
                .filter_map(|(qt, w)| sqp.disc.var_index(qt, j).map(|idx| (idx, w)))
                .collect();
            for &(i1, w1) in &stencil {
                for &(i2, w2) in &stencil {
                    h_base[(i1, i2)] += 2.0 * config.dt * w1 * w2;
                }
            }
        }
    }

    let mut rho = config.penalty_init;
    let mut lambdas: Vec<f64> = Vec::new();
    let mut trust = config.trust_radius;
    let mut merit_history = Vec::new();
    let (mut current_merit, mut violation, mut eval) = merit(&sqp, &x, &lambdas, rho);
    merit_history.push(eval.objective);
    let mut iterations = 0;
    let mut kkt_residual = f64::INFINITY;

    for outer in 0..config.max_iter {
        iterations = outer + 1;
        let constraints = sqp.constraints(&eval);
        if lambdas.len() != constraints.len() {
            lambdas.resize(constraints.len(), 0.0);
        }

        // AL gradient and Gauss-Newton Hessian.
        let mut grad = sqp.objective_gradient(&eval);
        let mut hessian = h_base.clone();
        for (i, c) in constraints.iter().enumerate() {
            let mult = (rho * c.value + lambdas[i]).max(0.0);
            if mult > 0.0 {
                for &(idx, w) in &c.entries {
                    grad[idx] += mult * w;
                }
                for &(i1, w1) in &c.entries {
                    for &(i2, w2) in &c.entries {
                        hessian[(i1, i2)] += rho * w1 * w2;
                    }
                }
            }
        }

        // Box bounds: joint limits and trust region.
        let mut lo = DVector::zeros(m);
        let mut hi = DVector::zeros(m);
        for t in 2..horizon - 2 {
            for j in 0..n {
                let idx = sqp.disc.var_index(t, j).unwrap();
                lo[idx] = (model.limits[j].q_min - x[idx]).max(-trust);
                hi[idx] = (model.limits[j].q_max - x[idx]).min(trust);
            }
        }
        let step = solve_box_qp(&hessian, &grad, &lo, &hi);
        let step_norm = step.amax();

        // Projected-gradient KKT residual at the current point.
        kkt_residual = (0..m)
            .map(|i| {
                let g = grad[i];
                if g > 0.0 && lo[i] >= -1e-15 {
                    0.0
                } else if g < 0.0 && hi[i] <= 1e-15 {
                    0.0
                } else {
                    g.abs()
                }
            })
            .fold(0.0, f64::max);
        if kkt_residual < config.tol_kkt || step_norm < config.tol_step {
            break;
        }

        // Backtracking line search on the AL merit.
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-6 {
            let candidate = &x + &step * alpha;
            let (cand_merit, cand_violation, cand_eval) = merit(&sqp, &candidate, &lambdas, rho);
            if cand_merit <= current_merit + 1e-12 {
                x = candidate;
                current_merit = cand_merit;
                violation = cand_violation;
                eval = cand_eval;
                merit_history.push(eval.objective);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            trust *= 0.5;
            if trust < config.tol_step {
                break;
            }
            continue;
        }
        trust = (trust * 1.5).min(config.trust_radius);

        // Multiplier update and penalty growth when infeasible.
        let constraints = sqp.constraints(&eval);
        lambdas.resize(constraints.len(), 0.0);
        for (i, c) in constraints.iter().enumerate() {
            lambdas[i] = (lambdas[i] + rho * c.value).max(0.0);
        }
        if violation > config.tol_feasible {
            rho = (rho * 1.6).min(1e7);
        }
        // Merit changes shape with new multipliers.
        let refreshed = merit(&sqp, &x, &lambdas, rho);
        current_merit = refreshed.0;
        violation = refreshed.1;
        eval = refreshed.2;
    }

    let traj = sqp.to_trajectory(&eval);
    let planning_time = clock.elapsed().as_secs_f64();
    let feasible = violation <= config.tol_feasible
        && check_trajectory(model, proxies, &problem.scene, &traj, problem.payload);
    let mut result = if feasible {
        PlannerResult::success(traj, planning_time, iterations)
    } else {
        // Converged (or out of budget) with residual constraint violation.
        PlannerResult::failure(PlannerStatus::Infeasible, planning_time, iterations)
    };
    result.merit_history = merit_history;
    let _ = kkt_residual;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use paydiff_core::model::{planar2, planar3};
    use paydiff_core::scene::{CollisionProxySet, Scene};
    use paydiff_oracles::quintic::quintic_jerk_objective;

    #[test]
    fn unconstrained_corridor_reaches_quintic_objective() {
        // Wide-open scene, generous limits: optimum is the minimum-jerk
        // interpolant; horizon 128 keeps the discretization error well
        // under the 1% band.
        let mut model = planar2();
        for lim in &mut model.limits {
            lim.v_max = 10.0;
            lim.a_max = 100.0;
            lim.j_max = 1000.0;
            lim.tau_max = 1e5;
        }
        let proxies = CollisionProxySet::along_links(&model, 1, 0.02);
        let duration = 2.0;
        let dt = duration / 127.0;
        let problem = Problem {
            start: vec![0.0, 0.3],
            goal: vec![1.0, -0.5],
            scene: Scene::empty(),
            payload: 0.0,
        };
        let config = SqpConfig { duration, dt, max_iter: 40, ..SqpConfig::default() };
        let result = sqp_optimize(&model, &proxies, &problem, None, &config).unwrap();
        assert_eq!(result.status, PlannerStatus::Success);
        let objective = *result.merit_history.last().unwrap();
        let expected: f64 = quintic_jerk_objective(1.0, duration) + quintic_jerk_objective(-0.8, duration);
        let rel = (objective - expected).abs() / expected;
        assert!(rel < 0.01, "objective {objective} vs quintic {expected} (rel {rel})");
    }

    #[test]
    fn objective_non_increasing_across_accepted_iterations() {
        let model = planar3();
        let proxies = CollisionProxySet::along_links(&model, 3, 0.05);
        let problem = Problem {
            start: vec![0.5, 0.4, 0.3],
            goal: vec![2.0, -0.5, 0.6],
            scene: Scene::tabletop(0.0, None),
            payload: 0.5,
        };
        let config = SqpConfig::default();
        let result = sqp_optimize(&model, &proxies, &problem, None, &config).unwrap();
        // Merit history records the objective after each accepted step; on
        // this lightly-constrained problem it must never increase by more
        // than numerical noise.
        for w in result.merit_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6) + 1e-9, "objective increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn infeasible_payload_reports_infeasible() {
        let model = planar3();
        let proxies = CollisionProxySet::along_links(&model, 3, 0.05);
        let problem = Problem {
            start: vec![0.2, 0.1, 0.0],
            goal: vec![2.8, -0.3, 0.4],
            scene: Scene::tabletop(0.0, None),
            payload: 400.0,
        };
        let config = SqpConfig { max_iter: 25, ..SqpConfig::default() };
        let result = sqp_optimize(&model, &proxies, &problem, None, &config).unwrap();
        assert_eq!(result.status, PlannerStatus::Infeasible);
        assert!(result.trajectory.is_none());
    }

    #[test]
    fn feasible_problem_output_validates() {
        let model = planar3();
        let proxies = CollisionProxySet::along_links(&model, 3, 0.05);
        let problem = Problem {
            start: vec![0.6, 0.4, 0.2],
            goal: vec![1.9, -0.3, 0.5],
            scene: Scene::tabletop(0.0, None),
            payload: 1.0,
        };
        let result = sqp_optimize(&model, &proxies, &problem, None, &SqpConfig::default()).unwrap();
        if let Some(traj) = &result.trajectory {
            assert!(check_trajectory(&model, &proxies, &problem.scene, traj, 1.0));
            assert_eq!(traj.horizon(), 64);
            assert_eq!(traj.position(0), problem.start.as_slice());
            assert_eq!(traj.position(63), problem.goal.as_slice());
        } else {
            panic!("open-table problem should be solvable: {:?}", result.status);
        }
    }
}
