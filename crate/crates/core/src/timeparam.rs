//! Path time-parameterization: fit a natural cubic spline through the joint
//! waypoints, compose it with a quintic time warp (zero velocity and
//! acceleration at both ends), and scale the duration until all kinematic
//! limits hold. Two-waypoint paths use the jerk-limited profile directly.

use crate::model::JointLimits;
use crate::profile::{synchronized_profiles, ProfileError};
use crate::trajectory::{Trajectory, TrajectoryError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TimeParamError {
    #[error("path must contain at least two distinct waypoints")]
    DegeneratePath,
    #[error("waypoint {index} has {got} joints, expected {expected}")]
    Dimension { index: usize, got: usize, expected: usize },
    #[error("motion needs {required:.4} s but only {available:.4} s fit the horizon")]
    HorizonTooShort { required: f64, available: f64 },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Natural cubic spline through `(u_i, y_i)` knots for one joint.
struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    fn fit(knots: &[f64], values: &[f64]) -> Self {
        let n = knots.len();
        let mut second = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives.
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut off = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                let h0 = knots[i + 1] - knots[i];
                let h1 = knots[i + 2] - knots[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                off[i] = h1;
                rhs[i] = 6.0
                    * ((values[i + 2] - values[i + 1]) / h1 - (values[i + 1] - values[i]) / h0);
            }
            // Thomas algorithm.
            for i in 1..m {
                let h0 = knots[i + 1] - knots[i];
                let w = h0 / diag[i - 1];
                diag[i] -= w * off[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - off[i] * second[i + 2]) / diag[i];
            }
        }
        CubicSpline { knots: knots.to_vec(), values: values.to_vec(), second }
    }

    fn segment(&self, u: f64) -> usize {
        let n = self.knots.len();
        match self.knots.binary_search_by(|k| k.partial_cmp(&u).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Value and first three derivatives with respect to the knot parameter.
    fn eval(&self, u: f64) -> (f64, f64, f64, f64) {
        let i = self.segment(u.clamp(self.knots[0], *self.knots.last().unwrap()));
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - u) / h;
        let b = (u - self.knots[i]) / h;
        let y = a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0;
        let dy = (self.values[i + 1] - self.values[i]) / h
            - (3.0 * a * a - 1.0) / 6.0 * h * self.second[i]
            + (3.0 * b * b - 1.0) / 6.0 * h * self.second[i + 1];
        let d2y = a * self.second[i] + b * self.second[i + 1];
        let d3y = (self.second[i + 1] - self.second[i]) / h;
        (y, dy, d2y, d3y)
    }
}

/// Quintic blend s(w) with zero first and second derivatives at both ends.
fn blend(w: f64) -> (f64, f64, f64, f64) {
    let w = w.clamp(0.0, 1.0);
    let s = 10.0 * w.powi(3) - 15.0 * w.powi(4) + 6.0 * w.powi(5);
    let ds = 30.0 * w.powi(2) - 60.0 * w.powi(3) + 30.0 * w.powi(4);
    let d2s = 60.0 * w - 180.0 * w * w + 120.0 * w.powi(3);
    let d3s = 60.0 - 360.0 * w + 360.0 * w * w;
    (s, ds, d2s, d3s)
}

/// Spline path through the waypoints with a rest-to-rest time warp; exposes
/// the continuous parameterization for inspection by tests and callers.
pub struct SplinePath {
    splines: Vec<CubicSpline>,
    pub knots: Vec<f64>,
    pub duration: f64,
}

impl SplinePath {
    /// Joint positions, velocities, accelerations at time `t`.
    pub fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let w = (t / self.duration).clamp(0.0, 1.0);
        let (s, ds, d2s, _) = blend(w);
        let big_t = self.duration;
        let mut q = Vec::with_capacity(self.splines.len());
        let mut qd = Vec::with_capacity(self.splines.len());
        let mut qdd = Vec::with_capacity(self.splines.len());
        for sp in &self.splines {
            let (y, dy, d2y, _) = sp.eval(s);
            q.push(y);
            qd.push(dy * ds / big_t);
            qdd.push(d2y * (ds / big_t).powi(2) + dy * d2s / (big_t * big_t));
        }
        (q, qd, qdd)
    }

    /// Time at which the path passes through input waypoint `i`. The quintic
    /// blend is strictly monotone, so the warp is inverted by bisection.
    pub fn knot_time(&self, i: usize) -> f64 {
        let target = self.knots[i];
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if blend(mid).0 < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi) * self.duration
    }

    fn max_derivative_ratios(&self, limits: &[JointLimits], samples: usize) -> f64 {
        // Largest factor by which a sampled derivative exceeds its limit,
        // accounting for how each derivative order scales with duration.
        let mut scale: f64 = 1.0;
        for k in 0..=samples {
            let w = k as f64 / samples as f64;
            let (s, ds, d2s, d3s) = blend(w);
            for (j, sp) in self.splines.iter().enumerate() {
                let (_, dy, d2y, d3y) = sp.eval(s);
                let big_t = self.duration;
                let v = (dy * ds / big_t).abs();
                let a = (d2y * (ds / big_t).powi(2) + dy * d2s / (big_t * big_t)).abs();
                let jerk = (d3y * (ds / big_t).powi(3)
                    + 3.0 * d2y * ds * d2s / big_t.powi(3)
                    + dy * d3s / big_t.powi(3))
                .abs();
                scale = scale.max(v / limits[j].v_max);
                scale = scale.max((a / limits[j].a_max).sqrt());
                scale = scale.max((jerk / limits[j].j_max).cbrt());
            }
        }
        scale
    }
}

fn dedup_path(path: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(path.len());
    for p in path {
        let same = out
            .last()
            .map(|last: &Vec<f64>| last.iter().zip(p).all(|(a, b)| (a - b).abs() < 1e-12))
            .unwrap_or(false);
        if !same {
            out.push(p.clone());
        }
    }
    out
}

/// Fits the spline path and scales its duration until velocity,
/// acceleration, and jerk limits hold everywhere.
pub fn fit_spline_path(path: &[Vec<f64>], limits: &[JointLimits]) -> Result<SplinePath, TimeParamError> {
    let n_dof = limits.len();
    for (i, p) in path.iter().enumerate() {
        if p.len() != n_dof {
            return Err(TimeParamError::Dimension { index: i, got: p.len(), expected: n_dof });
        }
    }
    let path = dedup_path(path);
    if path.len() < 2 {
        return Err(TimeParamError::DegeneratePath);
    }
    // Chord-length knots normalized to [0, 1].
    let mut knots = vec![0.0];
    for w in path.windows(2) {
        let chord: f64 = w[0].iter().zip(&w[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        knots.push(knots.last().unwrap() + chord.max(1e-9));
    }
    let total_len = *knots.last().unwrap();
    for k in &mut knots {
        *k /= total_len;
    }
    let splines: Vec<CubicSpline> = (0..n_dof)
        .map(|j| {
            let values: Vec<f64> = path.iter().map(|p| p[j]).collect();
            CubicSpline::fit(&knots, &values)
        })
        .collect();
    let mut spath = SplinePath { splines, knots, duration: 1.0 };
    let scale = spath.max_derivative_ratios(limits, 400);
    spath.duration = scale * (1.0 + 1e-6);
    Ok(spath)
}

fn sample_spline(spath: &SplinePath, dt: f64, horizon: Option<usize>) -> Result<Trajectory, TimeParamError> {
    let steps = match horizon {
        Some(h) => h,
        None => (spath.duration / dt - 1e-12).ceil().max(1.0) as usize + 1,
    };
    let positions: Vec<Vec<f64>> = (0..steps)
        .map(|i| spath.eval((i as f64 * dt).min(spath.duration)).0)
        .collect();
    let n_dof = spath.splines.len();
    Ok(Trajectory::from_positions(dt, n_dof, &positions)?)
}

/// Time-parameterizes a geometric joint path at sample spacing `dt`.
/// The result starts and ends at rest and satisfies all kinematic limits.
pub fn time_parameterize(
    path: &[Vec<f64>],
    limits: &[JointLimits],
    dt: f64,
) -> Result<Trajectory, TimeParamError> {
    time_parameterize_impl(path, limits, dt, None)
}

/// Like [`time_parameterize`] but stretched to exactly `horizon` samples
/// (duration `(horizon - 1) * dt`); errors when the motion cannot fit.
pub fn time_parameterize_fixed(
    path: &[Vec<f64>],
    limits: &[JointLimits],
    dt: f64,
    horizon: usize,
) -> Result<Trajectory, TimeParamError> {
    time_parameterize_impl(path, limits, dt, Some(horizon))
}

fn time_parameterize_impl(
    path: &[Vec<f64>],
    limits: &[JointLimits],
    dt: f64,
    horizon: Option<usize>,
) -> Result<Trajectory, TimeParamError> {
    let deduped = dedup_path(path);
    if deduped.len() < 2 {
        return Err(TimeParamError::DegeneratePath);
    }
    if deduped.len() == 2 {
        // Straight segment: the jerk-limited profile is the better generator.
        let starts: Vec<(f64, f64, f64)> = deduped[0].iter().map(|&x| (x, 0.0, 0.0)).collect();
        let duration = horizon.map(|h| (h - 1) as f64 * dt);
        let (profiles, total) = match synchronized_profiles(&starts, &deduped[1], limits, duration) {
            Ok(r) => r,
            Err(ProfileError::InfeasibleDuration { required, given }) => {
                return Err(TimeParamError::HorizonTooShort { required, available: given })
            }
            Err(e) => return Err(e.into()),
        };
        let steps = horizon.unwrap_or_else(|| (total / dt - 1e-12).ceil().max(1.0) as usize + 1);
        let positions: Vec<Vec<f64>> = (0..steps)
            .map(|i| profiles.iter().map(|p| p.state_at(i as f64 * dt).0).collect())
            .collect();
        return Ok(Trajectory::from_positions(dt, limits.len(), &positions)?);
    }
    let mut spath = fit_spline_path(&deduped, limits)?;
    if let Some(h) = horizon {
        let available = (h - 1) as f64 * dt;
        if spath.duration > available {
            return Err(TimeParamError::HorizonTooShort { required: spath.duration, available });
        }
        // Slowing down only relaxes the kinematic limits.
        spath.duration = available;
    }
    sample_spline(&spath, dt, horizon)
}
