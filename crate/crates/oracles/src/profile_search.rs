//! Grid search over seven-segment profile timings for rest-to-rest moves.
//! Establishes a near-optimal duration reference by trying dense (t_j, t_a)
//! combinations, numerically integrating each candidate, and keeping the
//! fastest one that meets the limits and covers the distance.

/// Integrates a symmetric jerk ramp [+j for t_j, 0 for t_a, -j for t_j]
/// from rest, returning (distance, peak velocity).
fn integrate_ramp(j: f64, t_j: f64, t_a: f64, steps_per_segment: usize) -> (f64, f64) {
    let mut x = 0.0;
    let mut v = 0.0;
    let mut a = 0.0;
    for (jerk, duration) in [(j, t_j), (0.0, t_a), (-j, t_j)] {
        let h = duration / steps_per_segment as f64;
        for _ in 0..steps_per_segment {
            // Exact update within a constant-jerk slice.
            x += v * h + 0.5 * a * h * h + jerk * h * h * h / 6.0;
            v += a * h + 0.5 * jerk * h * h;
            a += jerk * h;
        }
    }
    (x, v)
}

/// Minimum feasible rest-to-rest duration found by grid search; an upper
/// bound on the true optimum within the grid resolution.
pub fn search_min_duration(distance: f64, v_max: f64, a_max: f64, j_max: f64) -> f64 {
    let d = distance.abs();
    if d == 0.0 {
        return 0.0;
    }
    let tj_hi = (a_max / j_max).min((v_max / j_max).sqrt()) * 1.001;
    let ta_hi = v_max / a_max;
    let grid = 250;
    let mut best = f64::INFINITY;
    for i in 1..=grid {
        let t_j = tj_hi * i as f64 / grid as f64;
        if t_j * j_max > a_max * 1.0001 {
            continue;
        }
        for k in 0..=grid {
            let t_a = ta_hi * k as f64 / grid as f64;
            let (d_ramp, v_peak) = integrate_ramp(j_max, t_j, t_a, 40);
            if v_peak > v_max * 1.0001 || v_peak <= 0.0 {
                continue;
            }
            let cruise = d - 2.0 * d_ramp;
            if cruise < -1e-9 {
                continue;
            }
            let t_v = cruise.max(0.0) / v_peak;
            let total = 4.0 * t_j + 2.0 * t_a + t_v;
            if total < best {
                best = total;
            }
        }
    }
    best
}
