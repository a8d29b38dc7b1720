//! Quintic minimum-jerk reference values computed by numeric quadrature.

/// Rest-to-rest minimum-jerk quintic from 0 to `d` over duration `big_t`.
pub fn quintic_position(d: f64, big_t: f64, t: f64) -> f64 {
    let s = (t / big_t).clamp(0.0, 1.0);
    d * (10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5))
}

fn quintic_jerk(d: f64, big_t: f64, t: f64) -> f64 {
    let s = t / big_t;
    d * (60.0 - 360.0 * s + 360.0 * s * s) / big_t.powi(3)
}

/// Integral of squared jerk of the quintic over [0, T] by Simpson
/// quadrature; the analytic optimum of the continuous minimum-jerk problem.
pub fn quintic_jerk_objective(d: f64, big_t: f64) -> f64 {
    let n = 2000;
    let h = big_t / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let a = i as f64 * h;
        let f0 = quintic_jerk(d, big_t, a).powi(2);
        let f1 = quintic_jerk(d, big_t, a + 0.5 * h).powi(2);
        let f2 = quintic_jerk(d, big_t, a + h).powi(2);
        sum += h / 6.0 * (f0 + 4.0 * f1 + f2);
    }
    sum
}
