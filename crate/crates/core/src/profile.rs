//! Scalar jerk-limited point-to-point profiles. Rest-to-rest moves use the
//! time-optimal seven-segment construction; moves starting from nonzero
//! velocity/acceleration first bring the joint to rest with a jerk-limited
//! stop and then run a rest-to-rest segment, which is feasible and exact
//! though not time-optimal. A requested duration stretches the rest-to-rest
//! part so that the target state is reached exactly at that time.

use crate::model::JointLimits;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("requested duration {given:.6} s is below the minimum feasible {required:.6} s")]
    InfeasibleDuration { required: f64, given: f64 },
    #[error("boundary state outside limits: {0}")]
    BoundaryOutOfLimits(String),
    #[error("non-finite profile input")]
    NonFinite,
}

/// Piecewise-constant-jerk profile. Beyond its duration the state holds at
/// the target `(x1, 0, 0)`.
#[derive(Debug, Clone)]
pub struct JerkProfile {
    x0: f64,
    v0: f64,
    a0: f64,
    target: f64,
    /// (duration, jerk) segments.
    segments: Vec<(f64, f64)>,
    total: f64,
}

impl JerkProfile {
    pub fn duration(&self) -> f64 {
        self.total
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    /// Exact state (position, velocity, acceleration) at time `t`.
    pub fn state_at(&self, t: f64) -> (f64, f64, f64) {
        if t >= self.total {
            return (self.target, 0.0, 0.0);
        }
        let (mut x, mut v, mut a) = (self.x0, self.v0, self.a0);
        let mut remaining = t.max(0.0);
        for &(dur, jerk) in &self.segments {
            let h = remaining.min(dur);
            x += v * h + 0.5 * a * h * h + jerk * h * h * h / 6.0;
            v += a * h + 0.5 * jerk * h * h;
            a += jerk * h;
            remaining -= h;
            if remaining <= 0.0 {
                break;
            }
        }
        (x, v, a)
    }

    /// Samples `(x, v, a)` on the uniform grid `0, dt, 2dt, ...` covering
    /// the whole profile; the last sample is at or after the duration and
    /// therefore exactly the target state.
    pub fn sample(&self, dt: f64) -> Vec<(f64, f64, f64)> {
        let steps = (self.total / dt - 1e-12).ceil().max(1.0) as usize + 1;
        (0..steps).map(|i| self.state_at(i as f64 * dt)).collect()
    }

    pub fn max_abs_jerk(&self) -> f64 {
        self.segments.iter().map(|&(_, j)| j.abs()).fold(0.0, f64::max)
    }
}

/// Rest-to-rest seven-segment timings `(t_j, t_a, t_v)` for distance `d >= 0`.
fn seven_segment_times(d: f64, v_max: f64, a_max: f64, j_max: f64) -> (f64, f64, f64) {
    // Ramp that reaches v_max.
    let (t_j_full, t_a_full) = if v_max * j_max >= a_max * a_max {
        (a_max / j_max, v_max / a_max - a_max / j_max)
    } else {
        ((v_max / j_max).sqrt(), 0.0)
    };
    let ramp_time = 2.0 * t_j_full + t_a_full;
    let d_ramps = v_max * ramp_time; // accel + decel ramps together
    if d >= d_ramps {
        return (t_j_full, t_a_full, (d - d_ramps) / v_max);
    }
    // v_max not reached. Try a profile with an acceleration plateau:
    // v_p^2 / a_max + v_p a_max / j_max = d.
    let half = a_max * a_max / j_max;
    let v_p = 0.5 * (-half + (half * half + 4.0 * d * a_max).sqrt());
    if v_p >= a_max * a_max / j_max {
        return (a_max / j_max, v_p / a_max - a_max / j_max, 0.0);
    }
    // Triangular acceleration: distance = 2 j t_j^3.
    let t_j = (d / (2.0 * j_max)).cbrt();
    (t_j, 0.0, 0.0)
}

fn rest_to_rest_segments(d: f64, limits: &JointLimits) -> (Vec<(f64, f64)>, f64) {
    if d == 0.0 {
        return (Vec::new(), 0.0);
    }
    let sign = d.signum();
    let (t_j, t_a, t_v) = seven_segment_times(d.abs(), limits.v_max, limits.a_max, limits.j_max);
    let j = sign * limits.j_max;
    let segments = vec![
        (t_j, j),
        (t_a, 0.0),
        (t_j, -j),
        (t_v, 0.0),
        (t_j, -j),
        (t_a, 0.0),
        (t_j, j),
    ];
    let total = 4.0 * t_j + 2.0 * t_a + t_v;
    (segments, total)
}

/// Segments bringing `(v0, a0)` to rest: first ramp the acceleration to
/// zero, then cancel the residual velocity with a symmetric pulse.
fn stop_segments(v0: f64, a0: f64, limits: &JointLimits) -> Vec<(f64, f64)> {
    let j = limits.j_max;
    let mut segments = Vec::new();
    let mut v = v0;
    if a0 != 0.0 {
        let t = a0.abs() / j;
        segments.push((t, -a0.signum() * j));
        v += a0.signum() * a0 * a0 / (2.0 * j);
    }
    if v.abs() > 1e-12 {
        let dir = -v.signum();
        let a_pk = limits.a_max.min((v.abs() * j).sqrt());
        let t_j = a_pk / j;
        let t_hold = (v.abs() / a_pk - a_pk / j).max(0.0);
        segments.push((t_j, dir * j));
        segments.push((t_hold, 0.0));
        segments.push((t_j, -dir * j));
    }
    segments
}

fn integrate_segments(x0: f64, v0: f64, a0: f64, segments: &[(f64, f64)]) -> (f64, f64, f64) {
    let (mut x, mut v, mut a) = (x0, v0, a0);
    for &(dur, jerk) in segments {
        x += v * dur + 0.5 * a * dur * dur + jerk * dur * dur * dur / 6.0;
        v += a * dur + 0.5 * jerk * dur * dur;
        a += jerk * dur;
    }
    (x, v, a)
}

/// Jerk-limited profile from `(x0, v0, a0)` to `(x1, 0, 0)` respecting
/// `v_max`/`a_max`/`j_max`. With `duration` given, the profile is stretched
/// to arrive exactly then (error if shorter than the minimum feasible time).
pub fn jerk_limited_profile(
    x0: f64,
    v0: f64,
    a0: f64,
    x1: f64,
    limits: &JointLimits,
    duration: Option<f64>,
) -> Result<JerkProfile, ProfileError> {
    for v in [x0, v0, a0, x1] {
        if !v.is_finite() {
            return Err(ProfileError::NonFinite);
        }
    }
    if v0.abs() > limits.v_max * (1.0 + 1e-9) {
        return Err(ProfileError::BoundaryOutOfLimits(format!("|v0| = {} > v_max", v0.abs())));
    }
    if a0.abs() > limits.a_max * (1.0 + 1e-9) {
        return Err(ProfileError::BoundaryOutOfLimits(format!("|a0| = {} > a_max", a0.abs())));
    }

    let at_rest = v0 == 0.0 && a0 == 0.0;
    let (mut segments, stop_time, x_stop) = if at_rest {
        (Vec::new(), 0.0, x0)
    } else {
        let stop = stop_segments(v0, a0, limits);
        let stop_time: f64 = stop.iter().map(|s| s.0).sum();
        let (x_stop, _, _) = integrate_segments(x0, v0, a0, &stop);
        (stop, stop_time, x_stop)
    };

    let (rtr, rtr_time) = rest_to_rest_segments(x1 - x_stop, limits);
    let natural = stop_time + rtr_time;

    let total = match duration {
        None => {
            segments.extend(rtr);
            natural
        }
        Some(given) => {
            if given < natural * (1.0 - 1e-9) - 1e-12 {
                return Err(ProfileError::InfeasibleDuration { required: natural, given });
            }
            let budget = given - stop_time;
            if rtr_time > 0.0 {
                // Uniform time stretch: durations scale by s, jerks by 1/s^3.
                let s = budget / rtr_time;
                segments.extend(rtr.iter().map(|&(dur, jerk)| (dur * s, jerk / (s * s * s))));
            } else if budget > 0.0 {
                segments.push((budget, 0.0));
            }
            given
        }
    };

    Ok(JerkProfile { x0, v0, a0, target: x1, segments, total })
}

/// Per-joint profiles from `starts[j] = (x, v, a)` to `(targets[j], 0, 0)`,
/// all arriving at the common duration (the slowest joint's natural time,
/// or `duration` if given).
pub fn synchronized_profiles(
    starts: &[(f64, f64, f64)],
    targets: &[f64],
    limits: &[JointLimits],
    duration: Option<f64>,
) -> Result<(Vec<JerkProfile>, f64), ProfileError> {
    let mut t_needed: f64 = 0.0;
    for j in 0..starts.len() {
        let p = jerk_limited_profile(starts[j].0, starts[j].1, starts[j].2, targets[j], &limits[j], None)?;
        t_needed = t_needed.max(p.duration());
    }
    let total = match duration {
        Some(given) => {
            if given < t_needed * (1.0 - 1e-9) - 1e-12 {
                return Err(ProfileError::InfeasibleDuration { required: t_needed, given });
            }
            given
        }
        None => t_needed,
    };
    let mut profiles = Vec::with_capacity(starts.len());
    for j in 0..starts.len() {
        profiles.push(jerk_limited_profile(
            starts[j].0,
            starts[j].1,
            starts[j].2,
            targets[j],
            &limits[j],
            Some(total),
        )?);
    }
    Ok((profiles, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use paydiff_oracles::profile_search::search_min_duration;

    fn limits(v: f64, a: f64, j: f64) -> JointLimits {
        JointLimits { q_min: -10.0, q_max: 10.0, v_max: v, a_max: a, j_max: j, tau_max: 100.0 }
    }

    #[test]
    fn zero_move_is_constant() {
        let lim = limits(1.0, 10.0, 100.0);
        let p = jerk_limited_profile(0.4, 0.0, 0.0, 0.4, &lim, None).unwrap();
        assert_eq!(p.duration(), 0.0);
        for i in 0..5 {
            let (x, v, a) = p.state_at(i as f64 * 0.1);
            assert_eq!((x, v, a), (0.4, 0.0, 0.0));
        }
    }

    #[test]
    fn rest_to_rest_duration_is_time_optimal() {
        for (d, v, a, j) in [
            (1.0, 1.0, 10.0, 100.0),
            (0.3, 2.0, 5.0, 50.0),
            (2.5, 1.5, 8.0, 60.0),
            (0.01, 1.0, 10.0, 100.0),
        ] {
            let lim = limits(v, a, j);
            let p = jerk_limited_profile(0.0, 0.0, 0.0, d, &lim, None).unwrap();
            let searched = search_min_duration(d, v, a, j);
            // Grid search is an upper bound within its resolution.
            assert!(
                p.duration() <= searched + 0.02 * searched.max(0.1),
                "d={d}: closed form {} vs searched {}",
                p.duration(),
                searched
            );
            assert!(
                p.duration() >= searched - 0.02 * searched.max(0.1),
                "d={d}: closed form {} suspiciously below search {}",
                p.duration(),
                searched
            );
        }
        // The canonical case has exact value 1.2 s.
        let p = jerk_limited_profile(0.0, 0.0, 0.0, 1.0, &limits(1.0, 10.0, 100.0), None).unwrap();
        assert!((p.duration() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn boundary_conditions_are_exact() {
        for (x0, v0, a0, x1) in [
            (0.0, 0.0, 0.0, 1.0),
            (0.5, 0.0, 0.0, -1.3),
            (0.0, 0.8, 0.0, 0.7),
            (0.2, -0.5, 2.0, 1.0),
            (0.0, 0.9, -3.0, -0.4),
        ] {
            let lim = limits(1.0, 6.0, 60.0);
            let p = jerk_limited_profile(x0, v0, a0, x1, &lim, None).unwrap();
            let (x, v, a) = integrate_segments(x0, v0, a0, &p.segments);
            assert!((x - x1).abs() < 1e-8, "position error {}", (x - x1).abs());
            assert!(v.abs() < 1e-8);
            assert!(a.abs() < 1e-8);
            let (xs, vs, as_) = p.state_at(0.0);
            assert_eq!((xs, vs, as_), (x0, v0, a0));
            let (xe, ve, ae) = p.state_at(p.duration() + 1.0);
            assert_eq!((xe, ve, ae), (x1, 0.0, 0.0));
        }
    }

    #[test]
    fn samples_respect_limits() {
        let lim = limits(1.0, 6.0, 60.0);
        for (v0, a0, x1) in [(0.0, 0.0, 1.7), (0.6, 0.0, -0.5), (0.4, 1.5, 0.9), (-0.8, -1.0, 0.3)] {
            let p = jerk_limited_profile(0.0, v0, a0, x1, &lim, None).unwrap();
            let samples = p.sample(0.002);
            for (i, &(_, v, a)) in samples.iter().enumerate() {
                assert!(v.abs() <= lim.v_max * (1.0 + 1e-6) + 1e-9, "sample {i}: v = {v}");
                assert!(a.abs() <= lim.a_max * (1.0 + 1e-6) + 1e-9, "sample {i}: a = {a}");
            }
            // Discrete jerk between samples stays within j_max.
            for w in samples.windows(2) {
                let j = (w[1].2 - w[0].2) / 0.002;
                assert!(j.abs() <= lim.j_max * (1.0 + 1e-6), "jerk {j}");
            }
        }
    }

    #[test]
    fn duration_stretch_is_exact_and_limit_safe() {
        let lim = limits(1.0, 10.0, 100.0);
        let natural = jerk_limited_profile(0.0, 0.0, 0.0, 1.0, &lim, None).unwrap().duration();
        let p = jerk_limited_profile(0.0, 0.0, 0.0, 1.0, &lim, Some(natural * 2.5)).unwrap();
        assert!((p.duration() - natural * 2.5).abs() < 1e-12);
        let (x, v, a) = p.state_at(p.duration() - 1e-9);
        assert!((x - 1.0).abs() < 1e-6 && v.abs() < 1e-4 && a.abs() < 1e-3);
        for &(_, v, a) in &p.sample(0.002) {
            assert!(v.abs() <= lim.v_max + 1e-9);
            assert!(a.abs() <= lim.a_max + 1e-9);
        }
    }

    #[test]
    fn infeasible_duration_rejected() {
        let lim = limits(1.0, 10.0, 100.0);
        match jerk_limited_profile(0.0, 0.0, 0.0, 1.0, &lim, Some(0.5)) {
            Err(ProfileError::InfeasibleDuration { required, given }) => {
                assert!((required - 1.2).abs() < 1e-9);
                assert_eq!(given, 0.5);
            }
            other => panic!("expected infeasible duration, got {other:?}"),
        }
    }

    #[test]
    fn boundary_limit_violations_rejected() {
        let lim = limits(1.0, 5.0, 50.0);
        assert!(matches!(
            jerk_limited_profile(0.0, 2.0, 0.0, 1.0, &lim, None),
            Err(ProfileError::BoundaryOutOfLimits(_))
        ));
        assert!(matches!(
            jerk_limited_profile(0.0, 0.0, 9.0, 1.0, &lim, None),
            Err(ProfileError::BoundaryOutOfLimits(_))
        ));
    }

    #[test]
    fn synchronized_profiles_share_arrival_time() {
        let lims = vec![limits(1.0, 6.0, 60.0), limits(2.0, 8.0, 80.0), limits(1.5, 6.0, 60.0)];
        let starts = vec![(0.0, 0.0, 0.0), (0.3, 0.2, 0.0), (-0.5, 0.0, 0.0)];
        let targets = vec![1.5, -0.4, 0.6];
        let (profiles, total) = synchronized_profiles(&starts, &targets, &lims, None).unwrap();
        for (p, &target) in profiles.iter().zip(&targets) {
            assert!(p.duration() <= total + 1e-12);
            let (x, v, a) = p.state_at(total);
            assert!((x - target).abs() < 1e-8 && v.abs() < 1e-8 && a.abs() < 1e-8);
        }
    }
}
