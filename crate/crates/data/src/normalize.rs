//! Per-channel affine maps taking each state channel to [-1, 1], derived
//! from the joint limits rather than data statistics so that clamping a
//! normalized state to the unit box clamps it exactly to the limits.

use paydiff_core::model::RobotModel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    /// Channel centers, length 3 n_dof (q block, qd block, qdd block).
    pub center: Vec<f64>,
    /// Channel half-ranges, same layout; all strictly positive.
    pub half: Vec<f64>,
}

impl NormalizationStats {
    pub fn from_limits(model: &RobotModel) -> Self {
        let n = model.n_dof();
        let mut center = vec![0.0; 3 * n];
        let mut half = vec![0.0; 3 * n];
        for (j, lim) in model.limits.iter().enumerate() {
            center[j] = 0.5 * (lim.q_min + lim.q_max);
            half[j] = 0.5 * (lim.q_max - lim.q_min);
            center[n + j] = 0.0;
            half[n + j] = lim.v_max;
            center[2 * n + j] = 0.0;
            half[2 * n + j] = lim.a_max;
        }
        NormalizationStats { center, half }
    }

    pub fn channels(&self) -> usize {
        self.center.len()
    }

    pub fn normalize_value(&self, channel: usize, v: f64) -> f64 {
        (v - self.center[channel]) / self.half[channel]
    }

    pub fn denormalize_value(&self, channel: usize, v: f64) -> f64 {
        self.center[channel] + v * self.half[channel]
    }

    /// Normalizes one full state row `[q, qd, qdd]` in place.
    pub fn normalize_state(&self, state: &mut [f64]) {
        for (c, v) in state.iter_mut().enumerate() {
            *v = (*v - self.center[c]) / self.half[c];
        }
    }

    pub fn denormalize_state(&self, state: &mut [f64]) {
        for (c, v) in state.iter_mut().enumerate() {
            *v = self.center[c] + *v * self.half[c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use paydiff_core::model::planar3;

    #[test]
    fn round_trip_identity() {
        let model = planar3();
        let stats = NormalizationStats::from_limits(&model);
        let mut state: Vec<f64> = (0..9).map(|i| 0.3 * i as f64 - 1.1).collect();
        let original = state.clone();
        stats.normalize_state(&mut state);
        stats.denormalize_state(&mut state);
        for (a, b) in state.iter().zip(&original) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn limits_map_to_unit_box() {
        let model = planar3();
        let stats = NormalizationStats::from_limits(&model);
        for (j, lim) in model.limits.iter().enumerate() {
            assert!((stats.normalize_value(j, lim.q_max) - 1.0).abs() < 1e-12);
            assert!((stats.normalize_value(j, lim.q_min) + 1.0).abs() < 1e-12);
            assert!((stats.normalize_value(3 + j, lim.v_max) - 1.0).abs() < 1e-12);
            assert!((stats.normalize_value(6 + j, -lim.a_max) + 1.0).abs() < 1e-12);
        }
    }
}
