//! The four payload-mass encodings. Payloads live on a 19-bin grid
//! (0..18 kg); continuous masses quantize to their ceiling so the encoded
//! capacity is always an upper bound on the requested payload.

use crate::DiffusionError;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const PAYLOAD_BINS: usize = 19;
pub const PAYLOAD_MAX: f64 = 18.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingScheme {
    /// Single scalar, normalized to [-1, 1].
    Numeric,
    /// 19-dim binary vector with a single one at index ceil(p).
    OneHot,
    /// 19-dim binary vector with ones at indices <= ceil(p).
    LessThan,
    /// Trained on the full supported range (less-than of m_max); at
    /// inference interpreted as one-hot or less-than of the target payload.
    SupportedRange,
}

impl EncodingScheme {
    pub fn dim(&self) -> usize {
        match self {
            EncodingScheme::Numeric => 1,
            _ => PAYLOAD_BINS,
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "numeric" => Some(EncodingScheme::Numeric),
            "one_hot" => Some(EncodingScheme::OneHot),
            "less_than" => Some(EncodingScheme::LessThan),
            "supported_range" => Some(EncodingScheme::SupportedRange),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EncodingScheme::Numeric => "numeric",
            EncodingScheme::OneHot => "one_hot",
            EncodingScheme::LessThan => "less_than",
            EncodingScheme::SupportedRange => "supported_range",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceInterpretation {
    AsOneHot,
    AsLessThan,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    /// Training-time encoding of a sampled supported mass (or of m_max for
    /// the supported-range scheme).
    Train,
    /// Inference-time encoding of a target payload.
    Infer(InferenceInterpretation),
}

fn ceil_bin(value: f64) -> usize {
    (value.ceil() as usize).min(PAYLOAD_BINS - 1)
}

fn one_hot(value: f64) -> Vec<f64> {
    let mut v = vec![0.0; PAYLOAD_BINS];
    v[ceil_bin(value)] = 1.0;
    v
}

fn less_than(value: f64) -> Vec<f64> {
    let bin = ceil_bin(value);
    (0..PAYLOAD_BINS).map(|j| if j <= bin { 1.0 } else { 0.0 }).collect()
}

/// Raw (unnormalized) encoding vector: binary entries are 0/1, numeric is
/// the plain mass value scaled to [-1, 1].
pub fn encode_payload(scheme: EncodingScheme, value: f64, phase: Phase) -> Result<Vec<f64>, DiffusionError> {
    if !(0.0..=PAYLOAD_MAX).contains(&value) || !value.is_finite() {
        return Err(DiffusionError::PayloadOutOfRange(value));
    }
    Ok(match scheme {
        EncodingScheme::Numeric => vec![2.0 * (value / PAYLOAD_MAX) - 1.0],
        EncodingScheme::OneHot => one_hot(value),
        EncodingScheme::LessThan => less_than(value),
        EncodingScheme::SupportedRange => match phase {
            Phase::Train => less_than(value),
            Phase::Infer(InferenceInterpretation::AsOneHot) => one_hot(value),
            Phase::Infer(InferenceInterpretation::AsLessThan) => less_than(value),
        },
    })
}

/// Network-facing encoding: binary entries mapped to {-1, +1}; numeric is
/// already normalized.
pub fn encode_payload_normalized(
    scheme: EncodingScheme,
    value: f64,
    phase: Phase,
) -> Result<Vec<f64>, DiffusionError> {
    let raw = encode_payload(scheme, value, phase)?;
    Ok(match scheme {
        EncodingScheme::Numeric => raw,
        _ => raw.iter().map(|&v| 2.0 * v - 1.0).collect(),
    })
}

/// Training-time conditioning mass: p_i ~ U(0, m_i) for the per-payload
/// schemes; the supported-range scheme bypasses sampling and encodes the
/// full capability m_i directly.
pub fn sample_training_payload(scheme: EncodingScheme, m_max: f64, rng: &mut impl Rng) -> f64 {
    match scheme {
        EncodingScheme::SupportedRange => m_max,
        _ => {
            if m_max <= 0.0 {
                0.0
            } else {
                rng.random_range(0.0..=m_max)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn one_hot_examples() {
        let v = encode_payload(EncodingScheme::OneHot, 2.4, Phase::Train).unwrap();
        assert_eq!(v.iter().sum::<f64>(), 1.0);
        assert_eq!(v[3], 1.0);
        let v0 = encode_payload(EncodingScheme::OneHot, 0.0, Phase::Train).unwrap();
        assert_eq!(v0[0], 1.0);
        assert_eq!(v0.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn less_than_examples() {
        let v = encode_payload(EncodingScheme::LessThan, 2.4, Phase::Train).unwrap();
        for j in 0..=3 {
            assert_eq!(v[j], 1.0);
        }
        for j in 4..19 {
            assert_eq!(v[j], 0.0);
        }
        let full = encode_payload(EncodingScheme::LessThan, 18.0, Phase::Train).unwrap();
        assert!(full.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn supported_range_dual_interpretation() {
        let train = encode_payload(EncodingScheme::SupportedRange, 5.5, Phase::Train).unwrap();
        let less = encode_payload(EncodingScheme::LessThan, 5.5, Phase::Train).unwrap();
        assert_eq!(train, less);
        let inf_oh =
            encode_payload(EncodingScheme::SupportedRange, 5.5, Phase::Infer(InferenceInterpretation::AsOneHot))
                .unwrap();
        assert_eq!(inf_oh, encode_payload(EncodingScheme::OneHot, 5.5, Phase::Train).unwrap());
        let inf_lt =
            encode_payload(EncodingScheme::SupportedRange, 5.5, Phase::Infer(InferenceInterpretation::AsLessThan))
                .unwrap();
        assert_eq!(inf_lt, less);
    }

    #[test]
    fn quantization_is_conservative_and_monotone() {
        let mut p = 0.0;
        while p <= 18.0 {
            assert!(p.ceil() >= p);
            let a = encode_payload(EncodingScheme::LessThan, p, Phase::Train).unwrap();
            let b = encode_payload(EncodingScheme::LessThan, (p + 0.37).min(18.0), Phase::Train).unwrap();
            for j in 0..PAYLOAD_BINS {
                assert!(a[j] <= b[j], "less-than not monotone at p={p} j={j}");
            }
            p += 0.01;
        }
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(encode_payload(EncodingScheme::OneHot, -0.1, Phase::Train).is_err());
        assert!(encode_payload(EncodingScheme::OneHot, 18.1, Phase::Train).is_err());
        assert!(encode_payload(EncodingScheme::Numeric, f64::NAN, Phase::Train).is_err());
    }

    #[test]
    fn numeric_normalization() {
        assert_eq!(encode_payload(EncodingScheme::Numeric, 0.0, Phase::Train).unwrap(), vec![-1.0]);
        assert_eq!(encode_payload(EncodingScheme::Numeric, 18.0, Phase::Train).unwrap(), vec![1.0]);
        assert_eq!(encode_payload(EncodingScheme::Numeric, 9.0, Phase::Train).unwrap(), vec![0.0]);
    }

    #[test]
    fn training_payload_distribution() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        assert_eq!(sample_training_payload(EncodingScheme::OneHot, 0.0, &mut rng), 0.0);
        // Law of large numbers: mean of U(0, 10) over 1e5 draws is 5 +/- 0.05.
        let n = 100_000;
        let sum: f64 = (0..n)
            .map(|_| sample_training_payload(EncodingScheme::OneHot, 10.0, &mut rng))
            .sum();
        let mean = sum / n as f64;
        assert!((mean - 5.0).abs() < 0.05, "mean {mean}");
        // Supported-range ignores the rng entirely.
        let before = rng.clone();
        let v = sample_training_payload(EncodingScheme::SupportedRange, 7.3, &mut rng);
        assert_eq!(v, 7.3);
        assert_eq!(rng, before);
    }

    #[test]
    fn normalized_binary_is_plus_minus_one() {
        let v = encode_payload_normalized(EncodingScheme::LessThan, 2.0, Phase::Train).unwrap();
        assert!(v.iter().all(|&x| x == 1.0 || x == -1.0));
        assert_eq!(v[0], 1.0);
        assert_eq!(v[18], -1.0);
    }
}
