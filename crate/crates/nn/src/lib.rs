//! Minimal dense-tensor substrate with reverse-mode gradients, sized for a
//! 1D temporal U-Net: conv1d, group normalization, SiLU, linear layers,
//! FiLM modulation, Adam, checkpoint IO, and a finite-difference gradient
//! checker. CPU only, f32 for training with an f64 switch for verification.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use layers::{Conv1dLayer, FilmHead, GroupNormLayer, LinearLayer, ParamId, ParamStore};
pub use scalar::Scalar;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: {details}")]
    Shape { op: &'static str, details: String },
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint dtype {found} does not match requested {expected}")]
    DtypeMismatch { found: String, expected: String },
}
