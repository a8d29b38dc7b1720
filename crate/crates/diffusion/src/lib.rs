//! Payload-conditioned denoising diffusion over joint-space trajectories:
//! payload encodings, cosine noise schedule, a FiLM-conditioned 1D temporal
//! U-Net, the training loop, and DDPM/DDIM samplers with endpoint
//! inpainting, collision-gradient guidance, and limit clamping.

pub mod checkpoint;
pub mod config;
pub mod denoiser;
pub mod encoding;
pub mod sampler;
pub mod schedule;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{Conditioning, DenoiserConfig, TrainSettings};
pub use denoiser::Denoiser;
pub use encoding::{
    encode_payload, encode_payload_normalized, sample_training_payload, EncodingScheme,
    InferenceInterpretation, Phase, PAYLOAD_BINS,
};
pub use sampler::{ddim_sample, ddpm_sample, GuidanceContext, SampleConfig, SamplerKind};
pub use schedule::NoiseSchedule;
pub use train::{train, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum DiffusionError {
    #[error("payload {0} outside the supported range [0, 18]")]
    PayloadOutOfRange(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training aborted: {0}")]
    Training(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Nn(#[from] paydiff_nn::NnError),
}
