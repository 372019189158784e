//! Noise schedules, forward diffusion, v-prediction algebra, guidance, DDIM
//! sampling and the RoPE/RMSNorm building blocks.

mod algebra;
mod blocks;
mod latent;
mod sampler;
mod schedule;

pub use algebra::{cfg_combine, from_eps, from_v, q_sample, split_prediction, v_target, Prediction};
pub use blocks::{rmsnorm, rope_2d, ROPE_BASE};
pub use latent::{LatentTensor, DEFAULT_LATENT_SHAPE};
pub use sampler::{
    sample, sample_with_trace, timesteps, v_loss, Denoiser, GaussianDenoiser, PointMassDenoiser, SamplerConfig,
    StepRecord, DEFAULT_CFG_SCALE, DEFAULT_STEPS,
};
pub use schedule::{make_schedule, NoiseSchedule, ScheduleKind};
