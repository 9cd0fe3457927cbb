//! Variance-exploding score-based diffusion in the STFT domain.
//!
//! The forward process adds Gaussian noise with standard deviation
//! `sigma(t) = sigma_min * (sigma_max / sigma_min)^t` and zero drift. The
//! reverse process is solved with noise-consistent annealed Langevin steps,
//! or collapsed into a single denoising step when the score model was
//! trained at the matched condition `t = T`.
//!
//! Noise is always drawn in the time domain and transformed with the same
//! STFT as the data, so `Z` carries the frame overlap structure of a real
//! signal.

mod precondition;
mod sampler;
mod schedule;
mod score;

pub use precondition::{
    edm_scalings, estimate_sigma_data, EdmScalings, Preconditioned, RawDenoiser,
};
pub use sampler::{
    final_estimate, langevin_step, perturb, reverse_sample, single_step_enhance,
    SamplerCoefficients, SamplerConfig, SamplerInit,
};
pub use schedule::NoiseSchedule;
pub use score::{
    analytic_gaussian_score, forward_perturb, noise_like, score_matching_loss,
    score_matching_loss_with_noise, GaussianPriorScore, ScoreModel,
};
