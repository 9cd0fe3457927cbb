//! Allocation-only core of a hands-free speech enhancement toolkit built
//! around a hybrid score-based diffusion model.
//!
//! The crate is `no_std` and needs only `alloc`. Everything touching the
//! filesystem, WAV files, or the command line lives in the `echodiff-tools`
//! companion crate (library name `echodiff`).
//!
//! Modules:
//! - [`signal`]: waveforms, the square-root-Hann STFT, resampling, convolution.
//! - [`scene`]: room impulse responses, loudspeaker nonlinearity, scene mixing.
//! - [`classical`]: NLMS and FDKF echo cancellers, GCC-PHAT, ERLE.
//! - [`diffusion`]: the VE noise schedule, Langevin sampler and preconditioning.
//! - [`model`]: U-Net forward engine, weight container and a trainable toy scorer.
//! - [`loss`]: compressed complex MSE and the combined training objective.
//! - [`train`]: desk-scale end-to-end toy training loop.
//! - [`metrics`]: ESTOI, per-scene evaluation and method ranking.
#![no_std]
#![cfg_attr(test, allow(unused_imports))]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classical;
pub mod diffusion;
mod error;
pub mod fft;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scene;
pub mod signal;
pub mod train;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use signal::{Spectrogram, StftConfig, Waveform};
