//! Conditioner and score network wired together.
//!
//! The conditioner sees `(Re Y, Im Y, Re X, Im X)` and emits a near-end
//! estimate plus its penultimate feature map `C`. The score network sees
//! `(c_in Re S_t, c_in Im S_t, C, c_noise)` where the last channel is a
//! constant plane holding the noise embedding.

use alloc::vec::Vec;
use num_complex::Complex64;
use rand::Rng;

use super::tensor::Tensor3;
use super::unet::{ModelSpec, UNet};
use super::weights::WeightContainer;
use crate::diffusion::{
    reverse_sample, single_step_enhance, NoiseSchedule, Preconditioned, RawDenoiser, SamplerConfig, SamplerInit,
};
use crate::signal::Spectrogram;
use crate::{Error, Result};

/// Stack spectrograms as `(Re, Im)` channel pairs.
pub fn spectrogram_to_channels(specs: &[&Spectrogram]) -> Result<Tensor3> {
    let first = specs.first().ok_or_else(|| Error::input("no spectrograms to stack"))?;
    let (frames, freqs) = (first.n_frames(), first.n_bins());
    let mut t = Tensor3::zeros(2 * specs.len(), frames, freqs);
    for (k, s) in specs.iter().enumerate() {
        first.check_shape(s)?;
        for l in 0..frames {
            for (f, c) in s.frame(l).iter().enumerate() {
                let i = t.idx(2 * k, l, f);
                t.data_mut()[i] = c.re as f32;
                let i = t.idx(2 * k + 1, l, f);
                t.data_mut()[i] = c.im as f32;
            }
        }
    }
    Ok(t)
}

/// Read channels `re_channel` and `re_channel + 1` back as a spectrogram
/// shaped like `template`. Padded bins are left at zero.
pub fn channels_to_spectrogram(t: &Tensor3, re_channel: usize, template: &Spectrogram) -> Result<Spectrogram> {
    if t.channels() < re_channel + 2 || t.frames() != template.n_frames() || t.freqs() != template.n_bins() {
        return Err(Error::shape(alloc::format!(
            "tensor {:?} does not match a {}x{} spectrogram",
            t.shape(),
            template.n_frames(),
            template.n_bins()
        )));
    }
    let active = template.config().active_bins();
    let mut out = template.zeros_like();
    for l in 0..t.frames() {
        for (f, c) in out.frame_mut(l)[..active].iter_mut().enumerate() {
            *c = Complex64::new(t.get(re_channel, l, f) as f64, t.get(re_channel + 1, l, f) as f64);
        }
    }
    Ok(out)
}

/// Raw score network over borrowed weights.
#[derive(Debug, Clone, Copy)]
pub struct ScoreNet<'a> {
    unet: &'a UNet,
    weights: &'a WeightContainer,
}

impl RawDenoiser<Tensor3> for ScoreNet<'_> {
    fn forward(&self, scaled_input: &Spectrogram, c_noise: f64, cond: &Tensor3) -> Result<Spectrogram> {
        let state = spectrogram_to_channels(&[scaled_input])?;
        let (_, frames, freqs) = state.shape();
        if cond.frames() != frames || cond.freqs() != freqs {
            return Err(Error::shape(alloc::format!(
                "conditioning features {:?} do not match state ({frames}, {freqs})",
                cond.shape()
            )));
        }
        let mut plane = Tensor3::zeros(1, frames, freqs);
        plane.data_mut().fill(c_noise as f32);
        let input = Tensor3::concat(&[&state, cond, &plane])?;
        let out = self.unet.forward(self.weights, &input)?;
        channels_to_spectrogram(&out.output, 0, scaled_input)
    }
}

/// Output of the conditioner.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioning {
    pub estimate: Spectrogram,
    pub features: Tensor3,
}

/// Conditioner and score network loaded from one weight container.
#[derive(Debug, Clone)]
pub struct HybridModel {
    spec: ModelSpec,
    weights: WeightContainer,
    cond: UNet,
    score: UNet,
}

impl HybridModel {
    /// Bind weights; the container must carry its [`ModelSpec`].
    pub fn new(weights: WeightContainer) -> Result<Self> {
        let spec = weights
            .spec
            .clone()
            .ok_or_else(|| Error::config("weight container carries no model spec"))?;
        spec.validate()?;
        let cond = UNet::new(spec.cond.clone(), "cond", &weights)?;
        let score = UNet::new(spec.score.clone(), "score", &weights)?;
        Ok(HybridModel { spec, weights, cond, score })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn weights(&self) -> &WeightContainer {
        &self.weights
    }

    /// Discriminative estimate and conditioning features from the
    /// microphone (`y`) and far-end reference (`x`) spectrograms.
    pub fn condition(&self, y: &Spectrogram, x: &Spectrogram) -> Result<Conditioning> {
        let input = spectrogram_to_channels(&[y, x])?;
        let out = self.cond.forward(&self.weights, &input)?;
        let estimate = channels_to_spectrogram(&out.output, 0, y)?;
        Ok(Conditioning { estimate, features: out.penultimate })
    }

    /// The preconditioned score model, conditioned on a feature map.
    pub fn score_model(&self) -> Result<Preconditioned<ScoreNet<'_>>> {
        Preconditioned::new(ScoreNet { unet: &self.score, weights: &self.weights }, self.spec.sigma_data)
    }

    /// Conditioner estimate refined by the reverse process.
    ///
    /// One step runs the single-step estimate around the conditioner
    /// output; more steps run the Langevin sampler from the same start.
    pub fn enhance<R: Rng + ?Sized>(
        &self,
        y: &Spectrogram,
        x: &Spectrogram,
        sched: &NoiseSchedule,
        sampler: &SamplerConfig,
        rng: &mut R,
    ) -> Result<Spectrogram> {
        let c = self.condition(y, x)?;
        let model = self.score_model()?;
        if sampler.n_steps == 1 {
            single_step_enhance(&c.estimate, &model, &c.features, sched, rng)
        } else {
            reverse_sample(&model, &c.features, SamplerInit::Conditional(&c.estimate), sampler, sched, rng)
        }
    }

    pub fn tensor_names(&self) -> Vec<&str> {
        self.weights.names().map(|s| s.as_str()).collect()
    }
}
