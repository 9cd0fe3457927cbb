//! Frequency-domain adaptive Kalman filter with overlap-save and a diagonal
//! state covariance.
//!
//! State model per bin: `W(k+1) = A W(k) + dW`, process noise power
//! `(1 - A^2) |W|^2`. The observation noise power is tracked by recursive
//! smoothing of the prior (or, optionally, a posteriori) error spectrum.
//! The gain is `P / (P |X|^2 + (M/R) Psi_S)` with the covariance update
//! `P+ = (1 - (R/M) mu |X|^2) P`.

use alloc::vec::Vec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_pair, CancelOutput};
use crate::fft::FftPlan;
use crate::signal::Waveform;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdkfConfig {
    /// New samples per block (hop).
    pub block_len: usize,
    /// Transform size; the filter spans `fft_len - block_len` taps.
    pub fft_len: usize,
    /// State transition factor `A`.
    pub transition: f64,
    /// Smoothing factor of the observation noise estimate.
    pub noise_smoothing: f64,
    /// Initial state covariance per bin.
    pub initial_covariance: f64,
    /// Floor added to the gain denominator.
    pub regularization: f64,
    /// Also scale the state mean by `A` at prediction. Off by default: the
    /// shrink caps steady-state ERLE near `-20 log10(1 - A)` for a fixed path.
    #[serde(default)]
    pub shrink_mean: bool,
    /// Estimate the observation noise from the a posteriori error (after the
    /// update) instead of the prior error.
    #[serde(default)]
    pub posterior_noise: bool,
}

impl Default for FdkfConfig {
    fn default() -> Self {
        FdkfConfig {
            block_len: 512,
            fft_len: 1024,
            transition: 0.999,
            noise_smoothing: 0.5,
            initial_covariance: 1.0,
            regularization: 1e-12,
            shrink_mean: false,
            posterior_noise: false,
        }
    }
}

impl FdkfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_len == 0 || self.block_len >= self.fft_len || !self.fft_len.is_power_of_two() {
            return Err(Error::config(
                "FDKF needs a power-of-two fft_len strictly larger than block_len > 0",
            ));
        }
        if !(self.transition > 0.0 && self.transition <= 1.0) {
            return Err(Error::config("FDKF transition factor must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.noise_smoothing) {
            return Err(Error::config("FDKF noise smoothing must lie in [0, 1)"));
        }
        if !(self.initial_covariance > 0.0) || !(self.regularization >= 0.0) {
            return Err(Error::config("FDKF covariance and regularization must be positive"));
        }
        Ok(())
    }

    pub fn taps(&self) -> usize {
        self.fft_len - self.block_len
    }
}

#[derive(Debug, Clone)]
pub struct Fdkf {
    cfg: FdkfConfig,
    plan: FftPlan,
    weights: Vec<Complex64>,
    covariance: Vec<f64>,
    noise_psd: Vec<f64>,
    ref_window: Vec<f64>,
    blocks: usize,
}

impl Fdkf {
    pub fn new(cfg: FdkfConfig) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.fft_len;
        Ok(Fdkf {
            cfg,
            plan: FftPlan::new(m)?,
            weights: alloc::vec![Complex64::new(0.0, 0.0); m],
            covariance: alloc::vec![cfg.initial_covariance; m],
            noise_psd: alloc::vec![0.0; m],
            ref_window: alloc::vec![0.0; m],
            blocks: 0,
        })
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    /// Process one block of `block_len` reference and mic samples; returns
    /// the echo estimate for the block.
    pub fn process_block(&mut self, reference: &[f64], mic: &[f64]) -> Result<Vec<f64>> {
        let (b, m) = (self.cfg.block_len, self.cfg.fft_len);
        if reference.len() != b || mic.len() != b {
            return Err(Error::shape(alloc::format!("FDKF blocks must hold {b} samples")));
        }
        self.ref_window.copy_within(b.., 0);
        self.ref_window[m - b..].copy_from_slice(reference);
        let x = self.plan.forward_real(&self.ref_window);

        let prod: Vec<Complex64> = x.iter().zip(&self.weights).map(|(a, w)| a * w).collect();
        let y_full = self.plan.inverse_real(prod);
        let estimate = y_full[m - b..].to_vec();

        let mut padded = alloc::vec![0.0; m];
        for (i, (y, e)) in mic.iter().zip(&estimate).enumerate() {
            padded[m - b + i] = y - e;
        }
        let err = self.plan.forward_real(&padded);

        let ratio = m as f64 / b as f64;
        let mut update = alloc::vec![Complex64::new(0.0, 0.0); m];
        let mut gain_x2 = alloc::vec![0.0; m];
        for k in 0..m {
            let x2 = x[k].norm_sqr();
            let mu = self.covariance[k]
                / (self.covariance[k] * x2 + ratio * self.noise_psd[k] + self.cfg.regularization);
            gain_x2[k] = mu * x2;
            update[k] = x[k].conj() * err[k] * mu;
        }
        // Gradient constraint: keep only the causal `taps` part.
        let mut g = self.plan.inverse_real(update);
        g[self.cfg.taps()..].iter_mut().for_each(|v| *v = 0.0);
        let update = self.plan.forward_real(&g);
        let w_post: Vec<Complex64> = self.weights.iter().zip(&update).map(|(w, u)| w + u).collect();

        let lam = self.cfg.noise_smoothing;
        let source = if self.cfg.posterior_noise {
            // Error after the update, which excludes most of the misalignment
            // still present in the prior error.
            let prod: Vec<Complex64> = x.iter().zip(&w_post).map(|(a, w)| a * w).collect();
            let y_post = self.plan.inverse_real(prod);
            padded.fill(0.0);
            for (i, y) in mic.iter().enumerate() {
                padded[m - b + i] = y - y_post[m - b + i];
            }
            self.plan.forward_real(&padded)
        } else {
            err
        };
        for (psd, e) in self.noise_psd.iter_mut().zip(source.iter()).take(m) {
            *psd = lam * *psd + (1.0 - lam) * e.norm_sqr();
        }

        let a = self.cfg.transition;
        for k in 0..m {
            let p_post = (1.0 - gain_x2[k] / ratio).max(0.0) * self.covariance[k];
            self.weights[k] = if self.cfg.shrink_mean { w_post[k] * a } else { w_post[k] };
            self.covariance[k] = a * a * p_post + (1.0 - a * a) * w_post[k].norm_sqr();
            if !self.weights[k].is_finite() || !self.covariance[k].is_finite() {
                return Err(Error::Divergence { what: "FDKF", unit: "block", index: self.blocks });
            }
        }
        self.blocks += 1;
        Ok(estimate)
    }
}

/// Run the FDKF over a whole signal pair. The tail block is zero padded.
pub fn fdkf_cancel(mic: &Waveform, reference: &Waveform, cfg: &FdkfConfig) -> Result<CancelOutput> {
    check_pair(mic, reference)?;
    let mut filter = Fdkf::new(*cfg)?;
    let b = cfg.block_len;
    let n = mic.len();
    let mut est = Vec::with_capacity(n + b);
    let mut xr = alloc::vec![0.0; b];
    let mut ym = alloc::vec![0.0; b];
    for start in (0..n).step_by(b) {
        let end = (start + b).min(n);
        xr.fill(0.0);
        ym.fill(0.0);
        xr[..end - start].copy_from_slice(&reference.samples()[start..end]);
        ym[..end - start].copy_from_slice(&mic.samples()[start..end]);
        est.extend(filter.process_block(&xr, &ym)?);
    }
    est.truncate(n);
    let residual = mic.samples().iter().zip(&est).map(|(y, e)| y - e).collect();
    let fs = mic.sample_rate_hz();
    Ok(CancelOutput { echo_estimate: Waveform::from_trusted(est, fs), residual: Waveform::from_trusted(residual, fs) })
}
