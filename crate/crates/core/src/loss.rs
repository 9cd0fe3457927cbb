//! Compressed complex MSE, the combined training objective and the
//! learning-rate schedule.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::signal::Spectrogram;
use crate::{Error, Result};

/// Weights of the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Weight of the score-matching term.
    pub alpha: f64,
    /// Magnitude compression exponent.
    pub c: f64,
    /// Blend between the complex term (`lambda`) and the magnitude term.
    pub lambda: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { alpha: 0.005, c: 0.3, lambda: 0.3 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::config(alloc::format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(Error::config(alloc::format!("c must lie in (0, 1], got {}", self.c)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config(alloc::format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        Ok(())
    }
}

/// `|u|^c e^{j arg u}`, zero at the origin.
#[inline]
pub fn compress(u: Complex64, c: f64) -> Complex64 {
    let r = u.norm();
    if r == 0.0 {
        u
    } else {
        u * r.powf(c - 1.0)
    }
}

fn check_len(a: &[Complex64], b: &[Complex64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(alloc::format!("loss arguments have {} and {} entries", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::input("loss over zero entries"));
    }
    Ok(())
}

/// Compressed complex MSE over flat slices, per-element mean:
/// `lambda |C(S) - C(S_hat)|^2 + (1 - lambda) (|S|^c - |S_hat|^c)^2`.
pub fn cc_mse_slices(est: &[Complex64], target: &[Complex64], cfg: &LossConfig) -> Result<f64> {
    check_len(est, target)?;
    let (c, lam) = (cfg.c, cfg.lambda);
    let sum: f64 = est
        .iter()
        .zip(target)
        .map(|(u, s)| {
            let cplx = (compress(*s, c) - compress(*u, c)).norm_sqr();
            let mag = s.norm().powf(c) - u.norm().powf(c);
            lam * cplx + (1.0 - lam) * mag * mag
        })
        .sum();
    Ok(sum / est.len() as f64)
}

/// Gradient of [`cc_mse_slices`] w.r.t. `est`, as `dJ/dRe + i dJ/dIm` per
/// entry. Entries at exactly zero get a zero gradient.
pub fn cc_mse_grad_slices(est: &[Complex64], target: &[Complex64], cfg: &LossConfig) -> Result<Vec<Complex64>> {
    check_len(est, target)?;
    let (c, lam) = (cfg.c, cfg.lambda);
    let inv_n = 1.0 / est.len() as f64;
    Ok(est
        .iter()
        .zip(target)
        .map(|(u, s)| {
            let r = u.norm();
            if r < 1e-300 {
                return Complex64::new(0.0, 0.0);
            }
            let d = compress(*s, c) - compress(*u, c);
            let mag = 2.0 * c * (r.powf(c) - s.norm().powf(c)) * r.powf(c - 2.0) * u;
            let cplx = -(d * ((c + 1.0) / 2.0) * r.powf(c - 1.0)
                + d.conj() * ((c - 1.0) / 2.0) * r.powf(c - 3.0) * u * u)
                * 2.0;
            (cplx * lam + mag * (1.0 - lam)) * inv_n
        })
        .collect())
}

fn active_entries(s: &Spectrogram) -> Vec<Complex64> {
    let active = s.config().active_bins();
    (0..s.n_frames()).flat_map(|l| s.frame(l)[..active].iter().copied()).collect()
}

/// [`cc_mse_slices`] over the active (unpadded) bins of two spectrograms.
pub fn cc_mse(est: &Spectrogram, target: &Spectrogram, cfg: &LossConfig) -> Result<f64> {
    if !est.same_shape(target) {
        return Err(Error::shape(alloc::format!(
            "spectrograms {}x{} and {}x{}",
            est.n_frames(),
            est.n_bins(),
            target.n_frames(),
            target.n_bins()
        )));
    }
    cc_mse_slices(&active_entries(est), &active_entries(target), cfg)
}

/// `J^CC(S_cond, S) + J^CC(S_hat, S) + alpha J^SM`.
pub fn total_loss(
    cond_est: &Spectrogram,
    est: &Spectrogram,
    target: &Spectrogram,
    sm_loss: f64,
    cfg: &LossConfig,
) -> Result<f64> {
    Ok(cc_mse(cond_est, target, cfg)? + cc_mse(est, target, cfg)? + cfg.alpha * sm_loss)
}

/// Linear warmup, constant hold, then cosine decay to `final_lr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub peak_lr: f64,
    pub final_lr: f64,
    pub warmup_steps: usize,
    pub hold_until: usize,
    pub total_steps: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule { peak_lr: 8e-4, final_lr: 1.6e-6, warmup_steps: 7_500, hold_until: 250_000, total_steps: 500_000 }
    }
}

impl LrSchedule {
    /// The default shape stretched to `total_steps` with the same phase
    /// fractions and learning rates.
    pub fn scaled_to(&self, total_steps: usize, peak_lr: f64) -> Self {
        let frac = |s: usize| ((s as f64 / self.total_steps as f64) * total_steps as f64).round() as usize;
        LrSchedule {
            peak_lr,
            final_lr: peak_lr * self.final_lr / self.peak_lr,
            warmup_steps: frac(self.warmup_steps),
            hold_until: frac(self.hold_until),
            total_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_lr > 0.0) || !(self.final_lr >= 0.0) || self.final_lr > self.peak_lr {
            return Err(Error::config("need 0 <= final_lr <= peak_lr and peak_lr > 0"));
        }
        if self.warmup_steps > self.hold_until || self.hold_until > self.total_steps {
            return Err(Error::config("need warmup_steps <= hold_until <= total_steps"));
        }
        Ok(())
    }

    /// Learning rate for the update at `step` (0-based).
    pub fn lr_at(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            return self.peak_lr * (step + 1) as f64 / self.warmup_steps as f64;
        }
        if step < self.hold_until {
            return self.peak_lr;
        }
        let span = self.total_steps.saturating_sub(self.hold_until).max(1) as f64;
        let p = ((step - self.hold_until) as f64 / span).min(1.0);
        self.final_lr + 0.5 * (self.peak_lr - self.final_lr) * (1.0 + (PI * p).cos())
    }
}
