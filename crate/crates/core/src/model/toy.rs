//! Per-bin linear scorer trained with denoising score matching.
//!
//! `score(S)_k = g_k S_k + b_k`. The scorer is tied to a single noise level,
//! the one it was trained at, so it ignores the `sigma` argument. Applied to
//! a spectrogram it scores the first `n_bins` bins and returns zero above.

use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::{NoiseSchedule, ScoreModel};
use crate::fft::FftPlan;
use crate::rng::gaussian_vec;
use crate::signal::Spectrogram;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyScorer {
    gain: Vec<Complex64>,
    bias: Option<Vec<Complex64>>,
    grad_gain: Vec<Complex64>,
    grad_bias: Vec<Complex64>,
}

impl ToyScorer {
    /// Zero-initialized scorer over `n_bins` bins.
    pub fn new(n_bins: usize, with_bias: bool) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        ToyScorer {
            gain: alloc::vec![zero; n_bins],
            bias: with_bias.then(|| alloc::vec![zero; n_bins]),
            grad_gain: alloc::vec![zero; n_bins],
            grad_bias: alloc::vec![zero; if with_bias { n_bins } else { 0 }],
        }
    }

    pub fn from_params(gain: Vec<Complex64>, bias: Option<Vec<Complex64>>) -> Result<Self> {
        if let Some(b) = &bias {
            if b.len() != gain.len() {
                return Err(Error::shape("bias and gain lengths differ"));
            }
        }
        let mut s = ToyScorer::new(gain.len(), bias.is_some());
        s.gain = gain;
        s.bias = bias;
        s.check_finite()?;
        Ok(s)
    }

    pub fn n_bins(&self) -> usize {
        self.gain.len()
    }

    pub fn gain(&self) -> &[Complex64] {
        &self.gain
    }

    pub fn bias(&self) -> Option<&[Complex64]> {
        self.bias.as_deref()
    }

    /// Gradient of the last [`Self::loss_and_grad`] call w.r.t. the gains,
    /// stored as `dJ/dRe g + i dJ/dIm g` (twice the conjugate Wirtinger
    /// derivative).
    pub fn grad_gain(&self) -> &[Complex64] {
        &self.grad_gain
    }

    pub fn grad_bias(&self) -> &[Complex64] {
        &self.grad_bias
    }

    fn check_finite(&self) -> Result<()> {
        let params = self.gain.iter().chain(self.bias.iter().flatten());
        if let Some(i) = params.clone().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite { what: "toy scorer parameters", index: i });
        }
        Ok(())
    }

    /// Score of one row of bins.
    pub fn apply(&self, state: &[Complex64]) -> Result<Vec<Complex64>> {
        if state.len() != self.n_bins() {
            return Err(Error::shape(alloc::format!(
                "toy scorer has {} bins, state has {}",
                self.n_bins(),
                state.len()
            )));
        }
        Ok(state
            .iter()
            .enumerate()
            .map(|(k, s)| self.gain[k] * s + self.bias.as_ref().map_or(Complex64::new(0.0, 0.0), |b| b[k]))
            .collect())
    }

    /// Batch-mean of `sum_k |score(S + sigma Z)_k + Z_k / sigma|^2` over the
    /// rows of `clean` and `noise`, filling the gradient buffers.
    pub fn loss_and_grad(&mut self, clean: &[Vec<Complex64>], noise: &[Vec<Complex64>], sigma: f64) -> Result<f64> {
        if clean.len() != noise.len() || clean.is_empty() {
            return Err(Error::shape("clean and noise batches must be non-empty and of equal size"));
        }
        let zero = Complex64::new(0.0, 0.0);
        self.grad_gain.iter_mut().for_each(|g| *g = zero);
        self.grad_bias.iter_mut().for_each(|g| *g = zero);
        let inv_b = 1.0 / clean.len() as f64;
        let mut loss = 0.0;
        for (s, z) in clean.iter().zip(noise) {
            if s.len() != self.n_bins() || z.len() != self.n_bins() {
                return Err(Error::shape("batch row length differs from scorer bins"));
            }
            let st: Vec<Complex64> = s.iter().zip(z).map(|(s, z)| s + z * sigma).collect();
            let score = self.apply(&st)?;
            for k in 0..self.n_bins() {
                let r = score[k] + z[k] / sigma;
                loss += r.norm_sqr() * inv_b;
                self.grad_gain[k] += r * st[k].conj() * (2.0 * inv_b);
                if self.bias.is_some() {
                    self.grad_bias[k] += r * (2.0 * inv_b);
                }
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite { what: "toy loss", index: 0 });
        }
        Ok(loss)
    }

    /// `theta -= lr * grad`.
    pub fn step(&mut self, lr: f64) {
        for (g, d) in self.gain.iter_mut().zip(&self.grad_gain) {
            *g -= d * lr;
        }
        if let Some(b) = &mut self.bias {
            for (v, d) in b.iter_mut().zip(&self.grad_bias) {
                *v -= d * lr;
            }
        }
    }
}

impl<C: ?Sized> ScoreModel<C> for ToyScorer {
    fn score(&self, state: &Spectrogram, _sigma: f64, _cond: &C) -> Result<Spectrogram> {
        let n = self.n_bins();
        if state.n_bins() < n {
            return Err(Error::shape(alloc::format!("toy scorer has {n} bins, state has {}", state.n_bins())));
        }
        let mut out = state.zeros_like();
        for l in 0..state.n_frames() {
            let row = self.apply(&state.frame(l)[..n])?;
            out.frame_mut(l)[..n].copy_from_slice(&row);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyTrainConfig {
    pub prior_sigma_s: f64,
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        ToyTrainConfig { prior_sigma_s: 0.1, steps: 20_000, lr: 0.1, batch: 8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTrainReport {
    pub scorer: ToyScorer,
    /// Training loss at every step, before the update.
    pub loss_trace: Vec<f64>,
    pub sigma: f64,
}

/// Rows of `n_bins` bins from the orthonormal DFT of real white noise of
/// length `2 n_bins`, so every bin has `E|X_k|^2 = std^2`.
pub fn dft_noise_rows<R: Rng + ?Sized>(rng: &mut R, rows: usize, n_bins: usize, std: f64) -> Result<Vec<Vec<Complex64>>> {
    let plan = FftPlan::new(2 * n_bins)?;
    let scale = 1.0 / ((2 * n_bins) as f64).sqrt();
    Ok((0..rows)
        .map(|_| {
            let x = gaussian_vec(rng, 2 * n_bins, std);
            plan.forward_real(&x)[..n_bins].iter().map(|c| c * scale).collect()
        })
        .collect())
}

/// SGD at the matched time `t = T` on data from a white Gaussian prior of
/// standard deviation `prior_sigma_s`.
pub fn toy_train<R: Rng + ?Sized>(
    mut scorer: ToyScorer,
    cfg: &ToyTrainConfig,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<ToyTrainReport> {
    if cfg.steps == 0 || cfg.batch == 0 {
        return Err(Error::config("toy training needs at least one step and one row per batch"));
    }
    if !(cfg.prior_sigma_s > 0.0) || !(cfg.lr >= 0.0) || !cfg.lr.is_finite() {
        return Err(Error::config("prior sigma must be positive and the learning rate non-negative"));
    }
    let sigma = sched.sigma_at(sched.t_max)?;
    let n = scorer.n_bins();
    let mut loss_trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let clean = dft_noise_rows(rng, cfg.batch, n, cfg.prior_sigma_s)?;
        let noise = dft_noise_rows(rng, cfg.batch, n, 1.0)?;
        let loss = scorer
            .loss_and_grad(&clean, &noise, sigma)
            .map_err(|_| Error::Divergence { what: "toy training", unit: "step", index: step })?;
        loss_trace.push(loss);
        scorer.step(cfg.lr);
        if scorer.check_finite().is_err() {
            return Err(Error::Divergence { what: "toy training", unit: "step", index: step });
        }
    }
    Ok(ToyTrainReport { scorer, loss_trace, sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn random_c<R: Rng>(rng: &mut R, n: usize, s: f64) -> Vec<Complex64> {
        (0..n).map(|_| Complex64::new(rng.random_range(-s..s), rng.random_range(-s..s))).collect()
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = stream(3);
        let n = 8;
        let clean = dft_noise_rows(&mut rng, 4, n, 0.1).unwrap();
        let noise = dft_noise_rows(&mut rng, 4, n, 1.0).unwrap();
        let sigma = 0.2;
        for trial in 0..5 {
            let mut s = ToyScorer::from_params(random_c(&mut rng, n, 30.0), Some(random_c(&mut rng, n, 3.0))).unwrap();
            s.loss_and_grad(&clean, &noise, sigma).unwrap();
            let (gg, gb) = (s.grad_gain().to_vec(), s.grad_bias().to_vec());
            let h = 1e-5;
            for k in 0..n {
                for (dir, bias) in [(Complex64::new(1.0, 0.0), false), (Complex64::new(0.0, 1.0), false), (Complex64::new(1.0, 0.0), true), (Complex64::new(0.0, 1.0), true)] {
                    let eval = |d: f64| {
                        let mut p = s.clone();
                        if bias {
                            p.bias.as_mut().unwrap()[k] += dir * d;
                        } else {
                            p.gain[k] += dir * d;
                        }
                        p.loss_and_grad(&clean, &noise, sigma).unwrap()
                    };
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    let g = if bias { gb[k] } else { gg[k] };
                    let an = if dir.re == 1.0 { g.re } else { g.im };
                    let rel = (fd - an).abs() / an.abs().max(1e-3);
                    assert!(rel < 1e-5, "trial {trial} bin {k} bias {bias}: fd {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let init = ToyScorer::from_params(alloc::vec![Complex64::new(-3.0, 1.0); 8], Some(alloc::vec![Complex64::new(0.5, 0.0); 8])).unwrap();
        let cfg = ToyTrainConfig { steps: 50, lr: 0.0, ..Default::default() };
        let r = toy_train(init.clone(), &cfg, &NoiseSchedule::default(), &mut stream(1)).unwrap();
        assert_eq!(r.scorer.gain(), init.gain());
        assert_eq!(r.scorer.bias(), init.bias());
        assert_eq!(r.loss_trace.len(), 50);
    }

    #[test]
    fn short_training_moves_toward_optimum() {
        let sched = NoiseSchedule::default();
        let cfg = ToyTrainConfig { steps: 2000, ..Default::default() };
        let r = toy_train(ToyScorer::new(16, true), &cfg, &sched, &mut stream(2)).unwrap();
        let target = -1.0 / (0.01 + r.sigma * r.sigma);
        for g in r.scorer.gain() {
            assert!((g.re - target).abs() < 0.15 * target.abs(), "{g} vs {target}");
        }
    }

    #[test]
    fn invalid_settings_and_divergence() {
        let sched = NoiseSchedule::default();
        let zero = ToyTrainConfig { steps: 0, ..Default::default() };
        assert!(toy_train(ToyScorer::new(4, false), &zero, &sched, &mut stream(1)).is_err());
        let wild = ToyTrainConfig { steps: 5000, lr: 1e6, ..Default::default() };
        let err = toy_train(ToyScorer::new(4, false), &wild, &sched, &mut stream(1)).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err:?}");
    }

    #[test]
    fn dft_rows_have_prior_variance() {
        let rows = dft_noise_rows(&mut stream(5), 4000, 64, 0.1).unwrap();
        for k in [0, 1, 31, 63] {
            let v: f64 = rows.iter().map(|r| r[k].norm_sqr()).sum::<f64>() / 4000.0;
            assert!((v - 0.01).abs() < 0.0015, "bin {k}: {v}");
        }
    }
}
