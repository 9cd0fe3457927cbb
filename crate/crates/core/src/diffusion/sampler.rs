use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::score::{checked_score, noise_like};
use super::{NoiseSchedule, ScoreModel};
use crate::signal::Spectrogram;
use crate::{Error, Result};

/// Reverse-process settings.
///
/// `epsilon` controls the noise-consistent Langevin step: `eta = 1 - gamma^eps`
/// and `beta = sqrt(1 - gamma^(2 (eps - 1)))`. A real `beta` requires
/// `eps >= 1`; `eps = 1` gives the deterministic sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_steps: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_steps: 1,
            epsilon: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerCoefficients {
    pub dt: f64,
    pub gamma: f64,
    pub eta: f64,
    pub beta: f64,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::config("sampler needs at least one step"));
        }
        if !(self.epsilon >= 1.0) || !self.epsilon.is_finite() {
            return Err(Error::config(alloc::format!(
                "epsilon must be >= 1 for a real-valued beta, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn coefficients(&self, sched: &NoiseSchedule) -> Result<SamplerCoefficients> {
        self.validate()?;
        sched.validate()?;
        let dt = sched.t_max / self.n_steps as f64;
        let gamma = sched.ratio().powf(-dt);
        let eta = 1.0 - gamma.powf(self.epsilon);
        let beta = (1.0 - gamma.powf(2.0 * (self.epsilon - 1.0)))
            .max(0.0)
            .sqrt();
        Ok(SamplerCoefficients {
            dt,
            gamma,
            eta,
            beta,
        })
    }

    /// Langevin start times `{T, T - dt, ..., dt}`.
    pub fn time_grid(&self, sched: &NoiseSchedule) -> Vec<f64> {
        let n = self.n_steps;
        (0..n)
            .map(|k| sched.t_max * (n - k) as f64 / n as f64)
            .collect()
    }

    fn grid_index(&self, t: f64, sched: &NoiseSchedule) -> Result<usize> {
        let n = self.n_steps as f64;
        let pos = n - t * n / sched.t_max;
        let k = pos.round();
        if (pos - k).abs() > 1e-9 * n || k < 0.0 || k >= n {
            return Err(Error::input(alloc::format!(
                "t = {t} is not on the sampler grid {{T, ..., T/N}} with N = {}",
                self.n_steps
            )));
        }
        Ok(k as usize)
    }
}

/// `base + sigma * noise`.
pub fn perturb(base: &Spectrogram, sigma: f64, noise: &Spectrogram) -> Result<Spectrogram> {
    let mut out = base.clone();
    out.axpy(sigma, noise)?;
    Ok(out)
}

/// Tweedie-style denoised estimate `S + sigma^2 score(S | sigma, C)`.
pub fn final_estimate<C: ?Sized, M: ScoreModel<C> + ?Sized>(
    model: &M,
    state: &Spectrogram,
    sigma: f64,
    cond: &C,
) -> Result<Spectrogram> {
    let score = checked_score(model, state, sigma, cond)?;
    let mut out = state.clone();
    out.axpy(sigma * sigma, &score)?;
    Ok(out)
}

/// One noise-consistent Langevin step from grid time `t` to `t - dt`:
/// `S' = S + eta sigma_t^2 score(S | sigma_t, C) + beta sigma_{t-dt} Z`.
///
/// No noise is drawn when `beta == 0`.
#[allow(clippy::too_many_arguments)]
pub fn langevin_step<C: ?Sized, M: ScoreModel<C> + ?Sized, R: Rng + ?Sized>(
    state: &Spectrogram,
    t: f64,
    model: &M,
    cond: &C,
    cfg: &SamplerConfig,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<Spectrogram> {
    let coeffs = cfg.coefficients(sched)?;
    let k = cfg.grid_index(t, sched)?;
    step_at(state, k, model, cond, cfg, &coeffs, sched, rng)
}

#[allow(clippy::too_many_arguments)]
fn step_at<C: ?Sized, M: ScoreModel<C> + ?Sized, R: Rng + ?Sized>(
    state: &Spectrogram,
    k: usize,
    model: &M,
    cond: &C,
    cfg: &SamplerConfig,
    coeffs: &SamplerCoefficients,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<Spectrogram> {
    let n = cfg.n_steps;
    let t = sched.t_max * (n - k) as f64 / n as f64;
    let t_next = sched.t_max * (n - k - 1) as f64 / n as f64;
    let sigma = sched.sigma_at(t)?;
    let sigma_next = sched.sigma_at(t_next)?;
    let score = checked_score(model, state, sigma, cond)?;
    let mut out = state.clone();
    out.axpy(coeffs.eta * sigma * sigma, &score)?;
    if coeffs.beta != 0.0 {
        let z = noise_like(state, rng);
        out.axpy(coeffs.beta * sigma_next, &z)?;
    }
    if !out.is_finite() {
        return Err(Error::Divergence {
            what: "langevin sampler",
            unit: "step",
            index: k,
        });
    }
    Ok(out)
}

/// How the reverse process is initialized.
#[derive(Debug, Clone, Copy)]
pub enum SamplerInit<'a> {
    /// `S_T = sigma_T Z`, shaped like the given template.
    Prior(&'a Spectrogram),
    /// `S_T = S_cond + sigma_T Z` around a discriminative estimate.
    Conditional(&'a Spectrogram),
}

/// Runs the reverse process and returns the enhanced spectrogram.
///
/// With [`SamplerInit::Prior`] the sampler takes `N` Langevin steps over
/// `{T, ..., dt}` down to `t = 0` and finishes with
/// `S_0 + sigma_min^2 score(S_0 | sigma_min)`.
///
/// With [`SamplerInit::Conditional`] it takes `N - 1` steps and applies the
/// denoising step at the time it reached, so `N = 1` is exactly the
/// single-step estimate of [`single_step_enhance`].
pub fn reverse_sample<C: ?Sized, M: ScoreModel<C> + ?Sized, R: Rng + ?Sized>(
    model: &M,
    cond: &C,
    init: SamplerInit<'_>,
    cfg: &SamplerConfig,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<Spectrogram> {
    let coeffs = cfg.coefficients(sched)?;
    let sigma_t = sched.sigma_at(sched.t_max)?;
    let (mut state, steps) = match init {
        SamplerInit::Prior(like) => {
            let z = noise_like(like, rng);
            (z.scaled(sigma_t), cfg.n_steps)
        }
        SamplerInit::Conditional(estimate) => {
            let z = noise_like(estimate, rng);
            (perturb(estimate, sigma_t, &z)?, cfg.n_steps - 1)
        }
    };
    for k in 0..steps {
        state = step_at(&state, k, model, cond, cfg, &coeffs, sched, rng)?;
    }
    let n = cfg.n_steps;
    let t_end = sched.t_max * (n - steps) as f64 / n as f64;
    final_estimate(model, &state, sched.sigma_at(t_end)?, cond)
}

/// Single-step inference: `S_T = S_cond + sigma_T Z`,
/// `S_hat = S_T + sigma_T^2 score(S_T | sigma_T, C)`.
pub fn single_step_enhance<C: ?Sized, M: ScoreModel<C> + ?Sized, R: Rng + ?Sized>(
    estimate: &Spectrogram,
    model: &M,
    cond: &C,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<Spectrogram> {
    let sigma_t = sched.sigma_at(sched.t_max)?;
    let z = noise_like(estimate, rng);
    let state = perturb(estimate, sigma_t, &z)?;
    final_estimate(model, &state, sigma_t, cond)
}
