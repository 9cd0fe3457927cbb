//! Desk-scale end-to-end training of a per-bin conditioner and a toy
//! scorer with the matched-condition objective.
//!
//! Each step takes one scene and
//! - updates the conditioner `S_cond = a Y + b X` on `J^CC(S_cond, S)`,
//! - draws `Z` and forms `S_T = S_cond + sigma_T Z` with `S_cond` held fixed,
//! - updates the scorer on `J^CC(S_T + sigma_T^2 score(S_T), S) + alpha J^SM`,
//!   where `J^SM` is the per-element mean of `|score(S + sigma_T Z) + Z / sigma_T|^2`.
//!
//! Both use Adam with the warmup, hold, cosine learning-rate shape.

use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::diffusion::{noise_like, NoiseSchedule};
use crate::loss::{cc_mse, cc_mse_grad_slices, LossConfig, LrSchedule};
use crate::model::ToyScorer;
use crate::rng::{derive_seed, stream, substream};
use crate::scene::SceneBundle;
use crate::signal::{stft, Spectrogram, StftConfig};
use crate::{Error, Result};

/// One training scene in the STFT domain.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub mic: Spectrogram,
    pub farend: Spectrogram,
    pub target: Spectrogram,
}

impl TrainExample {
    pub fn new(mic: Spectrogram, farend: Spectrogram, target: Spectrogram) -> Result<Self> {
        mic.check_shape(&farend)?;
        mic.check_shape(&target)?;
        Ok(TrainExample { mic, farend, target })
    }

    pub fn from_bundle(bundle: &SceneBundle, cfg: &StftConfig) -> Result<Self> {
        Self::new(stft(&bundle.mic, cfg)?, stft(&bundle.farend, cfg)?, stft(&bundle.target, cfg)?)
    }
}

/// Per-bin linear conditioner `S_cond[l, k] = a_k Y[l, k] + b_k X[l, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyCond {
    pub mic_gain: Vec<Complex64>,
    pub ref_gain: Vec<Complex64>,
}

impl ToyCond {
    /// Pass-through initialization: `a = 1`, `b = 0`.
    pub fn identity(n_bins: usize) -> Self {
        ToyCond {
            mic_gain: alloc::vec![Complex64::new(1.0, 0.0); n_bins],
            ref_gain: alloc::vec![Complex64::new(0.0, 0.0); n_bins],
        }
    }

    pub fn apply(&self, mic: &Spectrogram, farend: &Spectrogram) -> Result<Spectrogram> {
        mic.check_shape(farend)?;
        let active = mic.config().active_bins();
        if self.mic_gain.len() != active {
            return Err(Error::shape(alloc::format!(
                "conditioner has {} bins, spectrogram has {active} active bins",
                self.mic_gain.len()
            )));
        }
        let mut out = mic.zeros_like();
        for l in 0..mic.n_frames() {
            let (y, x) = (mic.frame(l), farend.frame(l));
            for (k, o) in out.frame_mut(l)[..active].iter_mut().enumerate() {
                *o = self.mic_gain[k] * y[k] + self.ref_gain[k] * x[k];
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyPipelineConfig {
    pub steps: usize,
    pub peak_lr: f64,
    pub loss: LossConfig,
    pub schedule: NoiseSchedule,
    pub train_cond: bool,
    pub scorer_bias: bool,
    pub seed: u64,
}

impl Default for ToyPipelineConfig {
    fn default() -> Self {
        ToyPipelineConfig {
            steps: 200,
            peak_lr: 0.02,
            loss: LossConfig::default(),
            schedule: NoiseSchedule::default(),
            train_cond: true,
            scorer_bias: false,
            seed: 0,
        }
    }
}

/// Per-term losses on a set of scenes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cond_cc: f64,
    pub score_cc: f64,
    pub score_matching: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRunReport {
    pub config: ToyPipelineConfig,
    pub n_train: usize,
    pub n_holdout: usize,
    /// Total training loss at each step, before the update.
    pub train_loss: Vec<f64>,
    pub learning_rate: Vec<f64>,
    pub holdout_initial: LossBreakdown,
    pub holdout_final: LossBreakdown,
}

/// Trained parameters plus the run report.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyRun {
    pub cond: ToyCond,
    pub scorer: ToyScorer,
    pub report: ToyRunReport,
}

#[derive(Debug, Clone)]
struct Adam {
    m: Vec<Complex64>,
    v: Vec<Complex64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Adam { m: alloc::vec![z; n], v: alloc::vec![z; n], t: 0 }
    }

    fn step(&mut self, params: &mut [Complex64], grad: &[Complex64], lr: f64) {
        self.t += 1;
        let (c1, c2) = (1.0 - Self::B1.powi(self.t), 1.0 - Self::B2.powi(self.t));
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = *m * Self::B1 + g * (1.0 - Self::B1);
            v.re = Self::B2 * v.re + (1.0 - Self::B2) * g.re * g.re;
            v.im = Self::B2 * v.im + (1.0 - Self::B2) * g.im * g.im;
            p.re -= lr * (m.re / c1) / ((v.re / c2).sqrt() + Self::EPS);
            p.im -= lr * (m.im / c1) / ((v.im / c2).sqrt() + Self::EPS);
        }
    }
}

fn active_flat(s: &Spectrogram) -> Vec<Complex64> {
    let active = s.config().active_bins();
    (0..s.n_frames()).flat_map(|l| s.frame(l)[..active].iter().copied()).collect()
}

struct StepGrads {
    losses: LossBreakdown,
    cond_mic: Vec<Complex64>,
    cond_ref: Vec<Complex64>,
    gain: Vec<Complex64>,
    bias: Vec<Complex64>,
}

/// Losses and gradients for one scene and one noise draw.
fn evaluate(
    cond: &ToyCond,
    scorer: &ToyScorer,
    ex: &TrainExample,
    z: &Spectrogram,
    sigma: f64,
    cfg: &LossConfig,
) -> Result<StepGrads> {
    let active = ex.mic.config().active_bins();
    let frames = ex.mic.n_frames();
    let s_cond = cond.apply(&ex.mic, &ex.farend)?;
    let target = active_flat(&ex.target);
    let cond_flat = active_flat(&s_cond);
    let cond_cc = cc_mse(&s_cond, &ex.target, cfg)?;
    let g_cond = cc_mse_grad_slices(&cond_flat, &target, cfg)?;

    let zero = Complex64::new(0.0, 0.0);
    let mut cond_mic = alloc::vec![zero; active];
    let mut cond_ref = alloc::vec![zero; active];
    for l in 0..frames {
        let (y, x) = (ex.mic.frame(l), ex.farend.frame(l));
        for k in 0..active {
            let g = g_cond[l * active + k];
            cond_mic[k] += g * y[k].conj();
            cond_ref[k] += g * x[k].conj();
        }
    }

    let n_bins = scorer.n_bins();
    let bias = |k: usize| scorer.bias().map_or(zero, |b| b[k]);
    let gain = scorer.gain();
    let s2 = sigma * sigma;
    let mut s_hat = Vec::with_capacity(frames * active);
    let mut state = Vec::with_capacity(frames * active);
    let mut sm = 0.0;
    let mut g_gain = alloc::vec![zero; n_bins];
    let mut g_bias = alloc::vec![zero; n_bins];
    let n = (frames * active) as f64;
    let with_bias = scorer.bias().is_some();
    for l in 0..frames {
        let (zf, sf, cf) = (z.frame(l), ex.target.frame(l), s_cond.frame(l));
        for k in 0..active {
            let x = cf[k] + zf[k] * sigma;
            state.push(x);
            s_hat.push(x + (gain[k] * x + bias(k)) * s2);
            let st = sf[k] + zf[k] * sigma;
            let r = gain[k] * st + bias(k) + zf[k] / sigma;
            sm += r.norm_sqr() / n;
            g_gain[k] += r * st.conj() * (2.0 * cfg.alpha / n);
            if with_bias {
                g_bias[k] += r * (2.0 * cfg.alpha / n);
            }
        }
    }
    let score_cc = crate::loss::cc_mse_slices(&s_hat, &target, cfg)?;
    let g_hat = cc_mse_grad_slices(&s_hat, &target, cfg)?;
    for (i, g) in g_hat.iter().enumerate() {
        let k = i % active;
        g_gain[k] += g * state[i].conj() * s2;
        if with_bias {
            g_bias[k] += g * s2;
        }
    }
    let total = cond_cc + score_cc + cfg.alpha * sm;
    if !total.is_finite() {
        return Err(Error::NonFinite { what: "training loss", index: 0 });
    }
    Ok(StepGrads {
        losses: LossBreakdown { cond_cc, score_cc, score_matching: sm, total },
        cond_mic,
        cond_ref,
        gain: g_gain,
        bias: g_bias,
    })
}

/// Mean losses over `set` with one fixed noise draw per scene.
pub fn evaluate_losses(
    cond: &ToyCond,
    scorer: &ToyScorer,
    set: &[TrainExample],
    cfg: &ToyPipelineConfig,
    noise_seed: u64,
) -> Result<LossBreakdown> {
    let sigma = cfg.schedule.sigma_at(cfg.schedule.t_max)?;
    let mut acc = LossBreakdown::default();
    for (i, ex) in set.iter().enumerate() {
        let z = noise_like(&ex.mic, &mut substream(noise_seed, i as u64));
        let l = evaluate(cond, scorer, ex, &z, sigma, &cfg.loss)?.losses;
        acc.cond_cc += l.cond_cc;
        acc.score_cc += l.score_cc;
        acc.score_matching += l.score_matching;
        acc.total += l.total;
    }
    let n = set.len().max(1) as f64;
    Ok(LossBreakdown {
        cond_cc: acc.cond_cc / n,
        score_cc: acc.score_cc / n,
        score_matching: acc.score_matching / n,
        total: acc.total / n,
    })
}

/// Train the toy conditioner and scorer on `train`, scoring `holdout`
/// before and after with fixed noise.
pub fn toy_pipeline_train(
    train: &[TrainExample],
    holdout: &[TrainExample],
    cfg: &ToyPipelineConfig,
) -> Result<ToyRun> {
    cfg.loss.validate()?;
    cfg.schedule.validate()?;
    if train.is_empty() {
        return Err(Error::input("training set is empty"));
    }
    if !(cfg.peak_lr > 0.0) {
        return Err(Error::config("peak learning rate must be positive"));
    }
    let first = &train[0].mic;
    for ex in train.iter().chain(holdout) {
        if ex.mic.config() != first.config() {
            return Err(Error::shape("all scenes must share one STFT configuration"));
        }
    }
    let active = first.config().active_bins();
    let sigma = cfg.schedule.sigma_at(cfg.schedule.t_max)?;
    let lr_sched = LrSchedule::default().scaled_to(cfg.steps.max(1), cfg.peak_lr);

    let mut cond = ToyCond::identity(active);
    let mut scorer = ToyScorer::new(active, cfg.scorer_bias);
    let holdout_seed = derive_seed(cfg.seed, u64::MAX);
    let holdout_initial = evaluate_losses(&cond, &scorer, holdout, cfg, holdout_seed)?;

    let mut rng = stream(derive_seed(cfg.seed, 0));
    let mut opt_cond = (Adam::new(active), Adam::new(active));
    let mut opt_score = (Adam::new(active), Adam::new(active));
    let mut order: Vec<usize> = Vec::new();
    let mut train_loss = Vec::with_capacity(cfg.steps);
    let mut learning_rate = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        if order.is_empty() {
            order = (0..train.len()).collect();
            order.shuffle(&mut rng);
        }
        let ex = &train[order.pop().unwrap_or(0)];
        let z = noise_like(&ex.mic, &mut rng);
        let g = evaluate(&cond, &scorer, ex, &z, sigma, &cfg.loss)
            .map_err(|_| Error::Divergence { what: "toy pipeline training", unit: "step", index: step })?;
        let lr = lr_sched.lr_at(step);
        train_loss.push(g.losses.total);
        learning_rate.push(lr);
        if cfg.train_cond {
            opt_cond.0.step(&mut cond.mic_gain, &g.cond_mic, lr);
            opt_cond.1.step(&mut cond.ref_gain, &g.cond_ref, lr);
        }
        let mut gain = scorer.gain().to_vec();
        opt_score.0.step(&mut gain, &g.gain, lr);
        let bias = scorer.bias().map(|b| {
            let mut b = b.to_vec();
            opt_score.1.step(&mut b, &g.bias, lr);
            b
        });
        scorer = ToyScorer::from_params(gain, bias)
            .map_err(|_| Error::Divergence { what: "toy pipeline training", unit: "step", index: step })?;
    }
    let holdout_final = evaluate_losses(&cond, &scorer, holdout, cfg, holdout_seed)?;
    Ok(ToyRun {
        cond,
        scorer,
        report: ToyRunReport {
            config: *cfg,
            n_train: train.len(),
            n_holdout: holdout.len(),
            train_loss,
            learning_rate,
            holdout_initial,
            holdout_final,
        },
    })
}
