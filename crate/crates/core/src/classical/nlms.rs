//! Sample-wise normalized least mean squares echo canceller.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{check_pair, CancelOutput};
use crate::signal::Waveform;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlmsConfig {
    pub taps: usize,
    /// Step size in `[0, 2]`; 0 freezes the filter.
    pub mu: f64,
    /// Regularization added to the reference energy.
    pub eps: f64,
}

impl Default for NlmsConfig {
    fn default() -> Self {
        NlmsConfig { taps: 512, mu: 0.5, eps: 1e-6 }
    }
}

impl NlmsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.taps == 0 {
            return Err(Error::config("NLMS needs at least one tap"));
        }
        if !(0.0..=2.0).contains(&self.mu) {
            return Err(Error::config(alloc::format!("NLMS step size {} outside [0, 2]", self.mu)));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::config("NLMS eps must be finite and non-negative"));
        }
        Ok(())
    }
}

/// NLMS filter state. The reference history is stored twice so the current
/// window is always one contiguous slice.
#[derive(Debug, Clone)]
pub struct Nlms {
    cfg: NlmsConfig,
    weights: Vec<f64>,
    history: Vec<f64>,
    pos: usize,
    energy: f64,
    processed: usize,
}

impl Nlms {
    pub fn new(cfg: NlmsConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Nlms {
            cfg,
            weights: alloc::vec![0.0; cfg.taps],
            history: alloc::vec![0.0; 2 * cfg.taps],
            pos: 0,
            energy: 0.0,
            processed: 0,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Feed one reference and mic sample; returns the echo estimate.
    pub fn process(&mut self, reference: f64, mic: f64) -> Result<f64> {
        let l = self.cfg.taps;
        self.pos = (self.pos + l - 1) % l;
        let oldest = self.history[self.pos];
        self.history[self.pos] = reference;
        self.history[self.pos + l] = reference;
        self.energy += reference * reference - oldest * oldest;
        // Refresh the running sum once per window to cap rounding drift.
        if self.processed % l == l - 1 {
            self.energy = self.window().iter().map(|v| v * v).sum();
        }
        let index = self.processed;
        self.processed += 1;
        let win = &self.history[self.pos..self.pos + l];
        let estimate: f64 = self.weights.iter().zip(win).map(|(w, x)| w * x).sum();
        let err = mic - estimate;
        if !err.is_finite() {
            return Err(Error::Divergence { what: "NLMS", unit: "sample", index });
        }
        let step = self.cfg.mu * err / (self.energy.max(0.0) + self.cfg.eps);
        if step != 0.0 {
            let win = &self.history[self.pos..self.pos + l];
            self.weights.iter_mut().zip(win).for_each(|(w, x)| *w += step * x);
        }
        Ok(estimate)
    }

    fn window(&self) -> &[f64] {
        &self.history[self.pos..self.pos + self.cfg.taps]
    }
}

/// Run NLMS over a whole signal pair.
pub fn nlms_cancel(mic: &Waveform, reference: &Waveform, cfg: &NlmsConfig) -> Result<CancelOutput> {
    check_pair(mic, reference)?;
    let mut filter = Nlms::new(*cfg)?;
    let mut est = Vec::with_capacity(mic.len());
    for (&x, &y) in reference.samples().iter().zip(mic.samples()) {
        est.push(filter.process(x, y)?);
    }
    let residual = mic.samples().iter().zip(&est).map(|(y, e)| y - e).collect();
    let fs = mic.sample_rate_hz();
    Ok(CancelOutput { echo_estimate: Waveform::from_trusted(est, fs), residual: Waveform::from_trusted(residual, fs) })
}
