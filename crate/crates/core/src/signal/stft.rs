use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::fft::FftPlan;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// Square root of the periodic Hann window.
    SqrtHann,
}

/// STFT parameters. Defaults: 512-sample frames, 128 hop, square-root Hann,
/// 257 bins padded to 260.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub frame_length: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub pad_bins_to: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            frame_length: 512,
            hop: 128,
            window: WindowKind::SqrtHann,
            pad_bins_to: 260,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_length == 0 || !self.frame_length.is_power_of_two() {
            return Err(Error::config(format!(
                "frame length {} must be a power of two",
                self.frame_length
            )));
        }
        if self.hop == 0 || !self.frame_length.is_multiple_of(self.hop) {
            return Err(Error::config(format!(
                "hop {} must divide frame length {}",
                self.hop, self.frame_length
            )));
        }
        if self.pad_bins_to < self.active_bins() {
            return Err(Error::config(format!(
                "pad_bins_to {} is below the {} DFT bins",
                self.pad_bins_to,
                self.active_bins()
            )));
        }
        Ok(())
    }

    /// Number of non-redundant DFT bins, `frame_length / 2 + 1`.
    pub fn active_bins(&self) -> usize {
        self.frame_length / 2 + 1
    }

    /// Zero padding applied to both signal ends before framing.
    pub fn edge_pad(&self) -> usize {
        self.frame_length - self.hop
    }

    pub fn n_frames(&self, signal_len: usize) -> usize {
        let len = signal_len.max(self.frame_length);
        (len + 2 * self.edge_pad() - self.frame_length) / self.hop + 1
    }

    pub fn window(&self) -> Vec<f64> {
        let n = self.frame_length as f64;
        (0..self.frame_length)
            .map(|i| (0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos()).sqrt())
            .collect()
    }

    /// Analysis scale `1 / sqrt(sum w^2)`: white unit-variance noise maps to
    /// unit-variance bins.
    pub fn analysis_scale(&self) -> f64 {
        let e: f64 = self.window().iter().map(|w| w * w).sum();
        1.0 / e.sqrt()
    }
}

/// Complex STFT, stored frame-major (`frames x padded bins`).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Vec<Complex64>,
    n_frames: usize,
    config: StftConfig,
    signal_len: usize,
    sample_rate_hz: u32,
    short_input_padded: bool,
}

impl Spectrogram {
    pub fn zeros(config: StftConfig, signal_len: usize, sample_rate_hz: u32) -> Self {
        let n_frames = config.n_frames(signal_len);
        Spectrogram {
            data: alloc::vec![Complex64::new(0.0, 0.0); n_frames * config.pad_bins_to],
            n_frames,
            config,
            signal_len,
            sample_rate_hz,
            short_input_padded: signal_len < config.frame_length,
        }
    }

    /// Builds a spectrogram from raw frame-major data, checking shape and finiteness.
    pub fn from_data(
        data: Vec<Complex64>,
        config: StftConfig,
        signal_len: usize,
        sample_rate_hz: u32,
    ) -> Result<Self> {
        config.validate()?;
        let n_frames = config.n_frames(signal_len);
        if data.len() != n_frames * config.pad_bins_to {
            return Err(Error::shape(format!(
                "expected {} frames x {} bins = {} values, got {}",
                n_frames,
                config.pad_bins_to,
                n_frames * config.pad_bins_to,
                data.len()
            )));
        }
        if let Some(index) = data
            .iter()
            .position(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::NonFinite {
                what: "spectrogram",
                index,
            });
        }
        Ok(Spectrogram {
            data,
            n_frames,
            config,
            signal_len,
            sample_rate_hz,
            short_input_padded: signal_len < config.frame_length,
        })
    }

    /// A spectrogram of the same geometry with new data.
    pub fn with_data(&self, data: Vec<Complex64>) -> Result<Self> {
        Spectrogram::from_data(data, self.config, self.signal_len, self.sample_rate_hz)
    }

    pub fn zeros_like(&self) -> Self {
        Spectrogram::zeros(self.config, self.signal_len, self.sample_rate_hz)
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    /// Padded bin count (the stored bin axis).
    pub fn n_bins(&self) -> usize {
        self.config.pad_bins_to
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    /// True when the source waveform was shorter than one frame.
    pub fn short_input_padded(&self) -> bool {
        self.short_input_padded
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[frame * self.config.pad_bins_to + bin]
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        let k = self.config.pad_bins_to;
        &self.data[frame * k..(frame + 1) * k]
    }

    pub fn frame_mut(&mut self, frame: usize) -> &mut [Complex64] {
        let k = self.config.pad_bins_to;
        &mut self.data[frame * k..(frame + 1) * k]
    }

    pub fn same_shape(&self, other: &Spectrogram) -> bool {
        self.n_frames == other.n_frames && self.config == other.config
    }

    pub(crate) fn check_shape(&self, other: &Spectrogram) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "spectrogram {}x{} vs {}x{}",
                self.n_frames,
                self.n_bins(),
                other.n_frames,
                other.n_bins()
            )))
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Spectrogram) -> Result<()> {
        self.check_shape(other)?;
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += o * a;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        for s in &mut self.data {
            *s *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> Spectrogram {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// Sum of squared magnitudes over all stored entries.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// One-sided energy, counting bins strictly between DC and Nyquist twice.
    pub fn one_sided_energy(&self) -> f64 {
        let nyq = self.config.frame_length / 2;
        let mut e = 0.0;
        for l in 0..self.n_frames {
            for (k, c) in self.frame(l)[..=nyq].iter().enumerate() {
                let w = if k == 0 || k == nyq { 1.0 } else { 2.0 };
                e += w * c.norm_sqr();
            }
        }
        e
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Short-time Fourier transform with square-root Hann analysis.
///
/// The signal is zero padded by `frame_length - hop` samples on both ends;
/// inputs shorter than one frame are extended to a full frame first and the
/// result is flagged via [`Spectrogram::short_input_padded`]. Each frame's
/// DFT is scaled by [`StftConfig::analysis_scale`]. Bins past
/// `frame_length / 2` up to `pad_bins_to` are zero.
pub fn stft(wave: &Waveform, cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    if let Some(index) = wave.samples().iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite {
            what: "stft input",
            index,
        });
    }
    let x = wave.samples();
    let n = cfg.frame_length;
    let pad = cfg.edge_pad();
    let plan = FftPlan::new(n)?;
    let window = cfg.window();
    let scale = cfg.analysis_scale();
    let mut spec = Spectrogram::zeros(*cfg, x.len(), wave.sample_rate_hz());
    let active = cfg.active_bins();
    let mut buf = alloc::vec![Complex64::new(0.0, 0.0); n];
    for l in 0..spec.n_frames {
        let start = (l * cfg.hop) as isize - pad as isize;
        for (i, b) in buf.iter_mut().enumerate() {
            let t = start + i as isize;
            let v = if t >= 0 && (t as usize) < x.len() {
                x[t as usize]
            } else {
                0.0
            };
            *b = Complex64::new(v * window[i], 0.0);
        }
        plan.forward(&mut buf);
        for (o, b) in spec.frame_mut(l)[..active].iter_mut().zip(&buf) {
            *o = b * scale;
        }
    }
    Ok(spec)
}

/// Inverse STFT by weighted overlap-add.
///
/// Synthesis uses the same square-root Hann window and divides by the
/// per-sample window-sum-square, so `istft(stft(x)) == x` wherever at least
/// one frame covers a sample. Padded bins are ignored.
pub fn istft(spec: &Spectrogram) -> Result<Waveform> {
    let cfg = spec.config;
    cfg.validate()?;
    if spec.data.len() != spec.n_frames * cfg.pad_bins_to
        || spec.n_frames != cfg.n_frames(spec.signal_len)
    {
        return Err(Error::shape(
            "spectrogram data inconsistent with its STFT config",
        ));
    }
    let n = cfg.frame_length;
    let pad = cfg.edge_pad();
    let half = n / 2;
    let plan = FftPlan::new(n)?;
    let window = cfg.window();
    let unscale = 1.0 / (cfg.analysis_scale() * n as f64);
    let padded_len = (spec.n_frames - 1) * cfg.hop + n;
    let mut acc = alloc::vec![0.0; padded_len];
    let mut wss = alloc::vec![0.0; padded_len];
    let mut buf = alloc::vec![Complex64::new(0.0, 0.0); n];
    for l in 0..spec.n_frames {
        let frame = spec.frame(l);
        buf[0] = Complex64::new(frame[0].re, 0.0);
        buf[half] = Complex64::new(frame[half].re, 0.0);
        for k in 1..half {
            buf[k] = frame[k];
            buf[n - k] = frame[k].conj();
        }
        plan.inverse(&mut buf);
        let start = l * cfg.hop;
        for i in 0..n {
            acc[start + i] += buf[i].re * unscale * window[i];
            wss[start + i] += window[i] * window[i];
        }
    }
    let out = (0..spec.signal_len)
        .map(|t| {
            let p = t + pad;
            if p < padded_len && wss[p] > 1e-10 {
                acc[p] / wss[p]
            } else {
                0.0
            }
        })
        .collect();
    Ok(Waveform::from_trusted(out, spec.sample_rate_hz))
}
