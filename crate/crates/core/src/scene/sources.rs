//! Deterministic synthetic sources for tests, demos and smoke runs when no
//! speech corpus is at hand.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{standard_normal, stream};
use crate::signal::Waveform;

/// Biquad band-pass resonator, direct form I.
struct Resonator {
    b0: f64,
    a1: f64,
    a2: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64, fs: f64) -> Self {
        let r = (-PI * bandwidth / fs).exp();
        let theta = 2.0 * PI * freq / fs;
        Resonator {
            b0: 1.0 - r,
            a1: 2.0 * r * theta.cos(),
            a2: -r * r,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn tick(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Speech-like signal: voiced syllables (glottal pulse train through three
/// formant resonators), unvoiced bursts and pauses. Peak-normalized to 0.5.
pub fn synth_speech(seed: u64, duration_s: f64, sample_rate_hz: u32) -> Waveform {
    let fs = sample_rate_hz as f64;
    let len = (duration_s * fs).round() as usize;
    let mut rng = stream(seed);
    let mut out = Vec::with_capacity(len);
    let f0_base = rng.random_range(95.0..220.0);
    while out.len() < len {
        let pause = (rng.random_range(0.04..0.35) * fs) as usize;
        out.extend(core::iter::repeat_n(0.0, pause));
        let syl = (rng.random_range(0.08..0.28) * fs) as usize;
        let voiced = rng.random_bool(0.8);
        let formants = [
            rng.random_range(300.0..900.0),
            rng.random_range(900.0..2500.0),
            rng.random_range(2500.0..3600.0f64.min(0.45 * fs)),
        ];
        let mut res: Vec<Resonator> = formants
            .iter()
            .zip([80.0, 120.0, 200.0])
            .map(|(f, bw)| Resonator::new(*f, bw, fs))
            .collect();
        let f0 = f0_base * rng.random_range(0.85..1.15);
        let mut phase = 0.0;
        let gain = rng.random_range(0.3..1.0);
        for i in 0..syl {
            let env = (PI * i as f64 / syl as f64).sin();
            let exc = if voiced {
                phase += f0 * (1.0 + 0.01 * standard_normal(&mut rng)) / fs;
                if phase >= 1.0 {
                    phase -= 1.0;
                    1.0
                } else {
                    0.0
                }
            } else {
                0.3 * standard_normal(&mut rng)
            };
            let v: f64 = res.iter_mut().map(|r| r.tick(exc)).sum();
            out.push(gain * env * v);
        }
    }
    out.truncate(len);
    normalize_peak(&mut out, 0.5);
    Waveform::from_trusted(out, sample_rate_hz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    White,
    /// Approximately -3 dB/octave.
    Pink,
    /// -6 dB/octave (leaky integrated white noise).
    Brown,
}

/// Stationary coloured noise, peak-normalized to 0.5.
pub fn synth_noise(seed: u64, duration_s: f64, sample_rate_hz: u32, kind: NoiseKind) -> Waveform {
    let len = (duration_s * sample_rate_hz as f64).round() as usize;
    let mut rng = stream(seed);
    let mut out: Vec<f64> = (0..len).map(|_| standard_normal(&mut rng)).collect();
    match kind {
        NoiseKind::White => {}
        NoiseKind::Pink => {
            // Paul Kellet's economy filter.
            let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
            for v in out.iter_mut() {
                b0 = 0.99765 * b0 + *v * 0.0990460;
                b1 = 0.96300 * b1 + *v * 0.2965164;
                b2 = 0.57000 * b2 + *v * 1.0526913;
                *v = b0 + b1 + b2 + *v * 0.1848;
            }
        }
        NoiseKind::Brown => {
            let mut acc = 0.0;
            for v in out.iter_mut() {
                acc = 0.995 * acc + 0.1 * *v;
                *v = acc;
            }
        }
    }
    normalize_peak(&mut out, 0.5);
    Waveform::from_trusted(out, sample_rate_hz)
}

fn normalize_peak(x: &mut [f64], target: f64) {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / peak);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speech_has_pauses_and_requested_length() {
        let w = synth_speech(5, 2.0, 16000);
        assert_eq!(w.len(), 32000);
        assert!((w.peak() - 0.5).abs() < 1e-12);
        let silent = w.samples().iter().filter(|v| **v == 0.0).count();
        assert!(silent > 1600, "{silent}");
        assert_eq!(w, synth_speech(5, 2.0, 16000));
        assert_ne!(w, synth_speech(6, 2.0, 16000));
    }

    #[test]
    fn noise_kinds_are_normalized_and_distinct() {
        let a = synth_noise(1, 1.0, 16000, NoiseKind::White);
        let b = synth_noise(1, 1.0, 16000, NoiseKind::Pink);
        let c = synth_noise(1, 1.0, 16000, NoiseKind::Brown);
        for w in [&a, &b, &c] {
            assert!((w.peak() - 0.5).abs() < 1e-12);
        }
        let lag1 = |w: &Waveform| {
            let s = w.samples();
            s.windows(2).map(|p| p[0] * p[1]).sum::<f64>() / s.iter().map(|v| v * v).sum::<f64>()
        };
        assert!(lag1(&a).abs() < 0.05);
        assert!(lag1(&b) > lag1(&a) && lag1(&c) > lag1(&b));
    }
}
