//! Waveforms, the analysis/synthesis STFT and basic signal utilities.

mod resample;
mod stft;

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;

pub use resample::{resample, ResampleFilter};
pub use stft::{istft, stft, Spectrogram, StftConfig, WindowKind};

use crate::{Error, Result};

/// Canonical processing rate.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// A mono time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Waveform {
    /// Builds a waveform, rejecting non-finite samples and a zero rate.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite {
                what: "waveform",
                index,
            });
        }
        Ok(Waveform {
            samples,
            sample_rate_hz,
        })
    }

    pub fn zeros(len: usize, sample_rate_hz: u32) -> Self {
        Waveform {
            samples: alloc::vec![0.0; len],
            sample_rate_hz: sample_rate_hz.max(1),
        }
    }

    pub(crate) fn from_trusted(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        debug_assert!(samples.iter().all(|s| s.is_finite()));
        Waveform {
            samples,
            sample_rate_hz,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn scaled(&self, gain: f64) -> Waveform {
        Waveform::from_trusted(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate_hz,
        )
    }

    /// Copy of `len` samples starting at `start`, zero-filled past the end.
    pub fn segment(&self, start: usize, len: usize) -> Waveform {
        let mut out = alloc::vec![0.0; len];
        if start < self.samples.len() {
            let avail = (self.samples.len() - start).min(len);
            out[..avail].copy_from_slice(&self.samples[start..start + avail]);
        }
        Waveform::from_trusted(out, self.sample_rate_hz)
    }

    pub fn mean_square(&self) -> f64 {
        mean_square(&self.samples)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

pub fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Signal power in dB, `10 log10(mean square)`.
///
/// A silent signal yields `f64::NEG_INFINITY`.
pub fn measure_power_db(wave: &Waveform) -> Result<f64> {
    if wave.is_empty() {
        return Err(Error::input("power of an empty waveform is undefined"));
    }
    Ok(power_to_db(wave.mean_square()))
}

pub fn power_to_db(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * p.log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn power_of_constants_and_sine() {
        let w = Waveform::new(alloc::vec![1.0; 1000], 16000).unwrap();
        assert!(measure_power_db(&w).unwrap().abs() < 1e-12);
        let w = Waveform::new(alloc::vec![0.5; 1000], 16000).unwrap();
        assert!((measure_power_db(&w).unwrap() + 6.020_599_913_279_624).abs() < 1e-9);
        // Whole number of periods so the mean square is exactly 1/2.
        let sine: Vec<f64> = (0..16000)
            .map(|n| (2.0 * PI * 1000.0 * n as f64 / 16000.0).sin())
            .collect();
        let w = Waveform::new(sine, 16000).unwrap();
        assert!((measure_power_db(&w).unwrap() + 3.010_299_956_639_812).abs() < 1e-9);
    }

    #[test]
    fn silence_and_empty() {
        let w = Waveform::zeros(10, 16000);
        assert_eq!(measure_power_db(&w).unwrap(), f64::NEG_INFINITY);
        assert!(measure_power_db(&Waveform::zeros(0, 16000)).is_err());
    }

    #[test]
    fn rejects_nan_and_zero_rate() {
        assert!(matches!(
            Waveform::new(alloc::vec![0.0, f64::NAN], 16000),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(Waveform::new(alloc::vec![0.0], 0).is_err());
    }
}
