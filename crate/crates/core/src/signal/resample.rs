//! Rational-ratio windowed-sinc resampling.
//!
//! The low-pass prototype is a Kaiser-windowed sinc with 60 dB stopband
//! rejection and a transition width of a tenth of the cutoff, normalized to
//! unit DC gain. Output sample `i` is centred on input position
//! `i * down / up`, i.e. zero group delay, and the output length is
//! `ceil(len * up / down)`. This matches the Octave-compatible resampler
//! commonly paired with STOI.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;

use super::Waveform;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ResampleFilter {
    up: usize,
    down: usize,
    half_len: usize,
    /// Prototype taps, already multiplied by `up`.
    taps: Vec<f64>,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

impl ResampleFilter {
    pub fn new(from_hz: u32, to_hz: u32) -> Result<Self> {
        if from_hz == 0 || to_hz == 0 {
            return Err(Error::config("resampling rates must be positive"));
        }
        let g = gcd(from_hz as usize, to_hz as usize);
        let up = to_hz as usize / g;
        let down = from_hz as usize / g;
        let rejection_db = 60.0;
        let cutoff = 1.0 / (2.0 * up.max(down) as f64);
        let roll_off = cutoff / 10.0;
        let half_len = ((rejection_db - 8.0) / (28.714 * roll_off)).ceil() as usize;
        let beta = 0.1102 * (rejection_db - 8.7);
        let m = 2 * half_len;
        let i0_beta = bessel_i0(beta);
        let mut taps: Vec<f64> = (0..=m)
            .map(|i| {
                let t = i as f64 - half_len as f64;
                let ideal = 2.0 * up as f64 * cutoff * sinc(2.0 * cutoff * t);
                let r = 2.0 * i as f64 / m as f64 - 1.0;
                let kaiser = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                kaiser * ideal
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        for t in &mut taps {
            *t = *t / sum * up as f64;
        }
        Ok(ResampleFilter {
            up,
            down,
            half_len,
            taps,
        })
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        if self.up == 1 && self.down == 1 {
            return x.to_vec();
        }
        let (up, down, half) = (self.up as isize, self.down as isize, self.half_len as isize);
        (0..self.output_len(x.len()))
            .map(|i| {
                let centre = i as isize * down;
                // Input indices n with |centre - n * up| <= half.
                let lo = (centre - half + up - 1).div_euclid(up).max(0);
                let hi = ((centre + half).div_euclid(up)).min(x.len() as isize - 1);
                let mut acc = 0.0;
                let mut n = lo;
                while n <= hi {
                    acc += x[n as usize] * self.taps[(half + centre - n * up) as usize];
                    n += 1;
                }
                acc
            })
            .collect()
    }
}

/// Resamples `wave` to `to_hz`; identity when the rates already agree.
pub fn resample(wave: &Waveform, to_hz: u32) -> Result<Waveform> {
    if wave.sample_rate_hz() == to_hz {
        return Ok(wave.clone());
    }
    let filter = ResampleFilter::new(wave.sample_rate_hz(), to_hz)?;
    Ok(Waveform::from_trusted(filter.apply(wave.samples()), to_hz))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rate() {
        let w = Waveform::new(alloc::vec![0.1, -0.2, 0.3], 16000).unwrap();
        assert_eq!(resample(&w, 16000).unwrap(), w);
    }

    #[test]
    fn length_and_tone_preserved() {
        let x: Vec<f64> = (0..16000)
            .map(|n| (2.0 * PI * 440.0 * n as f64 / 16000.0).sin())
            .collect();
        let w = Waveform::new(x, 16000).unwrap();
        let y = resample(&w, 10000).unwrap();
        assert_eq!(y.len(), 10000);
        // Interior samples follow the same sinusoid at the new rate.
        for n in 1000..9000 {
            let expect = (2.0 * PI * 440.0 * n as f64 / 10000.0).sin();
            assert!((y.samples()[n] - expect).abs() < 2e-3, "n={n}");
        }
    }

    #[test]
    fn dc_gain_is_unity() {
        let f = ResampleFilter::new(48000, 16000).unwrap();
        let y = f.apply(&alloc::vec![1.0; 48000]);
        assert!((y[8000] - 1.0).abs() < 1e-3);
    }
}
