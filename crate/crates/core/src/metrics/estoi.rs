//! STOI and its extended variant (ESTOI).
//!
//! Both signals are resampled to 10 kHz, frames where the clean signal is
//! more than 40 dB below its loudest frame are dropped, and the remainder is
//! analysed with a 256-sample Hann STFT (512-point FFT, hop 128). Power is
//! pooled into 15 one-third octave bands from 150 Hz and compared over
//! 30-frame (384 ms) segments.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;

use crate::fft::FftPlan;
use crate::signal::{resample, Waveform};
use crate::{Error, Result};

const FS: u32 = 10_000;
const N_FRAME: usize = 256;
const NFFT: usize = 512;
const NUM_BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
const SEGMENT: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// Symmetric Hann without its zero end points.
fn hann(n: usize) -> Vec<f64> {
    (1..=n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n + 1) as f64).cos()).collect()
}

/// Half-open FFT-bin ranges `[lo, hi)` of the one-third octave bands.
fn band_edges() -> [(usize, usize); NUM_BANDS] {
    let n_bins = NFFT / 2 + 1;
    let freq = |i: usize| i as f64 * FS as f64 / NFFT as f64;
    let nearest = |target: f64| {
        (0..n_bins)
            .min_by(|&a, &b| {
                let (da, db) = ((freq(a) - target).powi(2), (freq(b) - target).powi(2));
                da.partial_cmp(&db).unwrap_or(core::cmp::Ordering::Equal)
            })
            .unwrap_or(0)
    };
    let mut out = [(0, 0); NUM_BANDS];
    for (k, e) in out.iter_mut().enumerate() {
        let k = k as f64;
        let lo = MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0);
        let hi = MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0);
        *e = (nearest(lo), nearest(hi));
    }
    out
}

fn frame_starts(len: usize, frame: usize, hop: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(frame)).step_by(hop)
}

/// Drops frames of `x` quieter than its loudest frame minus the dynamic
/// range, applying the same mask to `y`, and overlap-adds the survivors.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hop = N_FRAME / 2;
    let w = hann(N_FRAME);
    let starts: Vec<usize> = frame_starts(x.len(), N_FRAME, hop).collect();
    let energy: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let e: f64 = (0..N_FRAME).map(|i| (w[i] * x[s + i]).powi(2)).sum();
            20.0 * (e.sqrt() + EPS).log10()
        })
        .collect();
    let max = energy.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energy)
        .filter(|(_, e)| max - DYN_RANGE_DB - **e < 0.0)
        .map(|(s, _)| *s)
        .collect();
    let out_len = if kept.is_empty() { 0 } else { (kept.len() - 1) * hop + N_FRAME };
    let (mut xs, mut ys) = (alloc::vec![0.0; out_len], alloc::vec![0.0; out_len]);
    for (j, &s) in kept.iter().enumerate() {
        for i in 0..N_FRAME {
            xs[j * hop + i] += w[i] * x[s + i];
            ys[j * hop + i] += w[i] * y[s + i];
        }
    }
    (xs, ys)
}

/// Band envelopes, `bands x frames`.
fn band_envelopes(x: &[f64], plan: &FftPlan, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let w = hann(N_FRAME);
    let mut out = alloc::vec![Vec::new(); NUM_BANDS];
    let mut buf = alloc::vec![Complex64::new(0.0, 0.0); NFFT];
    for s in frame_starts(x.len(), N_FRAME, N_FRAME / 2) {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for i in 0..N_FRAME {
            buf[i].re = w[i] * x[s + i];
        }
        plan.forward(&mut buf);
        for (b, &(lo, hi)) in edges.iter().enumerate() {
            let p: f64 = buf[lo..hi].iter().map(|c| c.norm_sqr()).sum();
            out[b].push(p.sqrt());
        }
    }
    out
}

/// Zero-mean, unit-norm in place; an all-constant vector becomes zeros.
fn normalize(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let inv = if n > 0.0 { 1.0 / n } else { 0.0 };
    v.iter_mut().for_each(|x| *x *= inv);
}

/// Row (per band) then column (per frame) normalization of one segment
/// stored band-major as `[band][frame]`.
fn row_col_normalize(seg: &mut [Vec<f64>]) {
    for row in seg.iter_mut() {
        normalize(row);
    }
    let mut col = alloc::vec![0.0; seg.len()];
    for t in 0..SEGMENT {
        for (b, row) in seg.iter().enumerate() {
            col[b] = row[t];
        }
        normalize(&mut col);
        for (b, row) in seg.iter_mut().enumerate() {
            row[t] = col[b];
        }
    }
}

fn check_inputs(clean: &Waveform, degraded: &Waveform) -> Result<()> {
    if clean.len() != degraded.len() || clean.sample_rate_hz() != degraded.sample_rate_hz() {
        return Err(Error::shape(alloc::format!(
            "clean ({} samples at {} Hz) and degraded ({} at {} Hz) must match",
            clean.len(),
            clean.sample_rate_hz(),
            degraded.len(),
            degraded.sample_rate_hz()
        )));
    }
    Ok(())
}

/// Intelligibility score of `degraded` against `clean`; `extended` selects
/// ESTOI. Fails when fewer than 30 non-silent frames remain.
pub fn stoi(clean: &Waveform, degraded: &Waveform, extended: bool) -> Result<f64> {
    check_inputs(clean, degraded)?;
    let x = resample(clean, FS)?;
    let y = resample(degraded, FS)?;
    let (xs, ys) = remove_silent_frames(x.samples(), y.samples());
    let plan = FftPlan::new(NFFT)?;
    let edges = band_edges();
    let xe = band_envelopes(&xs, &plan, &edges);
    let ye = band_envelopes(&ys, &plan, &edges);
    let frames = xe[0].len();
    if frames < SEGMENT {
        return Err(Error::input(alloc::format!(
            "only {frames} non-silent frames, need at least {SEGMENT} (about 0.4 s of active speech)"
        )));
    }
    let n_seg = frames - SEGMENT + 1;
    let mut total = 0.0;
    for m in SEGMENT..=frames {
        let slice = |e: &[Vec<f64>]| -> Vec<Vec<f64>> { e.iter().map(|r| r[m - SEGMENT..m].to_vec()).collect() };
        let (mut xseg, mut yseg) = (slice(&xe), slice(&ye));
        if extended {
            row_col_normalize(&mut xseg);
            row_col_normalize(&mut yseg);
            let s: f64 = xseg
                .iter()
                .zip(&yseg)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| u * v))
                .sum();
            total += s / SEGMENT as f64;
        } else {
            let clip = 10f64.powf(-BETA_DB / 20.0);
            for (xr, yr) in xseg.iter_mut().zip(yseg.iter_mut()) {
                let nx = xr.iter().map(|v| v * v).sum::<f64>().sqrt();
                let ny = yr.iter().map(|v| v * v).sum::<f64>().sqrt();
                let g = nx / (ny + EPS);
                for (yv, xv) in yr.iter_mut().zip(xr.iter()) {
                    *yv = (*yv * g).min(xv * (1.0 + clip));
                }
                let center = |r: &mut Vec<f64>| {
                    let mean = r.iter().sum::<f64>() / r.len() as f64;
                    r.iter_mut().for_each(|v| *v -= mean);
                    let n = r.iter().map(|v| v * v).sum::<f64>().sqrt() + EPS;
                    r.iter_mut().for_each(|v| *v /= n);
                };
                center(yr);
                center(xr);
                total += xr.iter().zip(yr.iter()).map(|(a, b)| a * b).sum::<f64>() / NUM_BANDS as f64;
            }
        }
    }
    Ok(total / n_seg as f64)
}

/// Extended STOI in `[-1, 1]`.
pub fn estoi(clean: &Waveform, degraded: &Waveform) -> Result<f64> {
    stoi(clean, degraded, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, stream};
    use crate::scene::sources::synth_speech;

    #[test]
    fn band_edges_match_reference_table() {
        let expected = [
            (7, 9), (9, 11), (11, 14), (14, 17), (17, 22), (22, 27), (27, 34), (34, 43),
            (43, 55), (55, 69), (69, 87), (87, 109), (109, 138), (138, 174), (174, 219),
        ];
        assert_eq!(band_edges(), expected);
    }

    #[test]
    fn identical_signals_score_one() {
        let s = synth_speech(1, 3.0, 16000);
        assert!((estoi(&s, &s).unwrap() - 1.0).abs() < 1e-9);
        assert!((stoi(&s, &s, false).unwrap() - 1.0).abs() < 1e-9);
        let (a, b) = (s.scaled(3.0), s.scaled(3.0));
        assert!((estoi(&a, &b).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noise_scores_low_and_snr_is_monotone() {
        let s = synth_speech(2, 4.0, 16000);
        let noise = gaussian_vec(&mut stream(3), s.len(), 1.0);
        let p = s.mean_square();
        let at = |snr: f64| {
            let g = (p / 10f64.powf(snr / 10.0)).sqrt();
            let y: Vec<f64> = s.samples().iter().zip(&noise).map(|(a, n)| a + g * n).collect();
            estoi(&s, &Waveform::new(y, 16000).unwrap()).unwrap()
        };
        let (hi, mid, lo) = (at(20.0), at(0.0), at(-10.0));
        assert!(hi >= mid && mid >= lo, "{hi} {mid} {lo}");
        let pure = Waveform::new(noise.clone(), 16000).unwrap();
        assert!(estoi(&s, &pure).unwrap().abs() < 0.2);
    }

    #[test]
    fn short_or_mismatched_input_is_rejected() {
        let s = synth_speech(4, 0.3, 16000);
        assert!(matches!(estoi(&s, &s), Err(Error::Input(_))));
        let t = synth_speech(4, 1.0, 16000);
        assert!(matches!(estoi(&s, &t), Err(Error::Shape(_))));
    }
}
