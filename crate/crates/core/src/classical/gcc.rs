//! Generalized cross-correlation with phase transform.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::fft::{next_pow2, FftPlan};
use crate::signal::Waveform;
use crate::{Error, Result};

/// Accumulate the PHAT-weighted cross spectrum `MIC * conj(REF) / |.|` of
/// one aligned segment pair into `acc`.
fn accumulate_phat(plan: &FftPlan, mic: &[f64], reference: &[f64], acc: &mut [Complex64]) -> bool {
    let m = plan.forward_real(mic);
    let r = plan.forward_real(reference);
    let cross: Vec<Complex64> = m.iter().zip(&r).map(|(a, b)| a * b.conj()).collect();
    let peak = cross.iter().fold(0.0f64, |p, c| p.max(c.norm()));
    if peak == 0.0 {
        return false;
    }
    let floor = peak * 1e-12;
    for (a, c) in acc.iter_mut().zip(&cross) {
        *a += c / c.norm().max(floor);
    }
    true
}

fn pick_lag(plan: &FftPlan, acc: Vec<Complex64>, max_lag: usize) -> i64 {
    let n = plan.len();
    let mut corr = acc;
    plan.inverse(&mut corr);
    let mut best = (0i64, f64::NEG_INFINITY);
    // Scan 0, -1, +1, -2, +2, ... so ties resolve toward the smallest |lag|.
    for k in 0..=max_lag as i64 {
        for lag in if k == 0 { [0, 0] } else { [-k, k] } {
            let v = corr[lag.rem_euclid(n as i64) as usize].re;
            if v > best.1 {
                best = (lag, v);
            }
        }
    }
    best.0
}

fn check_inputs(mic: &Waveform, reference: &Waveform, max_lag: usize) -> Result<()> {
    super::check_pair(mic, reference)?;
    if mic.len() < 2 * max_lag || mic.is_empty() {
        return Err(Error::input(alloc::format!(
            "GCC-PHAT needs at least {} samples for max_lag {max_lag}, got {}",
            2 * max_lag,
            mic.len()
        )));
    }
    Ok(())
}

fn all_zero_error() -> Error {
    Error::input("GCC-PHAT input is all zero; phase is undefined")
}

/// Integer lag maximizing the PHAT-weighted cross-correlation over
/// `[-max_lag, max_lag]`. Positive lag means the reference leads the mic,
/// i.e. `mic(n) ~ ref(n - lag)`.
pub fn gcc_phat_delay(mic: &Waveform, reference: &Waveform, max_lag: usize) -> Result<i64> {
    check_inputs(mic, reference, max_lag)?;
    let plan = FftPlan::new(next_pow2(2 * mic.len()))?;
    let mut acc = alloc::vec![Complex64::new(0.0, 0.0); plan.len()];
    if !accumulate_phat(&plan, mic.samples(), reference.samples(), &mut acc) {
        return Err(all_zero_error());
    }
    Ok(pick_lag(&plan, acc, max_lag))
}

/// GCC-PHAT with the PHAT spectra of consecutive `segment_len` blocks summed
/// before the peak search. Segments must hold at least `2 * max_lag` samples;
/// all-zero segments are skipped.
pub fn gcc_phat_delay_segmented(
    mic: &Waveform,
    reference: &Waveform,
    max_lag: usize,
    segment_len: usize,
) -> Result<i64> {
    check_inputs(mic, reference, max_lag)?;
    if segment_len < 2 * max_lag.max(1) {
        return Err(Error::config("segment_len must be at least 2 * max_lag"));
    }
    let plan = FftPlan::new(next_pow2(2 * segment_len))?;
    let mut acc = alloc::vec![Complex64::new(0.0, 0.0); plan.len()];
    let mut any = false;
    for start in (0..mic.len()).step_by(segment_len) {
        let end = (start + segment_len).min(mic.len());
        any |= accumulate_phat(&plan, &mic.samples()[start..end], &reference.samples()[start..end], &mut acc);
    }
    if !any {
        return Err(all_zero_error());
    }
    Ok(pick_lag(&plan, acc, max_lag))
}

/// Shift the reference by `lag` samples (zero fill) so that it aligns with
/// the mic. The mic is returned unchanged.
pub fn compensate_delay(
    mic: &Waveform,
    reference: &Waveform,
    lag: i64,
    max_lag: usize,
) -> Result<(Waveform, Waveform)> {
    if lag.unsigned_abs() as usize > max_lag {
        return Err(Error::input(alloc::format!("lag {lag} exceeds max_lag {max_lag}")));
    }
    let r = reference.samples();
    let n = r.len() as i64;
    let shifted: Vec<f64> = (0..n)
        .map(|i| {
            let j = i - lag;
            if (0..n).contains(&j) {
                r[j as usize]
            } else {
                0.0
            }
        })
        .collect();
    Ok((mic.clone(), Waveform::from_trusted(shifted, reference.sample_rate_hz())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, stream};

    fn shifted(x: &[f64], lag: i64) -> Waveform {
        let w = Waveform::new(x.to_vec(), 16000).unwrap();
        compensate_delay(&w, &w, lag, lag.unsigned_abs() as usize).unwrap().1
    }

    #[test]
    fn identical_and_shifted_signals() {
        let x = gaussian_vec(&mut stream(1), 4000, 1.0);
        let r = Waveform::new(x.clone(), 16000).unwrap();
        assert_eq!(gcc_phat_delay(&r, &r, 200).unwrap(), 0);
        assert_eq!(gcc_phat_delay(&shifted(&x, 100), &r, 200).unwrap(), 100);
        assert_eq!(gcc_phat_delay(&shifted(&x, -50), &r, 200).unwrap(), -50);
    }

    #[test]
    fn exhaustive_small_range() {
        let x = gaussian_vec(&mut stream(2), 512, 1.0);
        let r = Waveform::new(x.clone(), 16000).unwrap();
        for lag in -16..=16 {
            assert_eq!(gcc_phat_delay(&shifted(&x, lag), &r, 16).unwrap(), lag);
        }
    }

    #[test]
    fn compensation_realigns() {
        let x = gaussian_vec(&mut stream(3), 8000, 1.0);
        let r = Waveform::new(x.clone(), 16000).unwrap();
        let mic = shifted(&x, 100);
        let lag = gcc_phat_delay(&mic, &r, 300).unwrap();
        let (m2, r2) = compensate_delay(&mic, &r, lag, 300).unwrap();
        assert_eq!(gcc_phat_delay(&m2, &r2, 300).unwrap(), 0);
        assert_eq!(compensate_delay(&mic, &r, 0, 10).unwrap().1, r);
        assert!(compensate_delay(&mic, &r, 301, 300).is_err());
    }

    #[test]
    fn segmented_agrees_and_errors() {
        let x = gaussian_vec(&mut stream(4), 20000, 1.0);
        let r = Waveform::new(x.clone(), 16000).unwrap();
        assert_eq!(gcc_phat_delay_segmented(&shifted(&x, -37), &r, 100, 4096).unwrap(), -37);
        let z = Waveform::zeros(20000, 16000);
        assert!(gcc_phat_delay(&z, &r, 100).is_err());
        assert!(gcc_phat_delay(&r, &z, 100).is_err());
        assert!(gcc_phat_delay(&z, &z, 100).is_err());
        let short = Waveform::new(x[..100].to_vec(), 16000).unwrap();
        assert!(gcc_phat_delay(&short, &short, 100).is_err());
    }
}
