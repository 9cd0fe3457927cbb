//! Classical echo control: GCC-PHAT alignment, NLMS and frequency-domain
//! Kalman echo cancellers, and ERLE.

mod fdkf;
mod gcc;
mod nlms;

pub use fdkf::{fdkf_cancel, Fdkf, FdkfConfig};
pub use gcc::{compensate_delay, gcc_phat_delay, gcc_phat_delay_segmented};
pub use nlms::{nlms_cancel, Nlms, NlmsConfig};

#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;

use crate::signal::{mean_square, Waveform};
use crate::{Error, Result};

/// Echo estimate and residual `mic - estimate` from one canceller run.
#[derive(Debug, Clone, PartialEq)]
pub struct CancelOutput {
    pub echo_estimate: Waveform,
    pub residual: Waveform,
}

/// Echo return loss enhancement `10 log10(P(mic) / P(residual))` in dB.
///
/// A silent residual yields `+inf`; a silent mic with a non-silent residual
/// yields `-inf`; both silent yields 0.
pub fn erle_db(mic_echo_only: &[f64], residual: &[f64]) -> Result<f64> {
    if mic_echo_only.len() != residual.len() {
        return Err(Error::shape(alloc::format!(
            "ERLE needs equal lengths, got {} and {}",
            mic_echo_only.len(),
            residual.len()
        )));
    }
    let (pm, pr) = (mean_square(mic_echo_only), mean_square(residual));
    Ok(match (pm > 0.0, pr > 0.0) {
        (_, false) if pm > 0.0 => f64::INFINITY,
        (false, false) => 0.0,
        (false, true) => f64::NEG_INFINITY,
        _ => 10.0 * (pm / pr).log10(),
    })
}

/// ERLE over `[start, end)` sample range.
pub fn erle_db_range(mic_echo_only: &[f64], residual: &[f64], start: usize, end: usize) -> Result<f64> {
    if start > end || end > mic_echo_only.len().min(residual.len()) {
        return Err(Error::input(alloc::format!("ERLE range {start}..{end} out of bounds")));
    }
    erle_db(&mic_echo_only[start..end], &residual[start..end])
}

pub(crate) fn check_pair(mic: &Waveform, reference: &Waveform) -> Result<()> {
    if mic.len() != reference.len() {
        return Err(Error::shape(alloc::format!(
            "mic has {} samples, reference has {}",
            mic.len(),
            reference.len()
        )));
    }
    if mic.sample_rate_hz() != reference.sample_rate_hz() {
        return Err(Error::input("mic and reference sample rates differ"));
    }
    Ok(())
}
