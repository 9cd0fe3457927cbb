//! Memoryless loudspeaker distortion `x'(n) = f(x(n))`.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::signal::Waveform;
use crate::{Error, Result};

/// Pointwise distortion applied to the far-end signal before the echo path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    Identity,
    /// Clip at `threshold`, or at `threshold * max|x|` when `relative_to_peak`.
    HardClip {
        threshold: f64,
        relative_to_peak: bool,
    },
    /// `saturation * (2/pi) * atan(drive * x)`.
    SoftClipArctan {
        drive: f64,
        saturation: f64,
    },
    /// `saturation * (2 / (1 + exp(-gain * x)) - 1)`, an odd map bounded by
    /// `saturation`.
    MemorylessSigmoid {
        gain: f64,
        saturation: f64,
    },
    /// Asymmetric loudspeaker sigmoid: `b = 1.5x - 0.3x^2`,
    /// `a = 4` if `b > 0` else `0.5`, `out = 4 (2 / (1 + exp(-a b)) - 1)`.
    AsymmetricSigmoid,
    /// Stages applied left to right.
    Chain {
        stages: Vec<Nonlinearity>,
    },
}

impl Default for Nonlinearity {
    fn default() -> Self {
        Nonlinearity::Chain {
            stages: alloc::vec![
                Nonlinearity::HardClip {
                    threshold: 0.8,
                    relative_to_peak: true
                },
                Nonlinearity::AsymmetricSigmoid,
            ],
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(alloc::format!(
            "nonlinearity {name} must be positive and finite, got {v}"
        )))
    }
}

impl Nonlinearity {
    pub fn validate(&self) -> Result<()> {
        match self {
            Nonlinearity::Identity | Nonlinearity::AsymmetricSigmoid => Ok(()),
            Nonlinearity::HardClip { threshold, .. } => positive("threshold", *threshold),
            Nonlinearity::SoftClipArctan { drive, saturation } => {
                positive("drive", *drive)?;
                positive("saturation", *saturation)
            }
            Nonlinearity::MemorylessSigmoid { gain, saturation } => {
                positive("gain", *gain)?;
                positive("saturation", *saturation)
            }
            Nonlinearity::Chain { stages } => stages.iter().try_for_each(Nonlinearity::validate),
        }
    }

    /// Short label for manifests and logs.
    pub fn label(&self) -> &'static str {
        match self {
            Nonlinearity::Identity => "identity",
            Nonlinearity::HardClip { .. } => "hard_clip",
            Nonlinearity::SoftClipArctan { .. } => "soft_clip_arctan",
            Nonlinearity::MemorylessSigmoid { .. } => "memoryless_sigmoid",
            Nonlinearity::AsymmetricSigmoid => "asymmetric_sigmoid",
            Nonlinearity::Chain { .. } => "chain",
        }
    }

    fn apply_in_place(&self, x: &mut [f64]) {
        match self {
            Nonlinearity::Identity => {}
            Nonlinearity::HardClip {
                threshold,
                relative_to_peak,
            } => {
                let t = if *relative_to_peak {
                    threshold * x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
                } else {
                    *threshold
                };
                x.iter_mut().for_each(|v| *v = v.clamp(-t, t));
            }
            Nonlinearity::SoftClipArctan { drive, saturation } => {
                x.iter_mut()
                    .for_each(|v| *v = saturation * 2.0 / PI * (drive * *v).atan());
            }
            Nonlinearity::MemorylessSigmoid { gain, saturation } => {
                // 2/(1+e^-gx) - 1 == tanh(gx/2), which is exactly odd.
                x.iter_mut()
                    .for_each(|v| *v = saturation * (0.5 * gain * *v).tanh());
            }
            Nonlinearity::AsymmetricSigmoid => {
                x.iter_mut().for_each(|v| {
                    let b = 1.5 * *v - 0.3 * *v * *v;
                    let a = if b > 0.0 { 4.0 } else { 0.5 };
                    *v = 4.0 * (2.0 / (1.0 + (-a * b).exp()) - 1.0);
                });
            }
            Nonlinearity::Chain { stages } => stages.iter().for_each(|s| s.apply_in_place(x)),
        }
    }
}

/// Apply `spec` pointwise. The identity returns the input unchanged.
pub fn apply_nonlinearity(x: &Waveform, spec: &Nonlinearity) -> Result<Waveform> {
    spec.validate()?;
    let mut out = x.samples().to_vec();
    spec.apply_in_place(&mut out);
    if let Some(index) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "nonlinearity output",
            index,
        });
    }
    Ok(Waveform::from_trusted(out, x.sample_rate_hz()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(v: &[f64]) -> Waveform {
        Waveform::new(v.to_vec(), 16000).unwrap()
    }

    #[test]
    fn identity_is_bit_exact() {
        let w = wave(&[0.1, -0.7, 1e-300, 0.999_999]);
        assert_eq!(apply_nonlinearity(&w, &Nonlinearity::Identity).unwrap(), w);
    }

    #[test]
    fn hard_clip_absolute_and_relative() {
        let w = wave(&[1.0, -1.0, 0.5]);
        let abs = Nonlinearity::HardClip {
            threshold: 0.8,
            relative_to_peak: false,
        };
        assert_eq!(
            apply_nonlinearity(&w, &abs).unwrap().samples(),
            &[0.8, -0.8, 0.5]
        );
        let w = wave(&[0.5, -0.25]);
        let rel = Nonlinearity::HardClip {
            threshold: 0.8,
            relative_to_peak: true,
        };
        assert_eq!(
            apply_nonlinearity(&w, &rel).unwrap().samples(),
            &[0.4, -0.25]
        );
    }

    #[test]
    fn sigmoid_is_odd_monotone_bounded_on_dense_grid() {
        let spec = Nonlinearity::MemorylessSigmoid {
            gain: 3.0,
            saturation: 0.7,
        };
        let grid: Vec<f64> = (-20000..=20000).map(|i| i as f64 * 1e-3).collect();
        let out = apply_nonlinearity(&wave(&grid), &spec).unwrap();
        let neg: Vec<f64> = grid.iter().map(|v| -v).collect();
        let out_neg = apply_nonlinearity(&wave(&neg), &spec).unwrap();
        for (a, b) in out.samples().iter().zip(out_neg.samples()) {
            assert_eq!(*a, -*b);
            assert!(a.abs() <= 0.7);
        }
        assert!(out.samples().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn asymmetric_sigmoid_reference_values() {
        let out =
            apply_nonlinearity(&wave(&[0.0, 1.0, -1.0]), &Nonlinearity::AsymmetricSigmoid).unwrap();
        let s = out.samples();
        assert_eq!(s[0], 0.0);
        assert!((s[1] - 4.0 * (2.0 / (1.0 + (-4.8f64).exp()) - 1.0)).abs() < 1e-15);
        assert!((s[2] - 4.0 * (2.0 / (1.0 + (0.9f64).exp()) - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let w = wave(&[0.0]);
        for bad in [
            Nonlinearity::HardClip {
                threshold: 0.0,
                relative_to_peak: false,
            },
            Nonlinearity::SoftClipArctan {
                drive: f64::NAN,
                saturation: 1.0,
            },
            Nonlinearity::MemorylessSigmoid {
                gain: 1.0,
                saturation: -1.0,
            },
            Nonlinearity::Chain {
                stages: alloc::vec![Nonlinearity::HardClip {
                    threshold: -1.0,
                    relative_to_peak: true
                }],
            },
        ] {
            assert!(matches!(
                apply_nonlinearity(&w, &bad),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn default_chain_clips_then_saturates() {
        let spec = Nonlinearity::default();
        let out = apply_nonlinearity(&wave(&[1.0, 0.5]), &spec).unwrap();
        let expected =
            apply_nonlinearity(&wave(&[0.8, 0.5]), &Nonlinearity::AsymmetricSigmoid).unwrap();
        assert_eq!(out, expected);
    }
}
