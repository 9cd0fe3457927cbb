#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Geometric noise schedule of the VE SDE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSchedule {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Largest diffusion time used for sampling and matched training.
    pub t_max: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        NoiseSchedule {
            sigma_min: 0.01,
            sigma_max: 5.0,
            t_max: 0.3,
        }
    }
}

impl NoiseSchedule {
    pub fn new(sigma_min: f64, sigma_max: f64, t_max: f64) -> Result<Self> {
        let s = NoiseSchedule {
            sigma_min,
            sigma_max,
            t_max,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max && self.sigma_max.is_finite())
        {
            return Err(Error::config(alloc::format!(
                "need 0 < sigma_min < sigma_max, got {} and {}",
                self.sigma_min,
                self.sigma_max
            )));
        }
        if !(self.t_max > 0.0 && self.t_max <= 1.0) {
            return Err(Error::config(alloc::format!(
                "t_max must lie in (0, 1], got {}",
                self.t_max
            )));
        }
        Ok(())
    }

    /// `sigma_max / sigma_min`.
    pub fn ratio(&self) -> f64 {
        self.sigma_max / self.sigma_min
    }

    /// `sigma(t) = sigma_min * (sigma_max / sigma_min)^t`, defined for `t` in `[0, 1]`.
    /// Both ends return the configured values exactly.
    pub fn sigma_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || t > 1.0 {
            return Err(Error::input(alloc::format!(
                "diffusion time {t} outside [0, 1]"
            )));
        }
        if t == 1.0 {
            return Ok(self.sigma_max);
        }
        Ok(self.sigma_min * self.ratio().powf(t))
    }

    /// `sigma(T)`.
    pub fn sigma_max_time(&self) -> f64 {
        self.sigma_min * self.ratio().powf(self.t_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_t_max() {
        let s = NoiseSchedule::default();
        assert_eq!(s.sigma_at(0.0).unwrap(), 0.01);
        assert!((s.sigma_at(1.0).unwrap() - 5.0).abs() < 1e-12);
        // 0.01 * 500^0.3
        assert!((s.sigma_at(0.3).unwrap() - 0.064_519_501_214_821_6).abs() < 1e-12);
        assert_eq!(s.sigma_at(0.3).unwrap(), s.sigma_max_time());
    }

    #[test]
    fn rejects_negative_time_and_bad_params() {
        let s = NoiseSchedule::default();
        assert!(s.sigma_at(-0.1).is_err());
        assert!(s.sigma_at(f64::NAN).is_err());
        assert!(NoiseSchedule::new(5.0, 0.01, 0.3).is_err());
        assert!(NoiseSchedule::new(0.01, 5.0, 0.0).is_err());
        assert!(NoiseSchedule::new(0.0, 5.0, 0.3).is_err());
    }

    #[test]
    fn strictly_increasing() {
        let s = NoiseSchedule::default();
        let mut prev = 0.0;
        for i in 0..=1000 {
            let v = s.sigma_at(i as f64 / 1000.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }
}
