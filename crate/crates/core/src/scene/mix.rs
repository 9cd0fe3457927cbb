//! Scene mixing at a requested SER and SNR.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nonlinearity::{apply_nonlinearity, Nonlinearity};
use super::rir::{generate_rir_pair, RoomSpec};
use crate::fft::convolve;
use crate::rng::substream;
use crate::signal::{mean_square, Waveform};
use crate::{Error, Result};

/// Mixture peak ceiling applied jointly to every component.
const PEAK_CEILING: f64 = 0.99;

/// Training augmentation applied to one scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    #[default]
    None,
    DropNearend,
    DropFarend,
    DryNearend,
}

impl Augmentation {
    pub fn label(self) -> &'static str {
        match self {
            Augmentation::None => "none",
            Augmentation::DropNearend => "drop_nearend",
            Augmentation::DropFarend => "drop_farend",
            Augmentation::DryNearend => "dry_nearend",
        }
    }
}

fn default_duration() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub ser_db: f64,
    pub snr_db: f64,
    pub room: RoomSpec,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub augmentation: Augmentation,
    #[serde(default)]
    pub seed: u64,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::config("duration_s must be positive"));
        }
        if !self.ser_db.is_finite() || !self.snr_db.is_finite() {
            return Err(Error::config("ser_db and snr_db must be finite"));
        }
        self.room.validate()?;
        self.nonlinearity.validate()
    }
}

/// Result of [`mix_scene`]. Every waveform has the same length and rate and
/// `mic == target + echo + noise` holds sample by sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub mic: Waveform,
    /// Far-end reference `x(n)` as sent to the loudspeaker (before distortion).
    pub farend: Waveform,
    pub echo: Waveform,
    pub near_reverb: Waveform,
    pub near_dry: Waveform,
    pub noise: Waveform,
    /// Near-end component present in the mixture and used as training target.
    pub target: Waveform,
    pub achieved_ser_db: f64,
    pub achieved_snr_db: f64,
    pub echo_gain: f64,
    pub noise_gain: f64,
    pub config: SceneConfig,
}

/// Gain `g` such that `10 log10(p_ref / (g^2 p_other)) = ratio_db`.
pub fn gain_for_ratio(p_ref: f64, p_other: f64, ratio_db: f64) -> Result<f64> {
    if !(p_ref > 0.0) {
        return Err(Error::input(
            "reference component is silent; ratio is undefined",
        ));
    }
    if !(p_other > 0.0) {
        return Err(Error::input(
            "scaled component is silent; requested ratio is unachievable",
        ));
    }
    Ok((p_ref / (p_other * 10f64.powf(ratio_db / 10.0))).sqrt())
}

fn ratio_db(p_ref: f64, p_other: f64) -> f64 {
    10.0 * (p_ref / p_other).log10()
}

fn crop<R: Rng>(w: &Waveform, len: usize, what: &str, rng: &mut R) -> Result<Vec<f64>> {
    if w.len() < len {
        return Err(Error::input(alloc::format!(
            "{what} has {} samples, scene needs {len}",
            w.len()
        )));
    }
    let start = rng.random_range(0..=w.len() - len);
    Ok(w.samples()[start..start + len].to_vec())
}

fn filtered(h: &Waveform, x: &[f64], len: usize) -> Vec<f64> {
    let mut y = convolve(h.samples(), x);
    y.truncate(len);
    y
}

/// Build one scene: `d = h1 * f(x)`, `s' = h2 * s`, echo and noise scaled
/// against the near-end reference, then the augmentation tag applied.
pub fn mix_scene(
    s: &Waveform,
    x: &Waveform,
    noise: &Waveform,
    cfg: &SceneConfig,
) -> Result<SceneBundle> {
    cfg.validate()?;
    let fs = s.sample_rate_hz();
    if x.sample_rate_hz() != fs || noise.sample_rate_hz() != fs {
        return Err(Error::input("scene inputs must share one sample rate"));
    }
    let len = (cfg.duration_s * fs as f64).round() as usize;
    let mut rng = substream(cfg.seed, 0);
    let s_seg = crop(s, len, "near-end speech", &mut rng)?;
    let x_seg = crop(x, len, "far-end speech", &mut rng)?;
    let n_seg = crop(noise, len, "noise", &mut rng)?;

    let (h1, h2) = generate_rir_pair(&cfg.room, fs)?;
    let x_dist = apply_nonlinearity(
        &Waveform::from_trusted(x_seg.clone(), fs),
        &cfg.nonlinearity,
    )?;
    let d_raw = filtered(&h1, x_dist.samples(), len);
    let s_rev = filtered(&h2, &s_seg, len);

    let dry = cfg.augmentation == Augmentation::DryNearend;
    let p_near = mean_square(if dry { &s_seg } else { &s_rev });
    let echo_gain = if cfg.augmentation == Augmentation::DropFarend {
        0.0
    } else {
        gain_for_ratio(p_near, mean_square(&d_raw), cfg.ser_db)?
    };
    let noise_gain = gain_for_ratio(p_near, mean_square(&n_seg), cfg.snr_db)?;

    let mut echo: Vec<f64> = d_raw.iter().map(|v| v * echo_gain).collect();
    let mut noise_c: Vec<f64> = n_seg.iter().map(|v| v * noise_gain).collect();
    let mut near_reverb = s_rev;
    let mut near_dry = s_seg;
    let mut target = match cfg.augmentation {
        Augmentation::DropNearend => alloc::vec![0.0; len],
        Augmentation::DryNearend => near_dry.clone(),
        _ => near_reverb.clone(),
    };

    let peak = target
        .iter()
        .zip(&echo)
        .zip(&noise_c)
        .fold(0.0f64, |m, ((a, b), c)| m.max((a + b + c).abs()));
    let mut norm = 1.0;
    if peak > PEAK_CEILING {
        norm = PEAK_CEILING / peak;
        for v in [
            &mut echo,
            &mut noise_c,
            &mut near_reverb,
            &mut near_dry,
            &mut target,
        ] {
            v.iter_mut().for_each(|s| *s *= norm);
        }
    }
    let mic: Vec<f64> = target
        .iter()
        .zip(&echo)
        .zip(&noise_c)
        .map(|((a, b), c)| a + b + c)
        .collect();

    let p_ref = mean_square(if dry { &near_dry } else { &near_reverb });
    let achieved_ser_db = if echo_gain == 0.0 {
        f64::INFINITY
    } else {
        ratio_db(p_ref, mean_square(&echo))
    };
    let achieved_snr_db = ratio_db(p_ref, mean_square(&noise_c));
    let wave = |v: Vec<f64>| Waveform::from_trusted(v, fs);
    Ok(SceneBundle {
        mic: wave(mic),
        farend: wave(x_seg),
        echo: wave(echo),
        near_reverb: wave(near_reverb),
        near_dry: wave(near_dry),
        noise: wave(noise_c),
        target: wave(target),
        achieved_ser_db,
        achieved_snr_db,
        echo_gain: echo_gain * norm,
        noise_gain: noise_gain * norm,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, stream};

    fn room() -> RoomSpec {
        RoomSpec {
            dimensions: [5.0, 4.0, 3.0],
            rt60: 0.3,
            max_reflection_order: None,
            source_pos: [2.0, 2.0, 1.0],
            mic_pos: [2.2, 2.1, 1.0],
            nearend_pos: [3.5, 1.5, 1.6],
            seed: 0,
            absorption_model: Default::default(),
        }
    }

    fn noise_wave(seed: u64, len: usize, std: f64) -> Waveform {
        Waveform::new(gaussian_vec(&mut stream(seed), len, std), 16000).unwrap()
    }

    fn config(aug: Augmentation) -> SceneConfig {
        SceneConfig {
            ser_db: -5.0,
            snr_db: 12.0,
            room: room(),
            nonlinearity: Nonlinearity::default(),
            duration_s: 0.5,
            augmentation: aug,
            seed: 3,
        }
    }

    fn inputs() -> (Waveform, Waveform, Waveform) {
        (
            noise_wave(1, 9000, 0.1),
            noise_wave(2, 9000, 0.2),
            noise_wave(3, 9000, 0.05),
        )
    }

    #[test]
    fn gain_closed_forms() {
        assert_eq!(gain_for_ratio(2.0, 2.0, 0.0).unwrap(), 1.0);
        let g = gain_for_ratio(2.0, 2.0, 10.0).unwrap();
        assert!((g - 10f64.powf(-0.5)).abs() < 1e-15);
        assert!(gain_for_ratio(0.0, 1.0, 0.0).is_err());
        assert!(gain_for_ratio(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn ratios_hit_and_components_add_exactly() {
        let (s, x, n) = inputs();
        for aug in [
            Augmentation::None,
            Augmentation::DropNearend,
            Augmentation::DryNearend,
        ] {
            let b = mix_scene(&s, &x, &n, &config(aug)).unwrap();
            assert!(
                (b.achieved_ser_db + 5.0).abs() < 1e-9,
                "{aug:?} {}",
                b.achieved_ser_db
            );
            assert!((b.achieved_snr_db - 12.0).abs() < 1e-9);
            for i in 0..b.mic.len() {
                assert_eq!(
                    b.mic.samples()[i],
                    b.target.samples()[i] + b.echo.samples()[i] + b.noise.samples()[i]
                );
            }
            assert!(b.mic.peak() <= PEAK_CEILING + 1e-12);
        }
    }

    #[test]
    fn augmentation_tags() {
        let (s, x, n) = inputs();
        let b = mix_scene(&s, &x, &n, &config(Augmentation::DropFarend)).unwrap();
        assert!(b.echo.samples().iter().all(|v| *v == 0.0));
        assert_eq!(b.target, b.near_reverb);
        let b = mix_scene(&s, &x, &n, &config(Augmentation::DropNearend)).unwrap();
        assert!(b.target.samples().iter().all(|v| *v == 0.0));
        let b = mix_scene(&s, &x, &n, &config(Augmentation::DryNearend)).unwrap();
        assert_eq!(b.target, b.near_dry);
    }

    #[test]
    fn silent_components_and_short_inputs_rejected() {
        let (s, x, n) = inputs();
        let silent = Waveform::zeros(9000, 16000);
        assert!(matches!(
            mix_scene(&s, &x, &silent, &config(Augmentation::None)),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            mix_scene(&silent, &x, &n, &config(Augmentation::None)),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            mix_scene(&s, &silent, &n, &config(Augmentation::None)),
            Err(Error::Input(_))
        ));
        let short = noise_wave(9, 100, 0.1);
        assert!(mix_scene(&short, &x, &n, &config(Augmentation::None)).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let (s, x, n) = inputs();
        let a = mix_scene(&s, &x, &n, &config(Augmentation::None)).unwrap();
        let b = mix_scene(&s, &x, &n, &config(Augmentation::None)).unwrap();
        assert_eq!(a, b);
        let mut other = config(Augmentation::None);
        other.seed = 4;
        assert_ne!(mix_scene(&s, &x, &n, &other).unwrap().mic, a.mic);
    }
}
