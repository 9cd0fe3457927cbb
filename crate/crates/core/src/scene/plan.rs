//! Dataset planning: per-scene parameters and augmentation assignment.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mix::{Augmentation, SceneConfig};
use super::nonlinearity::Nonlinearity;
use super::rir::{Point, RoomSpec, MIN_SOURCE_DISTANCE};
use crate::rng::{derive_seed, substream};
use crate::{Error, Result};

/// Fractions of scenes receiving each augmentation. Counts are
/// `floor(n * fraction)`; the remainder gets no augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationFractions {
    pub drop_nearend: f64,
    pub drop_farend: f64,
    pub dry_nearend: f64,
}

impl Default for AugmentationFractions {
    fn default() -> Self {
        AugmentationFractions {
            drop_nearend: 0.0625,
            drop_farend: 0.0625,
            dry_nearend: 0.10,
        }
    }
}

impl AugmentationFractions {
    pub fn validate(&self) -> Result<()> {
        let all = [self.drop_nearend, self.drop_farend, self.dry_nearend];
        if all.iter().any(|f| !(0.0..=1.0).contains(f)) || all.iter().sum::<f64>() > 1.0 {
            return Err(Error::config(
                "augmentation fractions must lie in [0, 1] and sum to at most 1",
            ));
        }
        Ok(())
    }

    pub fn counts(&self, n: usize) -> [usize; 3] {
        let c = |f: f64| (n as f64 * f).floor() as usize;
        [
            c(self.drop_nearend),
            c(self.drop_farend),
            c(self.dry_nearend),
        ]
    }
}

/// Shuffled augmentation tags for `n` scenes.
pub fn augmentation_schedule(
    n: usize,
    fractions: &AugmentationFractions,
    seed: u64,
) -> Result<Vec<Augmentation>> {
    fractions.validate()?;
    let [a, b, c] = fractions.counts(n);
    let mut tags = Vec::with_capacity(n);
    tags.extend(core::iter::repeat_n(Augmentation::DropNearend, a));
    tags.extend(core::iter::repeat_n(Augmentation::DropFarend, b));
    tags.extend(core::iter::repeat_n(Augmentation::DryNearend, c));
    tags.resize(n, Augmentation::None);
    tags.shuffle(&mut substream(seed, u64::MAX));
    Ok(tags)
}

/// Ranges sampled uniformly for each planned scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingRanges {
    pub ser_db: [f64; 2],
    pub snr_db: [f64; 2],
    pub rt60_s: [f64; 2],
    pub room_min_m: Point,
    pub room_max_m: Point,
    /// Loudspeaker to microphone distance.
    pub speaker_distance_m: [f64; 2],
    /// Near-end talker to microphone distance.
    pub talker_distance_m: [f64; 2],
    pub duration_s: f64,
    /// Probability that a scene uses the default loudspeaker distortion
    /// instead of the identity.
    pub nonlinear_fraction: f64,
    pub augmentation: AugmentationFractions,
}

impl Default for SamplingRanges {
    fn default() -> Self {
        SamplingRanges {
            ser_db: [-10.0, 10.0],
            snr_db: [0.0, 30.0],
            rt60_s: [0.2, 0.7],
            room_min_m: [3.0, 3.0, 2.4],
            room_max_m: [8.0, 6.0, 3.5],
            speaker_distance_m: [0.1, 0.4],
            talker_distance_m: [0.5, 2.0],
            duration_s: 30.0,
            nonlinear_fraction: 0.5,
            augmentation: AugmentationFractions::default(),
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] {
        Ok(())
    } else {
        Err(Error::config(format!(
            "range {name} {r:?} is not an ordered finite interval"
        )))
    }
}

impl SamplingRanges {
    pub fn validate(&self) -> Result<()> {
        check_range("ser_db", self.ser_db)?;
        check_range("snr_db", self.snr_db)?;
        check_range("rt60_s", self.rt60_s)?;
        check_range("speaker_distance_m", self.speaker_distance_m)?;
        check_range("talker_distance_m", self.talker_distance_m)?;
        if !(self.rt60_s[0] > 0.0) {
            return Err(Error::config("rt60 range must be positive"));
        }
        if self.speaker_distance_m[0] < MIN_SOURCE_DISTANCE
            || self.talker_distance_m[0] < MIN_SOURCE_DISTANCE
        {
            return Err(Error::config("source distances must be at least 5 cm"));
        }
        for a in 0..3 {
            check_range("room_m", [self.room_min_m[a], self.room_max_m[a]])?;
            if self.room_min_m[a] < 1.5 {
                return Err(Error::config(
                    "rooms must be at least 1.5 m in every dimension",
                ));
            }
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::config("duration_s must be positive"));
        }
        if !(0.0..=1.0).contains(&self.nonlinear_fraction) {
            return Err(Error::config("nonlinear_fraction must lie in [0, 1]"));
        }
        self.augmentation.validate()
    }
}

/// One planned scene: its recipe and which pool entries feed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePlan {
    pub index: usize,
    pub id: String,
    pub nearend_source: usize,
    pub farend_source: usize,
    pub noise_source: usize,
    pub config: SceneConfig,
}

fn uniform<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

fn point_near<R: Rng>(
    rng: &mut R,
    centre: &Point,
    dist: [f64; 2],
    dims: &Point,
    margin: f64,
) -> Option<Point> {
    for _ in 0..1000 {
        let d = uniform(rng, dist);
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..core::f64::consts::TAU);
        let rxy = (1.0 - z * z).sqrt();
        let p = [
            centre[0] + d * rxy * phi.cos(),
            centre[1] + d * rxy * phi.sin(),
            centre[2] + d * z,
        ];
        if p.iter()
            .zip(dims)
            .all(|(c, l)| *c > margin && *c < l - margin)
        {
            return Some(p);
        }
    }
    None
}

fn plan_room<R: Rng>(rng: &mut R, ranges: &SamplingRanges, seed: u64) -> Result<RoomSpec> {
    let dims: Point =
        core::array::from_fn(|a| uniform(rng, [ranges.room_min_m[a], ranges.room_max_m[a]]));
    let margin = 0.3;
    for _ in 0..100 {
        let mic: Point = core::array::from_fn(|a| rng.random_range(0.5..dims[a] - 0.5));
        let Some(spk) = point_near(rng, &mic, ranges.speaker_distance_m, &dims, margin) else {
            continue;
        };
        let Some(talker) = point_near(rng, &mic, ranges.talker_distance_m, &dims, margin) else {
            continue;
        };
        return Ok(RoomSpec {
            dimensions: dims,
            rt60: uniform(rng, ranges.rt60_s),
            max_reflection_order: None,
            source_pos: spk,
            mic_pos: mic,
            nearend_pos: talker,
            seed,
            absorption_model: Default::default(),
        });
    }
    Err(Error::config(
        "could not place sources inside the sampled room; distance ranges too large",
    ))
}

/// Plan `n` scenes drawing sources from pools of the given sizes.
///
/// Scene `i` uses the RNG stream `derive_seed(seed, i)`, so any subset can be
/// regenerated independently.
pub fn plan_dataset(
    n: usize,
    ranges: &SamplingRanges,
    speech_pool: usize,
    noise_pool: usize,
    seed: u64,
) -> Result<Vec<ScenePlan>> {
    ranges.validate()?;
    if n > 0 && (speech_pool == 0 || noise_pool == 0) {
        return Err(Error::input("source pools must be non-empty"));
    }
    let tags = augmentation_schedule(n, &ranges.augmentation, seed)?;
    tags.into_iter()
        .enumerate()
        .map(|(i, augmentation)| {
            let scene_seed = derive_seed(seed, i as u64);
            let mut rng = substream(scene_seed, 1);
            let nearend_source = rng.random_range(0..speech_pool);
            let farend_source = if speech_pool > 1 {
                (nearend_source + rng.random_range(1..speech_pool)) % speech_pool
            } else {
                0
            };
            let noise_source = rng.random_range(0..noise_pool);
            let nonlinearity = if rng.random_bool(ranges.nonlinear_fraction) {
                Nonlinearity::default()
            } else {
                Nonlinearity::Identity
            };
            let config = SceneConfig {
                ser_db: uniform(&mut rng, ranges.ser_db),
                snr_db: uniform(&mut rng, ranges.snr_db),
                room: plan_room(&mut rng, ranges, scene_seed)?,
                nonlinearity,
                duration_s: ranges.duration_s,
                augmentation,
                seed: scene_seed,
            };
            Ok(ScenePlan {
                index: i,
                id: format!("scene_{i:05}"),
                nearend_source,
                farend_source,
                noise_source,
                config,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_scenes_get_one_of_each_augmentation() {
        let tags = augmentation_schedule(16, &AugmentationFractions::default(), 1).unwrap();
        let count = |t| tags.iter().filter(|a| **a == t).count();
        assert_eq!(count(Augmentation::DropNearend), 1);
        assert_eq!(count(Augmentation::DropFarend), 1);
        assert_eq!(count(Augmentation::DryNearend), 1);
        assert_eq!(count(Augmentation::None), 13);
    }

    #[test]
    fn large_counts_follow_floor_rule() {
        let tags = augmentation_schedule(1000, &AugmentationFractions::default(), 9).unwrap();
        let count = |t| tags.iter().filter(|a| **a == t).count();
        assert_eq!(
            (
                count(Augmentation::DropNearend),
                count(Augmentation::DropFarend)
            ),
            (62, 62)
        );
        assert_eq!(count(Augmentation::DryNearend), 100);
    }

    #[test]
    fn plans_are_deterministic_valid_and_empty_ok() {
        let ranges = SamplingRanges::default();
        let a = plan_dataset(20, &ranges, 5, 3, 77).unwrap();
        assert_eq!(a, plan_dataset(20, &ranges, 5, 3, 77).unwrap());
        for p in &a {
            p.config.validate().unwrap();
            assert_ne!(p.nearend_source, p.farend_source);
            assert!((-10.0..=10.0).contains(&p.config.ser_db));
            assert!((0.2..=0.7).contains(&p.config.room.rt60));
        }
        assert!(plan_dataset(0, &ranges, 0, 0, 1).unwrap().is_empty());
        assert!(plan_dataset(3, &ranges, 0, 1, 1).is_err());
    }
}
