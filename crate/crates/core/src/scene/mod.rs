//! Synthetic hands-free scenes: the microphone picks up reverberant
//! near-end speech, a loudspeaker echo of the nonlinearly distorted far-end
//! signal, and background noise.

mod mix;
mod nonlinearity;
mod plan;
mod rir;
pub mod sources;

pub use mix::{gain_for_ratio, mix_scene, Augmentation, SceneBundle, SceneConfig};
pub use nonlinearity::{apply_nonlinearity, Nonlinearity};
pub use plan::{
    augmentation_schedule, plan_dataset, AugmentationFractions, SamplingRanges, ScenePlan,
};
pub use rir::{
    generate_rir, generate_rir_pair, schroeder_rt60, AbsorptionModel, Point, RoomSpec,
    MIN_SOURCE_DISTANCE, SPEED_OF_SOUND,
};
