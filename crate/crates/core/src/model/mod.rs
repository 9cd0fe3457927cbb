//! Network engine: U-Net forward passes over loadable weights, the hybrid
//! conditioner plus score model, and a trainable per-bin toy scorer.

mod hybrid;
mod tensor;
mod toy;
mod unet;
mod weights;

pub use hybrid::{channels_to_spectrogram, spectrogram_to_channels, Conditioning, HybridModel, ScoreNet};
pub use tensor::{
    channel_norm, conv2d, conv_out_freqs, prelu, subpixel_downsample, subpixel_upsample, ConvShape, Tensor3,
};
pub use toy::{dft_noise_rows, toy_train, ToyScorer, ToyTrainConfig, ToyTrainReport};
pub use unet::{
    Activation, ModelSpec, NormKind, UNet, UNetOutput, UNetSpec, BASE_CHANNELS, SMALL_CHANNELS,
};
pub use weights::{NamedTensor, TensorEntry, WeightContainer};
