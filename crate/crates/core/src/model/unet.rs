//! U-Net with strided-convolution downsampling blocks and subpixel
//! upsampling blocks over `(channels, frames, bins)` feature maps.
//!
//! Per level `l` with `C_l` channels:
//! - `down{l}`: residual conv `C_l -> C_l`, then a conv `C_l -> C_{l+1}` with
//!   frequency stride, normalization and activation.
//! - `up{l}`: residual conv `C_l -> C_l`, conv `C_l -> 2 C_{l-1}`, subpixel
//!   shuffle doubling the bins, center crop to the skip size, normalization,
//!   activation, then the encoder skip is added.
//!
//! Input and output convolutions are unstrided.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{channel_norm, conv2d, conv_out_freqs, prelu, subpixel_upsample, ConvShape, Tensor3};
use super::weights::{NamedTensor, WeightContainer};
use crate::rng::stream;
use crate::{Error, Result};

pub const BASE_CHANNELS: [usize; 5] = [11, 16, 23, 33, 50];
pub const SMALL_CHANNELS: [usize; 5] = [11, 15, 21, 29, 40];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Prelu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    None,
    /// Learned per-channel scale and shift.
    Affine,
    /// Per-channel standardization over time and frequency, then affine.
    #[default]
    Instance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UNetSpec {
    pub channels: Vec<usize>,
    /// `(k_T, k_F)`.
    pub kernel: [usize; 2],
    pub stride_f: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub input_bins: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub norm: NormKind,
    pub bias: bool,
}

impl UNetSpec {
    fn with_io(channels: &[usize], in_channels: usize, out_channels: usize) -> Self {
        UNetSpec {
            channels: channels.to_vec(),
            kernel: [3, 5],
            stride_f: 2,
            in_channels,
            out_channels,
            input_bins: 260,
            activation: Activation::Prelu,
            norm: NormKind::Instance,
            bias: true,
        }
    }

    /// Conditioner: input `Re Y, Im Y, Re X, Im X`, output `Re, Im` of the
    /// near-end estimate.
    pub fn cond(channels: &[usize]) -> Self {
        Self::with_io(channels, 4, 2)
    }

    /// Score network: scaled state (2), conditioner features (`C_0`) and a
    /// noise-level plane (1).
    pub fn score(channels: &[usize]) -> Self {
        Self::with_io(channels, 2 + channels[0] + 1, 2)
    }

    pub fn n_levels(&self) -> usize {
        self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() < 2 {
            return Err(Error::config("a U-Net needs at least two levels"));
        }
        if self.channels.windows(2).any(|w| w[1] <= w[0]) || self.channels[0] == 0 {
            return Err(Error::config(format!(
                "channels {:?} must be positive and strictly increasing",
                self.channels
            )));
        }
        if self.kernel.iter().any(|k| k % 2 == 0) || self.stride_f == 0 {
            return Err(Error::config("kernel sizes must be odd and the stride positive"));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::config("input and output channel counts must be positive"));
        }
        if self.freq_sizes().contains(&0) || self.input_bins == 0 {
            return Err(Error::config("input bins too small for the number of levels"));
        }
        Ok(())
    }

    /// Frequency size at each encoder level (ceil rule).
    pub fn freq_sizes(&self) -> Vec<usize> {
        let mut sizes = alloc::vec![self.input_bins];
        for _ in 1..self.channels.len() {
            let f = *sizes.last().unwrap_or(&0);
            sizes.push(conv_out_freqs(f, self.kernel[1], self.stride_f));
        }
        sizes
    }

    fn conv(&self, cout: usize, cin: usize) -> ConvShape {
        ConvShape { cout, cin, kt: self.kernel[0], kf: self.kernel[1] }
    }

    fn push_conv(&self, out: &mut Vec<(String, Vec<usize>)>, name: &str, s: ConvShape) {
        out.push((format!("{name}.weight"), alloc::vec![s.cout, s.cin, s.kt, s.kf]));
        if self.bias {
            out.push((format!("{name}.bias"), alloc::vec![s.cout]));
        }
    }

    fn push_act(&self, out: &mut Vec<(String, Vec<usize>)>, name: &str, c: usize) {
        if self.activation == Activation::Prelu {
            out.push((format!("{name}.act"), alloc::vec![c]));
        }
    }

    fn push_norm(&self, out: &mut Vec<(String, Vec<usize>)>, name: &str, c: usize) {
        if self.norm != NormKind::None {
            out.push((format!("{name}.norm.scale"), alloc::vec![c]));
            out.push((format!("{name}.norm.shift"), alloc::vec![c]));
        }
    }

    /// Every parameter tensor with its shape, names prefixed by `prefix.`.
    pub fn param_shapes(&self, prefix: &str) -> Vec<(String, Vec<usize>)> {
        let c = &self.channels;
        let mut out = Vec::new();
        let p = |s: &str| format!("{prefix}.{s}");
        self.push_conv(&mut out, &p("in"), self.conv(c[0], self.in_channels));
        self.push_act(&mut out, &p("in"), c[0]);
        for l in 0..c.len() - 1 {
            let name = p(&format!("down{l}"));
            self.push_conv(&mut out, &format!("{name}.res"), self.conv(c[l], c[l]));
            self.push_act(&mut out, &format!("{name}.res"), c[l]);
            self.push_conv(&mut out, &format!("{name}.conv"), self.conv(c[l + 1], c[l]));
            self.push_norm(&mut out, &name, c[l + 1]);
            self.push_act(&mut out, &name, c[l + 1]);
        }
        for l in (1..c.len()).rev() {
            let name = p(&format!("up{l}"));
            self.push_conv(&mut out, &format!("{name}.res"), self.conv(c[l], c[l]));
            self.push_act(&mut out, &format!("{name}.res"), c[l]);
            self.push_conv(&mut out, &format!("{name}.conv"), self.conv(self.stride_f * c[l - 1], c[l]));
            self.push_norm(&mut out, &name, c[l - 1]);
            self.push_act(&mut out, &name, c[l - 1]);
        }
        self.push_conv(&mut out, &p("out"), self.conv(self.out_channels, c[0]));
        out
    }

    pub fn n_params(&self) -> usize {
        self.param_shapes("net").iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }
}

/// Both networks of the hybrid model and the preconditioning data scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub cond: UNetSpec,
    pub score: UNetSpec,
    pub sigma_data: f64,
}

impl ModelSpec {
    pub fn from_channels(channels: &[usize]) -> Self {
        ModelSpec { cond: UNetSpec::cond(channels), score: UNetSpec::score(channels), sigma_data: 0.5 }
    }

    pub fn base() -> Self {
        Self::from_channels(&BASE_CHANNELS)
    }

    pub fn small() -> Self {
        Self::from_channels(&SMALL_CHANNELS)
    }

    pub fn validate(&self) -> Result<()> {
        self.cond.validate()?;
        self.score.validate()?;
        if self.score.in_channels != 2 + self.cond.channels[0] + 1 {
            return Err(Error::config(
                "score input channels must equal 2 + conditioner features + 1",
            ));
        }
        if self.cond.input_bins != self.score.input_bins {
            return Err(Error::config("conditioner and score networks must share input bins"));
        }
        if !(self.sigma_data > 0.0) {
            return Err(Error::config("sigma_data must be positive"));
        }
        Ok(())
    }

    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut v = self.cond.param_shapes("cond");
        v.extend(self.score.param_shapes("score"));
        v
    }

    pub fn n_params(&self) -> usize {
        self.cond.n_params() + self.score.n_params()
    }

    /// Randomly initialized weights: He-uniform convolutions, zero biases,
    /// PReLU slopes 0.25, identity normalization.
    pub fn random_weights(&self, seed: u64) -> Result<WeightContainer> {
        self.validate()?;
        let mut rng = stream(seed);
        let mut wc = WeightContainer::new(Some(self.clone()));
        for (name, shape) in self.param_shapes() {
            let n: usize = shape.iter().product();
            let data: Vec<f32> = if name.ends_with(".weight") {
                let fan_in = (shape[1] * shape[2] * shape[3]) as f64;
                let bound = (6.0 / fan_in).sqrt();
                (0..n).map(|_| rng.random_range(-bound..bound) as f32).collect()
            } else if name.ends_with(".act") {
                alloc::vec![0.25; n]
            } else if name.ends_with(".norm.scale") {
                alloc::vec![1.0; n]
            } else {
                alloc::vec![0.0; n]
            };
            wc.insert(name, NamedTensor::new(shape, data)?)?;
        }
        Ok(wc)
    }

    /// All-zero weights with the right names and shapes.
    pub fn zero_weights(&self) -> Result<WeightContainer> {
        self.validate()?;
        let mut wc = WeightContainer::new(Some(self.clone()));
        for (name, shape) in self.param_shapes() {
            wc.insert(name, NamedTensor::zeros(shape))?;
        }
        Ok(wc)
    }
}

/// Output of one U-Net pass.
#[derive(Debug, Clone, PartialEq)]
pub struct UNetOutput {
    pub output: Tensor3,
    /// Decoder features feeding the output convolution (`C_0` channels).
    pub penultimate: Tensor3,
}

/// A U-Net bound to a parameter prefix inside a [`WeightContainer`].
#[derive(Debug, Clone, PartialEq)]
pub struct UNet {
    spec: UNetSpec,
    prefix: String,
}

impl UNet {
    /// Bind `spec` to `weights`, checking every tensor's presence and shape.
    pub fn new(spec: UNetSpec, prefix: &str, weights: &WeightContainer) -> Result<Self> {
        spec.validate()?;
        let mut missing = Vec::new();
        for (name, shape) in spec.param_shapes(prefix) {
            match weights.get(&name) {
                Ok(t) if t.shape == shape => {}
                Ok(t) => {
                    return Err(Error::shape(format!(
                        "tensor `{name}` has shape {:?}, expected {shape:?}",
                        t.shape
                    )))
                }
                Err(_) => missing.push(name),
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingTensor(missing.join(", ")));
        }
        Ok(UNet { spec, prefix: prefix.into() })
    }

    pub fn spec(&self) -> &UNetSpec {
        &self.spec
    }

    fn conv(&self, w: &WeightContainer, name: &str, x: &Tensor3, cout: usize, stride: usize) -> Result<Tensor3> {
        let shape = self.spec.conv(cout, x.channels());
        let weight = w.expect(&format!("{}.{name}.weight", self.prefix), &[shape.cout, shape.cin, shape.kt, shape.kf])?;
        let bias = if self.spec.bias {
            Some(w.expect(&format!("{}.{name}.bias", self.prefix), &[cout])?)
        } else {
            None
        };
        conv2d(x, shape, weight, bias, stride)
    }

    fn act(&self, w: &WeightContainer, name: &str, x: &mut Tensor3) -> Result<()> {
        if self.spec.activation == Activation::Prelu {
            prelu(x, w.expect(&format!("{}.{name}.act", self.prefix), &[x.channels()])?)?;
        }
        Ok(())
    }

    fn norm(&self, w: &WeightContainer, name: &str, x: &mut Tensor3) -> Result<()> {
        if self.spec.norm == NormKind::None {
            return Ok(());
        }
        let c = x.channels();
        let scale = w.expect(&format!("{}.{name}.norm.scale", self.prefix), &[c])?;
        let shift = w.expect(&format!("{}.{name}.norm.shift", self.prefix), &[c])?;
        channel_norm(x, scale, shift, self.spec.norm == NormKind::Instance)
    }

    fn residual(&self, w: &WeightContainer, name: &str, x: &Tensor3) -> Result<Tensor3> {
        let mut r = self.conv(w, &format!("{name}.res"), x, x.channels(), 1)?;
        self.act(w, &format!("{name}.res"), &mut r)?;
        r.add_assign(x)?;
        Ok(r)
    }

    pub fn forward(&self, w: &WeightContainer, input: &Tensor3) -> Result<UNetOutput> {
        let s = &self.spec;
        if input.channels() != s.in_channels || input.freqs() != s.input_bins {
            return Err(Error::shape(format!(
                "U-Net `{}` expects ({}, T, {}) input, got {:?}",
                self.prefix,
                s.in_channels,
                s.input_bins,
                input.shape()
            )));
        }
        let c = &s.channels;
        let mut x = self.conv(w, "in", input, c[0], 1)?;
        self.act(w, "in", &mut x)?;
        let mut skips = Vec::with_capacity(c.len());
        for l in 0..c.len() - 1 {
            let name = format!("down{l}");
            let r = self.residual(w, &name, &x)?;
            skips.push(x);
            let mut d = self.conv(w, &format!("{name}.conv"), &r, c[l + 1], s.stride_f)?;
            self.norm(w, &name, &mut d)?;
            self.act(w, &name, &mut d)?;
            x = d;
        }
        for l in (1..c.len()).rev() {
            let name = format!("up{l}");
            let r = self.residual(w, &name, &x)?;
            let u = self.conv(w, &format!("{name}.conv"), &r, s.stride_f * c[l - 1], 1)?;
            let skip = skips.pop().ok_or_else(|| Error::shape("missing skip connection"))?;
            let mut u = subpixel_upsample(&u, s.stride_f)?.fit_freqs(skip.freqs());
            self.norm(w, &name, &mut u)?;
            self.act(w, &name, &mut u)?;
            u.add_assign(&skip)?;
            x = u;
        }
        let output = self.conv(w, "out", &x, s.out_channels, 1)?;
        if let Some(i) = output.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "U-Net output", index: i });
        }
        Ok(UNetOutput { output, penultimate: x })
    }

    /// Frequency sizes seen by each decoder output, from deepest to level 0.
    pub fn decoder_freq_sizes(&self) -> Vec<usize> {
        let sizes = self.spec.freq_sizes();
        (0..sizes.len() - 1).rev().map(|l| sizes[l]).collect()
    }
}
