//! Dense `(channels, time, frequency)` feature maps and the layer kernels of
//! the U-Net.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;

use crate::{Error, Result};

/// Feature map stored channel-major with frequency contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    channels: usize,
    frames: usize,
    freqs: usize,
    data: Vec<f32>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, frames: usize, freqs: usize) -> Self {
        Tensor3 { channels, frames, freqs, data: alloc::vec![0.0; channels * frames * freqs] }
    }

    pub fn from_vec(channels: usize, frames: usize, freqs: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * frames * freqs {
            return Err(Error::shape(alloc::format!(
                "tensor ({channels}, {frames}, {freqs}) needs {} values, got {}",
                channels * frames * freqs,
                data.len()
            )));
        }
        Ok(Tensor3 { channels, frames, freqs, data })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.frames, self.freqs)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn freqs(&self) -> usize {
        self.freqs
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn idx(&self, c: usize, t: usize, f: usize) -> usize {
        (c * self.frames + t) * self.freqs + f
    }

    pub fn get(&self, c: usize, t: usize, f: usize) -> f32 {
        self.data[self.idx(c, t, f)]
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.frames * self.freqs;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.frames * self.freqs;
        &mut self.data[c * n..(c + 1) * n]
    }

    fn row(&self, c: usize, t: usize) -> &[f32] {
        let i = self.idx(c, t, 0);
        &self.data[i..i + self.freqs]
    }

    /// Stack along the channel axis.
    pub fn concat(parts: &[&Tensor3]) -> Result<Tensor3> {
        let first = parts.first().ok_or_else(|| Error::shape("nothing to concatenate"))?;
        let (t, f) = (first.frames, first.freqs);
        let mut data = Vec::new();
        let mut channels = 0;
        for p in parts {
            if p.frames != t || p.freqs != f {
                return Err(Error::shape(alloc::format!(
                    "cannot concatenate ({}, {}) with ({t}, {f})",
                    p.frames,
                    p.freqs
                )));
            }
            data.extend_from_slice(&p.data);
            channels += p.channels;
        }
        Ok(Tensor3 { channels, frames: t, freqs: f, data })
    }

    pub fn add_assign(&mut self, other: &Tensor3) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(alloc::format!(
                "cannot add {:?} to {:?}",
                other.shape(),
                self.shape()
            )));
        }
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn scale(&mut self, a: f32) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Center-crop or zero-pad the frequency axis to `target` bins. Crops
    /// drop `(F - target) / 2` bins from the low end; pads add
    /// `(target - F) / 2` zeros there.
    pub fn fit_freqs(&self, target: usize) -> Tensor3 {
        if target == self.freqs {
            return self.clone();
        }
        let mut out = Tensor3::zeros(self.channels, self.frames, target);
        for c in 0..self.channels {
            for t in 0..self.frames {
                let src = self.row(c, t);
                let o = out.idx(c, t, 0);
                let dst = &mut out.data[o..o + target];
                if self.freqs > target {
                    let off = (self.freqs - target) / 2;
                    dst.copy_from_slice(&src[off..off + target]);
                } else {
                    let off = (target - self.freqs) / 2;
                    dst[off..off + self.freqs].copy_from_slice(src);
                }
            }
        }
        out
    }
}

/// Output frequency size of a `kf`-wide convolution with `stride` and
/// padding `kf / 2`: `ceil(F / stride)` for odd kernels.
pub fn conv_out_freqs(freqs: usize, kf: usize, stride: usize) -> usize {
    (freqs + 2 * (kf / 2) - kf) / stride + 1
}

/// Shape of a convolution weight, `(out, in, k_t, k_f)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub cout: usize,
    pub cin: usize,
    pub kt: usize,
    pub kf: usize,
}

impl ConvShape {
    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * self.kt * self.kf
    }
}

/// 2-D convolution with "same" zero padding in time and frequency, stride 1
/// in time and `stride_f` in frequency.
pub fn conv2d(
    input: &Tensor3,
    shape: ConvShape,
    weight: &[f32],
    bias: Option<&[f32]>,
    stride_f: usize,
) -> Result<Tensor3> {
    if input.channels != shape.cin {
        return Err(Error::shape(alloc::format!(
            "convolution expects {} input channels, got {}",
            shape.cin,
            input.channels
        )));
    }
    if weight.len() != shape.weight_len() || bias.is_some_and(|b| b.len() != shape.cout) {
        return Err(Error::shape("convolution parameter length does not match its shape"));
    }
    if stride_f == 0 {
        return Err(Error::config("frequency stride must be positive"));
    }
    let (frames, freqs) = (input.frames, input.freqs);
    let fo_n = conv_out_freqs(freqs, shape.kf, stride_f);
    let mut out = Tensor3::zeros(shape.cout, frames, fo_n);
    let (pt, pf) = ((shape.kt / 2) as isize, (shape.kf / 2) as isize);
    for co in 0..shape.cout {
        if let Some(b) = bias {
            out.channel_mut(co).fill(b[co]);
        }
        for ci in 0..shape.cin {
            for dt in 0..shape.kt {
                for df in 0..shape.kf {
                    let w = weight[((co * shape.cin + ci) * shape.kt + dt) * shape.kf + df];
                    if w == 0.0 {
                        continue;
                    }
                    // Input bin for output fo is fo * s + df - pf.
                    let shift = df as isize - pf;
                    let fo_lo = if shift >= 0 { 0 } else { ((-shift) as usize).div_ceil(stride_f) };
                    let limit = freqs as isize - shift; // fo * s < limit
                    if limit <= 0 {
                        continue;
                    }
                    let fo_hi = (((limit - 1) as usize) / stride_f + 1).min(fo_n);
                    if fo_lo >= fo_hi {
                        continue;
                    }
                    for t in 0..frames {
                        let ti = t as isize + dt as isize - pt;
                        if ti < 0 || ti >= frames as isize {
                            continue;
                        }
                        let src_start = input.idx(ci, ti as usize, 0);
                        let dst_start = out.idx(co, t, 0);
                        let src = &input.data[src_start..src_start + freqs];
                        let dst = &mut out.data[dst_start..dst_start + fo_n];
                        if stride_f == 1 {
                            let s0 = (fo_lo as isize + shift) as usize;
                            let n = fo_hi - fo_lo;
                            for (d, s) in dst[fo_lo..fo_hi].iter_mut().zip(&src[s0..s0 + n]) {
                                *d += w * s;
                            }
                        } else {
                            for fo in fo_lo..fo_hi {
                                dst[fo] += w * src[(fo as isize * stride_f as isize + shift) as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Per-channel parametric ReLU.
pub fn prelu(x: &mut Tensor3, slopes: &[f32]) -> Result<()> {
    if slopes.len() != x.channels {
        return Err(Error::shape("PReLU needs one slope per channel"));
    }
    for (c, &a) in slopes.iter().enumerate() {
        x.channel_mut(c).iter_mut().for_each(|v| {
            if *v < 0.0 {
                *v *= a
            }
        });
    }
    Ok(())
}

/// Per-channel `x * scale + shift`, optionally after standardizing each
/// channel over time and frequency.
pub fn channel_norm(x: &mut Tensor3, scale: &[f32], shift: &[f32], standardize: bool) -> Result<()> {
    if scale.len() != x.channels || shift.len() != x.channels {
        return Err(Error::shape("normalization needs one scale and shift per channel"));
    }
    for c in 0..x.channels {
        let ch = x.channel_mut(c);
        let (mut a, mut b) = (scale[c], shift[c]);
        if standardize && !ch.is_empty() {
            let n = ch.len() as f64;
            let mean = ch.iter().map(|v| *v as f64).sum::<f64>() / n;
            let var = ch.iter().map(|v| (*v as f64 - mean).powi(2)).sum::<f64>() / n;
            let inv = 1.0 / (var + 1e-5).sqrt();
            b -= (mean * inv) as f32 * a;
            a *= inv as f32;
        }
        ch.iter_mut().for_each(|v| *v = *v * a + b);
    }
    Ok(())
}

/// Pixel shuffle along frequency: `(C r, T, F) -> (C, T, F r)` with
/// `out[c][t][f r + i] = in[c r + i][t][f]`.
pub fn subpixel_upsample(x: &Tensor3, factor: usize) -> Result<Tensor3> {
    if factor == 0 || !x.channels.is_multiple_of(factor) {
        return Err(Error::shape(alloc::format!(
            "{} channels are not divisible by subpixel factor {factor}",
            x.channels
        )));
    }
    let c_out = x.channels / factor;
    let mut out = Tensor3::zeros(c_out, x.frames, x.freqs * factor);
    for c in 0..c_out {
        for i in 0..factor {
            for t in 0..x.frames {
                let src = x.row(c * factor + i, t);
                let o = out.idx(c, t, 0);
                for (f, v) in src.iter().enumerate() {
                    out.data[o + f * factor + i] = *v;
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`subpixel_upsample`].
pub fn subpixel_downsample(x: &Tensor3, factor: usize) -> Result<Tensor3> {
    if factor == 0 || !x.freqs.is_multiple_of(factor) {
        return Err(Error::shape(alloc::format!(
            "{} bins are not divisible by subpixel factor {factor}",
            x.freqs
        )));
    }
    let f_out = x.freqs / factor;
    let mut out = Tensor3::zeros(x.channels * factor, x.frames, f_out);
    for c in 0..x.channels {
        for i in 0..factor {
            for t in 0..x.frames {
                let src = x.row(c, t);
                let o = out.idx(c * factor + i, t, 0);
                for f in 0..f_out {
                    out.data[o + f] = src[f * factor + i];
                }
            }
        }
    }
    Ok(out)
}
