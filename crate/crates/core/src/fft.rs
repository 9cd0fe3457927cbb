//! Radix-2 complex FFT.
//!
//! Every transform in the toolkit runs on power-of-two sizes (STFT frames,
//! FDKF blocks, zero-padded correlations and convolutions), so an iterative
//! in-place Cooley-Tukey kernel with precomputed twiddles is all we need.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::config(alloc::format!(
                "FFT size {n} is not a power of two"
            )));
        }
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(a.cos(), a.sin())
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (32 - bits)
                }
            })
            .collect();
        Ok(FftPlan {
            n,
            twiddles,
            bitrev,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform, `X[k] = sum x[n] e^{-j 2 pi k n / N}`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, false);
    }

    /// Unnormalized inverse transform (no `1/N`).
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, true);
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        assert_eq!(buf.len(), self.n, "FFT buffer length");
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    /// Forward transform of a real sequence, zero-padded to the plan size.
    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf = alloc::vec![Complex64::new(0.0, 0.0); self.n];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform returning the real part scaled by `1/N`.
    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut spec);
        let scale = 1.0 / self.n as f64;
        spec.iter().map(|c| c.re * scale).collect()
    }
}

/// Linear convolution via zero-padded FFT, output length `a.len() + b.len() - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    // Short kernels are cheaper (and exact in ordering) in the time domain.
    if a.len().min(b.len()) <= 32 {
        let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
        let mut out = alloc::vec![0.0; out_len];
        for (i, &s) in short.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for (o, &l) in out[i..].iter_mut().zip(long) {
                *o += s * l;
            }
        }
        return out;
    }
    let plan = FftPlan::new(next_pow2(out_len)).expect("power of two");
    let fa = plan.forward_real(a);
    let fb = plan.forward_real(b);
    let prod = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    let mut out = plan.inverse_real(prod);
    out.truncate(out_len);
    out
}
