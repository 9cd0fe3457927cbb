//! EDM-style preconditioning of a raw denoising network.

#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;

use super::ScoreModel;
use crate::signal::Spectrogram;
use crate::{Error, Result};

/// Input, output and skip scalings for noise level `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdmScalings {
    pub c_skip: f64,
    pub c_out: f64,
    pub c_in: f64,
    pub c_noise: f64,
}

/// `c_skip = sd^2 / (s^2 + sd^2)`, `c_out = s sd / sqrt(s^2 + sd^2)`,
/// `c_in = 1 / sqrt(s^2 + sd^2)`, `c_noise = ln(s) / 4`.
pub fn edm_scalings(sigma: f64, sigma_data: f64) -> EdmScalings {
    let total = sigma * sigma + sigma_data * sigma_data;
    EdmScalings {
        c_skip: sigma_data * sigma_data / total,
        c_out: sigma * sigma_data / total.sqrt(),
        c_in: 1.0 / total.sqrt(),
        c_noise: sigma.ln() / 4.0,
    }
}

/// The network inside the preconditioning: maps `c_in * S_t` and the noise
/// embedding to a raw output `F`.
pub trait RawDenoiser<C: ?Sized> {
    fn forward(&self, scaled_input: &Spectrogram, c_noise: f64, cond: &C) -> Result<Spectrogram>;
}

impl<C: ?Sized, F> RawDenoiser<C> for F
where
    F: Fn(&Spectrogram, f64, &C) -> Result<Spectrogram>,
{
    fn forward(&self, scaled_input: &Spectrogram, c_noise: f64, cond: &C) -> Result<Spectrogram> {
        self(scaled_input, c_noise, cond)
    }
}

/// `D(S_t) = c_skip S_t + c_out F(c_in S_t, c_noise)` with the matching
/// score view `(D(S_t) - S_t) / sigma^2`.
#[derive(Debug, Clone)]
pub struct Preconditioned<N> {
    net: N,
    sigma_data: f64,
}

impl<N> Preconditioned<N> {
    pub fn new(net: N, sigma_data: f64) -> Result<Self> {
        if !(sigma_data > 0.0) || !sigma_data.is_finite() {
            return Err(Error::config(alloc::format!(
                "sigma_data must be positive, got {sigma_data}"
            )));
        }
        Ok(Preconditioned { net, sigma_data })
    }

    pub fn sigma_data(&self) -> f64 {
        self.sigma_data
    }

    pub fn net(&self) -> &N {
        &self.net
    }

    pub fn denoise<C: ?Sized>(
        &self,
        state: &Spectrogram,
        sigma: f64,
        cond: &C,
    ) -> Result<Spectrogram>
    where
        N: RawDenoiser<C>,
    {
        let sc = edm_scalings(sigma, self.sigma_data);
        let raw = self.net.forward(&state.scaled(sc.c_in), sc.c_noise, cond)?;
        state.check_shape(&raw)?;
        let mut out = state.scaled(sc.c_skip);
        out.axpy(sc.c_out, &raw)?;
        Ok(out)
    }
}

impl<C: ?Sized, N: RawDenoiser<C>> ScoreModel<C> for Preconditioned<N> {
    fn score(&self, state: &Spectrogram, sigma: f64, cond: &C) -> Result<Spectrogram> {
        let mut d = self.denoise(state, sigma, cond)?;
        d.axpy(-1.0, state)?;
        d.scale(1.0 / (sigma * sigma));
        Ok(d)
    }
}

/// RMS magnitude over the active (unpadded) bins of a set of clean spectrograms.
pub fn estimate_sigma_data(clean: &[Spectrogram]) -> Option<f64> {
    let (mut acc, mut n) = (0.0, 0usize);
    for s in clean {
        let active = s.config().active_bins();
        for l in 0..s.n_frames() {
            acc += s.frame(l)[..active]
                .iter()
                .map(|c| c.norm_sqr())
                .sum::<f64>();
            n += active;
        }
    }
    (n > 0 && acc > 0.0).then(|| (acc / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::noise_like;
    use crate::rng;
    use crate::signal::StftConfig;

    fn zero_net(s: &Spectrogram, _: f64, _: &()) -> Result<Spectrogram> {
        Ok(s.zeros_like())
    }

    #[test]
    fn small_sigma_limit_is_identity() {
        let sc = edm_scalings(1e-8, 0.5);
        assert!((sc.c_skip - 1.0).abs() < 1e-12);
        assert!(sc.c_out < 1e-7);
    }

    #[test]
    fn unit_variance_input_at_sigma_data() {
        let sd = 0.5;
        let sc = edm_scalings(sd, sd);
        assert!((sc.c_in * sc.c_in * (2.0 * sd * sd) - 1.0).abs() < 1e-15);
        // Monte Carlo: clean ~ sd, noise ~ sigma, scaled input ~ unit variance.
        let like = Spectrogram::zeros(StftConfig::default(), 64_000, 16000);
        let clean = noise_like(&like, &mut rng::stream(1)).scaled(sd);
        let noisy =
            crate::diffusion::perturb(&clean, sd, &noise_like(&like, &mut rng::stream(2))).unwrap();
        let scaled = noisy.scaled(sc.c_in);
        let (mut acc, mut n) = (0.0, 0);
        for l in 8..scaled.n_frames() - 8 {
            for k in 1..256 {
                acc += scaled.get(k, l).norm_sqr();
                n += 1;
            }
        }
        assert!((acc / n as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn zero_network_gives_skip_only() {
        let like = Spectrogram::zeros(StftConfig::default(), 3000, 16000);
        let st = noise_like(&like, &mut rng::stream(3));
        let p = Preconditioned::new(zero_net, 0.5).unwrap();
        let sigma = 0.2;
        let d = p.denoise(&st, sigma, &()).unwrap();
        assert_eq!(d, st.scaled(edm_scalings(sigma, 0.5).c_skip));
        // Score view agrees with the denoiser view.
        let score = p.score(&st, sigma, &()).unwrap();
        let mut back = st.clone();
        back.axpy(sigma * sigma, &score).unwrap();
        for (a, b) in back.data().iter().zip(d.data()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_sigma_data_and_estimates_rms() {
        assert!(Preconditioned::new(zero_net, 0.0).is_err());
        let like = Spectrogram::zeros(StftConfig::default(), 64_000, 16000);
        let clean = noise_like(&like, &mut rng::stream(4)).scaled(0.3);
        let est = estimate_sigma_data(&[clean]).unwrap();
        assert!((est - 0.3).abs() < 0.02, "{est}");
        assert!(estimate_sigma_data(&[]).is_none());
    }
}
