use alloc::vec::Vec;
use rand::Rng;

use super::NoiseSchedule;
use crate::rng::gaussian_vec;
use crate::signal::{stft, Spectrogram, Waveform};
use crate::{Error, Result};

/// A (possibly conditional) estimate of the score `grad log p_t(S_t | C)`.
///
/// Implementations must return a spectrogram of the input's shape. Plain
/// closures `Fn(&Spectrogram, f64, &C) -> Result<Spectrogram>` implement the
/// trait, which is how tests plug in oracle scores.
pub trait ScoreModel<C: ?Sized> {
    fn score(&self, state: &Spectrogram, sigma: f64, cond: &C) -> Result<Spectrogram>;
}

impl<C: ?Sized, F> ScoreModel<C> for F
where
    F: Fn(&Spectrogram, f64, &C) -> Result<Spectrogram>,
{
    fn score(&self, state: &Spectrogram, sigma: f64, cond: &C) -> Result<Spectrogram> {
        self(state, sigma, cond)
    }
}

/// Evaluates a score model and checks the output contract.
pub(crate) fn checked_score<C: ?Sized, M: ScoreModel<C> + ?Sized>(
    model: &M,
    state: &Spectrogram,
    sigma: f64,
    cond: &C,
) -> Result<Spectrogram> {
    let out = model.score(state, sigma, cond)?;
    state.check_shape(&out)?;
    if let Some(index) = out
        .data()
        .iter()
        .position(|c| !c.re.is_finite() || !c.im.is_finite())
    {
        return Err(Error::NonFinite {
            what: "score output",
            index,
        });
    }
    Ok(out)
}

/// STFT of standard Gaussian time-domain noise, shaped like `like`.
pub fn noise_like<R: Rng + ?Sized>(like: &Spectrogram, rng: &mut R) -> Spectrogram {
    let z = gaussian_vec(rng, like.signal_len(), 1.0);
    let wave = Waveform::from_trusted(z, like.sample_rate_hz());
    stft(&wave, like.config()).expect("config already validated")
}

/// Forward perturbation `S_t = S + sigma(t) Z`; returns `(S_t, Z)`.
pub fn forward_perturb<R: Rng + ?Sized>(
    clean: &Spectrogram,
    t: f64,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<(Spectrogram, Spectrogram)> {
    let sigma = sched.sigma_at(t)?;
    let z = noise_like(clean, rng);
    let mut st = clean.clone();
    st.axpy(sigma, &z)?;
    Ok((st, z))
}

/// Exact score of `S_t` when the clean prior is zero-mean Gaussian with
/// variance `sigma_s^2` per entry: `-S_t / (sigma_s^2 + sigma_t^2)`.
pub fn analytic_gaussian_score(
    state: &Spectrogram,
    t: f64,
    sigma_s: f64,
    sched: &NoiseSchedule,
) -> Result<Spectrogram> {
    let sigma = sched.sigma_at(t)?;
    GaussianPriorScore::scalar(sigma_s)?.score(state, sigma, &())
}

/// Score of a zero-mean Gaussian prior, usable as a drop-in [`ScoreModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPriorScore {
    prior: Prior,
}

#[derive(Debug, Clone, PartialEq)]
enum Prior {
    Scalar(f64),
    PerEntry(Vec<f64>),
}

impl GaussianPriorScore {
    pub fn scalar(sigma_s: f64) -> Result<Self> {
        if !(sigma_s >= 0.0) || !sigma_s.is_finite() {
            return Err(Error::input(alloc::format!(
                "prior standard deviation must be >= 0, got {sigma_s}"
            )));
        }
        Ok(GaussianPriorScore {
            prior: Prior::Scalar(sigma_s * sigma_s),
        })
    }

    /// One prior variance per spectrogram entry (frame-major).
    pub fn per_entry(variances: Vec<f64>) -> Result<Self> {
        if variances.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::input("prior variances must be finite and >= 0"));
        }
        Ok(GaussianPriorScore {
            prior: Prior::PerEntry(variances),
        })
    }

    fn variance(&self, index: usize) -> f64 {
        match &self.prior {
            Prior::Scalar(v) => *v,
            Prior::PerEntry(v) => v[index],
        }
    }
}

impl<C: ?Sized> ScoreModel<C> for GaussianPriorScore {
    fn score(&self, state: &Spectrogram, sigma: f64, _cond: &C) -> Result<Spectrogram> {
        if let Prior::PerEntry(v) = &self.prior {
            if v.len() != state.data().len() {
                return Err(Error::shape(alloc::format!(
                    "prior has {} entries, state has {}",
                    v.len(),
                    state.data().len()
                )));
            }
        }
        let s2 = sigma * sigma;
        let data = state
            .data()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let denom = self.variance(i) + s2;
                if denom > 0.0 {
                    -c / denom
                } else {
                    num_complex::Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        state.with_data(data)
    }
}

/// Single-draw denoising score matching loss
/// `|| score(S + sigma Z | sigma, C) + Z / sigma ||^2` (summed over entries).
pub fn score_matching_loss<C: ?Sized, M: ScoreModel<C> + ?Sized, R: Rng + ?Sized>(
    model: &M,
    clean: &Spectrogram,
    cond: &C,
    t: f64,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<f64> {
    let sigma = sched.sigma_at(t)?;
    let z = noise_like(clean, rng);
    score_matching_loss_with_noise(model, clean, &z, sigma, cond)
}

/// [`score_matching_loss`] with an explicit noise draw.
pub fn score_matching_loss_with_noise<C: ?Sized, M: ScoreModel<C> + ?Sized>(
    model: &M,
    clean: &Spectrogram,
    noise: &Spectrogram,
    sigma: f64,
    cond: &C,
) -> Result<f64> {
    let mut st = clean.clone();
    st.axpy(sigma, noise)?;
    let mut residual = checked_score(model, &st, sigma, cond)?;
    residual.axpy(1.0 / sigma, noise)?;
    Ok(residual.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::signal::StftConfig;
    use num_complex::Complex64;
    use num_traits::Float;

    fn template(len: usize) -> Spectrogram {
        Spectrogram::zeros(StftConfig::default(), len, 16000)
    }

    #[test]
    fn noise_has_unit_variance_bins() {
        let like = template(64_000);
        let z = noise_like(&like, &mut rng::stream(1));
        // Interior frames, bins strictly between DC and Nyquist.
        let mut acc = 0.0;
        let mut n = 0;
        for l in 8..z.n_frames() - 8 {
            for k in 1..256 {
                acc += z.get(k, l).norm_sqr();
                n += 1;
            }
        }
        let var = acc / n as f64;
        assert!((var - 1.0).abs() < 0.02, "{var}");
        for l in 0..z.n_frames() {
            assert!(z.frame(l)[257..].iter().all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn perturbation_with_zero_noise_and_at_t0() {
        let sched = NoiseSchedule::default();
        let like = template(4000);
        let clean = noise_like(&like, &mut rng::stream(2));
        let zero = like.zeros_like();
        let mut st = clean.clone();
        st.axpy(sched.sigma_at(0.3).unwrap(), &zero).unwrap();
        assert_eq!(st, clean);

        let (st, z) = forward_perturb(&clean, 0.0, &sched, &mut rng::stream(3)).unwrap();
        let mut diff = st.clone();
        diff.axpy(-1.0, &clean).unwrap();
        assert!(diff.norm() <= sched.sigma_min * z.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn perturbation_variance_monte_carlo() {
        // Var(S_t - S) = sigma_t^2 Var(Z), estimated on one interior bin.
        let sched = NoiseSchedule::default();
        let like = template(2048);
        let clean = like.zeros_like();
        let sigma = sched.sigma_at(0.2).unwrap();
        let mut r = rng::stream(4);
        let (mut sd, mut sz) = (0.0, 0.0);
        for _ in 0..10_000 {
            let (st, z) = forward_perturb(&clean, 0.2, &sched, &mut r).unwrap();
            sd += (st.get(40, 8) - clean.get(40, 8)).norm_sqr();
            sz += z.get(40, 8).norm_sqr();
        }
        let ratio = sd / (sigma * sigma * sz);
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn analytic_score_cases() {
        let sched = NoiseSchedule::default();
        let like = template(2000);
        let st = noise_like(&like, &mut rng::stream(5));
        let t = 0.25;
        let sigma = sched.sigma_at(t).unwrap();
        let degenerate = analytic_gaussian_score(&st, t, 0.0, &sched).unwrap();
        for (a, b) in degenerate.data().iter().zip(st.data()) {
            assert!((a + b / (sigma * sigma)).norm() < 1e-9);
        }
        let zero = analytic_gaussian_score(&like, t, 0.7, &sched).unwrap();
        assert_eq!(zero.norm(), 0.0);
        assert!(analytic_gaussian_score(&st, t, -1.0, &sched).is_err());
    }

    #[test]
    fn analytic_score_matches_finite_difference_of_log_density() {
        // Circular complex Gaussian with E|s|^2 = v: log p(s) = -|s|^2 / v + c.
        // Scores are Wirtinger derivatives d/ds* = (d/dre + j d/dim) / 2, the
        // convention under which Tweedie reads E[S | S_t] = S_t + sigma^2 score.
        let sched = NoiseSchedule::default();
        let (sigma_s, t) = (0.3, 0.5);
        let sigma = sched.sigma_at(t).unwrap();
        let v = sigma_s * sigma_s + sigma * sigma;
        let log_p = |re: f64, im: f64| -(re * re + im * im) / v;
        let like = template(600);
        let st = noise_like(&like, &mut rng::stream(6)).scaled(0.4);
        let score = analytic_gaussian_score(&st, t, sigma_s, &sched).unwrap();
        let h = 1e-5;
        for (c, s) in st.data().iter().zip(score.data()).step_by(37) {
            let dre = (log_p(c.re + h, c.im) - log_p(c.re - h, c.im)) / (2.0 * h);
            let dim = (log_p(c.re, c.im + h) - log_p(c.re, c.im - h)) / (2.0 * h);
            assert!((Complex64::new(dre, dim) * 0.5 - s).norm() < 1e-6);
        }
    }

    #[test]
    fn loss_of_perfect_and_zero_scores() {
        let sched = NoiseSchedule::default();
        let like = template(3000);
        let clean = noise_like(&like, &mut rng::stream(7)).scaled(0.1);
        let t = sched.t_max;
        let sigma = sched.sigma_at(t).unwrap();
        let z = noise_like(&like, &mut rng::stream(8));

        let zc = z.clone();
        let perfect = move |_: &Spectrogram, s: f64, _: &()| Ok(zc.scaled(-1.0 / s));
        let loss = score_matching_loss_with_noise(&perfect, &clean, &z, sigma, &()).unwrap();
        assert!(loss < 1e-20);

        let zero = |s: &Spectrogram, _: f64, _: &()| Ok(s.zeros_like());
        let loss = score_matching_loss_with_noise(&zero, &clean, &z, sigma, &()).unwrap();
        let expect = z.norm_sqr() / (sigma * sigma);
        assert!((loss - expect).abs() < 1e-9 * expect);

        let nan = |s: &Spectrogram, _: f64, _: &()| {
            let mut o = s.zeros_like();
            o.data_mut()[3] = Complex64::new(f64::NAN, 0.0);
            Ok(o)
        };
        assert!(score_matching_loss(&nan, &clean, &(), t, &sched, &mut rng::stream(1)).is_err());
    }

    #[test]
    fn per_entry_prior_shape_checked() {
        let like = template(600);
        let prior = GaussianPriorScore::per_entry(alloc::vec![1.0; 3]).unwrap();
        assert!(prior.score(&like, 0.1, &()).is_err());
    }
}
