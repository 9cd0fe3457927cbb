use echodiff_core::classical::{fdkf_cancel, gcc_phat_delay, nlms_cancel, FdkfConfig, NlmsConfig};
use echodiff_core::rng::{gaussian_vec, stream};
use echodiff_core::Waveform;
use proptest::prelude::*;

fn wave(v: Vec<f64>) -> Waveform {
    Waveform::new(v, 16000).unwrap()
}

fn shifted(x: &[f64], lag: i64) -> Vec<f64> {
    (0..x.len() as i64)
        .map(|i| {
            let j = i - lag;
            if (0..x.len() as i64).contains(&j) {
                x[j as usize]
            } else {
                0.0
            }
        })
        .collect()
}

#[test]
fn gcc_phat_exact_for_every_small_lag() {
    let max_lag = 24;
    let x = gaussian_vec(&mut stream(5), 1024, 1.0);
    let reference = wave(x.clone());
    for lag in -(max_lag as i64)..=max_lag as i64 {
        let mic = wave(shifted(&x, lag));
        assert_eq!(gcc_phat_delay(&mic, &reference, max_lag).unwrap(), lag);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_reference_gives_zero_echo_estimate(seed in any::<u64>(), len in 600usize..4000) {
        let mic = wave(gaussian_vec(&mut stream(seed), len, 0.2));
        let zero = Waveform::zeros(len, 16000);
        let small_fdkf = FdkfConfig { block_len: 128, fft_len: 256, ..Default::default() };
        for out in [
            nlms_cancel(&mic, &zero, &NlmsConfig { taps: 64, ..Default::default() }).unwrap(),
            fdkf_cancel(&mic, &zero, &small_fdkf).unwrap(),
        ] {
            prop_assert!(out.echo_estimate.samples().iter().all(|v| *v == 0.0));
            prop_assert_eq!(out.residual.samples(), mic.samples());
        }
    }

    #[test]
    fn gcc_phat_recovers_random_shifts(seed in any::<u64>(), lag in -300i64..300) {
        let x = gaussian_vec(&mut stream(seed), 4096, 1.0);
        let mic = wave(shifted(&x, lag));
        prop_assert_eq!(gcc_phat_delay(&mic, &wave(x), 400).unwrap(), lag);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Block residual power after burn-in never rises by more than 1 dB.
    #[test]
    fn nlms_residual_power_non_increasing(seed in any::<u64>()) {
        let mut rng = stream(seed);
        let len = 32_000;
        let x = gaussian_vec(&mut rng, len, 0.3);
        let mut h = gaussian_vec(&mut rng, 96, 1.0);
        for (i, v) in h.iter_mut().enumerate() {
            *v *= (-(i as f64) / 20.0).exp();
        }
        let floor = gaussian_vec(&mut rng, len, 1e-4);
        let mic: Vec<f64> = (0..len)
            .map(|n| (0..h.len().min(n + 1)).map(|k| h[k] * x[n - k]).sum::<f64>() + floor[n])
            .collect();
        let out = nlms_cancel(&wave(mic), &wave(x), &NlmsConfig { taps: 128, ..Default::default() }).unwrap();
        let block = 1600;
        let powers: Vec<f64> = out.residual.samples().chunks(block).map(|c| c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64).collect();
        for w in powers[1..].windows(2) {
            prop_assert!(10.0 * (w[1] / w[0]).log10() < 1.0, "{:?}", powers);
        }
    }
}
