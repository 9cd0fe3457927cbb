use echodiff_core::model::{subpixel_downsample, subpixel_upsample, ModelSpec, Tensor3, UNet, UNetSpec, BASE_CHANNELS};
use echodiff_core::rng::{gaussian_vec, stream};
use proptest::prelude::*;

fn indexed(c: usize, t: usize, f: usize) -> Tensor3 {
    Tensor3::from_vec(c, t, f, (0..c * t * f).map(|i| i as f32).collect()).unwrap()
}

#[test]
fn subpixel_shuffle_is_a_bijection_on_small_shapes() {
    for r in 1..=3 {
        for c in 1..=3 {
            for t in 1..=3 {
                for f in 1..=4 {
                    let x = indexed(c * r, t, f);
                    let up = subpixel_upsample(&x, r).unwrap();
                    assert_eq!(up.shape(), (c, t, f * r));
                    let mut seen: Vec<f32> = up.data().to_vec();
                    seen.sort_by(f32::total_cmp);
                    assert_eq!(seen, x.data(), "not a permutation at r={r} c={c} t={t} f={f}");
                    assert_eq!(subpixel_downsample(&up, r).unwrap(), x);
                    let y = indexed(c, t, f * r);
                    assert_eq!(subpixel_upsample(&subpixel_downsample(&y, r).unwrap(), r).unwrap(), y);
                }
            }
        }
    }
}

#[test]
fn encoder_decoder_frequency_contract() {
    let spec = UNetSpec::cond(&BASE_CHANNELS);
    assert_eq!(spec.freq_sizes(), vec![260, 130, 65, 33, 17]);
    assert_eq!(ModelSpec::base().cond.channels, BASE_CHANNELS.to_vec());
    assert!(ModelSpec::small().n_params() < ModelSpec::base().n_params());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn forward_is_deterministic_and_restores_bins(seed in any::<u64>(), frames in 1usize..6) {
        let spec = ModelSpec::small();
        let w = spec.random_weights(seed).unwrap();
        let net = UNet::new(spec.cond.clone(), "cond", &w).unwrap();
        let input = Tensor3::from_vec(4, frames, 260, gaussian_vec(&mut stream(seed), 4 * frames * 260, 1.0).into_iter().map(|v| v as f32).collect()).unwrap();
        let a = net.forward(&w, &input).unwrap();
        let b = net.forward(&w, &input).unwrap();
        prop_assert_eq!(a.output.shape(), (2, frames, 260));
        prop_assert!(a.output.data().iter().zip(b.output.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
