use echodiff_core::scene::sources::{synth_noise, synth_speech, NoiseKind};
use echodiff_core::scene::{
    augmentation_schedule, generate_rir, mix_scene, plan_dataset, schroeder_rt60, Augmentation, AugmentationFractions,
    Nonlinearity, RoomSpec, SamplingRanges,
};
use proptest::prelude::*;

fn ranges() -> SamplingRanges {
    SamplingRanges { duration_s: 1.0, ..Default::default() }
}

fn augmentation() -> impl Strategy<Value = Augmentation> {
    prop_oneof![
        Just(Augmentation::None),
        Just(Augmentation::DropNearend),
        Just(Augmentation::DropFarend),
        Just(Augmentation::DryNearend),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn achieved_ratios_and_exact_additivity(
        seed in any::<u64>(),
        ser in -15.0f64..15.0,
        snr in -5.0f64..40.0,
        distort in any::<bool>(),
        aug in augmentation(),
    ) {
        let mut cfg = plan_dataset(1, &ranges(), 4, 3, seed).unwrap().remove(0).config;
        cfg.ser_db = ser;
        cfg.snr_db = snr;
        cfg.augmentation = aug;
        cfg.nonlinearity = if distort { Nonlinearity::default() } else { Nonlinearity::Identity };
        let s = synth_speech(seed ^ 1, 1.5, 16000);
        let x = synth_speech(seed ^ 2, 1.5, 16000);
        let v = synth_noise(seed ^ 3, 1.5, 16000, NoiseKind::Pink);
        let b = mix_scene(&s, &x, &v, &cfg).unwrap();
        if aug == Augmentation::DropFarend {
            prop_assert!(b.achieved_ser_db == f64::INFINITY);
            prop_assert!(b.echo.samples().iter().all(|e| *e == 0.0));
        } else {
            prop_assert!((b.achieved_ser_db - ser).abs() < 0.1, "SER {} vs {}", b.achieved_ser_db, ser);
        }
        prop_assert!((b.achieved_snr_db - snr).abs() < 0.1, "SNR {} vs {}", b.achieved_snr_db, snr);
        let (m, t, e, n) = (b.mic.samples(), b.target.samples(), b.echo.samples(), b.noise.samples());
        for i in 0..m.len() {
            prop_assert!(m[i] - (t[i] + e[i] + n[i]) == 0.0);
        }
        prop_assert_eq!(mix_scene(&s, &x, &v, &cfg).unwrap(), b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rir_decay_matches_requested_rt60(seed in any::<u64>(), rt60 in 0.25f64..0.6) {
        let room = RoomSpec {
            dimensions: [6.0, 5.0, 3.0],
            rt60,
            max_reflection_order: None,
            source_pos: [2.0, 2.5, 1.2],
            mic_pos: [4.1, 3.0, 1.4],
            nearend_pos: [1.5, 1.0, 1.6],
            seed,
            absorption_model: Default::default(),
        };
        let h = generate_rir(&room, &room.source_pos, &room.mic_pos, 16000).unwrap();
        let measured = schroeder_rt60(&h).unwrap();
        prop_assert!((measured / rt60 - 1.0).abs() < 0.2, "{} vs {}", measured, rt60);
    }

    #[test]
    fn plans_are_reproducible_and_tagged_by_fraction(seed in any::<u64>(), n in 0usize..400) {
        let fr = AugmentationFractions::default();
        let tags = augmentation_schedule(n, &fr, seed).unwrap();
        let count = |a| tags.iter().filter(|t| **t == a).count();
        prop_assert_eq!(count(Augmentation::DropNearend), (n as f64 * 0.0625).floor() as usize);
        prop_assert_eq!(count(Augmentation::DropFarend), (n as f64 * 0.0625).floor() as usize);
        prop_assert_eq!(count(Augmentation::DryNearend), (n as f64 * 0.10).floor() as usize);
        let r = ranges();
        prop_assert_eq!(plan_dataset(n.min(20), &r, 5, 2, seed).unwrap(), plan_dataset(n.min(20), &r, 5, 2, seed).unwrap());
    }
}
