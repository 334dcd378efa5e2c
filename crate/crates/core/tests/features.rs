use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rfaffect_core::features::{
    band_power, detect_r_peaks, equal_frequency_bins, ibi_feature_names, ibi_features, mrmr_select, mutual_information,
    permutation_entropy, rf_feature_vector, MI_BINS, RF_FEATURE_NAMES,
};
use rfaffect_core::pipeline::{rf_features, EcgPreprocess, RfPreprocess};
use rfaffect_core::synth::{generate_dataset, synthesize_ecg, DatasetOptions, EmotionProfile, RadarConfig};
use rfaffect_core::transform::periodogram_slice;
use rfaffect_core::{Matrix, TimeSeries};

#[test]
fn permutation_entropy_hand_examples() {
    // patterns 012 x2, 201 x2, 102 x1
    let x = [4.0, 7.0, 9.0, 10.0, 6.0, 11.0, 3.0];
    let h = -(2.0 * 0.4 * 0.4_f64.ln() + 0.2 * 0.2_f64.ln()) / 6.0_f64.ln();
    assert!((permutation_entropy(&x, 3, 1).unwrap() - h).abs() < 1e-15);

    let ramp: Vec<f64> = (0..20).map(f64::from).collect();
    assert_eq!(permutation_entropy(&ramp, 3, 1).unwrap(), 0.0);

    // order 2 on an alternating series: up and down equally often
    let alt = [0.0, 1.0, 0.0, 1.0, 0.0];
    assert!((permutation_entropy(&alt, 2, 1).unwrap() - 1.0).abs() < 1e-15);

    // delay 2 picks every other sample, which is monotone here
    let zig = [0.0, 5.0, 1.0, 6.0, 2.0, 7.0, 3.0];
    assert_eq!(permutation_entropy(&zig, 3, 2).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn permutation_entropy_is_bounded(x in prop::collection::vec(-5.0f64..5.0, 10..200), order in 2usize..6) {
        let h = permutation_entropy(&x, order, 1).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn permutation_entropy_zero_iff_single_pattern(x in prop::collection::vec(-5.0f64..5.0, 8..60)) {
        let h = permutation_entropy(&x, 3, 1).unwrap();
        let mut patterns = std::collections::HashSet::new();
        for w in x.windows(3) {
            let mut idx = [0usize, 1, 2];
            idx.sort_by(|&a, &b| w[a].total_cmp(&w[b]));
            patterns.insert(idx);
        }
        prop_assert_eq!(h == 0.0, patterns.len() == 1);
    }

    #[test]
    fn band_power_is_additive(
        x in prop::collection::vec(-3.0f64..3.0, 16..400),
        a in 0.0f64..4.0,
        w1 in 0.01f64..4.0,
        w2 in 0.01f64..4.0,
    ) {
        let ps = periodogram_slice(&x, 20.0);
        let (b, c) = (a + w1, a + w1 + w2);
        let whole = band_power(&ps, a, c).unwrap().power;
        let parts = band_power(&ps, a, b).unwrap().power + band_power(&ps, b, c).unwrap().power;
        prop_assert!(whole >= 0.0);
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.max(1e-12));
    }
}

#[test]
fn ibi_registry_has_81_unique_names() {
    let names = ibi_feature_names();
    assert_eq!(names.len(), 81);
    let set: std::collections::HashSet<_> = names.iter().collect();
    assert_eq!(set.len(), 81);
}

#[test]
fn r_peaks_recover_rr_at_four_rates() {
    for bpm in [50.0, 60.0, 90.0, 120.0] {
        let rr = 60.0 / bpm;
        let fs = 250.0;
        let ecg = synthesize_ecg(bpm, 0.0, fs, 60.0, 3).unwrap();
        let ibi = detect_r_peaks(&ecg).unwrap();
        let mean = ibi.rr_intervals.iter().sum::<f64>() / ibi.rr_intervals.len() as f64;
        assert!((mean - rr).abs() <= 1.0 / fs, "{bpm} bpm raw: {mean}");

        let pre = EcgPreprocess {
            crop_seconds: 50.0,
            ..EcgPreprocess::default()
        };
        let ibi = detect_r_peaks(&pre.apply(&ecg).unwrap()).unwrap();
        let mean = ibi.rr_intervals.iter().sum::<f64>() / ibi.rr_intervals.len() as f64;
        assert!((mean - rr).abs() <= 1.0 / pre.sample_rate, "{bpm} bpm filtered: {mean}");
        for r in &ibi.rr_intervals {
            assert!((r - rr).abs() <= 1.0 / pre.sample_rate + 1e-9, "{bpm} bpm interval {r}");
        }
        assert_eq!(ibi_features(&ibi).unwrap().len(), 81);
    }
}

#[test]
fn mrmr_keeps_label_copy_and_noise_over_duplicate() {
    let mut rng = StdRng::seed_from_u64(7);
    let n = 200;
    let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| {
            let copy = l as f64;
            vec![copy, copy, rng.random_range(0.0..1.0)]
        })
        .collect();
    let x = Matrix::from_rows(&rows);
    let picked = mrmr_select(&x, &labels, 2).unwrap();
    assert_eq!(picked, vec![0, 2]);
}

#[test]
fn mrmr_first_pick_is_most_relevant() {
    let mut rng = StdRng::seed_from_u64(8);
    for trial in 0..10 {
        let n = 60;
        let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let x = Matrix::from_rows(
            &labels
                .iter()
                .map(|&l| {
                    (0..6)
                        .map(|j| l as f64 * j as f64 * 0.2 + rng.random_range(0.0..2.0))
                        .collect()
                })
                .collect::<Vec<Vec<f64>>>(),
        );
        let relevance: Vec<f64> = (0..6)
            .map(|c| mutual_information(&equal_frequency_bins(&x.column(c), MI_BINS), &labels))
            .collect();
        let best = (0..6).fold(0, |b, c| if relevance[c] > relevance[b] { c } else { b });
        let picked = mrmr_select(&x, &labels, 3).unwrap();
        assert_eq!(picked[0], best, "trial {trial}");
        assert_eq!(picked, mrmr_select(&x, &labels, 3).unwrap());
    }
}

#[test]
fn rf_schema_is_stable_across_samples() {
    let radar = RadarConfig {
        duration: 40.0,
        ..RadarConfig::default()
    };
    let opts = DatasetOptions {
        with_ecg: false,
        ..DatasetOptions::default()
    };
    let ds = generate_dataset(&EmotionProfile::defaults(), 2, &radar, &opts, 1).unwrap();
    let pre = RfPreprocess {
        crop_seconds: 30.0,
        ..RfPreprocess::default()
    };
    for s in &ds.samples {
        let fv = rf_features(s, &pre).unwrap();
        assert_eq!(
            fv.names,
            RF_FEATURE_NAMES.iter().map(|n| n.to_string()).collect::<Vec<_>>()
        );
        assert_eq!(fv.len(), 7);
        assert!(fv.values.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn constant_series_is_rejected() {
    let ts = TimeSeries::new(vec![1.0; 500], 50.0).unwrap();
    assert!(rf_feature_vector(&ts).is_err());
}

#[test]
fn permutation_entropy_is_bitwise_repeatable() {
    let mut rng = StdRng::seed_from_u64(9);
    let x: Vec<f64> = (0..2000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let first = permutation_entropy(&x, 5, 1).unwrap().to_bits();
    for _ in 0..20 {
        assert_eq!(permutation_entropy(&x, 5, 1).unwrap().to_bits(), first);
    }
}
