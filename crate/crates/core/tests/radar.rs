use proptest::prelude::*;
use rfaffect_core::synth::{
    body_motion, generate_dataset, simulate_rf_phase, DatasetOptions, EmotionProfile, MotionComponent, RadarConfig,
};
use rfaffect_core::{signal, TimeSeries};

fn quiet() -> RadarConfig {
    RadarConfig {
        noise_std: 0.0,
        ..RadarConfig::default()
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

#[test]
fn demodulation_recovers_motion() {
    let motion = body_motion(
        &[
            MotionComponent::new(0.005, 0.25, 0.3),
            MotionComponent::new(0.0005, 1.2, 1.0),
        ],
        0.05,
        0.0,
        50.0,
        60.0,
        4,
    )
    .unwrap();
    let cfg = quiet();
    let phase = simulate_rf_phase(&motion, &cfg, 1).unwrap();
    let k = -(2.0 / 299_792_458.0) * 2.0 * std::f64::consts::PI * cfg.carrier_frequency;
    let flat = signal::detrend(&phase).unwrap();
    let recovered: Vec<f64> = flat.samples().iter().map(|p| p / k).collect();
    let truth = signal::detrend(&motion).unwrap();
    assert!(pearson(&recovered, truth.samples()) > 0.999);
}

#[test]
fn five_millimetre_phase_amplitude() {
    let motion = body_motion(&[MotionComponent::new(0.005, 0.25, 0.0)], 0.0, 0.0, 100.0, 8.0, 0).unwrap();
    let phase = simulate_rf_phase(&motion, &quiet(), 0).unwrap();
    let peak = phase.samples().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    // 4 pi f_c A / c
    let want = 4.0 * std::f64::consts::PI * 5.8e9 * 0.005 / 299_792_458.0;
    assert!((peak - want).abs() < 1e-6 * want);
    assert!((peak - 1.215).abs() < 0.001 * 1.215, "{peak}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn phase_is_affine_in_motion(a in -4.0f64..4.0, offset in -3.0f64..3.0, seed in 0u64..100) {
        let m = body_motion(&[MotionComponent::new(0.004, 0.3, 0.0)], 0.1, 0.0, 20.0, 10.0, seed).unwrap();
        let scaled = m.map_samples(m.samples().iter().map(|v| a * v).collect()).unwrap();
        let cfg = RadarConfig { phase_offset: offset, ..quiet() };
        let p1 = simulate_rf_phase(&m, &cfg, 0).unwrap();
        let pa = simulate_rf_phase(&scaled, &cfg, 0).unwrap();
        for (x, y) in p1.samples().iter().zip(pa.samples()) {
            prop_assert!(((y - offset) - a * (x - offset)).abs() < 1e-12);
        }
    }
}

#[test]
fn dataset_is_balanced_and_seeded() {
    let radar = RadarConfig {
        duration: 20.0,
        ..RadarConfig::default()
    };
    let opts = DatasetOptions {
        with_ecg: false,
        ..DatasetOptions::default()
    };
    let a = generate_dataset(&EmotionProfile::defaults(), 3, &radar, &opts, 5).unwrap();
    assert_eq!(a.len(), 12);
    assert_eq!(a.class_counts(), [3, 3, 3, 3]);
    let b = generate_dataset(&EmotionProfile::defaults(), 3, &radar, &opts, 5).unwrap();
    let c = generate_dataset(&EmotionProfile::defaults(), 3, &radar, &opts, 6).unwrap();
    let rf =
        |d: &rfaffect_core::LabeledDataset| -> Vec<TimeSeries> { d.samples.iter().map(|s| s.rf.clone()).collect() };
    assert_eq!(rf(&a), rf(&b));
    assert_ne!(rf(&a), rf(&c));
}

#[test]
fn default_profiles_follow_documented_values() {
    let p = EmotionProfile::defaults();
    let got: Vec<(f64, f64, f64)> = p
        .iter()
        .map(|e| (e.breathing.frequency, e.breathing.amplitude, e.heart_rate_bpm()))
        .collect();
    let want = [
        (0.20, 0.006, 65.0),
        (0.35, 0.004, 95.0),
        (0.28, 0.005, 80.0),
        (0.30, 0.005, 85.0),
    ];
    for ((f, a, hr), (wf, wa, whr)) in got.iter().zip(want) {
        assert!((f - wf).abs() < 1e-12 && (a - wa).abs() < 1e-12 && (hr - whr).abs() < 1e-9);
    }
    assert!(p.iter().all(|e| (e.heartbeat.amplitude - 0.0005).abs() < 1e-15));
    assert!(p[2].burst_rate > 0.0);
}
