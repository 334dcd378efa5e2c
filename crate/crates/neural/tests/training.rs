use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rfaffect_neural::model::build_rf_model_with;
use rfaffect_neural::train::write_loss_csv;
use rfaffect_neural::{train, Model, NetSample, NnError, Optimizer, RfModelConfig, Tensor, TrainConfig};

fn tiny_model(seed: u64) -> Model {
    let cfg = RfModelConfig {
        filters: [4, 8],
        lstm_hidden: 8,
        ..RfModelConfig::default()
    };
    let mut m = build_rf_model_with(32, 2, (12, 12), 4, &cfg).unwrap();
    m.initialize(seed);
    m
}

fn random_samples(n: usize, seed: u64) -> Vec<NetSample> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|i| NetSample {
            inputs: vec![
                Tensor::new(vec![32, 2], (0..64).map(|_| rng.random_range(-1.0..1.0)).collect()),
                Tensor::new(vec![1, 12, 12], (0..144).map(|_| rng.random_range(0.0..1.0)).collect()),
            ],
            label: i % 4,
        })
        .collect()
}

#[test]
fn memorizes_four_samples() {
    let data = random_samples(4, 1);
    let mut m = tiny_model(2);
    let cfg = TrainConfig {
        epochs: 500,
        seed: 3,
        ..TrainConfig::default()
    };
    let trace = train(&mut m, &data, &cfg).unwrap();
    let best = trace.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(best < 0.05, "final {:?}", &trace[trace.len() - 5..]);
}

#[test]
fn single_sample_becomes_certain() {
    let data = random_samples(1, 4);
    let mut m = tiny_model(5);
    let cfg = TrainConfig {
        epochs: 300,
        ..TrainConfig::default()
    };
    train(&mut m, &data, &cfg).unwrap();
    let p = m.forward(&data[0].inputs).unwrap();
    assert!(p[data[0].label] > 0.99, "{p:?}");
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let data = random_samples(6, 6);
    let mut m = tiny_model(7);
    let before = m.params.clone();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        epochs: 4,
        ..TrainConfig::default()
    };
    let trace = train(&mut m, &data, &cfg).unwrap();
    assert_eq!(m.params, before);
    assert!(trace.iter().all(|&l| l == trace[0]));
}

#[test]
fn training_is_reproducible() {
    let data = random_samples(10, 8);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 3,
        seed: 99,
        ..TrainConfig::default()
    };
    let mut a = tiny_model(1);
    let mut b = tiny_model(1);
    assert_eq!(train(&mut a, &data, &cfg).unwrap(), train(&mut b, &data, &cfg).unwrap());
    assert_eq!(a.params, b.params);
}

#[test]
fn relabeling_with_matching_output_rows_keeps_the_trace() {
    let data = random_samples(8, 9);
    let perm = [2usize, 0, 3, 1];
    let mut a = tiny_model(10);
    let mut b = a.clone();
    // the head dense is the only dense layer: weights [4, in] then bias [4]
    let range = b.param_ranges_by_kind()["dense"][0].clone();
    let width = (range.len() - 4) / 4;
    let orig = a.params[range.clone()].to_vec();
    for c in 0..4 {
        let (src, dst) = (c * width, perm[c] * width);
        b.params[range.start + dst..range.start + dst + width].copy_from_slice(&orig[src..src + width]);
        b.params[range.start + 4 * width + perm[c]] = orig[4 * width + c];
    }
    let relabeled: Vec<NetSample> = data
        .iter()
        .map(|s| NetSample {
            inputs: s.inputs.clone(),
            label: perm[s.label],
        })
        .collect();
    let cfg = TrainConfig {
        epochs: 5,
        batch_size: 4,
        seed: 1,
        ..TrainConfig::default()
    };
    let ta = train(&mut a, &data, &cfg).unwrap();
    let tb = train(&mut b, &relabeled, &cfg).unwrap();
    for (x, y) in ta.iter().zip(&tb) {
        assert!((x - y).abs() < 1e-9 * x.abs().max(1.0), "{ta:?} vs {tb:?}");
    }
}

#[test]
fn sgd_reduces_loss() {
    let data = random_samples(4, 12);
    let mut m = tiny_model(13);
    let cfg = TrainConfig {
        optimizer: Optimizer::Sgd,
        learning_rate: 0.05,
        epochs: 60,
        ..TrainConfig::default()
    };
    let trace = train(&mut m, &data, &cfg).unwrap();
    assert!(trace[trace.len() - 1] < trace[0]);
}

#[test]
fn divergence_reports_learning_rate() {
    let mut data = random_samples(4, 14);
    for s in &mut data {
        s.inputs[1].data.iter_mut().for_each(|v| *v *= 1e6);
    }
    let mut m = tiny_model(15);
    let cfg = TrainConfig {
        optimizer: Optimizer::Sgd,
        learning_rate: 1e6,
        epochs: 50,
        ..TrainConfig::default()
    };
    match train(&mut m, &data, &cfg) {
        Err(NnError::NonFinite(msg)) => assert!(msg.contains("learning rate"), "{msg}"),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn rejects_bad_configs_and_labels() {
    let data = random_samples(2, 16);
    let mut m = tiny_model(17);
    let bad = TrainConfig {
        learning_rate: -1.0,
        ..TrainConfig::default()
    };
    assert!(matches!(train(&mut m, &data, &bad), Err(NnError::Config(_))));
    assert!(matches!(
        train(&mut m, &[], &TrainConfig::default()),
        Err(NnError::Config(_))
    ));
    let mut wrong = data.clone();
    wrong[0].label = 7;
    assert!(matches!(
        train(&mut m, &wrong, &TrainConfig::default()),
        Err(NnError::Label { label: 7, .. })
    ));
}

#[test]
fn loss_csv_counts_epochs_from_one() {
    let mut buf = Vec::new();
    write_loss_csv(&mut buf, &[1.5, 0.25]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "epoch,loss\n1,1.5\n2,0.25\n");
}

#[test]
fn checkpoint_round_trip_keeps_predictions() {
    let data = random_samples(2, 18);
    let m = tiny_model(19);
    let mut buf = Vec::new();
    m.save(&mut buf).unwrap();
    assert!(buf.starts_with(b"RFAFFECT-NN-v1\n"));
    let back = Model::load(&buf[..]).unwrap();
    assert_eq!(
        back.forward(&data[0].inputs).unwrap(),
        m.forward(&data[0].inputs).unwrap()
    );
    assert!(Model::load(&b"garbage\n"[..]).is_err());
}
