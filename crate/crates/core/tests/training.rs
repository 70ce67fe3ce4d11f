use igb_lab::data::{generate_blobs, split, BlobSpec, Dataset, Provenance};
use igb_lab::diagnostics::evaluate;
use igb_lab::losses::{finite_diff_oracle, max_relative_error, LossSpec, PZ_EXCLUSION};
use igb_lab::model::{Activation, Layer, MlpModel, ModelConfig};
use igb_lab::numerics::{softmax, Matrix, Rng};
use igb_lab::trainer::{train, TrainConfig};

fn model_config(input_dim: usize, depth: usize, width: usize, k: usize, seed: u64) -> ModelConfig {
    ModelConfig {
        input_dim,
        hidden_width: width,
        depth,
        num_classes: k,
        activation: Activation::Relu,
        seed,
    }
}

#[test]
fn logit_gradients_match_oracle_on_random_cases() {
    let mut rng = Rng::new(2718);
    let specs = [
        LossSpec::CrossEntropy,
        LossSpec::Blurry { gamma: 0.3 },
        LossSpec::Blurry { gamma: 0.7 },
        LossSpec::PiecewiseZero { cutoff: 0.1 },
        LossSpec::PiecewiseZero { cutoff: 0.3 },
    ];
    let h = 1e-6;
    let mut checked = 0;
    for i in 0..100 {
        let spec = specs[i % specs.len()];
        let k = 2 + rng.below(9);
        let z: Vec<f64> = (0..k).map(|_| 1.5 * rng.normal()).collect();
        let label = rng.below(k);
        let probs = softmax(&z);
        if spec
            .cutoff()
            .is_some_and(|c| (probs[label] - c).abs() < 10.0 * h)
        {
            continue;
        }
        let analytic = spec.grad_logits(&probs, label).unwrap();
        let numeric = finite_diff_oracle(&spec, softmax, &z, label, h).unwrap();
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < 1e-5, "{spec:?} case {i}: {err}");
        checked += 1;
    }
    assert!(checked >= 95);
}

fn batch_loss(m: &MlpModel, x: &Matrix, labels: &[usize], spec: &LossSpec) -> f64 {
    let p = m.predict(x).unwrap();
    labels
        .iter()
        .enumerate()
        .map(|(i, &y)| spec.value(p.get(i, y)).unwrap())
        .sum::<f64>()
        / labels.len() as f64
}

#[test]
fn end_to_end_backprop_matches_finite_differences() {
    let mut m = MlpModel::new(model_config(5, 2, 8, 4, 99)).unwrap();
    for l in m.layers_mut() {
        for (i, b) in l.bias.iter_mut().enumerate() {
            *b = 0.05 * i as f64;
        }
    }
    let mut rng = Rng::new(5);
    let x = Matrix::from_vec(4, 5, (0..20).map(|_| rng.normal()).collect()).unwrap();
    let labels = [0, 1, 2, 3];
    for spec in [
        LossSpec::CrossEntropy,
        LossSpec::Blurry { gamma: 0.7 },
        LossSpec::PiecewiseZero { cutoff: 0.1 },
    ] {
        let t = m.forward(&x).unwrap();
        for (i, &y) in labels.iter().enumerate() {
            assert!((t.probs.get(i, y) - 0.1).abs() > PZ_EXCLUSION);
        }
        let (_, dz) = spec.batch_loss_and_grad(&t.probs, &labels).unwrap();
        let g = m.backward(&t, &dz).unwrap();
        for li in 0..m.layers().len() {
            let mut numeric = Vec::new();
            let mut analytic = Vec::new();
            for k in 0..m.layers()[li].len() {
                let orig = *m.parameter_mut(li, k);
                *m.parameter_mut(li, k) = orig + 1e-6;
                let up = batch_loss(&m, &x, &labels, &spec);
                *m.parameter_mut(li, k) = orig - 1e-6;
                let down = batch_loss(&m, &x, &labels, &spec);
                *m.parameter_mut(li, k) = orig;
                numeric.push((up - down) / 2e-6);
                analytic.push(g.layers[li].parameter(k));
            }
            let err = max_relative_error(&analytic, &numeric);
            assert!(err < 1e-4, "{} layer {li}: {err}", spec.name());
        }
    }
}

#[test]
fn pz_below_cutoff_everywhere_freezes_parameters() {
    // every sample is labelled with a class the model gives p ≈ 0
    let cfg = model_config(2, 0, 1, 3, 0);
    let layer = Layer {
        weights: Matrix::from_rows(&[vec![5.0, 0.0, 0.0], vec![5.0, 0.0, 0.0]]).unwrap(),
        bias: vec![10.0, 0.0, 0.0],
    };
    let mut m = MlpModel::from_layers(cfg, vec![layer]).unwrap();
    let before = m.clone();
    let mut rng = Rng::new(1);
    let x = Matrix::from_vec(12, 2, (0..24).map(|_| rng.uniform()).collect()).unwrap();
    let ds = Dataset::new(
        x,
        (0..12).map(|i| 1 + i % 2).collect(),
        3,
        Provenance::Synthetic,
    )
    .unwrap();
    let tc = TrainConfig {
        batch_size: 4,
        learning_rate: 0.5,
        epochs: 5,
        loss: LossSpec::PiecewiseZero { cutoff: 0.1 },
        shuffle_seed: 3,
    };
    let log = train(&mut m, &ds, &ds, &tc).unwrap();
    assert_eq!(m, before);
    assert!(log
        .records
        .iter()
        .all(|r| r.batch_loss.unwrap_or(0.0) == 0.0));
}

fn blobs(k: usize, dim: usize, scale: f64, noise: f64, per: usize, seed: u64) -> Dataset {
    generate_blobs(&BlobSpec {
        num_classes: k,
        samples_per_class: per,
        input_dim: dim,
        center_scale: scale,
        noise_std: noise,
        seed,
    })
    .unwrap()
}

#[test]
fn identical_seeds_identical_logs_and_prefix_property() {
    let ds = blobs(3, 4, 3.0, 1.0, 30, 2);
    let (train_set, val) = split(&ds, 0.2, &mut Rng::new(1)).unwrap();
    let run = |epochs| {
        let mut m = MlpModel::new(model_config(4, 2, 8, 3, 4)).unwrap();
        let tc = TrainConfig {
            batch_size: 8,
            epochs,
            loss: LossSpec::Blurry { gamma: 0.7 },
            shuffle_seed: 6,
            ..TrainConfig::default()
        };
        train(&mut m, &train_set, &val, &tc).unwrap()
    };
    let a = run(3);
    let b = run(3);
    assert_eq!(a, b);
    let long = run(6);
    assert_eq!(&long.records[..a.records.len()], a.records.as_slice());
    assert!(long
        .records
        .iter()
        .all(|r| r.batch_loss.is_none_or(f64::is_finite)));
}

#[test]
fn ce_learns_separable_two_class_blobs() {
    let ds = blobs(2, 4, 3.0, 0.5, 100, 11);
    let (train_set, val) = split(&ds, 0.2, &mut Rng::new(2)).unwrap();
    let mut m = MlpModel::new(model_config(4, 2, 16, 2, 1)).unwrap();
    let tc = TrainConfig {
        batch_size: 32,
        epochs: 20,
        ..TrainConfig::default()
    };
    let log = train(&mut m, &train_set, &val, &tc).unwrap();
    let acc = log.records.last().unwrap().metrics.mean_accuracy();
    assert!(acc > 0.95, "final mean accuracy {acc}");
}

#[test]
fn linear_classifier_on_wide_blobs() {
    let ds = blobs(2, 8, 10.0, 0.5, 200, 3);
    let (train_set, val) = split(&ds, 0.25, &mut Rng::new(3)).unwrap();
    let mut m = MlpModel::new(model_config(8, 0, 1, 2, 2)).unwrap();
    let tc = TrainConfig {
        batch_size: 16,
        epochs: 5,
        ..TrainConfig::default()
    };
    train(&mut m, &train_set, &val, &tc).unwrap();
    let acc = evaluate(&m, &val).unwrap().mean_accuracy();
    assert!(acc > 0.99, "{acc}");
}
