use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::image::ImageTensor;

fn micro_spec() -> ModelSpec {
    ModelSpec::new(
        (6, 6, 2),
        3,
        vec![
            Layer::Conv { out_channels: 3, kernel: 3, stride: 1, padding: 1 },
            Layer::Relu,
            Layer::MaxPool { size: 2, stride: 2 },
            Layer::Conv { out_channels: 2, kernel: 3, stride: 2, padding: 1 },
            Layer::Flatten,
            Layer::Dense { units: 4 },
            Layer::Relu,
            Layer::Dense { units: 3 },
            Layer::Softmax,
        ],
    )
    .unwrap()
}

fn random_model(spec: &ModelSpec, seed: u64) -> TrainedModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Params::init(spec, &mut rng).unwrap();
    for b in params.layers.iter_mut().flat_map(|l| l.bias.iter_mut()) {
        *b = rng.random_range(-0.1..0.1);
    }
    TrainedModel::new(spec.clone(), params, TrainingMeta::default()).unwrap()
}

fn random_batch(spec: &ModelSpec, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = spec.input().len();
    let inputs = (0..n).map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let targets = (0..n).map(|i| one_hot(i % spec.num_classes, spec.num_classes)).collect();
    (inputs, targets)
}

// Independent route: mean loss from the forward pass alone.
fn batch_loss(model: &TrainedModel, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let probs: Vec<Vec<f64>> = inputs.iter().map(|x| model.forward_planar(x).unwrap()).collect();
    loss(&probs, targets)
}

fn max_relative_error(model: &TrainedModel, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let h = 1e-5;
    let (grads, _) = model.backward_planar(inputs, targets).unwrap();
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let mut plus = model.clone();
        *plus.params_mut().iter_mut().nth(i).unwrap() += h;
        let mut minus = model.clone();
        *minus.params_mut().iter_mut().nth(i).unwrap() -= h;
        let numeric = (batch_loss(&plus, inputs, targets) - batch_loss(&minus, inputs, targets)) / (2.0 * h);
        let denom = a.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}

#[test]
fn gradients_match_central_differences() {
    let spec = micro_spec();
    for seed in 0..3 {
        let model = random_model(&spec, seed);
        let (x, y) = random_batch(&spec, 8, 100 + seed);
        let err = max_relative_error(&model, &x, &y);
        assert!(err < 1e-4, "seed {seed}: max relative error {err}");
    }
}

#[test]
fn logit_gradient_closed_form() {
    let spec = ModelSpec::new((1, 1, 3), 4, vec![Layer::Flatten, Layer::Dense { units: 4 }, Layer::Softmax]).unwrap();
    let model = random_model(&spec, 7);
    let (x, y) = random_batch(&spec, 5, 8);
    let (grads, _) = model.backward_planar(&x, &y).unwrap();
    // bias gradient of the final dense layer is Σ (p - y) / batch
    let mut expected = vec![0.0; 4];
    for (xi, yi) in x.iter().zip(&y) {
        let p = model.forward_planar(xi).unwrap();
        for k in 0..4 {
            expected[k] += (p[k] - yi[k]) / 5.0;
        }
    }
    for (g, e) in grads.layers[1].bias.iter().zip(&expected) {
        assert!((g - e).abs() < 1e-15);
    }
}

#[test]
fn zero_signal_when_targets_equal_predictions() {
    let spec = ModelSpec::new((2, 2, 1), 3, vec![Layer::Flatten, Layer::Dense { units: 3 }, Layer::Softmax]).unwrap();
    let model = random_model(&spec, 3);
    let (x, _) = random_batch(&spec, 4, 4);
    let targets: Vec<Vec<f64>> = x.iter().map(|xi| model.forward_planar(xi).unwrap()).collect();
    let (grads, _) = model.backward_planar(&x, &targets).unwrap();
    assert!(grads.layers[1].bias.iter().all(|g| *g == 0.0));
    assert!(grads.layers[1].weights.iter().all(|g| *g == 0.0));
}

#[test]
fn zero_model_is_uniform() {
    let spec = ModelSpec::new((4, 4, 1), 5, vec![Layer::Flatten, Layer::Dense { units: 5 }, Layer::Softmax]).unwrap();
    let model = TrainedModel::zeros(spec).unwrap();
    let img = ImageTensor::filled(4, 4, 1, 0.7).unwrap();
    let probs = model.forward(std::slice::from_ref(&img)).unwrap();
    assert_eq!(probs[0], vec![0.2; 5]);
    // ties resolve to the lowest ordinal
    assert_eq!(model.predict(&img).unwrap().0, 0);
}

#[test]
fn rows_sum_to_one() {
    let spec = micro_spec();
    let model = random_model(&spec, 11);
    let (x, _) = random_batch(&spec, 6, 12);
    for xi in &x {
        let p = model.forward_planar(xi).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn identity_conv_model() {
    let spec = ModelSpec::new(
        (3, 3, 1),
        2,
        vec![
            Layer::Conv { out_channels: 1, kernel: 1, stride: 1, padding: 0 },
            Layer::Flatten,
            Layer::Dense { units: 2 },
            Layer::Softmax,
        ],
    )
    .unwrap();
    let mut model = TrainedModel::zeros(spec).unwrap();
    model.params_mut().layers[0].weights[0] = 1.0;
    let x: Vec<f64> = (0..9).map(|i| i as f64 / 9.0).collect();
    let trace = model.trace(&x).unwrap();
    assert_eq!(trace.acts[1], x);
}

#[test]
fn shape_mismatch_names_layer() {
    let spec = micro_spec();
    let model = random_model(&spec, 1);
    let wrong = ImageTensor::filled(5, 6, 2, 0.5).unwrap();
    match model.forward(&[wrong]) {
        Err(NeuralError::Shape { layer, expected, actual, .. }) => {
            assert_eq!(layer, 0);
            assert_eq!(expected, Shape::new(2, 6, 6));
            assert_eq!(actual, Shape::new(2, 5, 6));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn loss_examples() {
    let y = vec![one_hot(1, 5)];
    assert!(loss(&[vec![0.0, 1.0, 0.0, 0.0, 0.0]], &y) < 1e-11);
    assert!((loss(&[vec![0.2; 5]], &y) - 5f64.ln()).abs() < 1e-9);
    assert!((loss(&[vec![0.1, 0.5, 0.1, 0.1, 0.2]], &y) - 2f64.ln()).abs() < 1e-9);
}

#[test]
fn argmax_examples() {
    assert_eq!(argmax(&[0.1, 0.6, 0.1, 0.1, 0.1]), 1);
    assert_eq!(argmax(&[0.2; 5]), 0);
}

#[test]
fn early_stopping_arithmetic() {
    let mut seq = vec![1.0, 0.9, 0.91, 0.92];
    seq.extend((0..20).map(|i| 0.95 + i as f64 * 0.001));
    let mut es = EarlyStopping::new(10);
    let mut stopped_at = None;
    for (i, v) in seq.iter().enumerate() {
        if es.observe(i + 1, *v) == Verdict::Stop {
            stopped_at = Some(i + 1);
            break;
        }
    }
    assert_eq!(stopped_at, Some(12));
    assert_eq!(es.best_epoch(), 2);
    assert_eq!(es.best(), 0.9);
}

fn tiny_examples() -> (ModelSpec, Vec<Example>) {
    let spec = ModelSpec::new(
        (4, 4, 1),
        2,
        vec![
            Layer::Conv { out_channels: 2, kernel: 3, stride: 1, padding: 1 },
            Layer::Relu,
            Layer::MaxPool { size: 2, stride: 2 },
            Layer::Flatten,
            Layer::Dense { units: 8 },
            Layer::Relu,
            Layer::Dense { units: 2 },
            Layer::Softmax,
        ],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let examples = (0..8)
        .map(|i| Example { input: (0..16).map(|_| rng.random_range(0.0..1.0)).collect(), label: i % 2 })
        .collect();
    (spec, examples)
}

#[test]
fn memorizes_eight_samples() {
    let (spec, examples) = tiny_examples();
    let cfg =
        TrainConfig { learning_rate: 0.1, batch_size: 8, max_epochs: 500, patience: 500, seed: 1, standardize: true };
    let model = train(&spec, &examples, &examples, &cfg).unwrap();
    let final_loss = evaluate_loss(&model, &examples).unwrap();
    assert!(final_loss < 0.01, "loss {final_loss} after {} epochs", model.meta.epochs_run);
}

#[test]
fn single_epoch_budget() {
    let (spec, examples) = tiny_examples();
    let cfg = TrainConfig { max_epochs: 1, patience: 10, ..TrainConfig::default() };
    let model = train(&spec, &examples, &examples, &cfg).unwrap();
    assert_eq!(model.meta.epochs_run, 1);
    assert_eq!(model.meta.history.len(), 1);
}

#[test]
fn training_is_deterministic() {
    let (spec, examples) = tiny_examples();
    let cfg =
        TrainConfig { learning_rate: 0.05, batch_size: 3, max_epochs: 20, patience: 5, seed: 9, standardize: true };
    let a = train(&spec, &examples, &examples, &cfg).unwrap();
    let b = train(&spec, &examples, &examples, &cfg).unwrap();
    assert_eq!(a, b);
    let c = train(&spec, &examples, &examples, &TrainConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.params(), c.params());
}

#[test]
fn restores_best_epoch_weights() {
    let (spec, examples) = tiny_examples();
    let cfg =
        TrainConfig { learning_rate: 0.05, batch_size: 4, max_epochs: 100, patience: 10, seed: 2, standardize: true };
    let mut seq = vec![1.0, 0.9, 0.91, 0.92];
    seq.extend((0..20).map(|i| 0.93 + i as f64 * 0.01));
    let mut snapshots = Vec::new();
    let model = train_with(&spec, &examples, &cfg, None, |m, epoch| {
        snapshots.push(m.params().clone());
        Ok(seq[epoch - 1])
    })
    .unwrap();
    assert_eq!(model.meta.epochs_run, 12);
    assert!(model.meta.stopped_early);
    assert_eq!(model.meta.best_epoch, 2);
    assert_eq!(model.params(), &snapshots[1]);
    assert!(model.meta.history.iter().all(|r| model.meta.best_val_loss <= r.val_loss));
}

#[test]
fn divergence_is_reported() {
    let (spec, examples) = tiny_examples();
    let cfg =
        TrainConfig { learning_rate: 1e300, batch_size: 4, max_epochs: 5, patience: 5, seed: 2, standardize: true };
    match train(&spec, &examples, &examples, &cfg) {
        Err(NeuralError::Diverged { epoch, batch }) => assert!(epoch >= 1 && batch >= 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn missing_class_rejected() {
    let (spec, mut examples) = tiny_examples();
    examples.iter_mut().for_each(|e| e.label = 0);
    assert!(matches!(train(&spec, &examples, &examples, &TrainConfig::default()), Err(NeuralError::MissingClass(1))));
    assert!(train(&spec, &[], &[], &TrainConfig::default()).is_err());
}

#[test]
fn rsm1_round_trip_is_bit_exact() {
    let (spec, examples) = tiny_examples();
    let cfg =
        TrainConfig { learning_rate: 0.05, batch_size: 4, max_epochs: 3, patience: 5, seed: 2, standardize: true };
    let model = train(&spec, &examples, &examples, &cfg).unwrap();
    let bytes = serialize::to_bytes(&model);
    assert_eq!(&bytes[..4], b"RSM1");
    let back = serialize::from_bytes(&bytes).unwrap();
    assert_eq!(serialize::to_bytes(&back), bytes);
    assert_eq!(back.meta, model.meta);
    assert_eq!(back.norm(), model.norm());
    for (a, b) in back.params().iter().zip(model.params().iter()) {
        assert_eq!(*a, *b as f32 as f64);
    }
    assert!(serialize::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(serialize::from_bytes(&bad).is_err());
}

#[test]
fn input_norm_standardizes_training_inputs() {
    let inputs: Vec<Vec<f64>> = vec![vec![0.0, 2.0, 10.0, 10.0], vec![4.0, 2.0, 10.0, 10.0]];
    let norm = InputNorm::fit(inputs.iter().map(|v| v.as_slice()), 2);
    assert_eq!(norm.mean, vec![2.0, 10.0]);
    // constant channel keeps unit scale
    assert_eq!(norm.std, vec![2f64.sqrt(), 1.0]);
    assert!(InputNorm::identity(3).is_identity());

    let (spec, examples) = tiny_examples();
    let cfg =
        TrainConfig { learning_rate: 0.05, batch_size: 4, max_epochs: 2, patience: 5, seed: 2, standardize: true };
    let model = train(&spec, &examples, &examples, &cfg).unwrap();
    let channels = spec.input().channels;
    assert_eq!(model.norm(), &InputNorm::fit(examples.iter().map(|e| e.input.as_slice()), channels));
    let raw = train(&spec, &examples, &examples, &TrainConfig { standardize: false, ..cfg }).unwrap();
    assert!(raw.norm().is_identity());
    // fine-tuning keeps the base model's normalization
    let tuned = train_with(&spec, &examples, &cfg, Some(&raw), |m, _| evaluate_loss(m, &examples)).unwrap();
    assert!(tuned.norm().is_identity());
    assert!(model.clone().with_norm(InputNorm::identity(channels + 1)).is_err());
}
