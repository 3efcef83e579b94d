use mwad_core::config::RunConfig;
use mwad_core::dataset::NormalizationState;
use mwad_core::model::{ModelSpec, MultiWindowModel, TargetMode, WindowMode, PARAM_NAMES};
use mwad_core::numeric::Tensor;
use mwad_core::pipeline;
use mwad_core::scoring::score_series;
use mwad_core::synth::{self, SynthConfig};
use mwad_core::training::{train, train_observed, Checkpoint, OptimizerKind, StepObserver, TrainConfig};
use mwad_core::wlae::LaeModel;
use mwad_core::Error;

fn sine_series() -> Tensor {
    let ds = synth::generate(&SynthConfig::sine(4, 500, 3)).unwrap();
    NormalizationState::fit(&ds.features).unwrap().apply(&ds.features).unwrap()
}

fn params(m: &MultiWindowModel) -> Vec<u64> {
    PARAM_NAMES
        .iter()
        .flat_map(|n| m.param(n).unwrap().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        .collect()
}

#[test]
fn constant_series_is_learned() {
    // Staged learning rates.
    let series = Tensor::from_vec(200, 3, vec![0.5; 600]).unwrap();
    let mut model = MultiWindowModel::init(&ModelSpec::new(3), 1).unwrap();
    let mut last = f64::INFINITY;
    for lr in [1e-2, 1e-3, 1e-4] {
        let cfg = TrainConfig {
            learning_rate: lr,
            epochs: 40,
            ..TrainConfig::default()
        };
        let (m, report) = train(&series, model, &cfg).unwrap();
        model = m;
        last = report.final_loss;
    }
    assert!(last < 1e-3, "final loss {last}");
}

#[test]
fn sine_loss_halves_over_ten_epochs() {
    let model = MultiWindowModel::init(&ModelSpec::new(4), 0).unwrap();
    let (_, report) = train(&sine_series(), model, &TrainConfig::default()).unwrap();
    let l = &report.epoch_losses;
    assert_eq!(l.len(), 10);
    assert!(l.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(l[9] <= 0.5 * l[0], "{l:?}");
}

#[test]
fn zero_learning_rate_leaves_parameters_untouched() {
    let model = MultiWindowModel::init(&ModelSpec::new(4), 9).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        epochs: 2,
        ..TrainConfig::default()
    };
    let (trained, _) = train(&sine_series(), model.clone(), &cfg).unwrap();
    assert_eq!(params(&trained), params(&model));
}

#[test]
fn same_seed_gives_identical_checkpoint_bytes() {
    let series = sine_series();
    let cfg = TrainConfig {
        epochs: 3,
        shuffle: true,
        seed: 4,
        ..TrainConfig::default()
    };
    let bytes = || {
        let model = MultiWindowModel::init(&ModelSpec::new(4), 4).unwrap();
        let (m, _) = train(&series, model, &cfg).unwrap();
        let state = NormalizationState {
            mins: vec![0.0; 4],
            maxs: vec![1.0; 4],
        };
        let names = (0..4).map(|i| format!("f{i}")).collect();
        Checkpoint::new(m, state, names, 4, String::new()).unwrap().to_bytes()
    };
    assert_eq!(bytes(), bytes());
}

struct UpdateNorms(Vec<f64>);

impl StepObserver for UpdateNorms {
    fn on_step(&mut self, _: usize, _: f64, before: &MultiWindowModel, after: &MultiWindowModel) {
        let sq: f64 = before
            .trainable_names()
            .iter()
            .map(|n| {
                let (a, b) = (before.param(n).unwrap(), after.param(n).unwrap());
                a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
            })
            .sum();
        self.0.push(sq.sqrt());
    }
}

#[test]
fn clipped_sgd_updates_stay_within_lr_times_clip() {
    let cfg = TrainConfig {
        optimizer: OptimizerKind::Sgd,
        learning_rate: 0.5,
        gradient_clip: 0.01,
        epochs: 2,
        ..TrainConfig::default()
    };
    let model = MultiWindowModel::init(&ModelSpec::new(4), 2).unwrap();
    let mut obs = UpdateNorms(Vec::new());
    train_observed(&sine_series(), model, &cfg, &mut obs).unwrap();
    assert!(!obs.0.is_empty());
    let bound = cfg.learning_rate * cfg.gradient_clip;
    for (i, n) in obs.0.iter().enumerate() {
        assert!(*n <= bound * (1.0 + 1e-9), "step {i}: {n} > {bound}");
    }
}

#[test]
fn runaway_learning_rate_reports_divergence() {
    let cfg = TrainConfig {
        optimizer: OptimizerKind::Sgd,
        learning_rate: 1e300,
        gradient_clip: 0.0,
        ..TrainConfig::default()
    };
    let model = MultiWindowModel::init(&ModelSpec::new(4), 2).unwrap();
    assert!(matches!(train(&sine_series(), model, &cfg), Err(Error::Divergence { .. })));
}

#[test]
fn short_series_is_rejected() {
    let model = MultiWindowModel::init(&ModelSpec::new(2), 0).unwrap();
    let short = Tensor::zeros(model.min_series_len() - 1, 2);
    assert!(matches!(
        train(&short, model, &TrainConfig::default()),
        Err(Error::InsufficientLength { .. })
    ));
}

#[test]
fn perfect_constant_predictor_scores_zero() {
    let mut spec = ModelSpec::new(2);
    spec.mode = WindowMode::Manual;
    spec.w1 = 3;
    spec.w2 = 2;
    let mut model = MultiWindowModel::init(&spec, 0).unwrap();
    model.lae = LaeModel::zeros(2, spec.hidden, 2);
    model.lae.projection_bias = Tensor::row_vector(&[0.5, 0.25]);
    let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![0.5, 0.25]).collect();
    let s = score_series(&Tensor::from_rows(&rows).unwrap(), &model, TargetMode::Reshaped).unwrap();
    assert_eq!(s.len(), 30 - model.unscored_prefix());
    assert!(s.iter().all(|&v| v == 0.0), "{s:?}");
}

#[test]
fn injected_spike_raises_its_score() {
    let synth_cfg = SynthConfig::sine(4, 900, 21);
    let ds = synth::generate(&synth_cfg).unwrap();
    let cfg = RunConfig::default();
    let outcome = pipeline::run(&ds, &cfg).unwrap();
    let ck = outcome.checkpoint;
    let clean = pipeline::score_with_checkpoint(&ds, &ck, &cfg).unwrap();

    let pos = clean.len() / 2;
    let row = clean.aligned_indices[pos];
    let mut spiked = ds.clone();
    for v in spiked.features.row_mut(row) {
        *v += 10.0 * synth_cfg.noise_sigma;
    }
    let dirty = pipeline::score_with_checkpoint(&spiked, &ck, &cfg).unwrap();
    assert_eq!(dirty.aligned_indices, clean.aligned_indices);
    assert!(dirty.scores[pos] > clean.scores[pos], "{} vs {}", dirty.scores[pos], clean.scores[pos]);
    assert_eq!(dirty.scores[..pos], clean.scores[..pos]);
}

#[test]
fn checkpoint_feature_count_is_enforced_at_use() {
    let model = MultiWindowModel::init(&ModelSpec::new(48), 0).unwrap();
    let names: Vec<String> = (0..48).map(|i| format!("g{i}")).collect();
    let state = NormalizationState {
        mins: vec![0.0; 48],
        maxs: vec![1.0; 48],
    };
    let ck = Checkpoint::new(model, state, names, 0, String::new()).unwrap();
    let mut synth_cfg = SynthConfig::sine(47, 300, 1);
    synth_cfg.name = "narrow".into();
    let ds = synth::generate(&synth_cfg).unwrap();
    let err = pipeline::score_with_checkpoint(&ds, &ck, &RunConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Dimension { expected: 48, found: 47 }), "{err:?}");
}
