//! Joint minibatch optimization of both window stages on normal-only data.

mod checkpoint;
mod optim;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use optim::{clip_global_norm, Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};

use crate::error::{Error, Result};
use crate::model::{MultiWindowModel, TargetMode};
use crate::numeric::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Max global gradient norm; `0` disables clipping.
    pub gradient_clip: f64,
    /// Shuffle window order each epoch (seeded). Off by default.
    pub shuffle: bool,
    pub target_mode: TargetMode,
    /// Treat the prediction target as a constant in the loss gradient.
    pub detach_target: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            epochs: 10,
            batch_size: 64,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            gradient_clip: 5.0,
            shuffle: false,
            target_mode: TargetMode::Reshaped,
            detach_target: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be finite and nonnegative",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.gradient_clip >= 0.0) {
            return Err(Error::Config("gradient clip must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
    pub steps: usize,
    pub windows_per_epoch: usize,
    pub wall_clock_seconds: f64,
    pub seed: u64,
    pub config: TrainConfig,
}

/// Observes each optimizer step; used by tests to inspect updates.
pub trait StepObserver {
    fn on_step(&mut self, _step: usize, _loss: f64, _before: &MultiWindowModel, _after: &MultiWindowModel) {}
}

impl StepObserver for () {}

/// Trains `model` on a normalized, normal-only series.
pub fn train(
    series: &Tensor,
    model: MultiWindowModel,
    cfg: &TrainConfig,
) -> Result<(MultiWindowModel, TrainReport)> {
    train_observed(series, model, cfg, &mut ())
}

pub fn train_observed(
    series: &Tensor,
    mut model: MultiWindowModel,
    cfg: &TrainConfig,
    observer: &mut dyn StepObserver,
) -> Result<(MultiWindowModel, TrainReport)> {
    cfg.validate()?;
    model.validate()?;
    if series.cols() != model.feature_count() {
        return Err(Error::Dimension {
            expected: model.feature_count(),
            found: series.cols(),
        });
    }
    if series.rows() < model.min_series_len() {
        return Err(Error::InsufficientLength {
            what: "training series",
            needed: model.min_series_len(),
            got: series.rows(),
        });
    }
    if !series.all_finite() {
        return Err(Error::Validation("training series has non-finite values".into()));
    }

    let started = Instant::now();
    let w2 = model.lae.w2;
    let mut order: Vec<usize> = (w2..model.reshaped_len(series.rows())).collect();
    let windows = order.len();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(2);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let names = model.trainable_names();

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;
    for _ in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut bg = model.batch_graph(series, batch, cfg.target_mode, cfg.detach_target)?;
            bg.graph.forward()?;
            let loss = bg.graph.value(bg.loss)?.item()?;
            if !loss.is_finite() {
                return Err(Error::Divergence { step });
            }
            bg.graph.backward_scalar(bg.loss)?;
            let mut grads: Vec<Tensor> = names
                .iter()
                .map(|name| bg.graph.grad(bg.params[name]))
                .collect::<Result<_>>()?;
            if grads.iter().any(|g| !g.all_finite()) {
                return Err(Error::Divergence { step });
            }
            clip_global_norm(&mut grads, cfg.gradient_clip);

            let before = model.clone();
            opt.begin_step();
            for (name, g) in names.iter().zip(&grads) {
                let p = model.param_mut(name).expect("canonical parameter name");
                opt.update(name, p, g);
            }
            observer.on_step(step, loss, &before, &model);
            total += loss * batch.len() as f64;
            step += 1;
        }
        epoch_losses.push(total / windows as f64);
    }

    let final_loss = *epoch_losses.last().expect("at least one epoch");
    let report = TrainReport {
        epoch_losses,
        final_loss,
        steps: step,
        windows_per_epoch: windows,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        seed: cfg.seed,
        config: cfg.clone(),
    };
    Ok((model, report))
}
