//! The full prepare, train, score and threshold cycle on one dataset.

use std::collections::BTreeSet;

use crate::config::RunConfig;
use crate::dataset::{
    drop_unlearnable, fill_forward, floor_fraction, split_indices, DroppedColumn, EventDataset, NormalizationState,
};
use crate::error::{Error, Result};
use crate::model::MultiWindowModel;
use crate::scoring::{self, DetectionReport, ScoreSeries};
use crate::training::{self, Checkpoint, TrainReport};

/// Normalized splits ready for training and scoring.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: EventDataset,
    pub test: EventDataset,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub normalization: NormalizationState,
    pub dropped: Vec<DroppedColumn>,
}

pub fn prepare(ds: &EventDataset, cfg: &RunConfig) -> Result<Prepared> {
    let (clean, dropped) = clean(ds, cfg)?;
    let (train_rows, test_rows) = split_indices(&clean.labels, &cfg.split())?;
    finish(&clean, dropped, train_rows, test_rows)
}

/// Keeps the test split of `prepare` and trains on the most recent
/// `⌊fraction · |test|⌋` normal rows before it.
pub fn prepare_fixed_test(ds: &EventDataset, cfg: &RunConfig, fraction: f64) -> Result<Prepared> {
    if !(fraction > 0.0 && fraction.is_finite()) {
        return Err(Error::Split(format!("train fraction {fraction} must be positive")));
    }
    let (clean, dropped) = clean(ds, cfg)?;
    let (all_train, test_rows) = split_indices(&clean.labels, &cfg.split())?;
    let n = floor_fraction(fraction, test_rows.len());
    if n == 0 || n > all_train.len() {
        return Err(Error::Split(format!(
            "{n} training rows requested, {} available",
            all_train.len()
        )));
    }
    let train_rows = all_train[all_train.len() - n..].to_vec();
    finish(&clean, dropped, train_rows, test_rows)
}

fn clean(ds: &EventDataset, cfg: &RunConfig) -> Result<(EventDataset, Vec<DroppedColumn>)> {
    let filled = fill_forward(ds)?;
    let exclude: BTreeSet<String> = cfg.exclude.iter().cloned().collect();
    drop_unlearnable(&filled, &exclude)
}

fn finish(
    clean: &EventDataset,
    dropped: Vec<DroppedColumn>,
    train_rows: Vec<usize>,
    test_rows: Vec<usize>,
) -> Result<Prepared> {
    let (train, test) = (clean.select_rows(&train_rows), clean.select_rows(&test_rows));
    let normalization = NormalizationState::fit(&train.features)?;
    let mut train_n = train;
    let mut test_n = test;
    train_n.features = normalization.apply(&train_n.features)?;
    test_n.features = normalization.apply(&test_n.features)?;
    Ok(Prepared {
        train: train_n,
        test: test_n,
        train_rows,
        test_rows,
        normalization,
        dropped,
    })
}

/// Trains on the prepared training split and returns the checkpoint.
pub fn fit(prep: &Prepared, cfg: &RunConfig) -> Result<(Checkpoint, TrainReport)> {
    let spec = cfg.model_spec(prep.train.feature_count());
    let model = MultiWindowModel::init(&spec, cfg.seed)?;
    let (model, report) = training::train(&prep.train.features, model, &cfg.train_config())?;
    let ck = Checkpoint::new(
        model,
        prep.normalization.clone(),
        prep.train.column_names.clone(),
        cfg.seed,
        cfg.to_kv(),
    )?;
    Ok((ck, report))
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub checkpoint: Checkpoint,
    pub train_report: TrainReport,
    pub scores: ScoreSeries,
    pub detection: DetectionReport,
    pub dropped: Vec<DroppedColumn>,
}

/// Prepare, train, score the test split and select a threshold.
pub fn run(ds: &EventDataset, cfg: &RunConfig) -> Result<RunOutcome> {
    run_prepared(&prepare(ds, cfg)?, cfg)
}

pub fn run_prepared(prep: &Prepared, cfg: &RunConfig) -> Result<RunOutcome> {
    let (checkpoint, train_report) = fit(prep, cfg)?;
    let scores = scoring::score(&prep.test, &prep.test_rows, &checkpoint.model, cfg.target_mode)?;
    let detection = scoring::select_threshold(&scores.scores, Some(&scores.labels), cfg.threshold_policy)?;
    Ok(RunOutcome {
        checkpoint,
        train_report,
        scores,
        detection,
        dropped: prep.dropped.clone(),
    })
}

/// Aligns a dataset to a checkpoint's trained columns and scores its test
/// split with the stored normalization.
pub fn score_with_checkpoint(ds: &EventDataset, ck: &Checkpoint, cfg: &RunConfig) -> Result<ScoreSeries> {
    let filled = fill_forward(ds)?;
    let all_present = ck.column_names.iter().all(|c| filled.column_names.contains(c));
    let selected = if all_present {
        filled.select_columns(&ck.column_names)?
    } else {
        let (cleaned, _) = clean(ds, cfg)?;
        if cleaned.feature_count() != ck.column_names.len() {
            return Err(Error::Dimension {
                expected: ck.column_names.len(),
                found: cleaned.feature_count(),
            });
        }
        ck.check_columns(&cleaned.column_names)?;
        cleaned
    };
    let (_, test_rows) = split_indices(&selected.labels, &cfg.split())?;
    let mut test = selected.select_rows(&test_rows);
    test.features = ck.normalization.apply(&test.features)?;
    scoring::score(&test, &test_rows, &ck.model, cfg.target_mode)
}
