use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, FORMAT_VERSION};
use crate::dataset::EventDataset;
use crate::error::{Error, Result};
use crate::model::WindowMode;
use crate::pipeline;
use crate::scoring::{self, ThresholdPolicy, SLIDE_HALF_WIDTH};

use super::{confusion, metrics, MetricsReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    WindowValidity,
    TrainRatio,
    ThresholdSweep,
    WindowSizeSweep,
}

/// The quantity a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Training rows as a fraction of a fixed test split.
    TrainRatio,
    /// Threshold offset from the score mean, in slide steps.
    Threshold,
    W1,
    W2,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::TrainRatio => "train_ratio",
            SweepAxis::Threshold => "threshold",
            SweepAxis::W1 => "w1",
            SweepAxis::W2 => "w2",
        }
    }

    pub fn kind(self) -> ExperimentKind {
        match self {
            SweepAxis::TrainRatio => ExperimentKind::TrainRatio,
            SweepAxis::Threshold => ExperimentKind::ThresholdSweep,
            SweepAxis::W1 | SweepAxis::W2 => ExperimentKind::WindowSizeSweep,
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "train_ratio" | "ratio" => Ok(Self::TrainRatio),
            "threshold" => Ok(Self::Threshold),
            "w1" => Ok(Self::W1),
            "w2" => Ok(Self::W2),
            other => Err(Error::Config(format!("unknown sweep axis `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    /// Axis value or variant name.
    pub value: String,
    pub seed: u64,
    pub policy: ThresholdPolicy,
    pub threshold: Option<f64>,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
    /// Resolved `key = value` config that produced the cell.
    pub config: String,
}

/// A published number shown next to results for orientation only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub dataset: String,
    pub variant: String,
    pub f1_percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub format_version: u32,
    pub kind: ExperimentKind,
    pub axis: String,
    pub values: Vec<String>,
    pub seeds: Vec<u64>,
    pub cells: Vec<GridCell>,
    pub reference: Vec<ReferencePoint>,
}

impl ExperimentGrid {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("grid serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("grid report: {e}")))
    }

    /// Flat CSV, one line per cell.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,axis,value,seed,policy,threshold,accuracy,precision,recall,f1,tp,fp,tn,fn,error\n");
        let kind = serde_json::to_value(self.kind).expect("kind serializes");
        let kind = kind.as_str().unwrap_or_default();
        for c in &self.cells {
            let thr = c.threshold.map(|t| format!("{t:?}")).unwrap_or_default();
            let m = c
                .metrics
                .map(|m| {
                    let k = m.confusion;
                    format!(
                        "{:?},{:?},{:?},{:?},{},{},{},{}",
                        m.accuracy, m.precision, m.recall, m.f1, k.tp, k.fp, k.tn, k.fn_
                    )
                })
                .unwrap_or_else(|| ",,,,,,,".into());
            let err = c.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            writeln!(s, "{kind},{},{},{},{},{thr},{m},{err}", self.axis, c.value, c.seed, c.policy.as_str()).unwrap();
        }
        s
    }

    /// Cells whose value equals `value`, in seed order.
    pub fn cells_for(&self, value: &str) -> Vec<&GridCell> {
        self.cells.iter().filter(|c| c.value == value).collect()
    }

    /// Median F1 over the successful cells of `value`.
    pub fn median_f1(&self, value: &str) -> Option<f64> {
        let mut f: Vec<f64> = self
            .cells_for(value)
            .iter()
            .filter_map(|c| c.metrics.map(|m| m.f1))
            .collect();
        if f.is_empty() {
            return None;
        }
        f.sort_by(f64::total_cmp);
        let m = f.len() / 2;
        Some(if f.len() % 2 == 1 { f[m] } else { (f[m - 1] + f[m]) / 2.0 })
    }
}

/// Published window-validity F1 values (percent), for annotation.
pub fn window_reference() -> Vec<ReferencePoint> {
    [("none", 86.31), ("manual", 95.14), ("adaptive", 96.33)]
        .into_iter()
        .map(|(v, f1)| ReferencePoint {
            dataset: "Code Red II".into(),
            variant: v.into(),
            f1_percent: f1,
        })
        .collect()
}

fn run_cell(ds: &EventDataset, cfg: &RunConfig, value: String) -> GridCell {
    let outcome = pipeline::run(ds, cfg);
    cell_from(cfg, value, outcome.map(|o| (o.detection.threshold, o.detection.metrics)))
}

fn cell_from(cfg: &RunConfig, value: String, r: Result<(f64, Option<MetricsReport>)>) -> GridCell {
    let (threshold, metrics, error) = match r {
        Ok((t, m)) => (Some(t), m, None),
        Err(e) => (None, None, Some(format!("{}: {e}", e.code()))),
    };
    GridCell {
        value,
        seed: cfg.seed,
        policy: cfg.threshold_policy,
        threshold,
        metrics,
        error,
        config: cfg.to_kv(),
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))
}

/// Trains and evaluates the no-window, manual and adaptive variants under
/// each seed. `jobs = 0` uses every core.
pub fn window_validity(ds: &EventDataset, base: &RunConfig, seeds: &[u64], jobs: usize) -> Result<ExperimentGrid> {
    base.validate()?;
    let variants = [WindowMode::None, WindowMode::Manual, WindowMode::Adaptive];
    let jobs_list: Vec<RunConfig> = variants
        .iter()
        .flat_map(|&mode| {
            seeds.iter().map(move |&seed| {
                let mut c = base.clone();
                c.window_mode = mode;
                c.seed = seed;
                c
            })
        })
        .collect();
    let cells = pool(jobs)?.install(|| {
        jobs_list
            .par_iter()
            .map(|c| run_cell(ds, c, c.window_mode.as_str().to_string()))
            .collect()
    });
    Ok(ExperimentGrid {
        format_version: FORMAT_VERSION,
        kind: ExperimentKind::WindowValidity,
        axis: "window_mode".into(),
        values: variants.iter().map(|m| m.as_str().to_string()).collect(),
        seeds: seeds.to_vec(),
        cells,
        reference: window_reference(),
    })
}

/// One train, score and evaluate cycle per axis value. Failed cells are
/// recorded and the grid continues. For the threshold axis the model is
/// trained once and `values` are offsets in slide steps; empty means every
/// candidate.
pub fn sweep(ds: &EventDataset, axis: SweepAxis, values: &[f64], base: &RunConfig, jobs: usize) -> Result<ExperimentGrid> {
    base.validate()?;
    let cells = match axis {
        SweepAxis::Threshold => threshold_cells(ds, values, base)?,
        _ => {
            if values.is_empty() {
                return Err(Error::Config(format!("sweep over {} needs values", axis.as_str())));
            }
            pool(jobs)?.install(|| {
                values
                    .par_iter()
                    .map(|&v| axis_cell(ds, axis, v, base))
                    .collect()
            })
        }
    };
    let values = cells.iter().map(|c| c.value.clone()).collect();
    Ok(ExperimentGrid {
        format_version: FORMAT_VERSION,
        kind: axis.kind(),
        axis: axis.as_str().into(),
        values,
        seeds: vec![base.seed],
        cells,
        reference: Vec::new(),
    })
}

fn fmt_value(v: f64) -> String {
    format!("{v:?}")
}

fn axis_cell(ds: &EventDataset, axis: SweepAxis, v: f64, base: &RunConfig) -> GridCell {
    let mut cfg = base.clone();
    let value = fmt_value(v);
    let as_size = || -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::Config(format!("window size {v} is not a positive integer")))
        }
    };
    match axis {
        SweepAxis::W1 | SweepAxis::W2 => match as_size() {
            Ok(w) => {
                if axis == SweepAxis::W1 {
                    cfg.w1 = w;
                } else {
                    cfg.w2 = w;
                }
                run_cell(ds, &cfg, value)
            }
            Err(e) => cell_from(&cfg, value, Err(e)),
        },
        SweepAxis::TrainRatio => {
            let r = (|| {
                let prep = pipeline::prepare_fixed_test(ds, &cfg, v)?;
                let o = pipeline::run_prepared(&prep, &cfg)?;
                Ok((o.detection.threshold, o.detection.metrics))
            })();
            let mut cell = cell_from(&cfg, value, r);
            cell.config.push_str(&format!("train_fraction_of_test = {v:?}\n"));
            cell
        }
        SweepAxis::Threshold => unreachable!("handled by threshold_cells"),
    }
}

fn threshold_cells(ds: &EventDataset, values: &[f64], base: &RunConfig) -> Result<Vec<GridCell>> {
    let offsets: Vec<f64> = if values.is_empty() {
        (-SLIDE_HALF_WIDTH..=SLIDE_HALF_WIDTH).map(f64::from).collect()
    } else {
        values.to_vec()
    };
    let outcome = match pipeline::run(ds, base) {
        Ok(o) => o,
        Err(e) => {
            return Ok(offsets
                .iter()
                .map(|&k| cell_from(base, fmt_value(k), Err(Error::Contract(e.to_string()))))
                .collect())
        }
    };
    let range = &outcome.detection.range;
    offsets
        .iter()
        .map(|&k| {
            let t = range.mean + k * range.slide_step;
            let m = metrics(confusion(&scoring::classify(&outcome.scores.scores, t), &outcome.scores.labels)?);
            let mut cell = cell_from(base, fmt_value(k), Ok((t, Some(m))));
            cell.policy = ThresholdPolicy::Mean;
            Ok(cell)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_cells() {
        let cell = |v: &str, f1: Option<f64>| GridCell {
            value: v.into(),
            seed: 0,
            policy: ThresholdPolicy::Mean,
            threshold: None,
            metrics: f1.map(|f| MetricsReport {
                accuracy: 0.0,
                precision: 0.0,
                recall: 0.0,
                f1: f,
                confusion: Default::default(),
            }),
            error: None,
            config: String::new(),
        };
        let g = ExperimentGrid {
            format_version: 1,
            kind: ExperimentKind::WindowValidity,
            axis: "window_mode".into(),
            values: vec!["a".into()],
            seeds: vec![0, 1, 2],
            cells: vec![cell("a", Some(0.2)), cell("a", Some(0.9)), cell("a", Some(0.5)), cell("b", None)],
            reference: vec![],
        };
        assert_eq!(g.median_f1("a"), Some(0.5));
        assert_eq!(g.median_f1("b"), None);
        let back = ExperimentGrid::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
        assert_eq!(g.to_csv().lines().count(), 5);
    }
}
