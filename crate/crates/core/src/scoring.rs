//! Per-timestamp anomaly scores and threshold selection.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_atomic, EventDataset};
use crate::error::{Error, Result};
use crate::eval::{confusion, metrics, MetricsReport};
use crate::model::{MultiWindowModel, TargetMode};
use crate::numeric::Tensor;

/// Number of threshold candidates on each side of the mean.
pub const SLIDE_HALF_WIDTH: i32 = 25;
/// The score range is divided into this many steps.
pub const SLIDE_DIVISIONS: f64 = 100.0;

const SCORE_BATCH: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub scores: Vec<f64>,
    /// Row of the source dataset each score belongs to.
    pub aligned_indices: Vec<usize>,
    pub timestamps: Vec<i64>,
    pub labels: Vec<u8>,
}

impl ScoreSeries {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Scores for every scorable row of `series`. Entry `i` belongs to row
/// `model.unscored_prefix() + i`.
pub fn score_series(series: &Tensor, model: &MultiWindowModel, target_mode: TargetMode) -> Result<Vec<f64>> {
    let n = model.feature_count();
    if series.cols() != n {
        return Err(Error::Dimension {
            expected: n,
            found: series.cols(),
        });
    }
    if series.rows() < model.min_series_len() {
        return Err(Error::InsufficientLength {
            what: "scored series",
            needed: model.min_series_len(),
            got: series.rows(),
        });
    }
    let targets: Vec<usize> = (model.lae.w2..model.reshaped_len(series.rows())).collect();
    let chunks: Vec<Vec<f64>> = targets
        .par_chunks(SCORE_BATCH)
        .map(|batch| -> Result<Vec<f64>> {
            let mut bg = model.batch_graph(series, batch, target_mode, false)?;
            bg.graph.forward()?;
            let pred = bg.graph.value(bg.prediction)?;
            let target = bg.graph.value(bg.target)?;
            Ok((0..batch.len())
                .map(|r| {
                    let s: f64 = pred.row(r).iter().zip(target.row(r)).map(|(p, t)| (p - t).abs()).sum();
                    s / n as f64
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = chunks.into_iter().flatten().collect();
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Divergence { step: i });
    }
    Ok(scores)
}

/// Scores a normalized test split. `source_rows[i]` is the original row of
/// test row `i`.
pub fn score(
    test: &EventDataset,
    source_rows: &[usize],
    model: &MultiWindowModel,
    target_mode: TargetMode,
) -> Result<ScoreSeries> {
    if source_rows.len() != test.len() {
        return Err(Error::Contract(format!(
            "{} source rows for {} test rows",
            source_rows.len(),
            test.len()
        )));
    }
    let scores = score_series(&test.features, model, target_mode)?;
    let start = model.unscored_prefix();
    let rows = start..start + scores.len();
    Ok(ScoreSeries {
        aligned_indices: source_rows[rows.clone()].to_vec(),
        timestamps: test.timestamps[rows.clone()].to_vec(),
        labels: test.labels[rows].to_vec(),
        scores,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRange {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub slide_step: f64,
    pub lower: f64,
    pub upper: f64,
    pub candidates: Vec<f64>,
    /// All scores are equal; the only candidate is that value.
    pub degenerate: bool,
}

pub fn threshold_range(scores: &[f64]) -> Result<ThresholdRange> {
    if scores.is_empty() {
        return Err(Error::Contract("no scores to derive a threshold range from".into()));
    }
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = max == min;
    let mean = if degenerate {
        min
    } else {
        (scores.iter().sum::<f64>() / scores.len() as f64).clamp(min, max)
    };
    let slide_step = (max - min).abs() / SLIDE_DIVISIONS;
    let width = SLIDE_HALF_WIDTH as f64 * slide_step;
    let candidates = if degenerate {
        vec![mean]
    } else {
        (-SLIDE_HALF_WIDTH..=SLIDE_HALF_WIDTH)
            .map(|k| mean + k as f64 * slide_step)
            .collect()
    };
    Ok(ThresholdRange {
        min,
        max,
        mean,
        slide_step,
        lower: mean - width,
        upper: mean + width,
        candidates,
        degenerate,
    })
}

/// `1` where the score strictly exceeds the threshold.
pub fn classify(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s > threshold)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// The score mean; needs no labels.
    #[default]
    Mean,
    /// The candidate with the highest F1, lowest on ties.
    BestF1InRange,
}

impl ThresholdPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdPolicy::Mean => "mean",
            ThresholdPolicy::BestF1InRange => "best_f1_in_range",
        }
    }
}

impl std::str::FromStr for ThresholdPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "best_f1_in_range" | "best-f1-in-range" | "best_f1" => Ok(Self::BestF1InRange),
            other => Err(Error::Config(format!("unknown threshold policy `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub threshold: f64,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub policy: ThresholdPolicy,
    pub threshold: f64,
    pub range: ThresholdRange,
    pub scored: usize,
    pub predicted_anomalies: usize,
    /// Present when labels were supplied.
    pub metrics: Option<MetricsReport>,
    /// Every candidate's metrics, when labels were supplied.
    pub sweep: Vec<CandidateResult>,
}

pub fn select_threshold(
    scores: &[f64],
    labels: Option<&[u8]>,
    policy: ThresholdPolicy,
) -> Result<DetectionReport> {
    let range = threshold_range(scores)?;
    if let Some(l) = labels {
        if l.len() != scores.len() {
            return Err(Error::Contract(format!(
                "{} labels for {} scores",
                l.len(),
                scores.len()
            )));
        }
    }
    let sweep: Vec<CandidateResult> = match labels {
        Some(l) => range
            .candidates
            .iter()
            .map(|&t| {
                Ok(CandidateResult {
                    threshold: t,
                    metrics: metrics(confusion(&classify(scores, t), l)?),
                })
            })
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let threshold = match policy {
        ThresholdPolicy::Mean => range.mean,
        ThresholdPolicy::BestF1InRange => {
            if labels.is_none() {
                return Err(Error::Contract("best_f1_in_range needs labels".into()));
            }
            let mut best = &sweep[0];
            for c in &sweep[1..] {
                if c.metrics.f1 > best.metrics.f1 {
                    best = c;
                }
            }
            best.threshold
        }
    };
    let predicted = classify(scores, threshold);
    let metrics = labels
        .map(|l| Ok::<_, Error>(metrics(confusion(&predicted, l)?)))
        .transpose()?;
    Ok(DetectionReport {
        policy,
        threshold,
        scored: scores.len(),
        predicted_anomalies: predicted.iter().filter(|&&p| p == 1).count(),
        range,
        metrics,
        sweep,
    })
}

pub const SCORE_COLUMNS: [&str; 5] = ["row_index", "timestamp", "score", "label", "predicted"];

/// Score CSV text. `comments` become leading `#` lines.
pub fn scores_to_csv(series: &ScoreSeries, predicted: &[u8], comments: &[String]) -> Result<String> {
    if predicted.len() != series.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} scores",
            predicted.len(),
            series.len()
        )));
    }
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}").unwrap();
        }
    }
    out.push_str(&SCORE_COLUMNS.join(","));
    out.push('\n');
    for i in 0..series.len() {
        writeln!(
            out,
            "{},{},{:?},{},{}",
            series.aligned_indices[i], series.timestamps[i], series.scores[i], series.labels[i], predicted[i]
        )
        .unwrap();
    }
    Ok(out)
}

pub fn save_scores(path: &Path, series: &ScoreSeries, predicted: &[u8], comments: &[String]) -> Result<()> {
    write_atomic(path, scores_to_csv(series, predicted, comments)?.as_bytes())
}

/// Parses a score CSV. The `predicted` column is optional; the others are
/// required.
pub fn parse_scores(text: &str) -> Result<(ScoreSeries, Option<Vec<u8>>)> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| [l, "\n"])
        .collect();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(&SCORE_COLUMNS[..4]) {
        *slot = col(name).ok_or_else(|| Error::MissingColumn((*name).to_string()))?;
    }
    let pred_col = col("predicted");
    let mut s = ScoreSeries {
        scores: Vec::new(),
        aligned_indices: Vec::new(),
        timestamps: Vec::new(),
        labels: Vec::new(),
    };
    let mut predicted = pred_col.map(|_| Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let bad = |what: &str| Error::Validation(format!("score row {row}: bad {what}"));
        s.aligned_indices.push(field(idx[0]).parse().map_err(|_| bad("row_index"))?);
        s.timestamps.push(field(idx[1]).parse().map_err(|_| bad("timestamp"))?);
        let score: f64 = field(idx[2]).parse().map_err(|_| bad("score"))?;
        if !(score.is_finite() && score >= 0.0) {
            return Err(bad("score"));
        }
        s.scores.push(score);
        s.labels.push(parse_flag(field(idx[3])).ok_or_else(|| bad("label"))?);
        if let (Some(p), Some(c)) = (predicted.as_mut(), pred_col) {
            p.push(parse_flag(field(c)).ok_or_else(|| bad("predicted"))?);
        }
    }
    Ok((s, predicted))
}

fn parse_flag(s: &str) -> Option<u8> {
    match s {
        "0" => Some(0),
        "1" => Some(1),
        _ => None,
    }
}

pub fn load_scores(path: &Path) -> Result<(ScoreSeries, Option<Vec<u8>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scores(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_examples() {
        let s: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let r = threshold_range(&s).unwrap();
        assert!((r.slide_step - 0.01).abs() <= 1e-15);
        assert!((r.lower - 0.25).abs() <= 1e-15 && (r.upper - 0.75).abs() <= 1e-15);
        assert_eq!(r.candidates.len(), 51);

        let r = threshold_range(&[0.0, 2.0, 4.0]).unwrap();
        assert_eq!((r.slide_step, r.lower, r.upper), (0.04, 1.0, 3.0));

        let r = threshold_range(&[0.3; 4]).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.slide_step, r.candidates.clone()), (0.0, vec![0.3]));
        assert!(threshold_range(&[]).is_err());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&[0.1, 0.9], 0.5), vec![0, 1]);
        assert_eq!(classify(&[0.1, 0.9], 0.0), vec![1, 1]);
        assert_eq!(classify(&[0.1, 0.9], 0.9), vec![0, 0]);
    }

    #[test]
    fn policies() {
        let scores = [0.1, 0.2, 0.15, 0.9, 0.85, 0.05];
        let labels = [0, 0, 0, 1, 1, 0];
        let r = select_threshold(&scores, Some(&labels), ThresholdPolicy::BestF1InRange).unwrap();
        assert_eq!(r.metrics.unwrap().f1, 1.0);
        assert!(select_threshold(&scores, None, ThresholdPolicy::BestF1InRange).is_err());
        let r = select_threshold(&[1.0, 2.0, 3.0], None, ThresholdPolicy::Mean).unwrap();
        assert_eq!(r.threshold, 2.0);
        let r = select_threshold(&[0.4; 3], None, ThresholdPolicy::Mean).unwrap();
        assert!(r.range.degenerate && r.threshold == 0.4 && r.predicted_anomalies == 0);
    }

    #[test]
    fn csv_round_trip() {
        let s = ScoreSeries {
            scores: vec![0.1, 1.0 / 3.0, 2.5e-17],
            aligned_indices: vec![24, 25, 30],
            timestamps: vec![100, 101, 106],
            labels: vec![0, 1, 0],
        };
        let text = scores_to_csv(&s, &[0, 1, 1], &["seed=3".into()]).unwrap();
        let (back, pred) = parse_scores(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(pred.unwrap(), vec![0, 1, 1]);
        let missing = text.replace("label,", "lbl,");
        assert!(matches!(parse_scores(&missing), Err(Error::MissingColumn(c)) if c == "label"));
    }
}
