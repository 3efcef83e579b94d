use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion counts with anomalies as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(predicted: &[u8], actual: &[u8]) -> Result<Confusion> {
    if predicted.len() != actual.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    let mut c = Confusion::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p != 0, a != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

/// Accuracy, precision, recall and F1. Zero denominators give 0.
pub fn metrics(c: Confusion) -> MetricsReport {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let accuracy = ratio(c.tp + c.tn, c.total());
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    MetricsReport {
        accuracy,
        precision,
        recall,
        f1,
        confusion: c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_examples() {
        let c = confusion(&[0; 4], &[0; 4]).unwrap();
        assert_eq!((c.tn, c.tp, c.fp, c.fn_), (4, 0, 0, 0));
        let c = confusion(&[1, 0, 1], &[0, 1, 0]).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        let c = confusion(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (1, 1, 1, 1));
        assert!(confusion(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn metric_examples() {
        let m = metrics(Confusion { tp: 5, fp: 5, fn_: 5, tn: 85 });
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (0.9, 0.5, 0.5, 0.5));
        let m = metrics(Confusion { tp: 0, fp: 0, fn_: 3, tn: 7 });
        assert_eq!((m.precision, m.f1), (0.0, 0.0));
        let m = metrics(Confusion { tp: 4, fp: 0, fn_: 0, tn: 6 });
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }
}
