use mwad_core::config::RunConfig;
use mwad_core::eval::{confusion, metrics, sweep, window_validity, Confusion, SweepAxis};
use mwad_core::scoring::{classify, select_threshold, threshold_range, ThresholdPolicy};
use mwad_core::synth::{generate, AnomalyKind, AnomalySpec, SynthConfig};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Metrics written out longhand, for cross-checking.
fn oracle(tp: u64, fp: u64, tn: u64, fn_: u64) -> [f64; 4] {
    let (tp, fp, tn, fn_) = (tp as f64, fp as f64, tn as f64, fn_ as f64);
    let total = tp + fp + tn + fn_;
    let acc = if total == 0.0 { 0.0 } else { (tp + tn) / total };
    let pre = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
    let rec = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
    let f1 = if pre + rec == 0.0 { 0.0 } else { 2.0 * pre * rec / (pre + rec) };
    [acc, pre, rec, f1]
}

#[test]
fn metrics_match_oracle_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..1000 {
        let hi = if i % 10 == 0 { 3 } else { 10_000 };
        let c = Confusion {
            tp: rng.random_range(0..hi),
            fp: rng.random_range(0..hi),
            tn: rng.random_range(0..hi),
            fn_: rng.random_range(0..hi),
        };
        let m = metrics(c);
        assert_eq!([m.accuracy, m.precision, m.recall, m.f1], oracle(c.tp, c.fp, c.tn, c.fn_), "{c:?}");
    }
}

#[test]
fn swapping_fp_and_fn_keeps_f1_only_when_precision_equals_recall() {
    let c = Confusion { tp: 6, fp: 2, tn: 50, fn_: 4 };
    let swapped = Confusion { fp: c.fn_, fn_: c.fp, ..c };
    let (a, b) = (metrics(c), metrics(swapped));
    assert_eq!((a.precision, a.recall), (b.recall, b.precision));
    assert!((a.f1 - b.f1).abs() <= 1e-15);
    let equal = Confusion { tp: 6, fp: 3, tn: 50, fn_: 3 };
    assert_eq!(metrics(equal).precision, metrics(equal).recall);
}

/// Best-F1 search over the 51 range candidates, written independently.
fn brute_force_best(scores: &[f64], labels: &[u8]) -> (f64, f64) {
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let step = (max - min).abs() / 100.0;
    let mut best = (f64::NAN, -1.0);
    for k in -25i32..=25 {
        let t = mean + k as f64 * step;
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (&s, &l) in scores.iter().zip(labels) {
            match (s > t, l == 1) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        let f1 = oracle(tp, fp, tn, fn_)[3];
        if f1 > best.1 {
            best = (t, f1);
        }
        if step == 0.0 {
            break;
        }
    }
    best
}

#[test]
fn separable_scores_reach_perfect_f1() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let labels: Vec<u8> = (0..200).map(|i| u8::from(i % 9 == 0)).collect();
    let scores: Vec<f64> = labels
        .iter()
        .map(|&l| if l == 1 { rng.random_range(0.8..1.0) } else { rng.random_range(0.0..0.2) })
        .collect();
    let r = select_threshold(&scores, Some(&labels), ThresholdPolicy::BestF1InRange).unwrap();
    assert_eq!(r.metrics.unwrap().f1, 1.0);
    assert_eq!((r.threshold, 1.0), brute_force_best(&scores, &labels));
}

#[test]
fn scores_zero_to_one_give_exact_range() {
    let scores: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let r = threshold_range(&scores).unwrap();
    assert!((r.mean - 0.5).abs() <= 1e-15);
    assert!((r.slide_step - 0.01).abs() <= 1e-15);
    assert!((r.lower - 0.25).abs() <= 1e-15 && (r.upper - 0.75).abs() <= 1e-15);
    assert_eq!(r.candidates.len(), 51);
}

proptest! {
    #[test]
    fn raising_threshold_never_adds_anomalies(scores in prop::collection::vec(0.0f64..10.0, 1..100), a in 0.0f64..10.0, d in 0.0f64..5.0) {
        let count = |t| classify(&scores, t).iter().filter(|&&p| p == 1).count();
        prop_assert!(count(a + d) <= count(a));
    }

    #[test]
    fn decisions_are_affine_invariant(
        scores in prop::collection::vec(0i32..1000, 1..100),
        t in 0i32..1000,
        a in 1i32..64,
        b in -1000i32..1000,
    ) {
        let s: Vec<f64> = scores.iter().map(|&v| v as f64 / 8.0).collect();
        let tau = t as f64 / 8.0 + 1.0 / 16.0;
        let (a, b) = (a as f64, b as f64);
        let moved: Vec<f64> = s.iter().map(|v| a * v + b).collect();
        prop_assert_eq!(classify(&s, tau), classify(&moved, a * tau + b));
    }

    #[test]
    fn best_f1_beats_every_candidate(
        scores in prop::collection::vec(0.0f64..1.0, 2..120),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<u8> = scores.iter().map(|&s| u8::from(rng.random_range(0.0..1.0) < s)).collect();
        let r = select_threshold(&scores, Some(&labels), ThresholdPolicy::BestF1InRange).unwrap();
        let best = r.metrics.unwrap().f1;
        for c in &r.sweep {
            prop_assert!(best >= c.metrics.f1);
        }
        let (t, f1) = brute_force_best(&scores, &labels);
        prop_assert_eq!(r.threshold, t);
        prop_assert_eq!(best, f1);
    }

    #[test]
    fn confusion_counts_sum_to_length(pairs in prop::collection::vec((0u8..2, 0u8..2), 0..200)) {
        let (p, a): (Vec<u8>, Vec<u8>) = pairs.iter().cloned().unzip();
        prop_assert_eq!(confusion(&p, &a).unwrap().total(), pairs.len() as u64);
    }
}

#[test]
fn mean_shift_is_measured_at_its_magnitude() {
    let clean_cfg = SynthConfig::sine(4, 600, 13);
    let shifted_cfg = SynthConfig {
        anomalies: vec![AnomalySpec::new(300, 100, AnomalyKind::MeanShift, 10.0)],
        ..clean_cfg.clone()
    };
    let clean = generate(&clean_cfg).unwrap();
    let shifted = generate(&shifted_cfg).unwrap();
    let sigma = clean_cfg.noise_sigma;
    for f in 0..4 {
        let diff: f64 = (300..400).map(|t| shifted.features.get(t, f) - clean.features.get(t, f)).sum::<f64>() / 100.0;
        assert!((diff - 10.0 * sigma).abs() <= 0.5 * sigma, "feature {f}: {diff}");
    }
    for t in (0..300).chain(400..600) {
        assert_eq!(shifted.features.row(t), clean.features.row(t));
    }
    assert!(shifted.labels.iter().enumerate().all(|(t, &l)| (l == 1) == (300..400).contains(&t)));
}

#[test]
fn synth_is_deterministic() {
    let a = generate(&SynthConfig::default()).unwrap();
    let b = generate(&SynthConfig::default()).unwrap();
    assert_eq!(a.to_csv_string(), b.to_csv_string());
    assert_eq!((a.len(), a.anomaly_count()), (2100, 100));
}

fn policy_best() -> RunConfig {
    RunConfig {
        threshold_policy: ThresholdPolicy::BestF1InRange,
        ..RunConfig::default()
    }
}

#[test]
fn unit_window_variants_agree() {
    let ds = generate(&SynthConfig::default()).unwrap();
    let cfg = RunConfig { w1: 1, ..policy_best() };
    let g = window_validity(&ds, &cfg, &[0], 1).unwrap();
    let f: Vec<f64> = ["none", "manual", "adaptive"].iter().map(|v| g.median_f1(v).unwrap()).collect();
    let spread = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - f.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread <= 0.01, "{f:?}");
    assert_eq!(g.reference.len(), 3);
    assert!(g.cells.iter().all(|c| c.config.contains("seed = 0")));
}

fn small_fixture() -> mwad_core::dataset::EventDataset {
    generate(&SynthConfig {
        length: 900,
        anomalies: vec![
            AnomalySpec::new(700, 20, AnomalyKind::MeanShift, 10.0),
            AnomalySpec::new(820, 20, AnomalyKind::Spike, 12.0),
        ],
        ..SynthConfig::sine(3, 900, 5)
    })
    .unwrap()
}

#[test]
fn w2_sweep_cells_are_all_valid() {
    let cfg = RunConfig { epochs: 2, ..policy_best() };
    let g = sweep(&small_fixture(), SweepAxis::W2, &[3.0, 7.0, 11.0], &cfg, 1).unwrap();
    assert_eq!(g.values, vec!["3.0", "7.0", "11.0"]);
    for c in &g.cells {
        let m = c.metrics.expect("cell has metrics");
        assert!(c.error.is_none());
        assert!([m.accuracy, m.precision, m.recall, m.f1].iter().all(|v| (0.0..=1.0).contains(v)));
    }
    let back = mwad_core::eval::ExperimentGrid::from_json(&g.to_json()).unwrap();
    assert_eq!(back, g);
}

#[test]
fn threshold_sweep_endpoints_do_not_beat_the_max() {
    let cfg = RunConfig { epochs: 3, ..RunConfig::default() };
    let g = sweep(&small_fixture(), SweepAxis::Threshold, &[], &cfg, 1).unwrap();
    assert_eq!(g.cells.len(), 51);
    let f1: Vec<f64> = g.cells.iter().map(|c| c.metrics.unwrap().f1).collect();
    let best = f1.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(f1[0] <= best && f1[50] <= best);
    let t: Vec<f64> = g.cells.iter().map(|c| c.threshold.unwrap()).collect();
    assert!(t.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn ratio_sweep_is_complete_and_records_failures() {
    let cfg = RunConfig { epochs: 1, ..RunConfig::default() };
    let values = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
    let g = sweep(&small_fixture(), SweepAxis::TrainRatio, &values, &cfg, 1).unwrap();
    assert_eq!(g.cells.len(), values.len());
    for c in &g.cells {
        assert!(c.metrics.is_some() != c.error.is_some(), "{c:?}");
    }
    let bad = sweep(&small_fixture(), SweepAxis::W1, &[0.5, 3.0], &cfg, 1).unwrap();
    assert!(bad.cells[0].error.is_some() && bad.cells[1].metrics.is_some());
}
