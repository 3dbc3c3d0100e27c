mod common;

use common::oracles::pair_counting_auroc;
use ecgboost::labels::{label, LabelSet, LabelWeightMatrix, N_LABELS};
use ecgboost::metrics::*;
use ecgboost::rng::rng_from_seed;
use rand::Rng;

#[test]
fn auroc_equals_pair_counting_exactly() {
    let mut rng = rng_from_seed(8);
    for case in 0..200 {
        let n = rng.random_range(2..60);
        // coarse scores so ties are common
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64 / 8.0).collect();
        let mut y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        y[0] = 1;
        y[1] = 0;
        assert_eq!(auroc(&scores, &y).unwrap(), pair_counting_auroc(&scores, &y), "case {case}");
    }
    assert_eq!(auroc(&[0.1, 0.2], &[1, 1]), None);
}

#[test]
fn auprc_bounds_and_perfect_ranking() {
    let mut rng = rng_from_seed(9);
    for _ in 0..100 {
        let n = rng.random_range(4..50);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        y[0] = 1;
        y[1] = 0;
        let a = auprc(&scores, &y).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&a));
        let perfect: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        assert!((auprc(&perfect, &y).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn fbeta_gbeta_fixture() {
    assert_eq!(fbeta_gbeta(3.0, 1.0, 2.0, 2.0), (0.625, 0.375));
}

#[test]
fn confusion_hand_fixture() {
    let (c1, c2) = (label("AF"), label("SB"));
    let pred = [LabelSet::from_indices([c1, c2])];
    let truth = [LabelSet::single(c1)];
    let conf = multilabel_confusion(&pred, &truth).unwrap();
    // rows are predicted classes, columns true
    assert_eq!(conf.a[c1][c1], 0.5);
    assert_eq!(conf.a[c2][c1], 0.5);
    assert_eq!(conf.total(), 1.0);
}

#[test]
fn perfect_and_inactive_anchors() {
    let snr = label("SNR");
    let truth: Vec<LabelSet> = (0..12)
        .map(|i| LabelSet::from_indices([i % 5, 7 + i % 3]))
        .collect();
    let w = LabelWeightMatrix::identity();
    let perfect = normalized_challenge_score(&truth, &truth, &w).unwrap();
    assert_eq!(perfect.raw, truth.len() as f64);
    assert_eq!(perfect.normalized, Some(1.0));
    let inactive = vec![LabelSet::single(snr); truth.len()];
    assert_eq!(normalized_challenge_score(&inactive, &truth, &w).unwrap().normalized, Some(0.0));
}

#[test]
fn macro_f1_hand_fixture() {
    let (a, b, c) = (label("AF"), label("SB"), label("STach"));
    let truth = [
        LabelSet::single(a),
        LabelSet::single(a),
        LabelSet::single(b),
        LabelSet::from_indices([b, c]),
    ];
    let pred = [
        LabelSet::single(a),
        LabelSet::single(b),
        LabelSet::single(b),
        LabelSet::single(b),
    ];
    // AF: tp 1 fn 1 -> 2/3; SB: tp 2 fp 1 -> 0.8; STach: fn 1 -> 0
    let r = label_f1_and_accuracy(&pred, &truth).unwrap();
    assert!((r.per_label[a].unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert!((r.per_label[b].unwrap() - 0.8).abs() < 1e-15);
    assert_eq!(r.per_label[c], Some(0.0));
    assert_eq!(r.per_label.iter().flatten().count(), 3);
    assert!((r.macro_f1 - (2.0 / 3.0 + 0.8) / 3.0).abs() < 1e-15);
    assert_eq!(r.accuracy, 0.5);
}

#[test]
fn evaluate_reports_every_field() {
    let mut rng = rng_from_seed(12);
    let truth: Vec<LabelSet> = (0..40)
        .map(|_| LabelSet::single([label("AF"), label("SB"), label("SNR")][rng.random_range(0..3)]))
        .collect();
    let scores: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| (0..N_LABELS).map(|k| if t.contains(k) { 0.7 } else { rng.random_range(0.0..0.6) }).collect())
        .collect();
    let pred: Vec<LabelSet> = scores
        .iter()
        .map(|s| LabelSet::from_indices((0..N_LABELS).filter(|&k| s[k] >= 0.65)))
        .collect();
    let r = evaluate(&pred, &scores, &truth, &LabelWeightMatrix::default_clinical()).unwrap();
    assert_eq!(r.macro_f1, 1.0);
    assert_eq!(r.accuracy, 1.0);
    assert_eq!(r.challenge.normalized, Some(1.0));
    assert_eq!(r.auroc, Some(1.0));
    assert_eq!(r.per_label_auroc[label("AF")], Some(1.0));
    assert_eq!(r.per_label_auroc[label("IAVB")], None);
}

#[test]
fn pearson_permutation_test_detects_correlation() {
    let mut rng = rng_from_seed(13);
    let x: Vec<f64> = (0..60).map(|_| rng.random_range(0.0..1.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 0.1 * rng.random_range(0.0..1.0)).collect();
    let (r, p) = pearson_with_permutation_p(&x, &y, 500, 1).unwrap();
    assert!(r > 0.95);
    assert!(p < 0.01);
    let noise: Vec<f64> = (0..60).map(|_| rng.random_range(0.0..1.0)).collect();
    let (_, p) = pearson_with_permutation_p(&x, &noise, 500, 1).unwrap();
    assert!(p > 0.01);
    assert_eq!(pearson_with_permutation_p(&x, &y, 200, 5), pearson_with_permutation_p(&x, &y, 200, 5));
}
