//! Challenge score and the multilabel classification metric suite.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::labels::{LabelSet, LabelTable, LabelWeightMatrix, N_LABELS};
use crate::rng::{derive_seed, rng_from_seed};

/// `a[i][j]`: mass of records classified as `i` that belong to `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilabelConfusion {
    pub a: [[f64; N_LABELS]; N_LABELS],
}

impl MultilabelConfusion {
    pub fn total(&self) -> f64 {
        self.a.iter().flatten().sum()
    }
}

/// Each record adds `1 / |pred ∪ truth|` to every cell `(i in pred, j in truth)`.
pub fn multilabel_confusion(pred: &[LabelSet], truth: &[LabelSet]) -> Result<MultilabelConfusion> {
    if pred.len() != truth.len() {
        return Err(Error::ContractViolation("prediction and truth lists differ in length".into()));
    }
    let mut a = [[0.0; N_LABELS]; N_LABELS];
    for (p, t) in pred.iter().zip(truth) {
        if p.is_empty() {
            return Err(Error::ContractViolation("empty predicted label set".into()));
        }
        let norm = p.union(t).len() as f64;
        for i in p.iter() {
            for j in t.iter() {
                a[i][j] += 1.0 / norm;
            }
        }
    }
    Ok(MultilabelConfusion { a })
}

pub fn challenge_score(conf: &MultilabelConfusion, w: &LabelWeightMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..N_LABELS {
        for j in 0..N_LABELS {
            s += w.get(i, j) * conf.a[i][j];
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChallengeScore {
    pub raw: f64,
    /// `None` when the perfect and the inactive classifier score alike.
    pub normalized: Option<f64>,
}

/// Raw score and its normalization between the always-normal classifier (0)
/// and the perfect classifier (1).
pub fn normalized_challenge_score(
    pred: &[LabelSet],
    truth: &[LabelSet],
    w: &LabelWeightMatrix,
) -> Result<ChallengeScore> {
    let raw = challenge_score(&multilabel_confusion(pred, truth)?, w);
    // a record with no true labels contributes nothing to the perfect score
    let perfect_pred: Vec<LabelSet> = truth
        .iter()
        .map(|t| if t.is_empty() { LabelSet::single(LabelTable.normal_class()) } else { *t })
        .collect();
    let raw_true = challenge_score(&multilabel_confusion(&perfect_pred, truth)?, w);
    let inactive = vec![LabelSet::single(LabelTable.normal_class()); truth.len()];
    let raw_inactive = challenge_score(&multilabel_confusion(&inactive, truth)?, w);
    let normalized = if raw_true != raw_inactive {
        Some((raw - raw_inactive) / (raw_true - raw_inactive))
    } else {
        None
    };
    Ok(ChallengeScore { raw, normalized })
}

/// `(F_beta, G_beta)`; a zero denominator gives 0.
pub fn fbeta_gbeta(tp: f64, fp: f64, fn_: f64, beta: f64) -> (f64, f64) {
    let b2 = beta * beta;
    let fd = (1.0 + b2) * tp + fp + b2 * fn_;
    let gd = tp + fp + beta * fn_;
    let f = if fd > 0.0 { (1.0 + b2) * tp / fd } else { 0.0 };
    let g = if gd > 0.0 { tp / gd } else { 0.0 };
    (f, g)
}

fn check_binary(scores: &[f64], y: &[u8]) -> Option<(usize, usize)> {
    if scores.len() != y.len() {
        return None;
    }
    let pos = y.iter().filter(|&&v| v != 0).count();
    let neg = y.len() - pos;
    (pos > 0 && neg > 0).then_some((pos, neg))
}

/// Mann-Whitney AUROC with average ranks for ties. `None` for a single class.
pub fn auroc(scores: &[f64], y: &[u8]) -> Option<f64> {
    let (pos, neg) = check_binary(scores, y)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if y[k] != 0 {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Some(u / (pos as f64 * neg as f64))
}

/// Area under the precision-recall curve: thresholds at each distinct score,
/// precision replaced by its envelope (best precision at equal or higher
/// recall), integrated over recall steps. `None` for a single class.
pub fn auprc(scores: &[f64], y: &[u8]) -> Option<f64> {
    let (pos, _) = check_binary(scores, y)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            if y[idx[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((tp as f64 / pos as f64, tp as f64 / (tp + fp) as f64));
    }
    for k in (0..points.len().saturating_sub(1)).rev() {
        points[k].1 = points[k].1.max(points[k + 1].1);
    }
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in points {
        area += (r - prev_recall) * p;
        prev_recall = r;
    }
    Some(area)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LabelCounts {
    pub tp: f64,
    pub fp: f64,
    pub fn_: f64,
    pub tn: f64,
}

pub fn label_counts(pred: &[LabelSet], truth: &[LabelSet]) -> [LabelCounts; N_LABELS] {
    let mut c = [LabelCounts::default(); N_LABELS];
    for (p, t) in pred.iter().zip(truth) {
        for (k, ck) in c.iter_mut().enumerate() {
            match (p.contains(k), t.contains(k)) {
                (true, true) => ck.tp += 1.0,
                (true, false) => ck.fp += 1.0,
                (false, true) => ck.fn_ += 1.0,
                (false, false) => ck.tn += 1.0,
            }
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct F1Report {
    /// `None` for labels absent from both predictions and truth.
    pub per_label: [Option<f64>; N_LABELS],
    pub macro_f1: f64,
    /// Fraction of records whose predicted set equals the true set.
    pub accuracy: f64,
}

pub fn label_f1_and_accuracy(pred: &[LabelSet], truth: &[LabelSet]) -> Result<F1Report> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::ContractViolation("prediction and truth lists must be equal and non-empty".into()));
    }
    let counts = label_counts(pred, truth);
    let mut per_label = [None; N_LABELS];
    let mut sum = 0.0;
    let mut n = 0;
    for (k, c) in counts.iter().enumerate() {
        if c.tp + c.fp + c.fn_ > 0.0 {
            let f = fbeta_gbeta(c.tp, c.fp, c.fn_, 1.0).0;
            per_label[k] = Some(f);
            sum += f;
            n += 1;
        }
    }
    let exact = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(F1Report {
        per_label,
        macro_f1: if n > 0 { sum / n as f64 } else { 0.0 },
        accuracy: exact as f64 / pred.len() as f64,
    })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson r and the two-sided permutation p-value `(count + 1) / (n_perm + 1)`,
/// counting permutations of `y` with `|r_perm| >= |r|`. Permutation `i` uses
/// a seed derived from `seed` and `i`.
pub fn pearson_with_permutation_p(x: &[f64], y: &[f64], n_perm: usize, seed: u64) -> Option<(f64, f64)> {
    let r = pearson(x, y)?;
    let mut perm = y.to_vec();
    let mut count = 0usize;
    for i in 0..n_perm {
        perm.copy_from_slice(y);
        perm.shuffle(&mut rng_from_seed(derive_seed(seed, i as u64)));
        let rp = pearson(x, &perm).unwrap_or(0.0);
        // tolerance keeps the identity permutation counted despite rounding
        if rp.abs() >= r.abs() - 1e-12 {
            count += 1;
        }
    }
    Some((r, (count + 1) as f64 / (n_perm + 1) as f64))
}

/// Every validation metric for one set of predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub challenge: ChallengeScore,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub f_beta: f64,
    pub g_beta: f64,
    pub per_label_f1: [Option<f64>; N_LABELS],
    pub per_label_auroc: [Option<f64>; N_LABELS],
    pub per_label_auprc: [Option<f64>; N_LABELS],
}

pub const BETA: f64 = 2.0;

fn mean_defined(v: &[Option<f64>]) -> Option<f64> {
    let d: Vec<f64> = v.iter().flatten().copied().collect();
    (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
}

/// `scores[r][k]` is the probability of label `k` for record `r`.
pub fn evaluate(
    pred: &[LabelSet],
    scores: &[Vec<f64>],
    truth: &[LabelSet],
    w: &LabelWeightMatrix,
) -> Result<MetricReport> {
    if scores.len() != truth.len() || scores.iter().any(|s| s.len() != N_LABELS) {
        return Err(Error::ContractViolation("score matrix shape mismatch".into()));
    }
    let challenge = normalized_challenge_score(pred, truth, w)?;
    let f1 = label_f1_and_accuracy(pred, truth)?;
    let counts = label_counts(pred, truth);
    let mut per_label_auroc = [None; N_LABELS];
    let mut per_label_auprc = [None; N_LABELS];
    let mut fb = Vec::new();
    let mut gb = Vec::new();
    for k in 0..N_LABELS {
        let s: Vec<f64> = scores.iter().map(|r| r[k]).collect();
        let y: Vec<u8> = truth.iter().map(|t| t.contains(k) as u8).collect();
        per_label_auroc[k] = auroc(&s, &y);
        per_label_auprc[k] = auprc(&s, &y);
        let c = counts[k];
        if c.tp + c.fp + c.fn_ > 0.0 {
            let (f, g) = fbeta_gbeta(c.tp, c.fp, c.fn_, BETA);
            fb.push(f);
            gb.push(g);
        }
    }
    let avg = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(MetricReport {
        challenge,
        auroc: mean_defined(&per_label_auroc),
        auprc: mean_defined(&per_label_auprc),
        accuracy: f1.accuracy,
        macro_f1: f1.macro_f1,
        f_beta: avg(&fb),
        g_beta: avg(&gb),
        per_label_f1: f1.per_label,
        per_label_auroc,
        per_label_auprc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::label;

    fn set(abbrevs: &[&str]) -> LabelSet {
        LabelSet::from_indices(abbrevs.iter().map(|a| label(a)))
    }

    #[test]
    fn fbeta_examples() {
        assert_eq!(fbeta_gbeta(3.0, 1.0, 2.0, 2.0), (0.625, 0.375));
        assert_eq!(fbeta_gbeta(4.0, 0.0, 0.0, 2.0), (1.0, 1.0));
        assert_eq!(fbeta_gbeta(0.0, 2.0, 1.0, 2.0), (0.0, 0.0));
        assert_eq!(fbeta_gbeta(0.0, 0.0, 0.0, 2.0), (0.0, 0.0));
    }

    #[test]
    fn confusion_splits_mass() {
        let c = multilabel_confusion(&[set(&["AF", "PAC"])], &[set(&["AF"])]).unwrap();
        assert_eq!(c.a[label("AF")][label("AF")], 0.5);
        assert_eq!(c.a[label("PAC")][label("AF")], 0.5);
        assert_eq!(c.total(), 1.0);
        assert!(multilabel_confusion(&[LabelSet::empty()], &[set(&["AF"])]).is_err());
    }

    #[test]
    fn perfect_and_inactive_anchor_the_score() {
        let truth = vec![set(&["AF"]), set(&["SB"]), set(&["SNR"]), set(&["STach"])];
        let w = LabelWeightMatrix::identity();
        let perfect = normalized_challenge_score(&truth, &truth, &w).unwrap();
        assert_eq!(perfect.raw, 4.0);
        assert_eq!(perfect.normalized, Some(1.0));
        let inactive = vec![set(&["SNR"]); 4];
        assert_eq!(normalized_challenge_score(&inactive, &truth, &w).unwrap().normalized, Some(0.0));
        let all_normal = vec![set(&["SNR"]); 2];
        assert_eq!(
            normalized_challenge_score(&all_normal, &all_normal, &w).unwrap().normalized,
            None
        );
    }

    #[test]
    fn auroc_cases() {
        assert_eq!(auroc(&[0.9, 0.8, 0.3, 0.2], &[1, 0, 1, 0]), Some(0.75));
        assert_eq!(auroc(&[0.5; 4], &[1, 0, 1, 0]), Some(0.5));
        assert_eq!(auroc(&[0.9, 0.8, 0.1], &[1, 1, 0]), Some(1.0));
        assert_eq!(auroc(&[0.9, 0.8], &[1, 1]), None);
    }

    #[test]
    fn auprc_cases() {
        assert_eq!(auprc(&[0.9, 0.8, 0.1], &[1, 1, 0]), Some(1.0));
        // ranks +,-,+ : recall 0.5 at precision 1, recall 1 at precision 2/3
        let a = auprc(&[0.9, 0.8, 0.3], &[1, 0, 1]).unwrap();
        assert!((a - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(auprc(&[0.5; 4], &[1, 0, 0, 0]), Some(0.25));
    }

    #[test]
    fn f1_and_accuracy() {
        let truth = vec![set(&["AF"]), set(&["SB"])];
        let r = label_f1_and_accuracy(&truth, &truth).unwrap();
        assert_eq!((r.accuracy, r.macro_f1), (1.0, 1.0));
        let pred = vec![set(&["AF", "SB"]), set(&["SB"])];
        let r = label_f1_and_accuracy(&pred, &truth).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.per_label[label("AF")], Some(1.0));
        assert_eq!(r.per_label[label("SB")], Some(2.0 / 3.0));
    }

    #[test]
    fn pearson_cases() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let (r, p) = pearson_with_permutation_p(&x, &x, 999, 1).unwrap();
        assert_eq!(r, 1.0);
        assert_eq!(p, 1.0 / 1000.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson(&x, &neg), Some(-1.0));
        assert_eq!(pearson(&x, &[1.0; 10]), None);
        assert_eq!(
            pearson_with_permutation_p(&x, &neg, 50, 3),
            pearson_with_permutation_p(&x, &neg, 50, 3)
        );
    }
}
