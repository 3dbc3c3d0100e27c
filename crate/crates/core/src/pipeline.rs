//! Two-phase training protocol.
//!
//! Each run shuffles the records into a training and a validation split,
//! trains one boosted classifier per diagnosis on every feature (phase one),
//! averages their gain importances, keeps the top-K features and retrains on
//! those alone (phase two). Phase two is scored on the validation split.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::assemble::{manifest_hash, FeatureMatrix};
use crate::error::{Error, Result};
use crate::gbdt::{fit_boosted, importance_gain, predict_columns, BoostedModel, Columns, GbdtParams, Labeled};
use crate::labels::{LabelSet, LabelTable, LabelWeightMatrix, DIAGNOSES, N_LABELS};
use crate::metrics::{evaluate, MetricReport};
use crate::rng::{derive_seed, rng_from_seed};

/// Label-similarity weight at or above which a record counts as a positive
/// example for a related class.
pub const RELATED_POSITIVE_CUTOFF: f64 = 0.5;
pub const RELATED_POSITIVE_WEIGHT: f64 = 0.5;
pub const MIN_RECORDS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_runs: usize,
    pub split_ratio: f64,
    pub top_k: usize,
    pub seed: u64,
    pub gbdt: GbdtParams,
    pub threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_runs: 100,
            split_ratio: 0.85,
            top_k: 1000,
            seed: 0,
            gbdt: GbdtParams::default(),
            threshold: 0.5,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Parameter("split_ratio must be in (0, 1)".into()));
        }
        if self.top_k == 0 || self.n_runs == 0 {
            return Err(Error::Parameter("top_k and n_runs must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Parameter("threshold must be in [0, 1]".into()));
        }
        self.gbdt.validate()
    }
}

/// Feature rows with their label sets, aligned by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub labels: Vec<LabelSet>,
}

impl Dataset {
    pub fn new(features: FeatureMatrix, labels: Vec<LabelSet>) -> Result<Self> {
        if features.n_rows() != labels.len() {
            return Err(Error::ContractViolation(format!(
                "{} feature rows but {} label sets",
                features.n_rows(),
                labels.len()
            )));
        }
        Ok(Self { features, labels })
    }

    /// Joins labels to feature rows by record id.
    pub fn join(features: FeatureMatrix, labels: &[(String, LabelSet)]) -> Result<Self> {
        let map: std::collections::HashMap<&str, LabelSet> =
            labels.iter().map(|(id, s)| (id.as_str(), *s)).collect();
        let sets = features
            .ids
            .iter()
            .map(|id| {
                map.get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Format(format!("no labels for record {id}")))
            })
            .collect::<Result<_>>()?;
        Self::new(features, sets)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleWeight {
    pub y: u8,
    pub w: f64,
    /// The record had no labels and was treated as negative.
    pub unlabeled: bool,
}

/// Target and instance weight of one record for the classifier of `target`:
/// records carrying `target` are positives with weight 1; records with a
/// label whose similarity to `target` is at least 0.5 are positives with
/// weight 0.5; everything else is a negative with weight 1.
pub fn build_sample_weights(target: usize, labels: &LabelSet, w: &LabelWeightMatrix) -> SampleWeight {
    if labels.contains(target) {
        return SampleWeight { y: 1, w: 1.0, unlabeled: false };
    }
    let m = labels.iter().map(|j| w.get(target, j)).fold(0.0, f64::max);
    if m >= RELATED_POSITIVE_CUTOFF {
        SampleWeight {
            y: 1,
            w: RELATED_POSITIVE_WEIGHT,
            unlabeled: false,
        }
    } else {
        SampleWeight {
            y: 0,
            w: 1.0,
            unlabeled: labels.is_empty(),
        }
    }
}

/// Negatives over positives, by count.
pub fn scale_pos_weight(y: &[u8]) -> Result<f64> {
    let pos = y.iter().filter(|&&v| v == 1).count();
    let neg = y.len() - pos;
    if pos == 0 {
        return Err(Error::SkippedLabel("no positive examples".into()));
    }
    if neg == 0 {
        return Err(Error::SkippedLabel("no negative examples".into()));
    }
    Ok(neg as f64 / pos as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
}

/// Seeded uniform shuffle of `0..n`; the first `ceil(ratio * n)` go to training.
pub fn split_train_valid(n: usize, ratio: f64, seed: u64) -> Result<Split> {
    if n < MIN_RECORDS {
        return Err(Error::Pipeline(format!("need at least {MIN_RECORDS} records, have {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let n_train = ((ratio * n as f64 - 1e-9).ceil() as usize).clamp(1, n - 1);
    let valid = idx.split_off(n_train);
    Ok(Split { train: idx, valid })
}

pub fn split_85_15(n: usize, seed: u64) -> Result<Split> {
    split_train_valid(n, 0.85, seed)
}

/// Indices of the `k` largest importances, returned in ascending column
/// order. Ties rank the lower column first.
pub fn select_top_k(importance: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..importance.len()).collect();
    idx.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Label score vector to binary outputs: `score >= tau` is positive; if
/// nothing passes, the highest score (lowest index on ties) is set.
pub fn binarize(scores: &[f64], tau: f64) -> Vec<u8> {
    let mut out: Vec<u8> = scores.iter().map(|&s| (s >= tau) as u8).collect();
    if !out.contains(&1) && !scores.is_empty() {
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        out[best] = 1;
    }
    out
}

/// Column store restricted to `cols` over `rows`, with unknown ages filled.
fn columns_for(m: &FeatureMatrix, rows: &[usize], cols: &[usize], age_fill: f64) -> Result<Columns> {
    let age_col = m.column_index(crate::assemble::META_AGE);
    Columns::new(
        cols.iter()
            .map(|&c| {
                rows.iter()
                    .map(|&r| {
                        if Some(c) == age_col && m.unknown_age[r] {
                            age_fill
                        } else {
                            m.get(r, c)
                        }
                    })
                    .collect()
            })
            .collect(),
    )
}

/// Median known age over `rows`; 0 without an age column or known ages.
fn known_age_median(m: &FeatureMatrix, rows: &[usize]) -> f64 {
    let Some(c) = m.column_index(crate::assemble::META_AGE) else {
        return 0.0;
    };
    let mut ages: Vec<f64> = rows.iter().filter(|&&r| !m.unknown_age[r]).map(|&r| m.get(r, c)).collect();
    if ages.is_empty() {
        return 0.0;
    }
    ages.sort_by(f64::total_cmp);
    crate::features::stats::quantile_sorted(&ages, 0.5)
}

/// 27 per-label classifiers over a named column subset.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    /// `None` for labels skipped during training.
    pub models: Vec<Option<BoostedModel>>,
    pub columns: Vec<String>,
    pub age_fill: f64,
    pub threshold: f64,
}

impl ModelSet {
    pub fn manifest_hash(&self) -> String {
        manifest_hash(self.columns.iter().map(String::as_str))
    }

    pub fn skipped(&self) -> Vec<usize> {
        (0..N_LABELS).filter(|&k| self.models[k].is_none()).collect()
    }

    /// Column indices of this set's features in `m`; every model column must
    /// be present by name.
    pub fn align(&self, m: &FeatureMatrix) -> Result<Vec<usize>> {
        self.columns
            .iter()
            .map(|name| {
                m.column_index(name).ok_or_else(|| Error::ManifestMismatch {
                    expected: self.manifest_hash(),
                    found: m.manifest_hash(),
                })
            })
            .collect()
    }

    /// Per-row label probabilities; skipped labels score 0.
    pub fn predict_scores(&self, m: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        let cols = self.align(m)?;
        let rows: Vec<usize> = (0..m.n_rows()).collect();
        let x = columns_for(m, &rows, &cols, self.age_fill)?;
        self.scores_on(&x)
    }

    fn scores_on(&self, x: &Columns) -> Result<Vec<Vec<f64>>> {
        let mut scores = vec![vec![0.0; N_LABELS]; x.n_rows()];
        for (k, model) in self.models.iter().enumerate() {
            if let Some(model) = model {
                for (r, p) in predict_columns(model, x)?.into_iter().enumerate() {
                    scores[r][k] = p;
                }
            }
        }
        Ok(scores)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("model-set v1\n");
        let _ = writeln!(out, "threshold {:.17e}", self.threshold);
        let _ = writeln!(out, "age_fill {:.17e}", self.age_fill);
        let _ = writeln!(out, "columns {}", self.columns.len());
        for c in &self.columns {
            let _ = writeln!(out, "{c}");
        }
        for (k, m) in self.models.iter().enumerate() {
            match m {
                None => {
                    let _ = writeln!(out, "label {} skipped", DIAGNOSES[k].abbrev);
                }
                Some(m) => {
                    let _ = writeln!(out, "label {}", DIAGNOSES[k].abbrev);
                    out.push_str(&m.to_text());
                    out.push_str("end\n");
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("model set: {m}"));
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        if lines.next().map(str::trim) != Some("model-set v1") {
            return Err(bad("unknown format"));
        }
        let mut value = |key: &str| -> Result<String> {
            let l = lines.next().ok_or_else(|| bad("truncated"))?;
            l.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| bad(&format!("expected {key}")))
        };
        let threshold: f64 = value("threshold")?.parse().map_err(|_| bad("threshold"))?;
        let age_fill: f64 = value("age_fill")?.parse().map_err(|_| bad("age_fill"))?;
        let n_cols: usize = value("columns")?.parse().map_err(|_| bad("columns"))?;
        let mut lines = text.lines().filter(|l| !l.starts_with('#')).skip(4);
        let columns: Vec<String> = lines.by_ref().take(n_cols).map(|s| s.trim().to_string()).collect();
        if columns.len() != n_cols {
            return Err(bad("truncated column list"));
        }
        let hash = manifest_hash(columns.iter().map(String::as_str));
        let mut models = vec![None; N_LABELS];
        let mut seen = [false; N_LABELS];
        while let Some(line) = lines.next() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            if parts.next() != Some("label") {
                return Err(bad(&format!("unexpected line {line:?}")));
            }
            let k = parts
                .next()
                .and_then(|a| LabelTable.resolve(a))
                .ok_or_else(|| bad("unknown label"))?;
            seen[k] = true;
            if parts.next() == Some("skipped") {
                continue;
            }
            let mut block = String::new();
            for l in lines.by_ref() {
                if l.trim() == "end" {
                    break;
                }
                block.push_str(l);
                block.push('\n');
            }
            models[k] = Some(BoostedModel::from_text(&block, &hash)?);
        }
        if seen.iter().any(|s| !s) {
            return Err(bad("missing labels"));
        }
        Ok(Self {
            models,
            columns,
            age_fill,
            threshold,
        })
    }
}

/// Trains the 27 per-label classifiers on one split and column subset.
fn train_label_models(
    data: &Dataset,
    split: &Split,
    cols: &[usize],
    w: &LabelWeightMatrix,
    config: &RunConfig,
    seed: u64,
) -> Result<(ModelSet, Columns)> {
    let m = &data.features;
    let age_fill = known_age_median(m, &split.train);
    let train_x = columns_for(m, &split.train, cols, age_fill)?;
    let valid_x = columns_for(m, &split.valid, cols, age_fill)?;
    let column_names: Vec<String> = cols.iter().map(|&c| m.columns[c].clone()).collect();
    let hash = manifest_hash(column_names.iter().map(String::as_str));

    let targets = |rows: &[usize], k: usize| -> (Vec<u8>, Vec<f64>) {
        rows.iter()
            .map(|&r| {
                let s = build_sample_weights(k, &data.labels[r], w);
                (s.y, s.w)
            })
            .unzip()
    };
    let models: Vec<Option<BoostedModel>> = (0..N_LABELS)
        .into_par_iter()
        .map(|k| -> Result<Option<BoostedModel>> {
            let (ty, mut tw) = targets(&split.train, k);
            let factor = match scale_pos_weight(&ty) {
                Ok(f) => f,
                Err(_) => return Ok(None),
            };
            let (vy, mut vw) = targets(&split.valid, k);
            for (wi, &yi) in tw.iter_mut().zip(&ty) {
                if yi == 1 {
                    *wi *= factor;
                }
            }
            for (wi, &yi) in vw.iter_mut().zip(&vy) {
                if yi == 1 {
                    *wi *= factor;
                }
            }
            let mut model = fit_boosted(
                Labeled { x: &train_x, y: &ty, w: &tw },
                Some(Labeled { x: &valid_x, y: &vy, w: &vw }),
                &config.gbdt,
                derive_seed(seed, k as u64),
            )?;
            model.manifest_hash = hash.clone();
            Ok(Some(model))
        })
        .collect::<Result<_>>()?;
    if models.iter().all(Option::is_none) {
        return Err(Error::Pipeline("every label was skipped".into()));
    }
    Ok((
        ModelSet {
            models,
            columns: column_names,
            age_fill,
            threshold: config.threshold,
        },
        valid_x,
    ))
}

/// Validation scores, binarized predictions and metrics of a model set.
#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub scores: Vec<Vec<f64>>,
    pub predictions: Vec<LabelSet>,
    pub metrics: MetricReport,
}

fn validate_models(
    models: &ModelSet,
    valid_x: &Columns,
    data: &Dataset,
    split: &Split,
    w: &LabelWeightMatrix,
) -> Result<Validation> {
    let scores = models.scores_on(valid_x)?;
    let predictions: Vec<LabelSet> = scores
        .iter()
        .map(|s| LabelSet::from_binary(&binarize(s, models.threshold)))
        .collect();
    let truth: Vec<LabelSet> = split.valid.iter().map(|&r| data.labels[r]).collect();
    let metrics = evaluate(&predictions, &scores, &truth, w)?;
    Ok(Validation {
        scores,
        predictions,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseResult {
    pub models: ModelSet,
    pub validation: Validation,
    /// Mean gain importance over the trained classifiers, per model column.
    pub importance: Vec<f64>,
}

fn run_phase(
    data: &Dataset,
    split: &Split,
    cols: &[usize],
    w: &LabelWeightMatrix,
    config: &RunConfig,
    seed: u64,
) -> Result<PhaseResult> {
    let (models, valid_x) = train_label_models(data, split, cols, w, config, seed)?;
    let validation = validate_models(&models, &valid_x, data, split, w)?;
    let mut importance = vec![0.0; cols.len()];
    let mut trained = 0;
    for m in models.models.iter().flatten() {
        for (acc, v) in importance.iter_mut().zip(importance_gain(m)) {
            *acc += v;
        }
        trained += 1;
    }
    for v in importance.iter_mut() {
        *v /= trained as f64;
    }
    Ok(PhaseResult {
        models,
        validation,
        importance,
    })
}

/// Every feature; the importance vector is the phase-one estimate.
pub fn phase_one(data: &Dataset, split: &Split, w: &LabelWeightMatrix, config: &RunConfig, seed: u64) -> Result<PhaseResult> {
    let cols: Vec<usize> = (0..data.features.n_cols()).collect();
    run_phase(data, split, &cols, w, config, seed)
}

/// Only the given columns, on the same split.
pub fn phase_two(
    data: &Dataset,
    split: &Split,
    cols: &[usize],
    w: &LabelWeightMatrix,
    config: &RunConfig,
    seed: u64,
) -> Result<PhaseResult> {
    if cols.is_empty() {
        return Err(Error::Parameter("phase two needs at least one feature".into()));
    }
    run_phase(data, split, cols, w, config, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    pub split: Split,
    pub phase_one: PhaseResult,
    pub top_k: Vec<usize>,
    pub phase_two: PhaseResult,
}

impl RunReport {
    pub fn skipped_labels(&self) -> Vec<usize> {
        self.phase_two.models.skipped()
    }
}

/// Seed of run `index`: the base seed plus the index.
pub fn run_seed(config: &RunConfig, index: usize) -> u64 {
    config.seed.wrapping_add(index as u64)
}

pub fn run_once(data: &Dataset, w: &LabelWeightMatrix, config: &RunConfig, index: usize) -> Result<RunReport> {
    config.validate()?;
    let seed = run_seed(config, index);
    let split = split_train_valid(data.n_rows(), config.split_ratio, seed)?;
    let p1 = phase_one(data, &split, w, config, seed)?;
    let k = config.top_k.min(data.features.n_cols());
    let top = select_top_k(&p1.importance, k);
    let p2 = phase_two(data, &split, &top, w, config, seed)?;
    Ok(RunReport {
        run: index,
        seed,
        split,
        phase_one: p1,
        top_k: top,
        phase_two: p2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedReport {
    pub runs: Vec<RunReport>,
    pub failures: Vec<(usize, Error)>,
}

impl RepeatedReport {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

pub fn run_repeated(data: &Dataset, w: &LabelWeightMatrix, config: &RunConfig) -> Result<RepeatedReport> {
    config.validate()?;
    let mut report = RepeatedReport {
        runs: Vec::new(),
        failures: Vec::new(),
    };
    for i in 0..config.n_runs {
        match run_once(data, w, config, i) {
            Ok(r) => report.runs.push(r),
            Err(e) => {
                log::warn!("run {i} failed: {e}");
                report.failures.push((i, e));
            }
        }
    }
    if report.runs.is_empty() {
        return Err(Error::Pipeline("every run failed".into()));
    }
    Ok(report)
}

/// Mean phase-one importance over archived runs, tied to a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportancePrior {
    pub columns: Vec<String>,
    pub importance: Vec<f64>,
    pub n_runs: usize,
}

impl ImportancePrior {
    pub fn from_runs(columns: Vec<String>, runs: &[Vec<f64>]) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Parameter("no archived runs".into()));
        }
        if runs.iter().any(|r| r.len() != columns.len()) {
            return Err(Error::ContractViolation("archived importance length differs from manifest".into()));
        }
        let mut importance = vec![0.0; columns.len()];
        for r in runs {
            for (acc, v) in importance.iter_mut().zip(r) {
                *acc += v;
            }
        }
        for v in importance.iter_mut() {
            *v /= runs.len() as f64;
        }
        Ok(Self {
            columns,
            importance,
            n_runs: runs.len(),
        })
    }

    pub fn from_reports(columns: Vec<String>, reports: &[RunReport]) -> Result<Self> {
        let runs: Vec<Vec<f64>> = reports.iter().map(|r| r.phase_one.importance.clone()).collect();
        Self::from_runs(columns, &runs)
    }

    pub fn manifest_hash(&self) -> String {
        manifest_hash(self.columns.iter().map(String::as_str))
    }

    /// `manifest,<hash>` and `runs,<n>` lines, then `feature,importance` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "manifest,{}", self.manifest_hash());
        let _ = writeln!(out, "runs,{}", self.n_runs);
        out.push_str("feature,importance\n");
        for (c, v) in self.columns.iter().zip(&self.importance) {
            let _ = writeln!(out, "{c},{v}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Format(format!("importance prior: {m}"));
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let hash = lines
            .next()
            .and_then(|l| l.strip_prefix("manifest,"))
            .ok_or_else(|| bad("missing manifest line".into()))?
            .to_string();
        let n_runs: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("runs,"))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing runs line".into()))?;
        if lines.next() != Some("feature,importance") {
            return Err(bad("missing column header".into()));
        }
        let mut columns = Vec::new();
        let mut importance = Vec::new();
        for l in lines {
            let (name, v) = l.rsplit_once(',').ok_or_else(|| bad(format!("bad row {l:?}")))?;
            let v: f64 = v.parse().map_err(|_| bad(format!("bad value in {l:?}")))?;
            if !(v >= 0.0) {
                return Err(bad(format!("negative importance in {l:?}")));
            }
            columns.push(name.to_string());
            importance.push(v);
        }
        let prior = Self {
            columns,
            importance,
            n_runs,
        };
        if prior.manifest_hash() != hash {
            return Err(bad("manifest hash does not match the listed features".into()));
        }
        Ok(prior)
    }
}

/// Phase two on the prior's top-K features, skipping phase one.
pub fn train_with_prior(
    data: &Dataset,
    prior: &ImportancePrior,
    w: &LabelWeightMatrix,
    config: &RunConfig,
    index: usize,
) -> Result<(Split, Vec<usize>, PhaseResult)> {
    config.validate()?;
    let current = data.features.manifest_hash();
    if prior.manifest_hash() != current {
        return Err(Error::PriorMismatch {
            prior: prior.manifest_hash(),
            current,
        });
    }
    let seed = run_seed(config, index);
    let split = split_train_valid(data.n_rows(), config.split_ratio, seed)?;
    let top = select_top_k(&prior.importance, config.top_k.min(prior.importance.len()));
    let p2 = phase_two(data, &split, &top, w, config, seed)?;
    Ok((split, top, p2))
}

/// One CSV row per run, phase, label (or `ALL`) and metric.
pub fn report_csv(report: &RepeatedReport) -> String {
    let mut out = String::from("run,phase,label,metric,value\n");
    for r in &report.runs {
        for (phase, p) in [("one", &r.phase_one), ("two", &r.phase_two)] {
            for (name, v) in overall_metrics(&p.validation.metrics) {
                if let Some(v) = v {
                    let _ = writeln!(out, "{},{phase},ALL,{name},{v}", r.run);
                }
            }
            let m = &p.validation.metrics;
            for k in 0..N_LABELS {
                let abbrev = DIAGNOSES[k].abbrev;
                for (name, v) in [
                    ("f1", m.per_label_f1[k]),
                    ("auroc", m.per_label_auroc[k]),
                    ("auprc", m.per_label_auprc[k]),
                ] {
                    if let Some(v) = v {
                        let _ = writeln!(out, "{},{phase},{abbrev},{name},{v}", r.run);
                    }
                }
            }
        }
    }
    out
}

pub fn overall_metrics(m: &MetricReport) -> Vec<(&'static str, Option<f64>)> {
    vec![
        ("challenge_raw", Some(m.challenge.raw)),
        ("challenge_normalized", m.challenge.normalized),
        ("auroc", m.auroc),
        ("auprc", m.auprc),
        ("accuracy", Some(m.accuracy)),
        ("macro_f1", Some(m.macro_f1)),
        ("f_beta", Some(m.f_beta)),
        ("g_beta", Some(m.g_beta)),
    ]
}

/// Mean and population standard deviation of the defined values.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Text table of phase-two metric means and deviations across runs.
pub fn report_summary(report: &RepeatedReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "runs: {} completed, {} failed",
        report.runs.len(),
        report.failures.len()
    );
    for (i, e) in &report.failures {
        let _ = writeln!(out, "  run {i} failed: {e}");
    }
    let _ = writeln!(out, "{:<22} {:>10} {:>10}", "metric", "mean", "std");
    let names: Vec<&str> = overall_metrics(&report.runs[0].phase_two.validation.metrics)
        .into_iter()
        .map(|(n, _)| n)
        .collect();
    for (i, name) in names.iter().enumerate() {
        let vals: Vec<f64> = report
            .runs
            .iter()
            .filter_map(|r| overall_metrics(&r.phase_two.validation.metrics)[i].1)
            .collect();
        if let Some((m, s)) = mean_std(&vals) {
            let _ = writeln!(out, "{name:<22} {m:>10.4} {s:>10.4}");
        }
    }
    let _ = writeln!(out, "per-label F1 (phase two)");
    for k in 0..N_LABELS {
        let vals: Vec<f64> = report
            .runs
            .iter()
            .filter_map(|r| r.phase_two.validation.metrics.per_label_f1[k])
            .collect();
        if let Some((m, s)) = mean_std(&vals) {
            let _ = writeln!(out, "  {:<20} {m:>10.4} {s:>10.4}", DIAGNOSES[k].abbrev);
        }
    }
    out
}
