//! Gradient-boosted regression trees for the binary logistic objective.
//!
//! Each round fits an exact greedy tree to second-order statistics of the
//! weighted logistic loss on a gradient-proportional sample of the training
//! rows. Training stops once the weighted validation loss has not improved
//! for `early_stop_rounds` rounds; predictions use the trees up to the best
//! round.

mod sample;
mod tree;

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub use sample::{gradient_sample, GradientSample};
pub use tree::{fit_tree, leaf_weight, split_gain, Columns, Node, Tree};

pub const MAX_MARGIN: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtParams {
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_hessian: f64,
    pub rounds: usize,
    pub early_stop_rounds: usize,
    pub sample_rate: f64,
    /// Sampling regularizer as a fraction of the mean absolute gradient.
    pub sample_eps_frac: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            max_depth: 6,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            min_child_hessian: 1.0,
            rounds: 500,
            early_stop_rounds: 20,
            sample_rate: 0.8,
            sample_eps_frac: 0.01,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Parameter(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0 && self.min_child_hessian >= 0.0) {
            return bad("lambda, gamma and min_child_hessian must be non-negative");
        }
        if !(self.sample_rate > 0.0 && self.sample_rate <= 1.0) {
            return bad("sample_rate must be in (0, 1]");
        }
        if !(self.sample_eps_frac >= 0.0) {
            return bad("sample_eps_frac must be non-negative");
        }
        if self.early_stop_rounds == 0 {
            return bad("early_stop_rounds must be at least 1");
        }
        Ok(())
    }
}

fn sigmoid(margin: f64) -> f64 {
    let m = margin.clamp(-MAX_MARGIN, MAX_MARGIN);
    1.0 / (1.0 + (-m).exp())
}

/// Gradient and hessian of `w * logloss(sigmoid(margin), y)` in the margin.
pub fn logistic_grad_hess(margin: f64, y: f64, w: f64) -> (f64, f64) {
    let p = sigmoid(margin);
    (w * (p - y), w * p * (1.0 - p))
}

pub fn logistic_loss(margin: f64, y: f64) -> f64 {
    // log(1 + e^m) - y m, evaluated stably
    let m = margin.clamp(-MAX_MARGIN, MAX_MARGIN);
    m.max(0.0) + (-m.abs()).exp().ln_1p() - y * m
}

fn weighted_loss(margins: &[f64], y: &[u8], w: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..margins.len() {
        num += w[i] * logistic_loss(margins[i], y[i] as f64);
        den += w[i];
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Features, binary targets and instance weights.
#[derive(Debug, Clone, Copy)]
pub struct Labeled<'a> {
    pub x: &'a Columns,
    pub y: &'a [u8],
    pub w: &'a [f64],
}

impl Labeled<'_> {
    fn check(&self) -> Result<()> {
        let n = self.x.n_rows();
        if self.y.len() != n || self.w.len() != n {
            return Err(Error::ContractViolation("targets or weights differ from row count".into()));
        }
        if self.y.iter().any(|&v| v > 1) {
            return Err(Error::ContractViolation("targets must be 0 or 1".into()));
        }
        if self.w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::ContractViolation("weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedModel {
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub base_score: f64,
    /// Number of leading trees used for prediction.
    pub best_iteration: usize,
    pub n_features: usize,
    pub manifest_hash: String,
    /// Training targets were all one class; the model is the base score only.
    pub single_class: bool,
    pub params: GbdtParams,
}

/// Per-round weighted losses (after each tree).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub valid_loss: Vec<f64>,
}

impl BoostedModel {
    pub fn constant(base_score: f64, n_features: usize, params: &GbdtParams) -> Self {
        Self {
            trees: Vec::new(),
            learning_rate: params.learning_rate,
            base_score,
            best_iteration: 0,
            n_features,
            manifest_hash: String::new(),
            single_class: false,
            params: params.clone(),
        }
    }

    pub fn margin(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features {
            return Err(Error::ContractViolation(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.n_features
            )));
        }
        let sum: f64 = self.trees[..self.best_iteration]
            .iter()
            .map(|t| t.predict(row))
            .sum();
        Ok(self.base_score + self.learning_rate * sum)
    }

    pub fn check_manifest(&self, hash: &str) -> Result<()> {
        if self.manifest_hash != hash {
            return Err(Error::ManifestMismatch {
                expected: self.manifest_hash.clone(),
                found: hash.to_string(),
            });
        }
        Ok(())
    }
}

pub fn predict_proba(model: &BoostedModel, row: &[f64]) -> Result<f64> {
    Ok(sigmoid(model.margin(row)?))
}

/// Probabilities for every row of a column store.
pub fn predict_columns(model: &BoostedModel, x: &Columns) -> Result<Vec<f64>> {
    if x.n_cols() != model.n_features {
        return Err(Error::ContractViolation(format!(
            "data has {} features, model expects {}",
            x.n_cols(),
            model.n_features
        )));
    }
    Ok((0..x.n_rows())
        .map(|r| {
            let sum: f64 = model.trees[..model.best_iteration]
                .iter()
                .map(|t| t.predict_column_row(x, r))
                .sum();
            sigmoid(model.base_score + model.learning_rate * sum)
        })
        .collect())
}

/// Total split gain per feature over the trees used for prediction.
pub fn importance_gain(model: &BoostedModel) -> Vec<f64> {
    let mut imp = vec![0.0; model.n_features];
    for t in &model.trees[..model.best_iteration] {
        for (f, _, gain) in t.splits() {
            imp[f] += gain;
        }
    }
    imp
}

pub fn fit_boosted(
    train: Labeled<'_>,
    valid: Option<Labeled<'_>>,
    params: &GbdtParams,
    seed: u64,
) -> Result<BoostedModel> {
    fit_boosted_traced(train, valid, params, seed).map(|(m, _)| m)
}

pub fn fit_boosted_traced(
    train: Labeled<'_>,
    valid: Option<Labeled<'_>>,
    params: &GbdtParams,
    seed: u64,
) -> Result<(BoostedModel, History)> {
    params.validate()?;
    train.check()?;
    let n = train.x.n_rows();
    if n == 0 {
        return Err(Error::ContractViolation("empty training set".into()));
    }
    if let Some(v) = &valid {
        v.check()?;
        if v.x.n_rows() == 0 {
            return Err(Error::ContractViolation("empty validation set".into()));
        }
        if v.x.n_cols() != train.x.n_cols() {
            return Err(Error::ContractViolation("validation column count differs".into()));
        }
    }
    let w_sum: f64 = train.w.iter().sum();
    let w_pos: f64 = (0..n).map(|i| train.w[i] * train.y[i] as f64).sum();
    if !(w_sum > 0.0) {
        return Err(Error::ContractViolation("training weights sum to zero".into()));
    }
    let mut model = BoostedModel::constant(0.0, train.x.n_cols(), params);
    let mut history = History::default();
    if w_pos <= 0.0 || w_pos >= w_sum {
        model.base_score = if w_pos <= 0.0 { -MAX_MARGIN } else { MAX_MARGIN };
        model.single_class = true;
        return Ok((model, history));
    }
    let p0 = w_pos / w_sum;
    model.base_score = (p0 / (1.0 - p0)).ln();

    let mut rng = rng_from_seed(seed);
    let mut margin = vec![model.base_score; n];
    let mut valid_margin = valid
        .as_ref()
        .map(|v| vec![model.base_score; v.x.n_rows()]);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut best_loss = f64::INFINITY;
    let mut best_round = 0;

    for round in 0..params.rounds {
        for i in 0..n {
            let (gi, hi) = logistic_grad_hess(margin[i], train.y[i] as f64, train.w[i]);
            g[i] = gi;
            h[i] = hi;
        }
        let mean_abs = g.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
        let sample = gradient_sample(&g, params.sample_rate, params.sample_eps_frac * mean_abs, &mut rng);
        if sample.scale != 1.0 {
            for &r in &sample.rows {
                g[r] *= sample.scale;
                h[r] *= sample.scale;
            }
        }
        let tree = fit_tree(train.x, &g, &h, params, &sample.rows)?;
        for (i, m) in margin.iter_mut().enumerate() {
            *m += params.learning_rate * tree.predict_column_row(train.x, i);
        }
        history.train_loss.push(weighted_loss(&margin, train.y, train.w));
        model.trees.push(tree);

        match (&valid, &mut valid_margin) {
            (Some(v), Some(vm)) => {
                let tree = model.trees.last().unwrap();
                for (i, m) in vm.iter_mut().enumerate() {
                    *m += params.learning_rate * tree.predict_column_row(v.x, i);
                }
                let loss = weighted_loss(vm, v.y, v.w);
                history.valid_loss.push(loss);
                if loss < best_loss {
                    best_loss = loss;
                    best_round = round;
                } else if round - best_round >= params.early_stop_rounds {
                    break;
                }
            }
            _ => best_round = round,
        }
    }
    model.best_iteration = if model.trees.is_empty() { 0 } else { best_round + 1 };
    Ok((model, history))
}

const MODEL_HEADER: &str = "gbdt-model v1";

fn fmt_f(v: f64) -> String {
    format!("{v:.17e}")
}

impl BoostedModel {
    /// Versioned text form: a header block, then one block per tree with its
    /// nodes in preorder (`S feature threshold gain` or `L weight`).
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_HEADER}");
        let _ = writeln!(out, "manifest {}", self.manifest_hash);
        let _ = writeln!(out, "n_features {}", self.n_features);
        let _ = writeln!(out, "learning_rate {}", fmt_f(self.learning_rate));
        let _ = writeln!(out, "base_score {}", fmt_f(self.base_score));
        let _ = writeln!(out, "best_iteration {}", self.best_iteration);
        let _ = writeln!(out, "single_class {}", self.single_class as u8);
        let _ = writeln!(
            out,
            "params {} {} {} {} {} {} {} {} {}",
            p.max_depth,
            fmt_f(p.learning_rate),
            fmt_f(p.lambda),
            fmt_f(p.gamma),
            fmt_f(p.min_child_hessian),
            p.rounds,
            p.early_stop_rounds,
            fmt_f(p.sample_rate),
            fmt_f(p.sample_eps_frac)
        );
        let _ = writeln!(out, "trees {}", self.trees.len());
        for (i, t) in self.trees.iter().enumerate() {
            let _ = writeln!(out, "tree {i} {}", t.nodes.len());
            for n in &t.nodes {
                match *n {
                    Node::Leaf { weight } => {
                        let _ = writeln!(out, "L {}", fmt_f(weight));
                    }
                    Node::Split {
                        feature,
                        threshold,
                        gain,
                        ..
                    } => {
                        let _ = writeln!(out, "S {feature} {} {}", fmt_f(threshold), fmt_f(gain));
                    }
                }
            }
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output and refuses a model trained on
    /// a different manifest.
    pub fn from_text(text: &str, expected_manifest: &str) -> Result<Self> {
        let model = parse_model(text)?;
        model.check_manifest(expected_manifest)?;
        Ok(model)
    }
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, l) in self.iter.by_ref() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            return Ok((i + 1, l.split_whitespace().collect()));
        }
        Err(Error::Parse("model text ends early".into()))
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let (ln, parts) = self.next()?;
        if parts.first() != Some(&key) {
            return Err(Error::Parse(format!("line {ln}: expected {key}")));
        }
        Ok(parts[1..].to_vec())
    }
}

fn num<T: std::str::FromStr>(s: Option<&&str>) -> Result<T> {
    s.and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad number {:?}", s)))
}

fn parse_model(text: &str) -> Result<BoostedModel> {
    let mut lines = Lines {
        iter: text.lines().enumerate(),
    };
    let (_, head) = lines.next()?;
    if head.join(" ") != MODEL_HEADER {
        return Err(Error::Parse("unknown model format".into()));
    }
    let manifest = lines.keyed("manifest")?.first().copied().unwrap_or("").to_string();
    let n_features: usize = num(lines.keyed("n_features")?.first())?;
    let learning_rate: f64 = num(lines.keyed("learning_rate")?.first())?;
    let base_score: f64 = num(lines.keyed("base_score")?.first())?;
    let best_iteration: usize = num(lines.keyed("best_iteration")?.first())?;
    let single_class = num::<u8>(lines.keyed("single_class")?.first())? == 1;
    let p = lines.keyed("params")?;
    let params = GbdtParams {
        max_depth: num(p.first())?,
        learning_rate: num(p.get(1))?,
        lambda: num(p.get(2))?,
        gamma: num(p.get(3))?,
        min_child_hessian: num(p.get(4))?,
        rounds: num(p.get(5))?,
        early_stop_rounds: num(p.get(6))?,
        sample_rate: num(p.get(7))?,
        sample_eps_frac: num(p.get(8))?,
    };
    let n_trees: usize = num(lines.keyed("trees")?.first())?;
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let t = lines.keyed("tree")?;
        let n_nodes: usize = num(t.get(1))?;
        let mut raw = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (ln, parts) = lines.next()?;
            raw.push((ln, parts));
        }
        trees.push(build_tree(&raw)?);
    }
    if best_iteration > trees.len() {
        return Err(Error::Parse("best_iteration exceeds tree count".into()));
    }
    Ok(BoostedModel {
        trees,
        learning_rate,
        base_score,
        best_iteration,
        n_features,
        manifest_hash: manifest,
        single_class,
        params,
    })
}

fn build_tree(raw: &[(usize, Vec<&str>)]) -> Result<Tree> {
    fn walk(raw: &[(usize, Vec<&str>)], nodes: &mut Vec<Node>) -> Result<()> {
        let i = nodes.len();
        let (ln, parts) = raw
            .get(i)
            .ok_or_else(|| Error::Parse("tree block too short".into()))?;
        match parts.first().copied() {
            Some("L") => nodes.push(Node::Leaf {
                weight: num(parts.get(1))?,
            }),
            Some("S") => {
                nodes.push(Node::Split {
                    feature: num(parts.get(1))?,
                    threshold: num(parts.get(2))?,
                    gain: num(parts.get(3))?,
                    right: 0,
                });
                walk(raw, nodes)?;
                let r = nodes.len();
                if let Node::Split { right, .. } = &mut nodes[i] {
                    *right = r;
                }
                walk(raw, nodes)?;
            }
            _ => return Err(Error::Parse(format!("line {ln}: bad tree node"))),
        }
        Ok(())
    }
    let mut nodes = Vec::with_capacity(raw.len());
    walk(raw, &mut nodes)?;
    if nodes.len() != raw.len() {
        return Err(Error::Parse("tree block has trailing nodes".into()));
    }
    Ok(Tree { nodes })
}
