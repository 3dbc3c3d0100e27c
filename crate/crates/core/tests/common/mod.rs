#![allow(dead_code)]

pub mod oracles;

use ecgboost::assemble::FeatureMatrix;
use ecgboost::gbdt::GbdtParams;
use ecgboost::labels::{label, LabelSet};
use ecgboost::pipeline::{Dataset, RunConfig};
use ecgboost::rng::rng_from_seed;
use rand_distr::{Distribution, StandardNormal};

pub const N_INFORMATIVE: usize = 5;

/// Columns `f0..f4` carry the signal, the rest are pure noise. Labels:
/// AF when `f0 + f1 > 0.6`, STach when `f2 - f3 > 0.6`, SB when `f4 > 0.8`,
/// SNR when none of those hold.
pub fn tabular_dataset(n: usize, n_noise: usize, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let n_cols = N_INFORMATIVE + n_noise;
    let names: Vec<String> = (0..n_cols).map(|c| format!("f{c}")).collect();
    let mut m = FeatureMatrix::new(names);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let row: Vec<f64> = (0..n_cols).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut set = LabelSet::empty();
        if row[0] + row[1] > 0.6 {
            set.insert(label("AF"));
        }
        if row[2] - row[3] > 0.6 {
            set.insert(label("STach"));
        }
        if row[4] > 0.8 {
            set.insert(label("SB"));
        }
        if set.is_empty() {
            set.insert(label("SNR"));
        }
        m.push_row(format!("R{r:04}"), &row, false).unwrap();
        labels.push(set);
    }
    Dataset::new(m, labels).unwrap()
}

pub fn fast_gbdt() -> GbdtParams {
    GbdtParams {
        max_depth: 3,
        learning_rate: 0.3,
        rounds: 100,
        early_stop_rounds: 20,
        ..GbdtParams::default()
    }
}

pub fn fast_config(seed: u64, top_k: usize) -> RunConfig {
    RunConfig {
        n_runs: 1,
        top_k,
        seed,
        gbdt: fast_gbdt(),
        ..RunConfig::default()
    }
}
