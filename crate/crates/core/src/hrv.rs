//! Time-domain and geometric heart-rate-variability features from R peaks.

use crate::features::stats::{mean, population_variance, quantile_sorted, sorted_copy};
use crate::{Error, Result};

/// Histogram bin width for the geometric indices (1/128 s).
pub const HIST_BIN_MS: f64 = 7.8125;

pub const HRV_NAMES: [&str; 12] = [
    "meanNN", "medianNN", "SDNN", "MADNN", "IQRNN", "CVNN", "SDSD", "RMSSD", "pNN50", "pNN20",
    "HTI", "TINN",
];

pub const N_HRV: usize = HRV_NAMES.len();

#[derive(Debug, Clone, PartialEq)]
pub struct RrSeries {
    /// Milliseconds.
    pub intervals: Vec<f64>,
}

pub fn rr_intervals(r_peaks: &[usize], fs: u32) -> Result<RrSeries> {
    if r_peaks.len() < 2 {
        return Err(Error::InsufficientBeats {
            found: r_peaks.len(),
            needed: 2,
        });
    }
    if r_peaks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::ContractViolation(
            "R peaks must be strictly increasing".into(),
        ));
    }
    let scale = 1000.0 / fs as f64;
    Ok(RrSeries {
        intervals: r_peaks
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 * scale)
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HrvFeatures {
    /// Aligned with [`HRV_NAMES`].
    pub values: [f64; N_HRV],
    pub degenerate: usize,
}

impl HrvFeatures {
    pub fn get(&self, name: &str) -> Option<f64> {
        HRV_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }
}

fn histogram(rr: &[f64]) -> (i64, Vec<f64>) {
    let bins: Vec<i64> = rr.iter().map(|v| (v / HIST_BIN_MS).floor() as i64).collect();
    let lo = *bins.iter().min().unwrap();
    let hi = *bins.iter().max().unwrap();
    let mut counts = vec![0.0; (hi - lo + 1) as usize];
    for b in bins {
        counts[(b - lo) as usize] += 1.0;
    }
    (lo, counts)
}

/// Triangular-interpolation base width: least-squares fit of a triangle
/// that is zero outside `(N, M)` and peaks at the histogram mode, searched
/// over all bin positions `N < mode < M`.
fn tinn(counts: &[f64]) -> f64 {
    let (mode, &peak) = counts
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |best, (i, c)| {
            if *c > *best.1 {
                (i, c)
            } else {
                best
            }
        });
    // positions are shifted by one so that N may sit one bin below the data
    let len = counts.len() as i64;
    let x = mode as i64 + 1;
    let d = |t: i64| {
        if t >= 1 && t <= len {
            counts[(t - 1) as usize]
        } else {
            0.0
        }
    };
    let total: f64 = counts.iter().map(|c| c * c).sum();
    let mut best = (f64::INFINITY, 0i64);
    for n in 0..x {
        let mut rising = 0.0;
        for t in n + 1..=x {
            let q = peak * (t - n) as f64 / (x - n) as f64;
            rising += (d(t) - q).powi(2) - d(t).powi(2);
        }
        for m in x + 1..=len + 1 {
            // outside (n, m) the triangle is zero and contributes d^2
            let mut err = total + rising;
            for t in x + 1..m {
                let q = peak * (m - t) as f64 / (m - x) as f64;
                err += (d(t) - q).powi(2) - d(t).powi(2);
            }
            if err < best.0 {
                best = (err, m - n);
            }
        }
    }
    best.1 as f64 * HIST_BIN_MS
}

pub fn hrv_features(rr: &RrSeries) -> HrvFeatures {
    let x = &rr.intervals;
    let mut values = [0.0; N_HRV];
    if x.is_empty() {
        return HrvFeatures {
            values,
            degenerate: 1,
        };
    }
    let mut degenerate = 0;
    let sorted = sorted_copy(x);
    let mean_nn = mean(x);
    let median = quantile_sorted(&sorted, 0.5);
    let sdnn = population_variance(x).sqrt();
    let abs_dev = sorted_copy(&x.iter().map(|v| (v - median).abs()).collect::<Vec<_>>());
    values[0] = mean_nn;
    values[1] = median;
    values[2] = sdnn;
    values[3] = quantile_sorted(&abs_dev, 0.5);
    values[4] = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    values[5] = if mean_nn > 0.0 { sdnn / mean_nn } else { 0.0 };
    if x.len() >= 3 {
        let diffs: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let nd = diffs.len() as f64;
        values[6] = population_variance(&diffs).sqrt();
        values[7] = (diffs.iter().map(|d| d * d).sum::<f64>() / nd).sqrt();
        values[8] = diffs.iter().filter(|d| d.abs() > 50.0).count() as f64 / nd;
        values[9] = diffs.iter().filter(|d| d.abs() > 20.0).count() as f64 / nd;
    } else {
        degenerate += 1;
    }
    let (_, counts) = histogram(x);
    let mode_count = counts.iter().copied().fold(0.0, f64::max);
    values[10] = x.len() as f64 / mode_count;
    values[11] = tinn(&counts);
    HrvFeatures { values, degenerate }
}
