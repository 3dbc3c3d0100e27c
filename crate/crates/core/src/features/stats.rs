//! Descriptive statistics, change quantiles, chunked linear trends and peak counts.
//!
//! Variances use the population convention (divide by n) throughout.

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Descriptive {
    pub mean: f64,
    pub median: f64,
    pub variance: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub min: f64,
    pub max: f64,
    pub abs_energy: f64,
    pub count_above_mean: f64,
    pub count_below_mean: f64,
}

impl Descriptive {
    pub const NAMES: [&'static str; 11] = [
        "mean",
        "median",
        "variance",
        "std",
        "skewness",
        "kurtosis",
        "min",
        "max",
        "abs_energy",
        "count_above_mean",
        "count_below_mean",
    ];

    pub fn values(&self) -> [f64; 11] {
        [
            self.mean,
            self.median,
            self.variance,
            self.std,
            self.skewness,
            self.kurtosis,
            self.min,
            self.max,
            self.abs_energy,
            self.count_above_mean,
            self.count_below_mean,
        ]
    }
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

pub fn population_variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

pub fn sorted_copy(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Returns the statistics and whether the moment features were degenerate
/// (fewer than two samples, reported as zeros).
pub fn descriptive_stats(x: &[f64]) -> (Descriptive, bool) {
    if x.is_empty() {
        return (Descriptive::default(), true);
    }
    let n = x.len() as f64;
    let sorted = sorted_copy(x);
    let m = mean(x);
    let abs_energy = x.iter().map(|v| v * v).sum();
    let base = Descriptive {
        mean: m,
        median: quantile_sorted(&sorted, 0.5),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        abs_energy,
        count_above_mean: x.iter().filter(|&&v| v > m).count() as f64,
        count_below_mean: x.iter().filter(|&&v| v < m).count() as f64,
        ..Descriptive::default()
    };
    if x.len() < 2 {
        return (base, true);
    }
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skewness, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };
    (
        Descriptive {
            variance: m2,
            std: m2.sqrt(),
            skewness,
            kurtosis,
            ..base
        },
        false,
    )
}

/// Mean and variance of `|x[i+1] - x[i]|` over steps whose endpoints both lie
/// in the quantile corridor `[q(ql), q(qh)]`. Zero when no step qualifies.
pub fn change_quantiles(x: &[f64], ql: f64, qh: f64) -> (f64, f64) {
    if x.len() < 2 {
        return (0.0, 0.0);
    }
    let sorted = sorted_copy(x);
    let lo = quantile_sorted(&sorted, ql);
    let hi = quantile_sorted(&sorted, qh);
    let inside = |v: f64| v >= lo && v <= hi;
    let diffs: Vec<f64> = x
        .windows(2)
        .filter(|w| inside(w[0]) && inside(w[1]))
        .map(|w| (w[1] - w[0]).abs())
        .collect();
    if diffs.is_empty() {
        return (0.0, 0.0);
    }
    (mean(&diffs), population_variance(&diffs))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Ordinary least squares of `y` on `0, 1, 2, ...`; stderr is the standard
/// error of the slope (zero with two points).
pub fn ols_on_index(y: &[f64]) -> LineFit {
    let n = y.len();
    if n < 2 {
        return LineFit::default();
    }
    let nf = n as f64;
    let xm = (nf - 1.0) / 2.0;
    let ym = mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (i, &v) in y.iter().enumerate() {
        let dx = i as f64 - xm;
        sxx += dx * dx;
        sxy += dx * (v - ym);
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let stderr = if n > 2 {
        let sse: f64 = y
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let r = v - (intercept + slope * i as f64);
                r * r
            })
            .sum();
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LineFit {
        slope,
        intercept,
        stderr,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChunkAgg {
    Max,
    Mean,
}

/// Linear trend over per-chunk aggregates (chunks of `chunk` samples, the last
/// one possibly shorter). Returns the fit and whether it was degenerate (fewer
/// than two chunks, reported as zeros).
pub fn linear_trend_agg(x: &[f64], chunk: usize, agg: ChunkAgg) -> (LineFit, bool) {
    let chunk = chunk.max(1);
    let aggs: Vec<f64> = x
        .chunks(chunk)
        .map(|c| match agg {
            ChunkAgg::Max => c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ChunkAgg::Mean => mean(c),
        })
        .collect();
    if aggs.len() < 2 {
        return (LineFit::default(), true);
    }
    (ols_on_index(&aggs), false)
}

/// Samples strictly greater than their `support` neighbors on each side.
pub fn peak_count(x: &[f64], support: usize) -> usize {
    if support == 0 || x.len() < 2 * support + 1 {
        return 0;
    }
    (support..x.len() - support)
        .filter(|&i| (1..=support).all(|k| x[i] > x[i - k] && x[i] > x[i + k]))
        .count()
}
