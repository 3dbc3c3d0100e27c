//! Brute-force reference implementations.

use ecgboost::gbdt::{split_gain, GbdtParams};
use ecgboost::hrv::HIST_BIN_MS;

pub fn std_pop(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn cheb(x: &[f64], i: usize, j: usize, len: usize) -> f64 {
    (0..len).map(|k| (x[i + k] - x[j + k]).abs()).fold(0.0, f64::max)
}

pub fn naive_sampen(x: &[f64], m: usize, frac: f64) -> f64 {
    let r = frac * std_pop(x);
    let n = x.len();
    let count = |len: usize| {
        let mut c = 0usize;
        for i in 0..n - m {
            for j in 0..n - m {
                if i != j && cheb(x, i, j, len) <= r {
                    c += 1;
                }
            }
        }
        c
    };
    let (b, a) = (count(m), count(m + 1));
    if a == 0 || b == 0 {
        (n as f64).ln()
    } else {
        -(a as f64 / b as f64).ln()
    }
}

pub fn naive_apen(x: &[f64], m: usize, frac: f64) -> f64 {
    let r = frac * std_pop(x);
    let n = x.len();
    let phi = |len: usize| {
        let t = n - len + 1;
        let mut s = 0.0;
        for i in 0..t {
            let c = (0..t).filter(|&j| cheb(x, i, j, len) <= r).count();
            s += (c as f64 / t as f64).ln();
        }
        s / t as f64
    };
    phi(m) - phi(m + 1)
}

pub fn naive_quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (s.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    s[lo] * (1.0 - (pos - lo as f64)) + s[hi] * (pos - lo as f64)
}

pub fn naive_hrv(rr: &[f64]) -> Vec<f64> {
    let n = rr.len() as f64;
    let mean = rr.iter().sum::<f64>() / n;
    let sd = (rr.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let med = naive_quantile(rr, 0.5);
    let dev: Vec<f64> = rr.iter().map(|v| (v - med).abs()).collect();
    let d: Vec<f64> = (1..rr.len()).map(|i| rr[i] - rr[i - 1]).collect();
    let nd = d.len() as f64;
    let dmean = d.iter().sum::<f64>() / nd;
    let sdsd = (d.iter().map(|v| (v - dmean).powi(2)).sum::<f64>() / nd).sqrt();
    let rmssd = (d.iter().map(|v| v * v).sum::<f64>() / nd).sqrt();
    let pnn = |t: f64| d.iter().filter(|v| v.abs() > t).count() as f64 / nd;

    // histogram keyed by absolute bin index
    let bin = |v: f64| (v / HIST_BIN_MS).floor() as i64;
    let lo = rr.iter().map(|&v| bin(v)).min().unwrap();
    let hi = rr.iter().map(|&v| bin(v)).max().unwrap();
    let count = |b: i64| rr.iter().filter(|&&v| bin(v) == b).count() as f64;
    let mut mode = lo;
    for b in lo..=hi {
        if count(b) > count(mode) {
            mode = b;
        }
    }
    let y = count(mode);
    let mut best = (f64::INFINITY, 0);
    for nn in lo - 1..mode {
        for mm in mode + 1..=hi + 1 {
            let mut err = 0.0;
            for t in lo - 1..=hi + 1 {
                let q = if t > nn && t <= mode {
                    y * (t - nn) as f64 / (mode - nn) as f64
                } else if t > mode && t < mm {
                    y * (mm - t) as f64 / (mm - mode) as f64
                } else {
                    0.0
                };
                err += (count(t) - q).powi(2);
            }
            if err < best.0 - 1e-12 {
                best = (err, mm - nn);
            }
        }
    }
    vec![
        mean,
        med,
        sd,
        naive_quantile(&dev, 0.5),
        naive_quantile(rr, 0.75) - naive_quantile(rr, 0.25),
        sd / mean,
        sdsd,
        rmssd,
        pnn(50.0),
        pnn(20.0),
        n / y,
        best.1 as f64 * HIST_BIN_MS,
    ]
}

/// Best (feature, threshold, gain) by trying every midpoint of every feature.
pub fn brute_force_split(cols: &[Vec<f64>], g: &[f64], h: &[f64], p: &GbdtParams) -> Option<(usize, f64, f64)> {
    let gs: f64 = g.iter().sum();
    let hs: f64 = h.iter().sum();
    let mut best: Option<(usize, f64, f64)> = None;
    for (f, col) in cols.iter().enumerate() {
        let mut vals = col.clone();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..col.len() {
                if col[i] < t {
                    gl += g[i];
                    hl += h[i];
                }
            }
            let hr = hs - hl;
            if hl < p.min_child_hessian || hr < p.min_child_hessian {
                continue;
            }
            let gain = split_gain(gl, hl, gs - gl, hr, p.lambda, p.gamma);
            if best.is_none_or(|b| gain > b.2 + 1e-12) {
                best = Some((f, t, gain));
            }
        }
    }
    best.filter(|b| b.2 > 0.0)
}

pub fn pair_counting_auroc(scores: &[f64], y: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}
