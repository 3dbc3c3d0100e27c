//! Sample and approximate entropy with Chebyshev template matching.
//!
//! Both are computed for several tolerances in one pass over template pairs.
//! Tolerances are given as fractions of the population standard deviation.

use super::stats::population_variance;

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyValues {
    pub sample: Vec<f64>,
    pub approximate: Vec<f64>,
    /// Number of values that hit a degenerate rule.
    pub degenerate: usize,
}

/// Sample entropy `-ln(A/B)` and approximate entropy `phi(m) - phi(m+1)` for
/// each tolerance `r = frac * std(x)`.
///
/// Sample entropy counts pairs `i < j` among the first `n - m` templates,
/// excluding self-matches; `A` or `B` of zero saturates at `ln(n)`.
/// Approximate entropy includes self-matches. Constant input and inputs
/// shorter than `m + 2` give zeros.
pub fn entropies(x: &[f64], m: usize, r_fracs: &[f64]) -> EntropyValues {
    let n = x.len();
    let k = r_fracs.len();
    let zeros = || EntropyValues {
        sample: vec![0.0; k],
        approximate: vec![0.0; k],
        degenerate: 2 * k,
    };
    if m == 0 || n < m + 2 {
        return zeros();
    }
    let std = population_variance(x).sqrt();
    if std == 0.0 {
        return zeros();
    }
    let r: Vec<f64> = r_fracs.iter().map(|f| f * std).collect();
    let r_max = r.iter().copied().fold(0.0, f64::max);

    let n_m = n - m + 1; // templates of length m
    let n_m1 = n - m; // templates of length m + 1

    // thresholds ascending; a distance's level is the first threshold it meets
    let mut rank_order: Vec<usize> = (0..k).collect();
    rank_order.sort_by(|&p, &q| r[p].total_cmp(&r[q]));
    let rs: Vec<f64> = rank_order.iter().map(|&q| r[q]).collect();
    let level = |d: f64| rs.iter().map(|&t| (d > t) as usize).sum::<usize>();
    let bins = k + 1;

    // templates sorted by first value; a pair can only match if its first
    // values are within r_max, so each scan stops at the first that is not
    let mut order: Vec<usize> = (0..n_m).collect();
    order.sort_by(|&p, &q| x[p].total_cmp(&x[q]));
    let cols: Vec<Vec<f64>> = (0..=m)
        .map(|t| order.iter().map(|&i| if i + t < n { x[i + t] } else { 0.0 }).collect())
        .collect();
    let ext: Vec<u32> = order.iter().map(|&i| (i < n_m1) as u32).collect();

    let mut hist_m = vec![0u32; n_m * bins];
    let mut hist_m1 = vec![0u32; n_m * bins];
    let mut b_hist = vec![0u64; bins];
    let mut a_hist = vec![0u64; bins];
    let first = &cols[0];
    for p in 0..n_m {
        let x0 = first[p];
        for q in p + 1..n_m {
            if first[q] - x0 > r_max {
                break;
            }
            let mut d = 0.0f64;
            for c in &cols[..m] {
                d = d.max((c[p] - c[q]).abs());
            }
            if d > r_max {
                continue;
            }
            let l = level(d);
            hist_m[p * bins + l] += 1;
            hist_m[q * bins + l] += 1;
            let e = ext[p] & ext[q];
            let l1 = level(d.max((cols[m][p] - cols[m][q]).abs()));
            b_hist[l] += e as u64;
            a_hist[l1] += e as u64;
            hist_m1[p * bins + l1] += e;
            hist_m1[q * bins + l1] += e;
        }
    }

    let mut position = vec![0usize; n_m];
    for (p, &i) in order.iter().enumerate() {
        position[i] = p;
    }
    let cumulative = |h: &[u32], upto: usize| h[..=upto].iter().map(|&c| c as u64).sum::<u64>();
    let mut b = vec![0u64; k];
    let mut a = vec![0u64; k];
    // self-matches counted as one
    let mut c_m = vec![vec![1u64; n_m]; k];
    let mut c_m1 = vec![vec![1u64; n_m1]; k];
    for (rank, &q) in rank_order.iter().enumerate() {
        b[q] = b_hist[..=rank].iter().sum();
        a[q] = a_hist[..=rank].iter().sum();
        for i in 0..n_m {
            let p = position[i];
            c_m[q][i] += cumulative(&hist_m[p * bins..(p + 1) * bins], rank);
            if i < n_m1 {
                c_m1[q][i] += cumulative(&hist_m1[p * bins..(p + 1) * bins], rank);
            }
        }
    }

    let mut degenerate = 0;
    let cap = (n as f64).ln();
    let sample = (0..k)
        .map(|q| {
            if a[q] == 0 || b[q] == 0 {
                degenerate += 1;
                cap
            } else {
                -((a[q] as f64) / (b[q] as f64)).ln()
            }
        })
        .collect();
    let phi = |counts: &[u64]| {
        let total = counts.len() as f64;
        counts.iter().map(|&c| (c as f64 / total).ln()).sum::<f64>() / total
    };
    let approximate = (0..k).map(|q| phi(&c_m[q]) - phi(&c_m1[q])).collect();
    EntropyValues {
        sample,
        approximate,
        degenerate,
    }
}

pub fn sample_entropy(x: &[f64], m: usize, r_frac: f64) -> f64 {
    entropies(x, m, &[r_frac]).sample[0]
}

pub fn approximate_entropy(x: &[f64], m: usize, r_frac: f64) -> f64 {
    entropies(x, m, &[r_frac]).approximate[0]
}
