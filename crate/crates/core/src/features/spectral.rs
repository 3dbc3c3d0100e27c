//! DFT coefficients, Ricker wavelet transform samples and autoregressive
//! coefficients.

use std::f64::consts::PI;

/// One DFT coefficient `sum_t x_t exp(-2 pi i k t / n)` as `(re, im)`.
/// Zero for `k >= n`.
pub fn dft_coefficient(x: &[f64], k: usize) -> (f64, f64) {
    let n = x.len();
    if k >= n {
        return (0.0, 0.0);
    }
    let step = 2.0 * PI / n as f64;
    let mut re = 0.0;
    let mut im = 0.0;
    // (k t) mod n keeps the phase argument small and exact
    let mut phase = 0usize;
    for &v in x {
        let a = step * phase as f64;
        re += v * a.cos();
        im -= v * a.sin();
        phase += k;
        if phase >= n {
            phase -= n;
        }
    }
    (re, im)
}

/// Every coefficient, by direct summation.
pub fn dft(x: &[f64]) -> Vec<(f64, f64)> {
    (0..x.len()).map(|k| dft_coefficient(x, k)).collect()
}

/// Ricker (Mexican hat) wavelet of width `w` at offset `t`.
pub fn ricker(t: f64, w: f64) -> f64 {
    let a = 2.0 / ((3.0 * w).sqrt() * PI.powf(0.25));
    let u = t / w;
    a * (1.0 - u * u) * (-0.5 * u * u).exp()
}

/// Convolution of `x` (zero outside its support) with the Ricker wavelet of
/// width `w`, evaluated at sample `index`. Terms beyond 8 widths are below
/// 1e-12 of the peak and skipped.
pub fn cwt_at(x: &[f64], w: f64, index: usize) -> f64 {
    let reach = (8.0 * w).ceil() as usize;
    let lo = index.saturating_sub(reach);
    let hi = (index + reach + 1).min(x.len());
    (lo..hi)
        .map(|t| x[t] * ricker(index as f64 - t as f64, w))
        .sum()
}

/// Yule-Walker AR(`order`) coefficients from the biased autocorrelation of the
/// demeaned signal, via Levinson-Durbin. Returns the coefficients and whether
/// the input was degenerate (zero variance or too short, reported as zeros).
pub fn ar_coefficients(x: &[f64], order: usize) -> (Vec<f64>, bool) {
    let n = x.len();
    let mut coeffs = vec![0.0; order];
    if order == 0 || n <= 2 * order {
        return (coeffs, true);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let acf: Vec<f64> = (0..=order)
        .map(|lag| {
            (0..n - lag)
                .map(|t| (x[t] - mean) * (x[t + lag] - mean))
                .sum::<f64>()
                / n as f64
        })
        .collect();
    if acf[0] <= 0.0 {
        return (coeffs, true);
    }
    let mut err = acf[0];
    let mut prev = vec![0.0; order];
    for k in 0..order {
        let mut acc = acf[k + 1];
        for j in 0..k {
            acc -= prev[j] * acf[k - j];
        }
        let reflection = acc / err;
        coeffs[k] = reflection;
        for j in 0..k {
            coeffs[j] = prev[j] - reflection * prev[k - 1 - j];
        }
        err *= 1.0 - reflection * reflection;
        prev[..=k].copy_from_slice(&coeffs[..=k]);
        if err <= 0.0 {
            break;
        }
    }
    (coeffs, false)
}
