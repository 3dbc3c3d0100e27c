//! Lead cleaning: zero-phase Butterworth highpass, moving-average smoothing,
//! sampling-rate capping and middle cropping.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Maximum sampling rate used for full-waveform features.
pub const MAX_RATE_HZ: f64 = 500.0;

/// Number of samples kept from the middle of the capped waveform.
pub const CROP_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanConfig {
    pub highpass_cutoff_hz: f64,
    pub highpass_order: usize,
    pub smoothing_s: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            highpass_cutoff_hz: 0.5,
            highpass_order: 5,
            smoothing_s: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Lowpass,
    Highpass,
}

/// One biquad `b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    fn is_first_order(&self) -> bool {
        self.b[2] == 0.0 && self.a[1] == 0.0
    }
}

/// Digital Butterworth filter as cascaded second-order sections.
///
/// Analog prototype poles sit on the unit circle at
/// `p_k = exp(i*pi*(2k + N + 1) / (2N))`, `k = 0..N`. The cutoff is prewarped
/// to `wc = 2 fs tan(pi fc / fs)`; lowpass poles are `wc * p_k` with zeros at
/// infinity, highpass poles are `wc / p_k` with zeros at `s = 0`. The bilinear
/// map `z = (2fs + s) / (2fs - s)` sends the zeros to `z = -1` (lowpass) or
/// `z = 1` (highpass). Conjugate pole pairs share a section; an odd order adds
/// one first-order section for the real pole. Each section is scaled to unit
/// gain at DC (lowpass) or Nyquist (highpass).
pub fn butterworth_sos(order: usize, cutoff_hz: f64, fs: f64, kind: FilterKind) -> Result<Vec<Biquad>> {
    if order == 0 {
        return Err(Error::Parameter("filter order must be at least 1".into()));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0) {
        return Err(Error::Parameter(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {}) for fs {fs}",
            fs / 2.0
        )));
    }
    let k2 = 2.0 * fs;
    let wc = k2 * (PI * cutoff_hz / fs).tan();
    let n = order as f64;
    let analog_pole = |k: usize| {
        let p = Complex64::from_polar(1.0, PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n));
        match kind {
            FilterKind::Lowpass => p * wc,
            FilterKind::Highpass => Complex64::new(wc, 0.0) / p,
        }
    };
    let bilinear = |s: Complex64| (k2 + s) / (k2 - s);
    // z^-1 at the normalization frequency: DC for lowpass, Nyquist for highpass
    let zinv: f64 = match kind {
        FilterKind::Lowpass => 1.0,
        FilterKind::Highpass => -1.0,
    };
    let zero_sign = match kind {
        FilterKind::Lowpass => 1.0,
        FilterKind::Highpass => -1.0,
    };

    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for k in 0..order / 2 {
        let z = bilinear(analog_pole(k));
        let a1 = -2.0 * z.re;
        let a2 = z.norm_sqr();
        let num = [1.0, 2.0 * zero_sign, 1.0];
        let num_at = num[0] + num[1] * zinv + num[2] * zinv * zinv;
        let den_at = 1.0 + a1 * zinv + a2 * zinv * zinv;
        let g = den_at / num_at;
        sections.push(Biquad {
            b: [g * num[0], g * num[1], g * num[2]],
            a: [a1, a2],
        });
    }
    if order % 2 == 1 {
        let z = bilinear(analog_pole(order / 2));
        let a1 = -z.re;
        let num = [1.0, zero_sign];
        let g = (1.0 + a1 * zinv) / (num[0] + num[1] * zinv);
        sections.push(Biquad {
            b: [g * num[0], g * num[1], 0.0],
            a: [a1, 0.0],
        });
    }
    Ok(sections)
}

/// Transposed direct form II through every section, starting from state `zi * x0`.
fn sosfilt(sos: &[Biquad], x: &mut [f64], zi: &[[f64; 2]], x0: f64) {
    for (sec, z0) in sos.iter().zip(zi) {
        let (mut z1, mut z2) = (z0[0] * x0, z0[1] * x0);
        let [b0, b1, b2] = sec.b;
        let [a1, a2] = sec.a;
        for v in x.iter_mut() {
            let xi = *v;
            let y = b0 * xi + z1;
            z1 = b1 * xi - a1 * y + z2;
            z2 = b2 * xi - a2 * y;
            *v = y;
        }
    }
}

/// Section states at steady state for a unit step input.
fn sosfilt_zi(sos: &[Biquad]) -> Vec<[f64; 2]> {
    let mut u = 1.0;
    sos.iter()
        .map(|sec| {
            let y = sec.dc_gain() * u;
            let z2 = sec.b[2] * u - sec.a[1] * y;
            let z1 = sec.b[1] * u - sec.a[0] * y + z2;
            u = y;
            [z1, z2]
        })
        .collect()
}

/// Forward-backward filtering with odd-extension padding and steady-state
/// initial conditions, so the result has zero phase and no start-up transient
/// for constant input.
pub fn sosfiltfilt(sos: &[Biquad], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return x.to_vec();
    }
    let trivial = sos.iter().filter(|s| s.is_first_order()).count();
    let ntaps = 2 * sos.len() + 1 - trivial;
    let pad = (3 * ntaps).min(n - 1);

    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let zi = sosfilt_zi(sos);
    let first = ext[0];
    sosfilt(sos, &mut ext, &zi, first);
    ext.reverse();
    let first = ext[0];
    sosfilt(sos, &mut ext, &zi, first);
    ext.reverse();
    ext.drain(..pad);
    ext.truncate(n);
    ext
}

/// Output of [`highpass_butterworth`].
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub samples: Vec<f64>,
    /// Set when the input was too short to filter and was returned unchanged.
    pub passthrough: bool,
}

/// Zero-phase Butterworth highpass removing drift and DC offset.
pub fn highpass_butterworth(x: &[f64], fs: f64, cutoff_hz: f64, order: usize) -> Result<Filtered> {
    let sos = butterworth_sos(order, cutoff_hz, fs, FilterKind::Highpass)?;
    if x.len() <= 3 * order {
        log::warn!("signal of {} samples too short for order {order} filter", x.len());
        return Ok(Filtered {
            samples: x.to_vec(),
            passthrough: true,
        });
    }
    Ok(Filtered {
        samples: sosfiltfilt(&sos, x),
        passthrough: false,
    })
}

/// Centered moving average with an odd window of `round(width_s * fs)` samples.
/// Windows shrink at the edges to the samples available.
pub fn moving_average(x: &[f64], fs: f64, width_s: f64) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::ContractViolation("moving average of an empty signal".into()));
    }
    if !(width_s > 0.0) {
        return Err(Error::Parameter(format!("window width {width_s} s must be positive")));
    }
    let mut k = ((width_s * fs).round() as usize).max(1);
    if k.is_multiple_of(2) {
        k += 1;
    }
    let half = k / 2;
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v;
        prefix.push(acc);
    }
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            // direct sum keeps constant inputs exact
            if hi - lo <= 32 {
                x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            } else {
                (prefix[hi] - prefix[lo]) / (hi - lo) as f64
            }
        })
        .collect())
}

/// Highpass followed by smoothing.
pub fn clean_lead(x: &[f64], fs: f64, config: &CleanConfig) -> Result<Vec<f64>> {
    let hp = highpass_butterworth(x, fs, config.highpass_cutoff_hz, config.highpass_order)?;
    moving_average(&hp.samples, fs, config.smoothing_s)
}

/// Caps the sampling rate at 500 Hz: identity at or below, otherwise a
/// zero-phase lowpass at 0.45 * 500 Hz followed by linear interpolation.
pub fn cap_rate_500(x: &[f64], fs: f64) -> Result<(Vec<f64>, f64)> {
    if !(fs > 0.0) {
        return Err(Error::Parameter(format!("sampling rate {fs} must be positive")));
    }
    if fs <= MAX_RATE_HZ || x.len() < 2 {
        return Ok((x.to_vec(), fs));
    }
    let sos = butterworth_sos(5, 0.45 * MAX_RATE_HZ, fs, FilterKind::Lowpass)?;
    let smooth = if x.len() > 15 { sosfiltfilt(&sos, x) } else { x.to_vec() };
    let duration = (x.len() - 1) as f64 / fs;
    let n_out = (duration * MAX_RATE_HZ + 1e-9).floor() as usize + 1;
    let out = (0..n_out)
        .map(|k| {
            let pos = k as f64 * fs / MAX_RATE_HZ;
            let i = pos.floor() as usize;
            if i + 1 >= smooth.len() {
                smooth[smooth.len() - 1]
            } else {
                let frac = pos - i as f64;
                smooth[i] * (1.0 - frac) + smooth[i + 1] * frac
            }
        })
        .collect();
    Ok((out, MAX_RATE_HZ))
}

/// The middle `target` samples (floor rule for odd surplus), or all of `x` if shorter.
pub fn crop_middle(x: &[f64], target: usize) -> &[f64] {
    if x.len() <= target {
        return x;
    }
    let start = (x.len() - target) / 2;
    &x[start..start + target]
}
