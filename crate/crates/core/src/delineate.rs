//! R-peak detection, PQRST annotation, relative signal quality and heartbeat
//! template selection for one cleaned lead.

use crate::error::{Error, Result};

/// Minimum spacing between accepted R-peaks.
pub const REFRACTORY_S: f64 = 0.2;
const INTEGRATION_S: f64 = 0.15;
const REFINE_S: f64 = 0.05;
const THRESHOLD_HISTORY: usize = 8;
const QRS_HALF_WIDTH_S: f64 = 0.1;
const QUALITY_GRID: usize = 50;

fn samples(seconds: f64, fs: f64) -> usize {
    (seconds * fs).round() as usize
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn centered_mean(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in x {
        prefix.push(prefix[prefix.len() - 1] + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Pan-Tompkins style detector: centered derivative, squaring, 150 ms centered
/// moving-window integration, then peaks of the integrated signal above half
/// the median of the last eight accepted peak heights, at least 200 ms apart.
/// Long gaps (over 1.66 median RR) are searched again at a quarter of that
/// level. Each accepted peak moves to the largest baseline-relative
/// `|x - median(x)|` within 50 ms.
pub fn detect_r_peaks(x: &[f64], fs: f64) -> Result<Vec<usize>> {
    let n = x.len();
    if (n as f64) < fs {
        return Err(Error::ContractViolation(format!(
            "R-peak detection needs at least 1 s of signal, got {n} samples at {fs} Hz"
        )));
    }
    let mut energy = vec![0.0; n];
    for i in 1..n - 1 {
        let d = 0.5 * (x[i + 1] - x[i - 1]);
        energy[i] = d * d;
    }
    let mwi = centered_mean(&energy, samples(INTEGRATION_S, fs) / 2);

    let candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1] && mwi[i] > 0.0)
        .collect();
    let refractory = samples(REFRACTORY_S, fs).max(1);

    let init_end = samples(2.0, fs).min(n);
    let init = mwi[..init_end].iter().copied().fold(0.0, f64::max);
    let mut history = vec![init];
    let mut accepted: Vec<usize> = Vec::new();
    for &c in &candidates {
        let start = history.len().saturating_sub(THRESHOLD_HISTORY);
        let threshold = 0.5 * median(&history[start..]);
        if mwi[c] < threshold {
            continue;
        }
        match accepted.last().copied() {
            Some(last) if c - last < refractory => {
                if mwi[c] > mwi[last] {
                    *accepted.last_mut().unwrap() = c;
                    *history.last_mut().unwrap() = mwi[c];
                }
            }
            _ => {
                if accepted.is_empty() {
                    history.clear();
                }
                accepted.push(c);
                history.push(mwi[c]);
            }
        }
    }

    // search back through long gaps at a lower level
    if accepted.len() >= 2 {
        let rr: Vec<f64> = accepted.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        let gap_limit = 1.66 * median(&rr);
        let start = history.len().saturating_sub(THRESHOLD_HISTORY);
        let low = 0.25 * median(&history[start..]);
        let mut bounds: Vec<Option<usize>> = vec![None];
        bounds.extend(accepted.iter().map(|&a| Some(a)));
        bounds.push(None);
        let mut extra = Vec::new();
        for w in bounds.windows(2) {
            let lo = w[0].map_or(0, |a| a + refractory);
            let hi = w[1].map_or(n, |b| b.saturating_sub(refractory));
            let span = w[1].unwrap_or(n) as f64 - w[0].map_or(0.0, |a| a as f64);
            if span <= gap_limit || lo >= hi {
                continue;
            }
            let best = candidates
                .iter()
                .copied()
                .filter(|&c| c >= lo && c < hi && mwi[c] >= low)
                .max_by(|&a, &b| mwi[a].total_cmp(&mwi[b]).then(b.cmp(&a)));
            if let Some(b) = best {
                extra.push(b);
            }
        }
        accepted.extend(extra);
        accepted.sort_unstable();
    }

    let baseline = median(x);
    let mag = |i: usize| (x[i] - baseline).abs();
    let half = samples(REFINE_S, fs);
    let mut refined: Vec<usize> = accepted
        .iter()
        .map(|&p| {
            let lo = p.saturating_sub(half);
            let hi = (p + half).min(n - 1);
            (lo..=hi).fold(lo, |best, i| if mag(i) > mag(best) { i } else { best })
        })
        .collect();
    refined.sort_unstable();
    refined.dedup();
    let mut peaks: Vec<usize> = Vec::with_capacity(refined.len());
    for p in refined {
        match peaks.last().copied() {
            Some(last) if p - last < refractory => {
                if mag(p) > mag(last) {
                    *peaks.last_mut().unwrap() = p;
                }
            }
            _ => peaks.push(p),
        }
    }
    if peaks.len() < 2 {
        return Err(Error::InsufficientBeats {
            found: peaks.len(),
            needed: 2,
        });
    }
    Ok(peaks)
}

/// Beats per minute from the mean RR interval.
pub fn mean_heart_rate(r_peaks: &[usize], fs: f64) -> Result<f64> {
    if r_peaks.len() < 2 {
        return Err(Error::InsufficientBeats {
            found: r_peaks.len(),
            needed: 2,
        });
    }
    let span = (r_peaks[r_peaks.len() - 1] - r_peaks[0]) as f64 / fs;
    let mean_rr = span / (r_peaks.len() - 1) as f64;
    Ok(60.0 / mean_rr)
}

/// Samples before and after R in a beat window: -0.35..0.5 s, or -0.25..0.4 s
/// when the mean heart rate exceeds 80 bpm.
pub fn beat_window_bounds(mean_hr: f64, fs: f64) -> (usize, usize) {
    if mean_hr > 80.0 {
        (samples(0.25, fs), samples(0.4, fs))
    } else {
        (samples(0.35, fs), samples(0.5, fs))
    }
}

/// Linear interpolation at `base + whole + frac`, clamped to the signal. The
/// offset is split so identical beats at different positions sample identically.
fn interp_at(x: &[f64], base: usize, whole: i64, frac: f64) -> f64 {
    let last = x.len() as i64 - 1;
    let i = base as i64 + whole;
    if i < 0 {
        return x[0];
    }
    if i >= last {
        return x[last as usize];
    }
    let i = i as usize;
    x[i] * (1.0 - frac) + x[i + 1] * frac
}

/// Per-beat quality: 1 for the QRS segment (R +/- 0.1 s, resampled to 50
/// points) closest to the mean segment, 0 for the farthest, linear in between.
pub fn beat_qualities(x: &[f64], r_peaks: &[usize], fs: f64) -> Result<Vec<f64>> {
    if r_peaks.len() < 2 {
        return Err(Error::InsufficientBeats {
            found: r_peaks.len(),
            needed: 2,
        });
    }
    let half = QRS_HALF_WIDTH_S * fs;
    let step = 2.0 * half / (QUALITY_GRID - 1) as f64;
    let offsets: Vec<(i64, f64)> = (0..QUALITY_GRID)
        .map(|j| {
            let o = -half + j as f64 * step;
            let whole = o.floor();
            (whole as i64, o - whole)
        })
        .collect();
    let segments: Vec<Vec<f64>> = r_peaks
        .iter()
        .map(|&r| offsets.iter().map(|&(w, f)| interp_at(x, r, w, f)).collect())
        .collect();
    let nb = segments.len() as f64;
    let mean: Vec<f64> = (0..QUALITY_GRID)
        .map(|j| segments.iter().map(|s| s[j]).sum::<f64>() / nb)
        .collect();
    let dist: Vec<f64> = segments
        .iter()
        .map(|s| {
            s.iter()
                .zip(&mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let dmin = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let dmax = dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(dist
        .iter()
        .map(|&d| {
            if dmax == dmin {
                1.0
            } else {
                (1.0 - (d - dmin) / (dmax - dmin)).clamp(0.0, 1.0)
            }
        })
        .collect())
}

/// Linear interpolation of per-beat values over every sample, constant
/// beyond the first and last R-peak.
pub fn interpolate_beats(values: &[f64], r_peaks: &[usize], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let mut k = 0;
    for (i, o) in out.iter_mut().enumerate() {
        while k + 1 < r_peaks.len() && r_peaks[k + 1] <= i {
            k += 1;
        }
        *o = if i <= r_peaks[0] {
            values[0]
        } else if k + 1 >= r_peaks.len() {
            values[values.len() - 1]
        } else {
            let (a, b) = (r_peaks[k], r_peaks[k + 1]);
            let f = (i - a) as f64 / (b - a) as f64;
            values[k] * (1.0 - f) + values[k + 1] * f
        };
    }
    out
}

/// Relative signal quality for every sample of the lead.
pub fn quality_curve(x: &[f64], r_peaks: &[usize], fs: f64) -> Result<Vec<f64>> {
    let q = beat_qualities(x, r_peaks, fs)?;
    Ok(interpolate_beats(&q, r_peaks, x.len()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub window: Vec<f64>,
    pub r_offset_in_window: usize,
    pub r_peak: usize,
    pub fs: f64,
    pub quality_at_r: f64,
}

/// Beat window around the R-peak with the highest quality; the earliest peak
/// wins ties. Beats whose window leaves the signal are not candidates.
pub fn select_template(
    x: &[f64],
    r_peaks: &[usize],
    quality: &[f64],
    bounds: (usize, usize),
    fs: f64,
) -> Result<Template> {
    let (pre, post) = bounds;
    let best = r_peaks
        .iter()
        .copied()
        .filter(|&r| r >= pre && r + post <= x.len())
        .fold(None::<usize>, |best, r| match best {
            Some(b) if quality[b] >= quality[r] => Some(b),
            _ => Some(r),
        })
        .ok_or(Error::InsufficientBeats { found: 0, needed: 1 })?;
    Ok(Template {
        window: x[best - pre..best + post].to_vec(),
        r_offset_in_window: pre,
        r_peak: best,
        fs,
        quality_at_r: quality[best],
    })
}

/// Per-beat wave annotations; `None` where a wave was not found.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Waves {
    pub p_peaks: Vec<Option<usize>>,
    pub q_peaks: Vec<Option<usize>>,
    pub s_peaks: Vec<Option<usize>>,
    pub t_peaks: Vec<Option<usize>>,
    pub p_onsets: Vec<Option<usize>>,
    pub p_offsets: Vec<Option<usize>>,
    pub r_onsets: Vec<Option<usize>>,
    pub r_offsets: Vec<Option<usize>>,
    pub t_onsets: Vec<Option<usize>>,
    pub t_offsets: Vec<Option<usize>>,
}

fn argext(x: &[f64], lo: usize, hi: usize, max: bool) -> Option<usize> {
    if lo > hi || hi >= x.len() {
        return None;
    }
    let better = |a: f64, b: f64| if max { a > b } else { a < b };
    Some((lo..=hi).fold(lo, |best, i| if better(x[i], x[best]) { i } else { best }))
}

/// First sample, walking away from `peak` for at most `reach` samples, where
/// the signal drops below halfway between the peak and the minimum of that
/// neighborhood.
fn half_level_crossing(x: &[f64], peak: usize, reach: usize, leftward: bool) -> Option<usize> {
    let (lo, hi) = if leftward {
        (peak.checked_sub(reach)?, peak)
    } else {
        let hi = peak + reach;
        if hi >= x.len() {
            return None;
        }
        (peak, hi)
    };
    let floor = x[lo..=hi].iter().copied().fold(f64::INFINITY, f64::min);
    let level = 0.5 * (x[peak] + floor);
    if leftward {
        (lo..peak).rev().find(|&i| x[i] < level)
    } else {
        (peak + 1..=hi).find(|&i| x[i] < level)
    }
}

/// Fixed-window extremum delineation per beat:
///
/// * Q: minimum on `[R - 0.1 s, R)`; S: minimum on `(R, R + 0.1 s]`
/// * P: maximum on `[R - 0.3 s, R - 0.1 s)`; T: maximum on `[R + 0.1 s, R + 0.4 s]`
///
/// Windows stop at the neighboring R-peaks. A window reaching past either end
/// of the record yields no annotation. Onsets and offsets of P, R and T are
/// the half-level crossings within 0.1 s of the peak.
pub fn delineate_pqrst(x: &[f64], r_peaks: &[usize], fs: f64) -> Waves {
    let n = x.len() as i64;
    let w = |s: f64| samples(s, fs) as i64;
    let (w01, w03, w04) = (w(0.1), w(0.3), w(0.4));
    let reach = samples(0.1, fs);
    let mut out = Waves::default();

    for (k, &r) in r_peaks.iter().enumerate() {
        let ri = r as i64;
        let prev = if k > 0 { r_peaks[k - 1] as i64 } else { -1 };
        let next = r_peaks.get(k + 1).map_or(n, |&v| v as i64);
        // [lo, hi] inclusive, or None if it crosses the record boundary / is empty
        let window = |lo: i64, hi: i64| -> Option<(usize, usize)> {
            if lo < 0 || hi >= n {
                return None;
            }
            let (lo, hi) = (lo.max(prev + 1), hi.min(next - 1));
            (lo <= hi).then_some((lo as usize, hi as usize))
        };
        let q = window(ri - w01, ri - 1).and_then(|(a, b)| argext(x, a, b, false));
        let s = window(ri + 1, ri + w01).and_then(|(a, b)| argext(x, a, b, false));
        let p = window(ri - w03, ri - w01 - 1).and_then(|(a, b)| argext(x, a, b, true));
        let t = window(ri + w01, ri + w04).and_then(|(a, b)| argext(x, a, b, true));

        out.q_peaks.push(q);
        out.s_peaks.push(s);
        out.p_peaks.push(p);
        out.t_peaks.push(t);
        out.p_onsets.push(p.and_then(|p| half_level_crossing(x, p, reach, true)));
        out.p_offsets.push(p.and_then(|p| half_level_crossing(x, p, reach, false)));
        out.r_onsets.push(half_level_crossing(x, r, reach, true));
        out.r_offsets.push(half_level_crossing(x, r, reach, false));
        out.t_onsets.push(t.and_then(|t| half_level_crossing(x, t, reach, true)));
        out.t_offsets.push(t.and_then(|t| half_level_crossing(x, t, reach, false)));
    }
    out
}

/// Everything derived from one cleaned lead.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatMap {
    pub r_peaks: Vec<usize>,
    pub waves: Waves,
    pub quality: Vec<f64>,
    pub mean_hr: f64,
    pub template: Template,
}

pub fn delineate_lead(x: &[f64], fs: f64) -> Result<BeatMap> {
    let r_peaks = detect_r_peaks(x, fs)?;
    let mean_hr = mean_heart_rate(&r_peaks, fs)?;
    let quality = quality_curve(x, &r_peaks, fs)?;
    let bounds = beat_window_bounds(mean_hr, fs);
    let template = select_template(x, &r_peaks, &quality, bounds, fs)?;
    let waves = delineate_pqrst(x, &r_peaks, fs);
    Ok(BeatMap {
        r_peaks,
        waves,
        quality,
        mean_hr,
        template,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_prep::{clean_lead, CleanConfig};
    use crate::synth::{generate_record, SynthSpec};

    fn clean_synth(spec: &SynthSpec) -> (Vec<f64>, Vec<usize>) {
        let (rec, truth) = generate_record(spec, "x").unwrap();
        let x = clean_lead(&rec.leads[1], spec.fs as f64, &CleanConfig::default()).unwrap();
        (x, truth.r_peaks())
    }

    #[test]
    fn detects_synthetic_beats_at_60_bpm() {
        let spec = SynthSpec { hr_bpm: 60.0, seed: 5, ..SynthSpec::default() }.clean();
        let (x, truth) = clean_synth(&spec);
        let peaks = detect_r_peaks(&x, 500.0).unwrap();
        assert!((peaks.len() as i64 - 10).abs() <= 1);
        for t in truth {
            assert!(peaks.iter().any(|&p| (p as i64 - t as i64).abs() <= 10));
        }
    }

    #[test]
    fn flat_signal_has_no_beats() {
        assert!(matches!(
            detect_r_peaks(&[0.0; 2000], 500.0),
            Err(Error::InsufficientBeats { .. })
        ));
    }

    #[test]
    fn time_reversal_keeps_peak_count() {
        let spec = SynthSpec { hr_bpm: 75.0, seed: 11, ..SynthSpec::default() };
        let (x, _) = clean_synth(&spec);
        let mut rev = x.clone();
        rev.reverse();
        assert_eq!(
            detect_r_peaks(&x, 500.0).unwrap().len(),
            detect_r_peaks(&rev, 500.0).unwrap().len()
        );
    }

    #[test]
    fn scaling_and_offset_invariance() {
        let spec = SynthSpec { hr_bpm: 90.0, seed: 2, ..SynthSpec::default() };
        let (x, _) = clean_synth(&spec);
        let base = detect_r_peaks(&x, 500.0).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| v * 2.5).collect();
        let shifted: Vec<f64> = x.iter().map(|v| v + 0.75).collect();
        assert_eq!(detect_r_peaks(&scaled, 500.0).unwrap(), base);
        assert_eq!(detect_r_peaks(&shifted, 500.0).unwrap(), base);
    }

    #[test]
    fn refractory_and_local_maximum_invariants() {
        let spec = SynthSpec { hr_bpm: 130.0, hr_jitter_frac: 0.3, seed: 8, ..SynthSpec::default() };
        let (x, _) = clean_synth(&spec);
        let peaks = detect_r_peaks(&x, 500.0).unwrap();
        assert!(peaks.windows(2).all(|w| w[1] - w[0] >= 100));
        let b = median(&x);
        for &p in &peaks {
            let lo = p.saturating_sub(25);
            let hi = (p + 25).min(x.len() - 1);
            assert!((lo..=hi).all(|i| (x[i] - b).abs() <= (x[p] - b).abs()));
        }
    }

    #[test]
    fn heart_rate_arithmetic() {
        assert_eq!(mean_heart_rate(&[0, 250, 500], 500.0).unwrap(), 120.0);
        assert_eq!(mean_heart_rate(&[0, 500], 500.0).unwrap(), 60.0);
        let hr = mean_heart_rate(&[0, 375, 800], 500.0).unwrap();
        assert!((hr - 75.0).abs() < 1e-12);
        assert!(mean_heart_rate(&[10], 500.0).is_err());
    }

    #[test]
    fn window_bounds_switch_above_80() {
        assert_eq!(beat_window_bounds(60.0, 500.0), (175, 250));
        assert_eq!(beat_window_bounds(80.0, 500.0), (175, 250));
        assert_eq!(beat_window_bounds(81.0, 500.0), (125, 200));
    }

    #[test]
    fn identical_beats_have_unit_quality() {
        let mut x = vec![0.0; 1000];
        for r in [200, 600] {
            for d in 0..20 {
                x[r - 10 + d] = (d as f64 * 0.3).sin();
            }
        }
        let q = quality_curve(&x, &[200, 600], 500.0).unwrap();
        assert!(q.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn middle_beat_equal_to_mean_is_best() {
        // beats 1 and 3 are the mean beat perturbed by +delta and -delta
        let fs = 500.0;
        let shape = |d: i64| (-(d as f64 / 8.0).powi(2)).exp();
        let mut x = vec![0.0; 1500];
        for (r, scale) in [(250usize, 1.2), (750, 1.0), (1250, 0.8)] {
            for d in -50i64..=50 {
                x[(r as i64 + d) as usize] = scale * shape(d);
            }
        }
        let q = beat_qualities(&x, &[250, 750, 1250], fs).unwrap();
        assert_eq!(q[1], 1.0);
        assert!((q[0] - q[2]).abs() < 1e-12);
        assert!(q[0] < 1.0);
    }

    #[test]
    fn interpolation_midpoint() {
        let q = interpolate_beats(&[0.0, 1.0], &[100, 200], 300);
        assert_eq!(q[150], 0.5);
        assert_eq!(q[0], 0.0);
        assert_eq!(q[299], 1.0);
    }

    #[test]
    fn template_selection_rules() {
        let x: Vec<f64> = (0..2000).map(|i| i as f64).collect();
        let mut quality = vec![0.0; 2000];
        for (r, q) in [(400, 0.2), (800, 1.0), (1200, 0.7)] {
            quality[r] = q;
        }
        let t = select_template(&x, &[400, 800, 1200], &quality, (175, 250), 500.0).unwrap();
        assert_eq!(t.r_peak, 800);
        assert_eq!(t.window.len(), 425);
        assert_eq!(t.window[t.r_offset_in_window], 800.0);

        quality[400] = 1.0;
        let t = select_template(&x, &[400, 800], &quality, (175, 250), 500.0).unwrap();
        assert_eq!(t.r_peak, 400);

        quality[50] = 1.0;
        let t = select_template(&x, &[50, 1200], &quality, (175, 250), 500.0).unwrap();
        assert_eq!(t.r_peak, 1200);
        assert!(select_template(&x, &[50], &quality, (175, 250), 500.0).is_err());
    }

    #[test]
    fn truncated_last_beat_has_no_t_wave() {
        let spec = SynthSpec { hr_bpm: 60.0, ..SynthSpec::default() }.clean();
        let (x, truth) = clean_synth(&spec);
        let last = *truth.last().unwrap();
        let cut = &x[..last + 100];
        let waves = delineate_pqrst(cut, &truth, 500.0);
        assert!(waves.t_peaks.last().unwrap().is_none());
        assert!(waves.t_peaks[0].is_some());
    }

    #[test]
    fn annotations_stay_in_their_windows() {
        let spec = SynthSpec { hr_bpm: 72.0, seed: 4, ..SynthSpec::default() };
        let (x, _) = clean_synth(&spec);
        let r = detect_r_peaks(&x, 500.0).unwrap();
        let w = delineate_pqrst(&x, &r, 500.0);
        for (k, &rk) in r.iter().enumerate() {
            if let Some(q) = w.q_peaks[k] {
                assert!(q < rk && rk - q <= 50);
            }
            if let Some(s) = w.s_peaks[k] {
                assert!(s > rk && s - rk <= 50);
            }
            if let Some(p) = w.p_peaks[k] {
                assert!(p < rk - 50 && rk - p <= 150);
                assert!(w.q_peaks[k].is_none_or(|q| p < q));
            }
            if let Some(t) = w.t_peaks[k] {
                assert!(t > rk + 50 && t - rk <= 200);
                assert!(w.s_peaks[k].is_none_or(|s| t > s));
            }
        }
    }

    #[test]
    fn inverted_polarity_follows_window_rules_literally() {
        let spec = SynthSpec { hr_bpm: 60.0, ..SynthSpec::default() }.clean();
        let (x, truth) = clean_synth(&spec);
        let inv: Vec<f64> = x.iter().map(|v| -v).collect();
        let w = delineate_pqrst(&inv, &truth, 500.0);
        let k = 3;
        let q = w.q_peaks[k].unwrap();
        // the Q window now holds the minimum of the inverted upstroke of R
        let lo = truth[k] - 50;
        let expected = (lo..truth[k]).fold(lo, |b, i| if inv[i] < inv[b] { i } else { b });
        assert_eq!(q, expected);
    }
}
