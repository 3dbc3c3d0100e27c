//! Synthetic 12-lead ECG with known beat and wave positions.
//!
//! Each beat is a sum of five Gaussian bumps (P, Q, R, S, T) placed relative to
//! the R center. RR intervals are `60 / hr * (1 + jitter * u)` with `u` uniform
//! on (-1, 1). Every lead is the same beat train scaled by a per-lead gain, plus
//! a sinusoidal baseline drift and white noise.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::labels::{label, LabelSet};
use crate::record_io::{EcgRecord, Sex, N_LEADS};
use crate::rng::{derive_seed, rng_from_seed};

/// One Gaussian component: center offset from R and width (sigma) in ms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub offset_ms: f64,
    pub amplitude_mv: f64,
    pub width_ms: f64,
}

const fn wave(offset_ms: f64, amplitude_mv: f64, width_ms: f64) -> Wave {
    Wave {
        offset_ms,
        amplitude_mv,
        width_ms,
    }
}

/// Indices into [`SynthSpec::waves`].
pub const P: usize = 0;
pub const Q: usize = 1;
pub const R: usize = 2;
pub const S: usize = 3;
pub const T: usize = 4;

/// Lead gains: limb leads I..aVF then V1..V6. aVR and V1 are inverted.
pub const DEFAULT_LEAD_GAINS: [f64; N_LEADS] =
    [0.7, 1.0, 0.4, -0.85, 0.35, 0.7, -0.6, 0.5, 0.8, 1.2, 1.1, 0.9];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub hr_bpm: f64,
    pub hr_jitter_frac: f64,
    pub fs: u32,
    pub duration_s: f64,
    pub noise_std_mv: f64,
    pub drift_amp_mv: f64,
    pub drift_freq_hz: f64,
    /// P, Q, R, S, T at a heart rate of 60 bpm.
    pub waves: [Wave; 5],
    /// Scale the T offset and width by `sqrt(RR / 1 s)` so repolarization
    /// shortens with rate as it does physiologically.
    pub rate_adaptive_t: bool,
    pub lead_gains: [f64; N_LEADS],
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            hr_bpm: 70.0,
            hr_jitter_frac: 0.02,
            fs: 500,
            duration_s: 10.0,
            noise_std_mv: 0.01,
            drift_amp_mv: 0.1,
            drift_freq_hz: 0.25,
            waves: [
                wave(-180.0, 0.15, 25.0),
                wave(-35.0, -0.1, 8.0),
                wave(0.0, 1.0, 10.0),
                wave(35.0, -0.15, 8.0),
                wave(280.0, 0.3, 60.0),
            ],
            rate_adaptive_t: true,
            lead_gains: DEFAULT_LEAD_GAINS,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Noise-free, drift-free, jitter-free variant.
    pub fn clean(mut self) -> Self {
        self.noise_std_mv = 0.0;
        self.drift_amp_mv = 0.0;
        self.hr_jitter_frac = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.fs < 100 {
            return Err(Error::Parameter(format!("fs {} below 100 Hz", self.fs)));
        }
        if !(self.duration_s >= 2.0) {
            return Err(Error::Parameter(format!("duration {} s below 2 s", self.duration_s)));
        }
        if !(self.hr_bpm > 0.0) || !(0.0..1.0).contains(&self.hr_jitter_frac) {
            return Err(Error::Parameter("heart rate must be positive, jitter in [0,1)".into()));
        }
        if self.waves.iter().any(|w| !(w.width_ms > 0.0)) {
            return Err(Error::Parameter("wave widths must be positive".into()));
        }
        if self.noise_std_mv < 0.0 {
            return Err(Error::Parameter("noise std must be non-negative".into()));
        }
        Ok(())
    }
}

/// Sample positions of one generated beat's components (rounded wave centers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeatTruth {
    pub p: i64,
    pub q: i64,
    pub r: usize,
    pub s: i64,
    pub t: i64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub beats: Vec<BeatTruth>,
}

impl GroundTruth {
    pub fn r_peaks(&self) -> Vec<usize> {
        self.beats.iter().map(|b| b.r).collect()
    }
}

/// Generates one record (labels left empty) and its ground truth.
pub fn generate_record(spec: &SynthSpec, id: &str) -> Result<(EcgRecord, GroundTruth)> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let fs = spec.fs as f64;
    let n = (spec.duration_s * fs).round() as usize;
    let base_rr = 60.0 / spec.hr_bpm;

    let mut centers = Vec::new();
    let mut rr = base_rr * (1.0 + spec.hr_jitter_frac * rng.random_range(-1.0..1.0));
    let mut center = rr / 2.0;
    while center < spec.duration_s {
        centers.push((center, rr));
        rr = base_rr * (1.0 + spec.hr_jitter_frac * rng.random_range(-1.0..1.0));
        center += rr;
    }

    let mut beat = vec![0.0; n];
    let mut truth = GroundTruth::default();
    for &(c, beat_rr) in &centers {
        let mut pos = [0i64; 5];
        for (k, w) in spec.waves.iter().enumerate() {
            let (offset, width) = if k == T && spec.rate_adaptive_t {
                let f = beat_rr.sqrt();
                (w.offset_ms * f, w.width_ms * f)
            } else {
                (w.offset_ms, w.width_ms)
            };
            let mu = c + offset / 1000.0;
            let sigma = width / 1000.0;
            pos[k] = (mu * fs).round() as i64;
            let lo = ((mu - 5.0 * sigma) * fs).floor().max(0.0) as usize;
            let hi = (((mu + 5.0 * sigma) * fs).ceil().max(0.0) as usize).min(n.saturating_sub(1));
            for (i, v) in beat.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let z = (i as f64 / fs - mu) / sigma;
                *v += w.amplitude_mv * (-0.5 * z * z).exp();
            }
        }
        let r = (c * fs).round() as usize;
        if r < n {
            truth.beats.push(BeatTruth {
                p: pos[P],
                q: pos[Q],
                r,
                s: pos[S],
                t: pos[T],
            });
        }
    }

    let drift_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let noise = Normal::new(0.0, spec.noise_std_mv.max(0.0))
        .map_err(|e| Error::Parameter(e.to_string()))?;
    let leads = spec
        .lead_gains
        .iter()
        .map(|&g| {
            beat.iter()
                .enumerate()
                .map(|(i, &b)| {
                    let t = i as f64 / fs;
                    let drift = spec.drift_amp_mv
                        * (std::f64::consts::TAU * spec.drift_freq_hz * t + drift_phase).sin();
                    let e = if spec.noise_std_mv > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    g * b + drift + e
                })
                .collect()
        })
        .collect();
    let record = EcgRecord::new(id, leads, spec.fs, None, Sex::Unknown, LabelSet::empty())?;
    Ok((record, truth))
}

/// Noise std giving the requested signal-to-noise ratio (in dB) against the
/// mean power of the noise-free, drift-free version of `spec` on lead `lead`.
pub fn noise_std_for_snr(spec: &SynthSpec, lead: usize, snr_db: f64) -> Result<f64> {
    let mut clean = spec.clone();
    clean.noise_std_mv = 0.0;
    clean.drift_amp_mv = 0.0;
    let (rec, _) = generate_record(&clean, "snr")?;
    let x = &rec.leads[lead];
    let power = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    Ok((power / 10f64.powf(snr_db / 10.0)).sqrt())
}

/// A rhythm class: records whose drawn heart rate and jitter both fall in the
/// ranges carry the label.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub label: usize,
    pub hr_bpm: (f64, f64),
    pub jitter: (f64, f64),
    /// Relative frequency of records drawn from this class.
    pub weight: f64,
}

impl ClassSpec {
    pub fn matches(&self, hr: f64, jitter: f64) -> bool {
        (self.hr_bpm.0..=self.hr_bpm.1).contains(&hr) && (self.jitter.0..=self.jitter.1).contains(&jitter)
    }
}

/// Normal sinus rhythm, sinus tachycardia, sinus bradycardia and an
/// irregular AF-like rhythm, in equal proportions.
pub fn rhythm_classes() -> Vec<ClassSpec> {
    vec![
        ClassSpec { label: label("SNR"), hr_bpm: (65.0, 85.0), jitter: (0.0, 0.05), weight: 1.0 },
        ClassSpec { label: label("STach"), hr_bpm: (105.0, 140.0), jitter: (0.0, 0.05), weight: 1.0 },
        ClassSpec { label: label("SB"), hr_bpm: (40.0, 55.0), jitter: (0.0, 0.05), weight: 1.0 },
        ClassSpec { label: label("AF"), hr_bpm: (60.0, 100.0), jitter: (0.3, 0.4), weight: 1.0 },
    ]
}

/// A generated record with its ground truth.
#[derive(Debug, Clone)]
pub struct SynthRecord {
    pub record: EcgRecord,
    pub truth: GroundTruth,
}

/// Draws `n` labeled records. Record `i` uses a seed derived from `(seed, i)`,
/// so any subset can be regenerated independently.
pub fn generate_dataset(n: usize, classes: &[ClassSpec], base: &SynthSpec, seed: u64) -> Result<Vec<SynthRecord>> {
    (0..n).map(|i| generate_dataset_record(i, classes, base, seed)).collect()
}

/// Record `i` of [`generate_dataset`].
pub fn generate_dataset_record(i: usize, classes: &[ClassSpec], base: &SynthSpec, seed: u64) -> Result<SynthRecord> {
    if classes.is_empty() {
        return Err(Error::Parameter("at least one class spec is required".into()));
    }
    let total: f64 = classes.iter().map(|c| c.weight).sum();
    if !(total > 0.0) || classes.iter().any(|c| !(c.weight >= 0.0)) {
        return Err(Error::Parameter("class weights must be non-negative with a positive sum".into()));
    }
    for c in classes {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ok(c.hr_bpm) || !ok(c.jitter) || c.hr_bpm.0 <= 0.0 || c.jitter.0 < 0.0 || c.jitter.1 >= 1.0 {
            return Err(Error::Parameter(format!(
                "class ranges must be ordered with positive rate and jitter in [0,1): {c:?}"
            )));
        }
    }
    let rec_seed = derive_seed(seed, i as u64);
    let mut rng = rng_from_seed(rec_seed);
    let mut pick = rng.random_range(0.0..total);
    let class = classes
        .iter()
        .find(|c| {
            pick -= c.weight;
            pick < 0.0
        })
        .unwrap_or(&classes[classes.len() - 1]);
    let hr = rng.random_range(class.hr_bpm.0..=class.hr_bpm.1);
    let jitter = rng.random_range(class.jitter.0..=class.jitter.1);
    let age = if rng.random_bool(0.05) { None } else { Some(rng.random_range(18..90) as f64) };
    let sex = if rng.random_bool(0.5) { Sex::Male } else { Sex::Female };
    let spec = SynthSpec {
        hr_bpm: hr,
        hr_jitter_frac: jitter,
        seed: derive_seed(rec_seed, 1),
        ..base.clone()
    };
    let (mut record, truth) = generate_record(&spec, &format!("S{i:05}"))?;
    record.age = age;
    record.sex = sex;
    record.labels = LabelSet::from_indices(
        classes.iter().filter(|c| c.matches(hr, jitter)).map(|c| c.label),
    );
    Ok(SynthRecord { record, truth })
}
