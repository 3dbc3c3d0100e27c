//! Named per-lead feature families and the fixed catalog that orders them.
//!
//! The same catalog is applied to the cropped full waveform and to the
//! heartbeat template. Degenerate computations (constant input, too few
//! samples) emit zeros and are counted, never NaN.

pub mod entropy;
pub mod spectral;
pub mod stats;

use std::fmt;

pub use entropy::{approximate_entropy, entropies, sample_entropy, EntropyValues};
pub use spectral::{ar_coefficients, cwt_at, dft, dft_coefficient, ricker};
pub use stats::{
    change_quantiles, descriptive_stats, linear_trend_agg, ols_on_index, peak_count, ChunkAgg,
    Descriptive, LineFit,
};

pub const ENTROPY_M: usize = 2;
pub const ENTROPY_R: [f64; 3] = [0.1, 0.2, 0.3];
pub const AR_ORDER: usize = 4;
pub const FFT_K: usize = 16;
pub const CWT_WIDTHS: [usize; 4] = [2, 5, 10, 20];
pub const CWT_POSITIONS: usize = 4;
pub const CORRIDORS: [(f64, f64); 3] = [(0.0, 0.2), (0.2, 0.8), (0.8, 1.0)];
pub const TREND_CHUNK: usize = 50;
pub const PEAK_SUPPORTS: [usize; 3] = [1, 3, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Descriptive,
    SampleEntropy,
    ApproximateEntropy,
    Autoregressive,
    Fourier,
    Wavelet,
    ChangeQuantiles,
    LinearTrend,
    PeakCount,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Descriptive => "descriptive",
            Family::SampleEntropy => "sample_entropy",
            Family::ApproximateEntropy => "approximate_entropy",
            Family::Autoregressive => "ar",
            Family::Fourier => "fft",
            Family::Wavelet => "cwt",
            Family::ChangeQuantiles => "change_quantiles",
            Family::LinearTrend => "linear_trend",
            Family::PeakCount => "peak_count",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub name: String,
    pub family: Family,
    pub params: Vec<(String, String)>,
}

impl CatalogEntry {
    fn new(name: String, family: Family, params: &[(&str, String)]) -> Self {
        Self {
            name,
            family,
            params: params
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogManifest {
    pub entries: Vec<CatalogEntry>,
}

impl CatalogManifest {
    pub fn standard() -> Self {
        let mut e = Vec::new();
        for name in Descriptive::NAMES {
            e.push(CatalogEntry::new(name.to_string(), Family::Descriptive, &[]));
        }
        for (family, tag) in [
            (Family::SampleEntropy, "sample_entropy"),
            (Family::ApproximateEntropy, "approximate_entropy"),
        ] {
            for r in ENTROPY_R {
                e.push(CatalogEntry::new(
                    format!("{tag}__m_{ENTROPY_M}__r_{r}"),
                    family,
                    &[("m", ENTROPY_M.to_string()), ("r", r.to_string())],
                ));
            }
        }
        for k in 1..=AR_ORDER {
            e.push(CatalogEntry::new(
                format!("ar__order_{AR_ORDER}__coeff_{k}"),
                Family::Autoregressive,
                &[("order", AR_ORDER.to_string()), ("coeff", k.to_string())],
            ));
        }
        for k in 0..FFT_K {
            for part in ["real", "imag", "abs", "angle"] {
                e.push(CatalogEntry::new(
                    format!("fft__k_{k}__{part}"),
                    Family::Fourier,
                    &[("k", k.to_string()), ("attr", part.to_string())],
                ));
            }
        }
        for w in CWT_WIDTHS {
            for p in 0..CWT_POSITIONS {
                e.push(CatalogEntry::new(
                    format!("cwt__w_{w}__pos_{p}"),
                    Family::Wavelet,
                    &[("width", w.to_string()), ("quarter", p.to_string())],
                ));
            }
        }
        for (ql, qh) in CORRIDORS {
            for agg in ["mean", "var"] {
                e.push(CatalogEntry::new(
                    format!("change_quantiles__ql_{ql}__qh_{qh}__{agg}"),
                    Family::ChangeQuantiles,
                    &[
                        ("ql", ql.to_string()),
                        ("qh", qh.to_string()),
                        ("agg", agg.to_string()),
                    ],
                ));
            }
        }
        for agg in ["max", "mean"] {
            for attr in ["slope", "intercept", "stderr"] {
                e.push(CatalogEntry::new(
                    format!("linear_trend__chunk_{TREND_CHUNK}__{agg}__{attr}"),
                    Family::LinearTrend,
                    &[
                        ("chunk", TREND_CHUNK.to_string()),
                        ("agg", agg.to_string()),
                        ("attr", attr.to_string()),
                    ],
                ));
            }
        }
        for n in PEAK_SUPPORTS {
            e.push(CatalogEntry::new(
                format!("peak_count__n_{n}"),
                Family::PeakCount,
                &[("n", n.to_string())],
            ));
        }
        Self { entries: e }
    }

    pub fn per_lead_count(&self) -> usize {
        self.entries.len()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn family_count(&self, family: Family) -> usize {
        self.entries.iter().filter(|e| e.family == family).count()
    }
}

impl Default for CatalogManifest {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeadFeatures {
    pub values: Vec<f64>,
    /// Degenerate computations replaced by their documented zero case.
    pub degenerate: usize,
}

/// Computes every catalog feature of `x` in manifest order.
pub fn extract_lead_features(x: &[f64], manifest: &CatalogManifest) -> LeadFeatures {
    let mut values = Vec::with_capacity(manifest.per_lead_count());
    let mut degenerate = 0;

    let (d, deg) = descriptive_stats(x);
    degenerate += deg as usize;
    values.extend(d.values());

    let ent = entropies(x, ENTROPY_M, &ENTROPY_R);
    degenerate += ent.degenerate;
    values.extend(&ent.sample);
    values.extend(&ent.approximate);

    let (ar, deg) = ar_coefficients(x, AR_ORDER);
    degenerate += deg as usize;
    values.extend(ar);

    for k in 0..FFT_K {
        let (re, im) = dft_coefficient(x, k);
        values.extend([re, im, re.hypot(im), im.atan2(re)]);
    }

    let n = x.len();
    for w in CWT_WIDTHS {
        for p in 0..CWT_POSITIONS {
            let idx = p * n / CWT_POSITIONS;
            values.push(if idx < n { cwt_at(x, w as f64, idx) } else { 0.0 });
        }
    }

    for (ql, qh) in CORRIDORS {
        let (m, v) = change_quantiles(x, ql, qh);
        values.extend([m, v]);
    }

    for agg in [ChunkAgg::Max, ChunkAgg::Mean] {
        let (fit, deg) = linear_trend_agg(x, TREND_CHUNK, agg);
        degenerate += deg as usize;
        values.extend([fit.slope, fit.intercept, fit.stderr]);
    }

    for s in PEAK_SUPPORTS {
        values.push(peak_count(x, s) as f64);
    }

    debug_assert_eq!(values.len(), manifest.per_lead_count());
    for v in values.iter_mut() {
        if !v.is_finite() {
            *v = 0.0;
            degenerate += 1;
        }
    }
    LeadFeatures { values, degenerate }
}
