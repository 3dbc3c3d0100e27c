//! Record-level feature rows and the feature matrix file format.
//!
//! Columns are `<lead>_<category>_<feature>` in lead order, with categories
//! `template`, `waveform`, `hrv` inside each lead, followed by `meta_age` and
//! `meta_sex`. Sex is encoded male 1, female 0, unknown 0.5. Unknown ages are
//! kept as a mask and filled later with a training-set median.
//!
//! The CSV form has a header `id,<columns...>`; an unknown age is an empty
//! cell. Lines starting with `#` are comments. The sidecar manifest lists one
//! column per line as `name<TAB>family<TAB>params`.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::delineate::delineate_lead;
use crate::error::{Error, Result};
use crate::features::{extract_lead_features, CatalogManifest};
use crate::hrv::{hrv_features, rr_intervals, HRV_NAMES, N_HRV};
use crate::record_io::{EcgRecord, Sex, LEAD_NAMES, N_LEADS};
use crate::signal_prep::{cap_rate_500, clean_lead, crop_middle, CleanConfig, CROP_SAMPLES};

pub const META_AGE: &str = "meta_age";
pub const META_SEX: &str = "meta_sex";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Template,
    Waveform,
    Hrv,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Template, Category::Waveform, Category::Hrv];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Template => "template",
            Category::Waveform => "waveform",
            Category::Hrv => "hrv",
        }
    }
}

pub fn encode_sex(sex: Sex) -> f64 {
    match sex {
        Sex::Male => 1.0,
        Sex::Female => 0.0,
        Sex::Unknown => 0.5,
    }
}

/// Column naming for one catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub catalog: CatalogManifest,
}

impl Layout {
    pub fn new(catalog: CatalogManifest) -> Self {
        Self { catalog }
    }

    pub fn standard() -> Self {
        Self::new(CatalogManifest::standard())
    }

    pub fn category_len(&self, category: Category) -> usize {
        match category {
            Category::Template | Category::Waveform => self.catalog.per_lead_count(),
            Category::Hrv => N_HRV,
        }
    }

    pub fn lead_len(&self) -> usize {
        Category::ALL.iter().map(|&c| self.category_len(c)).sum()
    }

    pub fn row_len(&self) -> usize {
        N_LEADS * self.lead_len() + 2
    }

    pub fn age_column(&self) -> usize {
        self.row_len() - 2
    }

    pub fn block_offset(&self, lead: usize, category: Category) -> usize {
        let mut off = lead * self.lead_len();
        for c in Category::ALL {
            if c == category {
                break;
            }
            off += self.category_len(c);
        }
        off
    }

    pub fn manifest(&self) -> FeatureManifest {
        let mut columns = Vec::with_capacity(self.row_len());
        for lead in LEAD_NAMES {
            for cat in Category::ALL {
                let prefix = format!("{lead}_{}_", cat.as_str());
                if cat == Category::Hrv {
                    for name in HRV_NAMES {
                        columns.push(ColumnInfo {
                            name: format!("{prefix}{name}"),
                            family: "hrv".into(),
                            params: String::new(),
                        });
                    }
                } else {
                    for e in &self.catalog.entries {
                        let params = e
                            .params
                            .iter()
                            .map(|(k, v)| format!("{k}={v}"))
                            .collect::<Vec<_>>()
                            .join(";");
                        columns.push(ColumnInfo {
                            name: format!("{prefix}{}", e.name),
                            family: e.family.as_str().into(),
                            params,
                        });
                    }
                }
            }
        }
        for name in [META_AGE, META_SEX] {
            columns.push(ColumnInfo {
                name: name.into(),
                family: "meta".into(),
                params: String::new(),
            });
        }
        FeatureManifest { columns }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnInfo {
    pub name: String,
    pub family: String,
    pub params: String,
}

/// Ordered column list; models store its hash to verify alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureManifest {
    pub columns: Vec<ColumnInfo>,
}

impl FeatureManifest {
    pub fn from_names<I: IntoIterator<Item = S>, S: Into<String>>(names: I) -> Self {
        Self {
            columns: names
                .into_iter()
                .map(|n| ColumnInfo {
                    name: n.into(),
                    family: String::new(),
                    params: String::new(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Restriction to the given column indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            columns: indices.iter().map(|&i| self.columns[i].clone()).collect(),
        }
    }

    /// SHA-256 over the newline-joined column names, hex encoded.
    pub fn hash(&self) -> String {
        manifest_hash(self.columns.iter().map(|c| c.name.as_str()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# feature manifest\n");
        for c in &self.columns {
            let _ = writeln!(out, "{}\t{}\t{}", c.name, c.family, c.params);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let name = parts.next().unwrap_or_default().trim().to_string();
            if name.is_empty() {
                return Err(Error::Parse(format!("manifest line without a name: {line:?}")));
            }
            columns.push(ColumnInfo {
                name,
                family: parts.next().unwrap_or_default().to_string(),
                params: parts.next().unwrap_or_default().to_string(),
            });
        }
        Ok(Self { columns })
    }
}

pub fn manifest_hash<'a, I: IntoIterator<Item = &'a str>>(names: I) -> String {
    let mut h = Sha256::new();
    for (i, n) in names.into_iter().enumerate() {
        if i > 0 {
            h.update(b"\n");
        }
        h.update(n.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Per-lead category vectors; `None` marks a failed computation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LeadBlocks {
    pub template: Option<Vec<f64>>,
    pub waveform: Option<Vec<f64>>,
    pub hrv: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledRow {
    pub values: Vec<f64>,
    pub unknown_age: bool,
    /// Leads with at least one zero-filled category.
    pub failed_leads: usize,
}

/// Concatenates the lead blocks and metadata. Missing or wrongly sized
/// blocks become zeros and count their lead as failed. Non-finite values
/// are replaced by zero.
pub fn assemble_record(
    layout: &Layout,
    leads: &[LeadBlocks],
    age: Option<f64>,
    sex: Sex,
) -> AssembledRow {
    let mut values = Vec::with_capacity(layout.row_len());
    let mut failed_leads = 0;
    for lead in 0..N_LEADS {
        let blocks = leads.get(lead);
        let mut failed = false;
        for cat in Category::ALL {
            let want = layout.category_len(cat);
            let block = blocks.and_then(|b| match cat {
                Category::Template => b.template.as_ref(),
                Category::Waveform => b.waveform.as_ref(),
                Category::Hrv => b.hrv.as_ref(),
            });
            match block {
                Some(v) if v.len() == want => {
                    values.extend(v.iter().map(|x| if x.is_finite() { *x } else { 0.0 }))
                }
                _ => {
                    failed = true;
                    values.extend(std::iter::repeat_n(0.0, want));
                }
            }
        }
        failed_leads += failed as usize;
    }
    let age = age.filter(|a| a.is_finite());
    values.push(age.unwrap_or(0.0));
    values.push(encode_sex(sex));
    AssembledRow {
        values,
        unknown_age: age.is_none(),
        failed_leads,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractConfig {
    pub clean: CleanConfig,
    pub crop_samples: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            clean: CleanConfig::default(),
            crop_samples: CROP_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordFeatures {
    pub row: AssembledRow,
    /// Degenerate computations replaced by zeros inside the feature families.
    pub degenerate: usize,
}

/// Feature blocks of one raw lead.
pub fn extract_lead_blocks(
    x: &[f64],
    fs: f64,
    layout: &Layout,
    config: &ExtractConfig,
) -> (LeadBlocks, usize) {
    let mut blocks = LeadBlocks::default();
    let mut degenerate = 0;
    let clean = match clean_lead(x, fs, &config.clean) {
        Ok(c) => c,
        Err(e) => {
            log::debug!("lead cleaning failed: {e}");
            return (blocks, 0);
        }
    };
    if let Ok((capped, _)) = cap_rate_500(&clean, fs) {
        let f = extract_lead_features(crop_middle(&capped, config.crop_samples), &layout.catalog);
        degenerate += f.degenerate;
        blocks.waveform = Some(f.values);
    }
    match delineate_lead(&clean, fs) {
        Ok(beats) => {
            let f = extract_lead_features(&beats.template.window, &layout.catalog);
            degenerate += f.degenerate;
            blocks.template = Some(f.values);
            if let Ok(rr) = rr_intervals(&beats.r_peaks, fs.round() as u32) {
                let h = hrv_features(&rr);
                degenerate += h.degenerate;
                blocks.hrv = Some(h.values.to_vec());
            }
        }
        Err(e) => log::debug!("delineation failed: {e}"),
    }
    (blocks, degenerate)
}

pub fn extract_record(record: &EcgRecord, layout: &Layout, config: &ExtractConfig) -> RecordFeatures {
    let fs = record.fs as f64;
    let mut degenerate = 0;
    let blocks: Vec<LeadBlocks> = record
        .leads
        .iter()
        .map(|lead| {
            let (b, d) = extract_lead_blocks(lead, fs, layout, config);
            degenerate += d;
            b
        })
        .collect();
    RecordFeatures {
        row: assemble_record(layout, &blocks, record.age, record.sex),
        degenerate,
    }
}

/// Records x columns, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<f64>,
    /// Rows whose `meta_age` is a placeholder awaiting imputation.
    pub unknown_age: Vec<bool>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            ids: Vec::new(),
            columns,
            values: Vec::new(),
            unknown_age: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[r * c..(r + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n_cols() + c]
    }

    pub fn push_row(&mut self, id: impl Into<String>, row: &[f64], unknown_age: bool) -> Result<()> {
        if row.len() != self.n_cols() {
            return Err(Error::ContractViolation(format!(
                "row has {} values, matrix has {} columns",
                row.len(),
                self.n_cols()
            )));
        }
        self.ids.push(id.into());
        self.values.extend_from_slice(row);
        self.unknown_age.push(unknown_age);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn manifest_hash(&self) -> String {
        manifest_hash(self.columns.iter().map(String::as_str))
    }

    /// Rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Self::new(self.columns.clone());
        for &r in rows {
            out.ids.push(self.ids[r].clone());
            out.values.extend_from_slice(self.row(r));
            out.unknown_age.push(self.unknown_age[r]);
        }
        out
    }

    /// Columns in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::new(cols.iter().map(|&c| self.columns[c].clone()).collect());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            out.values.extend(cols.iter().map(|&c| row[c]));
        }
        out.ids = self.ids.clone();
        out.unknown_age = self.unknown_age.clone();
        out
    }

    /// Median of the known ages, if the age column exists and any age is known.
    pub fn known_age_median(&self) -> Option<f64> {
        let c = self.column_index(META_AGE)?;
        let mut ages: Vec<f64> = (0..self.n_rows())
            .filter(|&r| !self.unknown_age[r])
            .map(|r| self.get(r, c))
            .collect();
        if ages.is_empty() {
            return None;
        }
        ages.sort_by(f64::total_cmp);
        Some(crate::features::stats::quantile_sorted(&ages, 0.5))
    }

    /// Fills unknown ages; the mask is kept so the fill can be redone.
    pub fn impute_age(&mut self, value: f64) {
        if let Some(c) = self.column_index(META_AGE) {
            let n = self.n_cols();
            for r in 0..self.n_rows() {
                if self.unknown_age[r] {
                    self.values[r * n + c] = value;
                }
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let age_col = self.column_index(META_AGE);
        let mut out = String::from("id");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for r in 0..self.n_rows() {
            out.push_str(&self.ids[r]);
            for (c, v) in self.row(r).iter().enumerate() {
                out.push(',');
                if !(Some(c) == age_col && self.unknown_age[r]) {
                    let _ = write!(out, "{v}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Format("feature matrix has no header".into()))?;
        let mut cols = header.split(',');
        if cols.next().map(str::trim) != Some("id") {
            return Err(Error::Format("feature matrix header must start with id".into()));
        }
        let mut m = Self::new(cols.map(|c| c.trim().to_string()).collect());
        let age_col = m.column_index(META_AGE);
        for (ln, line) in lines {
            let mut cells = line.split(',');
            let id = cells.next().unwrap_or_default().trim().to_string();
            let mut row = Vec::with_capacity(m.n_cols());
            let mut unknown_age = false;
            for (c, cell) in cells.enumerate() {
                let cell = cell.trim();
                if cell.is_empty() && Some(c) == age_col {
                    unknown_age = true;
                    row.push(0.0);
                    continue;
                }
                let v: f64 = cell.parse().map_err(|_| {
                    Error::Format(format!("line {}: non-numeric cell {cell:?}", ln + 1))
                })?;
                if !v.is_finite() {
                    return Err(Error::Format(format!("line {}: non-finite value", ln + 1)));
                }
                row.push(v);
            }
            if row.len() != m.n_cols() {
                return Err(Error::Format(format!(
                    "line {}: {} values, expected {}",
                    ln + 1,
                    row.len(),
                    m.n_cols()
                )));
            }
            m.push_row(id, &row, unknown_age)?;
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtractionReport {
    pub failed_leads: usize,
    pub degenerate: usize,
}

/// Extracts all records in parallel; row order follows `records`.
pub fn extract_matrix(
    records: &[EcgRecord],
    layout: &Layout,
    config: &ExtractConfig,
) -> (FeatureMatrix, ExtractionReport) {
    let rows: Vec<RecordFeatures> = records
        .par_iter()
        .map(|r| extract_record(r, layout, config))
        .collect();
    let manifest = layout.manifest();
    let mut m = FeatureMatrix::new(manifest.columns.into_iter().map(|c| c.name).collect());
    let mut report = ExtractionReport::default();
    for (rec, f) in records.iter().zip(rows) {
        report.failed_leads += f.row.failed_leads;
        report.degenerate += f.degenerate;
        m.push_row(rec.id.clone(), &f.row.values, f.row.unknown_age)
            .expect("layout row length");
    }
    (m, report)
}
