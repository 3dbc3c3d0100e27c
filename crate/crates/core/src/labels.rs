//! The fixed table of 27 scored diagnoses, label sets over it, and the
//! clinical-similarity weight matrix used for both sample weighting and scoring.

use std::fmt;

use crate::error::{Error, Result};

/// Number of scored diagnoses.
pub const N_LABELS: usize = 27;

/// One scored diagnosis: SNOMED CT code, abbreviation and description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Diagnosis {
    pub code: &'static str,
    pub abbrev: &'static str,
    pub name: &'static str,
}

const fn dx(code: &'static str, abbrev: &'static str, name: &'static str) -> Diagnosis {
    Diagnosis { code, abbrev, name }
}

/// Scored diagnoses in matrix row/column order.
pub const DIAGNOSES: [Diagnosis; N_LABELS] = [
    dx("270492004", "IAVB", "1st degree av block"),
    dx("164889003", "AF", "atrial fibrillation"),
    dx("164890007", "AFL", "atrial flutter"),
    dx("426627000", "Brady", "bradycardia"),
    dx("713427006", "CRBBB", "complete right bundle branch block"),
    dx("713426002", "IRBBB", "incomplete right bundle branch block"),
    dx("445118002", "LAnFB", "left anterior fascicular block"),
    dx("39732003", "LAD", "left axis deviation"),
    dx("164909002", "LBBB", "left bundle branch block"),
    dx("251146004", "LQRSV", "low qrs voltages"),
    dx("698252002", "NSIVCB", "nonspecific intraventricular conduction disorder"),
    dx("10370003", "PR", "pacing rhythm"),
    dx("284470004", "PAC", "premature atrial contraction"),
    dx("427172004", "PVC", "premature ventricular contractions"),
    dx("164947007", "LPR", "prolonged pr interval"),
    dx("111975006", "LQT", "prolonged qt interval"),
    dx("164917005", "QAb", "qwave abnormal"),
    dx("47665007", "RAD", "right axis deviation"),
    dx("59118001", "RBBB", "right bundle branch block"),
    dx("427393009", "SA", "sinus arrhythmia"),
    dx("426177001", "SB", "sinus bradycardia"),
    dx("426783006", "SNR", "sinus rhythm"),
    dx("427084000", "STach", "sinus tachycardia"),
    dx("63593006", "SVPB", "supraventricular premature beats"),
    dx("164934002", "TAb", "t wave abnormal"),
    dx("59931005", "TInv", "t wave inversion"),
    dx("17338001", "VPB", "ventricular premature beats"),
];

/// Ordered view over [`DIAGNOSES`] with lookups by code and abbreviation.
#[derive(Debug, Clone, Copy, Default)]
pub struct LabelTable;

impl LabelTable {
    pub fn len(&self) -> usize {
        N_LABELS
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, index: usize) -> &'static Diagnosis {
        &DIAGNOSES[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &'static Diagnosis> {
        DIAGNOSES.iter()
    }

    pub fn index_of_code(&self, code: &str) -> Option<usize> {
        DIAGNOSES.iter().position(|d| d.code == code)
    }

    pub fn index_of_abbrev(&self, abbrev: &str) -> Option<usize> {
        DIAGNOSES.iter().position(|d| d.abbrev == abbrev)
    }

    /// Resolves either a SNOMED code or an abbreviation.
    pub fn resolve(&self, token: &str) -> Option<usize> {
        let token = token.trim();
        self.index_of_code(token).or_else(|| self.index_of_abbrev(token))
    }

    /// Index of the normal sinus rhythm class, used as the inactive classifier.
    pub fn normal_class(&self) -> usize {
        self.index_of_abbrev("SNR").expect("SNR is in the table")
    }
}

/// Index of a diagnosis by abbreviation. Panics on unknown abbreviations; meant
/// for literals in code and tests.
pub fn label(abbrev: &str) -> usize {
    LabelTable
        .index_of_abbrev(abbrev)
        .unwrap_or_else(|| panic!("unknown diagnosis abbreviation {abbrev}"))
}

/// A set of diagnoses, stored as a bitmask over the table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct LabelSet(u32);

impl LabelSet {
    pub fn empty() -> Self {
        LabelSet(0)
    }

    pub fn single(index: usize) -> Self {
        let mut s = Self::empty();
        s.insert(index);
        s
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = Self::empty();
        for i in iter {
            s.insert(i);
        }
        s
    }

    pub fn insert(&mut self, index: usize) {
        assert!(index < N_LABELS, "label index {index} out of range");
        self.0 |= 1 << index;
    }

    pub fn contains(&self, index: usize) -> bool {
        index < N_LABELS && self.0 & (1 << index) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn union(&self, other: &LabelSet) -> LabelSet {
        LabelSet(self.0 | other.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..N_LABELS).filter(move |&i| self.contains(i))
    }

    /// Codes in table order, joined by `sep`.
    pub fn to_codes(&self, sep: &str) -> String {
        self.iter()
            .map(|i| DIAGNOSES[i].code)
            .collect::<Vec<_>>()
            .join(sep)
    }

    pub fn from_binary(binary: &[u8]) -> Self {
        Self::from_indices(binary.iter().enumerate().filter(|(_, &b)| b != 0).map(|(i, _)| i))
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.iter().map(|i| DIAGNOSES[i].abbrev).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// Clinical-similarity weights `w[i][j]` between predicted class `i` and true class `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelWeightMatrix {
    w: Vec<[f64; N_LABELS]>,
}

impl LabelWeightMatrix {
    pub fn identity() -> Self {
        let mut w = vec![[0.0; N_LABELS]; N_LABELS];
        for (i, row) in w.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        LabelWeightMatrix { w }
    }

    /// Built-in matrix: identity, full credit between codes the scoring treats as
    /// equivalent (CRBBB/RBBB, PAC/SVPB, PVC/VPB), and half credit between IAVB
    /// and the conduction/sinus classes it is commonly confused with.
    ///
    /// This is a stand-in; the official challenge matrix can be loaded with
    /// [`LabelWeightMatrix::from_csv`].
    pub fn default_clinical() -> Self {
        let mut m = Self::identity();
        for (a, b) in [("CRBBB", "RBBB"), ("PAC", "SVPB"), ("PVC", "VPB")] {
            m.set_symmetric(label(a), label(b), 1.0);
        }
        for other in ["Brady", "IRBBB", "LPR", "SA", "SB"] {
            m.set_symmetric(label("IAVB"), label(other), 0.5);
        }
        m
    }

    pub fn from_rows(rows: Vec<[f64; N_LABELS]>) -> Result<Self> {
        if rows.len() != N_LABELS {
            return Err(Error::Format(format!(
                "weight matrix needs {N_LABELS} rows, got {}",
                rows.len()
            )));
        }
        let m = LabelWeightMatrix { w: rows };
        m.validate()?;
        Ok(m)
    }

    fn set_symmetric(&mut self, i: usize, j: usize, v: f64) {
        self.w[i][j] = v;
        self.w[j][i] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i][j]
    }

    pub fn row(&self, i: usize) -> &[f64; N_LABELS] {
        &self.w[i]
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..N_LABELS {
            if self.w[i][i] != 1.0 {
                return Err(Error::Format(format!(
                    "weight matrix diagonal at {} is {}, expected 1",
                    DIAGNOSES[i].abbrev, self.w[i][i]
                )));
            }
            for j in 0..N_LABELS {
                let v = self.w[i][j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Format(format!("weight {v} at ({i},{j}) outside [0,1]")));
                }
                if v != self.w[j][i] {
                    return Err(Error::Format(format!("weight matrix not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(())
    }

    /// Parses a 27x27 CSV whose first row and first column name the classes
    /// (codes or abbreviations, in any order). Lines starting with `#` are ignored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty weight matrix file".into()))?;
        let cols = resolve_header(header.split(',').skip(1))?;
        let mut w = vec![[f64::NAN; N_LABELS]; N_LABELS];
        let mut seen = [false; N_LABELS];
        for line in lines {
            let mut cells = line.split(',');
            let name = cells.next().unwrap_or_default();
            let row = LabelTable
                .resolve(name)
                .ok_or_else(|| Error::Format(format!("unknown class {name:?} in weight matrix")))?;
            if seen[row] {
                return Err(Error::Format(format!("duplicate weight row {name:?}")));
            }
            seen[row] = true;
            let values: Vec<&str> = cells.collect();
            if values.len() != N_LABELS {
                return Err(Error::Format(format!(
                    "weight row {name:?} has {} values, expected {N_LABELS}",
                    values.len()
                )));
            }
            for (k, cell) in values.iter().enumerate() {
                w[row][cols[k]] = cell
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("non-numeric weight {cell:?}")))?;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Format("weight matrix is missing rows".into()));
        }
        Self::from_rows(w)
    }

    /// Serializes with abbreviation header row and column.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for d in DIAGNOSES.iter() {
            out.push(',');
            out.push_str(d.abbrev);
        }
        out.push('\n');
        for (i, d) in DIAGNOSES.iter().enumerate() {
            out.push_str(d.abbrev);
            for v in &self.w[i] {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

fn resolve_header<'a, I: Iterator<Item = &'a str>>(names: I) -> Result<Vec<usize>> {
    let cols: Vec<usize> = names
        .map(|n| {
            LabelTable
                .resolve(n)
                .ok_or_else(|| Error::Format(format!("unknown class {n:?} in weight header")))
        })
        .collect::<Result<_>>()?;
    if cols.len() != N_LABELS {
        return Err(Error::Format(format!(
            "weight header has {} classes, expected {N_LABELS}",
            cols.len()
        )));
    }
    let mut seen = [false; N_LABELS];
    for &c in &cols {
        if std::mem::replace(&mut seen[c], true) {
            return Err(Error::Format("duplicate class in weight header".into()));
        }
    }
    Ok(cols)
}

/// Writes `id,<27 codes>` followed by one 0/1 row per record.
pub fn labels_to_csv(rows: &[(String, LabelSet)]) -> String {
    let mut out = String::from("id");
    for d in DIAGNOSES.iter() {
        out.push(',');
        out.push_str(d.code);
    }
    out.push('\n');
    for (id, set) in rows {
        out.push_str(id);
        for k in 0..N_LABELS {
            out.push_str(if set.contains(k) { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    out
}

/// Parses [`labels_to_csv`] output; header classes may be codes or
/// abbreviations in any order. Lines starting with `#` are ignored.
pub fn labels_from_csv(text: &str) -> Result<Vec<(String, LabelSet)>> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty label file".into()))?;
    let mut names = header.split(',');
    if names.next().map(str::trim) != Some("id") {
        return Err(Error::Format("label header must start with id".into()));
    }
    let cols = resolve_header(names)?;
    let mut out = Vec::new();
    for line in lines {
        let mut cells = line.split(',');
        let id = cells.next().unwrap_or_default().trim().to_string();
        let values: Vec<&str> = cells.collect();
        if values.len() != N_LABELS {
            return Err(Error::Format(format!("label row {id:?} has {} values", values.len())));
        }
        let mut set = LabelSet::empty();
        for (k, v) in values.iter().enumerate() {
            match v.trim() {
                "1" => set.insert(cols[k]),
                "0" => {}
                other => return Err(Error::Format(format!("label cell {other:?} is not 0 or 1"))),
            }
        }
        out.push((id, set));
    }
    Ok(out)
}
