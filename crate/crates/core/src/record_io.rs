//! Record and prediction file formats.
//!
//! A record is a pair of files sharing an id:
//!
//! * `<id>.hea`: text header. Line 1 is `<id> <n_leads> <fs> <n_samples>`,
//!   followed by one `<id>.csv <lead>` line per lead and the metadata comments
//!   `#Age: <years|NaN>`, `#Sex: <Male|Female|Unknown>`, `#Dx: <code>,<code>,...`.
//!   Other lines are ignored.
//! * `<id>.csv`: `n_samples` rows of 12 comma-separated millivolt values in
//!   lead order I, II, III, aVR, aVL, aVF, V1..V6. No header.
//!
//! A prediction file is `#<id>` followed by three CSV lines: the 27 codes, the
//! binary outputs and the probabilities with six decimals.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::labels::{LabelSet, LabelTable, N_LABELS};

pub const N_LEADS: usize = 12;

pub const LEAD_NAMES: [&str; N_LEADS] = [
    "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sex {
    Male,
    Female,
    Unknown,
}

impl Sex {
    fn parse(s: &str) -> Sex {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Sex::Male,
            "female" | "f" => Sex::Female,
            _ => Sex::Unknown,
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            Sex::Male => "Male",
            Sex::Female => "Female",
            Sex::Unknown => "Unknown",
        }
    }
}

/// A 12-lead recording with its metadata and scored labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    pub id: String,
    /// `leads[k]` holds lead `LEAD_NAMES[k]` in millivolts.
    pub leads: Vec<Vec<f64>>,
    pub fs: u32,
    pub age: Option<f64>,
    pub sex: Sex,
    pub labels: LabelSet,
}

impl EcgRecord {
    pub fn new(
        id: impl Into<String>,
        leads: Vec<Vec<f64>>,
        fs: u32,
        age: Option<f64>,
        sex: Sex,
        labels: LabelSet,
    ) -> Result<Self> {
        let rec = EcgRecord {
            id: id.into(),
            leads,
            fs,
            age,
            sex,
            labels,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn n_samples(&self) -> usize {
        self.leads.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.leads.len() != N_LEADS {
            return Err(Error::UnsupportedRecord(format!(
                "{} has {} leads, expected {N_LEADS}",
                self.id,
                self.leads.len()
            )));
        }
        let n = self.n_samples();
        if n == 0 || self.leads.iter().any(|l| l.len() != n) {
            return Err(Error::Format(format!("{}: leads must share a non-zero length", self.id)));
        }
        if self.fs == 0 {
            return Err(Error::Format(format!("{}: sampling rate must be positive", self.id)));
        }
        Ok(())
    }
}

/// Fields recovered from a header file.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub id: String,
    pub n_leads: usize,
    pub fs: u32,
    pub n_samples: usize,
    pub age: Option<f64>,
    pub sex: Sex,
    pub labels: LabelSet,
    /// Diagnosis codes outside the scored table, dropped at parse time.
    pub dropped_codes: Vec<String>,
}

pub fn parse_header(text: &str) -> Result<Header> {
    let mut lines = text.lines();
    let first = lines
        .next()
        .filter(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::Parse("empty header".into()))?;
    let fields: Vec<&str> = first.split_whitespace().collect();
    if fields.len() < 4 {
        return Err(Error::Parse(format!("malformed record line {first:?}")));
    }
    let num = |s: &str, what: &str| -> Result<u64> {
        // PhysioNet allows "fs/counter" forms; only the leading integer matters here.
        let head = s.split('/').next().unwrap_or(s);
        head.parse::<u64>()
            .map_err(|_| Error::Parse(format!("bad {what} {s:?} in record line")))
    };
    let id = fields[0].to_string();
    let n_leads = num(fields[1], "lead count")? as usize;
    let fs = num(fields[2], "sampling rate")?;
    let n_samples = num(fields[3], "sample count")? as usize;
    if fs == 0 || fs > u32::MAX as u64 {
        return Err(Error::Parse(format!("sampling rate {fs} out of range")));
    }
    if n_leads != N_LEADS {
        return Err(Error::UnsupportedRecord(format!("{id} has {n_leads} leads")));
    }

    let mut age = None;
    let mut sex = Sex::Unknown;
    let mut labels = LabelSet::empty();
    let mut dropped_codes = Vec::new();
    for line in lines {
        let Some(comment) = line.trim().strip_prefix('#') else {
            continue;
        };
        let Some((key, value)) = comment.split_once(':') else {
            continue;
        };
        match key.trim() {
            "Age" => {
                age = value
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|a| a.is_finite() && (0.0..=120.0).contains(a));
            }
            "Sex" => sex = Sex::parse(value),
            "Dx" => {
                for code in value.split(',').map(str::trim).filter(|c| !c.is_empty()) {
                    match LabelTable.index_of_code(code) {
                        Some(i) => labels.insert(i),
                        None => {
                            if !dropped_codes.iter().any(|c| c == code) {
                                dropped_codes.push(code.to_string());
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }
    if !dropped_codes.is_empty() {
        log::debug!("{id}: dropped {} unscored codes", dropped_codes.len());
    }
    Ok(Header {
        id,
        n_leads,
        fs: fs as u32,
        n_samples,
        age,
        sex,
        labels,
        dropped_codes,
    })
}

pub fn write_header(record: &EcgRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {} {}",
        record.id,
        N_LEADS,
        record.fs,
        record.n_samples()
    );
    for lead in LEAD_NAMES {
        let _ = writeln!(out, "{}.csv {}", record.id, lead);
    }
    match record.age {
        Some(a) => {
            let _ = writeln!(out, "#Age: {a}");
        }
        None => out.push_str("#Age: NaN\n"),
    }
    let _ = writeln!(out, "#Sex: {}", record.sex.as_str());
    let _ = writeln!(out, "#Dx: {}", record.labels.to_codes(","));
    out
}

/// Parses signal CSV text into `12 x n` lead-major form, checking the row count.
/// Lines starting with `#` are ignored.
pub fn parse_signal(text: &str, expected_samples: usize) -> Result<Vec<Vec<f64>>> {
    let mut leads: Vec<Vec<f64>> = (0..N_LEADS)
        .map(|_| Vec::with_capacity(expected_samples))
        .collect();
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut count = 0;
        for cell in line.split(',') {
            if count == N_LEADS {
                count += 1;
                break;
            }
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::Format(format!("line {}: non-numeric cell {cell:?}", lineno + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::Format(format!("line {}: non-finite value", lineno + 1)));
            }
            leads[count].push(v);
            count += 1;
        }
        if count != N_LEADS {
            return Err(Error::Format(format!(
                "line {}: expected {N_LEADS} columns",
                lineno + 1
            )));
        }
        rows += 1;
    }
    if rows != expected_samples {
        return Err(Error::Format(format!(
            "signal has {rows} rows but header says {expected_samples}"
        )));
    }
    Ok(leads)
}

pub fn read_signal(path: &Path, expected_samples: usize) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    parse_signal(&text, expected_samples)
}

/// Shortest round-tripping decimal text, one row per sample.
pub fn write_signal(leads: &[Vec<f64>]) -> String {
    let n = leads.first().map_or(0, Vec::len);
    let mut out = String::with_capacity(n * N_LEADS * 8);
    for t in 0..n {
        for (k, lead) in leads.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", lead[t]);
        }
        out.push('\n');
    }
    out
}

/// Loads `<dir>/<id>.hea` and its companion signal.
pub fn load_record(dir: &Path, id: &str) -> Result<(EcgRecord, Vec<String>)> {
    let header_text = std::fs::read_to_string(dir.join(format!("{id}.hea")))?;
    let header = parse_header(&header_text)?;
    let leads = read_signal(&dir.join(format!("{}.csv", header.id)), header.n_samples)?;
    let record = EcgRecord::new(header.id, leads, header.fs, header.age, header.sex, header.labels)?;
    Ok((record, header.dropped_codes))
}

pub fn save_record(dir: &Path, record: &EcgRecord) -> Result<()> {
    std::fs::write(dir.join(format!("{}.hea", record.id)), write_header(record))?;
    std::fs::write(dir.join(format!("{}.csv", record.id)), write_signal(&record.leads))?;
    Ok(())
}

/// Record ids for every `.hea` file in `dir`, sorted.
pub fn list_records(dir: &Path) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "hea") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

pub fn write_predictions(
    record_id: &str,
    table: &LabelTable,
    binary: &[u8],
    scores: &[f64],
) -> Result<String> {
    if binary.len() != table.len() || scores.len() != table.len() {
        return Err(Error::ContractViolation(format!(
            "prediction vectors must have length {}, got {} and {}",
            table.len(),
            binary.len(),
            scores.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::ContractViolation(format!("score {s} outside [0,1]")));
    }
    if let Some(b) = binary.iter().find(|&&b| b > 1) {
        return Err(Error::ContractViolation(format!("binary output {b} is not 0/1")));
    }
    let codes: Vec<&str> = table.iter().map(|d| d.code).collect();
    let bins: Vec<String> = binary.iter().map(u8::to_string).collect();
    let probs: Vec<String> = scores.iter().map(|s| format!("{s:.6}")).collect();
    Ok(format!(
        "#{record_id}\n{}\n{}\n{}\n",
        codes.join(","),
        bins.join(","),
        probs.join(",")
    ))
}

/// Parsed prediction file, re-ordered to table order.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub record_id: String,
    pub binary: Vec<u8>,
    pub scores: Vec<f64>,
}

pub fn parse_predictions(text: &str) -> Result<Prediction> {
    let mut record_id = None;
    let mut rows = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(rest) = line.strip_prefix('#') {
            // "# key: value" lines are provenance; "#<id>" names the record.
            if !rest.is_empty() && !rest.starts_with(' ') {
                record_id = Some(rest.trim().to_string());
            }
            continue;
        }
        rows.push(line);
    }
    if rows.len() != 3 {
        return Err(Error::Format(format!(
            "prediction file needs 3 CSV lines, found {}",
            rows.len()
        )));
    }
    let cols: Vec<usize> = rows[0]
        .split(',')
        .map(|c| {
            LabelTable
                .resolve(c)
                .ok_or_else(|| Error::Format(format!("unknown class {c:?} in predictions")))
        })
        .collect::<Result<_>>()?;
    if cols.len() != N_LABELS {
        return Err(Error::Format(format!("prediction header has {} classes", cols.len())));
    }
    let mut binary = vec![0u8; N_LABELS];
    let mut scores = vec![0.0; N_LABELS];
    let bins: Vec<&str> = rows[1].split(',').collect();
    let probs: Vec<&str> = rows[2].split(',').collect();
    if bins.len() != N_LABELS || probs.len() != N_LABELS {
        return Err(Error::Format("prediction rows must have 27 values".into()));
    }
    for (k, &c) in cols.iter().enumerate() {
        binary[c] = match bins[k].trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::Format(format!("binary value {other:?}"))),
        };
        scores[c] = probs[k]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("probability {:?}", probs[k])))?;
    }
    Ok(Prediction {
        record_id: record_id.unwrap_or_default(),
        binary,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::label;

    const FIXTURE: &str = "A0001 12 500 5000\nA0001.mat 16+24 1000/mV 16 0 28 -1716 0 I\n#Age: 24\n#Sex: Female\n#Dx: 426783006\n#Rx: Unknown\n";

    #[test]
    fn parses_fixture_header() {
        let h = parse_header(FIXTURE).unwrap();
        assert_eq!(h.id, "A0001");
        assert_eq!((h.fs, h.n_samples, h.n_leads), (500, 5000, 12));
        assert_eq!(h.age, Some(24.0));
        assert_eq!(h.sex, Sex::Female);
        assert_eq!(h.labels, LabelSet::single(label("SNR")));
        assert!(h.dropped_codes.is_empty());
    }

    #[test]
    fn nan_age_is_unknown() {
        let h = parse_header(&FIXTURE.replace("#Age: 24", "#Age: NaN")).unwrap();
        assert_eq!(h.age, None);
    }

    #[test]
    fn unscored_codes_are_dropped() {
        let h = parse_header(&FIXTURE.replace("426783006", "426783006,999999999")).unwrap();
        assert_eq!(h.labels, LabelSet::single(label("SNR")));
        assert_eq!(h.dropped_codes, vec!["999999999".to_string()]);
    }

    #[test]
    fn dx_order_and_duplicates_do_not_matter() {
        let a = parse_header(&FIXTURE.replace("426783006", "426783006,427084000")).unwrap();
        let b = parse_header(&FIXTURE.replace("426783006", "427084000,426783006,427084000")).unwrap();
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn malformed_and_unsupported_headers() {
        assert!(matches!(parse_header(""), Err(Error::Parse(_))));
        assert!(matches!(parse_header("A0001 12 abc 10\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_header("A0001 12\n"), Err(Error::Parse(_))));
        assert!(matches!(
            parse_header("A0001 3 500 10\n"),
            Err(Error::UnsupportedRecord(_))
        ));
    }

    #[test]
    fn zero_signal_parses() {
        let row = ["0"; 12].join(",");
        let text = format!("{row}\n{row}\n{row}\n");
        let leads = parse_signal(&text, 3).unwrap();
        assert_eq!(leads.len(), 12);
        assert!(leads.iter().all(|l| l == &vec![0.0; 3]));
        assert!(matches!(parse_signal(&format!("{row}\n{row}\n"), 3), Err(Error::Format(_))));
    }

    #[test]
    fn non_numeric_cell_is_format_error() {
        let mut cells = ["0"; 12];
        cells[4] = "x";
        assert!(matches!(parse_signal(&cells.join(","), 1), Err(Error::Format(_))));
        assert!(matches!(parse_signal("1,2,3", 1), Err(Error::Format(_))));
    }

    #[test]
    fn predictions_round_trip() {
        let text = write_predictions("A1", &LabelTable, &[0; 27], &[0.5; 27]).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
        let p = parse_predictions(&text).unwrap();
        assert_eq!(p.record_id, "A1");
        assert_eq!(p.binary, vec![0; 27]);
        assert_eq!(p.scores, vec![0.5; 27]);
    }

    #[test]
    fn predictions_fixed_precision() {
        let mut scores = vec![0.0; 27];
        scores[0] = 1.0;
        let text = write_predictions("A1", &LabelTable, &[0; 27], &scores).unwrap();
        let probs = text.lines().last().unwrap();
        assert!(probs.starts_with("1.000000,0.000000,"));
    }

    #[test]
    fn prediction_length_mismatch() {
        assert!(matches!(
            write_predictions("A1", &LabelTable, &[0; 26], &[0.5; 27]),
            Err(Error::ContractViolation(_))
        ));
    }
}
