use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ecgboost::assemble::{extract_matrix, ExtractConfig, FeatureMatrix, Layout};
use ecgboost::labels::{labels_from_csv, labels_to_csv, LabelSet, LabelTable, DIAGNOSES, N_LABELS};
use ecgboost::metrics::{evaluate, MetricReport};
use ecgboost::pipeline::{
    binarize, mean_std, overall_metrics, phase_one, report_csv, report_summary, run_repeated, run_seed,
    split_train_valid, train_with_prior, Dataset, ImportancePrior, ModelSet,
};
use ecgboost::record_io::{
    list_records, load_record, parse_predictions, write_header, write_predictions, write_signal,
};
use ecgboost::synth::generate_dataset_record;
use clap::Args;
use ecgboost::Error;

use crate::config::{config_hash, load_weights, run_config, FileConfig, RunOverrides, SynthPlan};
use crate::failure::*;
use crate::provenance::{sha256_hex, Provenance};

/// Records loaded and featurized per batch, bounding peak memory.
const EXTRACT_BATCH: usize = 64;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for records and labels.csv
    #[arg(long)]
    pub out: PathBuf,
    /// TOML dataset description
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of records (overrides the spec file)
    #[arg(long)]
    pub n: Option<usize>,
    /// Base seed (overrides the spec file)
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    let plan = SynthPlan::new(a.spec.as_deref(), a.n, a.seed)?;
    prepare_out_dir(&a.out)?;
    let prov = Provenance {
        command: "synth",
        seed: Some(plan.seed),
        config_hash: sha256_hex(&plan.canonical()),
        manifest_hash: None,
    };
    let mut labels = Vec::with_capacity(plan.n_records);
    for i in 0..plan.n_records {
        let rec = generate_dataset_record(i, &plan.classes, &plan.base, plan.seed)?.record;
        let hea = a.out.join(format!("{}.hea", rec.id));
        write_text(&hea, &prov.wrap_after_first_line(&write_header(&rec)))?;
        let sig = a.out.join(format!("{}.csv", rec.id));
        write_text(&sig, &prov.wrap(&write_signal(&rec.leads)))?;
        labels.push((rec.id, rec.labels));
    }
    write_text(&a.out.join("labels.csv"), &prov.wrap(&labels_to_csv(&labels)))?;
    log::info!("wrote {} records to {}", plan.n_records, a.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory of .hea/.csv records (falls back to data_dir)
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Feature matrix CSV to write
    #[arg(long)]
    pub out: PathBuf,
    /// Feature manifest to write (falls back to manifest_path)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Label CSV to write from the record headers
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    /// TOML settings file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn extract(a: &ExtractArgs) -> CliResult<()> {
    let file = FileConfig::load(a.config.as_deref())?;
    let input = a
        .input
        .clone()
        .or(file.data_dir)
        .ok_or_else(|| Failure::usage("an input directory is required (--in or data_dir)"))?;
    let manifest_path = a.manifest.clone().or(file.manifest_path);
    require_dir(&input)?;
    for p in [Some(&a.out), manifest_path.as_ref(), a.labels_out.as_ref()].into_iter().flatten() {
        require_writable_parent(p)?;
    }
    let ids = at(&input, list_records(&input))?;
    if ids.is_empty() {
        return Err(Failure::data(format!("{}: no records found", input.display())));
    }
    let layout = Layout::standard();
    let config = ExtractConfig::default();
    let manifest = layout.manifest();
    let mut matrix = FeatureMatrix::new(manifest.names().into_iter().map(String::from).collect());
    let mut labels = Vec::with_capacity(ids.len());
    let (mut failed_leads, mut skipped) = (0, 0);
    for batch in ids.chunks(EXTRACT_BATCH) {
        let mut records = Vec::with_capacity(batch.len());
        for id in batch {
            match load_record(&input, id) {
                Ok((rec, _)) => records.push(rec),
                Err(Error::UnsupportedRecord(m)) => {
                    log::warn!("skipping {id}: {m}");
                    skipped += 1;
                }
                Err(e) => return Err(Failure::from(e).context(format!("record {id}"))),
            }
        }
        let (m, report) = extract_matrix(&records, &layout, &config);
        failed_leads += report.failed_leads;
        for r in 0..m.n_rows() {
            matrix.push_row(m.ids[r].clone(), m.row(r), m.unknown_age[r])?;
        }
        labels.extend(records.into_iter().map(|r| (r.id, r.labels)));
    }
    log::info!(
        "extracted {} records ({} skipped, {} leads without features)",
        matrix.n_rows(),
        skipped,
        failed_leads
    );
    let prov = Provenance {
        command: "extract",
        seed: None,
        config_hash: sha256_hex(&format!("{config:?}")),
        manifest_hash: Some(manifest.hash()),
    };
    write_text(&a.out, &prov.wrap(&matrix.to_csv()))?;
    if let Some(p) = &manifest_path {
        write_text(p, &prov.wrap(&manifest.to_text()))?;
    }
    if let Some(p) = &a.labels_out {
        write_text(p, &prov.wrap(&labels_to_csv(&labels)))?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature matrix CSV
    #[arg(long)]
    pub features: PathBuf,
    /// Label CSV
    #[arg(long)]
    pub labels: PathBuf,
    /// 27x27 weight matrix CSV (default: built-in clinical matrix)
    #[arg(long, visible_alias = "weights")]
    pub weights_file: Option<PathBuf>,
    /// Output directory (falls back to output_dir)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Importance prior CSV: train phase two only on its top-K features
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// TOML settings file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: RunOverrides,
}

fn load_dataset(features: &Path, labels: &Path) -> CliResult<Dataset> {
    let m = at(features, FeatureMatrix::from_csv(&read_text(features)?))?;
    let l = at(labels, labels_from_csv(&read_text(labels)?))?;
    Ok(Dataset::join(m, &l)?)
}

pub fn train(a: &TrainArgs) -> CliResult<()> {
    let file = FileConfig::load(a.config.as_deref())?;
    let config = run_config(&file, &a.overrides)?;
    let w = load_weights(a.weights_file.as_deref().or(file.weights_file.as_deref()))?;
    let out = a
        .out
        .clone()
        .or(file.output_dir)
        .ok_or_else(|| Failure::usage("an output directory is required (--out or output_dir)"))?;
    require_file(&a.features)?;
    require_file(&a.labels)?;
    if let Some(p) = &a.prior {
        require_file(p)?;
    }
    prepare_out_dir(&out)?;
    let data = load_dataset(&a.features, &a.labels)?;
    let prov = |manifest: String| Provenance {
        command: "train",
        seed: Some(config.seed),
        config_hash: config_hash(&config, &w),
        manifest_hash: Some(manifest),
    };
    let full = prov(data.features.manifest_hash());
    match &a.prior {
        None => {
            let report = run_repeated(&data, &w, &config)?;
            if report.is_partial() {
                log::warn!("{} of {} runs failed", report.failures.len(), config.n_runs);
            }
            let prior = ImportancePrior::from_reports(data.features.columns.clone(), &report.runs)?;
            let models = &report.runs[0].phase_two.models;
            write_text(&out.join("report.csv"), &full.wrap(&report_csv(&report)))?;
            write_text(&out.join("summary.txt"), &full.wrap(&report_summary(&report)))?;
            write_text(&out.join("prior.csv"), &full.wrap(&prior.to_csv()))?;
            write_text(&out.join("models.txt"), &prov(models.manifest_hash()).wrap(&models.to_text()))?;
        }
        Some(path) => {
            let prior = at(path, ImportancePrior::from_csv(&read_text(path)?))?;
            let (_, _, phase) = train_with_prior(&data, &prior, &w, &config, 0)?;
            let models = &phase.models;
            write_text(
                &out.join("validation.txt"),
                &full.wrap(&metric_text(&phase.validation.metrics, phase.validation.scores.len())),
            )?;
            write_text(&out.join("models.txt"), &prov(models.manifest_hash()).wrap(&models.to_text()))?;
        }
    }
    log::info!("wrote training artifacts to {}", out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct PriorArgs {
    /// Feature matrix CSV
    #[arg(long)]
    pub features: PathBuf,
    /// Label CSV
    #[arg(long)]
    pub labels: PathBuf,
    /// 27x27 weight matrix CSV (default: built-in clinical matrix)
    #[arg(long, visible_alias = "weights")]
    pub weights_file: Option<PathBuf>,
    /// Prior CSV to write
    #[arg(long)]
    pub out: PathBuf,
    /// TOML settings file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: RunOverrides,
}

/// Phase one only, repeated over runs; writes the mean importance.
pub fn importance_prior(a: &PriorArgs) -> CliResult<()> {
    let file = FileConfig::load(a.config.as_deref())?;
    let config = run_config(&file, &a.overrides)?;
    let w = load_weights(a.weights_file.as_deref().or(file.weights_file.as_deref()))?;
    require_file(&a.features)?;
    require_file(&a.labels)?;
    require_writable_parent(&a.out)?;
    let data = load_dataset(&a.features, &a.labels)?;
    let mut runs = Vec::with_capacity(config.n_runs);
    for i in 0..config.n_runs {
        let seed = run_seed(&config, i);
        let split = split_train_valid(data.n_rows(), config.split_ratio, seed)?;
        match phase_one(&data, &split, &w, &config, seed) {
            Ok(p) => runs.push(p.importance),
            Err(e) => log::warn!("run {i} failed: {e}"),
        }
    }
    if runs.is_empty() {
        return Err(Failure::pipeline("every run failed"));
    }
    let prior = ImportancePrior::from_runs(data.features.columns.clone(), &runs)?;
    let prov = Provenance {
        command: "importance-prior",
        seed: Some(config.seed),
        config_hash: config_hash(&config, &w),
        manifest_hash: Some(prior.manifest_hash()),
    };
    write_text(&a.out, &prov.wrap(&prior.to_csv()))
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model set written by train
    #[arg(long)]
    pub models: PathBuf,
    /// Feature matrix CSV
    #[arg(long)]
    pub features: PathBuf,
    /// Directory for one prediction file per record
    #[arg(long)]
    pub out: PathBuf,
    /// Decision threshold (default: the one stored with the models)
    #[arg(long)]
    pub threshold: Option<f64>,
}

pub fn predict(a: &PredictArgs) -> CliResult<()> {
    require_file(&a.models)?;
    require_file(&a.features)?;
    if let Some(t) = a.threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(Failure::usage(format!("threshold {t} outside [0, 1]")));
        }
    }
    prepare_out_dir(&a.out)?;
    let model_text = read_text(&a.models)?;
    let mut models = at(&a.models, ModelSet::from_text(&model_text))?;
    if let Some(t) = a.threshold {
        models.threshold = t;
    }
    let matrix = at(&a.features, FeatureMatrix::from_csv(&read_text(&a.features)?))?;
    let scores = models.predict_scores(&matrix)?;
    let prov = Provenance {
        command: "predict",
        seed: None,
        config_hash: sha256_hex(&format!("models={}\nthreshold={}\n", sha256_hex(&model_text), models.threshold)),
        manifest_hash: Some(models.manifest_hash()),
    };
    for (id, s) in matrix.ids.iter().zip(&scores) {
        let text = write_predictions(id, &LabelTable, &binarize(s, models.threshold), s)?;
        write_text(&a.out.join(format!("{id}.csv")), &prov.wrap(&text))?;
    }
    log::info!("wrote {} prediction files to {}", scores.len(), a.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of prediction files
    #[arg(long)]
    pub pred: PathBuf,
    /// Label CSV with the true classes
    #[arg(long)]
    pub truth: PathBuf,
    /// 27x27 weight matrix CSV (default: built-in clinical matrix)
    #[arg(long, visible_alias = "weights")]
    pub weights_file: Option<PathBuf>,
    /// Also write the report here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn evaluate_cmd(a: &EvaluateArgs) -> CliResult<String> {
    require_dir(&a.pred)?;
    require_file(&a.truth)?;
    if let Some(p) = &a.out {
        require_writable_parent(p)?;
    }
    let w = load_weights(a.weights_file.as_deref())?;
    let truth: HashMap<String, LabelSet> = at(&a.truth, labels_from_csv(&read_text(&a.truth)?))?
        .into_iter()
        .collect();
    let mut files: Vec<PathBuf> = std::fs::read_dir(&a.pred)
        .map_err(|e| Failure::data(format!("{}: {e}", a.pred.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::data(format!("{}: no prediction files", a.pred.display())));
    }
    let (mut pred, mut scores, mut truth_sets) = (Vec::new(), Vec::new(), Vec::new());
    for f in &files {
        let mut p = at(f, parse_predictions(&read_text(f)?))?;
        if p.record_id.is_empty() {
            p.record_id = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        }
        let t = truth
            .get(&p.record_id)
            .ok_or_else(|| Failure::data(format!("no truth labels for record {}", p.record_id)))?;
        pred.push(LabelSet::from_binary(&p.binary));
        scores.push(p.scores);
        truth_sets.push(*t);
    }
    let report = evaluate(&pred, &scores, &truth_sets, &w)?;
    let prov = Provenance {
        command: "evaluate",
        seed: None,
        config_hash: sha256_hex(&format!("weights={}\n", sha256_hex(&w.to_csv()))),
        manifest_hash: None,
    };
    let text = prov.wrap(&metric_text(&report, pred.len()));
    if let Some(p) = &a.out {
        write_text(p, &text)?;
    }
    Ok(text)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

/// Overall metrics followed by a per-label table.
pub fn metric_text(m: &MetricReport, n_records: usize) -> String {
    let mut out = format!("records: {n_records}\n");
    for (name, v) in overall_metrics(m) {
        let _ = writeln!(out, "{name:<22} {}", fmt_opt(v));
    }
    let _ = writeln!(out, "{:<10} {:>8} {:>8} {:>8}", "label", "f1", "auroc", "auprc");
    for k in 0..N_LABELS {
        let row = [m.per_label_f1[k], m.per_label_auroc[k], m.per_label_auprc[k]];
        if row.iter().any(Option::is_some) {
            let _ = writeln!(
                out,
                "{:<10} {:>8} {:>8} {:>8}",
                DIAGNOSES[k].abbrev,
                fmt_opt(row[0]),
                fmt_opt(row[1]),
                fmt_opt(row[2])
            );
        }
    }
    out
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// report.csv written by train
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Also write the summary here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Mean and deviation per phase, label and metric of a training report CSV.
pub fn report(a: &ReportArgs) -> CliResult<String> {
    require_file(&a.input)?;
    if let Some(p) = &a.out {
        require_writable_parent(p)?;
    }
    let text = read_text(&a.input)?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    if lines.next() != Some("run,phase,label,metric,value") {
        return Err(Failure::data(format!("{}: not a training report", a.input.display())));
    }
    let mut keys: Vec<(String, String, String)> = Vec::new();
    let mut values: HashMap<(String, String, String), Vec<f64>> = HashMap::new();
    let mut runs = std::collections::BTreeSet::new();
    for l in lines {
        let cells: Vec<&str> = l.split(',').collect();
        let bad = || Failure::data(format!("{}: malformed row {l:?}", a.input.display()));
        if cells.len() != 5 {
            return Err(bad());
        }
        let v: f64 = cells[4].parse().map_err(|_| bad())?;
        runs.insert(cells[0].to_string());
        let key = (cells[1].to_string(), cells[2].to_string(), cells[3].to_string());
        values
            .entry(key.clone())
            .or_insert_with(|| {
                keys.push(key);
                Vec::new()
            })
            .push(v);
    }
    let mut out = format!("runs: {}\n", runs.len());
    let _ = writeln!(out, "{:<6} {:<10} {:<22} {:>4} {:>10} {:>10}", "phase", "label", "metric", "n", "mean", "std");
    for key in &keys {
        let v = &values[key];
        let (m, s) = mean_std(v).unwrap_or((f64::NAN, f64::NAN));
        let _ = writeln!(out, "{:<6} {:<10} {:<22} {:>4} {m:>10.4} {s:>10.4}", key.0, key.1, key.2, v.len());
    }
    let prov = Provenance {
        command: "report",
        seed: None,
        config_hash: sha256_hex(&text),
        manifest_hash: None,
    };
    let text = prov.wrap(&out);
    if let Some(p) = &a.out {
        write_text(p, &text)?;
    }
    Ok(text)
}
