use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ecgboost::gbdt::GbdtParams;
use ecgboost::labels::{LabelTable, LabelWeightMatrix};
use ecgboost::pipeline::RunConfig;
use ecgboost::synth::{rhythm_classes, ClassSpec, SynthSpec};
use clap::Args;
use serde::Deserialize;

use crate::failure::{read_text, require_file, CliResult, Failure};
use crate::provenance::sha256_hex;

/// Settings file shared by the training commands. Command-line flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub weights_file: Option<PathBuf>,
    pub manifest_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub n_runs: Option<usize>,
    pub split_ratio: Option<f64>,
    pub top_k: Option<usize>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub gbdt: Option<GbdtSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbdtSection {
    pub max_depth: Option<usize>,
    pub learning_rate: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub min_child_hessian: Option<f64>,
    pub rounds: Option<usize>,
    pub early_stop_rounds: Option<usize>,
    pub sample_rate: Option<f64>,
    pub sample_eps_frac: Option<f64>,
}

fn parse_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    require_file(path)?;
    toml::from_str(&read_text(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        path.map_or_else(|| Ok(Self::default()), parse_toml)
    }
}

/// Flag values that override the settings file.
#[derive(Debug, Default, Clone, Args)]
pub struct RunOverrides {
    /// Number of repeated train/validation runs
    #[arg(long = "runs")]
    pub n_runs: Option<usize>,
    /// Base seed; run i uses seed + i
    #[arg(long)]
    pub seed: Option<u64>,
    /// Features kept for phase two
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Decision threshold on label probabilities
    #[arg(long)]
    pub threshold: Option<f64>,
}

pub fn run_config(file: &FileConfig, flags: &RunOverrides) -> CliResult<RunConfig> {
    let d = RunConfig::default();
    let mut gbdt = GbdtParams::default();
    if let Some(g) = &file.gbdt {
        gbdt = GbdtParams {
            max_depth: g.max_depth.unwrap_or(gbdt.max_depth),
            learning_rate: g.learning_rate.unwrap_or(gbdt.learning_rate),
            lambda: g.lambda.unwrap_or(gbdt.lambda),
            gamma: g.gamma.unwrap_or(gbdt.gamma),
            min_child_hessian: g.min_child_hessian.unwrap_or(gbdt.min_child_hessian),
            rounds: g.rounds.unwrap_or(gbdt.rounds),
            early_stop_rounds: g.early_stop_rounds.unwrap_or(gbdt.early_stop_rounds),
            sample_rate: g.sample_rate.unwrap_or(gbdt.sample_rate),
            sample_eps_frac: g.sample_eps_frac.unwrap_or(gbdt.sample_eps_frac),
        };
    }
    let config = RunConfig {
        n_runs: flags.n_runs.or(file.n_runs).unwrap_or(d.n_runs),
        split_ratio: file.split_ratio.unwrap_or(d.split_ratio),
        top_k: flags.top_k.or(file.top_k).unwrap_or(d.top_k),
        seed: flags.seed.or(file.seed).unwrap_or(d.seed),
        gbdt,
        threshold: flags.threshold.or(file.threshold).unwrap_or(d.threshold),
    };
    config.validate()?;
    Ok(config)
}

/// Stable `key=value` text of the settings that influence results.
pub fn canonical_run_config(c: &RunConfig) -> String {
    let g = &c.gbdt;
    let mut out = String::new();
    let _ = writeln!(out, "n_runs={}", c.n_runs);
    let _ = writeln!(out, "split_ratio={}", c.split_ratio);
    let _ = writeln!(out, "top_k={}", c.top_k);
    let _ = writeln!(out, "seed={}", c.seed);
    let _ = writeln!(out, "threshold={}", c.threshold);
    let _ = writeln!(out, "gbdt.max_depth={}", g.max_depth);
    let _ = writeln!(out, "gbdt.learning_rate={}", g.learning_rate);
    let _ = writeln!(out, "gbdt.lambda={}", g.lambda);
    let _ = writeln!(out, "gbdt.gamma={}", g.gamma);
    let _ = writeln!(out, "gbdt.min_child_hessian={}", g.min_child_hessian);
    let _ = writeln!(out, "gbdt.rounds={}", g.rounds);
    let _ = writeln!(out, "gbdt.early_stop_rounds={}", g.early_stop_rounds);
    let _ = writeln!(out, "gbdt.sample_rate={}", g.sample_rate);
    let _ = writeln!(out, "gbdt.sample_eps_frac={}", g.sample_eps_frac);
    out
}

/// Weight matrix from `path`, or the built-in clinical matrix.
pub fn load_weights(path: Option<&Path>) -> CliResult<LabelWeightMatrix> {
    match path {
        None => Ok(LabelWeightMatrix::default_clinical()),
        Some(p) => {
            require_file(p)?;
            LabelWeightMatrix::from_csv(&read_text(p)?).map_err(|e| Failure::from(e).context(p.display()))
        }
    }
}

/// Hash of the run settings together with the weight matrix in use.
pub fn config_hash(c: &RunConfig, w: &LabelWeightMatrix) -> String {
    sha256_hex(&format!("{}weights={}\n", canonical_run_config(c), sha256_hex(&w.to_csv())))
}

/// Synthetic dataset description. Missing keys keep the generator defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFile {
    pub n_records: Option<usize>,
    pub seed: Option<u64>,
    pub fs: Option<u32>,
    pub duration_s: Option<f64>,
    pub noise_std_mv: Option<f64>,
    pub drift_amp_mv: Option<f64>,
    pub drift_freq_hz: Option<f64>,
    pub classes: Option<Vec<ClassEntry>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassEntry {
    /// Diagnosis abbreviation or code.
    pub label: String,
    pub hr_bpm: [f64; 2],
    pub jitter: [f64; 2],
    pub weight: Option<f64>,
}

pub const DEFAULT_SYNTH_RECORDS: usize = 100;

#[derive(Debug)]
pub struct SynthPlan {
    pub n_records: usize,
    pub seed: u64,
    pub base: SynthSpec,
    pub classes: Vec<ClassSpec>,
}

impl SynthPlan {
    pub fn new(path: Option<&Path>, n: Option<usize>, seed: Option<u64>) -> CliResult<Self> {
        let file: SynthFile = path.map_or_else(|| Ok(SynthFile::default()), parse_toml)?;
        let d = SynthSpec::default();
        let base = SynthSpec {
            fs: file.fs.unwrap_or(d.fs),
            duration_s: file.duration_s.unwrap_or(d.duration_s),
            noise_std_mv: file.noise_std_mv.unwrap_or(d.noise_std_mv),
            drift_amp_mv: file.drift_amp_mv.unwrap_or(d.drift_amp_mv),
            drift_freq_hz: file.drift_freq_hz.unwrap_or(d.drift_freq_hz),
            ..d
        };
        base.validate()?;
        let classes = match file.classes {
            None => rhythm_classes(),
            Some(entries) => entries
                .into_iter()
                .map(|e| {
                    let label = LabelTable
                        .resolve(&e.label)
                        .ok_or_else(|| Failure::usage(format!("unknown class label {:?}", e.label)))?;
                    Ok(ClassSpec {
                        label,
                        hr_bpm: (e.hr_bpm[0], e.hr_bpm[1]),
                        jitter: (e.jitter[0], e.jitter[1]),
                        weight: e.weight.unwrap_or(1.0),
                    })
                })
                .collect::<CliResult<_>>()?,
        };
        Ok(Self {
            n_records: n.or(file.n_records).unwrap_or(DEFAULT_SYNTH_RECORDS),
            seed: seed.or(file.seed).unwrap_or(0),
            base,
            classes,
        })
    }

    pub fn canonical(&self) -> String {
        let b = &self.base;
        let mut out = format!(
            "n_records={}\nseed={}\nfs={}\nduration_s={}\nnoise_std_mv={}\ndrift_amp_mv={}\ndrift_freq_hz={}\n",
            self.n_records, self.seed, b.fs, b.duration_s, b.noise_std_mv, b.drift_amp_mv, b.drift_freq_hz
        );
        for c in &self.classes {
            let _ = writeln!(
                out,
                "class={},{},{},{},{},{}",
                LabelTable.get(c.label).code,
                c.hr_bpm.0,
                c.hr_bpm.1,
                c.jitter.0,
                c.jitter.1,
                c.weight
            );
        }
        out
    }
}
