use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn ecgboost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecgboost"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(args: &[&str]) -> Output {
    let out = ecgboost(args);
    assert_eq!(
        code(&out),
        0,
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

const SYNTH_SPEC: &str = "n_records = 36\nseed = 11\nduration_s = 5.0\n\n\
[[classes]]\nlabel = \"SNR\"\nhr_bpm = [65.0, 85.0]\njitter = [0.0, 0.05]\n\n\
[[classes]]\nlabel = \"STach\"\nhr_bpm = [110.0, 140.0]\njitter = [0.0, 0.05]\n\n\
[[classes]]\nlabel = \"426177001\"\nhr_bpm = [40.0, 55.0]\njitter = [0.0, 0.05]\n";

const TRAIN_CONFIG: &str = "n_runs = 2\ntop_k = 40\nseed = 5\n\n\
[gbdt]\nmax_depth = 2\nlearning_rate = 0.3\nrounds = 15\n";

/// Synthesized records, extracted features and a settings file, shared by all tests.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let f = Fixture {
            dir: tempfile::tempdir().unwrap(),
        };
        std::fs::write(f.path("synth.toml"), SYNTH_SPEC).unwrap();
        std::fs::write(f.path("train.toml"), TRAIN_CONFIG).unwrap();
        let records = f.path("records");
        ok(&["synth", "--spec", s(&f.path("synth.toml")), "--out", s(&records)]);
        ok(&[
            "extract",
            "--in",
            s(&records),
            "--out",
            s(&f.path("features.csv")),
            "--manifest",
            s(&f.path("manifest.txt")),
            "--labels-out",
            s(&f.path("labels.csv")),
        ]);
        f
    })
}

fn assert_provenance(text: &str, command: &str) {
    let head: Vec<&str> = text.lines().take(5).collect();
    assert!(head[0].starts_with("# ecgboost "), "{head:?}");
    assert_eq!(head[1], format!("# command: {command}"));
    assert!(head[2].starts_with("# seed: "));
    assert!(head[3].starts_with("# config_hash: ") && head[3].len() == "# config_hash: ".len() + 64);
    assert!(head[4].starts_with("# manifest_hash: "));
}

#[test]
fn synth_and_extract_write_provenance_first() {
    let f = fixture();
    let records = f.path("records");
    let labels = read(&records.join("labels.csv"));
    assert_provenance(&labels, "synth");
    assert_eq!(labels.lines().filter(|l| l.starts_with('S')).count(), 36);
    let signal = read(&records.join("S00000.csv"));
    assert_provenance(&signal, "synth");
    // the record line stays first in the header, provenance follows
    let hea = read(&records.join("S00000.hea"));
    assert!(hea.starts_with("S00000 12 500 2500"));
    assert!(hea.lines().nth(2).unwrap().starts_with("# command: synth"));

    let features = read(&f.path("features.csv"));
    assert_provenance(&features, "extract");
    assert_eq!(features.lines().filter(|l| l.starts_with('S')).count(), 36);
    let manifest = read(&f.path("manifest.txt"));
    let hash = features.lines().nth(4).unwrap().trim_start_matches("# manifest_hash: ");
    assert!(manifest.contains(hash));
    // extracted labels agree with the synthesized ones
    let strip = |t: &str| t.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&read(&f.path("labels.csv"))), strip(&labels));
}

#[test]
fn synth_is_byte_reproducible() {
    let f = fixture();
    let other = tempfile::tempdir().unwrap();
    let out = other.path().join("again");
    ok(&["synth", "--spec", s(&f.path("synth.toml")), "--out", s(&out)]);
    let mut names: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 2 * 36 + 1);
    for name in names {
        assert_eq!(read(&out.join(&name)), read(&f.path("records").join(&name)), "{name:?}");
    }
}

#[test]
fn train_predict_evaluate_report_round() {
    let f = fixture();
    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("model");
    let features = f.path("features.csv");
    let labels = f.path("labels.csv");
    let train = |dir: &Path| {
        ok(&[
            "train",
            "--features",
            s(&features),
            "--labels",
            s(&labels),
            "--config",
            s(&f.path("train.toml")),
            "--out",
            s(dir),
        ])
    };
    train(&out);
    for name in ["report.csv", "summary.txt", "prior.csv", "models.txt"] {
        assert_provenance(&read(&out.join(name)), "train");
    }
    assert!(read(&out.join("summary.txt")).contains("runs: 2 completed, 0 failed"));

    // bit-identical artifacts from an identical invocation
    let again = work.path().join("again");
    train(&again);
    for name in ["report.csv", "summary.txt", "prior.csv", "models.txt"] {
        assert_eq!(read(&out.join(name)), read(&again.join(name)), "{name}");
    }

    let preds = work.path().join("preds");
    ok(&[
        "predict",
        "--models",
        s(&out.join("models.txt")),
        "--features",
        s(&features),
        "--out",
        s(&preds),
    ]);
    let p = read(&preds.join("S00003.csv"));
    assert_provenance(&p, "predict");
    assert!(p.contains("#S00003\n"));

    let eval_file = work.path().join("eval.txt");
    let ev = ok(&[
        "evaluate",
        "--pred",
        s(&preds),
        "--truth",
        s(&labels),
        "--weights",
        s(&write_identity_weights(work.path())),
        "--out",
        s(&eval_file),
    ]);
    let stdout = String::from_utf8(ev.stdout).unwrap();
    assert_eq!(stdout, read(&eval_file));
    assert_provenance(&stdout, "evaluate");
    assert!(stdout.contains("records: 36"));
    for metric in ["challenge_raw", "challenge_normalized", "macro_f1", "auroc"] {
        assert!(stdout.contains(metric), "{metric} missing");
    }

    let rep = ok(&["report", "--in", s(&out.join("report.csv"))]);
    let text = String::from_utf8(rep.stdout).unwrap();
    assert_provenance(&text, "report");
    assert!(text.contains("runs: 2"));
    assert!(text.lines().any(|l| l.starts_with("two") && l.contains("macro_f1")));
}

fn write_identity_weights(dir: &Path) -> PathBuf {
    let path = dir.join("identity.csv");
    std::fs::write(&path, ecgboost::labels::LabelWeightMatrix::identity().to_csv()).unwrap();
    path
}

#[test]
fn importance_prior_then_train_with_prior() {
    let f = fixture();
    let work = tempfile::tempdir().unwrap();
    let prior = work.path().join("prior.csv");
    let (features, labels, config) = (f.path("features.csv"), f.path("labels.csv"), f.path("train.toml"));
    let common = ["--features", s(&features), "--labels", s(&labels), "--config", s(&config)];
    let mut args = vec!["importance-prior"];
    args.extend(common);
    args.extend(["--out", s(&prior), "--runs", "1"]);
    ok(&args);
    let text = read(&prior);
    assert_provenance(&text, "importance-prior");
    assert!(text.contains("# seed: 5"));

    let out = work.path().join("p2");
    let mut args = vec!["train"];
    args.extend(common);
    args.extend(["--prior", s(&prior), "--out", s(&out), "--top-k", "10"]);
    ok(&args);
    assert_provenance(&read(&out.join("validation.txt")), "train");
    let models = read(&out.join("models.txt"));
    assert!(models.contains("model-set v1"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&ecgboost(&[])), 1);
    assert_eq!(code(&ecgboost(&["frobnicate"])), 1);
    assert_eq!(code(&ecgboost(&["train", "--features"])), 1);
    assert_eq!(code(&ecgboost(&["--help"])), 0);
    let work = tempfile::tempdir().unwrap();
    let missing = work.path().join("missing.csv");
    let out = work.path().join("o");
    assert_eq!(
        code(&ecgboost(&["train", "--features", s(&missing), "--labels", s(&missing), "--out", s(&out)])),
        1
    );
    // unknown settings keys are rejected before any work starts
    let bad = work.path().join("bad.toml");
    std::fs::write(&bad, "n_runs = 1\nlearning_rate = 0.1\n").unwrap();
    let f = fixture();
    let r = ecgboost(&[
        "train",
        "--features",
        s(&f.path("features.csv")),
        "--labels",
        s(&f.path("labels.csv")),
        "--config",
        s(&bad),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 1);
    assert!(String::from_utf8_lossy(&r.stderr).contains("learning_rate"));
    assert!(!out.exists());
    // out-of-range flag values
    let r = ecgboost(&[
        "train",
        "--features",
        s(&f.path("features.csv")),
        "--labels",
        s(&f.path("labels.csv")),
        "--threshold",
        "1.5",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 1);
}

#[test]
fn data_errors_exit_two() {
    let f = fixture();
    let work = tempfile::tempdir().unwrap();
    let broken = work.path().join("features.csv");
    std::fs::write(&broken, "id,a,b\nr1,1.0,oops\n").unwrap();
    let r = ecgboost(&[
        "train",
        "--features",
        s(&broken),
        "--labels",
        s(&f.path("labels.csv")),
        "--out",
        s(&work.path().join("o")),
    ]);
    assert_eq!(code(&r), 2, "{}", String::from_utf8_lossy(&r.stderr));

    // models trained on one manifest refuse a matrix lacking their columns
    let models = work.path().join("models.txt");
    let preds_dir = work.path().join("preds");
    let m = work.path().join("m");
    ok(&[
        "train",
        "--features",
        s(&f.path("features.csv")),
        "--labels",
        s(&f.path("labels.csv")),
        "--config",
        s(&f.path("train.toml")),
        "--runs",
        "1",
        "--out",
        s(&m),
    ]);
    std::fs::copy(m.join("models.txt"), &models).unwrap();
    let small = work.path().join("small.csv");
    std::fs::write(&small, "id,x\nr1,1.0\n").unwrap();
    let r = ecgboost(&["predict", "--models", s(&models), "--features", s(&small), "--out", s(&preds_dir)]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("manifest"));
}

#[test]
fn pipeline_errors_exit_three() {
    let f = fixture();
    let work = tempfile::tempdir().unwrap();
    // no record carries any label: every classifier is skipped
    let text = read(&f.path("labels.csv"));
    let blank: String = text
        .lines()
        .map(|l| {
            if l.starts_with('S') {
                let id = l.split(',').next().unwrap();
                format!("{id}{}\n", ",0".repeat(27))
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    let labels = work.path().join("labels.csv");
    std::fs::write(&labels, blank).unwrap();
    let r = ecgboost(&[
        "train",
        "--features",
        s(&f.path("features.csv")),
        "--labels",
        s(&labels),
        "--config",
        s(&f.path("train.toml")),
        "--out",
        s(&work.path().join("o")),
    ]);
    assert_eq!(code(&r), 3, "{}", String::from_utf8_lossy(&r.stderr));
}
