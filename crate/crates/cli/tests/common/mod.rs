//! Shared helpers: a synthetic CSV with the osteoporosis column layout and
//! small wrappers around the built binary.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BIN: &str = env!("CARGO_BIN_EXE_osteo");

pub fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn schema_path() -> PathBuf {
    workspace().join("configs/osteoporosis_schema.json")
}

pub fn config_path(kind: &str, family: &str) -> PathBuf {
    workspace().join("configs").join(kind).join(format!("{family}.json"))
}

/// Location of the real dataset: `OSTEO_CSV`, else `data/osteoporosis.csv`.
pub fn dataset_path() -> PathBuf {
    std::env::var_os("OSTEO_CSV")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace().join("data/osteoporosis.csv"))
}

const HEADER: &str = "Id,Age,Gender,Hormonal Changes,Family History,Race/Ethnicity,Body Weight,\
Calcium Intake,Vitamin D Intake,Physical Activity,Smoking,Alcohol Consumption,\
Medical Conditions,Medications,Prior Fractures,Osteoporosis";

/// Rows whose label depends mostly on age, a little on hormonal changes and
/// family history, and not at all on the remaining columns.
pub fn write_synthetic_csv(path: &Path, rows: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |options: &[&'static str]| options[rng.random_range(0..options.len())];
    let mut lines = vec![HEADER.to_string()];
    let mut draws = Vec::new();
    for _ in 0..rows {
        let cells = [
            pick(&["Male", "Female"]),
            pick(&["Normal", "Postmenopausal"]),
            pick(&["No", "Yes"]),
            pick(&["African American", "Asian", "Caucasian"]),
            pick(&["Normal", "Underweight"]),
            pick(&["Adequate", "Low"]),
            pick(&["Insufficient", "Sufficient"]),
            pick(&["Active", "Sedentary"]),
            pick(&["No", "Yes"]),
            pick(&["Moderate", ""]),
            pick(&["Hyperthyroidism", "Rheumatoid Arthritis", ""]),
            pick(&["Corticosteroids", ""]),
            pick(&["No", "Yes"]),
        ];
        draws.push(cells);
    }
    for (i, cells) in draws.into_iter().enumerate() {
        let age: u32 = rng.random_range(18..=90);
        let mut logit = (age as f64 - 45.0) / 6.0;
        if cells[1] == "Postmenopausal" {
            logit += 0.8;
        }
        if cells[2] == "Yes" {
            logit += 0.6;
        }
        let label = rng.random_bool(1.0 / (1.0 + (-logit).exp())) as u8;
        lines.push(format!("{},{age},{},{label}", 100_000 + i, cells.join(",")));
    }
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

pub fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("OSTEO_OUT_DIR").env("SOURCE_DATE_EPOCH", "1700000000");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

/// Runs and panics with stderr on a nonzero exit.
pub fn run_ok(args: &[&str], envs: &[(&str, &str)]) {
    let out = run(args, envs);
    assert!(
        out.status.success(),
        "osteo {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn data_args<'a>(csv: &'a str, schema: &'a str) -> Vec<&'a str> {
    vec!["--csv", csv, "--schema", schema]
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Every file under `root`, relative path to bytes, sorted.
pub fn snapshot(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
