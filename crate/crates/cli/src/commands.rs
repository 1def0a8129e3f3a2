use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use osteo::data::{eda as eda_report, file_sha256, load_csv, stratified_split, SchemaConfig};
use osteo::explain::{
    lime_explain, permutation_importance, shap_summary, shap_waterfall, FeatureStats, LimeConfig,
};
use osteo::metrics::{compute_metrics, roc_and_auc};
use osteo::tuning::{grid_search, ModelConfig, ParamGrid, ParamMap};
use osteo::{Dataset, ModelFamily, SplitPair};

use crate::bundle::{
    csv_text, hash_tree, require_file, usage, CliError, CliResult, ModelFile, Provenance, Staged,
    TOOL_VERSION,
};
use crate::{DataArgs, Method};

const PFI_REPEATS: usize = 10;
const PFI_METRIC: &str = "accuracy";

struct Loaded {
    dataset: Dataset,
    prov: Provenance,
}

fn load(args: &DataArgs) -> CliResult<Loaded> {
    require_file(&args.csv, "csv file")?;
    require_file(&args.schema, "schema file")?;
    if !(args.test_fraction > 0.0 && args.test_fraction < 1.0) {
        return Err(usage(format!(
            "--test-fraction must lie in (0, 1), got {}",
            args.test_fraction
        )));
    }
    let config = SchemaConfig::from_path(&args.schema)?;
    let dataset = load_csv(&args.csv, &config)?;
    Ok(Loaded {
        dataset,
        prov: Provenance {
            seed: args.seed,
            dataset_sha256: file_sha256(&args.csv)?,
        },
    })
}

fn split(args: &DataArgs, d: &Dataset) -> CliResult<SplitPair> {
    Ok(stratified_split(d, args.test_fraction, args.seed)?)
}

fn resolve_family(flag: Option<ModelFamily>, file: Option<ModelFamily>, what: &str) -> CliResult<ModelFamily> {
    match (flag, file) {
        (Some(a), Some(b)) if a != b => Err(usage(format!(
            "--family {a} conflicts with the {what}'s family {b}"
        ))),
        (Some(f), _) | (None, Some(f)) => Ok(f),
        (None, None) => Err(usage(format!("--family is required when the {what} names none"))),
    }
}

/// Rejects evaluating or explaining on a split other than the one the model
/// was trained against, which would leak training rows into the test side.
fn check_split(file: &ModelFile, args: &DataArgs, prov: &Provenance) -> CliResult<()> {
    if file.dataset_sha256 == prov.dataset_sha256
        && (file.seed != args.seed || file.test_fraction != args.test_fraction)
    {
        return Err(usage(format!(
            "model was fit with --seed {} --test-fraction {}; pass the same values",
            file.seed, file.test_fraction
        )));
    }
    Ok(())
}

fn decoded_row(d: &Dataset, x: &[f64]) -> BTreeMap<String, Value> {
    d.schema
        .features
        .iter()
        .zip(x)
        .map(|(c, &v)| {
            let shown = match c.decode(v) {
                Some(text) if c.is_categorical() => Value::from(text),
                _ => json!(v),
            };
            (c.name.clone(), shown)
        })
        .collect()
}

fn model_file(family: ModelFamily, args: &DataArgs, prov: &Provenance, model: osteo::Model) -> ModelFile {
    ModelFile {
        family,
        seed: prov.seed,
        dataset_sha256: prov.dataset_sha256.clone(),
        test_fraction: args.test_fraction,
        tool_version: TOOL_VERSION.to_string(),
        model,
    }
}

pub fn ingest(args: &DataArgs, out: &Path) -> CliResult<()> {
    let Loaded { dataset: d, prov } = load(args)?;
    let s = split(args, &d)?;
    let mut staged = Staged::default();
    staged.json(
        "ingest.json",
        &prov.tag(&json!({
            "rows": d.row_count(),
            "class_counts": d.class_counts(),
            "schema": d.schema,
            "schema_fingerprint": d.schema.fingerprint(),
            "test_fraction": args.test_fraction,
            "train_indices": s.train_indices,
            "test_indices": s.test_indices,
            "train_class_counts": s.train.class_counts(),
            "test_class_counts": s.test.class_counts(),
        }))?,
    )?;
    staged.commit(out)
}

pub fn eda(args: &DataArgs, out: &Path) -> CliResult<()> {
    let Loaded { dataset: d, prov } = load(args)?;
    let mut staged = Staged::default();
    staged.json("eda.json", &prov.tag(&eda_report(&d))?)?;
    staged.commit(out)
}

pub fn tune(args: &DataArgs, out: &Path, family: Option<ModelFamily>, grid: &Path, folds: usize) -> CliResult<()> {
    require_file(grid, "grid file")?;
    if folds < 2 {
        return Err(usage("--folds must be at least 2"));
    }
    let grid = ParamGrid::from_path(grid)?;
    let family = resolve_family(family, Some(grid.family), "grid file")?;
    let Loaded { dataset: d, prov } = load(args)?;
    let s = split(args, &d)?;
    let (cv, model) = grid_search(&s.train, &grid, folds, args.seed)?;

    let mut staged = Staged::default();
    let dir = Path::new(family.code());
    staged.json(
        dir.join("cv.json"),
        &prov.tag(&json!({
            "family": family,
            "grid": grid,
            "folds": cv.folds,
            "scoring": cv.scoring,
            "best_index": cv.best_index,
            "best_params": cv.best().params,
            "best_mean": cv.best().mean,
            "candidates": cv.candidates,
        }))?,
    )?;
    staged.json(dir.join("model.json"), &model_file(family, args, &prov, model))?;
    staged.commit(out)
}

fn read_params(path: &Path) -> CliResult<(Option<ModelFamily>, ParamMap)> {
    require_file(path, "params file")?;
    let text = std::fs::read_to_string(path).map_err(|e| osteo::Error::io(path, e))?;
    let v: Value = serde_json::from_str(&text)?;
    let bad = |m: &str| CliError::Domain(osteo::Error::Config(format!("{}: {m}", path.display())));
    let obj = v.as_object().ok_or_else(|| bad("expected a JSON object"))?;
    if let Some(k) = obj.keys().find(|k| *k != "family" && *k != "params") {
        return Err(bad(&format!("unexpected key '{k}'")));
    }
    let family = match obj.get("family") {
        None => None,
        Some(Value::String(code)) => Some(
            ModelFamily::from_code(code).ok_or_else(|| bad(&format!("unknown family '{code}'")))?,
        ),
        Some(_) => return Err(bad("'family' must be a string")),
    };
    let params = match obj.get("params") {
        None => ParamMap::new(),
        Some(p) => serde_json::from_value(p.clone()).map_err(|_| bad("'params' must be an object"))?,
    };
    Ok((family, params))
}

pub fn train(args: &DataArgs, out: &Path, family: Option<ModelFamily>, params: Option<&Path>) -> CliResult<()> {
    let (file_family, params) = match params {
        Some(p) => read_params(p)?,
        None => (None, ParamMap::new()),
    };
    let family = resolve_family(family, file_family, "params file")?;
    let Loaded { dataset: d, prov } = load(args)?;
    let s = split(args, &d)?;
    let model = ModelConfig::from_params(family, &params, args.seed)?.fit(&s.train)?;
    let mut staged = Staged::default();
    staged.json(
        Path::new(family.code()).join("model.json"),
        &model_file(family, args, &prov, model),
    )?;
    staged.commit(out)
}

#[derive(Serialize)]
struct MetricsArtifact<'a> {
    family: ModelFamily,
    model: &'static str,
    n_test: usize,
    test_fraction: f64,
    accuracy: f64,
    per_class: &'a [osteo::metrics::ClassMetrics],
    macro_avg: osteo::metrics::Averages,
    weighted_avg: osteo::metrics::Averages,
    confusion: osteo::metrics::ConfusionMatrix,
    zero_division: &'a [String],
    auc: Option<f64>,
    roc_file: &'static str,
}

pub fn evaluate(args: &DataArgs, out: &Path, model: &Path) -> CliResult<()> {
    let file = ModelFile::load(model)?;
    let Loaded { dataset: d, prov } = load(args)?;
    check_split(&file, args, &prov)?;
    let s = split(args, &d)?;
    let m = &file.model;
    let proba = m.predict_dataset(&s.test)?;
    let pred: Vec<u8> = proba.iter().map(|&p| (p > 0.5) as u8).collect();
    let report = compute_metrics(&s.test.labels, &pred)?;
    let roc = roc_and_auc(&s.test.labels, &proba).ok();

    let family = file.family;
    let mut staged = Staged::default();
    let dir = Path::new(family.code());
    staged.json(
        dir.join("metrics.json"),
        &prov.tag(&MetricsArtifact {
            family,
            model: family.display_name(),
            n_test: s.test.row_count(),
            test_fraction: args.test_fraction,
            accuracy: report.accuracy,
            per_class: &report.per_class,
            macro_avg: report.macro_avg,
            weighted_avg: report.weighted_avg,
            confusion: report.confusion,
            zero_division: &report.zero_division,
            auc: roc.as_ref().map(|r| r.1),
            roc_file: "roc.csv",
        })?,
    )?;
    let roc_rows: Vec<Vec<String>> = roc
        .iter()
        .flat_map(|(points, _)| points)
        .map(|p| {
            vec![
                p.fpr.to_string(),
                p.tpr.to_string(),
                p.threshold.map_or("inf".to_string(), |t| t.to_string()),
            ]
        })
        .collect();
    let header = ["fpr", "tpr", "threshold"].map(String::from);
    staged.text(dir.join("roc.csv"), csv_text(&prov, &header, &roc_rows)?);
    let c = report.confusion;
    let confusion_rows = vec![
        vec!["0".into(), c.tn.to_string(), c.fp.to_string()],
        vec!["1".into(), c.fn_.to_string(), c.tp.to_string()],
    ];
    let header = ["actual", "predicted_0", "predicted_1"].map(String::from);
    staged.text(dir.join("confusion.csv"), csv_text(&prov, &header, &confusion_rows)?);
    staged.commit(out)
}

pub fn explain(args: &DataArgs, out: &Path, model: &Path, method: Method, instance: usize) -> CliResult<()> {
    let file = ModelFile::load(model)?;
    let Loaded { dataset: d, prov } = load(args)?;
    check_split(&file, args, &prov)?;
    let s = split(args, &d)?;
    let m = &file.model;
    m.check_schema(&s.test.schema)?;
    let needs_row = matches!(method, Method::Shap | Method::Lime);
    if needs_row && instance >= s.test.row_count() {
        return Err(usage(format!(
            "--instance {instance} is out of range; the test split has {} rows",
            s.test.row_count()
        )));
    }
    let family = file.family;
    let dir = Path::new(family.code());
    let names = d.schema.feature_names();
    let mut staged = Staged::default();
    match method {
        Method::Shap => {
            let summary = shap_summary(m, &s.test)?;
            let space = if family == ModelFamily::RandomForest {
                "probability"
            } else {
                "margin"
            };
            staged.json(
                dir.join("shap_summary.json"),
                &prov.tag(&json!({
                    "family": family,
                    "output_space": space,
                    "baseline": summary.baseline,
                    "ranking": summary.ranking,
                    "rows": summary.matrix.len(),
                    "split": "test",
                    "matrix_file": "shap_matrix.csv",
                }))?,
            )?;
            let mut header = vec!["source_row".to_string()];
            header.extend(names.iter().cloned());
            let rows: Vec<Vec<String>> = summary
                .matrix
                .iter()
                .zip(&s.test_indices)
                .map(|(r, &src)| {
                    std::iter::once(src.to_string())
                        .chain(r.iter().map(|v| v.to_string()))
                        .collect()
                })
                .collect();
            staged.text(dir.join("shap_matrix.csv"), csv_text(&prov, &header, &rows)?);

            let x = s.test.features.row(instance);
            let w = shap_waterfall(m, x, &names)?;
            staged.json(
                dir.join("waterfall.json"),
                &prov.tag(&json!({
                    "family": family,
                    "output_space": space,
                    "instance": instance,
                    "source_row": s.test_indices[instance],
                    "values": decoded_row(&d, x),
                    "baseline": w.baseline,
                    "output": w.output,
                    "rows": w.rows,
                }))?,
            )?;
        }
        Method::Lime => {
            let stats = FeatureStats::from_dataset(&s.train);
            let cfg = LimeConfig {
                seed: args.seed,
                ..LimeConfig::default()
            };
            let x = s.test.features.row(instance);
            let predict = |z: &[f64]| m.predict_proba(z).map_or(f64::NAN, |p| p[1]);
            let e = lime_explain(&predict, x, &stats, &cfg)?;
            let mut v = prov.tag(&e)?;
            let obj = v.as_object_mut().expect("object");
            obj.insert("family".into(), json!(family));
            obj.insert("instance_index".into(), json!(instance));
            obj.insert("source_row".into(), json!(s.test_indices[instance]));
            obj.insert("values".into(), json!(decoded_row(&d, x)));
            staged.json(dir.join("lime.json"), &v)?;
        }
        Method::Pfi => {
            let r = permutation_importance(m, &s.test, PFI_METRIC, PFI_REPEATS, args.seed)?;
            let mut v = prov.tag(&r)?;
            let obj = v.as_object_mut().expect("object");
            obj.insert("family".into(), json!(family));
            obj.insert("split".into(), json!("test"));
            staged.json(dir.join("pfi.json"), &v)?;
        }
    }
    staged.commit(out)
}

#[derive(Serialize)]
struct ComparisonRow {
    family: String,
    model: String,
    accuracy: f64,
    precision_macro: f64,
    recall_macro: f64,
    f1_macro: f64,
    precision_weighted: f64,
    recall_weighted: f64,
    f1_weighted: f64,
    auc: Option<f64>,
}

pub fn report(out: &Path) -> CliResult<()> {
    let mut rows = Vec::new();
    let mut seeds = BTreeSet::new();
    let mut checksums = BTreeSet::new();
    let mut families = BTreeMap::new();
    for family in ModelFamily::ALL {
        let path = out.join(family.code()).join("metrics.json");
        if !path.is_file() {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|e| osteo::Error::io(&path, e))?;
        let v: Value = serde_json::from_str(&text)?;
        let num = |p: &str| v.pointer(p).and_then(Value::as_f64).unwrap_or(f64::NAN);
        let seed = v["seed"].as_u64().unwrap_or_default();
        let checksum = v["dataset_sha256"].as_str().unwrap_or_default().to_string();
        seeds.insert(seed);
        checksums.insert(checksum.clone());
        families.insert(family.code(), json!({"seed": seed, "dataset_sha256": checksum}));
        rows.push(ComparisonRow {
            family: family.code().to_string(),
            model: family.display_name().to_string(),
            accuracy: num("/accuracy"),
            precision_macro: num("/macro_avg/precision"),
            recall_macro: num("/macro_avg/recall"),
            f1_macro: num("/macro_avg/f1"),
            precision_weighted: num("/weighted_avg/precision"),
            recall_weighted: num("/weighted_avg/recall"),
            f1_weighted: num("/weighted_avg/f1"),
            auc: v["auc"].as_f64(),
        });
    }
    if rows.is_empty() {
        return Err(CliError::Domain(osteo::Error::Input(format!(
            "no evaluated families under {}",
            out.display()
        ))));
    }
    if seeds.len() > 1 || checksums.len() > 1 {
        return Err(CliError::Domain(osteo::Error::Input(
            "bundle mixes runs with different seeds or datasets".into(),
        )));
    }
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then(a.family.cmp(&b.family)));
    let prov = Provenance {
        seed: *seeds.first().expect("nonempty"),
        dataset_sha256: checksums.first().expect("nonempty").clone(),
    };

    let mut staged = Staged::default();
    staged.json("comparison.json", &prov.tag(&json!({ "rows": rows }))?)?;
    let header: Vec<String> = [
        "family",
        "model",
        "accuracy",
        "precision_macro",
        "recall_macro",
        "f1_macro",
        "precision_weighted",
        "recall_weighted",
        "f1_weighted",
        "auc",
    ]
    .map(String::from)
    .to_vec();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.family.clone(),
                r.model.clone(),
                r.accuracy.to_string(),
                r.precision_macro.to_string(),
                r.recall_macro.to_string(),
                r.f1_macro.to_string(),
                r.precision_weighted.to_string(),
                r.recall_weighted.to_string(),
                r.f1_weighted.to_string(),
                r.auc.map_or(String::new(), |a| a.to_string()),
            ]
        })
        .collect();
    staged.text("comparison.csv", csv_text(&prov, &header, &table)?);

    let mut artifacts: BTreeMap<String, String> = hash_tree(out)?
        .into_iter()
        .filter(|(p, _)| p != "manifest.json" && !p.ends_with(".tmp"))
        .collect();
    for (p, bytes) in staged.entries() {
        artifacts.insert(p.to_string_lossy().into_owned(), osteo::data::sha256_hex(bytes));
    }
    staged.json(
        "manifest.json",
        &prov.tag(&json!({
            "tool_version": TOOL_VERSION,
            "generated_at_unix": generated_at(),
            "families": families,
            "artifacts": artifacts,
        }))?,
    )?;
    staged.commit(out)
}

/// `SOURCE_DATE_EPOCH` when set, so bundles can be rebuilt byte for byte.
fn generated_at() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        })
}
