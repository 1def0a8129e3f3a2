//! End-to-end library run on a small in-memory CSV with the osteoporosis
//! column layout.

use osteo::data::{crosstab, eda, read_csv, stratified_split, SchemaConfig, MISSING_CATEGORY};
use osteo::explain::{lime_explain, permutation_importance, shap_summary, FeatureStats, LimeConfig};
use osteo::tuning::{grid_search, ParamGrid};
use osteo::{Model, ModelFamily};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn schema() -> SchemaConfig {
    serde_json::from_value(json!({
        "label": "Osteoporosis",
        "ignore": ["Id"],
        "columns": [
            {"name": "Age", "kind": "continuous"},
            {"name": "Hormonal Changes", "kind": "binary"},
            {"name": "Family History", "kind": "binary"},
            {"name": "Medications", "kind": "categorical"},
            {"name": "Smoking", "kind": "binary"}
        ]
    }))
    .unwrap()
}

fn csv_text(rows: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("Id,Age,Hormonal Changes,Family History,Medications,Smoking,Osteoporosis\n");
    for i in 0..rows {
        let age: u32 = rng.random_range(18..=90);
        let hc = ["Normal", "Postmenopausal"][rng.random_range(0..2)];
        let fh = ["No", "Yes"][rng.random_range(0..2)];
        let med = ["Corticosteroids", ""][rng.random_range(0..2)];
        let smoke = ["No", "Yes"][rng.random_range(0..2)];
        let logit = (age as f64 - 50.0) / 5.0 + if hc == "Postmenopausal" { 1.0 } else { 0.0 };
        let y = rng.random_bool(1.0 / (1.0 + (-logit).exp())) as u8;
        out.push_str(&format!("{i},{age},{hc},{fh},{med},{smoke},{y}\n"));
    }
    out
}

#[test]
fn pipeline_runs_and_ranks_the_driving_feature_first() {
    let d = read_csv(csv_text(500, 1).as_bytes(), &schema()).unwrap();
    assert_eq!(d.width(), 5);
    let meds = &d.schema.features[3];
    assert_eq!(meds.categories, vec!["Corticosteroids", MISSING_CATEGORY]);
    let hc = crosstab(&d, "Hormonal Changes").unwrap();
    assert_eq!(hc.total(), 500);
    let report = eda(&d);
    assert_eq!(report.crosstabs.len(), 4);
    assert_eq!(report.correlation.columns.len(), 6);

    let split = stratified_split(&d, 0.2, 42).unwrap();
    assert_eq!(split.test.row_count(), 100);
    let grid = ParamGrid::from_json(r#"{"family": "xgb", "axes": {"max_depth": [1, 3], "n_estimators": [30]}}"#).unwrap();
    let (cv, model) = grid_search(&split.train, &grid, 5, 42).unwrap();
    assert_eq!(cv.candidates.len(), 2);
    assert_eq!(model.family, ModelFamily::Xgb);

    let summary = shap_summary(&model, &split.test).unwrap();
    assert_eq!(summary.ranking[0].feature, "Age");
    let pfi = permutation_importance(&model, &split.test, "accuracy", 5, 42).unwrap();
    assert_eq!(pfi.features[0].feature, "Age");

    let stats = FeatureStats::from_dataset(&split.train);
    let x = split.test.features.row(0);
    let predict = |z: &[f64]| model.predict_proba(z).map_or(f64::NAN, |p| p[1]);
    let cfg = LimeConfig {
        n_samples: 2000,
        ..LimeConfig::default()
    };
    let e = lime_explain(&predict, x, &stats, &cfg).unwrap();
    assert_eq!(e.feature_weights[0].feature, "Age");
    assert!(e.feature_weights.len() <= 5);

    let text = model.to_json().unwrap();
    let back = Model::from_json(&text).unwrap();
    for row in split.test.features.iter_rows() {
        assert_eq!(model.predict_proba(row).unwrap(), back.predict_proba(row).unwrap());
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let d = read_csv(csv_text(300, 2).as_bytes(), &schema()).unwrap();
    let grid = ParamGrid::from_json(r#"{"family": "rf", "axes": {"max_depth": [2, 4], "n_estimators": [15]}}"#).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let (cv, model) = grid_search(&d, &grid, 3, 7).unwrap();
            let pfi = permutation_importance(&model, &d, "accuracy", 3, 7).unwrap();
            (serde_json::to_string(&cv).unwrap(), model.to_json().unwrap(), pfi)
        })
    };
    assert_eq!(run(1), run(4));
}
