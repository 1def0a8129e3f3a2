//! Hyperparameter handling, stratified k-fold assignment and exhaustive grid
//! search scored by mean fold accuracy.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::data::Dataset;
use crate::ensemble::{
    fit_adaboost, fit_boosted, fit_random_forest, AdaBoostParams, BoostParams, BoostVariant,
    ForestParams, Model, ModelFamily,
};
use crate::error::{Error, Result};
use crate::linear::{fit_logistic_l1, LogisticParams};
use crate::metrics::ScoreMetric;
use crate::rng;
use crate::tree::{Criterion, MaxFeatures, TreeParams};

const KFOLD_STREAM: u64 = 0xF01D;

/// Depth used when a configuration asks for unlimited depth.
pub const UNLIMITED_DEPTH: usize = 1 << 16;

pub type ParamMap = BTreeMap<String, Value>;

/// Fully resolved configuration of one model family.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum ModelConfig {
    RandomForest(ForestParams),
    GradientBoosting(BoostParams),
    Xgb(BoostParams),
    Lgbm(BoostParams),
    Adaboost(AdaBoostParams),
    Logistic(LogisticParams),
}

/// Parameter names accepted for each family.
pub fn param_names(family: ModelFamily) -> &'static [&'static str] {
    match family {
        ModelFamily::RandomForest => &[
            "n_estimators",
            "max_depth",
            "max_features",
            "criterion",
            "min_samples_leaf",
            "bootstrap",
        ],
        ModelFamily::Xgb => &[
            "n_estimators",
            "learning_rate",
            "max_depth",
            "reg_lambda",
            "reg_alpha",
            "min_child_weight",
            "subsample",
            "colsample_bytree",
        ],
        ModelFamily::Lgbm => &[
            "n_estimators",
            "learning_rate",
            "max_depth",
            "num_leaves",
            "reg_lambda",
            "reg_alpha",
            "min_child_weight",
            "min_child_samples",
            "subsample",
            "colsample_bytree",
        ],
        ModelFamily::GradientBoosting => &[
            "n_estimators",
            "learning_rate",
            "max_depth",
            "subsample",
            "min_samples_leaf",
            "reg_lambda",
        ],
        ModelFamily::Adaboost => &["n_estimators", "learning_rate", "algorithm"],
        ModelFamily::Logistic => &["C", "penalty", "solver", "tol", "max_iter"],
    }
}

fn bad(name: &str, v: &Value, want: &str) -> Error {
    Error::Config(format!("parameter '{name}' = {v} is not {want}"))
}

fn get_f64(name: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(name, v, "a finite number"))
}

fn get_usize(name: &str, v: &Value) -> Result<usize> {
    match v.as_u64() {
        Some(n) => Ok(n as usize),
        None => match v.as_f64() {
            Some(x) if x >= 0.0 && x.fract() == 0.0 => Ok(x as usize),
            _ => Err(bad(name, v, "a nonnegative integer")),
        },
    }
}

/// `null` and negative values mean unlimited depth.
fn get_depth(name: &str, v: &Value) -> Result<usize> {
    if v.is_null() || v.as_i64().is_some_and(|d| d < 0) {
        Ok(UNLIMITED_DEPTH)
    } else {
        get_usize(name, v)
    }
}

fn get_str<'a>(name: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(name, v, "a string"))
}

fn expect_str(name: &str, v: &Value, allowed: &[&str]) -> Result<()> {
    let s = get_str(name, v)?;
    if allowed.contains(&s) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "parameter '{name}' = '{s}' is unsupported (expected one of {allowed:?})"
        )))
    }
}

impl ModelConfig {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelConfig::RandomForest(_) => ModelFamily::RandomForest,
            ModelConfig::GradientBoosting(_) => ModelFamily::GradientBoosting,
            ModelConfig::Xgb(_) => ModelFamily::Xgb,
            ModelConfig::Lgbm(_) => ModelFamily::Lgbm,
            ModelConfig::Adaboost(_) => ModelFamily::Adaboost,
            ModelConfig::Logistic(_) => ModelFamily::Logistic,
        }
    }

    /// Library defaults of each family's reference implementation.
    pub fn defaults(family: ModelFamily, seed: u64) -> ModelConfig {
        let boost = |n_estimators, learning_rate, tree: TreeParams| BoostParams {
            n_estimators,
            learning_rate,
            subsample: 1.0,
            colsample_bytree: 1.0,
            tree: TreeParams {
                criterion: Criterion::SecondOrder,
                seed,
                ..tree
            },
            seed,
        };
        match family {
            ModelFamily::RandomForest => ModelConfig::RandomForest(ForestParams {
                n_estimators: 100,
                tree: TreeParams {
                    max_depth: UNLIMITED_DEPTH,
                    max_features: MaxFeatures::Sqrt,
                    seed,
                    ..TreeParams::default()
                },
                bootstrap: true,
                seed,
            }),
            ModelFamily::Xgb => ModelConfig::Xgb(boost(
                100,
                0.3,
                TreeParams {
                    max_depth: 6,
                    reg_lambda: 1.0,
                    min_child_weight: 1.0,
                    ..TreeParams::default()
                },
            )),
            ModelFamily::Lgbm => ModelConfig::Lgbm(boost(
                100,
                0.1,
                TreeParams {
                    max_depth: UNLIMITED_DEPTH,
                    max_leaves: 31,
                    min_child_weight: 1e-3,
                    min_samples_leaf: 20,
                    ..TreeParams::default()
                },
            )),
            ModelFamily::GradientBoosting => ModelConfig::GradientBoosting(boost(
                100,
                0.1,
                TreeParams {
                    max_depth: 3,
                    ..TreeParams::default()
                },
            )),
            ModelFamily::Adaboost => ModelConfig::Adaboost(AdaBoostParams {
                seed,
                ..AdaBoostParams::default()
            }),
            ModelFamily::Logistic => ModelConfig::Logistic(LogisticParams::default()),
        }
    }

    /// Family defaults overridden by `params`. Unknown names are errors.
    pub fn from_params(family: ModelFamily, params: &ParamMap, seed: u64) -> Result<ModelConfig> {
        let allowed = param_names(family);
        if let Some(name) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!(
                "unknown parameter '{name}' for family {family}"
            )));
        }
        let mut cfg = ModelConfig::defaults(family, seed);
        for (name, v) in params {
            let name = name.as_str();
            match &mut cfg {
                ModelConfig::RandomForest(p) => match name {
                    "n_estimators" => p.n_estimators = get_usize(name, v)?,
                    "max_depth" => p.tree.max_depth = get_depth(name, v)?,
                    "max_features" => {
                        p.tree.max_features = match v {
                            Value::Null => MaxFeatures::All,
                            _ => match get_str(name, v)? {
                                "sqrt" | "auto" => MaxFeatures::Sqrt,
                                "all" => MaxFeatures::All,
                                _ => return Err(bad(name, v, "'sqrt', 'all' or null")),
                            },
                        }
                    }
                    "criterion" => expect_str(name, v, &["gini"])?,
                    "min_samples_leaf" => p.tree.min_samples_leaf = get_usize(name, v)?.max(1),
                    "bootstrap" => p.bootstrap = v.as_bool().ok_or_else(|| bad(name, v, "a boolean"))?,
                    _ => unreachable!(),
                },
                ModelConfig::Xgb(p) | ModelConfig::Lgbm(p) | ModelConfig::GradientBoosting(p) => {
                    match name {
                        "n_estimators" => p.n_estimators = get_usize(name, v)?,
                        "learning_rate" => p.learning_rate = get_f64(name, v)?,
                        "max_depth" => p.tree.max_depth = get_depth(name, v)?,
                        "num_leaves" => p.tree.max_leaves = get_usize(name, v)?,
                        "reg_lambda" => p.tree.reg_lambda = get_f64(name, v)?,
                        "reg_alpha" => p.tree.reg_alpha = get_f64(name, v)?,
                        "min_child_weight" => p.tree.min_child_weight = get_f64(name, v)?,
                        "min_child_samples" | "min_samples_leaf" => {
                            p.tree.min_samples_leaf = get_usize(name, v)?.max(1)
                        }
                        "subsample" => p.subsample = get_f64(name, v)?,
                        "colsample_bytree" => p.colsample_bytree = get_f64(name, v)?,
                        _ => unreachable!(),
                    }
                }
                ModelConfig::Adaboost(p) => match name {
                    "n_estimators" => p.n_estimators = get_usize(name, v)?,
                    "learning_rate" => p.learning_rate = get_f64(name, v)?,
                    "algorithm" => expect_str(name, v, &["SAMME"])?,
                    _ => unreachable!(),
                },
                ModelConfig::Logistic(p) => match name {
                    "C" => p.c = get_f64(name, v)?,
                    "penalty" => expect_str(name, v, &["l1"])?,
                    // Always solved by proximal gradient; the name is accepted
                    // for compatibility with liblinear-style configurations.
                    "solver" => expect_str(name, v, &["liblinear", "proximal_gradient"])?,
                    "tol" => p.tol = get_f64(name, v)?,
                    "max_iter" => p.max_iter = get_usize(name, v)?,
                    _ => unreachable!(),
                },
            }
        }
        Ok(cfg)
    }

    pub fn fit(&self, d: &Dataset) -> Result<Model> {
        match self {
            ModelConfig::RandomForest(p) => fit_random_forest(d, p),
            ModelConfig::GradientBoosting(p) => fit_boosted(d, p, BoostVariant::GradientBoosting),
            ModelConfig::Xgb(p) => fit_boosted(d, p, BoostVariant::Xgb),
            ModelConfig::Lgbm(p) => fit_boosted(d, p, BoostVariant::Lgbm),
            ModelConfig::Adaboost(p) => fit_adaboost(d, p),
            ModelConfig::Logistic(p) => {
                let m = fit_logistic_l1(d, p)?;
                Ok(Model::from_logistic(m, &d.schema, serde_json::to_value(p)?))
            }
        }
    }
}

/// Candidate values per parameter, in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrid {
    pub family: ModelFamily,
    pub axes: Vec<(String, Vec<Value>)>,
}

struct OrderedAxes(Vec<(String, Vec<Value>)>);

impl<'de> Deserialize<'de> for OrderedAxes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = OrderedAxes;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an object mapping parameter names to value lists")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<OrderedAxes, A::Error> {
                let mut axes = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Vec<Value>>()? {
                    axes.push((k, v));
                }
                Ok(OrderedAxes(axes))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Deserialize)]
struct GridFile {
    family: String,
    axes: OrderedAxes,
}

impl Serialize for ParamGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out<'a> {
            family: &'a str,
            axes: BTreeMap<&'a str, &'a Vec<Value>>,
        }
        Out {
            family: self.family.code(),
            axes: self.axes.iter().map(|(k, v)| (k.as_str(), v)).collect(),
        }
        .serialize(s)
    }
}

impl ParamGrid {
    pub fn new(family: ModelFamily, axes: Vec<(String, Vec<Value>)>) -> Result<Self> {
        let grid = ParamGrid { family, axes };
        grid.validate()?;
        Ok(grid)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: GridFile = serde_json::from_str(text)?;
        let family = ModelFamily::from_code(&raw.family)
            .ok_or_else(|| Error::Config(format!("unknown family '{}'", raw.family)))?;
        ParamGrid::new(family, raw.axes.0)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ParamGrid::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let allowed = param_names(self.family);
        for (name, values) in &self.axes {
            if !allowed.contains(&name.as_str()) {
                return Err(Error::Config(format!(
                    "grid axis '{name}' is not a parameter of {}",
                    self.family
                )));
            }
            if values.is_empty() {
                return Err(Error::Config(format!("grid axis '{name}' has no values")));
            }
        }
        Ok(())
    }

    /// Cartesian product; the first axis varies slowest.
    pub fn assignments(&self) -> Vec<ParamMap> {
        let mut out = vec![ParamMap::new()];
        for (name, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|base| {
                    values.iter().map(move |v| {
                        let mut m = base.clone();
                        m.insert(name.clone(), v.clone());
                        m
                    })
                })
                .collect();
        }
        out
    }
}

/// Fold number for every row. Rows of each class are shuffled and dealt
/// round-robin; the dealing position carries over between classes so overall
/// fold sizes also differ by at most one.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let mut fold = vec![0usize; labels.len()];
    let mut next = 0usize;
    for class in 0..2u8 {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::Stratification(format!(
                "class {class} has {} row(s), fewer than {k} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng::stream(seed, &[KFOLD_STREAM, class as u64]));
        for i in members {
            fold[i] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

/// `(train rows, held-out rows)` per fold.
pub fn fold_indices(assignment: &[usize], k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0..k)
        .map(|f| {
            let (held, train): (Vec<usize>, Vec<usize>) =
                (0..assignment.len()).partition(|&i| assignment[i] == f);
            (train, held)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateResult {
    pub params: ParamMap,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Set when the candidate could not be fit; such candidates are excluded.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvResult {
    pub family: ModelFamily,
    pub scoring: ScoreMetric,
    pub candidates: Vec<CandidateResult>,
    pub best_index: usize,
    pub folds: usize,
    pub seed: u64,
}

impl CvResult {
    pub fn best(&self) -> &CandidateResult {
        &self.candidates[self.best_index]
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn evaluate_candidate(
    d: &Dataset,
    folds: &[(Dataset, Dataset)],
    grid: &ParamGrid,
    params: &ParamMap,
    seed: u64,
) -> Result<Vec<f64>> {
    let cfg = ModelConfig::from_params(grid.family, params, seed)?;
    folds
        .iter()
        .map(|(train, held)| {
            let model = cfg.fit(train)?;
            let proba = model.predict_dataset(held)?;
            ScoreMetric::Accuracy.score(&held.labels, &proba)
        })
        .collect::<Result<Vec<_>>>()
        .inspect(|_| debug_assert_eq!(d.schema, folds[0].0.schema))
}

/// Exhaustive search over `grid` with stratified `k`-fold accuracy. Ties go to
/// the earliest assignment. Returns the table and the winner refit on all of
/// `d`.
pub fn grid_search(d: &Dataset, grid: &ParamGrid, k: usize, seed: u64) -> Result<(CvResult, Model)> {
    grid.validate()?;
    let assignment = stratified_kfold(&d.labels, k, seed)?;
    let folds: Vec<(Dataset, Dataset)> = fold_indices(&assignment, k)
        .into_iter()
        .map(|(train, held)| (d.subset(&train), d.subset(&held)))
        .collect();

    let candidates: Vec<CandidateResult> = grid
        .assignments()
        .into_par_iter()
        .map(|params| match evaluate_candidate(d, &folds, grid, &params, seed) {
            Ok(scores) => {
                let (mean, std) = mean_std(&scores);
                CandidateResult {
                    params,
                    fold_scores: scores,
                    mean,
                    std,
                    error: None,
                }
            }
            Err(e) => CandidateResult {
                params,
                fold_scores: Vec::new(),
                mean: f64::NAN,
                std: f64::NAN,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.error.is_none() && best.is_none_or(|b| c.mean > candidates[b].mean) {
            best = Some(i);
        }
    }
    let best_index = best.ok_or_else(|| {
        Error::Search(format!(
            "all {} candidates failed; first error: {}",
            candidates.len(),
            candidates
                .first()
                .and_then(|c| c.error.clone())
                .unwrap_or_default()
        ))
    })?;
    let cfg = ModelConfig::from_params(grid.family, &candidates[best_index].params, seed)?;
    let model = cfg.fit(d)?;
    Ok((
        CvResult {
            family: grid.family,
            scoring: ScoreMetric::Accuracy,
            candidates,
            best_index,
            folds: k,
            seed,
        },
        model,
    ))
}
