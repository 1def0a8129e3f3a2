//! Tree ensembles and the common fitted-model type.
//!
//! Every family reduces to `margin(x) = base_margin + sum_t scale_t * out_t(x)`
//! where `out_t` is the per-tree leaf output:
//!
//! | family              | leaf output              | scale                     | probability                 |
//! |---------------------|--------------------------|---------------------------|-----------------------------|
//! | random forest       | positive-class share     | `1 / n_trees`             | mean of leaf distributions  |
//! | boosted (gb/xgb/lgbm)| raw leaf weight         | `tree_weight * learning_rate` | `sigmoid(margin)`       |
//! | AdaBoost (SAMME)    | vote `+1` / `-1`         | stage weight `alpha_t`    | `sigmoid(margin / sum alpha)` |
//!
//! Boosted leaves are stored unshrunk; the learning rate is applied when
//! accumulating. The forest "margin" is therefore a probability.

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSchema};
use crate::error::{Error, Result};
use crate::linear::{sigmoid, LogisticModel};
use crate::rng;
use crate::tree::{
    fit_classification_tree, fit_regression_tree_on, Criterion, Growth, LeafValue, MaxFeatures,
    Tree, TreeParams,
};

const BOOTSTRAP_STREAM: u64 = 0xB007;
const FOREST_TREE_STREAM: u64 = 0xF0E5;
const ROW_SAMPLE_STREAM: u64 = 0x5A3E;
const COL_SAMPLE_STREAM: u64 = 0xC015;
const BOOST_TREE_STREAM: u64 = 0xB005;
const STUMP_STREAM: u64 = 0x57A3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    RandomForest,
    GradientBoosting,
    Xgb,
    Lgbm,
    Adaboost,
    Logistic,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 6] = [
        ModelFamily::RandomForest,
        ModelFamily::Logistic,
        ModelFamily::Xgb,
        ModelFamily::Adaboost,
        ModelFamily::Lgbm,
        ModelFamily::GradientBoosting,
    ];

    /// Command-line code: rf, lr, xgb, ab, lgbm, gb.
    pub fn code(self) -> &'static str {
        match self {
            ModelFamily::RandomForest => "rf",
            ModelFamily::GradientBoosting => "gb",
            ModelFamily::Xgb => "xgb",
            ModelFamily::Lgbm => "lgbm",
            ModelFamily::Adaboost => "ab",
            ModelFamily::Logistic => "lr",
        }
    }

    pub fn from_code(code: &str) -> Option<ModelFamily> {
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.code() == code || f.serde_name() == code)
    }

    pub fn serde_name(self) -> &'static str {
        match self {
            ModelFamily::RandomForest => "random_forest",
            ModelFamily::GradientBoosting => "gradient_boosting",
            ModelFamily::Xgb => "xgb",
            ModelFamily::Lgbm => "lgbm",
            ModelFamily::Adaboost => "adaboost",
            ModelFamily::Logistic => "logistic",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelFamily::RandomForest => "Random Forest (RF)",
            ModelFamily::GradientBoosting => "Gradient Boosting (GB)",
            ModelFamily::Xgb => "XGBoost (XGB)",
            ModelFamily::Lgbm => "LightGBM (LGBM)",
            ModelFamily::Adaboost => "AdaBoost (AB)",
            ModelFamily::Logistic => "Logistic Regression (LR)",
        }
    }

    pub fn is_tree_based(self) -> bool {
        self != ModelFamily::Logistic
    }

    pub fn is_boosted(self) -> bool {
        matches!(
            self,
            ModelFamily::GradientBoosting | ModelFamily::Xgb | ModelFamily::Lgbm
        )
    }
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub family: ModelFamily,
    /// Echo of the hyperparameters the model was fit with.
    pub params: serde_json::Value,
    pub base_margin: f64,
    pub learning_rate: f64,
    pub tree_weights: Vec<f64>,
    pub trees: Vec<Tree>,
    pub schema_fingerprint: String,
    pub n_features: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logistic: Option<LogisticModel>,
}

impl Model {
    pub fn from_logistic(m: LogisticModel, schema: &FeatureSchema, params: serde_json::Value) -> Model {
        Model {
            family: ModelFamily::Logistic,
            params,
            base_margin: 0.0,
            learning_rate: 1.0,
            tree_weights: Vec::new(),
            n_features: m.weights.len(),
            trees: Vec::new(),
            schema_fingerprint: schema.fingerprint(),
            logistic: Some(m),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tree_weights.len() != self.trees.len() {
            return Err(Error::Schema(format!(
                "{} tree weights for {} trees",
                self.tree_weights.len(),
                self.trees.len()
            )));
        }
        match self.family {
            ModelFamily::Logistic if self.logistic.is_none() => {
                return Err(Error::Schema("logistic model without coefficients".into()))
            }
            ModelFamily::RandomForest | ModelFamily::Adaboost if self.trees.is_empty() => {
                return Err(Error::Schema(format!("{} model without trees", self.family)))
            }
            _ => {}
        }
        for t in &self.trees {
            t.validate()?;
            if t.max_feature().is_some_and(|f| f >= self.n_features) {
                return Err(Error::Schema("tree splits on a feature beyond n_features".into()));
            }
        }
        Ok(())
    }

    pub fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        let fp = schema.fingerprint();
        if fp != self.schema_fingerprint {
            return Err(Error::Schema(format!(
                "dataset schema {fp} does not match the model's {}",
                self.schema_fingerprint
            )));
        }
        Ok(())
    }

    /// Per-tree output of a leaf in margin units (before scaling).
    pub fn leaf_output(&self, v: &LeafValue) -> f64 {
        match self.family {
            ModelFamily::Adaboost => vote(v),
            _ => v.positive_output(),
        }
    }

    /// Multiplier applied to tree `t`'s output in the margin.
    pub fn tree_scale(&self, t: usize) -> f64 {
        match self.family {
            ModelFamily::RandomForest => self.tree_weights[t] / self.trees.len() as f64,
            ModelFamily::Adaboost => self.tree_weights[t],
            _ => self.tree_weights[t] * self.learning_rate,
        }
    }

    /// Additive score the explanations decompose. Unchecked: `x` must be
    /// finite and `n_features` wide.
    pub fn margin(&self, x: &[f64]) -> f64 {
        if let Some(lr) = &self.logistic {
            return lr.margin(x);
        }
        self.trees
            .iter()
            .enumerate()
            .map(|(t, tree)| self.tree_scale(t) * self.leaf_output(tree.leaf_value(x)))
            .fold(self.base_margin, |acc, v| acc + v)
    }

    fn proba_unchecked(&self, x: &[f64]) -> [f64; 2] {
        match self.family {
            ModelFamily::Logistic => {
                let p = sigmoid(self.margin(x));
                [1.0 - p, p]
            }
            ModelFamily::RandomForest => {
                let mut acc = [0.0; 2];
                for tree in &self.trees {
                    if let LeafValue::Distribution(d) = tree.leaf_value(x) {
                        acc[0] += d[0];
                        acc[1] += d[1];
                    }
                }
                let n = self.trees.len() as f64;
                [acc[0] / n, acc[1] / n]
            }
            ModelFamily::Adaboost => {
                let total: f64 = self.tree_weights.iter().sum();
                let p = sigmoid(self.margin(x) / total);
                [1.0 - p, p]
            }
            _ => {
                let p = sigmoid(self.margin(x));
                [1.0 - p, p]
            }
        }
    }

    fn check_row(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::Prediction(format!(
                "expected {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Prediction(format!("feature {j} is not finite")));
        }
        Ok(())
    }

    /// `[P(class 0), P(class 1)]` for one encoded row.
    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]> {
        self.check_row(x)?;
        Ok(self.proba_unchecked(x))
    }

    pub fn predict_margin(&self, x: &[f64]) -> Result<f64> {
        self.check_row(x)?;
        Ok(self.margin(x))
    }

    /// Positive-class probabilities for every row, after a schema check.
    pub fn predict_dataset(&self, d: &Dataset) -> Result<Vec<f64>> {
        self.check_schema(&d.schema)?;
        d.features
            .iter_rows()
            .map(|r| self.predict_proba(r).map(|p| p[1]))
            .collect()
    }

    /// Hard labels: class 1 when its probability is strictly larger.
    pub fn predict_labels(&self, d: &Dataset) -> Result<Vec<u8>> {
        Ok(self
            .predict_dataset(d)?
            .into_iter()
            .map(|p| (p > 0.5) as u8)
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_canonical_string(self)
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let m: Model = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }
}

fn vote(v: &LeafValue) -> f64 {
    match v {
        LeafValue::Distribution(p) if p[1] > p[0] => 1.0,
        LeafValue::Distribution(_) => -1.0,
        LeafValue::Scalar(s) => s.signum(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub tree: TreeParams,
    /// When false every tree sees each row once (identity sample).
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 100,
            tree: TreeParams {
                max_depth: 64,
                max_features: MaxFeatures::Sqrt,
                ..TreeParams::default()
            },
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Bagged Gini trees; tree `t` draws its bootstrap and its node-level feature
/// samples from streams keyed by `(seed, t)`.
pub fn fit_random_forest(d: &Dataset, p: &ForestParams) -> Result<Model> {
    if p.n_estimators == 0 {
        return Err(Error::Config("n_estimators must be at least 1".into()));
    }
    let n = d.row_count();
    let trees = (0..p.n_estimators)
        .into_par_iter()
        .map(|t| {
            let weights = if p.bootstrap {
                let mut rng = rng::stream(p.seed, &[BOOTSTRAP_STREAM, t as u64]);
                let mut w = vec![0.0; n];
                for _ in 0..n {
                    w[rng.random_range(0..n)] += 1.0;
                }
                w
            } else {
                vec![1.0; n]
            };
            let tp = TreeParams {
                criterion: Criterion::Gini,
                seed: rng::derive_seed(p.seed, &[FOREST_TREE_STREAM, t as u64]),
                ..p.tree.clone()
            };
            fit_classification_tree(&d.features, &d.labels, &weights, &tp)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Model {
        family: ModelFamily::RandomForest,
        params: serde_json::to_value(p)?,
        base_margin: 0.0,
        learning_rate: 1.0,
        tree_weights: vec![1.0; trees.len()],
        trees,
        schema_fingerprint: d.schema.fingerprint(),
        n_features: d.width(),
        logistic: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostVariant {
    /// First-order: Hessians fixed at 1.
    GradientBoosting,
    /// Second-order, level-wise growth.
    Xgb,
    /// Second-order, leaf-wise growth.
    Lgbm,
}

impl BoostVariant {
    pub fn family(self) -> ModelFamily {
        match self {
            BoostVariant::GradientBoosting => ModelFamily::GradientBoosting,
            BoostVariant::Xgb => ModelFamily::Xgb,
            BoostVariant::Lgbm => ModelFamily::Lgbm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub tree: TreeParams,
    pub seed: u64,
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        let frac = |v: f64| v > 0.0 && v <= 1.0;
        if self.n_estimators == 0 {
            return Err(Error::Config("n_estimators must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be finite and nonnegative".into()));
        }
        if !frac(self.subsample) || !frac(self.colsample_bytree) {
            return Err(Error::Config("subsample and colsample_bytree must lie in (0, 1]".into()));
        }
        self.tree.validate()
    }
}

fn sample_size(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 + 0.5).floor() as usize).clamp(1, n)
}

/// Logistic-loss boosting in margin space starting from margin 0.
pub fn fit_boosted(d: &Dataset, p: &BoostParams, variant: BoostVariant) -> Result<Model> {
    p.validate()?;
    let n = d.row_count();
    let m = d.width();
    let tp = TreeParams {
        criterion: Criterion::SecondOrder,
        growth: match variant {
            BoostVariant::Lgbm => Growth::LeafWise,
            _ => Growth::LevelWise,
        },
        ..p.tree.clone()
    };
    let y: Vec<f64> = d.labels.iter().map(|&l| l as f64).collect();
    let base_margin = 0.0;
    let mut margins = vec![base_margin; n];
    let mut trees = Vec::with_capacity(p.n_estimators);
    let mut g = vec![0.0; n];
    let mut h = vec![1.0; n];

    for round in 0..p.n_estimators {
        for i in 0..n {
            let prob = sigmoid(margins[i]);
            g[i] = prob - y[i];
            if variant != BoostVariant::GradientBoosting {
                h[i] = prob * (1.0 - prob);
            }
        }
        let rows: Vec<usize> = if p.subsample < 1.0 {
            let mut rng = rng::stream(p.seed, &[ROW_SAMPLE_STREAM, round as u64]);
            let mut r = index::sample(&mut rng, n, sample_size(p.subsample, n)).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let cols: Vec<usize> = if p.colsample_bytree < 1.0 {
            let mut rng = rng::stream(p.seed, &[COL_SAMPLE_STREAM, round as u64]);
            let mut c = index::sample(&mut rng, m, sample_size(p.colsample_bytree, m)).into_vec();
            c.sort_unstable();
            c
        } else {
            (0..m).collect()
        };
        let round_params = TreeParams {
            seed: rng::derive_seed(p.seed, &[BOOST_TREE_STREAM, round as u64]),
            ..tp.clone()
        };
        let tree = fit_regression_tree_on(&d.features, &g, &h, &rows, &cols, &round_params)?;
        for (i, row) in d.features.iter_rows().enumerate() {
            margins[i] += p.learning_rate * tree.leaf_value(row).positive_output();
        }
        trees.push(tree);
    }

    Ok(Model {
        family: variant.family(),
        params: serde_json::to_value(p)?,
        base_margin,
        learning_rate: p.learning_rate,
        tree_weights: vec![1.0; trees.len()],
        trees,
        schema_fingerprint: d.schema.fingerprint(),
        n_features: m,
        logistic: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        AdaBoostParams {
            n_estimators: 50,
            learning_rate: 1.0,
            seed: 0,
        }
    }
}

/// SAMME stage weight for two classes (the `ln(K - 1)` term vanishes).
pub fn samme_stage_weight(error: f64, learning_rate: f64) -> f64 {
    learning_rate * ((1.0 - error) / error).ln()
}

pub fn fit_adaboost(d: &Dataset, p: &AdaBoostParams) -> Result<Model> {
    fit_adaboost_traced(d, p).map(|(m, _)| m)
}

/// Also returns the instance-weight distribution after every accepted round.
pub fn fit_adaboost_traced(d: &Dataset, p: &AdaBoostParams) -> Result<(Model, Vec<Vec<f64>>)> {
    if p.n_estimators == 0 {
        return Err(Error::Config("n_estimators must be at least 1".into()));
    }
    if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
        return Err(Error::Config("learning_rate must be positive".into()));
    }
    let n = d.row_count();
    let mut w = vec![1.0 / n as f64; n];
    let mut trees = Vec::new();
    let mut alphas = Vec::new();
    let mut history = Vec::new();

    for round in 0..p.n_estimators {
        let tp = TreeParams {
            max_depth: 1,
            criterion: Criterion::Gini,
            max_features: MaxFeatures::All,
            seed: rng::derive_seed(p.seed, &[STUMP_STREAM, round as u64]),
            ..TreeParams::default()
        };
        let stump = fit_classification_tree(&d.features, &d.labels, &w, &tp)?;
        let miss: Vec<bool> = d
            .features
            .iter_rows()
            .zip(&d.labels)
            .map(|(row, &y)| (vote(stump.leaf_value(row)) > 0.0) != (y == 1))
            .collect();
        let total: f64 = w.iter().sum();
        let error: f64 = w.iter().zip(&miss).filter(|(_, &m)| m).map(|(w, _)| w).sum::<f64>() / total;

        if error <= 0.0 {
            // A perfect stump ends boosting with unit weight.
            trees.push(stump);
            alphas.push(1.0);
            history.push(w.clone());
            break;
        }
        if error >= 0.5 {
            if trees.is_empty() {
                return Err(Error::DegenerateModel(format!(
                    "first stump has weighted error {error:.6} >= 0.5"
                )));
            }
            break;
        }
        let alpha = samme_stage_weight(error, p.learning_rate);
        trees.push(stump);
        alphas.push(alpha);
        let boost = alpha.exp();
        for (wi, &m) in w.iter_mut().zip(&miss) {
            if m {
                *wi *= boost;
            }
        }
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= sum);
        history.push(w.clone());
    }

    let model = Model {
        family: ModelFamily::Adaboost,
        params: serde_json::to_value(p)?,
        base_margin: 0.0,
        learning_rate: p.learning_rate,
        tree_weights: alphas,
        trees,
        schema_fingerprint: d.schema.fingerprint(),
        n_features: d.width(),
        logistic: None,
    };
    Ok((model, history))
}
