use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

const LIME_STREAM: u64 = 0x11AE;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// `None` means `0.75 * sqrt(feature count)`.
    pub kernel_width: Option<f64>,
    pub ridge_penalty: f64,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            n_samples: 5000,
            kernel_width: None,
            ridge_penalty: 1.0,
            top_k: 10,
            seed: 42,
        }
    }
}

impl LimeConfig {
    pub fn width_for(&self, features: usize) -> f64 {
        self.kernel_width
            .unwrap_or_else(|| 0.75 * (features as f64).sqrt())
    }

    fn validate(&self, features: usize) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::Config("LIME needs at least 2 samples".into()));
        }
        let w = self.width_for(features);
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::KernelWidth(format!("kernel width {w} must be positive")));
        }
        if !(self.ridge_penalty > 0.0 && self.ridge_penalty.is_finite()) {
            return Err(Error::Config("ridge penalty must be positive".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be positive".into()));
        }
        Ok(())
    }
}

/// Training-set statistics driving perturbation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub names: Vec<String>,
    pub categorical: Vec<bool>,
    pub means: Vec<f64>,
    /// Population standard deviations.
    pub stds: Vec<f64>,
    /// Observed `(value, frequency)` pairs of categorical features.
    pub frequencies: Vec<Vec<(f64, f64)>>,
}

impl FeatureStats {
    pub fn from_dataset(d: &Dataset) -> FeatureStats {
        let n = d.row_count() as f64;
        let width = d.width();
        let mut means = vec![0.0; width];
        let mut stds = vec![0.0; width];
        let mut frequencies = vec![Vec::new(); width];
        let categorical: Vec<bool> = d.schema.features.iter().map(|c| c.is_categorical()).collect();
        for j in 0..width {
            let col = d.features.column(j);
            let mean = col.iter().sum::<f64>() / n;
            means[j] = mean;
            stds[j] = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            if categorical[j] {
                let mut values = col.clone();
                values.sort_by(f64::total_cmp);
                values.dedup();
                frequencies[j] = values
                    .into_iter()
                    .map(|v| (v, col.iter().filter(|&&c| c == v).count() as f64 / n))
                    .collect();
            }
        }
        FeatureStats {
            names: d.schema.feature_names(),
            categorical,
            means,
            stds,
            frequencies,
        }
    }

    fn scale(&self, j: usize) -> f64 {
        if self.stds[j] > 0.0 {
            self.stds[j]
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeight {
    pub feature: String,
    pub index: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimeExplanation {
    pub instance: Vec<f64>,
    pub predicted_class: u8,
    pub predicted_probability: f64,
    /// Top-k surrogate coefficients by magnitude.
    pub feature_weights: Vec<FeatureWeight>,
    pub intercept: f64,
    /// Kernel-weighted coefficient of determination of the surrogate.
    pub surrogate_r2: f64,
    /// Surrogate prediction at the instance.
    pub local_prediction: f64,
    pub config: LimeConfig,
    pub kernel_width: f64,
}

fn perturb(x: &[f64], stats: &FeatureStats, cfg: &LimeConfig) -> Result<Vec<Vec<f64>>> {
    let mut rng = rng::stream(cfg.seed, &[LIME_STREAM]);
    let pickers = stats
        .frequencies
        .iter()
        .map(|f| {
            if f.is_empty() {
                Ok(None)
            } else {
                WeightedIndex::new(f.iter().map(|p| p.1))
                    .map(Some)
                    .map_err(|e| Error::Input(format!("category frequencies: {e}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut samples = Vec::with_capacity(cfg.n_samples);
    samples.push(x.to_vec());
    for _ in 1..cfg.n_samples {
        let z = (0..x.len())
            .map(|j| match &pickers[j] {
                Some(p) if stats.categorical[j] => stats.frequencies[j][p.sample(&mut rng)].0,
                _ => {
                    let e: f64 = rng.sample(StandardNormal);
                    x[j] + stats.stds[j] * e
                }
            })
            .collect();
        samples.push(z);
    }
    Ok(samples)
}

/// Local linear surrogate of `predict` (positive-class probability) around
/// `x`. Continuous features are perturbed with Gaussian noise of training
/// scale, categorical ones resampled from training frequencies. Samples are
/// weighted by `sqrt(exp(-d^2 / width^2))` on the standardized distance and a
/// ridge model with unpenalized intercept is fit to the probability of the
/// class predicted at `x`.
pub fn lime_explain(
    predict: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    stats: &FeatureStats,
    cfg: &LimeConfig,
) -> Result<LimeExplanation> {
    let m = x.len();
    if m != stats.means.len() {
        return Err(Error::Input(format!(
            "instance has {m} features, statistics describe {}",
            stats.means.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("instance has non-finite values".into()));
    }
    cfg.validate(m)?;
    let width = cfg.width_for(m);
    let samples = perturb(x, stats, cfg)?;

    let p1 = predict(x);
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::Prediction(format!("probability {p1} outside [0, 1]")));
    }
    // An exact tie explains the positive class.
    let predicted_class = (p1 >= 0.5) as u8;
    let target = |p: f64| if predicted_class == 1 { p } else { 1.0 - p };
    let y: Vec<f64> = samples.par_iter().map(|z| target(predict(z))).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Prediction("callback returned a non-finite value".into()));
    }

    let n = samples.len();
    let mut design = DMatrix::<f64>::zeros(n, m);
    let mut weights = vec![0.0; n];
    for (i, z) in samples.iter().enumerate() {
        let mut dist2 = 0.0;
        for j in 0..m {
            if stats.categorical[j] {
                let same = z[j] == x[j];
                design[(i, j)] = same as u8 as f64;
                dist2 += (!same) as u8 as f64;
            } else {
                let s = stats.scale(j);
                design[(i, j)] = (z[j] - stats.means[j]) / s;
                dist2 += ((z[j] - x[j]) / s).powi(2);
            }
        }
        weights[i] = (-dist2 / (width * width)).exp().sqrt();
    }
    let others: f64 = weights[1..].iter().sum();
    if others.is_nan() || others <= 1e-8 {
        return Err(Error::KernelWidth(format!(
            "kernel width {width} gives perturbed samples negligible weight; use a larger width"
        )));
    }

    let total: f64 = weights.iter().sum();
    let y_mean = weights.iter().zip(&y).map(|(w, v)| w * v).sum::<f64>() / total;
    let col_means: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| weights[i] * design[(i, j)]).sum::<f64>() / total)
        .collect();
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    let mut centered = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            centered[j] = design[(i, j)] - col_means[j];
        }
        let yc = y[i] - y_mean;
        for a in 0..m {
            rhs[a] += weights[i] * centered[a] * yc;
            for b in a..m {
                gram[(a, b)] += weights[i] * centered[a] * centered[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
        gram[(a, a)] += cfg.ridge_penalty;
    }
    let coef = gram
        .cholesky()
        .ok_or_else(|| Error::Fit("surrogate system is not positive definite".into()))?
        .solve(&rhs);
    let intercept = y_mean - (0..m).map(|j| coef[j] * col_means[j]).sum::<f64>();

    let fitted = |i: usize| intercept + (0..m).map(|j| coef[j] * design[(i, j)]).sum::<f64>();
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..n {
        ss_res += weights[i] * (y[i] - fitted(i)).powi(2);
        ss_tot += weights[i] * (y[i] - y_mean).powi(2);
    }
    let surrogate_r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| coef[b].abs().total_cmp(&coef[a].abs()).then(a.cmp(&b)));
    let feature_weights = order
        .into_iter()
        .take(cfg.top_k.min(m))
        .map(|j| FeatureWeight {
            feature: stats.names[j].clone(),
            index: j,
            weight: coef[j],
        })
        .collect();

    Ok(LimeExplanation {
        instance: x.to_vec(),
        predicted_class,
        predicted_probability: target(p1),
        feature_weights,
        intercept,
        surrogate_r2,
        local_prediction: fitted(0),
        config: cfg.clone(),
        kernel_width: width,
    })
}
