use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::ensemble::Model;
use crate::error::{Error, Result};
use crate::metrics::ScoreMetric;
use crate::rng;

const PFI_STREAM: u64 = 0xBF1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PfiFeature {
    pub feature: String,
    pub index: usize,
    pub mean: f64,
    /// Population standard deviation over repeats.
    pub std: f64,
    pub importances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PfiReport {
    pub metric: ScoreMetric,
    pub n_repeats: usize,
    pub seed: u64,
    pub baseline_score: f64,
    /// Ranked by decreasing mean importance, ties by column order.
    pub features: Vec<PfiFeature>,
}

/// Score drop after shuffling each column, `n_repeats` times per column.
pub fn permutation_importance(
    m: &Model,
    d: &Dataset,
    metric: &str,
    n_repeats: usize,
    seed: u64,
) -> Result<PfiReport> {
    let metric: ScoreMetric = metric.parse()?;
    if n_repeats == 0 {
        return Err(Error::Config("n_repeats must be positive".into()));
    }
    let baseline_score = metric.score(&d.labels, &m.predict_dataset(d)?)?;
    let width = d.width();
    let tasks: Vec<(usize, usize)> = (0..width)
        .flat_map(|j| (0..n_repeats).map(move |r| (j, r)))
        .collect();
    let scores = tasks
        .par_iter()
        .map(|&(j, r)| {
            let mut column = d.features.column(j);
            column.shuffle(&mut rng::stream(seed, &[PFI_STREAM, j as u64, r as u64]));
            let mut shuffled = d.clone();
            for (i, v) in column.into_iter().enumerate() {
                shuffled.features.set(i, j, v);
            }
            metric.score(&d.labels, &m.predict_dataset(&shuffled)?)
        })
        .collect::<Result<Vec<f64>>>()?;

    let names = d.schema.feature_names();
    let mut features: Vec<PfiFeature> = (0..width)
        .map(|j| {
            let importances: Vec<f64> = scores[j * n_repeats..(j + 1) * n_repeats]
                .iter()
                .map(|s| baseline_score - s)
                .collect();
            let n = n_repeats as f64;
            let mean = importances.iter().sum::<f64>() / n;
            let var = importances.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            PfiFeature {
                feature: names[j].clone(),
                index: j,
                mean,
                std: var.sqrt(),
                importances,
            }
        })
        .collect();
    features.sort_by(|a, b| b.mean.total_cmp(&a.mean).then(a.index.cmp(&b.index)));
    Ok(PfiReport {
        metric,
        n_repeats,
        seed,
        baseline_score,
        features,
    })
}
