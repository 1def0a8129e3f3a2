use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::ensemble::{Model, ModelFamily};
use crate::error::{Error, Result};
use crate::tree::{LeafValue, NodeKind, Tree};

/// Features shown individually in a waterfall; the rest share one row.
pub const WATERFALL_TOP: usize = 9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    /// Expected margin under the cover-weighted tree distribution.
    pub baseline: f64,
    pub contributions: Vec<f64>,
    /// Model margin at the explained row.
    pub output: f64,
}

#[derive(Clone, Copy, Debug)]
struct PathElement {
    feature: usize,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

fn extend_path(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: usize) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero_fraction: zero,
        one_fraction: one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d = depth as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i as f64 + 1.0) / (d + 1.0);
        path[i].weight = zero * path[i].weight * (d - i as f64) / (d + 1.0);
    }
}

fn unwind_path(path: &mut Vec<PathElement>, at: usize) {
    let depth = path.len() - 1;
    let d = depth as f64;
    let one = path[at].one_fraction;
    let zero = path[at].zero_fraction;
    let mut next = path[depth].weight;
    for j in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[j].weight;
            path[j].weight = next * (d + 1.0) / ((j as f64 + 1.0) * one);
            next = tmp - path[j].weight * zero * (d - j as f64) / (d + 1.0);
        } else {
            path[j].weight = path[j].weight * (d + 1.0) / (zero * (d - j as f64));
        }
    }
    for j in at..depth {
        path[j].feature = path[j + 1].feature;
        path[j].zero_fraction = path[j + 1].zero_fraction;
        path[j].one_fraction = path[j + 1].one_fraction;
    }
    path.pop();
}

/// Total permutation weight of the path with element `at` removed.
fn unwound_sum(path: &[PathElement], at: usize) -> f64 {
    let depth = path.len() - 1;
    let d = depth as f64;
    let one = path[at].one_fraction;
    let zero = path[at].zero_fraction;
    let mut total = 0.0;
    if one != 0.0 {
        let mut next = path[depth].weight;
        for j in (0..depth).rev() {
            let tmp = next * (d + 1.0) / ((j as f64 + 1.0) * one);
            total += tmp;
            next = path[j].weight - tmp * zero * (d - j as f64) / (d + 1.0);
        }
    } else {
        for j in (0..depth).rev() {
            total += path[j].weight * (d + 1.0) / (zero * (d - j as f64));
        }
    }
    total
}

struct Walk<'a, F> {
    tree: &'a Tree,
    x: &'a [f64],
    value: F,
    phi: &'a mut [f64],
}

impl<F: Fn(&LeafValue) -> f64> Walk<'_, F> {
    fn recurse(&mut self, node: usize, mut path: Vec<PathElement>, zero: f64, one: f64, feature: usize) {
        extend_path(&mut path, zero, one, feature);
        match &self.tree.nodes[node].kind {
            NodeKind::Leaf(v) => {
                let v = (self.value)(v);
                for i in 1..path.len() {
                    let w = unwound_sum(&path, i);
                    let e = path[i];
                    self.phi[e.feature] += w * (e.one_fraction - e.zero_fraction) * v;
                }
            }
            &NodeKind::Split {
                feature: split,
                threshold,
                left,
                right,
            } => {
                let (hot, cold) = if self.x[split] < threshold {
                    (left, right)
                } else {
                    (right, left)
                };
                let cover = self.tree.nodes[node].cover;
                let mut incoming_zero = 1.0;
                let mut incoming_one = 1.0;
                if let Some(k) = (1..path.len()).find(|&k| path[k].feature == split) {
                    incoming_zero = path[k].zero_fraction;
                    incoming_one = path[k].one_fraction;
                    unwind_path(&mut path, k);
                }
                let hot_share = self.tree.nodes[hot].cover / cover;
                let cold_share = self.tree.nodes[cold].cover / cover;
                self.recurse(hot, path.clone(), incoming_zero * hot_share, incoming_one, split);
                self.recurse(cold, path, incoming_zero * cold_share, 0.0, split);
            }
        }
    }
}

/// Shapley values of one tree at `x` with leaf outputs mapped by `value`.
/// `phi` must be at least as wide as the largest split feature.
pub fn tree_shap_single(tree: &Tree, x: &[f64], value: impl Fn(&LeafValue) -> f64, phi: &mut [f64]) {
    let mut walk = Walk {
        tree,
        x,
        value,
        phi,
    };
    walk.recurse(0, Vec::new(), 1.0, 1.0, usize::MAX);
}

/// Cover-weighted mean leaf output.
pub fn tree_expected_value(tree: &Tree, value: impl Fn(&LeafValue) -> f64 + Copy) -> f64 {
    fn go(t: &Tree, i: usize, value: impl Fn(&LeafValue) -> f64 + Copy) -> f64 {
        match &t.nodes[i].kind {
            NodeKind::Leaf(v) => value(v),
            &NodeKind::Split { left, right, .. } => {
                let c = t.nodes[i].cover;
                (t.nodes[left].cover * go(t, left, value) + t.nodes[right].cover * go(t, right, value)) / c
            }
        }
    }
    go(tree, 0, value)
}

fn require_trees(m: &Model) -> Result<()> {
    if m.family == ModelFamily::Logistic || !m.family.is_tree_based() {
        return Err(Error::UnsupportedFamily {
            method: "shap",
            family: m.family.to_string(),
        });
    }
    Ok(())
}

/// Ensemble attribution in margin units: per-tree values scaled exactly as
/// the margin scales tree outputs. Forest margins are averaged positive-class
/// probabilities, so forest attributions live in probability space.
pub fn tree_shap(m: &Model, x: &[f64]) -> Result<Attribution> {
    require_trees(m)?;
    let output = m.predict_margin(x)?;
    let mut contributions = vec![0.0; m.n_features];
    let mut baseline = m.base_margin;
    let mut phi = vec![0.0; m.n_features];
    for (t, tree) in m.trees.iter().enumerate() {
        let scale = m.tree_scale(t);
        let value = |v: &LeafValue| m.leaf_output(v);
        baseline += scale * tree_expected_value(tree, value);
        phi.iter_mut().for_each(|p| *p = 0.0);
        tree_shap_single(tree, x, value, &mut phi);
        for (c, p) in contributions.iter_mut().zip(&phi) {
            *c += scale * p;
        }
    }
    Ok(Attribution {
        baseline,
        contributions,
        output,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub index: usize,
    pub mean_abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub feature_names: Vec<String>,
    /// Mean |contribution| per feature in column order.
    pub mean_abs: Vec<f64>,
    /// Features by decreasing mean |contribution|, ties by column order.
    pub ranking: Vec<RankedFeature>,
    pub baseline: f64,
    /// One attribution row per dataset row.
    pub matrix: Vec<Vec<f64>>,
}

pub fn shap_summary(m: &Model, d: &Dataset) -> Result<ShapSummary> {
    require_trees(m)?;
    m.check_schema(&d.schema)?;
    let rows: Vec<&[f64]> = d.features.iter_rows().collect();
    let attributions = rows
        .par_iter()
        .map(|r| tree_shap(m, r))
        .collect::<Result<Vec<_>>>()?;
    let n = attributions.len() as f64;
    let width = m.n_features;
    let mut mean_abs = vec![0.0; width];
    for a in &attributions {
        for (s, c) in mean_abs.iter_mut().zip(&a.contributions) {
            *s += c.abs();
        }
    }
    mean_abs.iter_mut().for_each(|s| *s /= n);
    let names = d.schema.feature_names();
    let mut order: Vec<usize> = (0..width).collect();
    order.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]).then(a.cmp(&b)));
    Ok(ShapSummary {
        ranking: order
            .into_iter()
            .map(|j| RankedFeature {
                feature: names[j].clone(),
                index: j,
                mean_abs: mean_abs[j],
            })
            .collect(),
        feature_names: names,
        mean_abs,
        baseline: attributions[0].baseline,
        matrix: attributions.into_iter().map(|a| a.contributions).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaterfallRow {
    pub label: String,
    /// Features aggregated in this row (one unless it is the remainder row).
    pub features: Vec<String>,
    pub value: f64,
    /// Margin after adding this row to everything above it.
    pub cumulative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waterfall {
    pub baseline: f64,
    pub output: f64,
    pub rows: Vec<WaterfallRow>,
}

impl Waterfall {
    /// Rows ordered by |contribution| with running totals. Zero contributions
    /// are omitted; when nothing is nonzero a single empty remainder row is
    /// emitted so the chart still ends at the baseline.
    pub fn from_attribution(a: &Attribution, names: &[String]) -> Waterfall {
        let mut order: Vec<usize> = (0..a.contributions.len())
            .filter(|&j| a.contributions[j] != 0.0)
            .collect();
        order.sort_by(|&i, &j| {
            a.contributions[j]
                .abs()
                .total_cmp(&a.contributions[i].abs())
                .then(i.cmp(&j))
        });
        let mut rows = Vec::new();
        let mut running = a.baseline;
        for &j in order.iter().take(WATERFALL_TOP) {
            running += a.contributions[j];
            rows.push(WaterfallRow {
                label: names[j].clone(),
                features: vec![names[j].clone()],
                value: a.contributions[j],
                cumulative: running,
            });
        }
        let rest = order.get(WATERFALL_TOP..).unwrap_or(&[]);
        if !rest.is_empty() || rows.is_empty() {
            let value: f64 = rest.iter().map(|&j| a.contributions[j]).sum();
            running += value;
            rows.push(WaterfallRow {
                label: format!("{} other features", rest.len()),
                features: rest.iter().map(|&j| names[j].clone()).collect(),
                value,
                cumulative: running,
            });
        }
        Waterfall {
            baseline: a.baseline,
            output: a.output,
            rows,
        }
    }
}

pub fn shap_waterfall(m: &Model, x: &[f64], names: &[String]) -> Result<Waterfall> {
    Ok(Waterfall::from_attribution(&tree_shap(m, x)?, names))
}
