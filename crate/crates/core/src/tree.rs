//! Binary decision trees with exact greedy split search.
//!
//! Two objectives share one builder: weighted Gini impurity for classification
//! trees (leaves hold class-probability vectors) and the second-order
//! regularized objective for boosting (leaves hold a scalar margin increment).
//! Rows route left when `value < threshold`.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::rng;

const NODE_STREAM: u64 = 0x7EE;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LeafValue {
    Scalar(f64),
    Distribution(Vec<f64>),
}

impl LeafValue {
    /// Scalar leaves as-is; distributions give the positive-class share.
    pub fn positive_output(&self) -> f64 {
        match self {
            LeafValue::Scalar(v) => *v,
            LeafValue::Distribution(p) => p.get(1).copied().unwrap_or(0.0),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            LeafValue::Scalar(v) => v.is_finite(),
            LeafValue::Distribution(p) => p.iter().all(|v| v.is_finite()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(LeafValue),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNode", into = "RawNode")]
pub struct TreeNode {
    pub kind: NodeKind,
    /// Training weight (or Hessian) sum reaching this node.
    pub cover: f64,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf(_))
    }
}

#[derive(Serialize, Deserialize)]
struct RawNode {
    feature: Option<usize>,
    threshold: Option<f64>,
    left: Option<usize>,
    right: Option<usize>,
    leaf_value: Option<LeafValue>,
    cover: f64,
}

impl From<TreeNode> for RawNode {
    fn from(n: TreeNode) -> Self {
        match n.kind {
            NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            } => RawNode {
                feature: Some(feature),
                threshold: Some(threshold),
                left: Some(left),
                right: Some(right),
                leaf_value: None,
                cover: n.cover,
            },
            NodeKind::Leaf(v) => RawNode {
                feature: None,
                threshold: None,
                left: None,
                right: None,
                leaf_value: Some(v),
                cover: n.cover,
            },
        }
    }
}

impl TryFrom<RawNode> for TreeNode {
    type Error = String;

    fn try_from(r: RawNode) -> std::result::Result<Self, String> {
        let kind = match (r.feature, r.threshold, r.left, r.right, r.leaf_value) {
            (Some(feature), Some(threshold), Some(left), Some(right), None) => NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            },
            (None, None, None, None, Some(v)) => NodeKind::Leaf(v),
            _ => return Err("node must be either a full split or a leaf".into()),
        };
        Ok(TreeNode {
            kind,
            cover: r.cover,
        })
    }
}

/// Nodes in creation order; the root is node 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(value: LeafValue, cover: f64) -> Tree {
        Tree {
            nodes: vec![TreeNode {
                kind: NodeKind::Leaf(value),
                cover,
            }],
        }
    }

    /// Checks structure: every node reachable exactly once from the root,
    /// children in range, finite payloads, positive covers and additive
    /// covers (relative tolerance 1e-9).
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Fit("tree has no nodes".into()));
        }
        let mut visited = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if visited[i] {
                return Err(Error::Fit(format!("node {i} reached twice")));
            }
            visited[i] = true;
            let node = &self.nodes[i];
            if !(node.cover > 0.0 && node.cover.is_finite()) {
                return Err(Error::Fit(format!("node {i} has cover {}", node.cover)));
            }
            match &node.kind {
                NodeKind::Split {
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if !threshold.is_finite() {
                        return Err(Error::Fit(format!("node {i} threshold not finite")));
                    }
                    for &c in [left, right] {
                        if c >= self.nodes.len() || c == i {
                            return Err(Error::Fit(format!("node {i} has bad child {c}")));
                        }
                        stack.push(c);
                    }
                    let sum = self.nodes[*left].cover + self.nodes[*right].cover;
                    if (sum - node.cover).abs() > 1e-9 * node.cover.max(1.0) {
                        return Err(Error::Fit(format!("node {i} cover not additive")));
                    }
                }
                NodeKind::Leaf(v) => {
                    if !v.is_finite() {
                        return Err(Error::Fit(format!("leaf {i} value not finite")));
                    }
                }
            }
        }
        if let Some(i) = visited.iter().position(|v| !v) {
            return Err(Error::Fit(format!("node {i} unreachable")));
        }
        Ok(())
    }

    /// Index of the leaf `x` lands in. Assumes finite input of sufficient width.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i].kind {
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] < *threshold { *left } else { *right },
                NodeKind::Leaf(_) => return i,
            }
        }
    }

    pub fn leaf_value(&self, x: &[f64]) -> &LeafValue {
        match &self.nodes[self.leaf_index(x)].kind {
            NodeKind::Leaf(v) => v,
            NodeKind::Split { .. } => unreachable!(),
        }
    }

    /// Checked prediction: rejects non-finite values and rows narrower than
    /// the features the tree splits on.
    pub fn predict(&self, x: &[f64]) -> Result<&LeafValue> {
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Prediction(format!("feature {j} is not finite")));
        }
        if let Some(f) = self.max_feature() {
            if f >= x.len() {
                return Err(Error::Prediction(format!(
                    "tree splits on feature {f} but the row has {} values",
                    x.len()
                )));
            }
        }
        Ok(self.leaf_value(x))
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Split { feature, .. } => Some(feature),
                NodeKind::Leaf(_) => None,
            })
            .max()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i].kind {
                NodeKind::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
                NodeKind::Leaf(_) => 0,
            }
        }
        go(self, 0)
    }

    pub fn uses_feature(&self, j: usize) -> bool {
        self.nodes
            .iter()
            .any(|n| matches!(n.kind, NodeKind::Split { feature, .. } if feature == j))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    LevelWise,
    LeafWise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    SecondOrder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Minimum weight (Gini) or Hessian (second-order) sum in each child.
    pub min_child_weight: f64,
    /// Minimum number of training rows in each child.
    pub min_samples_leaf: usize,
    pub reg_lambda: f64,
    pub reg_alpha: f64,
    pub growth: Growth,
    pub max_leaves: usize,
    pub criterion: Criterion,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 6,
            min_child_weight: 0.0,
            min_samples_leaf: 1,
            reg_lambda: 0.0,
            reg_alpha: 0.0,
            growth: Growth::LevelWise,
            max_leaves: usize::MAX,
            criterion: Criterion::Gini,
            max_features: MaxFeatures::All,
            seed: 0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_child_weight >= 0.0
            && self.min_child_weight.is_finite()
            && self.reg_lambda >= 0.0
            && self.reg_lambda.is_finite()
            && self.reg_alpha >= 0.0
            && self.reg_alpha.is_finite()
            && self.max_leaves >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid tree parameters: {self:?}")))
        }
    }
}

trait Objective {
    type Stat: Copy + Default + std::fmt::Debug;
    fn row_stat(&self, row: usize) -> Self::Stat;
    fn add(a: &mut Self::Stat, b: &Self::Stat);
    fn sub(a: &Self::Stat, b: &Self::Stat) -> Self::Stat;
    fn count(s: &Self::Stat) -> usize;
    /// Weight or Hessian sum, checked against `min_child_weight` and stored as cover.
    fn cover(s: &Self::Stat) -> f64;
    /// Node quality; split gain is `score(L) + score(R) - score(P)` up to a constant factor.
    fn score(&self, s: &Self::Stat) -> f64;
    fn gain_scale(&self) -> f64;
    fn leaf(&self, s: &Self::Stat) -> LeafValue;
    fn is_pure(&self, s: &Self::Stat) -> bool;
}

#[derive(Clone, Copy, Debug, Default)]
struct ClassStat {
    w: [f64; 2],
    n: usize,
}

struct Gini<'a> {
    y: &'a [u8],
    w: &'a [f64],
}

impl Objective for Gini<'_> {
    type Stat = ClassStat;

    fn row_stat(&self, row: usize) -> ClassStat {
        let mut w = [0.0; 2];
        w[self.y[row] as usize] = self.w[row];
        ClassStat { w, n: 1 }
    }
    fn add(a: &mut ClassStat, b: &ClassStat) {
        a.w[0] += b.w[0];
        a.w[1] += b.w[1];
        a.n += b.n;
    }
    fn sub(a: &ClassStat, b: &ClassStat) -> ClassStat {
        ClassStat {
            w: [a.w[0] - b.w[0], a.w[1] - b.w[1]],
            n: a.n - b.n,
        }
    }
    fn count(s: &ClassStat) -> usize {
        s.n
    }
    fn cover(s: &ClassStat) -> f64 {
        s.w[0] + s.w[1]
    }
    // -W * gini = sum_c w_c^2 / W - W; the -W terms cancel across a split.
    fn score(&self, s: &ClassStat) -> f64 {
        let total = s.w[0] + s.w[1];
        if total <= 0.0 {
            0.0
        } else {
            (s.w[0] * s.w[0] + s.w[1] * s.w[1]) / total
        }
    }
    fn gain_scale(&self) -> f64 {
        1.0
    }
    fn leaf(&self, s: &ClassStat) -> LeafValue {
        let total = s.w[0] + s.w[1];
        LeafValue::Distribution(vec![s.w[0] / total, s.w[1] / total])
    }
    fn is_pure(&self, s: &ClassStat) -> bool {
        s.w[0] <= 0.0 || s.w[1] <= 0.0
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct GradStat {
    g: f64,
    h: f64,
    n: usize,
}

struct SecondOrder<'a> {
    g: &'a [f64],
    h: &'a [f64],
    lambda: f64,
    alpha: f64,
}

/// `sign(g) * max(|g| - alpha, 0)`.
pub fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

/// Optimal leaf weight `-soft_threshold(G, alpha) / (H + lambda)`; zero when
/// the denominator vanishes.
pub fn leaf_weight(g_sum: f64, h_sum: f64, lambda: f64, alpha: f64) -> f64 {
    let denom = h_sum + lambda;
    if denom <= 0.0 {
        0.0
    } else {
        -soft_threshold(g_sum, alpha) / denom
    }
}

impl Objective for SecondOrder<'_> {
    type Stat = GradStat;

    fn row_stat(&self, row: usize) -> GradStat {
        GradStat {
            g: self.g[row],
            h: self.h[row],
            n: 1,
        }
    }
    fn add(a: &mut GradStat, b: &GradStat) {
        a.g += b.g;
        a.h += b.h;
        a.n += b.n;
    }
    fn sub(a: &GradStat, b: &GradStat) -> GradStat {
        GradStat {
            g: a.g - b.g,
            h: a.h - b.h,
            n: a.n - b.n,
        }
    }
    fn count(s: &GradStat) -> usize {
        s.n
    }
    fn cover(s: &GradStat) -> f64 {
        s.h
    }
    fn score(&self, s: &GradStat) -> f64 {
        let denom = s.h + self.lambda;
        if denom <= 0.0 {
            0.0
        } else {
            let t = soft_threshold(s.g, self.alpha);
            t * t / denom
        }
    }
    fn gain_scale(&self) -> f64 {
        0.5
    }
    fn leaf(&self, s: &GradStat) -> LeafValue {
        LeafValue::Scalar(leaf_weight(s.g, s.h, self.lambda, self.alpha))
    }
    fn is_pure(&self, _: &GradStat) -> bool {
        false
    }
}

/// A scored split candidate at one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    /// Number of node rows routed left.
    left_rows: usize,
}

struct Pending<S> {
    id: usize,
    depth: usize,
    /// Node rows sorted by value, one list per allowed feature.
    sorted: Vec<Vec<u32>>,
    stat: S,
    best: Option<SplitCandidate>,
}

struct Builder<'a, O: Objective> {
    x: &'a Matrix,
    obj: O,
    p: &'a TreeParams,
    features: Vec<usize>,
    nodes: Vec<TreeNode>,
    go_left: Vec<bool>,
}

fn threshold_between(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

impl<'a, O: Objective> Builder<'a, O> {
    fn new(x: &'a Matrix, obj: O, p: &'a TreeParams, features: Vec<usize>) -> Self {
        Builder {
            x,
            obj,
            p,
            features,
            nodes: Vec::new(),
            go_left: vec![false; x.rows()],
        }
    }

    fn stat_of(&self, rows: &[u32]) -> O::Stat {
        let mut s = O::Stat::default();
        for &r in rows {
            O::add(&mut s, &self.obj.row_stat(r as usize));
        }
        s
    }

    fn push_leaf(&mut self, stat: &O::Stat) -> usize {
        self.nodes.push(TreeNode {
            kind: NodeKind::Leaf(self.obj.leaf(stat)),
            cover: O::cover(stat),
        });
        self.nodes.len() - 1
    }

    fn pending(&mut self, rows: &[u32], depth: usize) -> Pending<O::Stat> {
        let sorted = self
            .features
            .iter()
            .map(|&f| {
                let mut r = rows.to_vec();
                r.sort_by(|&a, &b| {
                    self.x
                        .get(a as usize, f)
                        .total_cmp(&self.x.get(b as usize, f))
                        .then(a.cmp(&b))
                });
                r
            })
            .collect();
        let stat = self.stat_of(rows);
        let id = self.push_leaf(&stat);
        let mut node = Pending {
            id,
            depth,
            sorted,
            stat,
            best: None,
        };
        node.best = self.best_split(&node);
        node
    }

    /// Positions in `self.features` to evaluate at this node.
    fn candidate_slots(&self, node: &Pending<O::Stat>) -> Vec<usize> {
        let all: Vec<usize> = (0..self.features.len()).collect();
        match self.p.max_features {
            MaxFeatures::All => all,
            MaxFeatures::Sqrt => {
                let k = (self.features.len() as f64).sqrt().ceil() as usize;
                let mut order = all;
                let mut rng = rng::stream(self.p.seed, &[NODE_STREAM, node.id as u64]);
                order.shuffle(&mut rng);
                // Constant columns do not count toward the sample, so a node
                // only becomes a leaf when no sampled feature can split it.
                let mut chosen = Vec::with_capacity(k);
                for slot in order {
                    if chosen.len() == k {
                        break;
                    }
                    let rows = &node.sorted[slot];
                    let f = self.features[slot];
                    let first = self.x.get(rows[0] as usize, f);
                    let last = self.x.get(rows[rows.len() - 1] as usize, f);
                    if first < last {
                        chosen.push(slot);
                    }
                }
                chosen.sort_unstable();
                chosen
            }
        }
    }

    fn best_split(&self, node: &Pending<O::Stat>) -> Option<SplitCandidate> {
        if node.depth >= self.p.max_depth || self.obj.is_pure(&node.stat) {
            return None;
        }
        let parent_score = self.obj.score(&node.stat);
        let mut best: Option<SplitCandidate> = None;
        for slot in self.candidate_slots(node) {
            let f = self.features[slot];
            let rows = &node.sorted[slot];
            let mut left = O::Stat::default();
            for i in 0..rows.len() - 1 {
                O::add(&mut left, &self.obj.row_stat(rows[i] as usize));
                let v = self.x.get(rows[i] as usize, f);
                let next = self.x.get(rows[i + 1] as usize, f);
                if v >= next {
                    continue;
                }
                let right = O::sub(&node.stat, &left);
                if O::count(&left) < self.p.min_samples_leaf
                    || O::count(&right) < self.p.min_samples_leaf
                {
                    continue;
                }
                let (cl, cr) = (O::cover(&left), O::cover(&right));
                if cl < self.p.min_child_weight
                    || cr < self.p.min_child_weight
                    || cl <= 0.0
                    || cr <= 0.0
                {
                    continue;
                }
                let (sl, sr) = (self.obj.score(&left), self.obj.score(&right));
                let gain = self.obj.gain_scale() * (sl + sr - parent_score);
                let noise = 1e-10 * (sl.abs() + sr.abs() + parent_score.abs());
                if gain <= noise {
                    continue;
                }
                if best.is_none_or(|b| gain > b.gain) {
                    best = Some(SplitCandidate {
                        feature: f,
                        threshold: threshold_between(v, next),
                        gain,
                        left_rows: i + 1,
                    });
                }
            }
        }
        best
    }

    /// Replaces the leaf at `node.id` by a split and returns the two children.
    fn split(&mut self, node: Pending<O::Stat>) -> (Pending<O::Stat>, Pending<O::Stat>) {
        let best = node.best.expect("split requires a candidate");
        let slot = self
            .features
            .iter()
            .position(|&f| f == best.feature)
            .expect("feature allowed");
        let key = &node.sorted[slot];
        for &r in &key[..best.left_rows] {
            self.go_left[r as usize] = true;
        }
        let mut left_sorted = Vec::with_capacity(node.sorted.len());
        let mut right_sorted = Vec::with_capacity(node.sorted.len());
        for rows in &node.sorted {
            let (l, r): (Vec<u32>, Vec<u32>) =
                rows.iter().partition(|&&row| self.go_left[row as usize]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        for &r in &key[..best.left_rows] {
            self.go_left[r as usize] = false;
        }

        let mut children = Vec::with_capacity(2);
        for sorted in [left_sorted, right_sorted] {
            let stat = self.stat_of(&sorted[0]);
            let id = self.push_leaf(&stat);
            let mut child = Pending {
                id,
                depth: node.depth + 1,
                sorted,
                stat,
                best: None,
            };
            child.best = self.best_split(&child);
            children.push(child);
        }
        let right = children.pop().unwrap();
        let left = children.pop().unwrap();
        self.nodes[node.id].kind = NodeKind::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: left.id,
            right: right.id,
        };
        (left, right)
    }

    fn grow(mut self, rows: &[u32]) -> Tree {
        let root = self.pending(rows, 0);
        match self.p.growth {
            Growth::LevelWise => {
                let mut queue = VecDeque::from([root]);
                while let Some(node) = queue.pop_front() {
                    if node.best.is_some() {
                        let (l, r) = self.split(node);
                        queue.push_back(l);
                        queue.push_back(r);
                    }
                }
            }
            Growth::LeafWise => {
                let mut open = vec![root];
                let mut leaves = 1;
                while leaves < self.p.max_leaves {
                    // Highest gain first; equal gains go to the earliest node.
                    let pick = open
                        .iter()
                        .enumerate()
                        .filter_map(|(i, n)| n.best.map(|b| (i, b.gain, n.id)))
                        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)));
                    let Some((i, _, _)) = pick else { break };
                    let node = open.swap_remove(i);
                    let (l, r) = self.split(node);
                    open.push(l);
                    open.push(r);
                    leaves += 1;
                }
            }
        }
        let mut tree = Tree { nodes: self.nodes };
        fix_covers(&mut tree, 0);
        tree
    }
}

/// Internal covers become the exact sum of their children's covers.
fn fix_covers(t: &mut Tree, i: usize) -> f64 {
    if let NodeKind::Split { left, right, .. } = t.nodes[i].kind {
        let c = fix_covers(t, left) + fix_covers(t, right);
        t.nodes[i].cover = c;
    }
    t.nodes[i].cover
}

fn check_matrix(x: &Matrix, n: usize) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::Fit("empty input".into()));
    }
    if x.rows() != n {
        return Err(Error::Fit(format!(
            "{} rows but {n} targets",
            x.rows()
        )));
    }
    Ok(())
}

/// Greedy CART classification tree maximizing the weighted Gini decrease.
/// Rows with zero weight are left out.
pub fn fit_classification_tree(x: &Matrix, y: &[u8], w: &[f64], p: &TreeParams) -> Result<Tree> {
    check_matrix(x, y.len())?;
    p.validate()?;
    if w.len() != y.len() {
        return Err(Error::Fit(format!("{} weights for {} rows", w.len(), y.len())));
    }
    if p.criterion != Criterion::Gini {
        return Err(Error::Config("classification trees use the gini criterion".into()));
    }
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Fit("weights must be finite and nonnegative".into()));
    }
    if y.iter().any(|&c| c > 1) {
        return Err(Error::Fit("labels must be 0 or 1".into()));
    }
    let rows: Vec<u32> = (0..y.len() as u32).filter(|&r| w[r as usize] > 0.0).collect();
    if rows.is_empty() {
        return Err(Error::Fit("all weights are zero".into()));
    }
    let features = (0..x.cols()).collect();
    Ok(Builder::new(x, Gini { y, w }, p, features).grow(&rows))
}

/// Second-order regression tree on gradients `g` and Hessians `h`, using
/// every row and feature.
pub fn fit_regression_tree(x: &Matrix, g: &[f64], h: &[f64], p: &TreeParams) -> Result<Tree> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    let features: Vec<usize> = (0..x.cols()).collect();
    fit_regression_tree_on(x, g, h, &rows, &features, p)
}

/// Second-order regression tree restricted to a row sample and a column
/// sample (both as index lists into `x`).
pub fn fit_regression_tree_on(
    x: &Matrix,
    g: &[f64],
    h: &[f64],
    rows: &[usize],
    features: &[usize],
    p: &TreeParams,
) -> Result<Tree> {
    check_matrix(x, g.len())?;
    p.validate()?;
    if h.len() != g.len() {
        return Err(Error::Fit(format!(
            "{} gradients but {} hessians",
            g.len(),
            h.len()
        )));
    }
    if p.criterion != Criterion::SecondOrder {
        return Err(Error::Config("regression trees use the second_order criterion".into()));
    }
    if h.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("gradients must be finite and hessians nonnegative".into()));
    }
    if rows.is_empty() {
        return Err(Error::Fit("empty row sample".into()));
    }
    if rows.iter().any(|&r| r >= x.rows()) || features.iter().any(|&f| f >= x.cols()) {
        return Err(Error::Fit("row or feature index out of range".into()));
    }
    let rows: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    let obj = SecondOrder {
        g,
        h,
        lambda: p.reg_lambda,
        alpha: p.reg_alpha,
    };
    let mut features = features.to_vec();
    features.sort_unstable();
    features.dedup();
    let tree = Builder::new(x, obj, p, features).grow(&rows);
    if tree.nodes.iter().any(|n| n.cover <= 0.0) {
        return Err(Error::Fit("a node received zero hessian mass".into()));
    }
    Ok(tree)
}
