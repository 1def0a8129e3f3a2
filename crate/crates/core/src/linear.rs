//! L1-regularized logistic regression.
//!
//! Minimizes `||w||_1 + C * sum_i log(1 + exp(-y_i (w . x_i + b)))` with
//! `y_i` in {-1, +1}, the intercept unpenalized (the liblinear convention, so
//! `C` has the same meaning as in scikit-learn's `liblinear` solver). Features
//! are standardized internally with the training mean and population standard
//! deviation; weights are reported in that standardized space. Solved by
//! proximal gradient descent with backtracking, which keeps the objective
//! monotone.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::tree::soft_threshold;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            c: 1.0,
            tol: 1e-6,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Coefficients on standardized features.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub means: Vec<f64>,
    /// Standard deviations; zero-variance features get 1 and weight 0.
    pub scales: Vec<f64>,
    /// False when `max_iter` ran out before the update fell below `tol`.
    pub converged: bool,
    pub iterations: usize,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

impl LogisticModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .weights
                .iter()
                .zip(x)
                .zip(self.means.iter().zip(&self.scales))
                .map(|((w, v), (m, s))| w * (v - m) / s)
                .sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.weights.len() {
            return Err(Error::Prediction(format!(
                "expected {} features, got {}",
                self.weights.len(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Prediction("non-finite feature value".into()));
        }
        let p = sigmoid(self.margin(x));
        Ok([1.0 - p, p])
    }
}

fn signed(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Smooth part `C * sum_i log(1 + exp(-y_i z_i))` and its gradient with
/// respect to the weights and the intercept, on already-standardized `xs`.
pub fn smooth_loss_and_grad(
    xs: &Matrix,
    y: &[u8],
    w: &[f64],
    b: f64,
    c: f64,
) -> (f64, Vec<f64>, f64) {
    let mut loss = 0.0;
    let mut grad = vec![0.0; w.len()];
    let mut grad_b = 0.0;
    for (i, row) in xs.iter_rows().enumerate() {
        let yi = signed(y[i]);
        let z = b + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        loss += softplus(-yi * z);
        // d/dz log(1 + e^{-y z}) = -y * sigmoid(-y z)
        let coef = -yi * sigmoid(-yi * z);
        for (g, v) in grad.iter_mut().zip(row) {
            *g += coef * v;
        }
        grad_b += coef;
    }
    grad.iter_mut().for_each(|g| *g *= c);
    (c * loss, grad, c * grad_b)
}

fn smooth_loss(xs: &Matrix, y: &[u8], w: &[f64], b: f64, c: f64) -> f64 {
    xs.iter_rows()
        .zip(y)
        .map(|(row, &l)| {
            let z = b + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            softplus(-signed(l) * z)
        })
        .sum::<f64>()
        * c
}

fn l1(w: &[f64]) -> f64 {
    w.iter().map(|v| v.abs()).sum()
}

/// Standardized copy of the features plus the (mean, scale) pairs.
pub fn standardize(x: &Matrix) -> (Matrix, Vec<f64>, Vec<f64>) {
    let n = x.rows() as f64;
    let mut means = Vec::with_capacity(x.cols());
    let mut scales = Vec::with_capacity(x.cols());
    for j in 0..x.cols() {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        means.push(mean);
        scales.push(if sd > 0.0 { sd } else { 1.0 });
    }
    let mut xs = x.clone();
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            xs.set(i, j, (x.get(i, j) - means[j]) / scales[j]);
        }
    }
    (xs, means, scales)
}

pub fn fit_logistic_l1(d: &Dataset, params: &LogisticParams) -> Result<LogisticModel> {
    fit_logistic_l1_traced(d, params).map(|(m, _)| m)
}

/// Fits and also returns the full objective value after every accepted
/// iteration (the first entry is the objective at the zero start).
pub fn fit_logistic_l1_traced(
    d: &Dataset,
    params: &LogisticParams,
) -> Result<(LogisticModel, Vec<f64>)> {
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::Config(format!("C must be positive, got {}", params.c)));
    }
    if params.tol.is_nan() || params.tol <= 0.0 || params.max_iter == 0 {
        return Err(Error::Config("tol and max_iter must be positive".into()));
    }
    let (xs, means, scales) = standardize(&d.features);
    let active: Vec<bool> = (0..xs.cols())
        .map(|j| {
            let first = d.features.get(0, j);
            (0..xs.rows()).any(|i| d.features.get(i, j) != first)
        })
        .collect();
    let y = &d.labels;
    let c = params.c;
    let m = xs.cols();

    // Lipschitz bound of the smooth gradient: C/4 * sum_i (|x_i|^2 + 1).
    let lipschitz = 0.25
        * c
        * xs.iter_rows()
            .map(|r| 1.0 + r.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>();
    let floor_step = 1e-12 / lipschitz;
    let mut step = 1.0 / lipschitz;

    let mut w = vec![0.0; m];
    let mut b = 0.0;
    let (mut f, mut grad, mut grad_b) = smooth_loss_and_grad(&xs, y, &w, b, c);
    let mut objective = f + l1(&w);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        step *= 2.0;
        let accepted = loop {
            let w_new: Vec<f64> = (0..m)
                .map(|j| {
                    if active[j] {
                        soft_threshold(w[j] - step * grad[j], step)
                    } else {
                        0.0
                    }
                })
                .collect();
            let b_new = b - step * grad_b;
            let f_new = smooth_loss(&xs, y, &w_new, b_new, c);
            let mut lin = (b_new - b) * grad_b;
            let mut sq = (b_new - b) * (b_new - b);
            for j in 0..m {
                let dj = w_new[j] - w[j];
                lin += dj * grad[j];
                sq += dj * dj;
            }
            let obj_new = f_new + l1(&w_new);
            if f_new <= f + lin + sq / (2.0 * step) && obj_new <= objective {
                break Some((w_new, b_new, obj_new));
            }
            step *= 0.5;
            if step < floor_step {
                break None;
            }
        };
        let Some((w_new, b_new, obj_new)) = accepted else {
            // No representable descent step remains: stationary to precision.
            converged = true;
            break;
        };
        let max_update = w_new
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold((b_new - b).abs(), f64::max);
        w = w_new;
        b = b_new;
        objective = obj_new;
        trace.push(objective);
        (f, grad, grad_b) = smooth_loss_and_grad(&xs, y, &w, b, c);
        if max_update < params.tol {
            converged = true;
            break;
        }
    }

    Ok((
        LogisticModel {
            weights: w,
            intercept: b,
            means,
            scales,
            converged,
            iterations,
        },
        trace,
    ))
}
