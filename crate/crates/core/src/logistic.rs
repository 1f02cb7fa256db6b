//! L2-penalised logistic regression without an intercept.
//!
//! Objective, with `s_i = f_i · w` and per-sample class weights `c_i`:
//!
//! ```text
//! J(w) = (1/N) Σ c_i [ log(1 + e^{s_i}) - y_i s_i ] + (λ/2) ‖w‖²
//! ```
//!
//! With class balancing `c_i = N / (2 N_{y_i})`, so each class carries half of
//! the data term regardless of its size. Minimised by full-batch Newton steps
//! (IRLS) from `w = 0`, halving the step until the objective does not increase.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SnpError};
use crate::matrix::{dot, norm, Matrix};

pub const DEFAULT_L2: f64 = 1.0;
pub const GRAD_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 200;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub l2: f64,
    pub class_balanced: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            l2: DEFAULT_L2,
            class_balanced: true,
            tolerance: GRAD_TOLERANCE,
            max_iterations: MAX_ITERATIONS,
        }
    }
}

impl LogisticOptions {
    pub fn with_l2(l2: f64) -> Self {
        Self {
            l2,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub l2_strength: f64,
    pub converged: bool,
    pub final_grad_norm: f64,
    pub iterations: usize,
    /// Objective value at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
}

#[inline]
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

/// `softplus(s + d) - softplus(s)`; for small `d` this is
/// `ln(1 + σ(s)(e^d - 1))`, which avoids the cancellation.
#[inline]
fn softplus_change(s: f64, d: f64) -> f64 {
    if d.abs() < 1.0 {
        (sigmoid(s) * d.exp_m1()).ln_1p()
    } else {
        softplus(s + d) - softplus(s)
    }
}

/// Checks labels are binary with both classes present; returns `(N_0, N_1)`.
pub fn class_counts(labels: &[u8]) -> Result<(usize, usize)> {
    let mut counts = [0usize; 2];
    for &y in labels {
        if y > 1 {
            return Err(SnpError::Validation(format!("label {y} is not binary")));
        }
        counts[y as usize] += 1;
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(SnpError::SingleClass);
    }
    Ok((counts[0], counts[1]))
}

/// The penalised, class-weighted negative log-likelihood for a fixed dataset.
#[derive(Debug, Clone)]
pub struct LogisticObjective<'a> {
    features: &'a Matrix,
    targets: Vec<f64>,
    weights: Vec<f64>,
    l2: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(features: &'a Matrix, labels: &[u8], l2: f64, class_balanced: bool) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(SnpError::Shape(format!(
                "{} feature rows for {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if !(l2 > 0.0 && l2.is_finite()) {
            return Err(SnpError::InvalidArgument(format!(
                "l2 strength must be positive, got {l2}"
            )));
        }
        let (n0, n1) = class_counts(labels)?;
        let total = labels.len() as f64;
        let class_weight = if class_balanced {
            [total / (2.0 * n0 as f64), total / (2.0 * n1 as f64)]
        } else {
            [1.0, 1.0]
        };
        Ok(Self {
            features,
            targets: labels.iter().map(|&y| y as f64).collect(),
            weights: labels.iter().map(|&y| class_weight[y as usize]).collect(),
            l2,
        })
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    fn check(&self, w: &[f64]) {
        assert_eq!(w.len(), self.dim(), "weight vector length");
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        self.check(w);
        let n = self.targets.len() as f64;
        let data: f64 = self
            .features
            .row_iter()
            .zip(self.targets.iter().zip(&self.weights))
            .map(|(f, (&y, &c))| {
                let s = dot(f, w);
                c * (softplus(s) - y * s)
            })
            .sum();
        data / n + 0.5 * self.l2 * dot(w, w)
    }

    /// `J(to) - J(from)`, evaluated from the differences so that changes far
    /// below the rounding error of `J` itself keep their sign.
    pub fn value_change(&self, from: &[f64], to: &[f64]) -> f64 {
        self.check(from);
        self.check(to);
        let n = self.targets.len() as f64;
        let delta: Vec<f64> = to.iter().zip(from).map(|(b, a)| b - a).collect();
        let sum: Vec<f64> = to.iter().zip(from).map(|(b, a)| b + a).collect();
        let data: f64 = self
            .features
            .row_iter()
            .zip(self.targets.iter().zip(&self.weights))
            .map(|(f, (&y, &c))| {
                let s = dot(f, from);
                let d = dot(f, &delta);
                c * (softplus_change(s, d) - y * d)
            })
            .sum();
        data / n + 0.5 * self.l2 * dot(&delta, &sum)
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        self.check(w);
        let n = self.targets.len() as f64;
        let mut g = vec![0.0; self.dim()];
        for (f, (&y, &c)) in self
            .features
            .row_iter()
            .zip(self.targets.iter().zip(&self.weights))
        {
            let r = c * (sigmoid(dot(f, w)) - y);
            g.iter_mut().zip(f).for_each(|(gj, fj)| *gj += r * fj);
        }
        g.iter_mut()
            .zip(w)
            .for_each(|(gj, wj)| *gj = *gj / n + self.l2 * wj);
        g
    }

    pub fn hessian(&self, w: &[f64]) -> DMatrix<f64> {
        self.check(w);
        let k = self.dim();
        let n = self.targets.len() as f64;
        let mut h = DMatrix::<f64>::zeros(k, k);
        for (f, &c) in self.features.row_iter().zip(&self.weights) {
            let p = sigmoid(dot(f, w));
            let r = c * p * (1.0 - p) / n;
            if r == 0.0 {
                continue;
            }
            for a in 0..k {
                let ra = r * f[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..k {
                    h[(a, b)] += ra * f[b];
                }
            }
        }
        for a in 0..k {
            h[(a, a)] += self.l2;
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        h
    }
}

pub fn fit_logistic(
    features: &Matrix,
    labels: &[u8],
    l2: f64,
    class_balanced: bool,
) -> Result<LogisticModel> {
    fit_logistic_with(
        features,
        labels,
        &LogisticOptions {
            l2,
            class_balanced,
            ..LogisticOptions::default()
        },
    )
}

// TODO: the dense k x k Newton system limits this to a few thousand features;
// ranking a full-width SAE (16k features) directly needs a quasi-Newton path.
pub fn fit_logistic_with(
    features: &Matrix,
    labels: &[u8],
    opts: &LogisticOptions,
) -> Result<LogisticModel> {
    let objective = LogisticObjective::new(features, labels, opts.l2, opts.class_balanced)?;
    let k = objective.dim();
    let mut w = vec![0.0; k];
    let mut value = objective.value(&w);
    let mut trace = vec![value];
    let mut grad = objective.gradient(&w);
    let mut grad_norm = norm(&grad);
    let mut iterations = 0;

    while grad_norm > opts.tolerance && iterations < opts.max_iterations {
        iterations += 1;
        let hessian = objective.hessian(&w);
        let g = DVector::from_column_slice(&grad);
        let direction = match hessian.cholesky() {
            Some(chol) => chol.solve(&g),
            // l2 > 0 keeps H positive definite; only round-off can land here
            None => g / opts.l2,
        };

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<f64> = w
                .iter()
                .zip(direction.iter())
                .map(|(wi, di)| wi - step * di)
                .collect();
            let change = objective.value_change(&w, &candidate);
            if change <= 0.0 {
                accepted = Some((candidate, change));
                break;
            }
            step *= 0.5;
        }
        let Some((next, change)) = accepted else {
            break;
        };
        w = next;
        value += change;
        trace.push(value);
        grad = objective.gradient(&w);
        grad_norm = norm(&grad);
    }

    let converged = grad_norm <= opts.tolerance;
    if !converged {
        log::warn!(
            "logistic fit stopped after {iterations} iterations with gradient norm {grad_norm:e}"
        );
    }
    Ok(LogisticModel {
        weights: w,
        l2_strength: opts.l2,
        converged,
        final_grad_norm: grad_norm,
        iterations,
        objective_trace: trace,
    })
}

/// Per-column z-scoring followed by a logistic fit. Constant columns get a
/// zero weight.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedLogistic {
    pub means: Vec<f64>,
    /// Population standard deviations; zero marks a constant column.
    pub scales: Vec<f64>,
    pub model: LogisticModel,
}

impl StandardizedLogistic {
    pub fn fit(features: &Matrix, labels: &[u8], opts: &LogisticOptions) -> Result<Self> {
        let (means, scales) = column_stats(features);
        let standardized = standardize(features, &means, &scales);
        let model = fit_logistic_with(&standardized, labels, opts)?;
        Ok(Self {
            means,
            scales,
            model,
        })
    }

    /// Weights in standardized units.
    pub fn standardized_weights(&self) -> &[f64] {
        &self.model.weights
    }

    /// Weights mapped back to raw feature units: `w_j / s_j`.
    pub fn raw_weights(&self) -> Vec<f64> {
        self.model
            .weights
            .iter()
            .zip(&self.scales)
            .map(|(w, s)| if *s > 0.0 { w / s } else { 0.0 })
            .collect()
    }

    /// Logits `Σ_j w_j (x_j - μ_j) / s_j` for each row.
    pub fn decision_scores(&self, features: &Matrix) -> Result<Vec<f64>> {
        if features.cols() != self.means.len() {
            return Err(SnpError::Shape(format!(
                "probe expects {} features, got {}",
                self.means.len(),
                features.cols()
            )));
        }
        let raw = self.raw_weights();
        let offset = dot(&raw, &self.means);
        Ok(features.row_iter().map(|r| dot(r, &raw) - offset).collect())
    }

    pub fn predict(&self, features: &Matrix) -> Result<Vec<u8>> {
        Ok(self
            .decision_scores(features)?
            .into_iter()
            .map(|s| u8::from(s > 0.0))
            .collect())
    }
}

fn column_stats(m: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let k = m.cols();
    let n = m.rows().max(1) as f64;
    let mut means = vec![0.0; k];
    for r in m.row_iter() {
        means.iter_mut().zip(r).for_each(|(a, v)| *a += v);
    }
    means.iter_mut().for_each(|a| *a /= n);
    let mut vars = vec![0.0; k];
    for r in m.row_iter() {
        vars.iter_mut()
            .zip(r.iter().zip(&means))
            .for_each(|(s, (v, mu))| *s += (v - mu) * (v - mu));
    }
    let scales = vars
        .iter()
        .zip(&means)
        .map(|(s, mu)| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 * (1.0 + mu.abs()) {
                sd
            } else {
                0.0
            }
        })
        .collect();
    (means, scales)
}

fn standardize(m: &Matrix, means: &[f64], scales: &[f64]) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        out.row_mut(i)
            .iter_mut()
            .zip(means.iter().zip(scales))
            .for_each(|(v, (mu, s))| *v = if *s > 0.0 { (*v - mu) / s } else { 0.0 });
    }
    out
}
