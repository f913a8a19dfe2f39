//! Multinomial (softmax) logistic regression trained with L-BFGS.
//!
//! Objective: mean cross-entropy of `softmax(W x + b)` plus
//! `lambda / (2 n) * ||W||^2`. The bias is not penalized.
//!
//! The solver runs in centred and scaled coordinates and maps the solution
//! back. This is a change of variables of the same objective, not a change of
//! model: it only matters for conditioning, e.g. when a raw carrier frequency
//! near 8.7e8 Hz sits next to features of order one.

use serde::{Deserialize, Serialize};

use super::lbfgs::{self, LbfgsOptions, Objective, Status};
use super::scale::Standardizer;
use crate::error::{Error, Result};

/// Relative objective-decrease stop, the usual `factr = 1e7` setting.
const FTOL: f64 = 1e7 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxRegression {
    pub n_features: usize,
    pub n_classes: usize,
    /// Row-major `n_classes x n_features`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub converged: bool,
    pub status: Status,
    pub iterations: usize,
    pub grad_norm: f64,
    pub loss: f64,
}

impl SoftmaxRegression {
    pub fn zeros(n_features: usize, n_classes: usize) -> Self {
        SoftmaxRegression {
            n_features,
            n_classes,
            weights: vec![0.0; n_features * n_classes],
            bias: vec![0.0; n_classes],
        }
    }

    fn from_params(theta: &[f64], p: usize, c: usize) -> Self {
        SoftmaxRegression {
            n_features: p,
            n_classes: c,
            weights: theta[..p * c].to_vec(),
            bias: theta[p * c..].to_vec(),
        }
    }

    pub fn logits(&self, x: &[f64], out: &mut [f64]) {
        logits(&self.weights, &self.bias, self.n_features, x, out);
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.n_classes];
        self.logits(x, &mut z);
        let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for v in z.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        z.iter_mut().for_each(|v| *v /= sum);
        z
    }

    /// Index of the largest logit; ties go to the lowest class index.
    pub fn predict_index(&self, x: &[f64]) -> usize {
        let mut z = vec![0.0; self.n_classes];
        self.logits(x, &mut z);
        let mut best = 0;
        for (k, &v) in z.iter().enumerate().skip(1) {
            if v > z[best] {
                best = k;
            }
        }
        best
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

fn logits(w: &[f64], b: &[f64], p: usize, x: &[f64], out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        let row = &w[k * p..(k + 1) * p];
        *o = b[k] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Penalized mean cross-entropy over a row-major design matrix.
pub struct SoftmaxLoss<'a> {
    pub x: &'a [f64],
    pub y: &'a [usize],
    pub n_features: usize,
    pub n_classes: usize,
    pub l2: f64,
    /// Per-feature multipliers of the L2 term; `None` means all ones.
    pub penalty: Option<&'a [f64]>,
}

impl Objective for SoftmaxLoss<'_> {
    fn dim(&self) -> usize {
        self.n_classes * (self.n_features + 1)
    }

    fn value_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (p, c) = (self.n_features, self.n_classes);
        let n = self.y.len() as f64;
        let (w, b) = theta.split_at(p * c);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (gw, gb) = grad.split_at_mut(p * c);

        let mut z = vec![0.0; c];
        let mut loss = 0.0;
        for (x, &y) in self.x.chunks_exact(p).zip(self.y) {
            logits(w, b, p, x, &mut z);
            let m = z.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            let mut sum = 0.0;
            for v in z.iter() {
                sum += (v - m).exp();
            }
            let lse = m + sum.ln();
            loss += lse - z[y];
            for k in 0..c {
                let r = (z[k] - lse).exp() - if k == y { 1.0 } else { 0.0 };
                gb[k] += r;
                for (g, xi) in gw[k * p..(k + 1) * p].iter_mut().zip(x) {
                    *g += r * xi;
                }
            }
        }
        let inv_n = 1.0 / n;
        let mut penalty = 0.0;
        for (i, (g, wi)) in gw.iter_mut().zip(w).enumerate() {
            let m = self.penalty.map_or(1.0, |pen| pen[i % p]);
            *g = *g * inv_n + self.l2 * inv_n * m * wi;
            penalty += m * wi * wi;
        }
        gb.iter_mut().for_each(|g| *g *= inv_n);
        loss * inv_n + 0.5 * self.l2 * inv_n * penalty
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlrOptions {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

/// Fit from zero initialization. `x` is row-major with `p` columns and `y`
/// holds class indices in `0..n_classes`.
pub fn fit(
    x: &[f64],
    y: &[usize],
    p: usize,
    n_classes: usize,
    opts: &MlrOptions,
) -> Result<(SoftmaxRegression, FitInfo)> {
    // theta_raw: w = w_z / s, b = b_z - w . mean; penalty on w becomes w_z^2 / s^2
    let pre = Standardizer::fit(x, p);
    let z = pre.transform(x);
    let penalty: Vec<f64> = pre.scale.iter().map(|s| 1.0 / (s * s)).collect();
    let loss = SoftmaxLoss {
        x: &z,
        y,
        n_features: p,
        n_classes,
        l2: opts.l2,
        penalty: Some(&penalty),
    };
    let lb = LbfgsOptions {
        memory: 10,
        max_iter: opts.max_iter,
        gtol: opts.tol,
        ftol: FTOL,
        ..Default::default()
    };
    let out = lbfgs::minimize(&loss, &vec![0.0; loss.dim()], &lb);
    if !out.value.is_finite() || out.status == Status::NonFinite {
        return Err(Error::NonFinite("softmax regression loss".into()));
    }
    let info = FitInfo {
        converged: out.converged(),
        status: out.status,
        iterations: out.iterations,
        grad_norm: out.grad_norm,
        loss: out.value,
    };
    let mut model = SoftmaxRegression::from_params(&out.x, p, n_classes);
    for k in 0..n_classes {
        let row = &mut model.weights[k * p..(k + 1) * p];
        for (w, s) in row.iter_mut().zip(&pre.scale) {
            *w /= s;
        }
        model.bias[k] -= row.iter().zip(&pre.mean).map(|(w, m)| w * m).sum::<f64>();
    }
    Ok((model, info))
}
