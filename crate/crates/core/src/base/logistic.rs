use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{column_indices, BaseError};
use crate::data::{fit_scaler, Dataset, Matrix, ScalerKind, ScalerStats};

const GRAD_TOL: f64 = 1e-6;
const MAX_ITER: usize = 10_000;

/// Multinomial logistic regression with the last class as reference.
///
/// Features are standardized on the training rows; weights live in that
/// space. Objective: mean cross-entropy + lambda/2 * |W|^2, intercepts
/// unpenalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    feature_names: Vec<String>,
    scaler: ScalerStats,
    num_classes: usize,
    /// (C-1) rows of [intercept, w_1..w_d].
    params: Vec<Vec<f64>>,
    lambda: f64,
    iterations: usize,
    grad_norm: f64,
}

struct Problem<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    c: usize,
    d: usize,
    lambda: f64,
}

fn probs_for(params: &[f64], row: &[f64], c: usize, d: usize) -> Vec<f64> {
    let mut z = vec![0.0; c];
    for k in 0..c - 1 {
        let p = &params[k * (d + 1)..(k + 1) * (d + 1)];
        z[k] = p[0] + p[1..].iter().zip(row).map(|(w, x)| w * x).sum::<f64>();
    }
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        (self.c - 1) * (self.d + 1)
    }

    fn penalty(&self, params: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.c - 1 {
            s += params[k * (self.d + 1) + 1..(k + 1) * (self.d + 1)]
                .iter()
                .map(|w| w * w)
                .sum::<f64>();
        }
        0.5 * self.lambda * s
    }

    fn objective(&self, params: &[f64]) -> f64 {
        let n = self.x.len() as f64;
        let ce: f64 = self
            .x
            .iter()
            .zip(self.y)
            .map(|(r, &y)| -probs_for(params, r, self.c, self.d)[y].max(1e-300).ln())
            .sum();
        ce / n + self.penalty(params)
    }

    fn grad_hess(&self, params: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let (c, d) = (self.c, self.d);
        let dim = self.dim();
        let n = self.x.len() as f64;
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        let mut xt = vec![1.0; d + 1];
        for (row, &y) in self.x.iter().zip(self.y) {
            xt[1..].copy_from_slice(row);
            let p = probs_for(params, row, c, d);
            for a in 0..c - 1 {
                let ra = p[a] - if a == y { 1.0 } else { 0.0 };
                for i in 0..=d {
                    g[a * (d + 1) + i] += ra * xt[i] / n;
                }
                for b in 0..c - 1 {
                    let wab = p[a] * (if a == b { 1.0 } else { 0.0 } - p[b]) / n;
                    if wab == 0.0 {
                        continue;
                    }
                    for i in 0..=d {
                        let wi = wab * xt[i];
                        for j in 0..=d {
                            h[(a * (d + 1) + i, b * (d + 1) + j)] += wi * xt[j];
                        }
                    }
                }
            }
        }
        for a in 0..c - 1 {
            for i in 1..=d {
                let k = a * (d + 1) + i;
                g[k] += self.lambda * params[k];
                h[(k, k)] += self.lambda;
            }
        }
        (g, h)
    }

    fn gradient(&self, params: &[f64]) -> DVector<f64> {
        self.grad_hess(params).0
    }
}

fn newton_step(g: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
    if let Some(ch) = h.clone().cholesky() {
        return -ch.solve(g);
    }
    // Singular Hessian (e.g. a class with vanishing probability): damp it.
    let scale = h.diagonal().iter().cloned().fold(1e-12, f64::max);
    let mut damped = h.clone();
    for i in 0..h.nrows() {
        damped[(i, i)] += 1e-8 * scale + 1e-12;
    }
    match damped.cholesky() {
        Some(ch) => -ch.solve(g),
        None => -g.clone(),
    }
}

impl LogisticModel {
    pub fn fit(dataset: &Dataset, train: &[usize], lambda: f64) -> Result<Self, BaseError> {
        let c = dataset.task().num_classes().unwrap_or(2);
        let labels = dataset.class_indices(train);
        let mut present = labels.clone();
        present.sort_unstable();
        present.dedup();
        if present.len() < 2 {
            return Err(BaseError::SingleClass);
        }
        let scaler = fit_scaler(dataset.features(), train, ScalerKind::Standardize, "train")?;
        let x: Vec<Vec<f64>> = train
            .iter()
            .map(|&i| scaler.transform_row(dataset.features().row(i)))
            .collect();
        let d = dataset.num_features();
        let prob = Problem {
            x: &x,
            y: &labels,
            c,
            d,
            lambda,
        };
        let mut params = vec![0.0; prob.dim()];
        let mut f = prob.objective(&params);
        let mut iterations = 0;
        let mut grad_norm = f64::INFINITY;
        while iterations < MAX_ITER {
            let (g, h) = prob.grad_hess(&params);
            grad_norm = g.norm();
            if grad_norm < GRAD_TOL {
                break;
            }
            iterations += 1;
            let step = newton_step(&g, &h);
            let slope = g.dot(&step);
            let (step, slope) = if slope < 0.0 { (step, slope) } else { (-g.clone(), -g.dot(&g)) };
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-12 {
                let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + t * s).collect();
                let ft = prob.objective(&trial);
                if ft <= f + 1e-4 * t * slope {
                    params = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                grad_norm = prob.gradient(&params).norm();
                break;
            }
        }
        if grad_norm >= GRAD_TOL {
            log::warn!("logistic regression stopped after {iterations} iterations, |grad| = {grad_norm:.3e}");
        }
        let params = params.chunks(d + 1).map(|c| c.to_vec()).collect();
        Ok(Self {
            feature_names: dataset.feature_names().to_vec(),
            scaler,
            num_classes: c,
            params,
            lambda,
            iterations,
            grad_norm,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad_norm
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Mean |weight| over the non-reference classes, standardized scale.
    pub fn importances(&self) -> Vec<(String, f64)> {
        let k = self.params.len() as f64;
        self.feature_names
            .iter()
            .enumerate()
            .map(|(j, n)| {
                (
                    n.clone(),
                    self.params.iter().map(|p| p[j + 1].abs()).sum::<f64>() / k,
                )
            })
            .collect()
    }

    pub fn predict_proba(&self, features: &Matrix, names: &[String]) -> Result<Vec<Vec<f64>>, BaseError> {
        let idx = column_indices(&self.feature_names, names)?;
        let flat: Vec<f64> = self.params.concat();
        let d = self.feature_names.len();
        Ok(features
            .iter_rows()
            .map(|r| {
                let ordered: Vec<f64> = idx.iter().map(|&j| r[j]).collect();
                probs_for(&flat, &self.scaler.transform_row(&ordered), self.num_classes, d)
            })
            .collect())
    }
}
