use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{column_indices, BaseError};
use crate::data::{Dataset, Matrix};

/// Least squares with an unpenalized intercept; `lambda > 0` gives ridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    feature_names: Vec<String>,
    weights: Vec<f64>,
    intercept: f64,
    lambda: f64,
}

impl LinearModel {
    pub fn fit(dataset: &Dataset, train: &[usize], lambda: f64) -> Result<Self, BaseError> {
        let n = train.len();
        let d = dataset.num_features();
        let x = dataset.features();
        let y = dataset.targets();
        let mut mean = vec![0.0; d];
        let mut ybar = 0.0;
        for &i in train {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
            ybar += y[i];
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        ybar /= n as f64;

        let xc = DMatrix::from_fn(n, d, |r, c| x.get(train[r], c) - mean[c]);
        let yc = DVector::from_fn(n, |r, _| y[train[r]] - ybar);
        let svd = xc.svd(true, true);
        let (u, vt) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
        let s = &svd.singular_values;
        let smax = s.iter().cloned().fold(0.0, f64::max);
        let tol = smax * n.max(d) as f64 * f64::EPSILON;
        let mut w = DVector::zeros(d);
        let mut dropped = 0;
        for k in 0..s.len() {
            let sk = s[k];
            let factor = if lambda > 0.0 {
                sk / (sk * sk + lambda)
            } else if sk > tol {
                1.0 / sk
            } else {
                dropped += 1;
                0.0
            };
            if factor != 0.0 {
                let proj = u.column(k).dot(&yc) * factor;
                w += vt.row(k).transpose() * proj;
            }
        }
        if dropped > 0 {
            log::warn!("rank-deficient design ({dropped} direction(s)); using minimum-norm solution");
        }
        let weights: Vec<f64> = w.iter().cloned().collect();
        let intercept = ybar - weights.iter().zip(&mean).map(|(a, b)| a * b).sum::<f64>();
        Ok(Self {
            feature_names: dataset.feature_names().to_vec(),
            weights,
            intercept,
            lambda,
        })
    }

    pub fn from_parts(feature_names: Vec<String>, weights: Vec<f64>, intercept: f64) -> Self {
        Self {
            feature_names,
            weights,
            intercept,
            lambda: 0.0,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn predict(&self, features: &Matrix, names: &[String]) -> Result<Vec<f64>, BaseError> {
        let idx = column_indices(&self.feature_names, names)?;
        Ok(features
            .iter_rows()
            .map(|r| {
                self.intercept
                    + self
                        .weights
                        .iter()
                        .zip(&idx)
                        .map(|(w, &j)| w * r[j])
                        .sum::<f64>()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Task;

    fn ds(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
        let d = rows[0].len();
        Dataset::new(
            Matrix::from_rows(&rows).unwrap(),
            (0..d).map(|j| format!("x{j}")).collect(),
            y,
            Task::Regression,
        )
        .unwrap()
    }

    #[test]
    fn exact_slope() {
        let d = ds((0..5).map(|i| vec![i as f64]).collect(), (0..5).map(|i| 2.0 * i as f64).collect());
        let m = LinearModel::fit(&d, &[0, 1, 2, 3, 4], 0.0).unwrap();
        assert!((m.weights()[0] - 2.0).abs() < 1e-8);
        assert!(m.intercept().abs() < 1e-8);
    }

    #[test]
    fn normal_equations_hold() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = i as f64;
                vec![t.sin(), (0.3 * t).cos(), t * 0.1]
            })
            .collect();
        let y: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64).collect();
        let d = ds(rows.clone(), y.clone());
        let all: Vec<usize> = (0..20).collect();
        let m = LinearModel::fit(&d, &all, 0.0).unwrap();
        let pred = m.predict(d.features(), d.feature_names()).unwrap();
        let res: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        assert!(res.iter().sum::<f64>().abs() < 1e-6);
        for j in 0..3 {
            let dot: f64 = res.iter().zip(&rows).map(|(r, x)| r * x[j]).sum();
            assert!(dot.abs() < 1e-6, "column {j}: {dot}");
        }
        let ridge = LinearModel::fit(&d, &all, 1e-10).unwrap();
        for (a, b) in ridge.weights().iter().zip(m.weights()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicate_columns_min_norm() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, i as f64]).collect();
        let d = ds(rows, (0..6).map(|i| 4.0 * i as f64 + 1.0).collect());
        let m = LinearModel::fit(&d, &(0..6).collect::<Vec<_>>(), 0.0).unwrap();
        assert!((m.weights()[0] - 2.0).abs() < 1e-8 && (m.weights()[1] - 2.0).abs() < 1e-8);
        assert!((m.intercept() - 1.0).abs() < 1e-8);
    }
}
