//! Residuals of the base model and the high-residual pool the agents study.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::base::{BaseError, BaseModel};
use crate::data::{fit_scaler, DataError, Dataset, Matrix, ScalerKind, ScalerStats};

pub const DEFAULT_GAMMA_S: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ResidualError {
    #[error(transparent)]
    Base(#[from] BaseError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("kappa must lie in (0, 1], got {0}")]
    Kappa(f64),
    #[error("gamma_s must be positive, got {0}")]
    GammaS(f64),
    #[error("batch size must be at least 1")]
    BatchSize,
}

/// Residuals over the training rows plus the |r|-descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTable {
    /// Dataset row indices, in the order they were given.
    pub rows: Vec<usize>,
    pub residuals: Vec<f64>,
    /// Base prediction per row (label for classification).
    pub predictions: Vec<f64>,
    /// Positions into `rows`, by descending |r|, ties by ascending row index.
    pub order: Vec<usize>,
}

pub fn residuals(model: &BaseModel, dataset: &Dataset, train: &[usize]) -> Result<ResidualTable, ResidualError> {
    if model.task() != dataset.task() {
        return Err(BaseError::TaskMismatch {
            model: format!("{:?}", model.task()),
            data: format!("{:?}", dataset.task()),
        }
        .into());
    }
    let pred = model.predict_rows(dataset, train)?;
    let residuals: Vec<f64> = match &pred.probs {
        None => train
            .iter()
            .zip(&pred.values)
            .map(|(&i, p)| dataset.targets()[i] - p)
            .collect(),
        Some(probs) => train
            .iter()
            .zip(probs)
            .map(|(&i, p)| {
                let y = dataset.class_index(i);
                if crate::data::argmax(p) == y {
                    0.0
                } else {
                    1.0 - p[y]
                }
            })
            .collect(),
    };
    Ok(table_from(train.to_vec(), residuals, pred.values))
}

pub fn table_from(rows: Vec<usize>, residuals: Vec<f64>, predictions: Vec<f64>) -> ResidualTable {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        residuals[b]
            .abs()
            .total_cmp(&residuals[a].abs())
            .then(rows[a].cmp(&rows[b]))
    });
    ResidualTable {
        rows,
        residuals,
        predictions,
        order,
    }
}

/// Top-κ training rows by |r| with the metadata distances need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PoolRepr")]
pub struct HighResidualPool {
    pub feature_names: Vec<String>,
    /// Dataset row indices, in |r|-descending order.
    pub rows: Vec<usize>,
    pub x: Matrix,
    pub y: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub r: Vec<f64>,
    /// Standardization fitted on the training rows.
    pub stats: ScalerStats,
    pub d95: f64,
    pub sigma_s: f64,
    pub gamma_s: f64,
    #[serde(skip)]
    z: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct PoolRepr {
    feature_names: Vec<String>,
    rows: Vec<usize>,
    x: Matrix,
    y: Vec<f64>,
    y_hat: Vec<f64>,
    r: Vec<f64>,
    stats: ScalerStats,
    d95: f64,
    sigma_s: f64,
    gamma_s: f64,
}

impl From<PoolRepr> for HighResidualPool {
    fn from(p: PoolRepr) -> Self {
        let mut pool = Self {
            feature_names: p.feature_names,
            rows: p.rows,
            x: p.x,
            y: p.y,
            y_hat: p.y_hat,
            r: p.r,
            stats: p.stats,
            d95: p.d95,
            sigma_s: p.sigma_s,
            gamma_s: p.gamma_s,
            z: Vec::new(),
        };
        pool.rebuild();
        pool
    }
}

pub fn pool_size(kappa: f64, n_train: usize) -> usize {
    ((kappa * n_train as f64).floor() as usize).max(1)
}

pub fn select_pool(
    table: &ResidualTable,
    kappa: f64,
    dataset: &Dataset,
    gamma_s: f64,
) -> Result<HighResidualPool, ResidualError> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(ResidualError::Kappa(kappa));
    }
    let stats = fit_scaler(dataset.features(), &table.rows, ScalerKind::Standardize, "train")?;
    let size = pool_size(kappa, table.rows.len()).min(table.rows.len());
    let picked = &table.order[..size];
    let rows: Vec<usize> = picked.iter().map(|&p| table.rows[p]).collect();
    HighResidualPool::new(
        dataset.feature_names().to_vec(),
        rows.clone(),
        dataset.features().select_rows(&rows),
        dataset.select_targets(&rows),
        picked.iter().map(|&p| table.predictions[p]).collect(),
        picked.iter().map(|&p| table.residuals[p]).collect(),
        stats,
        gamma_s,
    )
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nearest-rank percentile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    let rank = ((pct / 100.0) * n as f64).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

impl HighResidualPool {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<usize>,
        x: Matrix,
        y: Vec<f64>,
        y_hat: Vec<f64>,
        r: Vec<f64>,
        stats: ScalerStats,
        gamma_s: f64,
    ) -> Result<Self, ResidualError> {
        if !(gamma_s > 0.0) {
            return Err(ResidualError::GammaS(gamma_s));
        }
        let mut pool = Self {
            feature_names,
            rows,
            x,
            y,
            y_hat,
            r,
            stats,
            d95: 1.0,
            sigma_s: 0.0,
            gamma_s,
            z: Vec::new(),
        };
        pool.rebuild();
        let mut pair: Vec<f64> = Vec::new();
        for i in 0..pool.z.len() {
            for j in i + 1..pool.z.len() {
                pair.push(dist(&pool.z[i], &pool.z[j]));
            }
        }
        pair.sort_by(f64::total_cmp);
        if !pair.is_empty() {
            let d95 = nearest_rank(&pair, 95.0);
            pool.d95 = if d95 > 0.0 { d95 } else { 1.0 };
            pool.sigma_s = median(&pair);
        }
        if pool.sigma_s == 0.0 && pool.len() > 1 {
            log::warn!("all pool points coincide; example-scoring kernel set to 1");
        }
        Ok(pool)
    }

    fn rebuild(&mut self) {
        self.z = self.x.iter_rows().map(|r| self.stats.transform_row(r)).collect();
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Raw (unclipped) min standardized distance to the pool; `x` is in
    /// the pool's feature order.
    pub fn raw_distance(&self, x: &[f64]) -> f64 {
        let q = self.stats.transform_row(x);
        self.z.iter().map(|p| dist(p, &q)).fold(f64::INFINITY, f64::min)
    }

    /// min(d̃ / D95, 1).
    pub fn query_distance(&self, x: &[f64]) -> f64 {
        (self.raw_distance(x) / self.d95).min(1.0)
    }

    /// Greedy anchor batches; each entry is a list of pool positions.
    pub fn score_examples(&self, batch_size: usize) -> Result<Vec<Vec<usize>>, ResidualError> {
        if batch_size == 0 {
            return Err(ResidualError::BatchSize);
        }
        let n = self.len();
        let mut taken = vec![false; n];
        let mut batches = Vec::new();
        let two_s2 = 2.0 * self.sigma_s * self.sigma_s;
        let mut left = n;
        while left > 0 {
            let anchor = (0..n)
                .filter(|&i| !taken[i])
                .max_by(|&a, &b| {
                    self.r[a]
                        .abs()
                        .total_cmp(&self.r[b].abs())
                        .then(self.rows[b].cmp(&self.rows[a]))
                })
                .expect("pool not exhausted");
            let mut scored: Vec<(usize, f64)> = (0..n)
                .filter(|&i| !taken[i])
                .map(|i| {
                    let kernel = if two_s2 > 0.0 {
                        let d = dist(&self.z[anchor], &self.z[i]);
                        (-(d * d) / two_s2).exp()
                    } else {
                        1.0
                    };
                    (i, kernel * self.r[i].abs().powf(self.gamma_s))
                })
                .collect();
            scored.sort_by(|a, b| {
                (b.0 == anchor)
                    .cmp(&(a.0 == anchor))
                    .then(b.1.total_cmp(&a.1))
                    .then(self.rows[a.0].cmp(&self.rows[b.0]))
            });
            let batch: Vec<usize> = scored.iter().take(batch_size).map(|s| s.0).collect();
            for &i in &batch {
                taken[i] = true;
            }
            left -= batch.len();
            batches.push(batch);
        }
        Ok(batches)
    }

    /// CSV text of the given pool positions: features, y, y_hat, residual.
    pub fn table_text(&self, positions: &[usize], names: &[String]) -> String {
        let mut s = names.join(",");
        s.push_str(",y,y_hat,residual\n");
        for &p in positions {
            let row: Vec<String> = self.x.row(p).iter().map(|v| fmt_num(*v)).collect();
            s.push_str(&row.join(","));
            s.push_str(&format!(
                ",{},{},{}\n",
                fmt_num(self.y[p]),
                fmt_num(self.y_hat[p]),
                fmt_num(self.r[p])
            ));
        }
        s
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<(), DataError> {
        let all: Vec<usize> = (0..self.len()).collect();
        std::fs::write(path, self.table_text(&all, &self.feature_names))?;
        Ok(())
    }
}

pub fn fmt_num(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{fit, BaseKind, FrozenPredictions};
    use crate::data::Task;
    use std::collections::BTreeMap;

    fn ds(x: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
        let d = x[0].len();
        Dataset::new(
            Matrix::from_rows(&x).unwrap(),
            (0..d).map(|j| format!("x{j}")).collect(),
            y,
            Task::Regression,
        )
        .unwrap()
    }

    fn frozen(vals: &[f64]) -> BaseModel {
        let m: BTreeMap<u64, f64> = vals.iter().enumerate().map(|(i, v)| (i as u64, *v)).collect();
        BaseModel::Frozen(FrozenPredictions::regression(m, "test"))
    }

    #[test]
    fn worked_example_residual() {
        let d = ds(vec![vec![0.8]], vec![0.72]);
        let t = residuals(&frozen(&[0.58]), &d, &[0]).unwrap();
        assert!((t.residuals[0] - 0.14).abs() < 1e-12);
    }

    #[test]
    fn classification_residuals() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let d = Dataset::new(x, vec!["x".into()], vec![1.0, 2.0], Task::Classification { num_classes: 2 }).unwrap();
        let probs: BTreeMap<u64, Vec<f64>> = [(0, vec![0.9, 0.1]), (1, vec![0.7, 0.3])].into_iter().collect();
        let m = BaseModel::Frozen(FrozenPredictions::classification(probs, 2, "t").unwrap());
        let t = residuals(&m, &d, &[0, 1]).unwrap();
        assert_eq!(t.residuals[0], 0.0);
        assert!((t.residuals[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn pool_size_and_ties() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let d = ds(x, vec![1.0; 10]);
        let t = residuals(&frozen(&[0.0; 10]), &d, &(0..10).collect::<Vec<_>>()).unwrap();
        let p = select_pool(&t, 0.3, &d, 1.0).unwrap();
        assert_eq!(p.rows, vec![0, 1, 2]);
        assert!(select_pool(&t, 0.0, &d, 1.0).is_err());
        assert_eq!(select_pool(&t, 0.01, &d, 1.0).unwrap().len(), 1);
    }

    #[test]
    fn exact_fit_still_fills_pool() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let d = ds(x, (0..10).map(|i| 3.0 * i as f64).collect());
        let all: Vec<usize> = (0..10).collect();
        let m = fit(&BaseKind::Linear, &d, &all).unwrap();
        let t = residuals(&m, &d, &all).unwrap();
        assert!(t.residuals.iter().all(|r| r.abs() < 1e-9));
        assert_eq!(select_pool(&t, 0.5, &d, 1.0).unwrap().len(), 5);
    }

    #[test]
    fn two_point_distance() {
        let d = ds(vec![vec![0.0], vec![1.0]], vec![1.0, 0.0]);
        let t = residuals(&frozen(&[0.0, 0.0]), &d, &[0, 1]).unwrap();
        let p = select_pool(&t, 1.0, &d, 1.0).unwrap();
        assert!((p.query_distance(&[0.4]) - 0.4).abs() < 1e-12);
        assert_eq!(p.query_distance(&[0.0]), 0.0);
        assert_eq!(p.query_distance(&[100.0]), 1.0);
    }

    #[test]
    fn singleton_pool_d95_is_one() {
        let d = ds(vec![vec![0.0], vec![2.0]], vec![5.0, 0.0]);
        let t = residuals(&frozen(&[0.0, 0.0]), &d, &[0, 1]).unwrap();
        let p = select_pool(&t, 0.5, &d, 1.0).unwrap();
        assert_eq!(p.d95, 1.0);
        assert!((p.raw_distance(&[1.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serde_round_trip_keeps_distances() {
        let d = ds(vec![vec![0.0], vec![1.0], vec![3.0]], vec![1.0, 2.0, 0.5]);
        let t = residuals(&frozen(&[0.0; 3]), &d, &[0, 1, 2]).unwrap();
        let p = select_pool(&t, 1.0, &d, 1.0).unwrap();
        let back: HighResidualPool = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.query_distance(&[2.2]), p.query_distance(&[2.2]));
    }

    #[test]
    fn nearest_rank_rule() {
        let v: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        assert_eq!(nearest_rank(&v, 95.0), 19.0);
        assert_eq!(nearest_rank(&[3.0], 95.0), 3.0);
    }

    #[test]
    fn kernel_batches() {
        let d = ds(vec![vec![0.0], vec![1.0], vec![2.0]], vec![3.0, 1.0, 2.0]);
        let t = residuals(&frozen(&[0.0; 3]), &d, &[0, 1, 2]).unwrap();
        let p = select_pool(&t, 1.0, &d, 1.0).unwrap();
        // pool order is by |r|: rows 0, 2, 1
        assert_eq!(p.rows, vec![0, 2, 1]);
        let b = p.score_examples(3).unwrap();
        let rows: Vec<usize> = b[0].iter().map(|&i| p.rows[i]).collect();
        assert_eq!(rows, vec![0, 1, 2]);
        let b = p.score_examples(1).unwrap();
        assert_eq!(b.len(), 3);
        assert!(p.score_examples(0).is_err());
    }

    #[test]
    fn identical_points_kernel_one() {
        let d = ds(vec![vec![1.0]; 4], vec![1.0, 4.0, 2.0, 3.0]);
        let t = residuals(&frozen(&[0.0; 4]), &d, &[0, 1, 2, 3]).unwrap();
        let p = select_pool(&t, 1.0, &d, 1.0).unwrap();
        assert_eq!(p.sigma_s, 0.0);
        assert_eq!(p.d95, 1.0);
        let rows: Vec<usize> = p.score_examples(4).unwrap()[0].iter().map(|&i| p.rows[i]).collect();
        assert_eq!(rows, vec![1, 3, 2, 0]);
    }
}
