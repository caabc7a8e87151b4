use super::{DataError, Matrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerKind {
    /// Zero mean, unit population standard deviation.
    Standardize,
    /// Min-max to `[0, 1]`.
    MinMax01,
    /// Min-max to `[0.01, 0.99]`.
    MinMax010,
}

const LOW_010: f64 = 0.01;
const SPAN_010: f64 = 0.98;

/// Per-feature location/scale fitted on one split.
///
/// Constant columns get `location = value`, `scale = 1` and map to a fixed
/// output (0 for standardize, the range midpoint for min-max kinds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub kind: ScalerKind,
    pub location: Vec<f64>,
    pub scale: Vec<f64>,
    pub constant: Vec<bool>,
    pub fitted_on: String,
}

pub fn fit_scaler(
    features: &Matrix,
    rows: &[usize],
    kind: ScalerKind,
    fitted_on: &str,
) -> Result<ScalerStats, DataError> {
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let d = features.cols();
    let n = rows.len() as f64;
    let mut location = Vec::with_capacity(d);
    let mut scale = Vec::with_capacity(d);
    let mut constant = Vec::with_capacity(d);
    for j in 0..d {
        let col = rows.iter().map(|&i| features.get(i, j));
        let (lo, hi) = col
            .clone()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if lo == hi {
            location.push(lo);
            scale.push(1.0);
            constant.push(true);
            continue;
        }
        constant.push(false);
        match kind {
            ScalerKind::Standardize => {
                let mean = col.clone().sum::<f64>() / n;
                let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                location.push(mean);
                scale.push(var.sqrt());
            }
            ScalerKind::MinMax01 | ScalerKind::MinMax010 => {
                location.push(lo);
                scale.push(hi - lo);
            }
        }
    }
    Ok(ScalerStats {
        kind,
        location,
        scale,
        constant,
        fitted_on: fitted_on.to_string(),
    })
}

impl ScalerStats {
    /// Identity transform over `d` features (location 0, scale 1).
    pub fn identity(d: usize) -> Self {
        Self {
            kind: ScalerKind::Standardize,
            location: vec![0.0; d],
            scale: vec![1.0; d],
            constant: vec![false; d],
            fitted_on: "identity".into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    pub fn transform_value(&self, j: usize, v: f64) -> f64 {
        if self.constant[j] {
            return match self.kind {
                ScalerKind::Standardize => 0.0,
                ScalerKind::MinMax01 | ScalerKind::MinMax010 => 0.5,
            };
        }
        let z = (v - self.location[j]) / self.scale[j];
        match self.kind {
            ScalerKind::Standardize | ScalerKind::MinMax01 => z,
            ScalerKind::MinMax010 => LOW_010 + SPAN_010 * z,
        }
    }

    pub fn inverse_value(&self, j: usize, v: f64) -> f64 {
        if self.constant[j] {
            return self.location[j];
        }
        let z = match self.kind {
            ScalerKind::Standardize | ScalerKind::MinMax01 => v,
            ScalerKind::MinMax010 => (v - LOW_010) / SPAN_010,
        };
        self.location[j] + z * self.scale[j]
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| self.transform_value(j, v))
            .collect()
    }

    pub fn apply(&self, m: &Matrix) -> Result<Matrix, DataError> {
        self.map(m, Self::transform_value)
    }

    pub fn inverse(&self, m: &Matrix) -> Result<Matrix, DataError> {
        self.map(m, Self::inverse_value)
    }

    fn map(&self, m: &Matrix, f: fn(&Self, usize, f64) -> f64) -> Result<Matrix, DataError> {
        if m.cols() != self.dim() {
            return Err(DataError::Shape(format!(
                "scaler fitted on {} features, matrix has {}",
                self.dim(),
                m.cols()
            )));
        }
        let mut out = m.clone();
        for i in 0..m.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = f(self, j, *v);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> Matrix {
        Matrix::new(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn minmax010_endpoints() {
        let m = col(&[0.0, 1.0]);
        let s = fit_scaler(&m, &[0, 1], ScalerKind::MinMax010, "train").unwrap();
        let out = s.apply(&m).unwrap();
        assert_eq!(out.column(0), vec![0.01, 0.99]);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let m = col(&[2.0, 2.0, 2.0]);
        let s = fit_scaler(&m, &[0, 1, 2], ScalerKind::Standardize, "train").unwrap();
        assert_eq!(s.apply(&m).unwrap().column(0), vec![0.0; 3]);
        assert_eq!((s.location[0], s.scale[0]), (2.0, 1.0));
        let s = fit_scaler(&m, &[0, 1, 2], ScalerKind::MinMax010, "train").unwrap();
        assert_eq!(s.apply(&m).unwrap().column(0), vec![0.5; 3]);
    }

    #[test]
    fn standardize_uses_population_std() {
        // [1,2,3]: mean 2, population variance 2/3.
        let m = col(&[1.0, 2.0, 3.0]);
        let s = fit_scaler(&m, &[0, 1, 2], ScalerKind::Standardize, "train").unwrap();
        let sd = (2.0f64 / 3.0).sqrt();
        assert!((s.scale[0] - sd).abs() < 1e-15);
        let out = s.apply(&m).unwrap().column(0);
        let expected = [-1.0 / sd, 0.0, 1.0 / sd];
        for (a, b) in out.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fits_only_on_given_rows() {
        let m = col(&[0.0, 10.0, 1000.0]);
        let s = fit_scaler(&m, &[0, 1], ScalerKind::MinMax01, "train").unwrap();
        assert_eq!(s.apply(&m).unwrap().column(0), vec![0.0, 1.0, 100.0]);
    }
}
