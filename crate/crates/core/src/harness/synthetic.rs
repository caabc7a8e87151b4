use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::base::{fit, BaseKind};
use crate::data::{make_split, regression_metrics, Dataset, Matrix, Split, SplitSpec, Task};
use crate::formula::sigmoid;

/// Coefficients of
/// `Y = lin1*X1 + lin2*X2 + amp*sigmoid(a*X1*X3 + c) + sin_amp*sin(X5*X7) + eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedTerms {
    pub lin1: f64,
    pub lin2: f64,
    pub amp: f64,
    pub a: f64,
    pub c: f64,
    pub sin_amp: f64,
}

impl Default for PlantedTerms {
    fn default() -> Self {
        Self {
            lin1: 0.6,
            lin2: 0.4,
            amp: 2.5,
            a: 1.8,
            c: -1.2,
            sin_amp: 0.3,
        }
    }
}

impl PlantedTerms {
    pub fn linear(&self, x: &[f64]) -> f64 {
        self.lin1 * x[0] + self.lin2 * x[1]
    }

    pub fn sigmoid_term(&self, x: &[f64]) -> f64 {
        self.amp * sigmoid(self.a * x[0] * x[2] + self.c)
    }

    pub fn sin_term(&self, x: &[f64]) -> f64 {
        self.sin_amp * (x[4] * x[6]).sin()
    }

    /// Noiseless signal.
    pub fn signal(&self, x: &[f64]) -> f64 {
        self.linear(x) + self.nonlinear(x)
    }

    pub fn nonlinear(&self, x: &[f64]) -> f64 {
        self.sigmoid_term(x) + self.sin_term(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub noise_std: f64,
    pub terms: PlantedTerms,
    pub fractions: [f64; 3],
    pub seeds: Vec<u64>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            d: 8,
            noise_std: 0.1,
            terms: PlantedTerms::default(),
            fractions: [0.6, 0.2, 0.2],
            seeds: (0..5).collect(),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.d < 7 {
            return Err(HarnessError::Config(format!("d = {} but the planted terms use X1..X7", self.d)));
        }
        if self.n < 10 {
            return Err(HarnessError::Config(format!("n = {} is too small", self.n)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(HarnessError::Config(format!("noise_std = {}", self.noise_std)));
        }
        Ok(())
    }

    pub fn feature_names(&self) -> Vec<String> {
        (1..=self.d).map(|j| format!("X{j}")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub split: Split,
    pub seed: u64,
}

/// Draws features iid U(0,1) and raw (unclipped) targets, then splits with
/// the same seed.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData, HarnessError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(spec.n * spec.d);
    for _ in 0..spec.n * spec.d {
        data.push(rng.random::<f64>());
    }
    let x = Matrix::new(spec.n, spec.d, data)?;
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| HarnessError::Config(e.to_string()))?;
    let y: Vec<f64> = x.iter_rows().map(|r| spec.terms.signal(r) + noise.sample(&mut rng)).collect();
    let dataset = Dataset::new(x, spec.feature_names(), y, Task::Regression)?;
    let [tr, va, te] = spec.fractions;
    let split = make_split(&dataset, &SplitSpec::new(tr, va, te, seed))?;
    Ok(SyntheticData { dataset, split, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceBudget {
    pub draws: usize,
    pub linear: f64,
    pub sigmoid: f64,
    pub sin: f64,
    /// `noise_std^2`, analytic.
    pub noise: f64,
    pub signal: f64,
    pub total: f64,
    /// Population R² attainable by the noiseless signal.
    pub ceiling: f64,
}

/// Monte-Carlo variance of each additive term under U(0,1) features.
pub fn variance_budget(spec: &SyntheticSpec, n_mc: usize, seed: u64) -> Result<VarianceBudget, HarnessError> {
    spec.validate()?;
    if n_mc < 100_000 {
        return Err(HarnessError::Config(format!("n_mc = {n_mc}; at least 1e5 draws are required")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = [Welford::default(); 4];
    let mut x = vec![0.0; spec.d];
    for _ in 0..n_mc {
        for v in x.iter_mut() {
            *v = rng.random::<f64>();
        }
        let t = &spec.terms;
        let parts = [t.linear(&x), t.sigmoid_term(&x), t.sin_term(&x)];
        for (a, p) in acc.iter_mut().zip(parts) {
            a.push(p);
        }
        acc[3].push(parts.iter().sum());
    }
    let noise = spec.noise_std * spec.noise_std;
    let signal = acc[3].variance();
    Ok(VarianceBudget {
        draws: n_mc,
        linear: acc[0].variance(),
        sigmoid: acc[1].variance(),
        sin: acc[2].variance(),
        noise,
        signal,
        total: signal + noise,
        ceiling: signal / (signal + noise),
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
    }

    fn variance(&self) -> f64 {
        self.m2 / self.n
    }
}

/// Test-split scores of the linear base and of the oracle correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub seed: u64,
    pub linear_r2: f64,
    pub oracle_r2: f64,
    /// Test residual variance of the oracle divided by `noise_std^2`.
    pub oracle_noise_ratio: f64,
}

/// The oracle knows the planted nonlinear terms exactly (including the sin
/// term, which the formula language cannot express) and fits only the
/// linear part: `y_hat = OLS(X -> y - g(X)) + g(X)`.
pub fn oracle_eval(spec: &SyntheticSpec, data: &SyntheticData) -> Result<OracleReport, HarnessError> {
    let ds = &data.dataset;
    let train = &data.split.train;
    let test = &data.split.test;
    let y_test = ds.select_targets(test);

    let base = fit(&BaseKind::Linear, ds, train)?;
    let lin = base.predict_rows(ds, test)?.values;
    let linear_r2 = regression_metrics(&y_test, &lin)?.r2.unwrap_or(f64::NAN);

    let g: Vec<f64> = ds.features().iter_rows().map(|r| spec.terms.nonlinear(r)).collect();
    let stripped = ds.with_targets(ds.targets().iter().zip(&g).map(|(y, g)| y - g).collect())?;
    let part = fit(&BaseKind::Linear, &stripped, train)?;
    let lin_part = part.predict_rows(&stripped, test)?.values;
    let oracle: Vec<f64> = test.iter().zip(&lin_part).map(|(&i, l)| l + g[i]).collect();
    let oracle_r2 = regression_metrics(&y_test, &oracle)?.r2.unwrap_or(f64::NAN);
    let resid: Vec<f64> = y_test.iter().zip(&oracle).map(|(y, p)| y - p).collect();
    let mean = resid.iter().sum::<f64>() / resid.len() as f64;
    let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / resid.len() as f64;
    let noise = spec.noise_std * spec.noise_std;
    Ok(OracleReport {
        seed: data.seed,
        linear_r2,
        oracle_r2,
        oracle_noise_ratio: if noise > 0.0 { var / noise } else { f64::NAN },
    })
}
