use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BaseError, BasePrediction};
use crate::data::{DataError, Task, ROW_ID_COLUMN};

/// Predictions produced elsewhere, keyed by row id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenPredictions {
    task: Task,
    #[serde(with = "pairs")]
    values: BTreeMap<u64, f64>,
    #[serde(with = "pairs")]
    probs: BTreeMap<u64, Vec<f64>>,
    provenance: String,
}

// Integer map keys do not survive internally tagged enums in JSON.
mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<V: Serialize, S: Serializer>(m: &BTreeMap<u64, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u64, V>, D::Error> {
        Ok(Vec::<(u64, V)>::deserialize(d)?.into_iter().collect())
    }
}

impl FrozenPredictions {
    pub fn regression(values: BTreeMap<u64, f64>, provenance: &str) -> Self {
        Self {
            task: Task::Regression,
            values,
            probs: BTreeMap::new(),
            provenance: provenance.to_string(),
        }
    }

    pub fn classification(
        probs: BTreeMap<u64, Vec<f64>>,
        num_classes: usize,
        provenance: &str,
    ) -> Result<Self, BaseError> {
        let mut values = BTreeMap::new();
        for (id, p) in &probs {
            if p.len() != num_classes {
                return Err(BaseError::Frozen(format!("row {id}: {} probabilities for {num_classes} classes", p.len())));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > 1e-6 || p.iter().any(|v| !(0.0..=1.0 + 1e-12).contains(v)) {
                return Err(BaseError::Frozen(format!("row {id}: probabilities not on the simplex")));
            }
            values.insert(*id, (crate::data::argmax(p) + 1) as f64);
        }
        Ok(Self {
            task: Task::Classification { num_classes },
            values,
            probs,
            provenance: provenance.to_string(),
        })
    }

    /// CSV with `row_id,prediction[,prob_1..prob_C]`.
    pub fn load(path: &Path) -> Result<Self, BaseError> {
        let mut rdr = csv::Reader::from_path(path).map_err(DataError::from)?;
        let header: Vec<String> = rdr.headers().map_err(DataError::from)?.iter().map(|s| s.trim().to_string()).collect();
        if header.len() < 2 || header[0] != ROW_ID_COLUMN || header[1] != "prediction" {
            return Err(BaseError::Frozen(format!(
                "expected header `{ROW_ID_COLUMN},prediction[,prob_1..]`, got {header:?}"
            )));
        }
        let c = header.len() - 2;
        if c == 1 {
            return Err(BaseError::Frozen("need at least two probability columns".into()));
        }
        for (k, h) in header[2..].iter().enumerate() {
            if *h != format!("prob_{}", k + 1) {
                return Err(BaseError::Frozen(format!("unexpected column `{h}`")));
            }
        }
        let mut values = BTreeMap::new();
        let mut probs = BTreeMap::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(DataError::from)?;
            let num = |j: usize| -> Result<f64, BaseError> {
                rec.get(j)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| BaseError::Frozen(format!("line {}: bad number in column {}", n + 2, j + 1)))
            };
            let id: u64 = rec
                .get(0)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| BaseError::Frozen(format!("line {}: bad row id", n + 2)))?;
            if values.insert(id, num(1)?).is_some() {
                return Err(BaseError::Frozen(format!("duplicate row id {id}")));
            }
            if c > 0 {
                probs.insert(id, (2..2 + c).map(num).collect::<Result<Vec<_>, _>>()?);
            }
        }
        let provenance = path.display().to_string();
        if c == 0 {
            Ok(Self::regression(values, &provenance))
        } else {
            Self::classification(probs, c, &provenance)
        }
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lookup(&self, id: u64) -> Result<(f64, Option<&Vec<f64>>), BaseError> {
        let v = self.values.get(&id).ok_or(BaseError::MissingRow(id))?;
        Ok((*v, self.probs.get(&id)))
    }

    pub fn predict(&self, row_ids: &[u64]) -> Result<BasePrediction, BaseError> {
        let mut values = Vec::with_capacity(row_ids.len());
        let mut probs = Vec::new();
        for &id in row_ids {
            let (v, p) = self.lookup(id)?;
            values.push(v);
            if let Some(p) = p {
                probs.push(p.clone());
            }
        }
        Ok(BasePrediction {
            values,
            probs: self.task.is_classification().then_some(probs),
        })
    }
}
