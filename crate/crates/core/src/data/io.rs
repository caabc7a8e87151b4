//! CSV loading. The header row names the features; the last column is the
//! target. A leading `row_id` column, when present, supplies row identifiers.
//! Task kind comes from an optional sidecar JSON (`data.csv` -> `data.json`).

use super::{DataError, Dataset, Matrix, Task};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const ROW_ID_COLUMN: &str = "row_id";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSidecar {
    pub task: String,
    #[serde(default)]
    pub num_classes: Option<usize>,
}

impl TaskSidecar {
    pub fn to_task(&self) -> Result<Task, DataError> {
        match self.task.as_str() {
            "regression" => Ok(Task::Regression),
            "classification" => {
                let num_classes = self.num_classes.ok_or_else(|| {
                    DataError::Parse("classification sidecar needs num_classes".into())
                })?;
                Ok(Task::Classification { num_classes })
            }
            other => Err(DataError::Parse(format!("unknown task kind `{other}`"))),
        }
    }
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Reads the sidecar next to `csv`, if one exists.
pub fn read_sidecar(csv: &Path) -> Result<Option<Task>, DataError> {
    let path = sidecar_path(csv);
    if !path.exists() {
        return Ok(None);
    }
    let sidecar: TaskSidecar = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    sidecar.to_task().map(Some)
}

/// Loads a dataset, taking the task from the sidecar or defaulting to regression.
pub fn load_csv(path: &Path) -> Result<Dataset, DataError> {
    let task = read_sidecar(path)?.unwrap_or(Task::Regression);
    load_csv_with_task(path, task)
}

pub fn load_csv_with_task(path: &Path, task: Task) -> Result<Dataset, DataError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let has_ids = headers.first().map(String::as_str) == Some(ROW_ID_COLUMN);
    let first = usize::from(has_ids);
    if headers.len() < first + 2 {
        return Err(DataError::Parse(
            "CSV needs at least one feature column and a target column".into(),
        ));
    }
    let feature_names = headers[first..headers.len() - 1].to_vec();
    let d = feature_names.len();
    let mut data = Vec::new();
    let mut targets = Vec::new();
    let mut row_ids = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(DataError::Parse(format!(
                "row {i}: {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        if has_ids {
            row_ids.push(parse_id(&record[0], i)?);
        } else {
            row_ids.push(i as u64);
        }
        for field in record.iter().skip(first).take(d) {
            data.push(parse_num(field, i)?);
        }
        targets.push(parse_num(&record[headers.len() - 1], i)?);
    }
    let n = targets.len();
    Dataset::with_row_ids(Matrix::new(n, d, data)?, feature_names, targets, task, row_ids)
}

/// A feature-only table pulled from a CSV by column name.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub features: Matrix,
    pub row_ids: Vec<u64>,
    /// Values of `target_column`, when requested and present.
    pub targets: Option<Vec<f64>>,
}

/// Selects `names` (in that order) from a CSV. Missing columns are reported together.
pub fn read_feature_table(
    path: &Path,
    names: &[String],
    target_column: Option<&str>,
) -> Result<FeatureTable, DataError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let position = |name: &str| headers.iter().position(|h| h == name);
    let missing: Vec<String> = names
        .iter()
        .filter(|n| position(n).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(DataError::MissingColumns(missing));
    }
    let cols: Vec<usize> = names.iter().filter_map(|n| position(n)).collect();
    let id_col = position(ROW_ID_COLUMN);
    let target_col = target_column.and_then(position);
    let mut data = Vec::new();
    let mut row_ids = Vec::new();
    let mut targets = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        for &c in &cols {
            let v = parse_num(record.get(c).unwrap_or(""), i)?;
            if !v.is_finite() {
                return Err(DataError::NonFinite { row: i, col: c });
            }
            data.push(v);
        }
        row_ids.push(match id_col {
            Some(c) => parse_id(record.get(c).unwrap_or(""), i)?,
            None => i as u64,
        });
        if let Some(c) = target_col {
            targets.push(parse_num(record.get(c).unwrap_or(""), i)?);
        }
    }
    Ok(FeatureTable {
        features: Matrix::new(row_ids.len(), cols.len(), data)?,
        row_ids,
        targets: target_col.map(|_| targets),
    })
}

/// Writes a dataset in the loader's layout (with a `row_id` column).
pub fn write_csv(dataset: &Dataset, path: &Path, target_name: &str) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![ROW_ID_COLUMN.to_string()];
    header.extend(dataset.feature_names().iter().cloned());
    header.push(target_name.to_string());
    w.write_record(&header)?;
    for i in 0..dataset.len() {
        let mut rec = vec![dataset.row_ids()[i].to_string()];
        rec.extend(dataset.features().row(i).iter().map(|v| v.to_string()));
        rec.push(dataset.targets()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sidecar(task: Task, csv: &Path) -> Result<(), DataError> {
    let sidecar = match task {
        Task::Regression => TaskSidecar {
            task: "regression".into(),
            num_classes: None,
        },
        Task::Classification { num_classes } => TaskSidecar {
            task: "classification".into(),
            num_classes: Some(num_classes),
        },
    };
    std::fs::write(sidecar_path(csv), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

fn parse_num(field: &str, row: usize) -> Result<f64, DataError> {
    let field = field.trim();
    if field.is_empty() {
        return Err(DataError::Parse(format!("row {row}: missing value")));
    }
    field
        .parse::<f64>()
        .map_err(|_| DataError::Parse(format!("row {row}: `{field}` is not a number")))
}

fn parse_id(field: &str, row: usize) -> Result<u64, DataError> {
    field
        .trim()
        .parse::<u64>()
        .map_err(|_| DataError::Parse(format!("row {row}: bad row id `{field}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn loads_with_sidecar_and_rejects_missing_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zoo.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "hair,milk,class\n1,1,1\n0,0,2").unwrap();
        std::fs::write(
            dir.path().join("zoo.json"),
            r#"{"task":"classification","num_classes":2}"#,
        )
        .unwrap();
        let d = load_csv(&path).unwrap();
        assert_eq!(d.task(), Task::Classification { num_classes: 2 });
        assert_eq!(d.feature_names(), &["hair", "milk"]);
        assert_eq!(d.class_index(1), 1);

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "a,y\n1,\n").unwrap();
        assert!(matches!(load_csv(&bad), Err(DataError::Parse(_))));
    }

    #[test]
    fn feature_table_names_missing_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        std::fs::write(&path, "row_id,b,a\n7,2,1\n").unwrap();
        let t = read_feature_table(&path, &["a".into(), "b".into()], None).unwrap();
        assert_eq!(t.features.row(0), &[1.0, 2.0]);
        assert_eq!(t.row_ids, vec![7]);
        let err = read_feature_table(&path, &["a".into(), "c".into(), "z".into()], None);
        match err {
            Err(DataError::MissingColumns(m)) => assert_eq!(m, vec!["c", "z"]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
