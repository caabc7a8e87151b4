//! Model bundle on disk: `mechanisms.txt` plus `bundle.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mechanism::Mechanism;
use super::model::{EnsembleModel, Hyper, RetainedMechanism};
use super::score::RegressionBounds;
use super::EnsembleError;
use crate::base::BaseModel;
use crate::data::Task;
use crate::formula::{parse_mechanism_file, render_mechanism_file};
use crate::residual::HighResidualPool;

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;
pub const MECHANISMS_FILE: &str = "mechanisms.txt";
pub const BUNDLE_FILE: &str = "bundle.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EntryMeta {
    agent: usize,
    p: f64,
    tau_k: f64,
    iteration: usize,
    pool: HighResidualPool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BundleMeta {
    schema_version: u32,
    feature_names: Vec<String>,
    task: Task,
    hyper: Hyper,
    bounds: Option<RegressionBounds>,
    base: BaseModel,
    mechanisms: Vec<EntryMeta>,
}

pub fn save_bundle(model: &EnsembleModel, dir: &Path) -> Result<(), EnsembleError> {
    std::fs::create_dir_all(dir)?;
    let blocks: Vec<_> = model.mechanisms.iter().map(|m| m.mechanism.to_block()).collect();
    std::fs::write(dir.join(MECHANISMS_FILE), render_mechanism_file(&blocks))?;
    let meta = BundleMeta {
        schema_version: BUNDLE_SCHEMA_VERSION,
        feature_names: model.feature_names.clone(),
        task: model.task,
        hyper: model.hyper,
        bounds: model.bounds,
        base: model.base.clone(),
        mechanisms: model
            .mechanisms
            .iter()
            .map(|m| EntryMeta {
                agent: m.mechanism.agent,
                p: m.p,
                tau_k: m.tau_k,
                iteration: m.iteration,
                pool: m.pool.clone(),
            })
            .collect(),
    };
    std::fs::write(dir.join(BUNDLE_FILE), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<EnsembleModel, EnsembleError> {
    let meta: BundleMeta = serde_json::from_str(&std::fs::read_to_string(dir.join(BUNDLE_FILE))?)?;
    if meta.schema_version != BUNDLE_SCHEMA_VERSION {
        return Err(EnsembleError::Bundle(format!(
            "unsupported bundle schema version {}",
            meta.schema_version
        )));
    }
    let blocks = parse_mechanism_file(&std::fs::read_to_string(dir.join(MECHANISMS_FILE))?)?;
    if blocks.len() != meta.mechanisms.len() {
        return Err(EnsembleError::Bundle(format!(
            "{} mechanisms in {MECHANISMS_FILE}, {} in {BUNDLE_FILE}",
            blocks.len(),
            meta.mechanisms.len()
        )));
    }
    let mut mechanisms = Vec::new();
    for (block, e) in blocks.iter().zip(meta.mechanisms) {
        if block.id != e.agent {
            return Err(EnsembleError::Bundle(format!(
                "mechanism order mismatch: {} vs {}",
                block.id, e.agent
            )));
        }
        mechanisms.push(RetainedMechanism {
            mechanism: Mechanism::from_block(block, &meta.feature_names)?,
            p: e.p,
            tau_k: e.tau_k,
            iteration: e.iteration,
            pool: e.pool,
        });
    }
    Ok(EnsembleModel {
        base: meta.base,
        feature_names: meta.feature_names,
        task: meta.task,
        mechanisms,
        hyper: meta.hyper,
        bounds: meta.bounds,
    })
}
