use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::AgentConfig;
use super::AgentError;
use crate::base::BaseModel;
use crate::data::{anonymized_names, Dataset};
use crate::residual::HighResidualPool;

/// Everything the encoder sees besides the prompt template.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedContext {
    pub feature_names: Vec<String>,
    pub features_text: String,
    pub domain: Option<String>,
    pub base_digest: String,
    /// Pool positions per batch, in scoring order.
    pub batches: Vec<Vec<usize>>,
    pub batch_tables: Vec<String>,
}

pub fn build_context(
    dataset: &Dataset,
    pool: &HighResidualPool,
    config: &AgentConfig,
    base: &BaseModel,
) -> Result<AugmentedContext, AgentError> {
    let names = dataset.feature_names().to_vec();
    let batches = pool.score_examples(config.b)?;
    let batch_tables = batches.iter().map(|b| pool.table_text(b, &names)).collect();
    let mut features_text = String::new();
    for (j, n) in names.iter().enumerate() {
        let line = match config.feature_descriptions.get(n) {
            Some(d) => format!("- {n}: {d}\n"),
            None => format!(
                "- {n}: numeric (training mean {:.4}, std {:.4})\n",
                pool.stats.location[j], pool.stats.scale[j]
            ),
        };
        features_text.push_str(&line);
    }
    let domain = if config.include_domain_context {
        config.domain_context.clone().filter(|d| !d.trim().is_empty())
    } else {
        None
    };
    Ok(AugmentedContext {
        feature_names: names,
        features_text,
        domain,
        base_digest: base.digest(),
        batches,
        batch_tables,
    })
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Replaces whole-word occurrences of each original name by its alias.
pub fn scrub(text: &str, aliases: &[(String, String)]) -> String {
    let mut sorted: Vec<&(String, String)> = aliases.iter().collect();
    sorted.sort_by_key(|(o, _)| std::cmp::Reverse(o.len()));
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    'outer: while i < text.len() {
        let prev = text[..i].chars().next_back();
        if prev.is_none_or(|c| !is_word(c)) {
            for (orig, alias) in &sorted {
                if !orig.is_empty() && text[i..].starts_with(orig.as_str()) {
                    let next = text[i + orig.len()..].chars().next();
                    if next.is_none_or(|c| !is_word(c)) {
                        out.push_str(alias);
                        i += orig.len();
                        continue 'outer;
                    }
                }
            }
        }
        let c = text[i..].chars().next().unwrap();
        out.push(c);
        i += c.len_utf8();
    }
    out
}

/// Renames features to `feat_0..` and scrubs the original names from the
/// domain text and feature descriptions. Returns (original, alias) pairs.
pub fn anonymize(dataset: &Dataset, config: &AgentConfig) -> Result<(Dataset, AgentConfig, Vec<(String, String)>), AgentError> {
    let aliases: Vec<(String, String)> = dataset
        .feature_names()
        .iter()
        .cloned()
        .zip(anonymized_names(dataset.num_features()))
        .collect();
    let ds = dataset.with_feature_names(aliases.iter().map(|(_, a)| a.clone()).collect())?;
    let mut cfg = config.clone();
    cfg.anonymize_features = true;
    cfg.domain_context = cfg.domain_context.map(|d| scrub(&d, &aliases));
    cfg.feature_descriptions = cfg
        .feature_descriptions
        .iter()
        .map(|(k, v)| {
            let key = aliases.iter().find(|(o, _)| o == k).map_or(k.clone(), |(_, a)| a.clone());
            (key, scrub(v, &aliases))
        })
        .collect::<BTreeMap<_, _>>();
    Ok((ds, cfg, aliases))
}

/// Structured fields of an encoder response; free text is kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub text: String,
    pub hypothesised_pattern: Option<String>,
    pub implicated_features: Vec<String>,
    pub functional_form_guess: Option<String>,
    pub rationale: Option<String>,
}

impl Hypothesis {
    pub fn parse(text: &str, names: &[String]) -> Self {
        let field = |key: &str| {
            text.lines().find_map(|l| {
                l.trim_start_matches([' ', '-', '*'])
                    .strip_prefix(key)
                    .and_then(|r| r.trim_start().strip_prefix(':'))
                    .map(|v| v.trim().to_string())
            })
        };
        let implicated_features = field("implicated_features")
            .map(|v| {
                v.trim_matches(|c| c == '[' || c == ']')
                    .split(',')
                    .map(|s| s.trim().trim_matches(['"', '\'', '`']).to_string())
                    .filter(|s| {
                        let known = names.contains(s);
                        if !known && !s.is_empty() {
                            log::debug!("hypothesis names unknown feature `{s}`");
                        }
                        known
                    })
                    .collect()
            })
            .unwrap_or_default();
        Self {
            text: text.to_string(),
            hypothesised_pattern: field("hypothesised_pattern"),
            implicated_features,
            functional_form_guess: field("functional_form_guess"),
            rationale: field("rationale"),
        }
    }
}
