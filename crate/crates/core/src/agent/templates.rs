use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::AgentError;

pub const TEMPLATE_NAMES: [&str; 5] = ["encoder_errors", "encoder_samples", "decoder", "critique", "refine"];

/// Prompt templates with `{placeholder}` slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub encoder_errors: String,
    pub encoder_samples: String,
    pub decoder: String,
    pub critique: String,
    pub refine: String,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            encoder_errors: include_str!("../../templates/encoder_errors.txt").into(),
            encoder_samples: include_str!("../../templates/encoder_samples.txt").into(),
            decoder: include_str!("../../templates/decoder.txt").into(),
            critique: include_str!("../../templates/critique.txt").into(),
            refine: include_str!("../../templates/refine.txt").into(),
        }
    }
}

impl Templates {
    /// Defaults, overridden by any `<name>.txt` present in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, AgentError> {
        let mut t = Self::default();
        for name in TEMPLATE_NAMES {
            let p = dir.join(format!("{name}.txt"));
            if p.exists() {
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| AgentError::Config(format!("{}: {e}", p.display())))?;
                *t.get_mut(name) = text;
            }
        }
        Ok(t)
    }

    fn get_mut(&mut self, name: &str) -> &mut String {
        match name {
            "encoder_errors" => &mut self.encoder_errors,
            "encoder_samples" => &mut self.encoder_samples,
            "decoder" => &mut self.decoder,
            "critique" => &mut self.critique,
            _ => &mut self.refine,
        }
    }

    pub fn get(&self, name: &str) -> &str {
        match name {
            "encoder_errors" => &self.encoder_errors,
            "encoder_samples" => &self.encoder_samples,
            "decoder" => &self.decoder,
            "critique" => &self.critique,
            _ => &self.refine,
        }
    }

    /// Encoder variant for agent `k`: even agents look at errors, odd
    /// agents at samples.
    pub fn encoder(&self, k: usize) -> &str {
        if k % 2 == 0 {
            &self.encoder_errors
        } else {
            &self.encoder_samples
        }
    }

    pub fn hashes(&self) -> BTreeMap<String, String> {
        TEMPLATE_NAMES
            .iter()
            .map(|n| (n.to_string(), hex::encode(Sha256::digest(self.get(n).as_bytes()))))
            .collect()
    }
}

/// Fills `{key}` slots. A line whose slot maps to `None` is dropped
/// entirely; a slot with no entry is an error.
pub fn render(template: &str, vars: &[(&str, Option<&str>)]) -> Result<String, AgentError> {
    let mut out = String::with_capacity(template.len() * 2);
    'lines: for line in template.split_inclusive('\n') {
        let mut rendered = String::with_capacity(line.len());
        let mut rest = line;
        while let Some(open) = rest.find('{') {
            rendered.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let close = after.find('}');
            let key = close.map(|c| &after[..c]);
            match key {
                Some(k) if !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') => {
                    match vars.iter().find(|(n, _)| *n == k) {
                        Some((_, Some(v))) => rendered.push_str(v),
                        Some((_, None)) => continue 'lines,
                        None => return Err(AgentError::Template(format!("unfilled placeholder `{{{k}}}`"))),
                    }
                    rest = &after[close.unwrap_or(0) + 1..];
                }
                _ => {
                    rendered.push('{');
                    rest = after;
                }
            }
        }
        rendered.push_str(rest);
        out.push_str(&rendered);
    }
    Ok(out)
}
