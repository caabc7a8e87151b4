//! Plain-text mechanism files.
//!
//! ```text
//! === mechanism 0 ===
//! Explanation, any number of lines.
//! Formula: 0.5*NAD*sperm
//! ```
//!
//! Classification mechanisms carry one `Formula[c]:` line per class instead.
//! Explanation lines that would be mistaken for structure are escaped with a
//! leading backslash.

use serde::{Deserialize, Serialize};

use super::FormulaError;

const HEADER: &str = "=== mechanism ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MechanismFormulas {
    Regression(String),
    Classification(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismBlock {
    pub id: usize,
    pub explanation: String,
    pub formulas: MechanismFormulas,
}

fn needs_escape(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("Formula") || t.starts_with("===") || t.starts_with('\\')
}

pub fn render_mechanism_file(blocks: &[MechanismBlock]) -> String {
    let mut out = String::new();
    for b in blocks {
        out.push_str(&format!("{HEADER}{} ===\n", b.id));
        for line in b.explanation.lines() {
            if needs_escape(line) {
                out.push('\\');
            }
            out.push_str(line);
            out.push('\n');
        }
        match &b.formulas {
            MechanismFormulas::Regression(f) => out.push_str(&format!("Formula: {f}\n")),
            MechanismFormulas::Classification(fs) => {
                for (c, f) in fs.iter().enumerate() {
                    out.push_str(&format!("Formula[{}]: {f}\n", c + 1));
                }
            }
        }
        out.push('\n');
    }
    out
}

fn syntax(line: usize, message: impl Into<String>) -> FormulaError {
    FormulaError::Syntax {
        pos: line,
        message: format!("mechanism file line {line}: {}", message.into()),
    }
}

fn finish(
    id: usize,
    expl: &[String],
    reg: Option<String>,
    cls: Vec<(usize, String)>,
    line: usize,
) -> Result<MechanismBlock, FormulaError> {
    let formulas = match (reg, cls.is_empty()) {
        (Some(f), true) => MechanismFormulas::Regression(f),
        (None, false) => {
            let mut cls = cls;
            cls.sort_by_key(|(c, _)| *c);
            if cls.iter().enumerate().any(|(i, (c, _))| *c != i + 1) {
                return Err(syntax(line, format!("mechanism {id}: class formulas must be numbered 1..C")));
            }
            MechanismFormulas::Classification(cls.into_iter().map(|(_, f)| f).collect())
        }
        (None, true) => return Err(syntax(line, format!("mechanism {id} has no Formula line"))),
        (Some(_), false) => {
            return Err(syntax(line, format!("mechanism {id} mixes Formula and Formula[c] lines")))
        }
    };
    let explanation = expl.join("\n").trim().to_string();
    Ok(MechanismBlock {
        id,
        explanation,
        formulas,
    })
}

pub fn parse_mechanism_file(text: &str) -> Result<Vec<MechanismBlock>, FormulaError> {
    let mut blocks = Vec::new();
    let mut current: Option<(usize, Vec<String>, Option<String>, Vec<(usize, String)>)> = None;
    let mut last_line = 0;
    for (n, line) in text.lines().enumerate() {
        let n = n + 1;
        last_line = n;
        if let Some(rest) = line.strip_prefix(HEADER) {
            if let Some((id, expl, reg, cls)) = current.take() {
                blocks.push(finish(id, &expl, reg, cls, n)?);
            }
            let id = rest
                .trim_end()
                .strip_suffix("===")
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| syntax(n, "bad mechanism header"))?;
            current = Some((id, Vec::new(), None, Vec::new()));
            continue;
        }
        let Some((_, expl, reg, cls)) = current.as_mut() else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(syntax(n, "content before first mechanism header"));
        };
        let t = line.trim_start();
        if let Some(f) = t.strip_prefix("Formula:") {
            *reg = Some(f.trim().to_string());
        } else if let Some(rest) = t.strip_prefix("Formula[") {
            let (c, f) = rest
                .split_once("]:")
                .and_then(|(c, f)| c.parse::<usize>().ok().map(|c| (c, f)))
                .ok_or_else(|| syntax(n, "bad class formula line"))?;
            cls.retain(|(k, _)| *k != c);
            cls.push((c, f.trim().to_string()));
        } else if reg.is_some() || !cls.is_empty() {
            if !line.trim().is_empty() {
                return Err(syntax(n, "text after Formula line"));
            }
        } else {
            expl.push(line.strip_prefix('\\').unwrap_or(line).to_string());
        }
    }
    if let Some((id, expl, reg, cls)) = current.take() {
        blocks.push(finish(id, &expl, reg, cls, last_line)?);
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let blocks = vec![
            MechanismBlock {
                id: 0,
                explanation: "Cofactor synergy.\nFormula-like line: escaped\n=== not a header".into(),
                formulas: MechanismFormulas::Regression("0.5 * NAD * sperm".into()),
            },
            MechanismBlock {
                id: 3,
                explanation: String::new(),
                formulas: MechanismFormulas::Classification(vec!["x".into(), "0".into()]),
            },
        ];
        let text = render_mechanism_file(&blocks);
        assert_eq!(parse_mechanism_file(&text).unwrap(), blocks);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_mechanism_file("stray\n").is_err());
        assert!(parse_mechanism_file("=== mechanism 0 ===\nno formula\n").is_err());
        assert!(parse_mechanism_file("=== mechanism x ===\nFormula: 1\n").is_err());
        assert!(parse_mechanism_file("=== mechanism 0 ===\nFormula[2]: 1\n").is_err());
        assert!(parse_mechanism_file("").unwrap().is_empty());
    }
}
