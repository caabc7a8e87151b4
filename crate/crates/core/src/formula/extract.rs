use super::{FormulaError, FormulaSource, Origin};

fn strip_ticks(s: &str) -> &str {
    let s = s.trim();
    match s.strip_prefix('`').and_then(|r| r.strip_suffix('`')) {
        Some(inner) if !inner.contains('`') => inner.trim(),
        _ => s,
    }
}

fn last_line_with<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    text.lines()
        .rev()
        .find_map(|l| l.trim_start().strip_prefix(prefix))
}

/// Expression after the last line starting with `Formula:`.
pub fn extract_formula(llm_text: &str) -> Result<FormulaSource, FormulaError> {
    let body = last_line_with(llm_text, "Formula:")
        .ok_or_else(|| FormulaError::Extraction("Formula:".into()))?;
    FormulaSource::new(strip_ticks(body), Origin::LlmResponse)
}

/// One `Formula[c]:` line per class, c = 1..=num_classes.
pub fn extract_class_formulas(
    llm_text: &str,
    num_classes: usize,
) -> Result<Vec<FormulaSource>, FormulaError> {
    let found: Vec<Option<&str>> = (1..=num_classes)
        .map(|c| last_line_with(llm_text, &format!("Formula[{c}]:")))
        .collect();
    let got = found.iter().filter(|f| f.is_some()).count();
    if got != num_classes {
        return Err(FormulaError::ClassCount {
            expected: num_classes,
            got,
        });
    }
    found
        .into_iter()
        .map(|b| FormulaSource::new(strip_ticks(b.unwrap_or_default()), Origin::LlmResponse))
        .collect()
}
