use serde::{Deserialize, Serialize};

use crate::ensemble::{Correction, Mechanism};

/// One logged iteration of an agent.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEntry {
    pub iteration: usize,
    pub hypothesis: String,
    pub explanation: String,
    pub correction: Correction,
    pub loss: f64,
    pub critique: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AgentStatus {
    Live,
    Dropped { stage: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanismState {
    pub agent: usize,
    pub status: AgentStatus,
    /// Append-only.
    pub log: Vec<StateEntry>,
    /// (iteration, reason) for refinement steps that produced no entry.
    pub skips: Vec<(usize, String)>,
}

impl MechanismState {
    pub fn dropped(agent: usize, stage: &str, reason: String) -> Self {
        log::warn!("agent {agent} dropped at {stage}: {reason}");
        Self {
            agent,
            status: AgentStatus::Dropped {
                stage: stage.to_string(),
                reason,
            },
            log: Vec::new(),
            skips: Vec::new(),
        }
    }

    pub fn is_live(&self) -> bool {
        self.status == AgentStatus::Live
    }

    pub fn current(&self) -> Option<&StateEntry> {
        self.log.last()
    }

    /// Position in `log` of the lowest loss; earliest wins ties.
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, e) in self.log.iter().enumerate() {
            if best.is_none_or(|b| e.loss < self.log[b].loss) {
                best = Some(i);
            }
        }
        best
    }

    pub fn mechanism_at(&self, pos: usize) -> Mechanism {
        let e = &self.log[pos];
        Mechanism {
            agent: self.agent,
            explanation: e.explanation.clone(),
            correction: e.correction.clone(),
        }
    }

    /// Text form of the whole history for the refinement prompt.
    pub fn history_text(&self) -> String {
        let mut s = String::new();
        for e in &self.log {
            s.push_str(&format!("[iteration {}]\n", e.iteration));
            if e.hypothesis.trim() != e.explanation.trim() {
                s.push_str(&format!("hypothesis: {}\n", e.hypothesis.trim()));
            }
            if !e.explanation.trim().is_empty() {
                s.push_str(&format!("explanation: {}\n", e.explanation.trim()));
            }
            s.push_str(&formula_lines(&e.correction));
            s.push_str(&format!("training loss: {:.6}\n", e.loss));
            if let Some(c) = &e.critique {
                s.push_str(&format!("critique: {}\n", c.trim()));
            }
            s.push('\n');
        }
        s
    }
}

pub fn formula_lines(c: &Correction) -> String {
    match c {
        Correction::Regression(f) => format!("Formula: {f}\n"),
        Correction::Classification(fs) => fs
            .iter()
            .enumerate()
            .map(|(i, f)| format!("Formula[{}]: {f}\n", i + 1))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_str;

    fn entry(t: usize, loss: f64) -> StateEntry {
        StateEntry {
            iteration: t,
            hypothesis: "h".into(),
            explanation: "e".into(),
            correction: Correction::Regression(parse_str("0", &[]).unwrap()),
            loss,
            critique: None,
        }
    }

    #[test]
    fn best_is_earliest_minimum() {
        let mut s = MechanismState {
            agent: 0,
            status: AgentStatus::Live,
            log: vec![entry(0, 0.5), entry(1, 0.2), entry(2, 0.2), entry(3, 0.3)],
            skips: vec![],
        };
        assert_eq!(s.best(), Some(1));
        s.log.clear();
        assert_eq!(s.best(), None);
    }
}
