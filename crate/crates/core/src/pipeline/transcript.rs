use serde::{Deserialize, Serialize};

use super::prompt::Strategy;
use crate::parser::{parse_plan, ExtractedArtifacts, Plan, StepCall};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub prompt: String,
    pub prompt_digest: String,
    /// Absent when the backend failed.
    pub response: Option<String>,
    pub latency_ms: u64,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub extracted: ExtractedArtifacts,
    /// ReAct only: the text of the call's last `Action:` line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    /// ReAct only: what the environment answered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Outcome {
    Completed,
    ModelingFailure { reason: String },
    BackendFailure { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub schema_version: u32,
    pub task_id: String,
    pub strategy: Strategy,
    pub backend: String,
    pub temperature: f64,
    pub calls: Vec<CallRecord>,
    pub outcome: Outcome,
    pub wall_time_ms: u64,
}

/// Step text a ReAct call contributed to the attempted plan.
pub(crate) const NO_ACTION: &str = "(no action line)";

impl TranscriptRecord {
    /// False only for MFR runs whose model was missing or defective.
    pub fn modeling_ok(&self) -> bool {
        !matches!(self.outcome, Outcome::ModelingFailure { .. })
    }

    /// The plan this run committed to, or `None` if it produced none.
    ///
    /// MFR two-call reads only the second call; anything plan-like in the
    /// first response is ignored.
    pub fn final_plan_text(&self) -> Option<String> {
        if !self.modeling_ok() {
            return None;
        }
        match self.strategy {
            Strategy::MfrTwoCall => self.calls.get(1).and_then(|c| c.extracted.plan_text.clone()),
            Strategy::MfrSingleCall | Strategy::Cot => self.calls.first().and_then(|c| c.extracted.plan_text.clone()),
            Strategy::React => {
                let steps: Vec<String> = self
                    .calls
                    .iter()
                    .filter(|c| c.response.is_some())
                    .map(|c| c.action.as_deref().unwrap_or(NO_ACTION))
                    .filter(|a| !is_finish(a))
                    .enumerate()
                    .map(|(i, a)| format!("step {}: {a}\n", i + 1))
                    .collect();
                (!steps.is_empty()).then(|| steps.concat())
            }
        }
    }

    pub fn final_plan(&self) -> Option<Plan> {
        self.final_plan_text().map(|t| parse_plan(&t))
    }

    /// Clears wall-clock measurements, leaving only content that is a
    /// function of the inputs.
    pub fn without_timing(&self) -> TranscriptRecord {
        let mut t = self.clone();
        t.wall_time_ms = 0;
        for c in &mut t.calls {
            c.latency_ms = 0;
        }
        t
    }
}

pub(crate) fn is_finish(action: &str) -> bool {
    let a = action.trim();
    a == "finish" || a == "finish()"
}

/// Parses a ReAct action such as `move(alice, ward, pharmacy)`.
pub(crate) fn parse_action(action: &str) -> Option<StepCall> {
    crate::parser::parse_step_line(&format!("step 1: {action}"))
}
