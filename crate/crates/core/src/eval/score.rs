use serde::{Deserialize, Serialize};

use crate::corpus::Task;
use crate::parser::Plan;
use crate::pipeline::{Strategy, TranscriptRecord};
use crate::validator::{validate_plan, Mode, ViolationClass};

/// Per-task, per-strategy measurements, all taken from continue-and-skip
/// validation against the task's reference model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task_id: String,
    pub strategy: Strategy,
    pub modeling_ok: bool,
    /// `ConstraintViolation` plus `TypeError` (a write outside a variable's
    /// domain breaks the model as surely as a failed invariant).
    pub constraint_violations: u32,
    /// `UndefinedAction` + `ArityMismatch` + `UndefinedEntity` + `UnparsedStep`.
    pub implicit_assumptions: u32,
    pub precondition_failures: u32,
    pub goal_success: bool,
    /// Parsed steps over total steps; 0 with no plan.
    pub clarity: f64,
    pub plan_length: u32,
}

impl TaskScore {
    /// Raw value of the constraint criterion: every step or state that broke
    /// a stated rule.
    pub fn rule_breaks(&self) -> u32 {
        self.constraint_violations + self.precondition_failures
    }
}

/// Scores a plan (absent = no plan) against the task's reference model. A
/// failed modeling phase scores as an absent plan.
pub fn score_plan(task: &Task, strategy: Strategy, modeling_ok: bool, plan: Option<&Plan>) -> TaskScore {
    let empty = Plan::default();
    let plan = if modeling_ok { plan.unwrap_or(&empty) } else { &empty };
    let report = validate_plan(&task.reference_model, plan, Mode::ContinueAndSkip);
    let count = |classes: &[ViolationClass]| {
        report.violations.iter().filter(|v| classes.contains(&v.class)).count() as u32
    };
    let parsed = plan.steps.iter().filter(|s| s.parsed.is_some()).count();
    TaskScore {
        task_id: task.id.clone(),
        strategy,
        modeling_ok,
        constraint_violations: count(&[ViolationClass::ConstraintViolation, ViolationClass::TypeError]),
        implicit_assumptions: count(&[
            ViolationClass::UndefinedAction,
            ViolationClass::ArityMismatch,
            ViolationClass::UndefinedEntity,
            ViolationClass::UnparsedStep,
        ]),
        precondition_failures: count(&[ViolationClass::PreconditionFailure]),
        goal_success: modeling_ok && report.goal_satisfied,
        clarity: if plan.is_empty() { 0.0 } else { parsed as f64 / plan.len() as f64 },
        plan_length: plan.len() as u32,
    }
}

pub fn score_transcript(task: &Task, transcript: &TranscriptRecord) -> TaskScore {
    score_plan(task, transcript.strategy, transcript.modeling_ok(), transcript.final_plan().as_ref())
}
