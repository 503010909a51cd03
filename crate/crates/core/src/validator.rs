//! Step-by-step plan simulation with classified violations.
//!
//! Every state of a trace, including the initial one, must satisfy all
//! constraints; each step must name a declared action with well-sorted
//! arguments whose preconditions hold; effects apply simultaneously from the
//! pre-step state and may not leave their variable's domain.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{
    evaluate_condition, evaluate_term, ground_action, ground_var_ref, initial_state, Binding, GroundAction, GroundVar,
    ModelError, ProblemModel, State, Update, Value,
};
use crate::parser::{Plan, PlanStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationClass {
    UnparsedStep,
    UndefinedAction,
    ArityMismatch,
    UndefinedEntity,
    PreconditionFailure,
    ConstraintViolation,
    TypeError,
    GoalUnmet,
}

impl ViolationClass {
    pub const ALL: [ViolationClass; 8] = [
        ViolationClass::UnparsedStep,
        ViolationClass::UndefinedAction,
        ViolationClass::ArityMismatch,
        ViolationClass::UndefinedEntity,
        ViolationClass::PreconditionFailure,
        ViolationClass::ConstraintViolation,
        ViolationClass::TypeError,
        ViolationClass::GoalUnmet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViolationClass::UnparsedStep => "UnparsedStep",
            ViolationClass::UndefinedAction => "UndefinedAction",
            ViolationClass::ArityMismatch => "ArityMismatch",
            ViolationClass::UndefinedEntity => "UndefinedEntity",
            ViolationClass::PreconditionFailure => "PreconditionFailure",
            ViolationClass::ConstraintViolation => "ConstraintViolation",
            ViolationClass::TypeError => "TypeError",
            ViolationClass::GoalUnmet => "GoalUnmet",
        }
    }

    /// Plan elements the model does not license.
    pub fn is_implicit_assumption(self) -> bool {
        matches!(
            self,
            ViolationClass::UnparsedStep
                | ViolationClass::UndefinedAction
                | ViolationClass::ArityMismatch
                | ViolationClass::UndefinedEntity
        )
    }
}

impl fmt::Display for ViolationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ViolationClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ViolationClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown violation class `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// 0 for the initial state; the plan length for goal checks.
    pub step_index: usize,
    pub class: ViolationClass,
    pub detail: String,
}

/// Why a single step could not be applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFault {
    pub class: ViolationClass,
    pub detail: String,
}

impl StepFault {
    fn new(class: ViolationClass, detail: impl Into<String>) -> Self {
        StepFault { class, detail: detail.into() }
    }

    fn at(self, step_index: usize) -> Violation {
        Violation { step_index, class: self.class, detail: self.detail }
    }
}

impl From<ModelError> for StepFault {
    fn from(e: ModelError) -> Self {
        let class = match e {
            ModelError::UndefinedAction(_) => ViolationClass::UndefinedAction,
            ModelError::ArityMismatch { .. } => ViolationClass::ArityMismatch,
            ModelError::UndefinedEntity { .. } => ViolationClass::UndefinedEntity,
            ModelError::UnresolvedReference(_) | ModelError::TypeMismatch { .. } => ViolationClass::TypeError,
        };
        StepFault::new(class, e.to_string())
    }
}

impl fmt::Display for StepFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.class, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    HaltOnFirst,
    /// Record violating steps, skip them, and keep simulating.
    #[default]
    ContinueAndSkip,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "halt" | "halt-on-first" => Ok(Mode::HaltOnFirst),
            "continue" | "continue-and-skip" => Ok(Mode::ContinueAndSkip),
            other => Err(format!("unknown mode `{other}` (expected halt or continue)")),
        }
    }
}

/// What happened at one plan step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub raw: String,
    /// Index into `ValidationReport::states` of the state this step produced;
    /// absent if the step was rejected.
    pub state: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub states: Vec<State>,
    pub violations: Vec<Violation>,
    pub goal_satisfied: bool,
    pub halted_at: Option<usize>,
    pub steps: Vec<StepRecord>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.goal_satisfied
    }

    pub fn first_violation(&self) -> Option<&Violation> {
        self.violations.first()
    }

    pub fn count(&self, class: ViolationClass) -> usize {
        self.violations.iter().filter(|v| v.class == class).count()
    }
}

/// Applies a ground action to `state`.
///
/// Preconditions are checked in declaration order and the first failing one
/// is reported. Effect values are all computed from `state` before any is
/// written; a value outside its variable's domain, or two effects writing the
/// same grounded variable, is a `TypeError`.
pub fn apply_step(state: &State, action: &GroundAction, model: &ProblemModel) -> Result<State, StepFault> {
    let schema = model
        .action(&action.schema)
        .ok_or_else(|| StepFault::new(ViolationClass::UndefinedAction, format!("no action named `{}`", action.schema)))?;
    let binding = Binding::for_action(schema, &action.args);
    for pre in &schema.preconditions {
        if !evaluate_condition(pre, state, &binding)? {
            return Err(StepFault::new(ViolationClass::PreconditionFailure, format!("{pre} [{binding}]")));
        }
    }
    let mut writes: Vec<(GroundVar, Value)> = Vec::with_capacity(schema.effects.len());
    for eff in &schema.effects {
        let target = ground_var_ref(&eff.target, &binding)?;
        let current = state
            .get(&target)
            .ok_or_else(|| StepFault::new(ViolationClass::TypeError, format!("unresolved reference `{target}`")))?;
        let value = match &eff.update {
            Update::Assign(t) => evaluate_term(t, state, &binding)?,
            Update::Delta(d) => match current {
                Value::Int(v) => v.checked_add(*d).map(Value::Int).ok_or_else(|| {
                    StepFault::new(ViolationClass::TypeError, format!("{target} + {d} overflows"))
                })?,
                other => {
                    return Err(StepFault::new(ViolationClass::TypeError, format!("cannot increment `{target}` = {other}")))
                }
            },
        };
        let decl = model
            .variable(&target.name)
            .ok_or_else(|| StepFault::new(ViolationClass::TypeError, format!("unresolved reference `{target}`")))?;
        if !decl.domain.contains(&value) {
            return Err(StepFault::new(
                ViolationClass::TypeError,
                format!("{target} := {value} is outside {}", decl.domain),
            ));
        }
        if writes.iter().any(|(g, _)| *g == target) {
            return Err(StepFault::new(ViolationClass::TypeError, format!("{target} is written twice by {action}")));
        }
        writes.push((target, value));
    }
    let mut next = state.clone();
    for (g, v) in writes {
        next.set(g, v);
    }
    Ok(next)
}

/// Resolves a plan step to a ground action.
pub fn resolve_step(step: &PlanStep, model: &ProblemModel) -> Result<GroundAction, StepFault> {
    let call = step
        .parsed
        .as_ref()
        .ok_or_else(|| StepFault::new(ViolationClass::UnparsedStep, step.raw.clone()))?;
    let schema = model
        .action(&call.action)
        .ok_or_else(|| StepFault::new(ViolationClass::UndefinedAction, format!("no action named `{}`", call.action)))?;
    Ok(ground_action(schema, &call.args, model)?)
}

/// Every constraint that fails (or cannot be evaluated) in `state`.
pub fn constraint_faults(model: &ProblemModel, state: &State) -> Vec<StepFault> {
    let empty = Binding::new();
    model
        .constraints
        .iter()
        .filter_map(|c| match evaluate_condition(c, state, &empty) {
            Ok(true) => None,
            Ok(false) => Some(StepFault::new(ViolationClass::ConstraintViolation, format!("always {c}"))),
            Err(e) => Some(StepFault::from(e)),
        })
        .collect()
}

/// Executes one plan step from `state`: resolution, application and the
/// constraint check on the successor. Shared by validation and the
/// interactive environment.
pub fn execute_step(state: &State, step: &PlanStep, model: &ProblemModel) -> Result<State, Vec<StepFault>> {
    let action = resolve_step(step, model).map_err(|f| vec![f])?;
    let next = apply_step(state, &action, model).map_err(|f| vec![f])?;
    let faults = constraint_faults(model, &next);
    if faults.is_empty() {
        Ok(next)
    } else {
        Err(faults)
    }
}

pub fn validate_plan(model: &ProblemModel, plan: &Plan, mode: Mode) -> ValidationReport {
    let halt = mode == Mode::HaltOnFirst;
    let s0 = initial_state(model);
    let mut report = ValidationReport {
        states: vec![s0],
        violations: Vec::new(),
        goal_satisfied: false,
        halted_at: None,
        steps: Vec::new(),
    };

    let initial_faults = constraint_faults(model, &report.states[0]);
    if !initial_faults.is_empty() {
        if halt {
            report.violations.push(initial_faults.into_iter().next().expect("nonempty").at(0));
            report.halted_at = Some(0);
            return report;
        }
        report.violations.extend(initial_faults.into_iter().map(|f| f.at(0)));
    }

    for step in &plan.steps {
        let current = report.states.last().expect("states never empty");
        match execute_step(current, step, model) {
            Ok(next) => {
                report.states.push(next);
                report.steps.push(StepRecord {
                    index: step.index,
                    raw: step.raw.clone(),
                    state: Some(report.states.len() - 1),
                });
            }
            Err(faults) => {
                report.steps.push(StepRecord { index: step.index, raw: step.raw.clone(), state: None });
                if halt {
                    report.violations.push(faults.into_iter().next().expect("nonempty").at(step.index));
                    report.halted_at = Some(step.index);
                    return report;
                }
                report.violations.extend(faults.into_iter().map(|f| f.at(step.index)));
            }
        }
    }

    let last = report.states.last().expect("states never empty");
    let empty = Binding::new();
    let mut goal_ok = true;
    for g in &model.goal {
        match evaluate_condition(g, last, &empty) {
            Ok(true) => {}
            Ok(false) => {
                goal_ok = false;
                report.violations.push(Violation {
                    step_index: plan.len(),
                    class: ViolationClass::GoalUnmet,
                    detail: g.to_string(),
                });
            }
            Err(e) => {
                goal_ok = false;
                report.violations.push(StepFault::from(e).at(plan.len()));
            }
        }
        if halt && !goal_ok {
            break;
        }
    }
    report.goal_satisfied = goal_ok;
    report
}

/// Human-readable trace: initial state, one block per step with the
/// variables it changed or the violation it raised, then the goal verdict.
pub fn trace_render(report: &ValidationReport, model: &ProblemModel) -> String {
    let mut out = String::new();
    out.push_str(&format!("model: {}\n", model.name));
    out.push_str("initial state:\n");
    if let Some(s0) = report.states.first() {
        for (k, v) in s0.iter() {
            out.push_str(&format!("  {k} = {v}\n"));
        }
    }
    let violations_at = |i: usize| report.violations.iter().filter(move |v| v.step_index == i && v.class != ViolationClass::GoalUnmet);
    for v in violations_at(0) {
        out.push_str(&format!("step 0: VIOLATION {} {}\n", v.class, v.detail));
    }
    for step in &report.steps {
        match step.state {
            Some(k) => {
                out.push_str(&format!("step {}: {}\n", step.index, step_action_text(&step.raw)));
                let diff = report.states[k].diff(&report.states[k - 1]);
                if diff.is_empty() {
                    out.push_str("  (no change)\n");
                }
                for (var, old, new) in diff {
                    let old = old.map(|o| o.to_string()).unwrap_or_else(|| "?".into());
                    out.push_str(&format!("  {var}: {old} -> {new}\n"));
                }
            }
            None => {
                for v in violations_at(step.index) {
                    out.push_str(&format!("step {}: VIOLATION {} {}\n", step.index, v.class, v.detail));
                }
            }
        }
    }
    if let Some(h) = report.halted_at {
        out.push_str(&format!("HALTED at step {h}\n"));
        out.push_str("GOAL: not evaluated\n");
        return out;
    }
    if report.goal_satisfied {
        out.push_str("GOAL: satisfied\n");
    } else {
        for v in report.violations.iter().filter(|v| v.class == ViolationClass::GoalUnmet) {
            out.push_str(&format!("GOAL UNMET: {}\n", v.detail));
        }
        out.push_str("GOAL: unmet\n");
    }
    out
}

fn step_action_text(raw: &str) -> &str {
    crate::parser::parse_step_line(raw)
        .map(|_| raw.split_once(':').map(|(_, r)| r.trim()).unwrap_or(raw))
        .unwrap_or(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_model, parse_plan};

    const DEMO: &str = r#"model "demo"
entity nurse: alice
entity loc: ward, pharmacy
var location(nurse): {ward, pharmacy} = ward
var dose_given: bool = false
var fuel: int[0..10] = 7
action move(n: nurse, a: loc, b: loc)
  pre location(n) == a
  eff location(n) := b
action burn()
  eff fuel := fuel - 1
action give()
  eff dose_given := true
constraint always fuel >= 0
goal dose_given == true
"#;

    fn demo() -> ProblemModel {
        parse_model(DEMO).unwrap()
    }

    fn ga(name: &str, args: &[&str]) -> GroundAction {
        GroundAction { schema: name.into(), args: args.iter().map(|s| s.to_string()).collect() }
    }

    #[test]
    fn move_changes_only_location() {
        let m = demo();
        let s0 = initial_state(&m);
        let s1 = apply_step(&s0, &ga("move", &["alice", "ward", "pharmacy"]), &m).unwrap();
        let diff = s1.diff(&s0);
        assert_eq!(diff.len(), 1);
        assert_eq!(diff[0].0, &GroundVar::new("location", &["alice"]));
        assert_eq!(diff[0].2, &Value::sym("pharmacy"));
    }

    #[test]
    fn failing_precondition_is_named() {
        let m = demo();
        let s0 = initial_state(&m);
        let f = apply_step(&s0, &ga("move", &["alice", "pharmacy", "ward"]), &m).unwrap_err();
        assert_eq!(f.class, ViolationClass::PreconditionFailure);
        assert!(f.detail.starts_with("location(n) == a"), "{}", f.detail);
    }

    #[test]
    fn eighth_burn_leaves_the_domain() {
        // Iterating by hand: 7 -> 6 -> ... -> 0 takes seven burns; the eighth writes -1.
        let m = demo();
        let mut s = initial_state(&m);
        for i in 1..=8 {
            match apply_step(&s, &ga("burn", &[]), &m) {
                Ok(next) => {
                    assert!(i < 8);
                    s = next;
                }
                Err(f) => {
                    assert_eq!(i, 8);
                    assert_eq!(f.class, ViolationClass::TypeError);
                }
            }
        }
        assert_eq!(s.get(&GroundVar::new("fuel", &[])), Some(&Value::Int(0)));
    }

    #[test]
    fn empty_plan_with_goal_already_true() {
        let mut m = demo();
        m.variables[1].initial = Value::Bool(true);
        let r = validate_plan(&m, &Plan::default(), Mode::HaltOnFirst);
        assert!(r.violations.is_empty());
        assert!(r.goal_satisfied);
        assert!(trace_render(&r, &m).ends_with("GOAL: satisfied\n"));
    }

    #[test]
    fn undeclared_action() {
        let m = demo();
        let r = validate_plan(&m, &parse_plan("step 1: teleport(alice)\nstep 2: give()"), Mode::ContinueAndSkip);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].class, ViolationClass::UndefinedAction);
        assert!(r.goal_satisfied);
    }

    #[test]
    fn lookup_failures_are_classified() {
        let m = demo();
        let plan = parse_plan("walk over\nstep 2: move(alice, ward)\nstep 3: move(carol, ward, pharmacy)\nstep 4: give()");
        let r = validate_plan(&m, &plan, Mode::ContinueAndSkip);
        let classes: Vec<_> = r.violations.iter().map(|v| (v.step_index, v.class)).collect();
        assert_eq!(
            classes,
            vec![
                (1, ViolationClass::UnparsedStep),
                (2, ViolationClass::ArityMismatch),
                (3, ViolationClass::UndefinedEntity)
            ]
        );
    }

    #[test]
    fn halt_stops_at_first_violation() {
        let m = demo();
        let plan = parse_plan("step 1: move(alice, ward, pharmacy)\nstep 2: move(alice, ward, pharmacy)\nstep 3: give()");
        let r = validate_plan(&m, &plan, Mode::HaltOnFirst);
        assert_eq!(r.halted_at, Some(2));
        assert_eq!(r.states.len(), 2);
        assert_eq!(r.violations.len(), 1);
        assert!(!r.goal_satisfied);
        let trace = trace_render(&r, &m);
        assert!(trace.contains("step 2: VIOLATION PreconditionFailure location(n) == a"), "{trace}");

        let c = validate_plan(&m, &plan, Mode::ContinueAndSkip);
        assert_eq!(c.halted_at, None);
        assert!(c.goal_satisfied);
        assert_eq!(c.violations, r.violations);
    }

    #[test]
    fn initial_constraint_violation_is_step_zero() {
        let mut m = demo();
        m.variables[2].domain = crate::model::Domain::Int { lo: -5, hi: 10 };
        m.variables[2].initial = Value::Int(-1);
        let r = validate_plan(&m, &Plan::default(), Mode::ContinueAndSkip);
        assert_eq!(r.violations[0].step_index, 0);
        assert_eq!(r.violations[0].class, ViolationClass::ConstraintViolation);
        let h = validate_plan(&m, &Plan::default(), Mode::HaltOnFirst);
        assert_eq!(h.halted_at, Some(0));
        assert_eq!(h.states.len(), 1);
    }

    #[test]
    fn goal_unmet_per_conjunct() {
        let mut m = demo();
        let extra = parse_model("model \"x\"\nvar fuel: int[0..10] = 7\ngoal fuel == 3\n").unwrap();
        m.goal.push(extra.goal[0].clone());
        let r = validate_plan(&m, &Plan::default(), Mode::ContinueAndSkip);
        assert_eq!(r.count(ViolationClass::GoalUnmet), 2);
        assert!(r.violations.iter().all(|v| v.step_index == 0));
    }

    #[test]
    fn trace_shows_changed_variables() {
        let m = demo();
        let r = validate_plan(&m, &parse_plan("step 1: move(alice, ward, pharmacy)"), Mode::ContinueAndSkip);
        let t = trace_render(&r, &m);
        assert!(t.contains("step 1: move(alice, ward, pharmacy)\n  location(alice): ward -> pharmacy\n"), "{t}");
        assert!(t.ends_with("GOAL: unmet\n"));
    }

    #[test]
    fn simultaneous_effects_read_the_pre_state() {
        let m = parse_model(
            "model \"swap\"\nvar a: int[0..3] = 1\nvar b: int[0..3] = 2\naction swap()\n  eff a := b\n  eff b := a\n",
        )
        .unwrap();
        let s = apply_step(&initial_state(&m), &ga("swap", &[]), &m).unwrap();
        assert_eq!(s.get(&GroundVar::new("a", &[])), Some(&Value::Int(2)));
        assert_eq!(s.get(&GroundVar::new("b", &[])), Some(&Value::Int(1)));
    }

    #[test]
    fn runtime_conflict_is_type_error() {
        let m = parse_model(
            "model \"c\"\nentity s: x, y\nvar f(s): bool = false\naction both(p: s, q: s)\n  eff f(p) := true\n  eff f(q) := false\n",
        )
        .unwrap();
        let f = apply_step(&initial_state(&m), &ga("both", &["x", "x"]), &m).unwrap_err();
        assert_eq!(f.class, ViolationClass::TypeError);
        assert!(apply_step(&initial_state(&m), &ga("both", &["x", "y"]), &m).is_ok());
    }
}
