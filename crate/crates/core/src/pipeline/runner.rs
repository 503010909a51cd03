use std::time::Instant;

use super::backend::{prompt_digest, Backend, BackendError, Completion};
use super::prompt::{render_prompt, Phase, Strategy};
use super::transcript::{is_finish, parse_action, CallRecord, Outcome, TranscriptRecord, SCHEMA_VERSION};
use crate::checker::check_model;
use crate::corpus::Task;
use crate::model::{initial_state, ProblemModel, State};
use crate::parser::{extract_blocks, parse_model, PlanStep};
use crate::validator::execute_step;

pub const REACT_MAX_ITERATIONS: usize = 15;

/// The ReAct environment: a live state over the task's reference model.
pub struct ReactEnv<'m> {
    model: &'m ProblemModel,
    state: State,
    steps: usize,
}

impl<'m> ReactEnv<'m> {
    pub fn new(model: &'m ProblemModel) -> Self {
        ReactEnv { model, state: initial_state(model), steps: 0 }
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    /// Attempts one action and describes the outcome. A rejected action
    /// leaves the state unchanged.
    pub fn act(&mut self, action: Option<&str>) -> String {
        self.steps += 1;
        let Some(action) = action else {
            return "UnparsedStep: no Action line".to_string();
        };
        let step = PlanStep { index: self.steps, raw: action.to_string(), parsed: parse_action(action) };
        match execute_step(&self.state, &step, self.model) {
            Ok(next) => {
                let changes: Vec<String> = next
                    .diff(&self.state)
                    .into_iter()
                    .map(|(var, old, new)| match old {
                        Some(old) => format!("{var}: {old} -> {new}"),
                        None => format!("{var}: {new}"),
                    })
                    .collect();
                let obs = if changes.is_empty() { "no change".to_string() } else { changes.join("; ") };
                self.state = next;
                obs
            }
            Err(faults) => faults.iter().map(|f| format!("{}: {}", f.class, f.detail)).collect::<Vec<_>>().join("; "),
        }
    }
}

/// Re-derives the observation for each non-finish action, in order.
pub fn react_observations(model: &ProblemModel, actions: &[Option<String>]) -> Vec<String> {
    let mut env = ReactEnv::new(model);
    actions
        .iter()
        .take_while(|a| !a.as_deref().is_some_and(is_finish))
        .map(|a| env.act(a.as_deref()))
        .collect()
}

fn last_action_line(response: &str) -> Option<String> {
    response.lines().rev().find_map(|l| {
        let rest = l.trim().strip_prefix("Action:")?;
        Some(rest.trim().trim_matches('`').trim().to_string())
    })
}

/// Parses and checks a phase-1 model.
fn accept_model(model_text: Option<&str>) -> Result<ProblemModel, String> {
    let text = model_text.ok_or("no mdl block in the response")?;
    let model = parse_model(text).map_err(|issues| {
        format!("model does not parse ({} issues; first: {})", issues.len(), issues[0])
    })?;
    let issues = check_model(&model);
    if let Some(first) = issues.first() {
        return Err(format!("model has {} semantic issues; first: {first}", issues.len()));
    }
    Ok(model)
}

struct Run<'b> {
    backend: &'b dyn Backend,
    calls: Vec<CallRecord>,
}

impl Run<'_> {
    /// Sends one prompt and records the call; on failure the call is
    /// recorded without a response and the error returned.
    fn call(&mut self, prompt: String) -> Result<&mut CallRecord, BackendError> {
        let result = self.backend.complete(&prompt);
        let (response, completion) = match &result {
            Ok(c) => (Some(c.text.clone()), c.clone()),
            Err(_) => (None, Completion::text("")),
        };
        self.calls.push(CallRecord {
            prompt_digest: prompt_digest(&prompt),
            prompt,
            extracted: extract_blocks(response.as_deref().unwrap_or("")),
            response,
            latency_ms: completion.latency_ms,
            prompt_tokens: completion.prompt_tokens,
            completion_tokens: completion.completion_tokens,
            action: None,
            observation: None,
        });
        result?;
        Ok(self.calls.last_mut().expect("just pushed"))
    }
}

fn prompt_for(strategy: Strategy, phase: Phase, task: &Task, model_text: Option<&str>) -> String {
    render_prompt(strategy, phase, &task.nl_description, model_text).expect("strategy/phase pairs are fixed here")
}

/// Runs one strategy on one task. Backend errors end the run and are
/// recorded in the outcome; they are not returned.
pub fn run_strategy(task: &Task, strategy: Strategy, backend: &dyn Backend, temperature: f64) -> TranscriptRecord {
    let start = Instant::now();
    let mut run = Run { backend, calls: Vec::new() };
    let outcome = match drive(task, strategy, &mut run) {
        Ok(o) => o,
        Err(e) => Outcome::BackendFailure { error: e.to_string() },
    };
    TranscriptRecord {
        schema_version: SCHEMA_VERSION,
        task_id: task.id.clone(),
        strategy,
        backend: backend.descriptor(),
        temperature,
        calls: run.calls,
        outcome,
        wall_time_ms: start.elapsed().as_millis() as u64,
    }
}

fn drive(task: &Task, strategy: Strategy, run: &mut Run<'_>) -> Result<Outcome, BackendError> {
    match strategy {
        Strategy::MfrTwoCall => {
            let first = run.call(prompt_for(strategy, Phase::One, task, None))?;
            let model_text = first.extracted.model_text.clone();
            if let Err(reason) = accept_model(model_text.as_deref()) {
                return Ok(Outcome::ModelingFailure { reason });
            }
            run.call(prompt_for(strategy, Phase::Two, task, model_text.as_deref()))?;
            Ok(Outcome::Completed)
        }
        Strategy::MfrSingleCall => {
            let only = run.call(prompt_for(strategy, Phase::Only, task, None))?;
            match accept_model(only.extracted.model_text.as_deref()) {
                Ok(_) => Ok(Outcome::Completed),
                Err(reason) => Ok(Outcome::ModelingFailure { reason }),
            }
        }
        Strategy::Cot => {
            run.call(prompt_for(strategy, Phase::Only, task, None))?;
            Ok(Outcome::Completed)
        }
        Strategy::React => {
            let mut env = ReactEnv::new(&task.reference_model);
            let mut history = prompt_for(strategy, Phase::Only, task, None);
            for _ in 0..REACT_MAX_ITERATIONS {
                let call = run.call(history.clone())?;
                let response = call.response.clone().unwrap_or_default();
                let action = last_action_line(&response);
                call.action = action.clone();
                if action.as_deref().is_some_and(is_finish) {
                    break;
                }
                let observation = env.act(action.as_deref());
                call.observation = Some(observation.clone());
                history.push('\n');
                history.push_str(response.trim_end());
                history.push_str("\nObservation: ");
                history.push_str(&observation);
                history.push('\n');
            }
            Ok(Outcome::Completed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Family;
    use crate::parser::{parse_plan, Plan};
    use crate::pipeline::backend::ScriptedBackend;

    const DEMO: &str = r#"model "demo"
entity nurse: alice
entity loc: ward, pharmacy
var location(nurse): {ward, pharmacy} = ward
var dose_given: bool = false
var fuel: int[0..10] = 7
action move(n: nurse, a: loc, b: loc)
  pre location(n) == a
  eff location(n) := b
constraint always fuel >= 0
goal dose_given == true
"#;

    fn demo_task() -> Task {
        Task {
            id: "demo".into(),
            family: Family::MedicationScheduling,
            nl_description: "Move alice to the pharmacy.".into(),
            reference_model_text: DEMO.into(),
            reference_model: parse_model(DEMO).unwrap(),
            reference_plan: Plan::default(),
            mutants: Vec::new(),
        }
    }

    #[test]
    fn react_observes_changed_variables() {
        let task = demo_task();
        let b = ScriptedBackend::new([
            "Thought: go.\nAction: move(alice, ward, pharmacy)",
            "Thought: done.\nAction: finish",
        ]);
        let t = run_strategy(&task, Strategy::React, &b, 0.0);
        assert_eq!(t.calls.len(), 2);
        assert_eq!(t.calls[0].observation.as_deref(), Some("location(alice): ward -> pharmacy"));
        assert!(t.calls[1].prompt.contains("Observation: location(alice): ward -> pharmacy"));
        assert_eq!(t.calls[1].observation, None);
        assert_eq!(t.final_plan().unwrap(), parse_plan("step 1: move(alice, ward, pharmacy)"));
        let actions: Vec<Option<String>> = t.calls.iter().map(|c| c.action.clone()).collect();
        assert_eq!(react_observations(&task.reference_model, &actions), vec!["location(alice): ward -> pharmacy"]);
    }

    #[test]
    fn react_reports_violations_and_caps() {
        let task = demo_task();
        let b = ScriptedBackend::new(vec!["Action: move(alice, pharmacy, ward)"; 20]);
        let t = run_strategy(&task, Strategy::React, &b, 0.0);
        assert_eq!(t.calls.len(), REACT_MAX_ITERATIONS);
        assert!(t.calls[0].observation.as_deref().unwrap().starts_with("PreconditionFailure: location(n) == a"));
    }

    #[test]
    fn mfr_without_model_block_is_a_modeling_failure() {
        let task = demo_task();
        let b = ScriptedBackend::new(["I will just solve it.\n```plan\nstep 1: move(alice, ward, pharmacy)\n```"]);
        let t = run_strategy(&task, Strategy::MfrTwoCall, &b, 0.0);
        assert_eq!(t.calls.len(), 1);
        assert!(matches!(t.outcome, Outcome::ModelingFailure { .. }));
        assert_eq!(t.final_plan(), None);
    }

    #[test]
    fn mfr_two_calls_use_second_plan_only() {
        let task = demo_task();
        let b = ScriptedBackend::new([
            format!("```mdl\n{DEMO}```\n```plan\nstep 1: bogus()\n```"),
            "```plan\nstep 1: move(alice, ward, pharmacy)\n```".to_string(),
        ]);
        let t = run_strategy(&task, Strategy::MfrTwoCall, &b, 0.0);
        assert_eq!(t.calls.len(), 2);
        assert_eq!(t.outcome, Outcome::Completed);
        assert!(t.calls[1].prompt.contains("Using only the model defined above"));
        assert!(t.calls[1].prompt.contains(DEMO.trim_end()));
        assert_eq!(t.final_plan().unwrap(), parse_plan("step 1: move(alice, ward, pharmacy)"));
    }

    #[test]
    fn dirty_model_aborts_phase_two() {
        let task = demo_task();
        let dirty = DEMO.replace("goal dose_given == true", "goal done == true");
        let b = ScriptedBackend::new([format!("```mdl\n{dirty}```"), "unused".to_string()]);
        let t = run_strategy(&task, Strategy::MfrTwoCall, &b, 0.0);
        assert_eq!(t.calls.len(), 1);
        assert!(matches!(&t.outcome, Outcome::ModelingFailure { reason } if reason.contains("semantic")));
    }

    #[test]
    fn backend_failure_is_recorded() {
        let task = demo_task();
        let t = run_strategy(&task, Strategy::Cot, &ScriptedBackend::new(Vec::<String>::new()), 0.0);
        assert_eq!(t.calls.len(), 1);
        assert_eq!(t.calls[0].response, None);
        assert!(matches!(t.outcome, Outcome::BackendFailure { .. }));
    }
}
