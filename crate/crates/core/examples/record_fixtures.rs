//! Regenerates `fixtures/replay.jsonl` from scripted personas.
//!
//! The responses are synthetic: each persona is a fixed rule over the task's
//! reference plan that imitates one strategy's typical failure modes. They
//! exist to exercise the pipeline end to end without network access, not to
//! stand in for a real model.
//!
//!     cargo run -p mfrkit-core --example record_fixtures [OUT]

use std::path::PathBuf;

use mfrkit::corpus::{Corpus, Task};
use mfrkit::pipeline::backend::write_fixture;
use mfrkit::pipeline::{run_strategy, Backend, BackendError, Completion, RecordingBackend, Strategy};

struct Persona {
    tasks: Vec<Task>,
}

fn calls(task: &Task) -> Vec<String> {
    task.reference_plan.steps.iter().map(|s| s.parsed.as_ref().expect("reference steps parse").to_string()).collect()
}

fn plan_block(steps: &[String]) -> String {
    let body: String = steps.iter().enumerate().map(|(i, s)| format!("step {}: {s}\n", i + 1)).collect();
    format!("```plan\n{body}```\n")
}

fn prose(call: &str) -> String {
    let name = call.split('(').next().unwrap_or(call).replace('_', " ");
    let args = call.split_once('(').map(|(_, a)| a.trim_end_matches(')').to_string()).unwrap_or_default();
    if args.is_empty() {
        name
    } else {
        format!("{name} with {args}")
    }
}

impl Persona {
    fn task_for(&self, prompt: &str) -> (usize, &Task) {
        self.tasks
            .iter()
            .enumerate()
            .find(|(_, t)| prompt.contains(&format!("Problem:\n{}\n", t.nl_description.trim_end())))
            .expect("prompt names a corpus task")
    }

    /// Skips an intermediate step on some tasks, writes a step in prose on
    /// others, and invents an action name now and then.
    fn cot(&self, i: usize, task: &Task) -> String {
        let mut steps = calls(task);
        let mut out = String::from("Let me reason through this step by step.\n\n");
        for s in &steps {
            out.push_str(&format!("- We need to {}.\n", prose(s)));
        }
        if i % 5 == 2 {
            out.push_str("\nSo the plan is:\n");
            for (k, s) in steps.iter().enumerate() {
                out.push_str(&format!("{}. {}\n", k + 1, prose(s)));
            }
            return out;
        }
        if i.is_multiple_of(2) {
            steps.remove(steps.len() / 2);
        }
        if i.is_multiple_of(3) {
            steps[1] = format!("then {}", prose(&steps[1]));
        }
        if i % 4 == 1 {
            let (name, rest) = steps[0].split_once('(').expect("call syntax");
            steps[0] = format!("{name}_first({rest}");
        }
        out.push_str("\nFinal plan:\n\n");
        out.push_str(&plan_block(&steps));
        out
    }

    /// Tries a later step too early on even tasks, and opens with an action
    /// written in prose on every fifth task; it then follows the reference.
    fn react_actions(&self, i: usize, task: &Task) -> Vec<String> {
        let mut actions = calls(task);
        if i.is_multiple_of(2) && actions.len() > 2 {
            let early = actions[2].clone();
            actions.insert(1, early);
        }
        if i.is_multiple_of(5) {
            actions.insert(0, format!("start by doing {}", prose(&actions[0])));
        }
        actions.push("finish".into());
        actions
    }

    fn react(&self, i: usize, task: &Task, prompt: &str) -> String {
        let turn = prompt.matches("\nObservation: ").count();
        let actions = self.react_actions(i, task);
        let action = actions.get(turn).cloned().unwrap_or_else(|| "finish".into());
        let thought = if action == "finish" {
            "The goal should be reached now.".to_string()
        } else {
            format!("Next I should {}.", prose(&action))
        };
        format!("Thought: {thought}\nAction: {action}\n")
    }

    /// The reference model; the last task gets a goal over an undeclared
    /// variable. Odd tasks also sketch a premature plan in phase one.
    fn model_response(&self, i: usize, task: &Task, premature: bool) -> String {
        let mut model = task.reference_model_text.clone();
        if i + 1 == self.tasks.len() {
            let goal = model.lines().rev().find(|l| l.starts_with("goal ")).expect("model has a goal").to_string();
            model = model.replace(&goal, "goal finished == true");
        }
        let mut out = format!("Here is the problem model.\n\n```mdl\n{model}```\n");
        if premature && i % 2 == 1 {
            let mut steps = calls(task);
            steps.swap(0, 1);
            out.push_str("\nA first idea for the order of work:\n\n");
            out.push_str(&plan_block(&steps));
        }
        out
    }
}

impl Backend for Persona {
    fn descriptor(&self) -> String {
        "persona".into()
    }

    fn complete(&self, prompt: &str) -> Result<Completion, BackendError> {
        let (i, task) = self.task_for(prompt);
        let text = if prompt.starts_with("Solve the following problem by interacting") {
            self.react(i, task, prompt)
        } else if prompt.starts_with("Solve the following problem") {
            self.cot(i, task)
        } else if prompt.starts_with("Analyze") && prompt.contains("after the model block") {
            format!("{}\n{}", self.model_response(i, task, false), plan_block(&calls(task)))
        } else if prompt.starts_with("Analyze") {
            self.model_response(i, task, true)
        } else {
            format!("Following the model:\n\n{}", plan_block(&calls(task)))
        };
        Ok(Completion::text(text))
    }
}

fn main() {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/replay.jsonl"));
    let tasks = Corpus::default().load_all().expect("corpus loads");
    let recorder = RecordingBackend::new(Persona { tasks: tasks.clone() });
    for task in &tasks {
        for s in Strategy::ALL {
            let t = run_strategy(task, s, &recorder, 0.0);
            assert!(
                !matches!(t.outcome, mfrkit::pipeline::Outcome::BackendFailure { .. }),
                "{} {s}: {:?}",
                task.id,
                t.outcome
            );
        }
    }
    let records = recorder.records();
    std::fs::create_dir_all(out.parent().expect("file path")).expect("fixture dir");
    write_fixture(&out, &records).expect("write fixture");
    println!("{} records -> {}", records.len(), out.display());
}
