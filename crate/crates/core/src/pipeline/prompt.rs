use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Cot,
    React,
    MfrTwoCall,
    MfrSingleCall,
}

impl Strategy {
    /// Report order.
    pub const ALL: [Strategy; 4] = [Strategy::Cot, Strategy::React, Strategy::MfrTwoCall, Strategy::MfrSingleCall];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::MfrTwoCall => "mfr-two-call",
            Strategy::MfrSingleCall => "mfr-single-call",
            Strategy::Cot => "cot",
            Strategy::React => "react",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Strategy::Cot => "CoT",
            Strategy::React => "ReAct",
            Strategy::MfrTwoCall => "Model-First",
            Strategy::MfrSingleCall => "Model-First (single call)",
        }
    }

    pub fn is_mfr(self) -> bool {
        matches!(self, Strategy::MfrTwoCall | Strategy::MfrSingleCall)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected cot, react, mfr-two-call or mfr-single-call)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    One,
    Two,
    Only,
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" | "one" => Ok(Phase::One),
            "2" | "two" => Ok(Phase::Two),
            "only" => Ok(Phase::Only),
            _ => Err(format!("unknown phase `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("phase 2 needs the model text from phase 1")]
    MissingModelText,
    #[error("strategy {strategy} has no phase {phase:?}")]
    PhaseMismatch { strategy: Strategy, phase: Phase },
}

const MODEL_INSTRUCTION: &str = "Analyze the following problem. First, explicitly define the problem model by listing:
(1) relevant entities,
(2) state variables,
(3) possible actions with preconditions and effects,
and (4) constraints.";

const NO_SOLUTION: &str = "Do not propose a solution yet.";

const PLAN_INSTRUCTION: &str = "Using only the model defined above, generate a step-by-step solution plan. \
Ensure that all actions respect the defined constraints and state transitions.";

const MDL_RIDER: &str = "Output format: write the model inside a fenced code block tagged `mdl`, one declaration per line:

    model \"NAME\"
    entity SORT: member1, member2
    var NAME(SORT, ...): bool | {value1, value2} | int[LO..HI] = INITIAL
    init NAME(member, ...) = VALUE
    action NAME(param: SORT, ...)
      pre COMPARISON
      eff VARIABLE := TERM
      eff VARIABLE := VARIABLE + N
    constraint always COMPARISON
    goal COMPARISON

COMPARISON is `TERM OP TERM` with OP one of ==, !=, <, <=, >, >=. A TERM is a variable such as name(arg), \
an action parameter, or a literal (true, false, an integer, or an identifier). Write one `pre`, `eff`, \
`constraint` or `goal` line per condition; several lines are combined with AND.";

const PLAN_RIDER: &str = "Output format: write the plan inside a fenced code block tagged `plan`, one action per line:

    step 1: action_name(arg1, arg2)
    step 2: action_name(arg1)";

const COT_INSTRUCTION: &str = "Solve the following problem. Think it through step by step, explaining your \
reasoning, and then give the final plan.";

const REACT_INSTRUCTION: &str = "Solve the following problem by interacting with its environment. Work in a loop:

Thought: reason about the current situation and what to do next.
Action: exactly one action, written as action_name(arg1, arg2), or `finish` once the goal is reached.

After each Action the environment answers with an Observation that lists the variables that changed, \
or names the rule the action broke (in which case nothing changed). Write one Thought and one Action per \
turn, then stop and wait for the Observation.";

/// Renders the prompt for one strategy phase. MFR two-call uses phases 1 and
/// 2; every other strategy uses `Only`.
pub fn render_prompt(
    strategy: Strategy,
    phase: Phase,
    task_text: &str,
    model_text: Option<&str>,
) -> Result<String, PromptError> {
    let task = task_text.trim_end();
    let out = match (strategy, phase) {
        (Strategy::MfrTwoCall, Phase::One) => {
            format!("{MODEL_INSTRUCTION}\n{NO_SOLUTION}\n\nProblem:\n{task}\n\n{MDL_RIDER}\n")
        }
        (Strategy::MfrTwoCall, Phase::Two) => {
            let model = model_text.ok_or(PromptError::MissingModelText)?.trim_end();
            format!("Problem:\n{task}\n\nModel:\n```mdl\n{model}\n```\n\n{PLAN_INSTRUCTION}\n\n{PLAN_RIDER}\n")
        }
        (Strategy::MfrSingleCall, Phase::Only) => format!(
            "{MODEL_INSTRUCTION}\n\nProblem:\n{task}\n\n{MDL_RIDER}\n\nThen, after the model block: \
             {PLAN_INSTRUCTION}\n\n{PLAN_RIDER}\n"
        ),
        (Strategy::Cot, Phase::Only) => format!("{COT_INSTRUCTION}\n\nProblem:\n{task}\n\n{PLAN_RIDER}\n"),
        (Strategy::React, Phase::Only) => format!("{REACT_INSTRUCTION}\n\nProblem:\n{task}\n"),
        (strategy, phase) => return Err(PromptError::PhaseMismatch { strategy, phase }),
    };
    Ok(out)
}
