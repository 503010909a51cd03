#![allow(dead_code)]

use std::sync::OnceLock;

use mfrkit::corpus::{Corpus, Task};
use mfrkit::model::{
    ActionParam, ActionSchema, Arg, CmpOp, Condition, Domain, Effect, EntitySort, InitOverride, ProblemModel, Term,
    Update, Value, VarRef, VariableDecl,
};
use mfrkit::oracle::ground_calls;
use mfrkit::parser::{Plan, PlanStep, StepCall};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn corpus() -> &'static [Task] {
    static TASKS: OnceLock<Vec<Task>> = OnceLock::new();
    TASKS.get_or_init(|| Corpus::default().load_all().expect("corpus loads"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Name pools are disjoint by prefix so that a bare identifier means the same
// thing before and after a round trip: s = sort, k = member, v = declared
// variable, u = undeclared variable, a = action, p = parameter, e = symbol.

const OPS: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

fn value(r: &mut impl Rng) -> Value {
    match r.random_range(0..3) {
        0 => Value::Bool(r.random()),
        1 => Value::Int(r.random_range(-9..=9)),
        _ => Value::Sym(format!("e{}", r.random_range(0..4))),
    }
}

fn var_ref(r: &mut impl Rng, vars: &[String], params: &[String]) -> VarRef {
    let name = if vars.is_empty() || r.random_ratio(1, 8) {
        format!("u{}", r.random_range(0..3))
    } else {
        vars.choose(r).expect("nonempty").clone()
    };
    let args = (0..r.random_range(0..3))
        .map(|_| match params.choose(r) {
            Some(p) if r.random_bool(0.5) => Arg::Param(p.clone()),
            _ => Arg::Entity(format!("k{}", r.random_range(0..4))),
        })
        .collect();
    VarRef { name, args }
}

fn term(r: &mut impl Rng, vars: &[String], params: &[String]) -> Term {
    match r.random_range(0..4) {
        0 | 1 => Term::Var(var_ref(r, vars, params)),
        2 if !params.is_empty() => Term::Param(params.choose(r).expect("nonempty").clone()),
        _ => Term::Lit(value(r)),
    }
}

fn condition(r: &mut impl Rng, vars: &[String], params: &[String]) -> Condition {
    Condition { lhs: term(r, vars, params), op: *OPS.choose(r).expect("nonempty"), rhs: term(r, vars, params) }
}

/// A structurally complete model: every line it serializes to parses, but it
/// need not pass semantic checking.
pub fn random_model(r: &mut impl Rng) -> ProblemModel {
    let sorts: Vec<EntitySort> = (0..r.random_range(0..4))
        .map(|i| EntitySort {
            name: format!("s{i}"),
            members: (0..r.random_range(1..4)).map(|j| format!("k{j}")).collect(),
        })
        .collect();
    let sort_names: Vec<String> = sorts.iter().map(|s| s.name.clone()).chain(["s9".to_string()]).collect();
    let var_names: Vec<String> = (0..r.random_range(0..5)).map(|i| format!("v{i}")).collect();
    let variables = var_names
        .iter()
        .map(|name| {
            let domain = match r.random_range(0..3) {
                0 => Domain::Bool,
                1 => {
                    let lo = r.random_range(-5..=5);
                    Domain::Int { lo, hi: lo + r.random_range(0..=6) }
                }
                _ => Domain::Enum { members: (0..r.random_range(1..4)).map(|j| format!("e{j}")).collect() },
            };
            VariableDecl {
                name: name.clone(),
                params: (0..r.random_range(0..3)).map(|_| sort_names.choose(r).expect("nonempty").clone()).collect(),
                domain,
                initial: value(r),
                overrides: (0..r.random_range(0..3))
                    .map(|_| InitOverride {
                        args: (0..r.random_range(0..3)).map(|j| format!("k{j}")).collect(),
                        value: value(r),
                    })
                    .collect(),
            }
        })
        .collect();
    let actions = (0..r.random_range(0..4))
        .map(|i| {
            let params: Vec<ActionParam> = (0..r.random_range(0..3))
                .map(|j| ActionParam { name: format!("p{j}"), sort: sort_names.choose(r).expect("nonempty").clone() })
                .collect();
            let pnames: Vec<String> = params.iter().map(|p| p.name.clone()).collect();
            ActionSchema {
                name: format!("a{i}"),
                preconditions: (0..r.random_range(0..4)).map(|_| condition(r, &var_names, &pnames)).collect(),
                effects: (0..r.random_range(0..4))
                    .map(|_| Effect {
                        target: var_ref(r, &var_names, &pnames),
                        update: if r.random_bool(0.5) {
                            Update::Assign(term(r, &var_names, &pnames))
                        } else {
                            Update::Delta(r.random_range(-5..=5))
                        },
                    })
                    .collect(),
                params,
            }
        })
        .collect();
    ProblemModel {
        name: format!("random {}", r.random_range(0..1000)),
        sorts,
        variables,
        actions,
        constraints: (0..r.random_range(0..3)).map(|_| condition(r, &var_names, &[])).collect(),
        goal: (0..r.random_range(0..3)).map(|_| condition(r, &var_names, &[])).collect(),
    }
}

fn step(index: usize, raw: String, parsed: Option<StepCall>) -> PlanStep {
    PlanStep { index, raw, parsed }
}

/// Renumbers steps 1..n, keeping each step's raw text consistent with it.
pub fn renumber(steps: Vec<PlanStep>) -> Plan {
    let steps = steps
        .into_iter()
        .enumerate()
        .map(|(i, s)| match s.parsed {
            Some(call) => step(i + 1, format!("step {}: {call}", i + 1), Some(call)),
            None => step(i + 1, s.raw, None),
        })
        .collect();
    Plan { steps }
}

/// A random step over `model`: mostly ground calls, sometimes one of the
/// malformed kinds a plan can contain.
pub fn random_step(r: &mut impl Rng, calls: &[StepCall]) -> PlanStep {
    let mut call = calls.choose(r).cloned().unwrap_or(StepCall { action: "noop".into(), args: vec![] });
    match r.random_range(0..20) {
        0 => call.action.push_str("_x"),
        1 => {
            if call.args.pop().is_none() {
                call.args.push("k0".into());
            }
        }
        2 if !call.args.is_empty() => {
            let i = r.random_range(0..call.args.len());
            call.args[i] = "nobody".into();
        }
        3 => return step(0, "then finish the job".into(), None),
        _ => {}
    }
    step(0, String::new(), Some(call))
}

pub fn random_plan(r: &mut impl Rng, model: &ProblemModel, max_len: usize) -> Plan {
    let calls = ground_calls(model);
    let n = r.random_range(0..=max_len);
    renumber((0..n).map(|_| random_step(r, &calls)).collect())
}

pub fn plan_of(calls: impl IntoIterator<Item = StepCall>) -> Plan {
    Plan::from_calls(calls)
}

pub const E2E_STRATEGIES: [mfrkit::Strategy; 3] =
    [mfrkit::Strategy::Cot, mfrkit::Strategy::React, mfrkit::Strategy::MfrTwoCall];

pub fn fixture_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/replay.jsonl")
}

/// Runs every corpus task under the end-to-end strategies against `backend`,
/// then scores and reports through the same file-level path the CLI uses.
/// Returns the bytes of `report.json` and `plot.csv`.
pub fn replay_report(backend: &dyn mfrkit::Backend) -> (Vec<u8>, Vec<u8>) {
    use mfrkit::eval::{load_transcripts, read_scores, report_from_scores, score_all, write_scores, write_transcript};
    let dir = tempfile::tempdir().expect("tempdir");
    let tdir = dir.path().join("transcripts");
    for task in corpus() {
        for s in E2E_STRATEGIES {
            let t = mfrkit::run_strategy(task, s, backend, 0.0);
            write_transcript(&tdir, &t).expect("write transcript");
        }
    }
    let out = dir.path().join("out");
    std::fs::create_dir_all(&out).expect("out dir");
    let scores = score_all(&Corpus::default(), &load_transcripts(&tdir).expect("load")).expect("score");
    write_scores(&out.join("scores.json"), &scores).expect("write scores");
    let scores = read_scores(&out.join("scores.json")).expect("read scores");
    report_from_scores(&scores, &mfrkit::Thresholds::default(), &out).expect("report");
    (std::fs::read(out.join("report.json")).expect("report.json"), std::fs::read(out.join("plot.csv")).expect("plot.csv"))
}
