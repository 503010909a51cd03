//! Brute-force planner and reference executor.
//!
//! Nothing here calls into the validator or the condition evaluator in
//! `model`: the model is compiled into slot-indexed states and fully grounded
//! actions, and all semantics are re-implemented over that form so the two
//! code paths can be tested against each other.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Arg, CmpOp, Condition, Domain, ProblemModel, Term, Update, Value, VarRef};
use crate::parser::{Plan, StepCall};

#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub max_depth: usize,
    /// Bound on distinct states visited (BFS) or nodes generated (enumeration).
    pub state_ceiling: usize,
    pub frontier_ceiling: usize,
    pub cancel: Option<CancelToken>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { max_depth: 12, state_ceiling: 1_000_000, frontier_ceiling: 1_000_000, cancel: None }
    }
}

impl SearchConfig {
    pub fn with_depth(max_depth: usize) -> Self {
        SearchConfig { max_depth, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub states_expanded: u64,
    pub frontier_peak: u64,
    pub depth_reached: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("search ceiling exceeded: {what} passed {limit}")]
    CeilingExceeded { what: &'static str, limit: usize },
    #[error("search cancelled")]
    Cancelled,
    #[error("enumeration depth {0} exceeds the maximum of 8")]
    DepthTooLarge(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accept,
    /// `step` is 0 for the initial state and `|plan| + 1` for the goal check.
    Reject { step: usize, reason: String },
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

// ---------------------------------------------------------------------------
// Compiled form

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum OVal {
    B(bool),
    I(i64),
    S(u32),
}

#[derive(Debug, Clone)]
enum Operand {
    Slot(usize),
    Const(OVal),
    /// A reference that names no grounded variable.
    Dangling,
}

#[derive(Debug, Clone)]
struct Cmp {
    lhs: Operand,
    op: CmpOp,
    rhs: Operand,
    text: String,
}

#[derive(Debug, Clone)]
enum Write {
    Set(Operand),
    Add(i64),
}

#[derive(Debug, Clone)]
struct GAction {
    name: String,
    args: Vec<String>,
    pre: Vec<Cmp>,
    /// `None` target: the effect names no grounded variable.
    eff: Vec<(Option<usize>, Write)>,
}

#[derive(Debug, Clone)]
enum SlotDomain {
    Bool,
    Enum(HashSet<u32>),
    Int(i64, i64),
}

struct Compiled {
    domains: Vec<SlotDomain>,
    init: Vec<OVal>,
    actions: Vec<GAction>,
    index: HashMap<(String, Vec<String>), usize>,
    schemas: HashSet<String>,
    constraints: Vec<Cmp>,
    goal: Vec<Cmp>,
}

#[derive(Default)]
struct Interner(HashMap<String, u32>);

impl Interner {
    fn id(&mut self, s: &str) -> u32 {
        let n = self.0.len() as u32;
        *self.0.entry(s.to_string()).or_insert(n)
    }
}

fn product(lists: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = vec![Vec::new()];
    for list in lists {
        let mut next = Vec::with_capacity(out.len() * list.len());
        for prefix in &out {
            for item in list {
                let mut p = prefix.clone();
                p.push(item.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

fn members_of(model: &ProblemModel, sort: &str) -> Vec<String> {
    model.sorts.iter().find(|s| s.name == sort).map(|s| s.members.clone()).unwrap_or_default()
}

impl Compiled {
    fn new(model: &ProblemModel) -> Compiled {
        let mut syms = Interner::default();
        let mut slots: HashMap<(String, Vec<String>), usize> = HashMap::new();
        let mut domains = Vec::new();
        let mut init = Vec::new();
        let conv = |v: &Value, syms: &mut Interner| match v {
            Value::Bool(b) => OVal::B(*b),
            Value::Int(i) => OVal::I(*i),
            Value::Sym(s) => OVal::S(syms.id(s)),
        };

        for decl in &model.variables {
            let lists: Vec<Vec<String>> = decl.params.iter().map(|p| members_of(model, p)).collect();
            let dom = match &decl.domain {
                Domain::Bool => SlotDomain::Bool,
                Domain::Enum { members } => SlotDomain::Enum(members.iter().map(|m| syms.id(m)).collect()),
                Domain::Int { lo, hi } => SlotDomain::Int(*lo, *hi),
            };
            let first = domains.len();
            for args in product(&lists) {
                let slot = domains.len();
                if let std::collections::hash_map::Entry::Vacant(e) = slots.entry((decl.name.clone(), args)) {
                    e.insert(slot);
                    domains.push(dom.clone());
                    init.push(conv(&decl.initial, &mut syms));
                }
            }
            for ov in &decl.overrides {
                if let Some(&s) = slots.get(&(decl.name.clone(), ov.args.clone())) {
                    if s >= first {
                        init[s] = conv(&ov.value, &mut syms);
                    }
                }
            }
        }

        let compile_ref = |r: &VarRef, bind: &HashMap<&str, &str>| -> Operand {
            let mut args = Vec::with_capacity(r.args.len());
            for a in &r.args {
                match a {
                    Arg::Param(p) => match bind.get(p.as_str()) {
                        Some(e) => args.push(e.to_string()),
                        None => return Operand::Dangling,
                    },
                    Arg::Entity(e) => args.push(e.clone()),
                }
            }
            slots.get(&(r.name.clone(), args)).map(|&s| Operand::Slot(s)).unwrap_or(Operand::Dangling)
        };
        let compile_term = |t: &Term, bind: &HashMap<&str, &str>, syms: &mut Interner| -> Operand {
            match t {
                Term::Var(r) => compile_ref(r, bind),
                Term::Param(p) => match bind.get(p.as_str()) {
                    Some(e) => Operand::Const(OVal::S(syms.id(e))),
                    None => Operand::Dangling,
                },
                Term::Lit(v) => Operand::Const(conv(v, syms)),
            }
        };
        let compile_cmp = |c: &Condition, bind: &HashMap<&str, &str>, syms: &mut Interner| -> Cmp {
            Cmp {
                lhs: compile_term(&c.lhs, bind, syms),
                op: c.op,
                rhs: compile_term(&c.rhs, bind, syms),
                text: c.to_string(),
            }
        };

        let empty = HashMap::new();
        let constraints = model.constraints.iter().map(|c| compile_cmp(c, &empty, &mut syms)).collect();
        let goal = model.goal.iter().map(|c| compile_cmp(c, &empty, &mut syms)).collect();

        let mut actions = Vec::new();
        let mut schemas = HashSet::new();
        for schema in &model.actions {
            schemas.insert(schema.name.clone());
            let lists: Vec<Vec<String>> = schema.params.iter().map(|p| members_of(model, &p.sort)).collect();
            for args in product(&lists) {
                let bind: HashMap<&str, &str> =
                    schema.params.iter().zip(&args).map(|(p, a)| (p.name.as_str(), a.as_str())).collect();
                let pre = schema.preconditions.iter().map(|c| compile_cmp(c, &bind, &mut syms)).collect();
                let eff = schema
                    .effects
                    .iter()
                    .map(|e| {
                        let target = match compile_ref(&e.target, &bind) {
                            Operand::Slot(s) => Some(s),
                            _ => None,
                        };
                        let w = match &e.update {
                            Update::Assign(t) => Write::Set(compile_term(t, &bind, &mut syms)),
                            Update::Delta(d) => Write::Add(*d),
                        };
                        (target, w)
                    })
                    .collect();
                actions.push((schema.name.clone(), args, pre, eff));
            }
        }
        // Total order: action name, then argument positions in declared member order.
        let member_pos = |sort: &str, m: &str| members_of(model, sort).iter().position(|x| x == m).unwrap_or(usize::MAX);
        let key = |name: &str, args: &[String]| -> (String, Vec<usize>) {
            let schema = model.actions.iter().find(|a| a.name == name).expect("schema");
            (name.to_string(), schema.params.iter().zip(args).map(|(p, a)| member_pos(&p.sort, a)).collect())
        };
        let mut keyed: Vec<_> = actions.into_iter().map(|a| (key(&a.0, &a.1), a)).collect();
        keyed.sort_by(|x, y| x.0.cmp(&y.0));
        let actions: Vec<GAction> =
            keyed.into_iter().map(|(_, (name, args, pre, eff))| GAction { name, args, pre, eff }).collect();
        let mut index = HashMap::new();
        for (i, a) in actions.iter().enumerate() {
            index.entry((a.name.clone(), a.args.clone())).or_insert(i);
        }

        Compiled { domains, init, actions, index, schemas, constraints, goal }
    }

    fn read(&self, o: &Operand, s: &[OVal]) -> Option<OVal> {
        match o {
            Operand::Slot(i) => Some(s[*i]),
            Operand::Const(v) => Some(*v),
            Operand::Dangling => None,
        }
    }

    /// `None` when the comparison cannot be evaluated.
    fn holds(&self, c: &Cmp, s: &[OVal]) -> Option<bool> {
        let a = self.read(&c.lhs, s)?;
        let b = self.read(&c.rhs, s)?;
        match (a, b) {
            (OVal::I(x), OVal::I(y)) => Some(match c.op {
                CmpOp::Eq => x == y,
                CmpOp::Ne => x != y,
                CmpOp::Lt => x < y,
                CmpOp::Le => x <= y,
                CmpOp::Gt => x > y,
                CmpOp::Ge => x >= y,
            }),
            (OVal::B(_), OVal::B(_)) | (OVal::S(_), OVal::S(_)) => match c.op {
                CmpOp::Eq => Some(a == b),
                CmpOp::Ne => Some(a != b),
                _ => None,
            },
            _ => None,
        }
    }

    fn in_domain(&self, slot: usize, v: OVal) -> bool {
        match (&self.domains[slot], v) {
            (SlotDomain::Bool, OVal::B(_)) => true,
            (SlotDomain::Enum(set), OVal::S(x)) => set.contains(&x),
            (SlotDomain::Int(lo, hi), OVal::I(x)) => *lo <= x && x <= *hi,
            _ => false,
        }
    }

    fn first_broken(&self, conds: &[Cmp], s: &[OVal]) -> Option<String> {
        conds.iter().find(|c| self.holds(c, s) != Some(true)).map(|c| c.text.clone())
    }

    fn successor(&self, a: &GAction, s: &[OVal]) -> Result<Vec<OVal>, String> {
        if let Some(c) = self.first_broken(&a.pre, s) {
            return Err(format!("precondition `{c}` of {}", a.name));
        }
        let mut written: Vec<(usize, OVal)> = Vec::with_capacity(a.eff.len());
        for (target, w) in &a.eff {
            let slot = target.ok_or_else(|| format!("{} writes an unknown variable", a.name))?;
            let v = match w {
                Write::Set(o) => self.read(o, s).ok_or_else(|| format!("{} reads an unknown term", a.name))?,
                Write::Add(d) => match s[slot] {
                    OVal::I(x) => OVal::I(x.checked_add(*d).ok_or("integer overflow")?),
                    _ => return Err(format!("{} adds to a non-integer", a.name)),
                },
            };
            if !self.in_domain(slot, v) {
                return Err(format!("{} writes outside a domain", a.name));
            }
            if written.iter().any(|(t, _)| *t == slot) {
                return Err(format!("{} writes one variable twice", a.name));
            }
            written.push((slot, v));
        }
        let mut next = s.to_vec();
        for (slot, v) in written {
            next[slot] = v;
        }
        if let Some(c) = self.first_broken(&self.constraints, &next) {
            return Err(format!("constraint `{c}` after {}", a.name));
        }
        Ok(next)
    }

    fn call(&self, i: usize) -> StepCall {
        StepCall { action: self.actions[i].name.clone(), args: self.actions[i].args.clone() }
    }
}

fn check_cancel(config: &SearchConfig) -> Result<(), OracleError> {
    match &config.cancel {
        Some(t) if t.is_cancelled() => Err(OracleError::Cancelled),
        _ => Ok(()),
    }
}

/// Breadth-first search for a shortest plan reaching the goal. Among plans of
/// equal length the lexicographically smallest (action name, then argument
/// member positions) is returned.
pub fn solve(model: &ProblemModel, config: &SearchConfig) -> Result<(Option<Plan>, SearchStats), OracleError> {
    let c = Compiled::new(model);
    let mut stats = SearchStats::default();
    if c.first_broken(&c.constraints, &c.init).is_some() {
        return Ok((None, stats));
    }
    if c.first_broken(&c.goal, &c.init).is_none() {
        return Ok((Some(Plan::default()), stats));
    }

    // Node i: (state, parent node, action, depth).
    let mut nodes: Vec<(Vec<OVal>, usize, usize, usize)> = vec![(c.init.clone(), usize::MAX, usize::MAX, 0)];
    let mut seen: HashSet<Vec<OVal>> = HashSet::from([c.init.clone()]);
    let mut queue: VecDeque<usize> = VecDeque::from([0]);
    stats.frontier_peak = 1;

    let path = |nodes: &Vec<(Vec<OVal>, usize, usize, usize)>, mut i: usize| {
        let mut acts = Vec::new();
        while nodes[i].1 != usize::MAX {
            acts.push(nodes[i].2);
            i = nodes[i].1;
        }
        acts.reverse();
        Plan::from_calls(acts.into_iter().map(|a| c.call(a)))
    };

    while let Some(n) = queue.pop_front() {
        let depth = nodes[n].3;
        if depth >= config.max_depth {
            continue;
        }
        if stats.states_expanded % 1024 == 0 {
            check_cancel(config)?;
        }
        stats.states_expanded += 1;
        for (ai, a) in c.actions.iter().enumerate() {
            let Ok(next) = c.successor(a, &nodes[n].0) else { continue };
            if seen.contains(&next) {
                continue;
            }
            seen.insert(next.clone());
            if seen.len() > config.state_ceiling {
                return Err(OracleError::CeilingExceeded { what: "visited states", limit: config.state_ceiling });
            }
            let goal = c.first_broken(&c.goal, &next).is_none();
            nodes.push((next, n, ai, depth + 1));
            stats.depth_reached = stats.depth_reached.max(depth as u64 + 1);
            let id = nodes.len() - 1;
            if goal {
                return Ok((Some(path(&nodes, id)), stats));
            }
            queue.push_back(id);
            if queue.len() > config.frontier_ceiling {
                return Err(OracleError::CeilingExceeded { what: "frontier", limit: config.frontier_ceiling });
            }
            stats.frontier_peak = stats.frontier_peak.max(queue.len() as u64);
        }
    }
    Ok((None, stats))
}

/// Every action sequence of exactly `exact_depth` steps that executes without
/// a violation, in lexicographic order. The goal is not required.
pub fn enumerate_valid_plans(
    model: &ProblemModel,
    exact_depth: usize,
    config: &SearchConfig,
) -> Result<Vec<Plan>, OracleError> {
    if exact_depth > 8 {
        return Err(OracleError::DepthTooLarge(exact_depth));
    }
    let c = Compiled::new(model);
    if c.first_broken(&c.constraints, &c.init).is_some() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut generated = 0usize;
    fn dfs(
        c: &Compiled,
        s: &[OVal],
        depth: usize,
        stack: &mut Vec<usize>,
        out: &mut Vec<Plan>,
        generated: &mut usize,
        config: &SearchConfig,
    ) -> Result<(), OracleError> {
        if stack.len() == depth {
            out.push(Plan::from_calls(stack.iter().map(|&a| c.call(a))));
            return Ok(());
        }
        for (ai, a) in c.actions.iter().enumerate() {
            let Ok(next) = c.successor(a, s) else { continue };
            *generated += 1;
            if *generated > config.state_ceiling {
                return Err(OracleError::CeilingExceeded { what: "generated nodes", limit: config.state_ceiling });
            }
            if generated.is_multiple_of(1024) {
                check_cancel(config)?;
            }
            stack.push(ai);
            dfs(c, &next, depth, stack, out, generated, config)?;
            stack.pop();
        }
        Ok(())
    }
    dfs(&c, &c.init, exact_depth, &mut stack, &mut out, &mut generated, config)?;
    Ok(out)
}

/// Executes `plan` step by step; accepts iff every step applies, every state
/// satisfies every constraint, and the goal holds at the end.
pub fn execute_reference(model: &ProblemModel, plan: &Plan) -> Verdict {
    let c = Compiled::new(model);
    if let Some(k) = c.first_broken(&c.constraints, &c.init) {
        return Verdict::Reject { step: 0, reason: format!("initial state breaks `{k}`") };
    }
    let mut state = c.init.clone();
    for (i, step) in plan.steps.iter().enumerate() {
        let n = i + 1;
        let Some(call) = &step.parsed else {
            return Verdict::Reject { step: n, reason: "unparsed step".into() };
        };
        if !c.schemas.contains(&call.action) {
            return Verdict::Reject { step: n, reason: format!("unknown action {}", call.action) };
        }
        let Some(&ai) = c.index.get(&(call.action.clone(), call.args.clone())) else {
            return Verdict::Reject { step: n, reason: format!("no grounding {call}") };
        };
        match c.successor(&c.actions[ai], &state) {
            Ok(next) => state = next,
            Err(reason) => return Verdict::Reject { step: n, reason },
        }
    }
    match c.first_broken(&c.goal, &state) {
        None => Verdict::Accept,
        Some(g) => Verdict::Reject { step: plan.len() + 1, reason: format!("goal `{g}` unmet") },
    }
}

/// All ground action calls of `model` in the planner's order.
pub fn ground_calls(model: &ProblemModel) -> Vec<StepCall> {
    let c = Compiled::new(model);
    (0..c.actions.len()).map(|i| c.call(i)).collect()
}
