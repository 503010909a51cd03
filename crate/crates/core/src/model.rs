//! Domain types for explicit problem models and the pure semantics of
//! condition evaluation and action grounding.
//!
//! A [`ProblemModel`] names the entities of a problem, the finite-domain
//! state variables defined over them, the action schemas that change those
//! variables, the invariants that must hold in every state, and a goal.
//! Everything here is an immutable value; evaluation never mutates.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A named collection of entity instances (`entity nurse: alice, bob`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntitySort {
    pub name: String,
    pub members: Vec<String>,
}

impl EntitySort {
    pub fn contains(&self, member: &str) -> bool {
        self.members.iter().any(|m| m == member)
    }
}

/// A concrete value held by a grounded state variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Sym(String),
}

impl Value {
    pub fn sym(s: impl Into<String>) -> Self {
        Value::Sym(s.into())
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Bool(_) => ValueKind::Bool,
            Value::Int(_) => ValueKind::Int,
            Value::Sym(_) => ValueKind::Sym,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => f.write_str(s),
        }
    }
}

/// Coarse value class used for type checking comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueKind {
    Bool,
    Int,
    Sym,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueKind::Bool => "bool",
            ValueKind::Int => "int",
            ValueKind::Sym => "symbol",
        })
    }
}

/// The finite set of values a variable may take.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Bool,
    Enum { members: Vec<String> },
    Int { lo: i64, hi: i64 },
}

impl Domain {
    pub fn contains(&self, value: &Value) -> bool {
        match (self, value) {
            (Domain::Bool, Value::Bool(_)) => true,
            (Domain::Enum { members }, Value::Sym(s)) => members.iter().any(|m| m == s),
            (Domain::Int { lo, hi }, Value::Int(i)) => lo <= i && i <= hi,
            _ => false,
        }
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            Domain::Bool => ValueKind::Bool,
            Domain::Enum { .. } => ValueKind::Sym,
            Domain::Int { .. } => ValueKind::Int,
        }
    }

    /// Number of distinct values. Empty for malformed integer ranges.
    pub fn size(&self) -> u128 {
        match self {
            Domain::Bool => 2,
            Domain::Enum { members } => members.len() as u128,
            Domain::Int { lo, hi } if lo <= hi => (*hi as i128 - *lo as i128 + 1) as u128,
            Domain::Int { .. } => 0,
        }
    }

    /// All values in canonical order (false before true, ascending ints,
    /// enumeration order).
    pub fn values(&self) -> Vec<Value> {
        match self {
            Domain::Bool => vec![Value::Bool(false), Value::Bool(true)],
            Domain::Enum { members } => members.iter().cloned().map(Value::Sym).collect(),
            Domain::Int { lo, hi } => (*lo..=*hi).map(Value::Int).collect(),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Bool => f.write_str("bool"),
            Domain::Enum { members } => write!(f, "{{{}}}", members.join(", ")),
            Domain::Int { lo, hi } => write!(f, "int[{lo}..{hi}]"),
        }
    }
}

/// `init NAME(member, ...) = VALUE`
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InitOverride {
    pub args: Vec<String>,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariableDecl {
    pub name: String,
    /// Sort names, one per parameter position.
    pub params: Vec<String>,
    pub domain: Domain,
    /// Default initial value for every grounding.
    pub initial: Value,
    /// Per-grounding overrides; later entries win.
    pub overrides: Vec<InitOverride>,
}

/// An argument inside a variable reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arg {
    /// An action parameter, resolved through the binding.
    Param(String),
    /// A concrete entity member.
    Entity(String),
}

impl Arg {
    pub fn name(&self) -> &str {
        match self {
            Arg::Param(s) | Arg::Entity(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarRef {
    pub name: String,
    pub args: Vec<Arg>,
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            let args: Vec<&str> = self.args.iter().map(Arg::name).collect();
            write!(f, "({})", args.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(VarRef),
    Param(String),
    Lit(Value),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => v.fmt(f),
            Term::Param(p) => f.write_str(p),
            Term::Lit(v) => v.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn is_order(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    pub fn apply_int(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A single comparison. Preconditions, constraints and goals are
/// conjunctions, represented as slices of these.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub lhs: Term,
    pub op: CmpOp,
    pub rhs: Term,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op, self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Update {
    /// `target := term`
    Assign(Term),
    /// `target := target + delta` (negative for `-`)
    Delta(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Effect {
    pub target: VarRef,
    pub update: Update,
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.update {
            Update::Assign(t) => write!(f, "{} := {}", self.target, t),
            Update::Delta(d) if *d < 0 => write!(f, "{} := {} - {}", self.target, self.target, d.unsigned_abs()),
            Update::Delta(d) => write!(f, "{} := {} + {}", self.target, self.target, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionParam {
    pub name: String,
    pub sort: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<ActionParam>,
    pub preconditions: Vec<Condition>,
    pub effects: Vec<Effect>,
}

impl ActionSchema {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProblemModel {
    pub name: String,
    pub sorts: Vec<EntitySort>,
    pub variables: Vec<VariableDecl>,
    pub actions: Vec<ActionSchema>,
    pub constraints: Vec<Condition>,
    pub goal: Vec<Condition>,
}

impl ProblemModel {
    pub fn sort(&self, name: &str) -> Option<&EntitySort> {
        self.sorts.iter().find(|s| s.name == name)
    }

    pub fn variable(&self, name: &str) -> Option<&VariableDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Every grounding of `var`, in declaration order of its parameter sorts'
    /// members (rightmost parameter varies fastest). Empty if a sort is missing.
    pub fn groundings(&self, var: &VariableDecl) -> Vec<Vec<String>> {
        let mut sorts = Vec::with_capacity(var.params.len());
        for p in &var.params {
            match self.sort(p) {
                Some(s) => sorts.push(s.members.as_slice()),
                None => return Vec::new(),
            }
        }
        cartesian(&sorts)
    }

    /// Every grounded variable of the model, in declaration order.
    pub fn grounded_variables(&self) -> Vec<GroundVar> {
        self.variables
            .iter()
            .flat_map(|v| {
                self.groundings(v)
                    .into_iter()
                    .map(move |args| GroundVar { name: v.name.clone(), args })
            })
            .collect()
    }
}

pub(crate) fn cartesian(lists: &[&[String]]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = vec![Vec::new()];
    for list in lists {
        let mut next = Vec::with_capacity(out.len() * list.len());
        for prefix in &out {
            for item in list.iter() {
                let mut row = prefix.clone();
                row.push(item.clone());
                next.push(row);
            }
        }
        out = next;
    }
    out
}

/// A state variable with concrete entity arguments, e.g. `location(alice)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundVar {
    pub name: String,
    pub args: Vec<String>,
}

impl GroundVar {
    pub fn new(name: impl Into<String>, args: &[&str]) -> Self {
        GroundVar {
            name: name.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for GroundVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            write!(f, "({})", self.args.join(", "))?;
        }
        Ok(())
    }
}

/// A total assignment of values to grounded variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct State {
    values: BTreeMap<GroundVar, Value>,
}

impl State {
    pub fn get(&self, var: &GroundVar) -> Option<&Value> {
        self.values.get(var)
    }

    pub fn contains(&self, var: &GroundVar) -> bool {
        self.values.contains_key(var)
    }

    pub(crate) fn set(&mut self, var: GroundVar, value: Value) {
        self.values.insert(var, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroundVar, &Value)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Variables whose value differs from `before`, with (old, new) values.
    pub fn diff<'a>(&'a self, before: &'a State) -> Vec<(&'a GroundVar, Option<&'a Value>, &'a Value)> {
        self.values
            .iter()
            .filter_map(|(k, v)| match before.values.get(k) {
                Some(old) if old == v => None,
                old => Some((k, old, v)),
            })
            .collect()
    }
}

impl FromIterator<(GroundVar, Value)> for State {
    fn from_iter<T: IntoIterator<Item = (GroundVar, Value)>>(iter: T) -> Self {
        State { values: iter.into_iter().collect() }
    }
}

/// An action schema instantiated with concrete entity arguments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundAction {
    pub schema: String,
    pub args: Vec<String>,
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.schema, self.args.join(", "))
    }
}

/// Mapping from action parameter names to entity members.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Binding {
    pairs: Vec<(String, String)>,
}

impl Binding {
    pub fn new() -> Self {
        Binding::default()
    }

    pub fn for_action(schema: &ActionSchema, args: &[String]) -> Self {
        Binding {
            pairs: schema
                .params
                .iter()
                .zip(args)
                .map(|(p, a)| (p.name.clone(), a.clone()))
                .collect(),
        }
    }

    pub fn with(mut self, param: &str, entity: &str) -> Self {
        self.pairs.push((param.to_string(), entity.to_string()));
        self
    }

    pub fn get(&self, param: &str) -> Option<&str> {
        self.pairs.iter().find(|(p, _)| p == param).map(|(_, e)| e.as_str())
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs.iter().map(|(p, e)| format!("{p}={e}")).collect();
        f.write_str(&parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unresolved reference `{0}`")]
    UnresolvedReference(String),
    #[error("cannot compare {lhs} with {rhs} using `{op}`")]
    TypeMismatch { lhs: String, op: CmpOp, rhs: String },
    #[error("undefined action `{0}`")]
    UndefinedAction(String),
    #[error("action `{action}` takes {expected} argument(s), got {found}")]
    ArityMismatch { action: String, expected: usize, found: usize },
    #[error("`{entity}` is not a member of sort `{sort}`")]
    UndefinedEntity { entity: String, sort: String },
}

/// Builds the initial state from declared defaults and overrides.
///
/// Overrides apply in declaration order, so the last write for a grounding
/// wins. Overrides naming a grounding that does not exist are ignored; the
/// semantic checker reports them.
pub fn initial_state(model: &ProblemModel) -> State {
    let mut state = State::default();
    for var in &model.variables {
        for args in model.groundings(var) {
            state.set(GroundVar { name: var.name.clone(), args }, var.initial.clone());
        }
        for ov in &var.overrides {
            let key = GroundVar { name: var.name.clone(), args: ov.args.clone() };
            if state.contains(&key) {
                state.set(key, ov.value.clone());
            }
        }
    }
    state
}

/// Grounds a variable reference under `binding`.
pub fn ground_var_ref(var: &VarRef, binding: &Binding) -> Result<GroundVar, ModelError> {
    let mut args = Vec::with_capacity(var.args.len());
    for a in &var.args {
        match a {
            Arg::Param(p) => match binding.get(p) {
                Some(e) => args.push(e.to_string()),
                None => return Err(ModelError::UnresolvedReference(p.clone())),
            },
            Arg::Entity(e) => args.push(e.clone()),
        }
    }
    Ok(GroundVar { name: var.name.clone(), args })
}

/// Resolves a term to a value in `state`.
pub fn evaluate_term(term: &Term, state: &State, binding: &Binding) -> Result<Value, ModelError> {
    match term {
        Term::Lit(v) => Ok(v.clone()),
        Term::Param(p) => binding
            .get(p)
            .map(Value::sym)
            .ok_or_else(|| ModelError::UnresolvedReference(p.clone())),
        Term::Var(v) => {
            let key = ground_var_ref(v, binding)?;
            state
                .get(&key)
                .cloned()
                .ok_or_else(|| ModelError::UnresolvedReference(key.to_string()))
        }
    }
}

/// Evaluates one comparison.
pub fn evaluate_condition(cond: &Condition, state: &State, binding: &Binding) -> Result<bool, ModelError> {
    let lhs = evaluate_term(&cond.lhs, state, binding)?;
    let rhs = evaluate_term(&cond.rhs, state, binding)?;
    compare(&lhs, cond.op, &rhs)
}

/// True iff every comparison holds; the empty conjunction is true.
pub fn evaluate_conjunction(conds: &[Condition], state: &State, binding: &Binding) -> Result<bool, ModelError> {
    for c in conds {
        if !evaluate_condition(c, state, binding)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub(crate) fn compare(lhs: &Value, op: CmpOp, rhs: &Value) -> Result<bool, ModelError> {
    let mismatch = || ModelError::TypeMismatch { lhs: lhs.to_string(), op, rhs: rhs.to_string() };
    match (lhs, rhs) {
        (Value::Int(a), Value::Int(b)) => Ok(op.apply_int(*a, *b)),
        _ if op.is_order() => Err(mismatch()),
        _ if lhs.kind() != rhs.kind() => Err(mismatch()),
        _ => Ok((lhs == rhs) == (op == CmpOp::Eq)),
    }
}

/// Checks arity and sort membership of `args` against `schema`.
pub fn ground_action(schema: &ActionSchema, args: &[String], model: &ProblemModel) -> Result<GroundAction, ModelError> {
    if args.len() != schema.arity() {
        return Err(ModelError::ArityMismatch {
            action: schema.name.clone(),
            expected: schema.arity(),
            found: args.len(),
        });
    }
    for (param, arg) in schema.params.iter().zip(args) {
        let member = model.sort(&param.sort).is_some_and(|s| s.contains(arg));
        if !member {
            return Err(ModelError::UndefinedEntity { entity: arg.clone(), sort: param.sort.clone() });
        }
    }
    Ok(GroundAction { schema: schema.name.clone(), args: args.to_vec() })
}
