//! Semantic checks run on a parsed model before it is simulated or planned over.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{
    ActionSchema, Arg, CmpOp, Condition, Domain, ProblemModel, Term, Update, Value, ValueKind, VarRef,
};
use crate::parser::Locator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IssueKind {
    DuplicateName,
    UndefinedReference,
    TypeMismatch,
    InitialOutOfDomain,
    UnreachableGoalSymbol,
    ConflictingEffects,
}

impl IssueKind {
    pub const ALL: [IssueKind; 6] = [
        IssueKind::DuplicateName,
        IssueKind::UndefinedReference,
        IssueKind::TypeMismatch,
        IssueKind::InitialOutOfDomain,
        IssueKind::UnreachableGoalSymbol,
        IssueKind::ConflictingEffects,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IssueKind::DuplicateName => "duplicate-name",
            IssueKind::UndefinedReference => "undefined-reference",
            IssueKind::TypeMismatch => "type-mismatch",
            IssueKind::InitialOutOfDomain => "initial-out-of-domain",
            IssueKind::UnreachableGoalSymbol => "unreachable-goal-symbol",
            IssueKind::ConflictingEffects => "conflicting-effects",
        }
    }
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticIssue {
    pub kind: IssueKind,
    /// Dotted path to the offending declaration, e.g. `action.move.pre`.
    pub subject: String,
    pub message: String,
    #[serde(skip)]
    pub locator: Option<Locator>,
}

impl fmt::Display for SemanticIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.kind, self.subject, self.message)
    }
}

struct Checker<'m> {
    model: &'m ProblemModel,
    symbols: HashSet<&'m str>,
    issues: Vec<SemanticIssue>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Context {
    Pre,
    Constraint,
    Goal,
}

impl<'m> Checker<'m> {
    fn push(&mut self, kind: IssueKind, subject: impl Into<String>, loc: Locator, message: impl Into<String>) {
        self.issues.push(SemanticIssue { kind, subject: subject.into(), message: message.into(), locator: Some(loc) });
    }

    fn check_sorts(&mut self) {
        let mut seen = HashSet::new();
        for (i, s) in self.model.sorts.iter().enumerate() {
            let subject = format!("sort.{}", s.name);
            if !seen.insert(s.name.as_str()) {
                self.push(IssueKind::DuplicateName, &subject, Locator::Sort(i), format!("sort `{}` declared twice", s.name));
            }
            let mut members = HashSet::new();
            for m in &s.members {
                if !members.insert(m.as_str()) {
                    self.push(IssueKind::DuplicateName, &subject, Locator::Sort(i), format!("member `{m}` listed twice"));
                }
            }
        }
    }

    fn check_variables(&mut self) {
        let mut seen = HashSet::new();
        for (i, v) in self.model.variables.iter().enumerate() {
            let subject = format!("var.{}", v.name);
            let loc = Locator::Var(i);
            if !seen.insert(v.name.as_str()) {
                self.push(IssueKind::DuplicateName, &subject, loc, format!("variable `{}` declared twice", v.name));
            }
            for p in &v.params {
                if self.model.sort(p).is_none() {
                    self.push(IssueKind::UndefinedReference, &subject, loc, format!("unknown sort `{p}`"));
                }
            }
            match &v.domain {
                Domain::Enum { members } => {
                    let mut m = HashSet::new();
                    for e in members {
                        if !m.insert(e.as_str()) {
                            self.push(IssueKind::DuplicateName, &subject, loc, format!("enumeration lists `{e}` twice"));
                        }
                    }
                    if members.is_empty() {
                        self.push(IssueKind::TypeMismatch, &subject, loc, "empty enumeration");
                    }
                }
                Domain::Int { lo, hi } if lo > hi => {
                    self.push(IssueKind::TypeMismatch, &subject, loc, format!("empty integer range [{lo}..{hi}]"));
                }
                _ => {}
            }
            if !v.domain.contains(&v.initial) {
                self.push(
                    IssueKind::InitialOutOfDomain,
                    &subject,
                    loc,
                    format!("initial value `{}` is not in {}", v.initial, v.domain),
                );
            }
            for (j, ov) in v.overrides.iter().enumerate() {
                let loc = Locator::Init(i, j);
                let subject = format!("var.{}.init", v.name);
                if ov.args.len() != v.params.len() {
                    self.push(
                        IssueKind::TypeMismatch,
                        &subject,
                        loc,
                        format!("`{}` takes {} argument(s), override gives {}", v.name, v.params.len(), ov.args.len()),
                    );
                } else {
                    for (arg, sort) in ov.args.iter().zip(&v.params) {
                        if !self.model.sort(sort).is_some_and(|s| s.contains(arg)) {
                            self.push(
                                IssueKind::UndefinedReference,
                                &subject,
                                loc,
                                format!("`{arg}` is not a member of sort `{sort}`"),
                            );
                        }
                    }
                }
                if !v.domain.contains(&ov.value) {
                    self.push(
                        IssueKind::InitialOutOfDomain,
                        &subject,
                        loc,
                        format!("override value `{}` is not in {}", ov.value, v.domain),
                    );
                }
            }
        }
    }

    /// Types a variable reference, reporting resolution problems.
    fn type_var_ref(
        &mut self,
        v: &VarRef,
        action: Option<&ActionSchema>,
        subject: &str,
        loc: Locator,
    ) -> Option<ValueKind> {
        let Some(decl) = self.model.variable(&v.name) else {
            self.push(IssueKind::UndefinedReference, subject, loc, format!("unknown variable `{}`", v.name));
            return None;
        };
        if decl.params.len() != v.args.len() {
            self.push(
                IssueKind::TypeMismatch,
                subject,
                loc,
                format!("`{}` takes {} argument(s), got {}", v.name, decl.params.len(), v.args.len()),
            );
        } else {
            for (arg, sort) in v.args.iter().zip(&decl.params) {
                match arg {
                    Arg::Param(p) => {
                        let psort = action.and_then(|a| a.params.iter().find(|x| &x.name == p)).map(|x| &x.sort);
                        match psort {
                            None => self.push(IssueKind::UndefinedReference, subject, loc, format!("unknown parameter `{p}`")),
                            Some(s) if s != sort => self.push(
                                IssueKind::TypeMismatch,
                                subject,
                                loc,
                                format!("parameter `{p}` has sort `{s}`, `{}` expects `{sort}`", v.name),
                            ),
                            Some(_) => {}
                        }
                    }
                    Arg::Entity(e) => {
                        if !self.model.sort(sort).is_some_and(|s| s.contains(e)) {
                            self.push(
                                IssueKind::UndefinedReference,
                                subject,
                                loc,
                                format!("`{e}` is not a member of sort `{sort}`"),
                            );
                        }
                    }
                }
            }
        }
        Some(match &decl.domain {
            Domain::Bool => ValueKind::Bool,
            Domain::Int { .. } => ValueKind::Int,
            Domain::Enum { .. } => ValueKind::Sym,
        })
    }

    fn type_term(
        &mut self,
        t: &Term,
        action: Option<&ActionSchema>,
        subject: &str,
        loc: Locator,
    ) -> Option<ValueKind> {
        match t {
            Term::Var(v) => self.type_var_ref(v, action, subject, loc),
            Term::Param(p) => {
                if action.is_some_and(|a| a.params.iter().any(|x| &x.name == p)) {
                    Some(ValueKind::Sym)
                } else {
                    self.push(IssueKind::UndefinedReference, subject, loc, format!("unknown parameter `{p}`"));
                    None
                }
            }
            Term::Lit(Value::Bool(_)) => Some(ValueKind::Bool),
            Term::Lit(Value::Int(_)) => Some(ValueKind::Int),
            Term::Lit(Value::Sym(s)) => {
                if self.symbols.contains(s.as_str()) {
                    Some(ValueKind::Sym)
                } else {
                    self.push(IssueKind::UndefinedReference, subject, loc, format!("unknown name `{s}`"));
                    None
                }
            }
        }
    }

    fn check_condition(
        &mut self,
        c: &Condition,
        action: Option<&ActionSchema>,
        ctx: Context,
        subject: &str,
        loc: Locator,
    ) {
        let lt = self.type_term(&c.lhs, action, subject, loc);
        let rt = self.type_term(&c.rhs, action, subject, loc);
        let (Some(lt), Some(rt)) = (lt, rt) else { return };
        if c.op.is_order() {
            if lt != ValueKind::Int || rt != ValueKind::Int {
                self.push(
                    IssueKind::TypeMismatch,
                    subject,
                    loc,
                    format!("`{c}`: `{}` needs integer operands, got {} and {}", c.op, lt, rt),
                );
            }
            return;
        }
        if lt != rt {
            self.push(
                IssueKind::TypeMismatch,
                subject,
                loc,
                format!("`{c}` compares {} with {}", lt, rt),
            );
            return;
        }
        // A literal that can never equal the variable it is compared with.
        for (var_side, lit_side) in [(&c.lhs, &c.rhs), (&c.rhs, &c.lhs)] {
            let (Term::Var(v), Term::Lit(lit)) = (var_side, lit_side) else { continue };
            let Some(decl) = self.model.variable(&v.name) else { continue };
            if decl.domain.contains(lit) {
                continue;
            }
            if ctx == Context::Goal {
                if c.op == CmpOp::Eq {
                    self.push(
                        IssueKind::UnreachableGoalSymbol,
                        subject,
                        loc,
                        format!("`{c}` can never hold: `{lit}` is not in {}", decl.domain),
                    );
                }
            } else if matches!(decl.domain, Domain::Enum { .. }) {
                self.push(
                    IssueKind::TypeMismatch,
                    subject,
                    loc,
                    format!("`{c}`: `{lit}` is not in {}", decl.domain),
                );
            }
        }
    }

    fn check_actions(&mut self) {
        let mut seen = HashSet::new();
        for (ai, a) in self.model.actions.iter().enumerate() {
            let subject = format!("action.{}", a.name);
            if !seen.insert(a.name.as_str()) {
                self.push(IssueKind::DuplicateName, &subject, Locator::Action(ai), format!("action `{}` declared twice", a.name));
            }
            let mut params = HashSet::new();
            for p in &a.params {
                if !params.insert(p.name.as_str()) {
                    self.push(IssueKind::DuplicateName, &subject, Locator::Action(ai), format!("parameter `{}` declared twice", p.name));
                }
                if self.model.sort(&p.sort).is_none() {
                    self.push(IssueKind::UndefinedReference, &subject, Locator::Action(ai), format!("unknown sort `{}`", p.sort));
                }
            }
            let pre_subject = format!("{subject}.pre");
            for (j, c) in a.preconditions.iter().enumerate() {
                self.check_condition(c, Some(a), Context::Pre, &pre_subject, Locator::Pre(ai, j));
            }
            let eff_subject = format!("{subject}.eff");
            let mut targets: Vec<&VarRef> = Vec::new();
            for (j, e) in a.effects.iter().enumerate() {
                let loc = Locator::Eff(ai, j);
                if targets.contains(&&e.target) {
                    self.push(
                        IssueKind::ConflictingEffects,
                        &eff_subject,
                        loc,
                        format!("`{}` is assigned more than once", e.target),
                    );
                }
                targets.push(&e.target);
                let Some(tt) = self.type_var_ref(&e.target, Some(a), &eff_subject, loc) else { continue };
                match &e.update {
                    Update::Delta(_) => {
                        if tt != ValueKind::Int {
                            self.push(IssueKind::TypeMismatch, &eff_subject, loc, format!("`{e}` increments a {} variable", tt));
                        }
                    }
                    Update::Assign(t) => {
                        let Some(vt) = self.type_term(t, Some(a), &eff_subject, loc) else { continue };
                        if vt != tt {
                            self.push(
                                IssueKind::TypeMismatch,
                                &eff_subject,
                                loc,
                                format!("`{e}` assigns {} to a {} variable", vt, tt),
                            );
                        } else if let Term::Lit(lit) = t {
                            let domain = &self.model.variable(&e.target.name).expect("typed above").domain;
                            if !domain.contains(lit) {
                                self.push(IssueKind::TypeMismatch, &eff_subject, loc, format!("`{e}`: `{lit}` is not in {domain}"));
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Reports every semantic issue of `model`, in declaration order then kind.
pub fn check_model(model: &ProblemModel) -> Vec<SemanticIssue> {
    let mut symbols: HashSet<&str> = model.sorts.iter().flat_map(|s| s.members.iter().map(String::as_str)).collect();
    for v in &model.variables {
        if let Domain::Enum { members } = &v.domain {
            symbols.extend(members.iter().map(String::as_str));
        }
    }
    let mut ck = Checker { model, symbols, issues: Vec::new() };
    ck.check_sorts();
    ck.check_variables();
    ck.check_actions();
    for (i, c) in model.constraints.iter().enumerate() {
        ck.check_condition(c, None, Context::Constraint, "constraint", Locator::Constraint(i));
    }
    for (i, c) in model.goal.iter().enumerate() {
        ck.check_condition(c, None, Context::Goal, "goal", Locator::Goal(i));
    }
    let mut issues = ck.issues;
    // Stable: declaration order first, kind second.
    issues.sort_by_key(|i| (i.locator, i.kind));
    issues
}

/// Product of domain sizes over all grounded variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpaceSize {
    pub value: u64,
    /// Set when the product exceeded `i64::MAX` and was clamped there.
    pub saturated: bool,
}

pub fn state_space_size(model: &ProblemModel) -> StateSpaceSize {
    const CEILING: u128 = i64::MAX as u128;
    let mut acc: u128 = 1;
    for v in &model.variables {
        let groundings = v
            .params
            .iter()
            .map(|p| model.sort(p).map_or(0, |s| s.members.len() as u128))
            .fold(1u128, u128::saturating_mul);
        let d = v.domain.size();
        let factor = match (d, groundings) {
            (_, 0) => 1,
            (0 | 1, _) => d,
            // 2^128 overflows u128; anything that large is past the ceiling.
            (_, g) if g >= 128 => u128::MAX,
            (d, g) => d.checked_pow(g as u32).unwrap_or(u128::MAX),
        };
        acc = acc.saturating_mul(factor);
    }
    if acc > CEILING {
        StateSpaceSize { value: CEILING as u64, saturated: true }
    } else {
        StateSpaceSize { value: acc as u64, saturated: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_model;

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

    fn kinds(text: &str) -> Vec<IssueKind> {
        check_model(&parse_model(text).unwrap()).into_iter().map(|i| i.kind).collect()
    }

    #[test]
    fn demo_is_clean() {
        assert!(check_model(&parse_model(DEMO).unwrap()).is_empty());
    }

    #[test]
    fn undefined_goal_variable() {
        let issues = check_model(&parse_model("model \"x\"\ngoal done == true\n").unwrap());
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].kind, IssueKind::UndefinedReference);
        assert_eq!(issues[0].subject, "goal");
    }

    #[test]
    fn initial_out_of_domain() {
        assert_eq!(kinds("model \"x\"\nvar fuel: int[0..10] = 12\n"), vec![IssueKind::InitialOutOfDomain]);
        assert_eq!(kinds("model \"x\"\nvar f: bool = 3\n"), vec![IssueKind::InitialOutOfDomain]);
    }

    #[test]
    fn duplicate_names() {
        assert_eq!(
            kinds("model \"x\"\nvar a: bool = true\nvar a: bool = true\n"),
            vec![IssueKind::DuplicateName]
        );
        assert_eq!(kinds("model \"x\"\nentity s: a, a\n"), vec![IssueKind::DuplicateName]);
    }

    #[test]
    fn type_mismatches() {
        assert_eq!(
            kinds("model \"x\"\nvar a: bool = true\nconstraint always a < 1\n"),
            vec![IssueKind::TypeMismatch]
        );
        assert_eq!(
            kinds("model \"x\"\nvar a: bool = true\naction t()\n  eff a := a + 1\n"),
            vec![IssueKind::TypeMismatch]
        );
        assert_eq!(
            kinds("model \"x\"\nvar n: int[0..3] = 0\naction t()\n  eff n := 7\n"),
            vec![IssueKind::TypeMismatch]
        );
    }

    #[test]
    fn unreachable_goal_symbol() {
        assert_eq!(
            kinds("model \"x\"\nvar fuel: int[0..10] = 0\ngoal fuel == 11\n"),
            vec![IssueKind::UnreachableGoalSymbol]
        );
        assert_eq!(
            kinds("model \"x\"\nentity l: moon\nvar at: {a, b} = a\ngoal at == moon\n"),
            vec![IssueKind::UnreachableGoalSymbol]
        );
    }

    #[test]
    fn conflicting_effects() {
        assert_eq!(
            kinds("model \"x\"\nvar a: bool = true\naction t()\n  eff a := true\n  eff a := false\n"),
            vec![IssueKind::ConflictingEffects]
        );
    }

    #[test]
    fn parameter_sort_mismatch() {
        let text = "model \"x\"\nentity p: u\nentity q: v\nvar f(p): bool = true\naction t(x: q)\n  pre f(x) == true\n";
        assert_eq!(kinds(text), vec![IssueKind::TypeMismatch]);
    }

    #[test]
    fn check_is_idempotent() {
        let m = parse_model("model \"x\"\nvar a: bool = 2\ngoal b == c\n").unwrap();
        assert_eq!(check_model(&m), check_model(&m));
    }

    #[test]
    fn state_space_examples() {
        let m = parse_model(DEMO).unwrap();
        assert_eq!(state_space_size(&m), StateSpaceSize { value: 44, saturated: false });
        let m = parse_model("model \"x\"\nvar a: bool = true\n").unwrap();
        assert_eq!(state_space_size(&m).value, 2);
    }

    #[test]
    fn state_space_saturates() {
        let members: Vec<String> = (0..70).map(|i| format!("e{i}")).collect();
        let text = format!("model \"x\"\nentity s: {}\nvar f(s): bool = true\n", members.join(", "));
        let size = state_space_size(&parse_model(&text).unwrap());
        assert!(size.saturated);
        assert_eq!(size.value, i64::MAX as u64);
        let members: Vec<String> = (0..62).map(|i| format!("e{i}")).collect();
        let text = format!("model \"x\"\nentity s: {}\nvar f(s): bool = true\n", members.join(", "));
        let size = state_space_size(&parse_model(&text).unwrap());
        assert_eq!(size, StateSpaceSize { value: 1u64 << 62, saturated: false });
    }
}
