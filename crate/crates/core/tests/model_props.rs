mod common;

use common::{corpus, random_model, rng};
use mfrkit::checker::check_model;
use mfrkit::model::{
    evaluate_condition, ground_action, initial_state, Binding, CmpOp, Condition, Term, Value, VarRef,
};
use mfrkit::parser::parse_model;
use mfrkit::validator::validate_plan;
use mfrkit::Mode;
use proptest::prelude::*;

fn assert_in_domain(model: &mfrkit::ProblemModel) {
    let s = initial_state(model);
    for (g, v) in s.iter() {
        let decl = model.variable(&g.name).expect("grounded from a declaration");
        assert!(decl.domain.contains(v), "{}: {g} = {v} outside {}", model.name, decl.domain);
    }
}

#[test]
fn corpus_initial_states_are_in_domain() {
    for t in corpus() {
        assert_in_domain(&t.reference_model);
        assert_eq!(initial_state(&t.reference_model).len(), t.reference_model.grounded_variables().len());
    }
}

#[test]
fn clean_random_models_have_in_domain_initial_states() {
    let mut r = rng(41);
    let mut clean = 0;
    for _ in 0..20_000 {
        let m = random_model(&mut r);
        if check_model(&m).is_empty() {
            assert_in_domain(&m);
            clean += 1;
        }
    }
    assert!(clean >= 20, "only {clean} clean random models");
}

#[test]
fn integer_comparisons_match_native_ones() {
    type Native = fn(&i64, &i64) -> bool;
    let ops: [(CmpOp, Native); 6] = [
        (CmpOp::Eq, i64::eq),
        (CmpOp::Ne, i64::ne),
        (CmpOp::Lt, i64::lt),
        (CmpOp::Le, i64::le),
        (CmpOp::Gt, i64::gt),
        (CmpOp::Ge, i64::ge),
    ];
    let (lo, hi) = (-3i64, 3i64);
    for a in lo..=hi {
        for b in lo..=hi {
            let text = format!("model \"cmp\"\nvar x: int[{lo}..{hi}] = {a}\nvar y: int[{lo}..{hi}] = {b}\n");
            let m = parse_model(&text).unwrap();
            let s = initial_state(&m);
            for (op, native) in ops {
                let var = |n: &str| Term::Var(VarRef { name: n.into(), args: vec![] });
                let vv = Condition { lhs: var("x"), op, rhs: var("y") };
                let vl = Condition { lhs: var("x"), op, rhs: Term::Lit(Value::Int(b)) };
                for c in [vv, vl] {
                    assert_eq!(evaluate_condition(&c, &s, &Binding::new()).unwrap(), native(&a, &b), "{a} {op} {b}");
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn ground_action_checks_arity_and_membership(seed in any::<u64>(), raw_args in proptest::collection::vec(0usize..6, 0..4)) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        prop_assume!(!m.actions.is_empty());
        let names = ["k0", "k1", "k2", "k3", "nobody", "s0"];
        let args: Vec<String> = raw_args.iter().map(|&i| names[i].to_string()).collect();
        for schema in &m.actions {
            let expected = args.len() == schema.params.len()
                && schema.params.iter().zip(&args).all(|(p, a)| {
                    m.sorts.iter().find(|s| s.name == p.sort).is_some_and(|s| s.members.iter().any(|x| x == a))
                });
            prop_assert_eq!(ground_action(schema, &args, &m).is_ok(), expected);
        }
    }

    #[test]
    fn evaluation_is_pure(task in 0usize..10, steps in 0usize..6, pick in any::<prop::sample::Index>()) {
        let t = &corpus()[task];
        let m = &t.reference_model;
        let prefix = mfrkit::Plan::from_calls(t.reference_plan.steps.iter().take(steps).filter_map(|s| s.parsed.clone()));
        let report = validate_plan(m, &prefix, Mode::ContinueAndSkip);
        let state = report.states.last().unwrap();
        let conds: Vec<&Condition> = m.constraints.iter().chain(&m.goal).collect();
        prop_assume!(!conds.is_empty());
        let c = conds[pick.index(conds.len())];
        let first = evaluate_condition(c, state, &Binding::new());
        prop_assert_eq!(first.clone(), evaluate_condition(c, state, &Binding::new()));
        prop_assert_eq!(first, evaluate_condition(c, &state.clone(), &Binding::new()));
    }
}
