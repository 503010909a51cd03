mod common;

use common::{corpus, random_step, renumber, rng};
use mfrkit::model::{ground_var_ref, Binding, GroundVar};
use mfrkit::oracle::ground_calls;
use mfrkit::validator::{apply_step, resolve_step};
use mfrkit::{evaluate_condition, initial_state, validate_plan, Mode, Plan, ViolationClass};
use proptest::prelude::*;

/// A reference prefix followed by random steps, so that plans reach deep
/// states as well as failing early.
fn mixed_plan(task: usize, seed: u64, keep: usize, extra: usize) -> Plan {
    let t = &corpus()[task];
    let mut r = rng(seed);
    let calls = ground_calls(&t.reference_model);
    let mut steps: Vec<_> = t.reference_plan.steps.iter().take(keep).cloned().collect();
    for _ in 0..extra {
        let at = rand::Rng::random_range(&mut r, 0..=steps.len());
        steps.insert(at, random_step(&mut r, &calls));
    }
    renumber(steps)
}

fn plan_strategy() -> impl Strategy<Value = (usize, Plan)> {
    (0usize..10, any::<u64>(), 0usize..9, 0usize..5).prop_map(|(t, seed, keep, extra)| (t, mixed_plan(t, seed, keep, extra)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn accepted_steps_change_only_their_effect_targets((task, plan) in plan_strategy()) {
        let m = &corpus()[task].reference_model;
        let report = validate_plan(m, &plan, Mode::ContinueAndSkip);
        let mut prev = 0usize;
        for (rec, step) in report.steps.iter().zip(&plan.steps) {
            let Some(next) = rec.state else { continue };
            let action = resolve_step(step, m).expect("accepted steps resolve");
            let schema = m.action(&action.schema).unwrap();
            let binding = Binding::for_action(schema, &action.args);
            let targets: Vec<GroundVar> = schema.effects.iter().map(|e| ground_var_ref(&e.target, &binding).unwrap()).collect();
            let (before, after) = (&report.states[prev], &report.states[next]);
            for (g, v) in after.iter() {
                if before.get(g) != Some(v) {
                    prop_assert!(targets.contains(g), "step {} changed {g} outside its effects", rec.index);
                }
            }
            prop_assert_eq!(before.len(), after.len());
            prev = next;
        }
    }

    #[test]
    fn every_broken_invariant_is_reported((task, plan) in plan_strategy()) {
        let m = &corpus()[task].reference_model;
        // Independent walk: apply each step, test the invariants directly,
        // and keep the old state whenever the step or its successor fails.
        let mut state = initial_state(m);
        let mut expected = Vec::new();
        for step in &plan.steps {
            let Ok(action) = resolve_step(step, m) else { continue };
            let Ok(next) = apply_step(&state, &action, m) else { continue };
            let broken = m
                .constraints
                .iter()
                .filter(|c| !evaluate_condition(c, &next, &Binding::new()).unwrap_or(false))
                .count();
            if broken == 0 {
                state = next;
            } else {
                expected.extend(std::iter::repeat_n(step.index, broken));
            }
        }
        let report = validate_plan(m, &plan, Mode::ContinueAndSkip);
        let got: Vec<usize> = report
            .violations
            .iter()
            .filter(|v| v.class == ViolationClass::ConstraintViolation)
            .map(|v| v.step_index)
            .collect();
        prop_assert_eq!(got, expected);
        prop_assert_eq!(report.states.last().unwrap(), &state);
    }

    #[test]
    fn halting_reports_a_prefix_of_continuing((task, plan) in plan_strategy()) {
        let m = &corpus()[task].reference_model;
        let halt = validate_plan(m, &plan, Mode::HaltOnFirst);
        let cont = validate_plan(m, &plan, Mode::ContinueAndSkip);
        prop_assert!(halt.violations.len() <= 1);
        prop_assert_eq!(halt.violations.first(), cont.violations.first());
        prop_assert!(cont.states.starts_with(&halt.states));
        prop_assert!(cont.steps.starts_with(&halt.steps));
        prop_assert_eq!(halt.violations.is_empty(), cont.violations.is_empty());
        prop_assert_eq!(halt.is_clean(), cont.is_clean());
    }

    #[test]
    fn validation_is_deterministic((task, plan) in plan_strategy(), halt in any::<bool>()) {
        let m = &corpus()[task].reference_model;
        let mode = if halt { Mode::HaltOnFirst } else { Mode::ContinueAndSkip };
        prop_assert_eq!(validate_plan(m, &plan, mode), validate_plan(m, &plan.clone(), mode));
    }
}

#[test]
fn reference_plans_are_clean_in_both_modes() {
    for t in corpus() {
        for mode in [Mode::HaltOnFirst, Mode::ContinueAndSkip] {
            let r = validate_plan(&t.reference_model, &t.reference_plan, mode);
            assert!(r.is_clean(), "{} {mode:?}: {:?}", t.id, r.violations);
            assert_eq!(r.states.len(), t.reference_plan.len() + 1);
        }
    }
}

#[test]
fn goal_failures_are_reported_after_the_last_step() {
    for t in corpus() {
        let mut steps = t.reference_plan.steps.clone();
        steps.pop();
        let plan = renumber(steps);
        let r = validate_plan(&t.reference_model, &plan, Mode::ContinueAndSkip);
        assert!(!r.goal_satisfied, "{}", t.id);
        assert!(r.violations.iter().any(|v| v.class == ViolationClass::GoalUnmet && v.step_index == plan.len()));
    }
}
