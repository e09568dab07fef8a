use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use flowplan::constraints::{lexical_correct, parse_constraint_config, validate_plan, ConstraintConfig, DEFAULT_SIMILARITY_THRESHOLD};
use flowplan::data;
use flowplan::plan::{
    parse_symbolic_plan_text, parse_task_label, render_plan, ActionLabel, PrimitiveAction, SymbolicStep, TaskCategory,
    TaskPlan, TaskType, Vocabulary,
};

fn vocab() -> Vocabulary {
    data::alfred_vocabulary()
}

fn pick<T: Clone>(items: &[T], i: usize) -> T {
    items[i % items.len()].clone()
}

/// Random plan over valid vocabulary, with optional context phrases.
fn plan_strategy() -> impl Strategy<Value = TaskPlan> {
    let v = vocab();
    let steps = prop::collection::vec((0usize..8, any::<usize>(), prop::option::of("[a-z]{1,8}( [a-z]{1,8}){0,4}")), 1..12);
    (steps, 0usize..14).prop_map(move |(raw, tt)| {
        let steps = raw
            .into_iter()
            .enumerate()
            .map(|(i, (a, o, ctx))| {
                let action = PrimitiveAction::ALL[a % PrimitiveAction::ALL.len()];
                let objects: Vec<&str> = v.object_candidates(Some(action)).into_iter().collect();
                SymbolicStep::new(i + 1, action, pick(&objects, o), ctx.as_deref())
            })
            .collect();
        TaskPlan::new(steps, TaskType::all().nth(tt).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn render_then_parse_round_trips(plan in plan_strategy()) {
        let text = render_plan(&plan);
        let draft = parse_symbolic_plan_text(&text, &vocab()).unwrap();
        prop_assert!(draft.issues.is_empty(), "{:?}", draft.issues);
        prop_assert_eq!(draft.into_plan(plan.task_type), plan);
    }

    #[test]
    fn parser_is_total(raw in "\\PC{0,200}") {
        let _ = parse_symbolic_plan_text(&raw, &vocab());
    }

    #[test]
    fn parser_is_total_on_near_grammar(lines in prop::collection::vec("[0-9]{0,2}[.]? ?[a-z_ ]{0,10}[(]?[a-z_\" |:]{0,20}[)]?", 0..10)) {
        let _ = parse_symbolic_plan_text(&lines.join("\n"), &vocab());
    }

    #[test]
    fn validation_is_deterministic(plan in plan_strategy()) {
        let cfg = data::alfred_rules();
        let a = serde_json::to_string(&validate_plan(&plan, &cfg, &vocab())).unwrap();
        let b = serde_json::to_string(&validate_plan(&plan, &cfg, &vocab())).unwrap();
        prop_assert_eq!(a, b);
    }
}

/// Misspell some labels by dropping, doubling or swapping characters.
fn corrupted_plan() -> impl Strategy<Value = TaskPlan> {
    (plan_strategy(), prop::collection::vec((any::<bool>(), 0usize..3, any::<usize>()), 12)).prop_map(|(mut plan, edits)| {
        for (step, (apply, kind, at)) in plan.steps.iter_mut().zip(edits) {
            if !apply {
                continue;
            }
            let mut chars: Vec<char> = step.object_label.chars().collect();
            let len = chars.len();
            let i = at % len;
            match kind {
                0 if len > 1 => {
                    chars.remove(i);
                }
                1 => {
                    let c = chars[i];
                    chars.insert(i, c);
                }
                _ if len > 1 => chars.swap(i, (i + 1) % len),
                _ => chars.push('x'),
            }
            step.object_label = chars.into_iter().collect();
        }
        plan
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lexical_correction_stays_in_vocabulary_and_is_idempotent(plan in corrupted_plan()) {
        let v = vocab();
        let once = lexical_correct(&plan, &v, DEFAULT_SIMILARITY_THRESHOLD);
        for change in &once.changes {
            prop_assert!(v.objects.contains(&change.to) || v.landmarks.contains(&change.to) || v.actions.contains_key(&change.to));
        }
        let fixed: BTreeSet<usize> = once.changes.iter().map(|c| c.step_index).collect();
        let flagged: BTreeSet<usize> = once.uncorrectable.iter().map(|u| u.step_index).collect();
        for (before, after) in plan.steps.iter().zip(&once.plan.steps) {
            if before.object_label != after.object_label {
                prop_assert!(fixed.contains(&before.index));
            }
            let known = v.accepts_object(after.primitive(), &after.object_label);
            prop_assert!(known || flagged.contains(&after.index));
        }
        let twice = lexical_correct(&once.plan, &v, DEFAULT_SIMILARITY_THRESHOLD);
        prop_assert_eq!(&twice.plan, &once.plan);
        prop_assert!(twice.changes.is_empty());
    }
}

#[test]
fn task_label_closure() {
    let mut accepted = BTreeSet::new();
    for t in TaskType::all() {
        let label = t.label();
        for variant in [label.clone(), label.to_uppercase(), format!("  {label}. "), label.replace(' ', " - "), format!("**{label}**")] {
            assert_eq!(parse_task_label(&variant).unwrap(), t, "{variant}");
        }
        accepted.insert(parse_task_label(&label).unwrap());
        for bad in [format!("{label} please"), format!("not {label}"), label[..label.len() - 2].to_string()] {
            assert!(parse_task_label(&bad).is_err(), "{bad}");
        }
    }
    assert_eq!(accepted.len(), 14);
    for bad in ["", "pick", "slicing", "heat and cool", "examine", "unknown task"] {
        assert!(parse_task_label(bad).is_err(), "{bad}");
    }
}

/// Independent replay of the household rules: one hand, open/closed,
/// powered/off and sliced flags per label. Returns the violating steps.
fn oracle_precondition_failures(plan: &TaskPlan) -> BTreeSet<usize> {
    let mut hand: Option<String> = None;
    let mut open = BTreeSet::new();
    let mut powered = BTreeSet::new();
    let mut sliced = BTreeSet::new();
    let mut bad = BTreeSet::new();
    for s in &plan.steps {
        let t = s.object_label.clone();
        let Some(a) = s.primitive() else { continue };
        let ok = match a {
            PrimitiveAction::PickUp => hand.is_none(),
            PrimitiveAction::Put => hand.is_some(),
            PrimitiveAction::Open => !open.contains(&t),
            PrimitiveAction::Close => open.contains(&t),
            PrimitiveAction::ToggleOn => !powered.contains(&t),
            PrimitiveAction::ToggleOff => powered.contains(&t),
            PrimitiveAction::Slice => hand.as_deref() == Some("knife") && !sliced.contains(&t),
            PrimitiveAction::GotoLandmark => true,
        };
        if !ok {
            bad.insert(s.index);
        }
        match a {
            PrimitiveAction::PickUp => hand = Some(t),
            PrimitiveAction::Put => hand = None,
            PrimitiveAction::Open => {
                open.insert(t);
            }
            PrimitiveAction::Close => {
                open.remove(&t);
            }
            PrimitiveAction::ToggleOn => {
                powered.insert(t);
            }
            PrimitiveAction::ToggleOff => {
                powered.remove(&t);
            }
            PrimitiveAction::Slice => {
                sliced.insert(t);
            }
            PrimitiveAction::GotoLandmark => {}
        }
    }
    bad
}

fn small_plan() -> impl Strategy<Value = TaskPlan> {
    let labels = ["apple", "knife", "fridge", "microwave", "mug", "countertop"];
    prop::collection::vec((0usize..8, 0usize..labels.len()), 0..10).prop_map(move |raw| {
        let steps = raw
            .into_iter()
            .enumerate()
            .map(|(i, (a, o))| {
                let action = PrimitiveAction::ALL[a];
                let label = if action == PrimitiveAction::GotoLandmark { "countertop" } else { labels[o] };
                SymbolicStep::new(i + 1, action, label, None)
            })
            .collect();
        TaskPlan::new(steps, TaskType::new(TaskCategory::PickPlace, false))
    })
}

/// Vocabulary accepting every label the small plans use.
fn open_vocab() -> Vocabulary {
    let labels = ["apple", "knife", "fridge", "microwave", "mug", "countertop"].map(String::from);
    Vocabulary::with_all_actions(labels.clone(), labels)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn precondition_checks_match_an_independent_replay(plan in small_plan()) {
        let report = validate_plan(&plan, &data::alfred_rules(), &open_vocab());
        let found: BTreeSet<usize> = report
            .violations
            .iter()
            .filter(|v| v.rule_id.starts_with("action:"))
            .map(|v| v.step_index)
            .collect();
        let expected = oracle_precondition_failures(&plan);
        prop_assert_eq!(&found, &expected);
        if report.is_valid() {
            prop_assert!(expected.is_empty());
        }
    }

    #[test]
    fn consecutive_pick_ups_are_always_invalid(
        prefix in small_plan(),
        gotos in 0usize..3,
        suffix in small_plan(),
        which in 0usize..3,
    ) {
        let mut steps = prefix.steps.clone();
        steps.push(SymbolicStep::new(0, PrimitiveAction::PickUp, "apple", None));
        for _ in 0..gotos {
            steps.push(SymbolicStep::new(0, PrimitiveAction::GotoLandmark, "countertop", None));
        }
        steps.push(SymbolicStep::new(0, PrimitiveAction::PickUp, "mug", None));
        steps.extend(suffix.steps.iter().cloned());
        let plan = TaskPlan::new(steps, TaskType::new(TaskCategory::PickTwoPlace, false));
        let config = configs()[which].clone();
        prop_assert!(!validate_plan(&plan, &config, &open_vocab()).is_valid());
    }
}

/// Profiles whose pick_up requires an empty hand.
fn configs() -> Vec<ConstraintConfig> {
    let minimal = parse_constraint_config(
        "profile minimal\nstate hand : hand\n\
         action pick_up requires hand == empty sets hand = target\n\
         action put requires none sets hand = empty\n\
         action open requires none sets none\naction close requires none sets none\n\
         action toggle_on requires none sets none\naction toggle_off requires none sets none\n\
         action slice requires none sets none\naction goto requires none sets none\n",
    )
    .unwrap();
    vec![data::alfred_rules(), data::realworld_rules(), minimal]
}

#[test]
fn valid_reports_have_no_violations_or_unknown_labels() {
    let v = vocab();
    let plan = parse_symbolic_plan_text("1. pick_up(apple)\n2. put(countertop)\n", &v).unwrap().into_plan(TaskType::new(TaskCategory::PickPlace, false));
    let report = validate_plan(&plan, &data::alfred_rules(), &v);
    assert!(report.is_valid());
    assert!(report.violations.is_empty() && report.unknown_labels.is_empty());
}

#[test]
fn unknown_labels_survive_parsing() {
    let v = vocab();
    let draft = parse_symbolic_plan_text("1. pik_up(aple)\n2. put(countertop)", &v).unwrap();
    assert_eq!(draft.steps[0].action, ActionLabel::Unknown("pik_up".into()));
    assert_eq!(draft.steps[0].object_label, "aple");
    let counts: BTreeMap<String, usize> = draft.issues.iter().fold(BTreeMap::new(), |mut m, i| {
        *m.entry(serde_json::to_value(&i.kind).unwrap()["kind"].as_str().unwrap().to_string()).or_default() += 1;
        m
    });
    assert_eq!(counts.get("unknown_action"), Some(&1));
    assert_eq!(counts.get("unknown_object"), Some(&1));
}
