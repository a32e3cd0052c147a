//! Property tests for the invariants of each module.

mod common;

use std::collections::BTreeSet;

use modelsmith::harness::{gen_traces, solve_compiled, PlannerChoice, TraceConfig};
use modelsmith::learn::{
    build_hypothesis_space, compile_lambda, compile_lambda_prime, CompileOptions, CompiledTask, KnownSchema,
    LearningTask, PartialModel, Trace,
};
use modelsmith::model::{decode, score, Scope};
use modelsmith::pddl::{
    instantiate, parse_domain, parse_problem, print_domain, print_problem, replay, successor, GroundAtom,
    GroundState, Plan, PlanStep,
};
use modelsmith::planner::{ground_default, solve, GroundTask, SearchConfig, State};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn blocks_traces(seed: u64, examples: usize, walk: (usize, usize)) -> (modelsmith::pddl::Domain, Vec<Trace>) {
    let (domain, _) = load("blocksworld");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let problems: Vec<_> = (0..2).map(|k| random_blocks(&mut rng, 3, &format!("p{k}"))).collect();
    let tc = TraceConfig {
        examples,
        walk_min: walk.0,
        walk_max: walk.1,
        seed,
        ..TraceConfig::default()
    };
    let traces = gen_traces(&domain, &problems, &tc).expect("walks exist");
    (domain, traces)
}

/// Random partial model over the blocksworld reference: each schema is
/// unknown, complete, or contributes a random subset of its slots.
fn random_partial(rng: &mut ChaCha8Rng) -> PartialModel {
    let (domain, _) = load("blocksworld");
    let mut pm = PartialModel::new();
    for s in domain.strips_schemas().expect("STRIPS") {
        let s = s.canonical();
        match rng.gen_range(0..3) {
            0 => {}
            1 => {
                pm.insert(s.name.clone(), KnownSchema::from_schema(&s, true));
            }
            _ => {
                let mut k = KnownSchema::from_schema(&s, false);
                k.pre.retain(|_| rng.gen_bool(0.5));
                k.add.retain(|_| rng.gen_bool(0.5));
                k.del.retain(|a| k.pre.contains(a) && rng.gen_bool(0.5));
                pm.insert(s.name.clone(), k);
            }
        }
    }
    pm
}

fn random_state(gt: &GroundTask, rng: &mut ChaCha8Rng) -> State {
    let mut s = State::empty(gt.atoms.len());
    for i in 0..gt.atoms.len() as u32 {
        if rng.gen_bool(0.5) {
            s.set(i, true);
        }
    }
    s
}

fn to_ground_state(gt: &GroundTask, s: &State) -> GroundState {
    GroundState::new(gt.true_atoms(s).into_iter().cloned())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn printed_problems_parse_back(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_blocks(&mut rng, n, "roundtrip");
        let text = print_problem(&p);
        prop_assert_eq!(parse_problem(&text).expect("printed problem parses"), p);
    }

    #[test]
    fn strips_successor_is_set_update(seed in any::<u64>()) {
        let (domain, _) = load("blocksworld");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = ["a", "b", "c"];
        let mut atoms = BTreeSet::new();
        for x in blocks {
            for (p, args) in [("clear", vec![x]), ("ontable", vec![x]), ("holding", vec![x])] {
                if rng.gen_bool(0.5) { atoms.insert(GroundAtom::new(p, &args)); }
            }
            for y in blocks {
                if rng.gen_bool(0.3) { atoms.insert(GroundAtom::new("on", &[x, y])); }
            }
        }
        if rng.gen_bool(0.5) { atoms.insert(GroundAtom::new("handempty", &[])); }
        let state = GroundState::new(atoms);
        for schema in domain.strips_schemas().expect("STRIPS") {
            let action = &domain.actions[&schema.name];
            let args: Vec<String> = (0..schema.arity()).map(|_| blocks[rng.gen_range(0..3)].to_string()).collect();
            let ground = instantiate(action, &args).expect("arity matches");
            let Ok(next) = successor(&state, &ground) else { continue };
            let bind = |a: &modelsmith::pddl::Atom| {
                a.ground(&|v| schema.params.iter().position(|p| p.name == v).map(|i| args[i].clone())).expect("bound")
            };
            let del: BTreeSet<GroundAtom> = schema.del.iter().map(bind).collect();
            let add: BTreeSet<GroundAtom> = schema.add.iter().map(bind).collect();
            let expected: BTreeSet<GroundAtom> = state.atoms.difference(&del).cloned().collect::<BTreeSet<_>>()
                .union(&add).cloned().collect();
            prop_assert_eq!(&next.atoms, &expected);
            let grown = add.difference(&state.atoms).count() as isize;
            let removed = del.intersection(&state.atoms).filter(|a| !add.contains(a)).count() as isize;
            prop_assert_eq!(next.len() as isize - state.len() as isize, grown - removed);
            prop_assert_eq!(successor(&state, &ground).expect("applicable"), next);
        }
    }

    #[test]
    fn bitset_and_set_successors_agree(seed in any::<u64>()) {
        // the planner's grounded operators against lifted instantiation
        let (domain, traces) = blocks_traces(seed, 1, (1, 4));
        let task = LearningTask::new(&domain, &traces, true, None).expect("valid task");
        let compiled = compile_lambda_prime(&task, CompileOptions::default()).expect("compiles");
        let cdomain = compiled.domain();
        let gt = ground_default(&cdomain, &compiled.problem()).expect("grounds");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let s = random_state(&gt, &mut rng);
            let set_state = to_ground_state(&gt, &s);
            let o = rng.gen_range(0..gt.operators.len());
            let op = &gt.operators[o];
            if !op.applicable(&s) { continue; }
            let lifted = instantiate(&cdomain.actions[&op.name], &op.args).expect("instantiates");
            // atoms folded into constants by grounding are invisible to the bitset state
            let Ok(expected) = successor(&set_state, &lifted) else { continue };
            let got = to_ground_state(&gt, &op.apply(&s));
            let visible: BTreeSet<GroundAtom> =
                expected.atoms.into_iter().filter(|a| gt.atom(a).is_some()).collect();
            prop_assert_eq!(got.atoms, visible);
        }
    }

    #[test]
    fn replay_commutes_with_object_renaming(seed in any::<u64>()) {
        let (domain, traces) = blocks_traces(seed, 1, (0, 6));
        let model = domain.strips_schemas().expect("STRIPS");
        let rename = |o: &str| format!("{o}x");
        let t = &traces[0];
        let plan = t.plan.clone().expect("plan");
        let renamed_plan = Plan::new(plan.steps.iter().map(|s| PlanStep {
            name: s.name.clone(),
            args: s.args.iter().map(|a| rename(a)).collect(),
        }).collect());
        let renamed_init = GroundState::new(t.label.initial.atoms.iter().map(|a| a.map_objects(rename)));
        let a = replay(&t.label.initial, &plan, &model).expect("names known");
        let b = replay(&renamed_init, &renamed_plan, &model).expect("names known");
        let a_final = a.final_state().expect("replays");
        let b_final = b.final_state().expect("replays");
        prop_assert_eq!(GroundState::new(a_final.atoms.iter().map(|x| x.map_objects(rename))), b_final.clone());
        prop_assert_eq!(a_final, &t.label.final_state);
    }

    #[test]
    fn programming_actions_match_programmable_slots(seed in any::<u64>(), plans in any::<bool>()) {
        let (domain, traces) = blocks_traces(seed, 2, (1, 5));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pm = random_partial(&mut rng);
        let task = LearningTask::new(&domain, &traces, plans, Some(pm)).expect("valid task");
        let options = CompileOptions { static_pruning: rng.gen_bool(0.5), symmetry_breaking: rng.gen_bool(0.5) };
        let compiled = if plans { compile_lambda_prime(&task, options) } else { compile_lambda(&task, options) }
            .expect("compiles");
        let d = compiled.domain();
        let program_pre = d.actions.keys().filter(|n| n.starts_with("program_pre_")).count();
        let program_eff = d.actions.keys().filter(|n| n.starts_with("program_eff_")).count();
        let slots: Vec<_> = compiled.slots.values().flat_map(|m| m.values()).collect();
        prop_assert_eq!(program_pre, slots.iter().filter(|c| c.program_pre && c.pre_fluent).count());
        prop_assert_eq!(program_eff, slots.iter().filter(|c| c.program_eff && c.effect_fluents).count());
        let table = compiled.decode_table();
        let fluents: usize = slots.iter().map(|c| usize::from(c.pre_fluent) + 2 * usize::from(c.effect_fluents)).sum();
        prop_assert_eq!(table.len(), fluents);
        // seeding: programmable preconditions start true, effects start false unless given
        let init = compiled.problem().init;
        for (schema, m) in &compiled.slots {
            for (atom, c) in m {
                let holds = |name: String| init.contains(&GroundAtom::new(&name, &[]));
                if c.program_pre && c.pre_fluent {
                    prop_assert!(holds(CompiledTask::pre_fluent(schema, atom)));
                }
                if c.effect_fluents && !c.known {
                    prop_assert!(!holds(CompiledTask::del_fluent(schema, atom)));
                    prop_assert!(!holds(CompiledTask::add_fluent(schema, atom)));
                }
            }
        }
    }

    #[test]
    fn reachable_states_keep_schema_constraints(seed in any::<u64>()) {
        let (domain, traces) = blocks_traces(seed, 1, (1, 4));
        let task = LearningTask::new(&domain, &traces, true, None).expect("valid task");
        let compiled = compile_lambda_prime(&task, CompileOptions::default()).expect("compiles");
        let gt = ground_default(&compiled.domain(), &compiled.problem()).expect("grounds");
        let fluent = |name: String| gt.atom(&GroundAtom::new(&name, &[]));
        let triples: Vec<_> = compiled.slots.iter().flat_map(|(s, m)| m.keys().map(move |a| (s, a)))
            .map(|(s, a)| (
                fluent(CompiledTask::pre_fluent(s, a)),
                fluent(CompiledTask::del_fluent(s, a)),
                fluent(CompiledTask::add_fluent(s, a)),
            ))
            .collect();
        let mode = fluent("modeprog".into()).expect("mode fluent");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = gt.init.clone();
        let mut applied = false;
        for _ in 0..200 {
            let get = |i: Option<u32>| i.is_some_and(|i| s.get(i));
            for &(p, d, a) in &triples {
                prop_assert!(!get(d) || get(p), "delete without precondition");
                prop_assert!(!(get(a) && get(p)), "add together with precondition");
                prop_assert!(!(get(a) && get(d)), "add together with delete");
            }
            let ready: Vec<usize> = (0..gt.operators.len()).filter(|&o| gt.operators[o].applicable(&s)).collect();
            if applied {
                prop_assert!(!s.get(mode));
                prop_assert!(ready.iter().all(|&o| !gt.operators[o].name.starts_with("program_")));
            }
            if ready.is_empty() { break; }
            let o = ready[rng.gen_range(0..ready.len())];
            applied |= gt.operators[o].name.starts_with("apply_");
            s = gt.operators[o].apply(&s);
        }
    }

    #[test]
    fn solutions_follow_plans_and_validate_in_order(seed in any::<u64>()) {
        let (domain, traces) = blocks_traces(seed, 2, (1, 5));
        let task = LearningTask::new(&domain, &traces, true, None).expect("valid task");
        let compiled = compile_lambda_prime(&task, CompileOptions::default()).expect("compiles");
        let run = solve_compiled(&compiled, &SearchConfig::default(), &PlannerChoice::Builtin).expect("grounds");
        let plan = run.result.plan.expect("traces from the reference are learnable");
        let validations: Vec<&str> = plan.steps.iter().filter(|s| s.name.starts_with("validate_")).map(|s| s.name.as_str()).collect();
        prop_assert_eq!(validations, vec!["validate_1", "validate_2"]);
        let mut t = 0;
        let mut applied: Vec<Vec<PlanStep>> = vec![Vec::new(); 2];
        for s in &plan.steps {
            if s.name.starts_with("validate_") { t += 1; }
            if let Some(name) = s.name.strip_prefix("apply_") {
                let args: Vec<&str> = s.args[..s.args.len() - 2].iter().map(String::as_str).collect();
                applied[t].push(PlanStep::new(name, &args));
            }
        }
        for (got, trace) in applied.iter().zip(&traces) {
            prop_assert_eq!(got, &trace.plan.as_ref().expect("plan").steps);
        }
        let model = decode(&plan, &compiled).expect("decodes");
        prop_assert!(model.schemas.iter().all(|s| s.violations().is_empty()));
    }

    #[test]
    fn decoding_ignores_object_names(seed in any::<u64>()) {
        let (domain, traces) = blocks_traces(seed, 2, (2, 6));
        let rename = |o: &str| format!("obj-{o}");
        let renamed: Vec<Trace> = traces.iter().map(|t| {
            let mut r = t.clone();
            r.label.objects = t.label.objects.iter().map(|(o, ty)| (rename(o), ty.clone())).collect();
            r.label.initial = GroundState::new(t.label.initial.atoms.iter().map(|a| a.map_objects(rename)));
            r.label.final_state = GroundState::new(t.label.final_state.atoms.iter().map(|a| a.map_objects(rename)));
            r.plan = t.plan.as_ref().map(|p| Plan::new(p.steps.iter().map(|s| PlanStep {
                name: s.name.clone(),
                args: s.args.iter().map(|a| rename(a)).collect(),
            }).collect()));
            r
        }).collect();
        let learn = |traces: &[Trace]| {
            let task = LearningTask::new(&domain, traces, true, None).expect("valid task");
            let compiled = compile_lambda_prime(&task, CompileOptions::default()).expect("compiles");
            let run = solve_compiled(&compiled, &SearchConfig::default(), &PlannerChoice::Builtin).expect("grounds");
            decode(&run.result.plan.expect("solvable"), &compiled).expect("decodes").schemas
        };
        prop_assert_eq!(learn(&traces), learn(&renamed));
    }

    #[test]
    fn traces_are_deterministic_and_consistent(seed in any::<u64>()) {
        let (domain, problems) = load("blocksworld");
        let tc = TraceConfig { seed, ..TraceConfig::default() };
        let a = gen_traces(&domain, &problems, &tc).expect("walks exist");
        let b = gen_traces(&domain, &problems, &tc).expect("walks exist");
        prop_assert_eq!(&a, &b);
        let model = domain.strips_schemas().expect("STRIPS");
        for t in &a {
            let plan = t.plan.as_ref().expect("plan");
            prop_assert!((8..=12).contains(&plan.len()));
            let r = replay(&t.label.initial, plan, &model).expect("names known");
            prop_assert_eq!(r.final_state(), Some(&t.label.final_state));
        }
    }

    #[test]
    fn score_is_reflexive_and_symmetric(seed in any::<u64>()) {
        let (domain, traces) = blocks_traces(seed, 1, (1, 3));
        let reference: Vec<_> = domain.strips_schemas().expect("STRIPS").iter().map(|s| s.canonical()).collect();
        let task = LearningTask::new(&domain, &traces, true, None).expect("valid task");
        let hs = build_hypothesis_space(&task);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut other = reference.clone();
        for _ in 0..3 {
            let k = rng.gen_range(0..other.len());
            other[k] = mutate(&other[k], hs.get(&other[k].name), &mut rng);
        }
        let same = score(&other, &other, Scope::All, None).expect("scores");
        prop_assert_eq!((same.precision(), same.recall()), (1.0, 1.0));
        let ab = score(&other, &reference, Scope::All, None).expect("scores");
        let ba = score(&reference, &other, Scope::All, None).expect("scores");
        for ((_, x), (_, y)) in ab.components().iter().zip(ba.components()) {
            prop_assert_eq!(x.precision(), y.recall());
            prop_assert_eq!(x.recall(), y.precision());
        }
    }
}

#[test]
fn zero_length_walk_keeps_the_state() {
    let (domain, problems) = load("blocksworld");
    let tc = TraceConfig {
        walk_min: 0,
        walk_max: 0,
        ..TraceConfig::default()
    };
    for t in gen_traces(&domain, &problems, &tc).expect("walks exist") {
        assert_eq!(t.label.initial, t.label.final_state);
        assert!(t.plan.expect("plan").is_empty());
    }
}

#[test]
fn builtin_domains_round_trip() {
    for b in modelsmith::harness::benchmarks() {
        let (domain, problems) = b.load().expect("loads");
        assert_eq!(parse_domain(&print_domain(&domain)).expect("parses"), domain, "{}", b.name);
        for p in problems {
            assert_eq!(parse_problem(&print_problem(&p)).expect("parses"), p);
        }
    }
}

#[test]
fn search_is_deterministic() {
    let (domain, traces) = blocks_traces(5, 2, (2, 5));
    let task = LearningTask::new(&domain, &traces, true, None).expect("valid task");
    let compiled = compile_lambda_prime(&task, CompileOptions::default()).expect("compiles");
    let a = solve_compiled(&compiled, &SearchConfig::default(), &PlannerChoice::Builtin).expect("grounds");
    let b = solve_compiled(&compiled, &SearchConfig::default(), &PlannerChoice::Builtin).expect("grounds");
    assert!(a.result.plan.is_some());
    assert_eq!(a.result.plan, b.result.plan);

    let (domain, problems) = load("blocksworld");
    let gt = ground_default(&domain, &problems[0]).expect("grounds");
    let a = solve(&gt, &SearchConfig::default());
    let b = solve(&gt, &SearchConfig::default());
    assert!(a.plan.is_some());
    assert_eq!(a.plan, b.plan);
}
