mod support;

use hopfp::logic::formula_order;
use hopfp::machine::{run, run_trace, samples, TmSpec, Verdict};
use hopfp::reduction::{
    build_machine_formula, crossval, perturbation_probe, CodingContext, Mode, ProbeOutcome,
    ReductionError,
};
use hopfp::{EvalOptions, Lts, ReductionParams, StageSet};
use proptest::prelude::*;

#[test]
fn machine_formula_order_is_k_plus_one() {
    let m = samples::immediate(true);
    for k in 1..=3 {
        let params = ReductionParams::new(k, 1);
        let phi = build_machine_formula(&m, "1", params, 2).unwrap();
        assert_eq!(
            formula_order(&phi.formula, &Default::default()),
            k + 1,
            "k={k}"
        );
    }
}

#[test]
fn perturbed_stages_do_not_decode_off_the_trace() {
    let t = Lts::ordered(3);
    let params = ReductionParams::new(1, 1);
    for m in [samples::first_symbol_is_one(), samples::all_ones_sweep()] {
        let ctx = CodingContext::for_lts(&m, &t, params).unwrap();
        let (_, trace) = run_trace(&m, "110", 50, ctx.d).unwrap();
        let phi = build_machine_formula(&m, "110", params, 3).unwrap();
        let probes =
            perturbation_probe(&ctx, &phi, &t, &EvalOptions::default(), &trace, 100).unwrap();
        assert!(!probes.is_empty());
        for p in probes {
            assert!(
                !matches!(p.outcome, ProbeOutcome::OffTrace(_)),
                "{}: {:?}",
                p.description,
                p.outcome
            );
        }
    }
}

#[test]
fn dropping_a_tuple_breaks_the_encoding() {
    let m = samples::all_ones_sweep();
    let ctx = CodingContext::new(&m, 3, ReductionParams::new(1, 1)).unwrap();
    let (_, trace) = run_trace(&m, "111", 50, ctx.d).unwrap();
    for cfg in &trace {
        let enc = StageSet::from_value(&ctx.encode(cfg).unwrap(), &ctx.tuple_type, 3).unwrap();
        let members: Vec<u64> = enc.iter().collect();
        assert_eq!(members.len() as u64, ctx.d);
        for &drop in &members {
            let s = StageSet::from_indices(
                enc.universe(),
                members.iter().copied().filter(|&u| u != drop),
            );
            assert!(ctx
                .decode(&s.to_value(&ctx.tuple_type, 3).unwrap())
                .is_err());
        }
    }
}

#[test]
fn preconditions_are_enforced() {
    let t = Lts::ordered(2);
    let params = ReductionParams::new(1, 1);
    // Three states do not fit into two.
    let err = crossval(
        &samples::first_symbol_is_one(),
        &t,
        params,
        &Mode::Synthetic("1".into()),
        &EvalOptions::default(),
        false,
    )
    .unwrap_err();
    assert!(matches!(err, ReductionError::Precondition(_)), "{err}");
    // Words longer than D.
    let err = crossval(
        &samples::immediate(true),
        &t,
        params,
        &Mode::Synthetic("11111".into()),
        &EvalOptions::default(),
        false,
    )
    .unwrap_err();
    assert!(matches!(err, ReductionError::Precondition(_)), "{err}");
}

fn small_machine() -> impl Strategy<Value = TmSpec> {
    support::arb_tm().prop_filter("needs at most three states and symbols", |m| {
        m.states().len() <= 3 && m.tape_alphabet().len() <= 3
    })
}

fn machine_and_word() -> impl Strategy<Value = (TmSpec, String)> {
    small_machine().prop_flat_map(|m| {
        let input = m.input_alphabet().to_vec();
        let word = prop::collection::vec(prop::sample::select(input), 0..=4)
            .prop_map(|cs| cs.into_iter().collect::<String>());
        (Just(m), word)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_machines_agree_stage_by_stage((m, w) in machine_and_word()) {
        let sim = run(&m, &w, 200, 8).unwrap();
        prop_assume!(sim.verdict != Verdict::BudgetExceeded);
        let t = Lts::ordered(3);
        let r = crossval(&m, &t, ReductionParams::new(1, 1), &Mode::Synthetic(w.clone()), &EvalOptions::default(), true).unwrap();
        prop_assert!(r.agree, "{}", r.summary());
        let stages = r.stages.unwrap();
        prop_assert!(stages.faithful(), "{:?}", stages);
    }

    #[test]
    fn coding_survives_relabeling_the_order((m, w) in machine_and_word(), rot in 0usize..3) {
        let sim = run(&m, &w, 200, 8).unwrap();
        prop_assume!(sim.verdict != Verdict::BudgetExceeded);
        let mut t = Lts::new(["a", "b", "c"]).unwrap();
        let lt = t.add_action("<").unwrap();
        for i in 0..3 {
            for j in 0..3 {
                t.set_edge(lt, (i + rot) % 3, (j + rot) % 3, i < j);
            }
        }
        let r = crossval(&m, &t, ReductionParams::new(1, 1), &Mode::Synthetic(w), &EvalOptions::default(), false).unwrap();
        prop_assert!(r.agree, "{}", r.summary());
    }
}
