mod support;

use std::cmp::Ordering;

use hopfp::domains::{canonical_compare, canonical_successor, Domain};
use hopfp::formulas::{
    build_eq, build_index, build_succ, build_total_order_axiom, Builder, TowerFormula, TowerSpec,
};
use hopfp::logic::{check_well_formed, formula_order};
use hopfp::{Evaluator, Lts, Value};
use proptest::prelude::*;

fn elements(spec: TowerSpec, n: usize) -> Vec<Value> {
    Domain::new(spec.element_type(), n)
        .values(u64::MAX)
        .unwrap()
        .collect()
}

fn holds(t: &Lts, f: &TowerFormula, args: &[Value]) -> bool {
    Evaluator::new(t)
        .eval(&f.typed().unwrap(), &f.environment(args))
        .unwrap()
}

/// Every `(c, level, n)` whose domain has at most 16 elements.
fn small_cases() -> Vec<(TowerSpec, usize)> {
    let mut out = Vec::new();
    for n in 1..=3 {
        for c in 1..=2 {
            for level in 1..=3 {
                let spec = TowerSpec::new(c, level);
                if spec.cardinality(n).unwrap() <= 16u32.into() {
                    out.push((spec, n));
                }
            }
        }
    }
    out
}

#[test]
fn succ_is_the_canonical_successor() {
    for (spec, n) in small_cases() {
        let t = Lts::ordered(n);
        let d = Domain::new(spec.element_type(), n);
        let f = build_succ(spec);
        for u in elements(spec, n) {
            let next = canonical_successor(&u, &d).unwrap();
            for v in elements(spec, n) {
                assert_eq!(
                    holds(&t, &f, &[u.clone(), v.clone()]),
                    next.as_ref() == Some(&v),
                    "{spec:?} n={n} {u} {v}"
                );
            }
        }
    }
}

#[test]
fn eq_is_identity() {
    for (spec, n) in small_cases() {
        let t = Lts::ordered(n);
        let f = build_eq(spec);
        for u in elements(spec, n) {
            for v in elements(spec, n) {
                assert_eq!(holds(&t, &f, &[u.clone(), v.clone()]), u == v);
            }
        }
    }
}

#[test]
fn min_holds_only_at_the_bottom() {
    for (spec, n) in small_cases() {
        let t = Lts::ordered(n);
        let d = Domain::new(spec.element_type(), n);
        let mut b = Builder::new();
        let x = b.fresh_group(spec, "x");
        let f = TowerFormula {
            spec,
            formula: b.min(spec, &x),
            groups: vec![x],
        };
        let all = elements(spec, n);
        for u in &all {
            let bottom = all
                .iter()
                .all(|v| canonical_compare(u, v, &d).unwrap() != Ordering::Greater);
            assert_eq!(holds(&t, &f, std::slice::from_ref(u)), bottom);
        }
        let zero = build_index(spec, 0);
        assert!(holds(&t, &zero, &[all[0].clone()]));
    }
}

#[test]
fn index_formulas_at_level_three() {
    let spec = TowerSpec::new(1, 3);
    let t = Lts::ordered(2);
    let all = elements(spec, 2);
    for j in [0u64, 1, 7, 15, 16] {
        let f = build_index(spec, j);
        let sat: Vec<usize> = (0..all.len())
            .filter(|&i| holds(&t, &f, &[all[i].clone()]))
            .collect();
        let want: Vec<usize> = if (j as usize) < all.len() {
            vec![j as usize]
        } else {
            vec![]
        };
        assert_eq!(sat, want, "j={j}");
    }
}

#[test]
fn order_axiom_has_order_two() {
    let f = build_total_order_axiom();
    let typed = check_well_formed(&f, &Default::default()).unwrap();
    assert_eq!(formula_order(&typed.formula, &Default::default()), 2);
}

/// Whether the `<` edges (none if the action is absent) form a strict total order.
fn strict_total_order(t: &Lts) -> bool {
    let n = t.len();
    let lt = |i: usize, j: usize| t.action_index("<").is_some_and(|a| t.has_edge(a, i, j));
    (0..n).all(|i| {
        !lt(i, i)
            && (0..n).all(|j| {
                (i == j || lt(i, j) != lt(j, i))
                    && (0..n).all(|k| !(lt(i, j) && lt(j, k)) || lt(i, k))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn order_axiom_recognizes_total_orders(t in support::arb_lts(4)) {
        let f = build_total_order_axiom();
        let typed = check_well_formed(&f, &Default::default()).unwrap();
        let got = Evaluator::new(&t).eval(&typed, &Default::default()).unwrap();
        prop_assert_eq!(got, strict_total_order(&t));
    }

    #[test]
    fn fresh_names_never_repeat(hints in prop::collection::vec("[a-z]{1,3}", 1..20)) {
        let mut b = Builder::new();
        let names: Vec<_> = hints.iter().map(|h| b.fresh(h)).collect();
        let mut unique = names.clone();
        unique.sort();
        unique.dedup();
        prop_assert_eq!(unique.len(), names.len());
    }
}
