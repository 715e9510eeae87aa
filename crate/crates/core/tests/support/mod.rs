//! Generators and oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use hopfp::domains::{index_to_value, Domain};
use hopfp::machine::{Configuration, Move, TmBuilder, TmSpec};
use hopfp::{Environment, Formula, Lts, Type, TypingContext, Value, ORDER_ACTION};
use num_bigint::BigUint;
use proptest::prelude::*;
use proptest::sample::subsequence;

/// Types of bounded depth.
pub fn arb_type() -> impl Strategy<Value = Type> {
    Just(Type::Ground).prop_recursive(3, 8, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(Type::Compound),
            inner.prop_map(Type::set_of),
        ]
    })
}

fn arb_var() -> impl Strategy<Value = String> {
    "[A-Z][a-z0-9]{0,2}"
}

fn arb_label() -> impl Strategy<Value = String> {
    prop_oneof![Just("<".to_string()), "[a-z][a-z0-9_]{0,3}"]
}

/// Syntactically valid formulas; not necessarily well-typed.
pub fn arb_syntax_formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        Just(Formula::True),
        Just(Formula::False),
        (arb_label(), arb_var()).prop_map(|(p, x)| Formula::prop(p, x)),
        (arb_label(), arb_var(), arb_var()).prop_map(|(a, x, y)| Formula::act(a, x, y)),
        (arb_var(), prop::collection::vec(arb_var(), 1..4))
            .prop_map(|(x, ys)| Formula::apply(x, ys)),
    ];
    leaf.prop_recursive(5, 48, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(f, g)| Formula::or(f, g)),
            (inner.clone(), inner.clone()).prop_map(|(f, g)| Formula::and(f, g)),
            (inner.clone(), inner.clone()).prop_map(|(f, g)| Formula::implies(f, g)),
            (arb_var(), arb_type(), inner.clone()).prop_map(|(x, t, f)| Formula::exists(x, t, f)),
            (arb_var(), arb_type(), inner.clone()).prop_map(|(x, t, f)| Formula::forall(x, t, f)),
            (
                arb_var(),
                arb_type(),
                inner,
                prop::collection::vec(arb_var(), 1..3)
            )
                .prop_map(|(x, t, f, ys)| Formula::pfp(x, Type::set_of(t), f, ys)),
        ]
    })
}

pub const GROUND_VARS: [&str; 3] = ["x", "y", "z"];
pub const SET_VARS: [&str; 2] = ["S", "T"];

pub fn unary() -> Type {
    Type::set_of(Type::ground_tuple(1))
}

/// Free-variable typing for [`arb_typed_formula`].
pub fn typed_context() -> TypingContext {
    GROUND_VARS
        .iter()
        .map(|v| (v.to_string(), Type::Ground))
        .chain(SET_VARS.iter().map(|v| (v.to_string(), unary())))
        .collect()
}

/// Well-typed formulas of order at most 2 over `x, y, z : o` and `S, T : {(o)}`.
pub fn arb_typed_formula() -> impl Strategy<Value = Formula> {
    let g = || prop::sample::select(&GROUND_VARS[..]);
    let s = || prop::sample::select(&SET_VARS[..]);
    let leaf = prop_oneof![
        Just(Formula::True),
        Just(Formula::False),
        (prop::sample::select(vec!["p", "q"]), g()).prop_map(|(p, x)| Formula::prop(p, x)),
        (prop::sample::select(vec!["<", "a"]), g(), g())
            .prop_map(|(a, x, y)| Formula::act(a, x, y)),
        (s(), g()).prop_map(|(x, y)| Formula::apply(x, [y])),
    ];
    leaf.prop_recursive(4, 24, 2, move |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(f, h)| Formula::or(f, h)),
            (inner.clone(), inner.clone()).prop_map(|(f, h)| Formula::and(f, h)),
            (inner.clone(), inner.clone()).prop_map(|(f, h)| Formula::implies(f, h)),
            (g(), inner.clone()).prop_map(|(x, f)| Formula::exists(x, Type::Ground, f)),
            (g(), inner.clone()).prop_map(|(x, f)| Formula::forall(x, Type::Ground, f)),
            (s(), inner.clone()).prop_map(|(x, f)| Formula::exists(x, unary(), f)),
            (s(), inner.clone()).prop_map(|(x, f)| Formula::forall(x, unary(), f)),
            (s(), inner, g()).prop_map(|(x, f, y)| Formula::pfp(x, unary(), f, [y])),
        ]
    })
}

/// Small LTSs with actions `<` (a random total order, or absent) and `a`, props `p`, `q`.
pub fn arb_lts(max_n: usize) -> impl Strategy<Value = Lts> {
    (1..=max_n).prop_flat_map(|n| {
        (
            Just(n),
            any::<bool>(),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            prop::collection::vec(any::<bool>(), n * n),
            prop::collection::vec(any::<bool>(), 2 * n),
        )
            .prop_map(|(n, ordered, perm, edges, labels)| {
                let mut t = Lts::new((0..n).map(|i| format!("s{i}"))).unwrap();
                if ordered {
                    let lt = t.add_action(ORDER_ACTION).unwrap();
                    for i in 0..n {
                        for j in 0..n {
                            if perm[i] < perm[j] {
                                t.set_edge(lt, i, j, true);
                            }
                        }
                    }
                }
                let a = t.add_action("a").unwrap();
                for (k, &e) in edges.iter().enumerate() {
                    t.set_edge(a, k / n, k % n, e);
                }
                for (pi, p) in ["p", "q"].iter().enumerate() {
                    let pi2 = t.add_prop(*p).unwrap();
                    assert_eq!(pi, pi2);
                    for s in 0..n {
                        t.set_label(pi, s, labels[pi * n + s]);
                    }
                }
                t
            })
    })
}

/// A uniformly chosen element of `t` over `n` states (cardinality must fit `u64`).
pub fn arb_value(t: Type, n: usize) -> impl Strategy<Value = Value> {
    let d = Domain::new(t, n);
    let card = d.cardinality_u64().expect("small domain");
    (0..card).prop_map(move |i| index_to_value(&BigUint::from(i), &d).unwrap())
}

pub fn arb_env(n: usize) -> impl Strategy<Value = Environment> {
    (
        prop::collection::vec(0..n, GROUND_VARS.len()),
        prop::collection::vec(arb_value(unary(), n), SET_VARS.len()),
    )
        .prop_map(|(gs, ss)| {
            GROUND_VARS
                .iter()
                .map(|v| v.to_string())
                .zip(gs.into_iter().map(Value::State))
                .chain(SET_VARS.iter().map(|v| v.to_string()).zip(ss))
                .collect()
        })
}

/// Machines with 2..=5 states and 2..=5 single-character tape symbols.
pub fn arb_tm() -> impl Strategy<Value = TmSpec> {
    (
        2usize..=5,
        subsequence(vec!['0', '1', 'a', 'b', '#', 'x', '_'], 2..=5),
    )
        .prop_flat_map(|(q, tape)| {
            let g = tape.len();
            (
                Just(q),
                Just(tape),
                0..g,
                1..g,
                0..q,
                (0..q, 1..q),
                prop::collection::vec((0..q, 0..g, 0..3usize), q * g),
            )
        })
        .prop_map(|(q, tape, blank, inputs, init, (acc, rej_off), rules)| {
            let rej = (acc + rej_off) % q;
            let blank_c = tape[blank];
            let input: String = tape
                .iter()
                .filter(|&&c| c != blank_c)
                .take(inputs)
                .collect();
            let states: Vec<String> = (0..q).map(|i| format!("q{i}")).collect();
            let mut b = TmBuilder::new(
                states.clone(),
                &input,
                &tape.iter().collect::<String>(),
                blank_c,
            )
            .init(states[init].clone())
            .accept(states[acc].clone())
            .reject(states[rej].clone());
            for (k, (q2, g2, d)) in rules.into_iter().enumerate() {
                let dir = [Move::L, Move::N, Move::R][d];
                b.add_rule(
                    &states[k / tape.len()],
                    tape[k % tape.len()],
                    &states[q2],
                    tape[g2],
                    dir,
                );
            }
            b.build().unwrap()
        })
}

/// Configurations of a machine with `states` states and `symbols` symbols within `d` cells.
pub fn arb_configuration(
    states: usize,
    symbols: usize,
    blank: usize,
    d: usize,
) -> impl Strategy<Value = Configuration> {
    (0..states, 0..d, prop::collection::vec(0..symbols, 0..=d))
        .prop_map(move |(q, h, tape)| Configuration::new(q, h, tape, blank))
}

/// States reachable from `init`-labeled states along `e` edges.
pub fn bfs_reachable(t: &Lts, init: usize, e: usize) -> Vec<bool> {
    let n = t.len();
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| t.has_label(init, s)).collect();
    for &s in &queue {
        seen[s] = true;
    }
    while let Some(s) = queue.pop_front() {
        for (u, flag) in seen.iter_mut().enumerate() {
            if t.has_edge(e, s, u) && !*flag {
                *flag = true;
                queue.push_back(u);
            }
        }
    }
    seen
}

/// `twr(base, k)` by repeated shifting, independent of the library's tower.
pub fn tower_oracle(base: u64, k: u32) -> BigUint {
    let mut v = BigUint::from(base);
    for _ in 0..k {
        let e: usize = v.clone().try_into().expect("exponent fits usize");
        v = BigUint::from(1u8) << e;
    }
    v
}

/// Direct recursive semantics over [`Value`]s, used as an oracle for the evaluator.
pub fn naive_eval(t: &Lts, env: &Environment, f: &Formula) -> bool {
    let n = t.len();
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Prop { prop, var } => match (t.prop_index(prop), &env[var]) {
            (Some(p), Value::State(s)) => t.has_label(p, *s),
            _ => false,
        },
        Formula::Act { action, from, to } => match (t.action_index(action), &env[from], &env[to]) {
            (Some(a), Value::State(i), Value::State(j)) => t.has_edge(a, *i, *j),
            _ => false,
        },
        Formula::Apply { set, args } => {
            let Value::Set(members) = &env[set] else {
                panic!("{set} is not a set")
            };
            contains(members, args.iter().map(|a| env[a].clone()).collect())
        }
        Formula::Not(g) => !naive_eval(t, env, g),
        Formula::Or(g, h) => naive_eval(t, env, g) || naive_eval(t, env, h),
        Formula::And(g, h) => naive_eval(t, env, g) && naive_eval(t, env, h),
        Formula::Implies(g, h) => !naive_eval(t, env, g) || naive_eval(t, env, h),
        Formula::Exists { var, ty, body } | Formula::Forall { var, ty, body } => {
            let all = matches!(f, Formula::Forall { .. });
            let mut env = env.clone();
            let domain = Domain::new(ty.clone(), n);
            let mut values = domain.values(u64::MAX).unwrap();
            let mut test = |v: Value| {
                env.insert(var.clone(), v);
                naive_eval(t, &env, body)
            };
            if all {
                values.all(&mut test)
            } else {
                values.any(&mut test)
            }
        }
        Formula::Pfp {
            var,
            ty,
            body,
            args,
        } => {
            let Type::SetOf(elem) = ty else {
                panic!("fixpoint over {ty}")
            };
            let elements: Vec<Value> = Domain::new((**elem).clone(), n)
                .values(u64::MAX)
                .unwrap()
                .collect();
            let mut inner = env.clone();
            let mut stages = vec![Vec::new()];
            let fixpoint = loop {
                let current = stages.last().unwrap().clone();
                inner.insert(var.clone(), Value::Set(current.clone()));
                let next: Vec<Value> = elements
                    .iter()
                    .filter(|e| {
                        bind_args(&mut inner, args, e);
                        naive_eval(t, &inner, body)
                    })
                    .cloned()
                    .collect();
                if next == current {
                    break current;
                }
                if stages.contains(&next) {
                    break Vec::new();
                }
                stages.push(next);
            };
            contains(&fixpoint, args.iter().map(|a| env[a].clone()).collect())
        }
    }
}

/// Membership of an argument list, as a tuple or, for one argument, as a bare element.
fn contains(members: &[Value], args: Vec<Value>) -> bool {
    (args.len() == 1 && members.contains(&args[0])) || members.contains(&Value::Tuple(args))
}

fn bind_args(env: &mut Environment, args: &[String], e: &Value) {
    match e {
        Value::Tuple(items) if items.len() == args.len() => {
            for (a, v) in args.iter().zip(items) {
                env.insert(a.clone(), v.clone());
            }
        }
        _ => {
            env.insert(args[0].clone(), e.clone());
        }
    }
}
