mod support;

use std::cmp::Ordering;

use hopfp::domains::{
    canonical_compare, canonical_index, canonical_successor, domain_size, index_to_value, minimum,
    Domain,
};
use hopfp::{Type, Value};
use num_bigint::BigUint;
use proptest::prelude::*;
use support::arb_type;

/// Cardinality by structural recursion, independent of the library.
fn size_oracle(t: &Type, n: usize) -> BigUint {
    match t {
        Type::Ground => BigUint::from(n),
        Type::Compound(ts) => ts.iter().map(|t| size_oracle(t, n)).product(),
        Type::SetOf(e) => {
            let k: usize = size_oracle(e, n).try_into().unwrap();
            BigUint::from(1u8) << k
        }
    }
}

fn small_type_and_n() -> impl Strategy<Value = (Type, usize)> {
    (arb_type(), 1usize..=3).prop_filter("domain too large", |(t, n)| {
        let d = Domain::new(t.clone(), *n);
        d.cardinality_u64().is_ok_and(|c| c <= 1 << 12)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn size_matches_structural_recursion((t, n) in small_type_and_n()) {
        prop_assert_eq!(domain_size(&t, n).unwrap(), size_oracle(&t, n));
    }

    #[test]
    fn enumeration_is_canonical_and_complete((t, n) in small_type_and_n()) {
        let d = Domain::new(t.clone(), n);
        let values: Vec<Value> = d.values(u64::MAX).unwrap().collect();
        prop_assert_eq!(BigUint::from(values.len()), d.cardinality().unwrap());
        prop_assert_eq!(&values[0], &minimum(&t));
        for (i, v) in values.iter().enumerate() {
            prop_assert!(v.conforms(&t, n));
            prop_assert_eq!(canonical_index(v, &d).unwrap(), BigUint::from(i));
            prop_assert_eq!(&index_to_value(&BigUint::from(i), &d).unwrap(), v);
            let next = canonical_successor(v, &d).unwrap();
            prop_assert_eq!(next.as_ref(), values.get(i + 1));
        }
        for w in values.windows(2) {
            prop_assert_eq!(canonical_compare(&w[0], &w[1], &d).unwrap(), Ordering::Less);
        }
    }

    #[test]
    fn relabeling_preserves_conformance((t, n) in small_type_and_n(), seed in any::<u64>()) {
        let d = Domain::new(t.clone(), n);
        let card = d.cardinality_u64().unwrap();
        let v = index_to_value(&BigUint::from(seed % card), &d).unwrap();
        let perm: Vec<usize> = (0..n).map(|i| (i + seed as usize) % n).collect();
        let inverse: Vec<usize> = (0..n).map(|i| perm.iter().position(|&p| p == i).unwrap()).collect();
        let moved = v.relabel(&perm);
        prop_assert!(moved.conforms(&t, n));
        prop_assert_eq!(moved.relabel(&inverse), v);
    }
}

#[test]
fn out_of_range_index_is_rejected() {
    let d = Domain::new(Type::set_of(Type::Ground), 3);
    assert!(index_to_value(&BigUint::from(8u8), &d).is_err());
    assert!(canonical_index(&Value::State(3), &Domain::new(Type::Ground, 3)).is_err());
}

#[test]
fn huge_domains_are_counted_not_enumerated() {
    let t = Type::set_of(Type::set_of(Type::ground_tuple(2)));
    let d = Domain::new(t.clone(), 3);
    assert_eq!(d.cardinality().unwrap(), BigUint::from(1u8) << 512usize);
    assert!(d.values(1 << 20).is_err());
}
