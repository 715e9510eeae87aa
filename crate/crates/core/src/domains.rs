//! Semantic domains: the elements of a type over an LTS with `n` states.
//!
//! Every domain carries a canonical total order and a bijection onto
//! `0..cardinality`:
//!
//! * states are ordered by their index,
//! * tuples lexicographically, first component most significant,
//! * sets as binary numbers over their characteristic vector, with the
//!   largest element most significant.
//!
//! Enumeration is streaming: [`canonical_successor`] computes the next value
//! from the current one without materializing the domain.

use std::cmp::Ordering;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::logic::Type;

/// Exact non-negative integer.
pub type BigCount = BigUint;

/// Default cap on the bit length of computed cardinalities.
pub const DEFAULT_BIT_BUDGET: u64 = 1 << 20;

/// Default cap on the number of elements any single domain traversal may visit.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("value {value} does not conform to type {ty} over {n} states")]
    Conformance { value: String, ty: Type, n: usize },
    #[error("index {index} out of range for a domain of cardinality {cardinality}")]
    Range {
        index: BigCount,
        cardinality: BigCount,
    },
    #[error("resource limit: {0}")]
    Resource(String),
}

/// An element of a semantic domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    State(usize),
    Tuple(Vec<Value>),
    /// Members strictly increasing in the canonical order.
    Set(Vec<Value>),
}

impl Value {
    /// Builds a set, sorting and deduplicating members canonically.
    pub fn set(mut members: Vec<Value>) -> Value {
        members.sort_by(structural_compare);
        members.dedup();
        Value::Set(members)
    }

    pub fn tuple(items: Vec<Value>) -> Value {
        Value::Tuple(items)
    }

    /// Whether this value is an element of `ty` over `n` states.
    pub fn conforms(&self, ty: &Type, n: usize) -> bool {
        match (self, ty) {
            (Value::State(i), Type::Ground) => *i < n,
            (Value::Tuple(items), Type::Compound(types)) => {
                items.len() == types.len() && items.iter().zip(types).all(|(v, t)| v.conforms(t, n))
            }
            (Value::Set(members), Type::SetOf(element)) => {
                members.iter().all(|m| m.conforms(element, n))
                    && members
                        .windows(2)
                        .all(|w| structural_compare(&w[0], &w[1]) == Ordering::Less)
            }
            _ => false,
        }
    }

    /// Renames states: state `i` becomes `perm[i]`. Sets are re-sorted.
    pub fn relabel(&self, perm: &[usize]) -> Value {
        match self {
            Value::State(i) => Value::State(perm[*i]),
            Value::Tuple(items) => Value::Tuple(items.iter().map(|v| v.relabel(perm)).collect()),
            Value::Set(members) => Value::set(members.iter().map(|v| v.relabel(perm)).collect()),
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::State(i) => write!(f, "s{i}"),
            Value::Tuple(items) => {
                write!(f, "(")?;
                for (k, v) in items.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
            Value::Set(members) => {
                write!(f, "{{")?;
                for (k, v) in members.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// A type interpreted over an LTS with `n` states.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Domain {
    pub element_type: Type,
    pub n: usize,
}

impl Domain {
    pub fn new(element_type: Type, n: usize) -> Domain {
        Domain { element_type, n }
    }

    pub fn cardinality(&self) -> Result<BigCount, DomainError> {
        domain_size(&self.element_type, self.n)
    }

    /// The cardinality if it fits a `u64`, otherwise a resource error.
    pub fn cardinality_u64(&self) -> Result<u64, DomainError> {
        let c = self.cardinality()?;
        c.to_u64().ok_or_else(|| {
            DomainError::Resource(format!(
                "domain {} over {} states has {} elements",
                self.element_type,
                self.n,
                describe(&c)
            ))
        })
    }

    fn check(&self, v: &Value) -> Result<(), DomainError> {
        if v.conforms(&self.element_type, self.n) {
            Ok(())
        } else {
            Err(DomainError::Conformance {
                value: v.to_string(),
                ty: self.element_type.clone(),
                n: self.n,
            })
        }
    }

    /// Streams the domain in canonical order, failing up front if it has more
    /// than `budget` elements.
    pub fn values(&self, budget: u64) -> Result<DomainValues<'_>, DomainError> {
        let card = self.cardinality()?;
        if card > BigCount::from(budget) {
            return Err(DomainError::Resource(format!(
                "enumerating {} over {} states needs {} elements, budget is {budget}",
                self.element_type,
                self.n,
                describe(&card)
            )));
        }
        Ok(DomainValues {
            domain: self,
            next: (self.n > 0).then(|| minimum(&self.element_type)),
        })
    }
}

/// Iterator produced by [`Domain::values`].
pub struct DomainValues<'a> {
    domain: &'a Domain,
    next: Option<Value>,
}

impl Iterator for DomainValues<'_> {
    type Item = Value;

    fn next(&mut self) -> Option<Value> {
        let current = self.next.take()?;
        self.next = successor_unchecked(&current, &self.domain.element_type, self.domain.n);
        Some(current)
    }
}

fn describe(c: &BigCount) -> String {
    if c.bits() <= 64 {
        c.to_string()
    } else {
        format!("about 2^{}", c.bits() - 1)
    }
}

fn pow2(exponent: &BigCount, max_bits: u64) -> Result<BigCount, DomainError> {
    match exponent.to_u64() {
        Some(e) if e < max_bits => Ok(BigCount::one() << e),
        _ => Err(DomainError::Resource(format!(
            "2^{} exceeds the bit budget of {max_bits}",
            describe(exponent)
        ))),
    }
}

/// `twr(n, 0) = n`, `twr(n, k + 1) = 2^twr(n, k)`.
pub fn tower(n: u64, k: u32) -> Result<BigCount, DomainError> {
    tower_with_budget(n, k, DEFAULT_BIT_BUDGET)
}

pub fn tower_with_budget(n: u64, k: u32, max_bits: u64) -> Result<BigCount, DomainError> {
    let mut acc = BigCount::from(n);
    for _ in 0..k {
        acc = pow2(&acc, max_bits)?;
    }
    Ok(acc)
}

/// Cardinality of `t` over `n` states: `n` for individuals, products for
/// compounds and `2^|element|` for sets.
pub fn domain_size(t: &Type, n: usize) -> Result<BigCount, DomainError> {
    domain_size_with_budget(t, n, DEFAULT_BIT_BUDGET)
}

pub fn domain_size_with_budget(t: &Type, n: usize, max_bits: u64) -> Result<BigCount, DomainError> {
    match t {
        Type::Ground => Ok(BigCount::from(n)),
        Type::Compound(items) => {
            let mut acc = BigCount::one();
            for item in items {
                acc *= domain_size_with_budget(item, n, max_bits)?;
                if acc.bits() > max_bits {
                    return Err(DomainError::Resource(format!(
                        "cardinality of {t} exceeds the bit budget of {max_bits}"
                    )));
                }
            }
            Ok(acc)
        }
        Type::SetOf(element) => pow2(&domain_size_with_budget(element, n, max_bits)?, max_bits),
    }
}

/// The least element of a type's domain (assumes at least one state).
pub fn minimum(t: &Type) -> Value {
    match t {
        Type::Ground => Value::State(0),
        Type::Compound(items) => Value::Tuple(items.iter().map(minimum).collect()),
        Type::SetOf(_) => Value::Set(Vec::new()),
    }
}

/// Position of `v` in the canonical order of `d`.
pub fn canonical_index(v: &Value, d: &Domain) -> Result<BigCount, DomainError> {
    d.check(v)?;
    index_unchecked(v, &d.element_type, d.n)
}

fn index_unchecked(v: &Value, t: &Type, n: usize) -> Result<BigCount, DomainError> {
    match (v, t) {
        (Value::State(i), Type::Ground) => Ok(BigCount::from(*i)),
        (Value::Tuple(items), Type::Compound(types)) => {
            let mut acc = BigCount::zero();
            for (item, ty) in items.iter().zip(types) {
                acc = acc * domain_size(ty, n)? + index_unchecked(item, ty, n)?;
            }
            Ok(acc)
        }
        (Value::Set(members), Type::SetOf(element)) => {
            let mut acc = BigCount::zero();
            for m in members {
                let bit = index_unchecked(m, element, n)?;
                let bit = bit
                    .to_u64()
                    .filter(|b| *b < DEFAULT_BIT_BUDGET)
                    .ok_or_else(|| {
                        DomainError::Resource("set member index exceeds the bit budget".into())
                    })?;
                acc.set_bit(bit, true);
            }
            Ok(acc)
        }
        _ => unreachable!("conformance checked by caller"),
    }
}

/// Inverse of [`canonical_index`].
pub fn index_to_value(i: &BigCount, d: &Domain) -> Result<Value, DomainError> {
    let card = d.cardinality()?;
    if *i >= card {
        return Err(DomainError::Range {
            index: i.clone(),
            cardinality: card,
        });
    }
    value_unchecked(i, &d.element_type, d.n)
}

fn value_unchecked(i: &BigCount, t: &Type, n: usize) -> Result<Value, DomainError> {
    match t {
        Type::Ground => Ok(Value::State(i.to_usize().expect("below n"))),
        Type::Compound(types) => {
            let mut rest = i.clone();
            let mut items = Vec::with_capacity(types.len());
            for ty in types.iter().rev() {
                let radix = domain_size(ty, n)?;
                let digit = &rest % &radix;
                rest /= &radix;
                items.push(value_unchecked(&digit, ty, n)?);
            }
            items.reverse();
            Ok(Value::Tuple(items))
        }
        Type::SetOf(element) => {
            let mut members = Vec::new();
            for bit in 0..i.bits() {
                if i.bit(bit) {
                    members.push(value_unchecked(&BigCount::from(bit), element, n)?);
                }
            }
            Ok(Value::Set(members))
        }
    }
}

/// Compares two values of the same domain in the canonical order.
pub fn canonical_compare(u: &Value, v: &Value, d: &Domain) -> Result<Ordering, DomainError> {
    d.check(u)?;
    d.check(v)?;
    Ok(structural_compare(u, v))
}

/// Canonical comparison without conformance checks. Values of different shapes
/// are ordered by variant so that the function stays total.
pub fn structural_compare(u: &Value, v: &Value) -> Ordering {
    match (u, v) {
        (Value::State(a), Value::State(b)) => a.cmp(b),
        (Value::Tuple(a), Value::Tuple(b)) => {
            for (x, y) in a.iter().zip(b) {
                match structural_compare(x, y) {
                    Ordering::Equal => continue,
                    other => return other,
                }
            }
            a.len().cmp(&b.len())
        }
        (Value::Set(a), Value::Set(b)) => {
            // The largest element where the sets differ decides.
            let mut xs = a.iter().rev();
            let mut ys = b.iter().rev();
            loop {
                match (xs.next(), ys.next()) {
                    (None, None) => return Ordering::Equal,
                    (Some(_), None) => return Ordering::Greater,
                    (None, Some(_)) => return Ordering::Less,
                    (Some(x), Some(y)) => match structural_compare(x, y) {
                        Ordering::Equal => continue,
                        other => return other,
                    },
                }
            }
        }
        (a, b) => variant_rank(a).cmp(&variant_rank(b)),
    }
}

fn variant_rank(v: &Value) -> u8 {
    match v {
        Value::State(_) => 0,
        Value::Tuple(_) => 1,
        Value::Set(_) => 2,
    }
}

/// The immediate successor of `v` in `d`, or `None` if `v` is the maximum.
pub fn canonical_successor(v: &Value, d: &Domain) -> Result<Option<Value>, DomainError> {
    d.check(v)?;
    Ok(successor_unchecked(v, &d.element_type, d.n))
}

fn successor_unchecked(v: &Value, t: &Type, n: usize) -> Option<Value> {
    match (v, t) {
        (Value::State(i), Type::Ground) => (i + 1 < n).then(|| Value::State(i + 1)),
        (Value::Tuple(items), Type::Compound(types)) => {
            // Increment the last component, carrying leftwards.
            let mut items = items.clone();
            for k in (0..items.len()).rev() {
                match successor_unchecked(&items[k], &types[k], n) {
                    Some(next) => {
                        items[k] = next;
                        return Some(Value::Tuple(items));
                    }
                    None => items[k] = minimum(&types[k]),
                }
            }
            None
        }
        (Value::Set(members), Type::SetOf(element)) => {
            // Binary increment: clear the run of members equal to the least
            // elements of the element domain, then add the first gap.
            let mut candidate = minimum(element);
            let mut cleared = 0;
            while cleared < members.len() && members[cleared] == candidate {
                cleared += 1;
                candidate = successor_unchecked(&candidate, element, n)?;
            }
            let mut next = Vec::with_capacity(members.len() - cleared + 1);
            next.push(candidate);
            next.extend_from_slice(&members[cleared..]);
            Some(Value::Set(next))
        }
        _ => unreachable!("conformance checked by caller"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_of_ground() -> Type {
        Type::set_of(Type::Ground)
    }

    fn big(v: u64) -> BigCount {
        BigCount::from(v)
    }

    /// All tuples of `n`-ary states of width `w`, in lexicographic order, by brute force.
    fn brute_tuples(n: usize, w: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..w {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..n).map(move |s| {
                        let mut p = prefix.clone();
                        p.push(s);
                        p
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn tower_values() {
        assert_eq!(tower(3, 0).unwrap(), big(3));
        assert_eq!(tower(3, 2).unwrap(), big(256));
        // twr(2,1) = 4, twr(2,2) = 16, twr(2,3) = 65536 by direct recurrence.
        let mut expected = 2u64;
        for _ in 0..3 {
            expected = 1u64 << expected;
        }
        assert_eq!(expected, 65536);
        assert_eq!(tower(2, 3).unwrap(), big(expected));
        assert!(matches!(
            tower_with_budget(2, 5, 1 << 16),
            Err(DomainError::Resource(_))
        ));
    }

    #[test]
    fn domain_sizes() {
        assert_eq!(domain_size(&set_of_ground(), 3).unwrap(), big(8));
        let pairs = Type::set_of(Type::Compound(vec![Type::Ground, Type::Ground]));
        assert_eq!(domain_size(&pairs, 2).unwrap(), big(16));
        let tau2 = Type::set_of(Type::ground_tuple(1));
        assert_eq!(domain_size(&tau2, 2).unwrap(), tower(2, 1).unwrap());
    }

    #[test]
    fn indices_of_examples() {
        let d = Domain::new(set_of_ground(), 2);
        assert_eq!(canonical_index(&Value::Set(vec![]), &d).unwrap(), big(0));
        assert_eq!(
            canonical_index(&Value::Set(vec![Value::State(1)]), &d).unwrap(),
            big(2)
        );
        let pairs = Domain::new(Type::ground_tuple(2), 2);
        let v = Value::Tuple(vec![Value::State(1), Value::State(0)]);
        assert_eq!(canonical_index(&v, &pairs).unwrap(), big(2));
        // Brute force: the index is the position in lexicographic enumeration.
        for (pos, t) in brute_tuples(2, 2).into_iter().enumerate() {
            let v = Value::Tuple(t.into_iter().map(Value::State).collect());
            assert_eq!(canonical_index(&v, &pairs).unwrap(), big(pos as u64));
        }
    }

    #[test]
    fn index_errors() {
        let d = Domain::new(set_of_ground(), 2);
        assert!(matches!(
            canonical_index(&Value::State(0), &d),
            Err(DomainError::Conformance { .. })
        ));
        assert!(matches!(
            index_to_value(&big(4), &d),
            Err(DomainError::Range { .. })
        ));
        // Unsorted members are not a canonical set value.
        let unsorted = Value::Set(vec![Value::State(1), Value::State(0)]);
        assert!(canonical_index(&unsorted, &d).is_err());
    }

    #[test]
    fn compare_examples() {
        let g = Domain::new(Type::Ground, 2);
        assert_eq!(
            canonical_compare(&Value::State(0), &Value::State(1), &g).unwrap(),
            Ordering::Less
        );
        let d = Domain::new(set_of_ground(), 2);
        let s0 = Value::Set(vec![Value::State(0)]);
        let s1 = Value::Set(vec![Value::State(1)]);
        assert_eq!(canonical_compare(&s0, &s1, &d).unwrap(), Ordering::Less);
        let pairs = Domain::new(Type::ground_tuple(2), 2);
        let a = Value::Tuple(vec![Value::State(0), Value::State(1)]);
        let b = Value::Tuple(vec![Value::State(1), Value::State(0)]);
        assert_eq!(canonical_compare(&a, &b, &pairs).unwrap(), Ordering::Less);
    }

    #[test]
    fn successor_examples() {
        let d = Domain::new(set_of_ground(), 2);
        let empty = Value::Set(vec![]);
        let s0 = Value::Set(vec![Value::State(0)]);
        let s1 = Value::Set(vec![Value::State(1)]);
        let full = Value::Set(vec![Value::State(0), Value::State(1)]);
        assert_eq!(canonical_successor(&empty, &d).unwrap(), Some(s0.clone()));
        assert_eq!(canonical_successor(&s0, &d).unwrap(), Some(s1));
        assert_eq!(canonical_successor(&full, &d).unwrap(), None);
    }

    fn small_types() -> Vec<Type> {
        let g = Type::Ground;
        let t1 = Type::ground_tuple(2);
        vec![
            g.clone(),
            t1.clone(),
            Type::set_of(g.clone()),
            Type::set_of(t1.clone()),
            Type::Compound(vec![g.clone(), Type::set_of(g.clone())]),
            Type::set_of(Type::set_of(g.clone())),
            Type::set_of(Type::Compound(vec![g.clone(), Type::set_of(g.clone())])),
        ]
    }

    #[test]
    fn successor_walk_matches_index_order() {
        for t in small_types() {
            for n in 1..=3 {
                let d = Domain::new(t.clone(), n);
                let Ok(card) = d.cardinality_u64() else {
                    continue;
                };
                if card > 1 << 16 {
                    continue;
                }
                let mut current = Some(minimum(&t));
                let mut count = 0u64;
                let mut previous: Option<Value> = None;
                while let Some(v) = current {
                    assert_eq!(canonical_index(&v, &d).unwrap(), big(count), "{t} n={n}");
                    assert_eq!(index_to_value(&big(count), &d).unwrap(), v);
                    if let Some(p) = &previous {
                        assert_eq!(canonical_compare(p, &v, &d).unwrap(), Ordering::Less);
                    }
                    count += 1;
                    current = canonical_successor(&v, &d).unwrap();
                    previous = Some(v);
                }
                assert_eq!(count, card, "{t} n={n}");
            }
        }
    }

    #[test]
    fn tower_identity_for_iterated_sets() {
        for n in 1..=3usize {
            for c in 1..=2usize {
                let mut t = Type::ground_tuple(c);
                for k in 0..=3u32 {
                    let expected = tower((n as u64).pow(c as u32), k);
                    match (domain_size(&t, n), expected) {
                        (Ok(a), Ok(b)) => assert_eq!(a, b, "n={n} c={c} k={k}"),
                        (Err(_), Err(_)) => {}
                        (a, b) => panic!("disagreement {a:?} vs {b:?}"),
                    }
                    t = Type::set_of(t);
                }
            }
        }
    }

    #[test]
    fn values_respects_budget() {
        let d = Domain::new(Type::set_of(Type::set_of(Type::Ground)), 3);
        assert!(d.values(255).is_err());
        assert_eq!(d.values(256).unwrap().count(), 256);
    }

    #[test]
    fn relabel_resorts_sets() {
        let v = Value::Set(vec![Value::State(0), Value::State(2)]);
        // Reverse three states.
        let r = v.relabel(&[2, 1, 0]);
        assert_eq!(r, Value::Set(vec![Value::State(0), Value::State(2)]));
        let w = Value::Set(vec![Value::State(0)]).relabel(&[2, 1, 0]);
        assert_eq!(w, Value::Set(vec![Value::State(2)]));
    }
}
