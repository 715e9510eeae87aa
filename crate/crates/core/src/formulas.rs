//! Definable orders over the type tower `τ_1 = •^c`, `τ_{i+1} = {τ_i}`.
//!
//! Given an ordered LTS, these formulas define the canonical order of
//! [`crate::domains`] on every level: lexicographic on `c`-tuples of states,
//! and "binary number, largest element most significant" on sets. Equality,
//! successor and the `j`-th element are derived from the order.
//!
//! An element of `τ_1` is held in `c` individual variables (a *group*); higher
//! levels use one variable. Bound variables introduced here are named
//! `_<hint><counter>`; callers should keep their own names free of a leading
//! underscore.

use crate::domains::{domain_size, BigCount, DomainError, Value};
use crate::eval::Environment;
use crate::logic::{check_well_formed, Formula, Type, TypeError, TypedFormula, TypingContext, Var};
use crate::lts::ORDER_ACTION;

/// Selects `τ_level` over `c`-tuples of states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TowerSpec {
    pub c: usize,
    pub level: usize,
}

impl TowerSpec {
    pub fn new(c: usize, level: usize) -> TowerSpec {
        assert!(
            c >= 1 && level >= 1,
            "tower levels and tuple widths start at 1"
        );
        TowerSpec { c, level }
    }

    pub fn lower(&self) -> TowerSpec {
        assert!(self.level > 1, "level 1 is the base of the tower");
        TowerSpec::new(self.c, self.level - 1)
    }

    pub fn higher(&self) -> TowerSpec {
        TowerSpec::new(self.c, self.level + 1)
    }

    /// `τ_level`.
    pub fn element_type(&self) -> Type {
        if self.level == 1 {
            Type::ground_tuple(self.c)
        } else {
            Type::set_of(self.lower().element_type())
        }
    }

    /// Number of variables holding one element.
    pub fn group_width(&self) -> usize {
        if self.level == 1 {
            self.c
        } else {
            1
        }
    }

    /// Types of the variables of a group.
    pub fn group_types(&self) -> Vec<Type> {
        if self.level == 1 {
            vec![Type::Ground; self.c]
        } else {
            vec![self.element_type()]
        }
    }

    /// `|sem τ_level|` over `n` states.
    pub fn cardinality(&self, n: usize) -> Result<BigCount, DomainError> {
        domain_size(&self.element_type(), n)
    }

    /// Splits an element of `τ_level` into the values of its group.
    pub fn group_values(&self, v: &Value) -> Vec<Value> {
        match (self.level, v) {
            (1, Value::Tuple(items)) => items.clone(),
            _ => vec![v.clone()],
        }
    }
}

/// Constructs formulas, drawing bound variable names from one counter so that
/// everything built by the same instance can be nested without capture.
#[derive(Debug, Default, Clone)]
pub struct Builder {
    next: usize,
}

impl Builder {
    pub fn new() -> Builder {
        Builder::default()
    }

    pub fn fresh(&mut self, hint: &str) -> Var {
        self.next += 1;
        format!("_{hint}{}", self.next)
    }

    pub fn fresh_group(&mut self, spec: TowerSpec, hint: &str) -> Vec<Var> {
        (0..spec.group_width()).map(|_| self.fresh(hint)).collect()
    }

    pub fn exists_group(&self, spec: TowerSpec, group: &[Var], body: Formula) -> Formula {
        let binders: Vec<_> = group.iter().cloned().zip(spec.group_types()).collect();
        Formula::exists_many(&binders, body)
    }

    pub fn forall_group(&self, spec: TowerSpec, group: &[Var], body: Formula) -> Formula {
        let binders: Vec<_> = group.iter().cloned().zip(spec.group_types()).collect();
        Formula::forall_many(&binders, body)
    }

    /// `x < y` on `τ_level`.
    pub fn lt(&mut self, spec: TowerSpec, x: &[Var], y: &[Var]) -> Formula {
        check_group(spec, x);
        check_group(spec, y);
        if spec.level == 1 {
            // Lexicographic: some position is smaller and no earlier one is greater.
            return Formula::disj((0..spec.c).map(|i| {
                Formula::conj(
                    (0..i)
                        .map(|j| Formula::not(Formula::act(ORDER_ACTION, &y[j], &x[j])))
                        .chain([Formula::act(ORDER_ACTION, &x[i], &y[i])]),
                )
            }));
        }
        // Some Z is in Y but not X, and every Z' above Z in X is also in Y.
        let lower = spec.lower();
        let z = self.fresh_group(lower, "z");
        let z2 = self.fresh_group(lower, "z");
        let above = self.lt(lower, &z, &z2);
        let (xs, ys) = (&x[0], &y[0]);
        let dominated = self.forall_group(
            lower,
            &z2,
            Formula::implies(
                above,
                Formula::implies(Formula::apply(xs, &z2), Formula::apply(ys, &z2)),
            ),
        );
        self.exists_group(
            lower,
            &z,
            Formula::conj([
                Formula::apply(ys, &z),
                Formula::not(Formula::apply(xs, &z)),
                dominated,
            ]),
        )
    }

    /// `¬(x < y) ∧ ¬(y < x)`.
    pub fn eq(&mut self, spec: TowerSpec, x: &[Var], y: &[Var]) -> Formula {
        let a = self.lt(spec, x, y);
        let b = self.lt(spec, y, x);
        Formula::and(Formula::not(a), Formula::not(b))
    }

    /// `y` is the immediate successor of `x`: `x < y` and every `z < y` is `≤ x`.
    pub fn succ(&mut self, spec: TowerSpec, x: &[Var], y: &[Var]) -> Formula {
        let z = self.fresh_group(spec, "s");
        let less = self.lt(spec, x, y);
        let below_y = self.lt(spec, &z, y);
        let is_x = self.eq(spec, x, &z);
        let below_x = self.lt(spec, &z, x);
        let tight = self.forall_group(
            spec,
            &z,
            Formula::implies(below_y, Formula::or(is_x, below_x)),
        );
        Formula::and(less, tight)
    }

    /// `x` is the least element.
    pub fn min(&mut self, spec: TowerSpec, x: &[Var]) -> Formula {
        let y = self.fresh_group(spec, "m");
        let below = self.lt(spec, x, &y);
        let same = self.eq(spec, x, &y);
        self.forall_group(spec, &y, Formula::or(below, same))
    }

    /// `x` is the element of canonical index `j`: the minimum for `j = 0`, and
    /// otherwise the successor of the element of index `j - 1`.
    pub fn index(&mut self, spec: TowerSpec, j: u64, x: &[Var]) -> Formula {
        if j == 0 {
            return self.min(spec, x);
        }
        let y = self.fresh_group(spec, "p");
        let step = self.succ(spec, &y, x);
        let rest = self.index(spec, j - 1, &y);
        self.exists_group(spec, &y, Formula::and(step, rest))
    }

    /// `<` is a strict total order: irreflexive, transitive and trichotomous.
    ///
    /// Trichotomy needs equality of states, which is not first-order
    /// definable from the vocabulary; it is expressed as indiscernibility by
    /// sets of states, so the axiom has order 2.
    pub fn total_order_axiom(&mut self) -> Formula {
        let lt = |a: &Var, b: &Var| Formula::act(ORDER_ACTION, a, b);
        let (x, y, z) = (self.fresh("o"), self.fresh("o"), self.fresh("o"));
        let p = self.fresh("P");
        let ground = |v: &Var| (v.clone(), Type::Ground);
        let irreflexive = Formula::forall(x.clone(), Type::Ground, Formula::not(lt(&x, &x)));
        let transitive = Formula::forall_many(
            &[ground(&x), ground(&y), ground(&z)],
            Formula::implies(Formula::and(lt(&x, &y), lt(&y, &z)), lt(&x, &z)),
        );
        let same = Formula::forall(
            p.clone(),
            Type::set_of(Type::Ground),
            Formula::implies(Formula::apply(&p, [&x]), Formula::apply(&p, [&y])),
        );
        let trichotomous = Formula::forall_many(
            &[ground(&x), ground(&y)],
            Formula::disj([lt(&x, &y), lt(&y, &x), same]),
        );
        Formula::conj([irreflexive, transitive, trichotomous])
    }
}

fn check_group(spec: TowerSpec, g: &[Var]) {
    assert_eq!(
        g.len(),
        spec.group_width(),
        "a level-{} group over {}-tuples has {} variables",
        spec.level,
        spec.c,
        spec.group_width()
    );
}

/// A formula over named element groups of one tower level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TowerFormula {
    pub spec: TowerSpec,
    pub formula: Formula,
    pub groups: Vec<Vec<Var>>,
}

impl TowerFormula {
    fn new(
        spec: TowerSpec,
        hints: &[&str],
        build: impl FnOnce(&mut Builder, &[Vec<Var>]) -> Formula,
    ) -> TowerFormula {
        let groups: Vec<Vec<Var>> = hints
            .iter()
            .map(|h| {
                if spec.group_width() == 1 {
                    vec![h.to_string()]
                } else {
                    (1..=spec.c).map(|i| format!("{h}{i}")).collect()
                }
            })
            .collect();
        let formula = build(&mut Builder::new(), &groups);
        TowerFormula {
            spec,
            formula,
            groups,
        }
    }

    pub fn context(&self) -> TypingContext {
        self.groups
            .iter()
            .flat_map(|g| g.iter().cloned().zip(self.spec.group_types()))
            .collect()
    }

    pub fn typed(&self) -> Result<TypedFormula, TypeError> {
        let mut t = check_well_formed(&self.formula, &self.context())?;
        // Keep unused groups typed so that environments stay complete.
        t.free = self.context();
        Ok(t)
    }

    /// Binds the groups to the given elements of `τ_level`, in order.
    pub fn environment(&self, elements: &[Value]) -> Environment {
        assert_eq!(elements.len(), self.groups.len());
        self.groups
            .iter()
            .zip(elements)
            .flat_map(|(g, v)| g.iter().cloned().zip(self.spec.group_values(v)))
            .collect()
    }
}

/// `X < Y` with groups `X`, `Y` (or `X1..Xc`, `Y1..Yc` at level 1).
pub fn build_lt(spec: TowerSpec) -> TowerFormula {
    TowerFormula::new(spec, &["X", "Y"], |b, g| b.lt(spec, &g[0], &g[1]))
}

pub fn build_eq(spec: TowerSpec) -> TowerFormula {
    TowerFormula::new(spec, &["X", "Y"], |b, g| b.eq(spec, &g[0], &g[1]))
}

/// `Y` is the successor of `X`.
pub fn build_succ(spec: TowerSpec) -> TowerFormula {
    TowerFormula::new(spec, &["X", "Y"], |b, g| b.succ(spec, &g[0], &g[1]))
}

/// `X` has canonical index `j`.
pub fn build_index(spec: TowerSpec, j: u64) -> TowerFormula {
    TowerFormula::new(spec, &["X"], |b, g| b.index(spec, j, &g[0]))
}

/// The closed total-order axiom for `<`.
pub fn build_total_order_axiom() -> Formula {
    Builder::new().total_order_axiom()
}
