//! Types and formulas of higher-order logic with partial fixpoints.
//!
//! The core syntax is `tt`, `p(X)`, `a(X, Y)`, `X(Y1, ..., Yn)`, negation,
//! disjunction, existential quantification and the partial fixpoint binder
//! `(PFP (X : t). body)(Y1, ..., Yn)`. Conjunction, implication, universal
//! quantification and `ff` are kept in the AST so that they print back the
//! way they were written, and [`Formula::desugar`] rewrites them into the core.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// A variable name. Names starting with `_` are reserved for generated binders.
pub type Var = String;

/// The type grammar: individuals, compound (tuple) types and set types.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Ground,
    Compound(Vec<Type>),
    SetOf(Box<Type>),
}

impl Type {
    pub fn set_of(element: Type) -> Type {
        Type::SetOf(Box::new(element))
    }

    /// `Compound` of `c` copies of `Ground`.
    pub fn ground_tuple(c: usize) -> Type {
        Type::Compound(vec![Type::Ground; c])
    }

    /// The order: 1 for individuals, max over components, one more for sets.
    pub fn order(&self) -> usize {
        match self {
            Type::Ground => 1,
            Type::Compound(items) => items.iter().map(Type::order).max().unwrap_or(1),
            Type::SetOf(inner) => 1 + inner.order(),
        }
    }

    /// Component types of the tuples a set of this type holds, if it is a set type.
    ///
    /// A set over a non-compound element type is treated as a set of 1-tuples.
    pub fn relation_signature(&self) -> Option<Vec<Type>> {
        match self {
            Type::SetOf(inner) => match inner.as_ref() {
                Type::Compound(items) => Some(items.clone()),
                other => Some(vec![other.clone()]),
            },
            _ => None,
        }
    }

    /// Checks the structural invariant that every compound has at least one component.
    pub fn is_valid(&self) -> bool {
        match self {
            Type::Ground => true,
            Type::Compound(items) => !items.is_empty() && items.iter().all(Type::is_valid),
            Type::SetOf(inner) => inner.is_valid(),
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Ground => write!(f, "o"),
            Type::Compound(items) => {
                write!(f, "(tuple")?;
                for t in items {
                    write!(f, " {t}")?;
                }
                write!(f, ")")
            }
            Type::SetOf(inner) => write!(f, "(set {inner})"),
        }
    }
}

/// Order of a type; see [`Type::order`].
pub fn order_of(t: &Type) -> usize {
    t.order()
}

/// Formulas, including the derived connectives.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Prop {
        prop: String,
        var: Var,
    },
    Act {
        action: String,
        from: Var,
        to: Var,
    },
    Apply {
        set: Var,
        args: Vec<Var>,
    },
    Not(Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists {
        var: Var,
        ty: Type,
        body: Box<Formula>,
    },
    Forall {
        var: Var,
        ty: Type,
        body: Box<Formula>,
    },
    Pfp {
        var: Var,
        ty: Type,
        body: Box<Formula>,
        args: Vec<Var>,
    },
}

// Smart constructors. These keep the builders in `formulas` and `reduction` readable.
impl Formula {
    pub fn prop(prop: impl Into<String>, var: impl Into<Var>) -> Formula {
        Formula::Prop {
            prop: prop.into(),
            var: var.into(),
        }
    }

    pub fn act(action: impl Into<String>, from: impl Into<Var>, to: impl Into<Var>) -> Formula {
        Formula::Act {
            action: action.into(),
            from: from.into(),
            to: to.into(),
        }
    }

    pub fn apply<S: Into<Var>>(set: impl Into<Var>, args: impl IntoIterator<Item = S>) -> Formula {
        Formula::Apply {
            set: set.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn or(f: Formula, g: Formula) -> Formula {
        Formula::Or(Box::new(f), Box::new(g))
    }

    pub fn and(f: Formula, g: Formula) -> Formula {
        Formula::And(Box::new(f), Box::new(g))
    }

    pub fn implies(f: Formula, g: Formula) -> Formula {
        Formula::Implies(Box::new(f), Box::new(g))
    }

    pub fn exists(var: impl Into<Var>, ty: Type, body: Formula) -> Formula {
        Formula::Exists {
            var: var.into(),
            ty,
            body: Box::new(body),
        }
    }

    pub fn forall(var: impl Into<Var>, ty: Type, body: Formula) -> Formula {
        Formula::Forall {
            var: var.into(),
            ty,
            body: Box::new(body),
        }
    }

    pub fn pfp<S: Into<Var>>(
        var: impl Into<Var>,
        ty: Type,
        body: Formula,
        args: impl IntoIterator<Item = S>,
    ) -> Formula {
        Formula::Pfp {
            var: var.into(),
            ty,
            body: Box::new(body),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    /// Conjunction of all formulas; `tt` when empty.
    pub fn conj(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut parts: Vec<Formula> = parts.into_iter().collect();
        let Some(mut acc) = parts.pop() else {
            return Formula::True;
        };
        while let Some(f) = parts.pop() {
            acc = Formula::and(f, acc);
        }
        acc
    }

    /// Disjunction of all formulas; `ff` when empty.
    pub fn disj(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut parts: Vec<Formula> = parts.into_iter().collect();
        let Some(mut acc) = parts.pop() else {
            return Formula::False;
        };
        while let Some(f) = parts.pop() {
            acc = Formula::or(f, acc);
        }
        acc
    }

    /// Nested existentials, outermost binder first.
    pub fn exists_many(binders: &[(Var, Type)], body: Formula) -> Formula {
        binders.iter().rev().fold(body, |acc, (v, t)| {
            Formula::exists(v.clone(), t.clone(), acc)
        })
    }

    /// Nested universals, outermost binder first.
    pub fn forall_many(binders: &[(Var, Type)], body: Formula) -> Formula {
        binders.iter().rev().fold(body, |acc, (v, t)| {
            Formula::forall(v.clone(), t.clone(), acc)
        })
    }

    /// True if the formula uses only the core connectives.
    pub fn is_core(&self) -> bool {
        match self {
            Formula::True | Formula::Prop { .. } | Formula::Act { .. } | Formula::Apply { .. } => {
                true
            }
            Formula::False | Formula::And(..) | Formula::Implies(..) | Formula::Forall { .. } => {
                false
            }
            Formula::Not(f) => f.is_core(),
            Formula::Or(f, g) => f.is_core() && g.is_core(),
            Formula::Exists { body, .. } | Formula::Pfp { body, .. } => body.is_core(),
        }
    }

    /// Rewrites derived connectives into the core syntax:
    /// `ff = ¬tt`, `f ∧ g = ¬(¬f ∨ ¬g)`, `f → g = ¬f ∨ g`, `∀x.f = ¬∃x.¬f`.
    pub fn desugar(&self) -> Formula {
        match self {
            Formula::True | Formula::Prop { .. } | Formula::Act { .. } | Formula::Apply { .. } => {
                self.clone()
            }
            Formula::False => Formula::not(Formula::True),
            Formula::Not(f) => Formula::not(f.desugar()),
            Formula::Or(f, g) => Formula::or(f.desugar(), g.desugar()),
            Formula::And(f, g) => Formula::not(Formula::or(
                Formula::not(f.desugar()),
                Formula::not(g.desugar()),
            )),
            Formula::Implies(f, g) => Formula::or(Formula::not(f.desugar()), g.desugar()),
            Formula::Exists { var, ty, body } => {
                Formula::exists(var.clone(), ty.clone(), body.desugar())
            }
            Formula::Forall { var, ty, body } => Formula::not(Formula::exists(
                var.clone(),
                ty.clone(),
                Formula::not(body.desugar()),
            )),
            Formula::Pfp {
                var,
                ty,
                body,
                args,
            } => Formula::pfp(var.clone(), ty.clone(), body.desugar(), args.clone()),
        }
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        match self {
            Formula::True
            | Formula::False
            | Formula::Prop { .. }
            | Formula::Act { .. }
            | Formula::Apply { .. } => 1,
            Formula::Not(f) => 1 + f.size(),
            Formula::Or(f, g) | Formula::And(f, g) | Formula::Implies(f, g) => {
                1 + f.size() + g.size()
            }
            Formula::Exists { body, .. }
            | Formula::Forall { body, .. }
            | Formula::Pfp { body, .. } => 1 + body.size(),
        }
    }

    /// Number of binders (quantifiers and fixpoint binders).
    pub fn binder_count(&self) -> usize {
        match self {
            Formula::True
            | Formula::False
            | Formula::Prop { .. }
            | Formula::Act { .. }
            | Formula::Apply { .. } => 0,
            Formula::Not(f) => f.binder_count(),
            Formula::Or(f, g) | Formula::And(f, g) | Formula::Implies(f, g) => {
                f.binder_count() + g.binder_count()
            }
            Formula::Exists { body, .. } | Formula::Forall { body, .. } => 1 + body.binder_count(),
            Formula::Pfp { body, .. } => 1 + body.binder_count(),
        }
    }
}

/// Free variables. `X` is bound in `(PFP X. body)(Ys)`; the `Ys` occur free.
pub fn free_vars(f: &Formula) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    collect_free(f, &mut Vec::new(), &mut out);
    out
}

fn collect_free<'a>(f: &'a Formula, bound: &mut Vec<&'a str>, out: &mut BTreeSet<Var>) {
    let mut note = |v: &'a String, bound: &Vec<&'a str>| {
        if !bound.contains(&v.as_str()) {
            out.insert(v.clone());
        }
    };
    match f {
        Formula::True | Formula::False => {}
        Formula::Prop { var, .. } => note(var, bound),
        Formula::Act { from, to, .. } => {
            note(from, bound);
            note(to, bound);
        }
        Formula::Apply { set, args } => {
            note(set, bound);
            for a in args {
                note(a, bound);
            }
        }
        Formula::Not(g) => collect_free(g, bound, out),
        Formula::Or(g, h) | Formula::And(g, h) | Formula::Implies(g, h) => {
            collect_free(g, bound, out);
            collect_free(h, bound, out);
        }
        Formula::Exists { var, body, .. } | Formula::Forall { var, body, .. } => {
            bound.push(var);
            collect_free(body, bound, out);
            bound.pop();
        }
        Formula::Pfp {
            var, body, args, ..
        } => {
            for a in args {
                note(a, bound);
            }
            bound.push(var);
            collect_free(body, bound, out);
            bound.pop();
        }
    }
}

/// Types of free variables.
pub type TypingContext = BTreeMap<Var, Type>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("in `{subterm}`: variable `{var}` has type {actual}, expected {expected}")]
    Mismatch {
        subterm: String,
        var: Var,
        expected: String,
        actual: Type,
    },
    #[error("in `{subterm}`: variable `{var}` is not in scope")]
    Unbound { subterm: String, var: Var },
    #[error("in `{subterm}`: `{var}` has type {actual}, which is not a set type")]
    NotASet {
        subterm: String,
        var: Var,
        actual: Type,
    },
    #[error("in `{subterm}`: relation `{var}` takes {expected} arguments, got {actual}")]
    Arity {
        subterm: String,
        var: Var,
        expected: usize,
        actual: usize,
    },
    #[error("malformed type {0}: compound types need at least one component")]
    BadType(Type),
    #[error("conflicting types inferred for `{var}`: {first} and {second}")]
    Conflict { var: Var, first: Type, second: Type },
    #[error("cannot infer a type for free variable `{0}`; declare it")]
    Undetermined(Var),
}

/// A formula that passed [`check_well_formed`], together with the types of its free variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedFormula {
    pub formula: Formula,
    pub free: TypingContext,
}

impl TypedFormula {
    pub fn order(&self) -> usize {
        formula_order(&self.formula, &self.free)
    }
}

/// Checks the well-formedness rules: arguments of `p(X)` and `a(X, Y)` are
/// individuals, and in `X(Y1..Yn)` and `(PFP X. _)(Y1..Yn)` the relation has
/// type `((t1, ..., tn))` where `Yi : ti`.
pub fn check_well_formed(f: &Formula, ctx: &TypingContext) -> Result<TypedFormula, TypeError> {
    let mut scope: Vec<(&str, &Type)> = Vec::new();
    let mut free = TypingContext::new();
    check(f, ctx, &mut scope, &mut free)?;
    Ok(TypedFormula {
        formula: f.clone(),
        free,
    })
}

fn lookup<'a>(
    var: &str,
    ctx: &'a TypingContext,
    scope: &[(&str, &'a Type)],
    free: &mut TypingContext,
    subterm: &Formula,
) -> Result<&'a Type, TypeError> {
    if let Some((_, t)) = scope.iter().rev().find(|(v, _)| *v == var) {
        return Ok(t);
    }
    match ctx.get(var) {
        Some(t) => {
            free.insert(var.to_string(), t.clone());
            Ok(t)
        }
        None => Err(TypeError::Unbound {
            subterm: short(subterm),
            var: var.to_string(),
        }),
    }
}

fn short(f: &Formula) -> String {
    let text = crate::frontend::print_formula(f);
    if text.len() > 120 {
        format!(
            "{}...",
            &text[..text.char_indices().nth(117).map_or(text.len(), |(i, _)| i)]
        )
    } else {
        text
    }
}

fn check<'a>(
    f: &'a Formula,
    ctx: &'a TypingContext,
    scope: &mut Vec<(&'a str, &'a Type)>,
    free: &mut TypingContext,
) -> Result<(), TypeError> {
    match f {
        Formula::True | Formula::False => Ok(()),
        Formula::Prop { var, .. } => expect_ground(var, ctx, scope, free, f),
        Formula::Act { from, to, .. } => {
            expect_ground(from, ctx, scope, free, f)?;
            expect_ground(to, ctx, scope, free, f)
        }
        Formula::Apply { set, args } => {
            let head = lookup(set, ctx, scope, free, f)?;
            check_relation(set, head, args, ctx, scope, free, f)
        }
        Formula::Not(g) => check(g, ctx, scope, free),
        Formula::Or(g, h) | Formula::And(g, h) | Formula::Implies(g, h) => {
            check(g, ctx, scope, free)?;
            check(h, ctx, scope, free)
        }
        Formula::Exists { var, ty, body } | Formula::Forall { var, ty, body } => {
            if !ty.is_valid() {
                return Err(TypeError::BadType(ty.clone()));
            }
            scope.push((var, ty));
            let r = check(body, ctx, scope, free);
            scope.pop();
            r
        }
        Formula::Pfp {
            var,
            ty,
            body,
            args,
        } => {
            if !ty.is_valid() {
                return Err(TypeError::BadType(ty.clone()));
            }
            // Outer occurrences of the arguments are looked up in the enclosing scope.
            check_relation(var, ty, args, ctx, scope, free, f)?;
            let depth = scope.len();
            scope.push((var, ty));
            // Inside the body the arguments are rebound per tuple.
            for (i, a) in args.iter().enumerate() {
                scope.push((a, component_type(ty, args.len(), i)));
            }
            let r = check(body, ctx, scope, free);
            scope.truncate(depth);
            r
        }
    }
}

/// The i-th component type of a relation type of the given arity.
fn component_type(ty: &Type, arity: usize, i: usize) -> &Type {
    match ty {
        Type::SetOf(inner) => match inner.as_ref() {
            Type::Compound(items) if items.len() == arity => &items[i],
            other => other,
        },
        _ => unreachable!("relation type checked before"),
    }
}

fn expect_ground<'a>(
    var: &str,
    ctx: &'a TypingContext,
    scope: &[(&str, &'a Type)],
    free: &mut TypingContext,
    f: &Formula,
) -> Result<(), TypeError> {
    let t = lookup(var, ctx, scope, free, f)?;
    if *t == Type::Ground {
        Ok(())
    } else {
        Err(TypeError::Mismatch {
            subterm: short(f),
            var: var.to_string(),
            expected: Type::Ground.to_string(),
            actual: t.clone(),
        })
    }
}

fn check_relation<'a>(
    head: &str,
    head_ty: &Type,
    args: &[Var],
    ctx: &'a TypingContext,
    scope: &[(&str, &'a Type)],
    free: &mut TypingContext,
    f: &Formula,
) -> Result<(), TypeError> {
    let Some(signature) = head_ty.relation_signature() else {
        return Err(TypeError::NotASet {
            subterm: short(f),
            var: head.to_string(),
            actual: head_ty.clone(),
        });
    };
    if signature.len() != args.len() {
        return Err(TypeError::Arity {
            subterm: short(f),
            var: head.to_string(),
            expected: signature.len(),
            actual: args.len(),
        });
    }
    for (a, expected) in args.iter().zip(&signature) {
        let actual = lookup(a, ctx, scope, free, f)?;
        if actual != expected {
            return Err(TypeError::Mismatch {
                subterm: short(f),
                var: a.clone(),
                expected: expected.to_string(),
                actual: actual.clone(),
            });
        }
    }
    Ok(())
}

/// The least `k` such that every free or quantifier-bound variable has order
/// at most `k` and every fixpoint-bound variable has order at most `k + 1`.
pub fn formula_order(f: &Formula, ctx: &TypingContext) -> usize {
    let mut k = 1;
    for v in free_vars(f) {
        if let Some(t) = ctx.get(&v) {
            k = k.max(t.order());
        }
    }
    bound_order(f, &mut k);
    k
}

fn bound_order(f: &Formula, k: &mut usize) {
    match f {
        Formula::True
        | Formula::False
        | Formula::Prop { .. }
        | Formula::Act { .. }
        | Formula::Apply { .. } => {}
        Formula::Not(g) => bound_order(g, k),
        Formula::Or(g, h) | Formula::And(g, h) | Formula::Implies(g, h) => {
            bound_order(g, k);
            bound_order(h, k);
        }
        Formula::Exists { ty, body, .. } | Formula::Forall { ty, body, .. } => {
            *k = (*k).max(ty.order());
            bound_order(body, k);
        }
        Formula::Pfp { ty, body, .. } => {
            *k = (*k).max(ty.order().saturating_sub(1));
            bound_order(body, k);
        }
    }
}

/// Infers types for free variables from their uses. Entries of `declared` win;
/// individuals are inferred from `p(X)`/`a(X, Y)` and relation types from
/// applications whose arguments have known types (and vice versa).
pub fn infer_free_types(f: &Formula, declared: &TypingContext) -> Result<TypingContext, TypeError> {
    let free = free_vars(f);
    let mut known: TypingContext = declared
        .iter()
        .filter(|(v, _)| free.contains(*v))
        .map(|(v, t)| (v.clone(), t.clone()))
        .collect();
    loop {
        let before = known.len();
        infer_pass(f, &free, &mut Vec::new(), &mut known)?;
        if known.len() == before {
            break;
        }
    }
    if let Some(v) = free.iter().find(|v| !known.contains_key(*v)) {
        return Err(TypeError::Undetermined(v.clone()));
    }
    Ok(known)
}

fn infer_pass<'a>(
    f: &'a Formula,
    free: &BTreeSet<Var>,
    scope: &mut Vec<(&'a str, Type)>,
    known: &mut TypingContext,
) -> Result<(), TypeError> {
    fn resolve(v: &str, scope: &[(&str, Type)], known: &TypingContext) -> Option<Type> {
        if let Some((_, t)) = scope.iter().rev().find(|(n, _)| *n == v) {
            return Some(t.clone());
        }
        known.get(v).cloned()
    }
    fn learn(
        v: &str,
        t: Type,
        scope: &[(&str, Type)],
        free: &BTreeSet<Var>,
        known: &mut TypingContext,
    ) -> Result<(), TypeError> {
        if scope.iter().any(|(n, _)| *n == v) || !free.contains(v) {
            return Ok(());
        }
        match known.get(v) {
            Some(existing) if *existing != t => Err(TypeError::Conflict {
                var: v.to_string(),
                first: existing.clone(),
                second: t,
            }),
            Some(_) => Ok(()),
            None => {
                known.insert(v.to_string(), t);
                Ok(())
            }
        }
    }
    fn relation(
        head: &str,
        head_ty: Option<Type>,
        args: &[Var],
        scope: &[(&str, Type)],
        free: &BTreeSet<Var>,
        known: &mut TypingContext,
    ) -> Result<(), TypeError> {
        match head_ty.and_then(|t| t.relation_signature()) {
            Some(sig) if sig.len() == args.len() => {
                for (a, t) in args.iter().zip(sig) {
                    learn(a, t, scope, free, known)?;
                }
                Ok(())
            }
            Some(_) => Ok(()),
            None => {
                let arg_types: Option<Vec<Type>> =
                    args.iter().map(|a| resolve(a, scope, known)).collect();
                if let Some(ts) = arg_types {
                    learn(head, Type::set_of(Type::Compound(ts)), scope, free, known)?;
                }
                Ok(())
            }
        }
    }
    match f {
        Formula::True | Formula::False => Ok(()),
        Formula::Prop { var, .. } => learn(var, Type::Ground, scope, free, known),
        Formula::Act { from, to, .. } => {
            learn(from, Type::Ground, scope, free, known)?;
            learn(to, Type::Ground, scope, free, known)
        }
        Formula::Apply { set, args } => {
            let head = resolve(set, scope, known);
            relation(set, head, args, scope, free, known)
        }
        Formula::Not(g) => infer_pass(g, free, scope, known),
        Formula::Or(g, h) | Formula::And(g, h) | Formula::Implies(g, h) => {
            infer_pass(g, free, scope, known)?;
            infer_pass(h, free, scope, known)
        }
        Formula::Exists { var, ty, body } | Formula::Forall { var, ty, body } => {
            scope.push((var, ty.clone()));
            let r = infer_pass(body, free, scope, known);
            scope.pop();
            r
        }
        Formula::Pfp {
            var,
            ty,
            body,
            args,
        } => {
            relation(var, Some(ty.clone()), args, scope, free, known)?;
            let depth = scope.len();
            scope.push((var, ty.clone()));
            if let Some(sig) = ty.relation_signature() {
                for (a, t) in args.iter().zip(sig) {
                    scope.push((a, t));
                }
            }
            let r = infer_pass(body, free, scope, known);
            scope.truncate(depth);
            r
        }
    }
}
