//! Model checking `T, η ⊨ φ`.
//!
//! Formulas are desugared and compiled into a slot-addressed plan first.
//! Runtime values are canonical indices: an individual is its state index, a
//! tuple its mixed-radix index, and a set the bit vector of its members'
//! indices. Quantifiers count through a domain in canonical order, which is
//! exactly successor-based enumeration in index space.
//!
//! Partial fixpoints iterate `F^0 = ∅, F^{i+1} = f(F^i)` with stages stored as
//! dense bitsets over the tuple space. A stage equal to its predecessor is the
//! fixpoint; a stage equal to an earlier, non-adjacent one means the sequence
//! cycles and the partial fixpoint is empty.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::domains::{
    canonical_index, domain_size, index_to_value, Domain, DomainError, Value,
    DEFAULT_ENUMERATION_BUDGET,
};
use crate::logic::{free_vars, Formula, Type, TypedFormula, Var};
use crate::lts::Lts;

/// Variable assignment `η`.
pub type Environment = BTreeMap<Var, Value>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("{0}")]
    Conformance(String),
    #[error("free variable `{0}` has no value in the environment")]
    Unbound(Var),
    #[error("expected a fixpoint formula at the root")]
    NotAFixpoint,
}

impl From<DomainError> for EvalError {
    fn from(e: DomainError) -> Self {
        match e {
            DomainError::Resource(m) => EvalError::Resource(m),
            other => EvalError::Conformance(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOptions {
    /// Largest domain a quantifier may enumerate and largest fixpoint tuple space.
    pub budget: u64,
    /// Cap on stages computed by one fixpoint iteration.
    pub max_pfp_iterations: u64,
    /// Keep every stage in [`PfpTrace::stages`] instead of fingerprints only.
    pub record_stages: bool,
    /// Compute the stages of outermost fixpoints on the rayon pool. Results are
    /// identical to sequential mode; statistics are aggregated per worker.
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            budget: DEFAULT_ENUMERATION_BUDGET,
            max_pfp_iterations: 1 << 24,
            record_stages: false,
            parallel: false,
        }
    }
}

/// Counters collected during one evaluation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EvalStats {
    pub subformula_evaluations: u64,
    pub pfp_iterations: u64,
    /// Maximum over time of bound variables plus members of live stage sets.
    pub peak_live_values: u64,
    pub largest_enumerated_domain: u64,
    pub pfp_cache_hits: u64,
}

impl EvalStats {
    fn absorb(&mut self, other: &EvalStats) {
        self.subformula_evaluations += other.subformula_evaluations;
        self.pfp_iterations += other.pfp_iterations;
        self.peak_live_values = self.peak_live_values.max(other.peak_live_values);
        self.largest_enumerated_domain = self
            .largest_enumerated_domain
            .max(other.largest_enumerated_domain);
        self.pfp_cache_hits += other.pfp_cache_hits;
    }
}

/// A fixpoint stage: a set of tuple indices over a tuple space of fixed size.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StageSet {
    words: Vec<u64>,
    len: u64,
}

impl StageSet {
    pub fn empty(len: u64) -> StageSet {
        StageSet {
            words: vec![0; len.div_ceil(64) as usize],
            len,
        }
    }

    pub fn from_indices(len: u64, indices: impl IntoIterator<Item = u64>) -> StageSet {
        let mut s = StageSet::empty(len);
        for i in indices {
            s.insert(i);
        }
        s
    }

    /// Size of the tuple space.
    pub fn universe(&self) -> u64 {
        self.len
    }

    #[inline]
    pub fn contains(&self, i: u64) -> bool {
        i < self.len && self.words[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, i: u64) {
        assert!(
            i < self.len,
            "tuple index {i} outside a space of {}",
            self.len
        );
        self.words[(i / 64) as usize] |= 1 << (i % 64);
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as u64;
                w &= w - 1;
                Some(k as u64 * 64 + bit)
            })
        })
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }

    fn union_with(&mut self, other: &StageSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    /// The set as a [`Value`] of type `SetOf(element)`.
    pub fn to_value(&self, element: &Type, n: usize) -> Result<Value, EvalError> {
        let d = Domain::new(element.clone(), n);
        let members = self
            .iter()
            .map(|i| index_to_value(&i.into(), &d))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Value::Set(members))
    }

    /// Builds a stage from a set value of type `SetOf(element)`.
    pub fn from_value(v: &Value, element: &Type, n: usize) -> Result<StageSet, EvalError> {
        let d = Domain::new(element.clone(), n);
        let len = d.cardinality_u64()?;
        let Value::Set(members) = v else {
            return Err(EvalError::Conformance(format!("{v} is not a set")));
        };
        let mut s = StageSet::empty(len);
        for m in members {
            let i = canonical_index(m, &d)?;
            s.insert(i.to_u64().expect("below len"));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfpOutcome {
    /// `F^i = F^{i+1}`.
    StabilizedAt(usize),
    /// `F^repeat = F^first` with `repeat > first + 1`; the partial fixpoint is empty.
    NoFixpoint { first: usize, repeat: usize },
}

/// The stage sequence of one fixpoint iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PfpTrace {
    /// Fingerprint of every computed stage, starting with `F^0 = ∅`.
    pub fingerprints: Vec<u64>,
    /// All stages, when recording was requested.
    pub stages: Option<Vec<StageSet>>,
    pub outcome: PfpOutcome,
    /// The partial fixpoint: the stable stage, or empty.
    pub fixpoint: StageSet,
    /// Element type of the stage sets.
    pub tuple_type: Type,
}

/// Runtime value: a canonical index, or a bitset for sets too large for `u64` indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Rt {
    Idx(u64),
    Bits(Arc<StageSet>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Repr {
    Idx,
    Bits,
}

#[derive(Debug)]
enum Node {
    Const(bool),
    Prop {
        prop: usize,
        slot: usize,
    },
    Act {
        action: usize,
        from: usize,
        to: usize,
    },
    Apply {
        set: usize,
        args: Box<[(usize, u64)]>,
    },
    Not(Box<Node>),
    Or(Box<Node>, Box<Node>),
    Exists {
        slot: usize,
        card: u64,
        body: Box<Node>,
    },
    Pfp(Box<PfpPlan>),
    /// A traversal that exceeds the budget; fails only if evaluation reaches it.
    OverBudget(String),
}

#[derive(Debug)]
struct PfpPlan {
    id: usize,
    x: usize,
    x_repr: Repr,
    /// Inner slots of the rebound arguments with their domain sizes.
    params: Vec<(usize, u64)>,
    /// Slots of the arguments in the enclosing scope.
    outer_args: Vec<usize>,
    tuple_space: u64,
    /// Enclosing slots the body reads; the stage sequence depends only on these.
    context: Vec<usize>,
    tuple_type: Type,
    body: Node,
}

struct Plan {
    root: Node,
    slots: usize,
    pfp_count: usize,
    free: Vec<(usize, Var, Type, Repr)>,
}

struct Compiler<'a> {
    lts: &'a Lts,
    budget: u64,
    slots: usize,
    pfp_count: usize,
    scope: Vec<(Var, usize, Type)>,
}

fn card_u64(t: &Type, n: usize) -> Option<u64> {
    domain_size(t, n).ok().and_then(|c| c.to_u64())
}

fn repr_of(t: &Type, n: usize) -> Repr {
    match t {
        Type::SetOf(_) if card_u64(t, n).is_none() => Repr::Bits,
        _ => Repr::Idx,
    }
}

impl Compiler<'_> {
    fn n(&self) -> usize {
        self.lts.len()
    }

    fn new_slot(&mut self) -> usize {
        self.slots += 1;
        self.slots - 1
    }

    fn resolve(&self, v: &str) -> (usize, &Type) {
        let (_, slot, ty) = self
            .scope
            .iter()
            .rev()
            .find(|(name, _, _)| name == v)
            .unwrap_or_else(|| panic!("variable `{v}` unresolved in a checked formula"));
        (*slot, ty)
    }

    fn compile(&mut self, f: &Formula) -> Node {
        match f {
            Formula::True => Node::Const(true),
            Formula::Prop { prop, var } => match self.lts.prop_index(prop) {
                Some(p) => Node::Prop {
                    prop: p,
                    slot: self.resolve(var).0,
                },
                None => Node::Const(false),
            },
            Formula::Act { action, from, to } => match self.lts.action_index(action) {
                Some(a) => Node::Act {
                    action: a,
                    from: self.resolve(from).0,
                    to: self.resolve(to).0,
                },
                None => Node::Const(false),
            },
            Formula::Apply { set, args } => {
                let (slot, ty) = self.resolve(set);
                let ty = ty.clone();
                self.apply(slot, &ty, args)
            }
            Formula::Not(g) => Node::Not(Box::new(self.compile(g))),
            Formula::Or(g, h) => Node::Or(Box::new(self.compile(g)), Box::new(self.compile(h))),
            Formula::Exists { var, ty, body } => match card_u64(ty, self.n()) {
                Some(card) if card <= self.budget => {
                    let slot = self.new_slot();
                    self.scope.push((var.clone(), slot, ty.clone()));
                    let body = self.compile(body);
                    self.scope.pop();
                    Node::Exists {
                        slot,
                        card,
                        body: Box::new(body),
                    }
                }
                _ => Node::OverBudget(format!(
                    "quantifying over {ty} with {} states exceeds the budget of {}",
                    self.n(),
                    self.budget
                )),
            },
            Formula::Pfp {
                var,
                ty,
                body,
                args,
            } => self.pfp(var, ty, body, args),
            Formula::False | Formula::And(..) | Formula::Implies(..) | Formula::Forall { .. } => {
                unreachable!("plans are compiled from desugared formulas")
            }
        }
    }

    fn apply(&mut self, set: usize, set_ty: &Type, args: &[Var]) -> Node {
        let n = self.n();
        let element = match set_ty {
            Type::SetOf(e) => e.as_ref().clone(),
            _ => unreachable!("checked formula"),
        };
        match card_u64(&element, n) {
            Some(c) if c <= self.budget || repr_of(set_ty, n) == Repr::Idx => {}
            _ => {
                return Node::OverBudget(format!(
                    "membership in a set over {element} with {n} states exceeds the budget"
                ))
            }
        }
        let signature = set_ty.relation_signature().expect("set type");
        let args = args
            .iter()
            .zip(&signature)
            .map(|(a, t)| {
                let card = card_u64(t, n).expect("component of a bounded tuple space");
                (self.resolve(a).0, card)
            })
            .collect();
        Node::Apply { set, args }
    }

    fn pfp(&mut self, var: &Var, ty: &Type, body: &Formula, args: &[Var]) -> Node {
        let n = self.n();
        let signature = ty.relation_signature().expect("checked formula");
        let tuple_type = match ty {
            Type::SetOf(e) => e.as_ref().clone(),
            _ => unreachable!(),
        };
        let tuple_space = match card_u64(&tuple_type, n) {
            Some(c) if c <= self.budget => c,
            _ => {
                return Node::OverBudget(format!(
                    "fixpoint over {ty} with {n} states exceeds the budget of {}",
                    self.budget
                ))
            }
        };
        let outer_args: Vec<usize> = args.iter().map(|a| self.resolve(a).0).collect();
        let mut inner_names: Vec<&str> = args.iter().map(String::as_str).collect();
        inner_names.push(var);
        let context = free_vars(body)
            .iter()
            .filter(|v| !inner_names.contains(&v.as_str()))
            .map(|v| self.resolve(v).0)
            .collect();
        let id = self.pfp_count;
        self.pfp_count += 1;
        let depth = self.scope.len();
        let x = self.new_slot();
        self.scope.push((var.clone(), x, ty.clone()));
        let mut params = Vec::with_capacity(args.len());
        for (a, t) in args.iter().zip(&signature) {
            let slot = self.new_slot();
            params.push((slot, card_u64(t, n).expect("bounded tuple space")));
            self.scope.push((a.clone(), slot, t.clone()));
        }
        let body = self.compile(body);
        self.scope.truncate(depth);
        Node::Pfp(Box::new(PfpPlan {
            id,
            x,
            x_repr: repr_of(ty, n),
            params,
            outer_args,
            tuple_space,
            context,
            tuple_type,
            body,
        }))
    }
}

fn compile(lts: &Lts, f: &TypedFormula, budget: u64) -> Plan {
    let core = f.formula.desugar();
    let mut c = Compiler {
        lts,
        budget,
        slots: 0,
        pfp_count: 0,
        scope: Vec::new(),
    };
    let mut free = Vec::new();
    for (v, t) in &f.free {
        let slot = c.new_slot();
        c.scope.push((v.clone(), slot, t.clone()));
        free.push((slot, v.clone(), t.clone(), repr_of(t, lts.len())));
    }
    let root = c.compile(&core);
    Plan {
        root,
        slots: c.slots,
        pfp_count: c.pfp_count,
        free,
    }
}

fn to_runtime(v: &Value, t: &Type, repr: Repr, n: usize) -> Result<Rt, EvalError> {
    let d = Domain::new(t.clone(), n);
    match repr {
        Repr::Idx => {
            let i = canonical_index(v, &d)?;
            Ok(Rt::Idx(i.to_u64().expect("index below a u64 cardinality")))
        }
        Repr::Bits => {
            let Type::SetOf(element) = t else {
                unreachable!("bitsets represent sets")
            };
            if !v.conforms(t, n) {
                return Err(DomainError::Conformance {
                    value: v.to_string(),
                    ty: t.clone(),
                    n,
                }
                .into());
            }
            Ok(Rt::Bits(Arc::new(StageSet::from_value(v, element, n)?)))
        }
    }
}

fn stage_to_runtime(stage: &Arc<StageSet>, repr: Repr) -> Rt {
    match repr {
        Repr::Idx => Rt::Idx(stage.words.first().copied().unwrap_or(0)),
        Repr::Bits => Rt::Bits(Arc::clone(stage)),
    }
}

/// Per-evaluation mutable state.
#[derive(Clone)]
struct Machine<'a> {
    lts: &'a Lts,
    opts: &'a EvalOptions,
    env: Vec<Rt>,
    stats: EvalStats,
    live: u64,
    /// Last computed fixpoint per node, keyed by the context it was computed in.
    cache: Vec<Option<(Vec<Rt>, Arc<StageSet>)>>,
    pfp_depth: usize,
}

impl<'a> Machine<'a> {
    fn new(lts: &'a Lts, opts: &'a EvalOptions, plan: &Plan) -> Machine<'a> {
        Machine {
            lts,
            opts,
            env: vec![Rt::Idx(0); plan.slots],
            stats: EvalStats::default(),
            live: 0,
            cache: vec![None; plan.pfp_count],
            pfp_depth: 0,
        }
    }

    #[inline]
    fn grow(&mut self, by: u64) {
        self.live += by;
        if self.live > self.stats.peak_live_values {
            self.stats.peak_live_values = self.live;
        }
    }

    #[inline]
    fn idx(&self, slot: usize) -> u64 {
        match &self.env[slot] {
            Rt::Idx(i) => *i,
            Rt::Bits(_) => unreachable!("individuals and tuple components are indices"),
        }
    }

    fn eval(&mut self, node: &Node) -> Result<bool, EvalError> {
        self.stats.subformula_evaluations += 1;
        match node {
            Node::Const(b) => Ok(*b),
            Node::Prop { prop, slot } => Ok(self.lts.has_label(*prop, self.idx(*slot) as usize)),
            Node::Act { action, from, to } => {
                Ok(self
                    .lts
                    .has_edge(*action, self.idx(*from) as usize, self.idx(*to) as usize))
            }
            Node::Apply { set, args } => {
                let mut t = 0u64;
                for &(slot, radix) in args.iter() {
                    t = t * radix + self.idx(slot);
                }
                Ok(match &self.env[*set] {
                    Rt::Idx(bits) => t < 64 && bits >> t & 1 == 1,
                    Rt::Bits(s) => s.contains(t),
                })
            }
            Node::Not(g) => Ok(!self.eval(g)?),
            Node::Or(g, h) => Ok(self.eval(g)? || self.eval(h)?),
            Node::Exists { slot, card, body } => {
                self.stats.largest_enumerated_domain =
                    self.stats.largest_enumerated_domain.max(*card);
                self.grow(1);
                let mut found = false;
                for i in 0..*card {
                    self.env[*slot] = Rt::Idx(i);
                    if self.eval(body)? {
                        found = true;
                        break;
                    }
                }
                self.live -= 1;
                Ok(found)
            }
            Node::Pfp(p) => self.eval_pfp(p),
            Node::OverBudget(msg) => Err(EvalError::Resource(msg.clone())),
        }
    }

    fn eval_pfp(&mut self, p: &PfpPlan) -> Result<bool, EvalError> {
        let mut t = 0u64;
        for (&slot, &(_, radix)) in p.outer_args.iter().zip(&p.params) {
            t = t * radix + self.idx(slot);
        }
        let key: Vec<Rt> = p.context.iter().map(|&s| self.env[s].clone()).collect();
        if let Some((k, fix)) = &self.cache[p.id] {
            if *k == key {
                self.stats.pfp_cache_hits += 1;
                return Ok(fix.contains(t));
            }
        }
        let trace = self.iterate(p, false)?;
        let fix = Arc::new(trace.fixpoint);
        let held = fix.count();
        if let Some((_, old)) = self.cache[p.id].replace((key, Arc::clone(&fix))) {
            self.live -= old.count();
        }
        self.grow(held);
        Ok(fix.contains(t))
    }

    /// Computes `f(current)` for the stage function of `p` in the current environment.
    fn step(&mut self, p: &PfpPlan, current: &Arc<StageSet>) -> Result<StageSet, EvalError> {
        if self.opts.parallel && self.pfp_depth == 0 && p.tuple_space > 1 {
            return self.step_parallel(p, current);
        }
        self.step_range(p, current, 0..p.tuple_space)
    }

    fn step_range(
        &mut self,
        p: &PfpPlan,
        current: &Arc<StageSet>,
        range: std::ops::Range<u64>,
    ) -> Result<StageSet, EvalError> {
        self.pfp_depth += 1;
        self.env[p.x] = stage_to_runtime(current, p.x_repr);
        let bound = 1 + p.params.len() as u64;
        self.grow(bound);
        let mut next = StageSet::empty(p.tuple_space);
        let mut result = Ok(());
        for t in range {
            let mut rest = t;
            for &(slot, radix) in p.params.iter().rev() {
                self.env[slot] = Rt::Idx(rest % radix);
                rest /= radix;
            }
            match self.eval(&p.body) {
                Ok(true) => next.insert(t),
                Ok(false) => {}
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        self.live -= bound;
        self.pfp_depth -= 1;
        result.map(|()| next)
    }

    fn step_parallel(
        &mut self,
        p: &PfpPlan,
        current: &Arc<StageSet>,
    ) -> Result<StageSet, EvalError> {
        let workers = rayon::current_num_threads().max(1) as u64;
        let chunk = p.tuple_space.div_ceil(workers * 4).max(1);
        let ranges: Vec<_> = (0..p.tuple_space)
            .step_by(chunk as usize)
            .map(|start| start..(start + chunk).min(p.tuple_space))
            .collect();
        let template = self.clone();
        let parts: Vec<Result<(StageSet, EvalStats), EvalError>> = ranges
            .into_par_iter()
            .map(|range| {
                let mut m = template.clone();
                m.stats = EvalStats::default();
                m.stats.peak_live_values = m.live;
                let s = m.step_range(p, current, range)?;
                Ok((s, m.stats))
            })
            .collect();
        let mut next = StageSet::empty(p.tuple_space);
        for part in parts {
            let (s, stats) = part?;
            next.union_with(&s);
            self.stats.absorb(&stats);
        }
        Ok(next)
    }

    fn iterate(&mut self, p: &PfpPlan, record: bool) -> Result<PfpTrace, EvalError> {
        let empty = Arc::new(StageSet::empty(p.tuple_space));
        let mut current = Arc::clone(&empty);
        let mut fingerprints = vec![current.fingerprint()];
        let mut seen: HashMap<u64, Vec<usize>> = HashMap::from([(fingerprints[0], vec![0])]);
        let mut stages = record.then(|| vec![(*current).clone()]);
        self.grow(0);
        let mut i = 0usize;
        loop {
            if self.stats.pfp_iterations >= self.opts.max_pfp_iterations {
                return Err(EvalError::Resource(format!(
                    "fixpoint iteration exceeded {} stages",
                    self.opts.max_pfp_iterations
                )));
            }
            self.stats.pfp_iterations += 1;
            let held = current.count();
            self.grow(held);
            let next = self.step(p, &current);
            self.live -= held;
            let next = next?;
            if next == *current {
                return Ok(PfpTrace {
                    fingerprints,
                    stages,
                    outcome: PfpOutcome::StabilizedAt(i),
                    fixpoint: next,
                    tuple_type: p.tuple_type.clone(),
                });
            }
            let fp = next.fingerprint();
            let mut repeat_of = None;
            if let Some(candidates) = seen.get(&fp) {
                for &j in candidates {
                    let earlier = match &stages {
                        Some(all) => all[j].clone(),
                        None => self.replay(p, j)?,
                    };
                    if earlier == next {
                        repeat_of = Some(j);
                        break;
                    }
                }
            }
            i += 1;
            fingerprints.push(fp);
            if let Some(all) = stages.as_mut() {
                all.push(next.clone());
            }
            if let Some(first) = repeat_of {
                return Ok(PfpTrace {
                    fingerprints,
                    stages,
                    outcome: PfpOutcome::NoFixpoint { first, repeat: i },
                    fixpoint: StageSet::empty(p.tuple_space),
                    tuple_type: p.tuple_type.clone(),
                });
            }
            seen.entry(fp).or_default().push(i);
            current = Arc::new(next);
        }
    }

    /// Recomputes stage `j` from `∅`; used to confirm fingerprint matches without storing stages.
    fn replay(&mut self, p: &PfpPlan, j: usize) -> Result<StageSet, EvalError> {
        let mut s = Arc::new(StageSet::empty(p.tuple_space));
        for _ in 0..j {
            s = Arc::new(self.step(p, &s)?);
        }
        Ok(Arc::try_unwrap(s).unwrap_or_else(|a| (*a).clone()))
    }
}

/// Evaluates formulas over one LTS.
pub struct Evaluator<'a> {
    lts: &'a Lts,
    opts: EvalOptions,
}

impl<'a> Evaluator<'a> {
    pub fn new(lts: &'a Lts) -> Evaluator<'a> {
        Evaluator {
            lts,
            opts: EvalOptions::default(),
        }
    }

    pub fn with_options(lts: &'a Lts, opts: EvalOptions) -> Evaluator<'a> {
        Evaluator { lts, opts }
    }

    pub fn options(&self) -> &EvalOptions {
        &self.opts
    }

    fn prepare(&self, f: &TypedFormula, env: &Environment) -> Result<(Plan, Vec<Rt>), EvalError> {
        let plan = compile(self.lts, f, self.opts.budget);
        let mut values = Vec::with_capacity(plan.free.len());
        for (_, v, t, repr) in &plan.free {
            let value = env.get(v).ok_or_else(|| EvalError::Unbound(v.clone()))?;
            values.push(to_runtime(value, t, *repr, self.lts.len())?);
        }
        Ok((plan, values))
    }

    fn machine(&self, plan: &Plan, values: Vec<Rt>) -> Machine<'_> {
        let mut m = Machine::new(self.lts, &self.opts, plan);
        for ((slot, ..), v) in plan.free.iter().zip(values) {
            m.env[*slot] = v;
        }
        m.grow(plan.free.len() as u64);
        m
    }

    /// Decides `T, η ⊨ φ`.
    pub fn eval(&self, f: &TypedFormula, env: &Environment) -> Result<bool, EvalError> {
        self.eval_with_stats(f, env).map(|(b, _)| b)
    }

    pub fn eval_with_stats(
        &self,
        f: &TypedFormula,
        env: &Environment,
    ) -> Result<(bool, EvalStats), EvalError> {
        let (plan, values) = self.prepare(f, env)?;
        let mut m = self.machine(&plan, values);
        let verdict = m.eval(&plan.root)?;
        Ok((verdict, m.stats))
    }

    /// Runs the stage sequence of a fixpoint formula `(PFP X. body)(Ys)`.
    /// The arguments' values are not needed; the body's other free variables are.
    pub fn pfp_iterate(
        &self,
        binder: &TypedFormula,
        env: &Environment,
    ) -> Result<(PfpTrace, EvalStats), EvalError> {
        let (plan, values) = self.prepare_pfp(binder, env)?;
        let p = root_pfp(&plan)?;
        let mut m = self.machine(&plan, values);
        let trace = m.iterate(p, self.opts.record_stages)?;
        Ok((trace, m.stats))
    }

    /// Applies the stage function of a fixpoint formula once.
    pub fn pfp_step(
        &self,
        binder: &TypedFormula,
        env: &Environment,
        stage: &StageSet,
    ) -> Result<StageSet, EvalError> {
        let (plan, values) = self.prepare_pfp(binder, env)?;
        let p = root_pfp(&plan)?;
        if stage.universe() != p.tuple_space {
            return Err(EvalError::Conformance(format!(
                "stage over {} tuples given for a tuple space of {}",
                stage.universe(),
                p.tuple_space
            )));
        }
        let mut m = self.machine(&plan, values);
        m.step(p, &Arc::new(stage.clone()))
    }

    fn prepare_pfp(
        &self,
        binder: &TypedFormula,
        env: &Environment,
    ) -> Result<(Plan, Vec<Rt>), EvalError> {
        let Formula::Pfp { args, .. } = &binder.formula else {
            return Err(EvalError::NotAFixpoint);
        };
        let mut env = env.clone();
        for (v, t) in &binder.free {
            if args.contains(v) && !env.contains_key(v) {
                env.insert(v.clone(), crate::domains::minimum(t));
            }
        }
        self.prepare(binder, &env)
    }
}

fn root_pfp(plan: &Plan) -> Result<&PfpPlan, EvalError> {
    match &plan.root {
        Node::Pfp(p) => Ok(p),
        Node::OverBudget(msg) => Err(EvalError::Resource(msg.clone())),
        _ => Err(EvalError::NotAFixpoint),
    }
}

/// `T, η ⊨ φ` with default options.
pub fn eval(lts: &Lts, env: &Environment, f: &TypedFormula) -> Result<bool, EvalError> {
    Evaluator::new(lts).eval(f, env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_formula;
    use crate::logic::{check_well_formed, TypingContext};

    fn typed(text: &str) -> TypedFormula {
        check_well_formed(&parse_formula(text).unwrap(), &TypingContext::new()).unwrap()
    }

    fn typed_in(text: &str, ctx: &[(&str, Type)]) -> TypedFormula {
        let ctx = ctx
            .iter()
            .map(|(v, t)| (v.to_string(), t.clone()))
            .collect();
        check_well_formed(&parse_formula(text).unwrap(), &ctx).unwrap()
    }

    fn path(n: usize) -> Lts {
        let mut t = Lts::ordered(n);
        t.add_action("e").unwrap();
        t.add_prop("init").unwrap();
        t.set_label(0, 0, true);
        for i in 0..n - 1 {
            t.set_edge(1, i, i + 1, true);
        }
        t
    }

    const FLIP: &str = "(pfp (X (set (tuple o))) (not (app X Y)) (Y))";

    #[test]
    fn basic_examples() {
        let mut t = Lts::new(["s0", "s1"]).unwrap();
        t.add_prop("p").unwrap();
        t.add_label("s1", "p").unwrap();
        let env = Environment::new();
        assert!(eval(&t, &env, &typed("tt")).unwrap());
        assert!(!eval(&t, &env, &typed("ff")).unwrap());
        assert!(eval(&t, &env, &typed("(exists ((X o)) (prop p X))")).unwrap());
        assert!(!eval(&t, &env, &typed("(forall ((X o)) (prop p X))")).unwrap());
        assert!(!eval(&t, &env, &typed("(exists ((X o)) (prop missing X))")).unwrap());
        let flip = format!("(exists ((Y o)) {FLIP})");
        assert!(!eval(&t, &env, &typed(&flip)).unwrap());
    }

    #[test]
    fn constant_body_stabilizes_at_one() {
        let t = Lts::ordered(2);
        let f = typed_in("(pfp (X (set (tuple o))) tt (Y))", &[("Y", Type::Ground)]);
        let (trace, _) = Evaluator::new(&t)
            .pfp_iterate(&f, &Environment::new())
            .unwrap();
        assert_eq!(trace.outcome, PfpOutcome::StabilizedAt(1));
        assert_eq!(trace.fixpoint.count(), 2);
        assert_eq!(trace.fingerprints.len(), 2);
    }

    #[test]
    fn flip_has_no_fixpoint() {
        let t = Lts::ordered(2);
        let f = typed_in(FLIP, &[("Y", Type::Ground)]);
        for record_stages in [false, true] {
            let opts = EvalOptions {
                record_stages,
                ..EvalOptions::default()
            };
            let (trace, _) = Evaluator::with_options(&t, opts)
                .pfp_iterate(&f, &Environment::new())
                .unwrap();
            assert_eq!(
                trace.outcome,
                PfpOutcome::NoFixpoint {
                    first: 0,
                    repeat: 2
                }
            );
            assert!(trace.fixpoint.is_empty());
            assert_eq!(trace.stages.is_some(), record_stages);
        }
    }

    #[test]
    fn reachability_on_a_path() {
        let t = path(4);
        let reach = "(pfp (R (set (tuple o))) (or (prop init Y) (exists ((Z o)) (and (app R Z) (act e Z Y)))) (Y))";
        let f = typed_in(reach, &[("Y", Type::Ground)]);
        let (trace, _) = Evaluator::new(&t)
            .pfp_iterate(&f, &Environment::new())
            .unwrap();
        assert_eq!(trace.outcome, PfpOutcome::StabilizedAt(4));
        assert_eq!(trace.fixpoint.iter().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        let env = Environment::from([("Y".to_string(), Value::State(3))]);
        assert!(Evaluator::new(&t).eval(&f, &env).unwrap());
    }

    #[test]
    fn membership_uses_outer_arguments() {
        // The stage is {s0}; the outer Y picks the member to test.
        let t = Lts::ordered(2);
        let f = typed_in(
            "(pfp (X (set (tuple o))) (not (exists ((Z o)) (act < Z Y))) (Y))",
            &[("Y", Type::Ground)],
        );
        let at = |i| Environment::from([("Y".to_string(), Value::State(i))]);
        assert!(eval(&t, &at(0), &f).unwrap());
        assert!(!eval(&t, &at(1), &f).unwrap());
    }

    #[test]
    fn step_applies_the_body_once() {
        let t = path(3);
        let reach = "(pfp (R (set (tuple o))) (or (prop init Y) (exists ((Z o)) (and (app R Z) (act e Z Y)))) (Y))";
        let f = typed_in(reach, &[("Y", Type::Ground)]);
        let ev = Evaluator::new(&t);
        let s1 = ev
            .pfp_step(&f, &Environment::new(), &StageSet::empty(3))
            .unwrap();
        assert_eq!(s1.iter().collect::<Vec<_>>(), vec![0]);
        let s2 = ev.pfp_step(&f, &Environment::new(), &s1).unwrap();
        assert_eq!(s2.iter().collect::<Vec<_>>(), vec![0, 1]);
        assert!(ev
            .pfp_step(&f, &Environment::new(), &StageSet::empty(4))
            .is_err());
    }

    #[test]
    fn free_set_variables_and_wide_sets() {
        let t = Lts::ordered(3);
        let ty = Type::set_of(Type::ground_tuple(3));
        let f = typed_in("(exists ((A o)) (app S A A A))", &[("S", ty.clone())]);
        let set = Value::set(vec![Value::Tuple(vec![Value::State(2); 3])]);
        let env = Environment::from([("S".to_string(), set)]);
        assert!(eval(&t, &env, &f).unwrap());
        // 2^64 elements do not fit an index; the set is held as a bitset.
        let t = Lts::ordered(4);
        let wide = Type::set_of(Type::ground_tuple(3));
        let f = typed_in("(exists ((A o)) (app S A A A))", &[("S", wide)]);
        let set = Value::set(vec![Value::Tuple(vec![Value::State(3); 3])]);
        let env = Environment::from([("S".to_string(), set)]);
        assert!(eval(&t, &env, &f).unwrap());
    }

    #[test]
    fn errors() {
        let t = Lts::ordered(2);
        let f = typed_in("(prop p Y)", &[("Y", Type::Ground)]);
        assert_eq!(
            eval(&t, &Environment::new(), &f),
            Err(EvalError::Unbound("Y".into()))
        );
        let env = Environment::from([("Y".to_string(), Value::State(5))]);
        assert!(matches!(eval(&t, &env, &f), Err(EvalError::Conformance(_))));
        let big = typed("(exists ((X (set (set (tuple o o o))))) tt)");
        assert!(matches!(
            eval(&t, &Environment::new(), &big),
            Err(EvalError::Resource(_))
        ));
        // Traversals that are never reached do not count against the budget.
        let guarded = typed("(or tt (exists ((X (set (set (tuple o o o))))) tt))");
        assert!(eval(&t, &Environment::new(), &guarded).unwrap());
        let opts = EvalOptions {
            max_pfp_iterations: 1,
            ..EvalOptions::default()
        };
        let reach = typed(
            "(exists ((Y o)) (pfp (X (set (tuple o))) (or (act < Y Y) (not (app X Y))) (Y)))",
        );
        assert!(matches!(
            Evaluator::with_options(&t, opts).eval(&reach, &Environment::new()),
            Err(EvalError::Resource(_))
        ));
    }

    #[test]
    fn parallel_matches_sequential() {
        let t = path(5);
        let reach = typed("(forall ((Y o)) (pfp (R (set (tuple o))) (or (prop init Y) (exists ((Z o)) (and (app R Z) (act e Z Y)))) (Y)))");
        let par = EvalOptions {
            parallel: true,
            ..EvalOptions::default()
        };
        let (a, _) = Evaluator::new(&t)
            .eval_with_stats(&reach, &Environment::new())
            .unwrap();
        let (b, _) = Evaluator::with_options(&t, par)
            .eval_with_stats(&reach, &Environment::new())
            .unwrap();
        assert!(a && b);
    }

    #[test]
    fn fixpoints_are_cached_per_context() {
        let t = path(4);
        let reach = typed("(forall ((Y o)) (pfp (R (set (tuple o))) (or (prop init Y) (exists ((Z o)) (and (app R Z) (act e Z Y)))) (Y)))");
        let (b, stats) = Evaluator::new(&t)
            .eval_with_stats(&reach, &Environment::new())
            .unwrap();
        assert!(b);
        assert_eq!(stats.pfp_iterations, 5);
        assert_eq!(stats.pfp_cache_hits, 3);
    }

    #[test]
    fn stage_set_conversions() {
        let ty = Type::ground_tuple(2);
        let s = StageSet::from_indices(9, [0, 5, 8]);
        let v = s.to_value(&ty, 3).unwrap();
        assert_eq!(StageSet::from_value(&v, &ty, 3).unwrap(), s);
        assert_eq!(s.count(), 3);
        assert!(s.contains(5) && !s.contains(4) && !s.contains(100));
    }
}
