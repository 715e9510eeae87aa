//! Encoding space-bounded machine runs as fixpoint formulas.
//!
//! A configuration `(q, h, t)` of a machine with at most `D = |sem τ_{k+1}|`
//! tape cells is encoded as a set of 4-tuples `(s_q, H_h, I_j, s_{t(j)})`,
//! one per cell `j < D`, where `H_h` and `I_j` are the elements of index `h`
//! and `j` of `τ_{k+1}` and `s_x` is the state coding a machine state or tape
//! symbol (the `i`-th state in the order `<` codes the `i`-th declared one).
//!
//! `φ_M` iterates a stage function from `∅`: the first stage is the initial
//! configuration, each later stage is the successor of the previous one, and
//! halting configurations are fixed. The machine accepts iff the partial
//! fixpoint contains a tuple whose state component codes `q_acc`.

use num_traits::ToPrimitive;
use serde::Serialize;
use thiserror::Error;

use crate::domains::{
    canonical_index, domain_size, index_to_value, Domain, DomainError, Value,
    DEFAULT_ENUMERATION_BUDGET,
};
use crate::eval::{EvalError, EvalOptions, EvalStats, Evaluator, PfpOutcome, StageSet};
use crate::formulas::{Builder, TowerSpec};
use crate::logic::{check_well_formed, Formula, Type, TypedFormula, TypingContext, Var};
use crate::lts::Lts;
use crate::machine::{encode_lts, run_trace, Configuration, MachineError, Move, TmSpec, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReductionError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

impl ReductionError {
    pub fn is_resource(&self) -> bool {
        matches!(
            self,
            ReductionError::Eval(EvalError::Resource(_))
                | ReductionError::Domain(DomainError::Resource(_))
        )
    }
}

/// Space bound `tower(n^c, k)`: the head and cell indices range over `τ_{k+1}`
/// built from `τ_1 = •^c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ReductionParams {
    pub k: usize,
    pub c: usize,
}

impl ReductionParams {
    pub fn new(k: usize, c: usize) -> ReductionParams {
        assert!(k >= 1 && c >= 1, "k and c are positive");
        ReductionParams { k, c }
    }

    /// The tower level of head and cell indices.
    pub fn index_spec(&self) -> TowerSpec {
        TowerSpec::new(self.c, self.k + 1)
    }

    /// `τ_{k+1}`.
    pub fn index_type(&self) -> Type {
        self.index_spec().element_type()
    }

    /// `τ = (•, τ_{k+1}, τ_{k+1}, •)`.
    pub fn tuple_type(&self) -> Type {
        let i = self.index_type();
        Type::Compound(vec![Type::Ground, i.clone(), i, Type::Ground])
    }
}

/// `(τ_{k+1}, τ, D)` over `n` states; fails if `D` exceeds `budget`.
pub fn type_tower(
    params: ReductionParams,
    n: usize,
    budget: u64,
) -> Result<(Type, Type, u64), ReductionError> {
    let index = params.index_type();
    let d = domain_size(&index, n)?;
    match d.to_u64() {
        Some(d) if d <= budget => Ok((index, params.tuple_type(), d)),
        _ => Err(DomainError::Resource(format!(
            "{} cells exceed the budget of {budget}",
            if d.bits() > 64 {
                format!("2^{}", d.bits() - 1)
            } else {
                d.to_string()
            }
        ))
        .into()),
    }
}

/// Size precondition `n ≥ max(|Q|, |Γ|, c)`.
pub fn check_size(m: &TmSpec, n: usize, params: ReductionParams) -> Result<(), ReductionError> {
    let (q, g) = (m.states().len(), m.tape_alphabet().len());
    if n < q.max(g).max(params.c) {
        return Err(ReductionError::Precondition(format!(
            "{n} states cannot code {q} machine states, {g} tape symbols and tuples of width {}",
            params.c
        )));
    }
    Ok(())
}

/// Maps machine states and symbols to LTS states and head/cell positions to
/// elements of `τ_{k+1}`, for an LTS whose order `<` ranks its states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodingContext {
    pub params: ReductionParams,
    pub n: usize,
    /// `D`, the number of encodable cells.
    pub d: u64,
    pub index_type: Type,
    pub tuple_type: Type,
    /// `rank_to_state[r]` is the state of rank `r` under `<`.
    rank_to_state: Vec<usize>,
    state_to_rank: Vec<usize>,
    states: usize,
    symbols: usize,
    blank: usize,
}

impl CodingContext {
    /// For an LTS with `n` states ordered by declaration.
    pub fn new(
        m: &TmSpec,
        n: usize,
        params: ReductionParams,
    ) -> Result<CodingContext, ReductionError> {
        CodingContext::with_ranks(m, params, (0..n).collect())
    }

    /// For an LTS whose `<` is a strict total order.
    pub fn for_lts(
        m: &TmSpec,
        lts: &Lts,
        params: ReductionParams,
    ) -> Result<CodingContext, ReductionError> {
        let ranks = lts.order_ranks().ok_or_else(|| {
            ReductionError::Precondition("`<` is not a strict total order on the LTS".into())
        })?;
        CodingContext::with_ranks(m, params, ranks)
    }

    fn with_ranks(
        m: &TmSpec,
        params: ReductionParams,
        state_to_rank: Vec<usize>,
    ) -> Result<CodingContext, ReductionError> {
        let n = state_to_rank.len();
        check_size(m, n, params)?;
        let (index_type, tuple_type, d) = type_tower(params, n, DEFAULT_ENUMERATION_BUDGET)?;
        let mut rank_to_state = vec![0; n];
        for (s, &r) in state_to_rank.iter().enumerate() {
            rank_to_state[r] = s;
        }
        Ok(CodingContext {
            params,
            n,
            d,
            index_type,
            tuple_type,
            rank_to_state,
            state_to_rank,
            states: m.states().len(),
            symbols: m.tape_alphabet().len(),
            blank: m.blank(),
        })
    }

    /// `SetOf(τ)`, the type of configuration encodings.
    pub fn encoding_type(&self) -> Type {
        Type::set_of(self.tuple_type.clone())
    }

    fn index_domain(&self) -> Domain {
        Domain::new(self.index_type.clone(), self.n)
    }

    /// The element of index `j` of `τ_{k+1}` (ranks taken as declaration order).
    fn position(&self, j: u64) -> Value {
        index_to_value(&j.into(), &self.index_domain()).expect("j < D")
    }

    /// The value of `cfg`'s encoding.
    pub fn encode(&self, cfg: &Configuration) -> Result<Value, ReductionError> {
        if cfg.head as u64 >= self.d {
            return Err(ReductionError::Range(format!(
                "head position {} is not below D = {}",
                cfg.head, self.d
            )));
        }
        if cfg.tape.len() as u64 > self.d {
            return Err(ReductionError::Range(format!(
                "tape contents reach cell {}, beyond D = {}",
                cfg.tape.len() - 1,
                self.d
            )));
        }
        if cfg.state >= self.states || cfg.tape.iter().any(|&g| g >= self.symbols) {
            return Err(ReductionError::Range(
                "configuration mentions an undeclared state or symbol".into(),
            ));
        }
        let head = self.position(cfg.head as u64);
        let tuples = (0..self.d)
            .map(|j| {
                Value::Tuple(vec![
                    Value::State(cfg.state),
                    head.clone(),
                    self.position(j),
                    Value::State(cfg.cell(j as usize, self.blank)),
                ])
            })
            .collect();
        Ok(Value::set(tuples).relabel(&self.rank_to_state))
    }

    /// Recovers the configuration an encoding stands for.
    pub fn decode(&self, v: &Value) -> Result<Configuration, NotAnEncoding> {
        let fail = |condition, detail: String| Err(NotAnEncoding { condition, detail });
        if !v.conforms(&self.encoding_type(), self.n) {
            return fail(0, "value does not conform to the encoding type".into());
        }
        let Value::Set(tuples) = v.relabel(&self.state_to_rank) else {
            unreachable!("conforms to a set type")
        };
        let parts = |t: &Value| match t {
            Value::Tuple(items) => match &items[..] {
                [Value::State(q), h, i, Value::State(g)] => (*q, h.clone(), i.clone(), *g),
                _ => unreachable!("conforms to the tuple type"),
            },
            _ => unreachable!("conforms to the tuple type"),
        };
        let decoded: Vec<_> = tuples.iter().map(parts).collect();
        let Some((q, h, _, _)) = decoded.first().cloned() else {
            return fail(3, "no tuple for cell 0".into());
        };
        if let Some(other) = decoded.iter().find(|t| t.0 != q) {
            return fail(1, format!("state codes s{q} and s{} both occur", other.0));
        }
        if q >= self.states {
            return fail(1, format!("s{q} codes no machine state"));
        }
        if decoded.iter().any(|t| t.1 != h) {
            return fail(2, "tuples disagree on the head position".into());
        }
        let d = self.index_domain();
        let mut tape = vec![None; self.d as usize];
        for (_, _, i, g) in &decoded {
            let j = canonical_index(i, &d)
                .expect("conforms")
                .to_usize()
                .expect("j < D");
            if tape[j].replace(*g).is_some() {
                return fail(3, format!("cell {j} occurs more than once"));
            }
        }
        if let Some(j) = tape.iter().position(Option::is_none) {
            return fail(3, format!("no tuple for cell {j}"));
        }
        let tape: Vec<usize> = tape.into_iter().map(|g| g.expect("checked")).collect();
        if let Some(g) = tape.iter().find(|&&g| g >= self.symbols) {
            return fail(4, format!("s{g} codes no tape symbol"));
        }
        let head = canonical_index(&h, &d)
            .expect("conforms")
            .to_usize()
            .expect("h < D");
        Ok(Configuration::new(q, head, tape, self.blank))
    }
}

/// A set that fails the encoding conditions: `1` one machine state, `2` one
/// head position, `3` exactly one tuple per cell, `4` every cell codes a
/// symbol. Condition `0` means the value is not even of the encoding type.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not an encoding (condition {condition}): {detail}")]
pub struct NotAnEncoding {
    pub condition: u8,
    pub detail: String,
}

pub fn encode_configuration(
    ctx: &CodingContext,
    cfg: &Configuration,
) -> Result<Value, ReductionError> {
    ctx.encode(cfg)
}

pub fn decode_configuration(
    ctx: &CodingContext,
    v: &Value,
) -> Result<Configuration, NotAnEncoding> {
    ctx.decode(v)
}

/// Variable names of the tuple components `(Y_q, H, I, Y_γ)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleVars {
    pub state: Var,
    pub head: Var,
    pub cell: Var,
    pub symbol: Var,
}

impl TupleVars {
    pub fn fresh(b: &mut Builder) -> TupleVars {
        TupleVars {
            state: b.fresh("q"),
            head: b.fresh("h"),
            cell: b.fresh("i"),
            symbol: b.fresh("g"),
        }
    }

    pub fn named(state: &str, head: &str, cell: &str, symbol: &str) -> TupleVars {
        TupleVars {
            state: state.into(),
            head: head.into(),
            cell: cell.into(),
            symbol: symbol.into(),
        }
    }

    pub fn list(&self) -> [Var; 4] {
        [
            self.state.clone(),
            self.head.clone(),
            self.cell.clone(),
            self.symbol.clone(),
        ]
    }

    pub fn context(&self, params: ReductionParams) -> TypingContext {
        let i = params.index_type();
        TypingContext::from([
            (self.state.clone(), Type::Ground),
            (self.head.clone(), i.clone()),
            (self.cell.clone(), i),
            (self.symbol.clone(), Type::Ground),
        ])
    }
}

/// Builds the formulas of the construction for one machine and parameter set.
pub struct Compiler<'m> {
    pub m: &'m TmSpec,
    pub params: ReductionParams,
    pub b: Builder,
}

const CODE: TowerSpec = TowerSpec { c: 1, level: 1 };

impl<'m> Compiler<'m> {
    pub fn new(m: &'m TmSpec, params: ReductionParams) -> Compiler<'m> {
        Compiler {
            m,
            params,
            b: Builder::new(),
        }
    }

    /// `Y` is the state coding the `j`-th declared state or symbol.
    fn code(&mut self, j: usize, y: &Var) -> Formula {
        self.b.index(CODE, j as u64, std::slice::from_ref(y))
    }

    fn pos_index(&mut self, j: u64, x: &Var) -> Formula {
        self.b
            .index(self.params.index_spec(), j, std::slice::from_ref(x))
    }

    fn pos_eq(&mut self, x: &Var, y: &Var) -> Formula {
        self.b.eq(
            self.params.index_spec(),
            std::slice::from_ref(x),
            std::slice::from_ref(y),
        )
    }

    /// `y` is the position after `x`.
    fn pos_succ(&mut self, x: &Var, y: &Var) -> Formula {
        self.b.succ(
            self.params.index_spec(),
            std::slice::from_ref(x),
            std::slice::from_ref(y),
        )
    }

    /// `φ_init^w` over `v`: the tuples of the initial configuration on `w`.
    pub fn init(&mut self, w: &str, v: &TupleVars) -> Result<Formula, ReductionError> {
        let word = self.m.word(w)?;
        let mut parts = vec![
            self.code(self.m.init(), &v.state),
            self.pos_index(0, &v.head),
        ];
        let mut inside = Vec::with_capacity(word.len());
        for (i, &g) in word.iter().enumerate() {
            let symbol = self.code(g, &v.symbol);
            let here = self.pos_index(i as u64, &v.cell);
            parts.push(Formula::or(symbol, Formula::not(here.clone())));
            inside.push(here);
        }
        // Cells past the input hold the blank.
        let blank = self.code(self.m.blank(), &v.symbol);
        parts.push(Formula::disj(std::iter::once(blank).chain(inside)));
        Ok(Formula::conj(parts))
    }

    /// `ψ_trans` over `v`: under `X ↦ enc(C)`, the tuples of `enc(C')` for the successor `C'`.
    pub fn trans(&mut self, x: &Var, v: &TupleVars) -> Formula {
        let index = self.params.index_type();
        let (q1, h1, g1) = (self.b.fresh("q"), self.b.fresh("h"), self.b.fresh("g"));
        let (q2, h2, g2) = (self.b.fresh("q"), self.b.fresh("h"), self.b.fresh("g"));
        // The old tuple of cell I, and the old tuple of the cell under the head.
        let at_cell = Formula::apply(x, [&q1, &h1, &v.cell, &g1]);
        let at_head = Formula::apply(x, [&q2, &h2, &h1, &g2]);
        let moved_away = self.pos_eq(&h1, &v.cell);
        let same_symbol = self.b.eq(
            CODE,
            std::slice::from_ref(&v.symbol),
            std::slice::from_ref(&g1),
        );
        let frame = Formula::implies(Formula::not(moved_away), same_symbol);
        let mut rules = Vec::new();
        for ((q, g), a) in self.m.transitions() {
            let guard = Formula::and(self.code(q, &q1), self.code(g, &g2));
            let next_state = self.code(a.state, &v.state);
            let head = match a.dir {
                Move::L => {
                    let back = self.pos_succ(&v.head, &h1);
                    let wall = Formula::and(self.pos_index(0, &h1), self.pos_index(0, &v.head));
                    Formula::or(back, wall)
                }
                Move::N => self.pos_eq(&v.head, &h1),
                Move::R => self.pos_succ(&h1, &v.head),
            };
            let written_cell = self.pos_eq(&h1, &v.cell);
            let written = Formula::implies(written_cell, self.code(a.symbol, &v.symbol));
            rules.push(Formula::implies(
                guard,
                Formula::conj([next_state, head, written]),
            ));
        }
        let body = Formula::conj([at_head, frame, Formula::conj(rules)]);
        Formula::exists_many(
            &[(q1, Type::Ground), (h1, index.clone()), (g1, Type::Ground)],
            Formula::and(
                at_cell,
                Formula::exists_many(&[(q2, Type::Ground), (h2, index), (g2, Type::Ground)], body),
            ),
        )
    }

    /// `ψ = ψ_trans ∨ (X = ∅ ∧ φ_init^w)`.
    pub fn step_body(
        &mut self,
        x: &Var,
        w: &str,
        v: &TupleVars,
    ) -> Result<Formula, ReductionError> {
        let trans = self.trans(x, v);
        let e = TupleVars::fresh(&mut self.b);
        let i = self.params.index_type();
        let empty = Formula::forall_many(
            &[
                (e.state.clone(), Type::Ground),
                (e.head.clone(), i.clone()),
                (e.cell.clone(), i),
                (e.symbol.clone(), Type::Ground),
            ],
            Formula::not(Formula::apply(x, e.list())),
        );
        let init = self.init(w, v)?;
        Ok(Formula::or(trans, Formula::and(empty, init)))
    }
}

/// `φ_M` together with its parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineFormula {
    /// The closed sentence `φ^< ∧ ∃v. Y_q = s_acc ∧ (PFP X. ψ)(v)`.
    pub formula: Formula,
    /// `(PFP X. ψ)(v)`, free in the tuple variables `v`.
    pub fixpoint: Formula,
    pub vars: TupleVars,
    pub stage_var: Var,
    pub params: ReductionParams,
}

impl MachineFormula {
    pub fn typed(&self) -> TypedFormula {
        check_well_formed(&self.formula, &TypingContext::new()).expect("built well-formed")
    }

    pub fn typed_fixpoint(&self) -> TypedFormula {
        check_well_formed(&self.fixpoint, &self.vars.context(self.params))
            .expect("built well-formed")
    }
}

/// Builds `φ_M` for `m` on input `w`, for LTSs with `n` states.
pub fn build_machine_formula(
    m: &TmSpec,
    w: &str,
    params: ReductionParams,
    n: usize,
) -> Result<MachineFormula, ReductionError> {
    check_size(m, n, params)?;
    let (_, tuple, d) = type_tower(params, n, u64::MAX)?;
    if w.chars().count() as u64 > d {
        return Err(ReductionError::Precondition(format!(
            "the input has {} symbols but only D = {d} cells are encodable",
            w.chars().count()
        )));
    }
    let mut c = Compiler::new(m, params);
    let axiom = c.b.total_order_axiom();
    let x = c.b.fresh("X");
    let v = TupleVars::fresh(&mut c.b);
    let body = c.step_body(&x, w, &v)?;
    let fixpoint = Formula::pfp(x.clone(), Type::set_of(tuple), body, v.list());
    let accepting = c.code(m.accept(), &v.state);
    let i = params.index_type();
    let formula = Formula::and(
        axiom,
        Formula::exists_many(
            &[
                (v.state.clone(), Type::Ground),
                (v.head.clone(), i.clone()),
                (v.cell.clone(), i),
                (v.symbol.clone(), Type::Ground),
            ],
            Formula::and(accepting, fixpoint.clone()),
        ),
    );
    Ok(MachineFormula {
        formula,
        fixpoint,
        vars: v,
        stage_var: x,
        params,
    })
}

/// `φ_init^w` with free variables `(Yq, H, I, Yg)`.
pub fn build_init(
    m: &TmSpec,
    w: &str,
    params: ReductionParams,
    n: usize,
) -> Result<(Formula, TupleVars), ReductionError> {
    let (_, _, d) = type_tower(params, n, u64::MAX)?;
    if w.chars().count() as u64 > d {
        return Err(ReductionError::Precondition(format!(
            "the input has {} symbols but only D = {d} cells are encodable",
            w.chars().count()
        )));
    }
    let v = TupleVars::named("Yq", "H", "I", "Yg");
    let f = Compiler::new(m, params).init(w, &v)?;
    Ok((f, v))
}

/// `ψ_trans` with free variables `X` and `(Yq, H, I, Yg)`.
pub fn build_trans(m: &TmSpec, params: ReductionParams) -> (Formula, Var, TupleVars) {
    let v = TupleVars::named("Yq", "H", "I", "Yg");
    let x: Var = "X".into();
    let f = Compiler::new(m, params).trans(&x, &v);
    (f, x, v)
}

/// Which word the machine runs on in [`crossval`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mode {
    /// `w = ⟨T⟩`.
    Encoded,
    Synthetic(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageCheck {
    /// Stages compared with the simulator trace.
    pub checked: usize,
    /// `(stage, description)` for every stage that differs from the trace.
    pub mismatches: Vec<(usize, String)>,
    /// Stage index `i` with `F^i = F^{i+1}`, if the sequence stabilized.
    pub stabilized_at: Option<usize>,
    /// Whether stabilization happened exactly at the halting configuration.
    pub stabilized_at_halt: bool,
}

impl StageCheck {
    pub fn faithful(&self) -> bool {
        self.mismatches.is_empty() && self.stabilized_at_halt
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossvalReport {
    pub word: String,
    pub n: usize,
    pub k: usize,
    pub c: usize,
    pub cells: u64,
    pub simulator: Verdict,
    pub steps: u64,
    pub space: u64,
    pub formula: bool,
    pub agree: bool,
    pub stages: Option<StageCheck>,
    pub stats: EvalStats,
}

impl CrossvalReport {
    pub fn summary(&self) -> String {
        let verdict = |accept: bool| if accept { "accept" } else { "reject" };
        if self.agree {
            format!("agree: {}", verdict(self.formula))
        } else {
            format!(
                "disagree: simulator {}, formula {}",
                self.simulator,
                verdict(self.formula)
            )
        }
    }
}

/// Runs `m` on `w` and evaluates `φ_M` on `lts`, comparing verdicts and,
/// when `check_stages` is set, every fixpoint stage with the simulator trace.
pub fn crossval(
    m: &TmSpec,
    lts: &Lts,
    params: ReductionParams,
    mode: &Mode,
    opts: &EvalOptions,
    check_stages: bool,
) -> Result<CrossvalReport, ReductionError> {
    let ctx = CodingContext::for_lts(m, lts, params)?;
    let word = match mode {
        Mode::Encoded => encode_lts(lts),
        Mode::Synthetic(w) => w.clone(),
    };
    if word.chars().count() as u64 > ctx.d {
        return Err(ReductionError::Precondition(format!(
            "the input has {} symbols but only D = {} cells are encodable",
            word.chars().count(),
            ctx.d
        )));
    }
    let step_budget = opts.max_pfp_iterations.saturating_sub(2).max(1);
    let (run, trace) = run_trace(m, &word, step_budget, ctx.d)?;
    if run.verdict == Verdict::BudgetExceeded {
        return Err(ReductionError::Precondition(format!(
            "the run on `{word}` leaves the {} encodable cells or exceeds {step_budget} steps",
            ctx.d
        )));
    }
    let phi = build_machine_formula(m, &word, params, lts.len())?;
    let ev = Evaluator::with_options(lts, opts.clone());
    let (formula, stats) = ev.eval_with_stats(&phi.typed(), &Default::default())?;
    let stages = if check_stages {
        Some(check_stage_fidelity(&ctx, &phi, lts, opts, &trace)?)
    } else {
        None
    };
    let simulator = run.verdict;
    Ok(CrossvalReport {
        word,
        n: lts.len(),
        k: params.k,
        c: params.c,
        cells: ctx.d,
        simulator,
        steps: run.steps,
        space: run.space,
        formula,
        agree: formula == (simulator == Verdict::Accept),
        stages,
        stats,
    })
}

/// Compares stage `i + 1` of the fixpoint with configuration `C_i` of the trace.
pub fn check_stage_fidelity(
    ctx: &CodingContext,
    phi: &MachineFormula,
    lts: &Lts,
    opts: &EvalOptions,
    trace: &[Configuration],
) -> Result<StageCheck, ReductionError> {
    let mut opts = opts.clone();
    opts.record_stages = true;
    let (pfp, _) = Evaluator::with_options(lts, opts)
        .pfp_iterate(&phi.typed_fixpoint(), &Default::default())?;
    let stages = pfp.stages.expect("recorded");
    let mut mismatches = Vec::new();
    if !stages[0].is_empty() {
        mismatches.push((0, "stage 0 is not empty".to_string()));
    }
    let mut checked = 1;
    for (i, expected) in trace.iter().enumerate() {
        let Some(stage) = stages.get(i + 1) else {
            mismatches.push((i + 1, "sequence ended before the run".to_string()));
            break;
        };
        checked += 1;
        let value = stage.to_value(&ctx.tuple_type, ctx.n)?;
        match ctx.decode(&value) {
            Ok(cfg) if &cfg == expected => {}
            Ok(cfg) => mismatches.push((
                i + 1,
                format!("decodes to {cfg:?}, simulator has {expected:?}"),
            )),
            Err(e) => mismatches.push((i + 1, e.to_string())),
        }
    }
    let stabilized_at = match pfp.outcome {
        PfpOutcome::StabilizedAt(i) => Some(i),
        PfpOutcome::NoFixpoint { .. } => None,
    };
    Ok(StageCheck {
        checked,
        mismatches,
        stabilized_at,
        stabilized_at_halt: stabilized_at == Some(trace.len()),
    })
}

/// Outcome of applying the stage function to one perturbed encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ProbeOutcome {
    /// The image is not an encoding; the condition number says why.
    NotAnEncoding(u8),
    /// The image decodes to configuration `C_i` of the trace.
    OnTrace(usize),
    /// The image decodes to a configuration the run never visits.
    OffTrace(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbeResult {
    pub description: String,
    pub outcome: ProbeOutcome,
}

/// Applies `ψ` to sets that are not encodings, derived from the trace's
/// encodings by deleting one tuple or adding a conflicting one, and
/// classifies the images. Off-trace images are reported, never hidden.
pub fn perturbation_probe(
    ctx: &CodingContext,
    phi: &MachineFormula,
    lts: &Lts,
    opts: &EvalOptions,
    trace: &[Configuration],
    per_stage: usize,
) -> Result<Vec<ProbeResult>, ReductionError> {
    let ev = Evaluator::with_options(lts, opts.clone());
    let typed = phi.typed_fixpoint();
    let tuple_domain = Domain::new(ctx.tuple_type.clone(), ctx.n);
    let space = tuple_domain.cardinality_u64()?;
    let mut results = Vec::new();
    for (i, cfg) in trace.iter().enumerate() {
        let enc = StageSet::from_value(&ctx.encode(cfg)?, &ctx.tuple_type, ctx.n)?;
        let members: Vec<u64> = enc.iter().collect();
        let mut perturbed = Vec::new();
        for &t in members.iter().take(per_stage) {
            let s = StageSet::from_indices(space, members.iter().copied().filter(|&u| u != t));
            perturbed.push((format!("C_{i} without tuple {t}"), s));
            // Same cell, another symbol code.
            let other = (t + 1..space)
                .chain(0..t)
                .find(|&u| u / ctx.n as u64 == t / ctx.n as u64 && u != t);
            if let Some(u) = other {
                let mut s = enc.clone();
                s.insert(u);
                perturbed.push((format!("C_{i} plus tuple {u}"), s));
            }
        }
        for (description, s) in perturbed {
            let image = ev.pfp_step(&typed, &Default::default(), &s)?;
            let value = image.to_value(&ctx.tuple_type, ctx.n)?;
            let outcome = match ctx.decode(&value) {
                Err(e) => ProbeOutcome::NotAnEncoding(e.condition),
                Ok(c) => match trace.iter().position(|t| *t == c) {
                    Some(j) => ProbeOutcome::OnTrace(j),
                    None => ProbeOutcome::OffTrace(format!("{c:?}")),
                },
            };
            results.push(ProbeResult {
                description,
                outcome,
            });
        }
    }
    Ok(results)
}
