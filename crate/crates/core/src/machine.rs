//! Deterministic single-tape Turing machines, bounded simulation, and the
//! word encoding `⟨T⟩` of an LTS.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::lts::Lts;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("symbol `{0}` is not in the tape alphabet")]
    UnknownSymbol(char),
    #[error("symbol `{symbol}` at position {position} is not in the input alphabet")]
    Symbol { symbol: char, position: usize },
    #[error("the blank `{0}` must be in the tape alphabet but not in the input alphabet")]
    Blank(char),
    #[error("input symbol `{0}` is missing from the tape alphabet")]
    InputNotOnTape(char),
    #[error("no transition for ({state}, {symbol})")]
    MissingTransition { state: String, symbol: char },
    #[error("duplicate transition for ({state}, {symbol})")]
    DuplicateTransition { state: String, symbol: char },
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("accepting and rejecting state must differ")]
    HaltingStatesEqual,
}

/// Head movement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Move {
    L,
    N,
    R,
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Move::L => "L",
            Move::N => "N",
            Move::R => "R",
        })
    }
}

/// One entry of `δ`: next state, written symbol, move (all by index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Action {
    pub state: usize,
    pub symbol: usize,
    pub dir: Move,
}

/// `M = (Q, Σ, Γ, □, δ, q_init, q_acc, q_rej)` with `δ` total and halting
/// states normalized to self-loops. States and tape symbols keep their
/// declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TmSpec {
    states: Vec<String>,
    input: Vec<char>,
    tape: Vec<char>,
    blank: usize,
    init: usize,
    accept: usize,
    reject: usize,
    /// Indexed by `state * |Γ| + symbol`.
    delta: Vec<Action>,
}

/// Collects a machine description and validates it in [`TmBuilder::build`].
#[derive(Debug, Clone)]
pub struct TmBuilder {
    states: Vec<String>,
    input: Vec<char>,
    tape: Vec<char>,
    blank: char,
    init: String,
    accept: String,
    reject: String,
    rules: Vec<(String, char, String, char, Move)>,
}

impl TmBuilder {
    pub fn new<S: Into<String>>(
        states: impl IntoIterator<Item = S>,
        input: &str,
        tape: &str,
        blank: char,
    ) -> TmBuilder {
        TmBuilder {
            states: states.into_iter().map(Into::into).collect(),
            input: input.chars().collect(),
            tape: tape.chars().collect(),
            blank,
            init: String::new(),
            accept: String::new(),
            reject: String::new(),
            rules: Vec::new(),
        }
    }

    pub fn init(mut self, q: impl Into<String>) -> Self {
        self.init = q.into();
        self
    }

    pub fn accept(mut self, q: impl Into<String>) -> Self {
        self.accept = q.into();
        self
    }

    pub fn reject(mut self, q: impl Into<String>) -> Self {
        self.reject = q.into();
        self
    }

    pub fn rule(mut self, q: &str, read: char, next: &str, write: char, dir: Move) -> Self {
        self.rules
            .push((q.to_string(), read, next.to_string(), write, dir));
        self
    }

    pub fn add_rule(&mut self, q: &str, read: char, next: &str, write: char, dir: Move) {
        self.rules
            .push((q.to_string(), read, next.to_string(), write, dir));
    }

    pub fn build(self) -> Result<TmSpec, MachineError> {
        for (i, s) in self.states.iter().enumerate() {
            if self.states[..i].contains(s) {
                return Err(MachineError::Duplicate {
                    kind: "state",
                    name: s.clone(),
                });
            }
        }
        for (i, g) in self.tape.iter().enumerate() {
            if self.tape[..i].contains(g) {
                return Err(MachineError::Duplicate {
                    kind: "tape symbol",
                    name: g.to_string(),
                });
            }
        }
        if let Some(a) = self.input.iter().find(|a| !self.tape.contains(a)) {
            return Err(MachineError::InputNotOnTape(*a));
        }
        if self.input.contains(&self.blank) || !self.tape.contains(&self.blank) {
            return Err(MachineError::Blank(self.blank));
        }
        let state = |q: &str| {
            self.states
                .iter()
                .position(|s| s == q)
                .ok_or_else(|| MachineError::UnknownState(q.to_string()))
        };
        let symbol = |g: char| {
            self.tape
                .iter()
                .position(|&t| t == g)
                .ok_or(MachineError::UnknownSymbol(g))
        };
        let (init, accept, reject) = (
            state(&self.init)?,
            state(&self.accept)?,
            state(&self.reject)?,
        );
        if accept == reject {
            return Err(MachineError::HaltingStatesEqual);
        }
        let width = self.tape.len();
        let mut delta: Vec<Option<Action>> = vec![None; self.states.len() * width];
        for (q, read, next, write, dir) in &self.rules {
            let (qi, ri) = (state(q)?, symbol(*read)?);
            let action = Action {
                state: state(next)?,
                symbol: symbol(*write)?,
                dir: *dir,
            };
            let slot = &mut delta[qi * width + ri];
            if slot.is_some() {
                return Err(MachineError::DuplicateTransition {
                    state: q.clone(),
                    symbol: *read,
                });
            }
            *slot = Some(action);
        }
        // Halting states loop on themselves so that their configurations are fixed.
        for q in [accept, reject] {
            for g in 0..width {
                delta[q * width + g] = Some(Action {
                    state: q,
                    symbol: g,
                    dir: Move::N,
                });
            }
        }
        let delta = delta
            .into_iter()
            .enumerate()
            .map(|(k, a)| {
                a.ok_or_else(|| MachineError::MissingTransition {
                    state: self.states[k / width].clone(),
                    symbol: self.tape[k % width],
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(TmSpec {
            blank: symbol(self.blank)?,
            states: self.states,
            input: self.input,
            tape: self.tape,
            init,
            accept,
            reject,
            delta,
        })
    }
}

impl TmSpec {
    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn input_alphabet(&self) -> &[char] {
        &self.input
    }

    pub fn tape_alphabet(&self) -> &[char] {
        &self.tape
    }

    pub fn blank(&self) -> usize {
        self.blank
    }

    pub fn blank_char(&self) -> char {
        self.tape[self.blank]
    }

    pub fn init(&self) -> usize {
        self.init
    }

    pub fn accept(&self) -> usize {
        self.accept
    }

    pub fn reject(&self) -> usize {
        self.reject
    }

    pub fn is_halting(&self, q: usize) -> bool {
        q == self.accept || q == self.reject
    }

    pub fn delta(&self, q: usize, g: usize) -> Action {
        self.delta[q * self.tape.len() + g]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn symbol_index(&self, g: char) -> Option<usize> {
        self.tape.iter().position(|&t| t == g)
    }

    /// All entries of `δ` as `((q, γ), action)` in state-major order.
    pub fn transitions(&self) -> impl Iterator<Item = ((usize, usize), Action)> + '_ {
        let width = self.tape.len();
        self.delta
            .iter()
            .enumerate()
            .map(move |(k, a)| ((k / width, k % width), *a))
    }

    /// Translates a word into tape symbol indices, rejecting non-input symbols.
    pub fn word(&self, w: &str) -> Result<Vec<usize>, MachineError> {
        w.chars()
            .enumerate()
            .map(|(position, symbol)| {
                if self.input.contains(&symbol) {
                    Ok(self
                        .symbol_index(symbol)
                        .expect("input symbols are on the tape"))
                } else {
                    Err(MachineError::Symbol { symbol, position })
                }
            })
            .collect()
    }
}

/// `(q, h, t)`: tape cells past `tape.len()` hold the blank. Trailing blanks
/// are never stored, so equal configurations compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub state: usize,
    pub head: usize,
    pub tape: Vec<usize>,
}

impl Configuration {
    pub fn new(state: usize, head: usize, mut tape: Vec<usize>, blank: usize) -> Configuration {
        while tape.last() == Some(&blank) {
            tape.pop();
        }
        Configuration { state, head, tape }
    }

    pub fn cell(&self, i: usize, blank: usize) -> usize {
        self.tape.get(i).copied().unwrap_or(blank)
    }

    /// `state head tape` with the tape shown up to the head or the last non-blank.
    pub fn render(&self, m: &TmSpec) -> String {
        let len = self.tape.len().max(self.head + 1);
        let tape: String = (0..len).map(|i| m.tape[self.cell(i, m.blank)]).collect();
        format!("{} {} {}", m.states[self.state], self.head, tape)
    }
}

pub fn initial_configuration(m: &TmSpec, w: &str) -> Result<Configuration, MachineError> {
    Ok(Configuration::new(m.init, 0, m.word(w)?, m.blank))
}

/// The successor configuration, or `None` when `c` is halting.
pub fn step(m: &TmSpec, c: &Configuration) -> Option<Configuration> {
    if m.is_halting(c.state) {
        return None;
    }
    let a = m.delta(c.state, c.cell(c.head, m.blank));
    let mut tape = c.tape.clone();
    if c.head >= tape.len() {
        tape.resize(c.head + 1, m.blank);
    }
    tape[c.head] = a.symbol;
    let head = match a.dir {
        Move::L => c.head.saturating_sub(1),
        Move::N => c.head,
        Move::R => c.head + 1,
    };
    Some(Configuration::new(a.state, head, tape, m.blank))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Accept,
    Reject,
    BudgetExceeded,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Accept => "accept",
            Verdict::Reject => "reject",
            Verdict::BudgetExceeded => "budget-exceeded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub verdict: Verdict,
    pub steps: u64,
    /// `1 + ` the largest head position reached.
    pub space: u64,
    pub last: Configuration,
}

/// Simulates `m` on `w`. Exceeding `step_budget` steps or moving the head to a
/// cell `>= space_budget` ends the run with [`Verdict::BudgetExceeded`].
pub fn run(
    m: &TmSpec,
    w: &str,
    step_budget: u64,
    space_budget: u64,
) -> Result<RunResult, MachineError> {
    simulate(m, w, step_budget, space_budget, |_| {})
}

/// Like [`run`], also returning `C_0, C_1, ...` up to the last configuration.
pub fn run_trace(
    m: &TmSpec,
    w: &str,
    step_budget: u64,
    space_budget: u64,
) -> Result<(RunResult, Vec<Configuration>), MachineError> {
    let mut trace = Vec::new();
    let r = simulate(m, w, step_budget, space_budget, |c| trace.push(c.clone()))?;
    Ok((r, trace))
}

fn simulate(
    m: &TmSpec,
    w: &str,
    step_budget: u64,
    space_budget: u64,
    mut visit: impl FnMut(&Configuration),
) -> Result<RunResult, MachineError> {
    let mut c = initial_configuration(m, w)?;
    visit(&c);
    let mut steps = 0;
    let mut space = 1;
    let out_of_budget = step_budget == 0 || space_budget == 0;
    let verdict = loop {
        if out_of_budget {
            break Verdict::BudgetExceeded;
        }
        if c.state == m.accept {
            break Verdict::Accept;
        }
        if c.state == m.reject {
            break Verdict::Reject;
        }
        if steps == step_budget {
            break Verdict::BudgetExceeded;
        }
        let next = step(m, &c).expect("not halting");
        steps += 1;
        if next.head as u64 >= space_budget {
            c = next;
            visit(&c);
            break Verdict::BudgetExceeded;
        }
        space = space.max(next.head as u64 + 1);
        c = next;
        visit(&c);
    };
    Ok(RunResult {
        verdict,
        steps,
        space,
        last: c,
    })
}

/// `⟨T⟩`: `1^n #`, then per action in sorted name order its row-major
/// adjacency bits and `#`, then per proposition in sorted name order its
/// characteristic bits and `#`. States are taken in declaration order.
pub fn encode_lts(t: &Lts) -> String {
    let n = t.len();
    let bit = |b: bool| if b { '1' } else { '0' };
    let mut out = String::with_capacity(encoded_length(t));
    out.extend(std::iter::repeat_n('1', n));
    out.push('#');
    let actions: BTreeMap<&str, usize> = t
        .actions()
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();
    for &a in actions.values() {
        out.extend(t.adjacency(a).iter().map(|&b| bit(b)));
        out.push('#');
    }
    let props: BTreeMap<&str, usize> = t
        .props()
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();
    for &p in props.values() {
        out.extend(t.extension(p).iter().map(|&b| bit(b)));
        out.push('#');
    }
    out
}

/// `n + 1 + |A|(n² + 1) + |P|(n + 1)`.
pub fn encoded_length(t: &Lts) -> usize {
    let n = t.len();
    n + 1 + t.actions().len() * (n * n + 1) + t.props().len() * (n + 1)
}

/// Small machines used by tests, benchmarks and the command line examples.
/// All of them use the tape alphabet `0 1 _` and at most three states.
pub mod samples {
    use super::{Move, TmBuilder, TmSpec};

    fn base() -> TmBuilder {
        TmBuilder::new(["q0", "qa", "qr"], "01", "01_", '_')
            .init("q0")
            .accept("qa")
            .reject("qr")
    }

    /// Accepts every word in one step.
    pub fn always_accept() -> TmSpec {
        let mut b = base();
        for g in ['0', '1', '_'] {
            b.add_rule("q0", g, "qa", g, Move::N);
        }
        b.build().expect("valid machine")
    }

    /// Rejects every word in one step.
    pub fn always_reject() -> TmSpec {
        let mut b = base();
        for g in ['0', '1', '_'] {
            b.add_rule("q0", g, "qr", g, Move::N);
        }
        b.build().expect("valid machine")
    }

    /// Accepts exactly the words starting with `1`.
    pub fn first_symbol_is_one() -> TmSpec {
        base()
            .rule("q0", '1', "qa", '1', Move::N)
            .rule("q0", '0', "qr", '0', Move::N)
            .rule("q0", '_', "qr", '_', Move::N)
            .build()
            .expect("valid machine")
    }

    /// Sweeps right erasing `1`s to `0`; rejects on the first `0`, accepts
    /// after stepping back from the first blank. Accepts exactly `1*`.
    pub fn all_ones_sweep() -> TmSpec {
        base()
            .rule("q0", '1', "q0", '0', Move::R)
            .rule("q0", '0', "qr", '0', Move::N)
            .rule("q0", '_', "qa", '_', Move::L)
            .build()
            .expect("valid machine")
    }

    /// Two halting states only; `accepting` picks the initial one.
    pub fn immediate(accepting: bool) -> TmSpec {
        let init = if accepting { "qa" } else { "qr" };
        TmBuilder::new(["qa", "qr"], "1", "1_", '_')
            .init(init)
            .accept("qa")
            .reject("qr")
            .build()
            .expect("valid machine")
    }
}
