//! Higher-order logic with partial fixpoints (HO+PFP) over finite labeled
//! transition systems: types and formulas, semantic domains with canonical
//! orders, a model checker, definable orders and index formulas, Turing
//! machines, and the encoding of space-bounded machine runs as fixpoint
//! formulas.

pub mod domains;
pub mod eval;
pub mod formulas;
pub mod frontend;
pub mod logic;
pub mod lts;
pub mod machine;
pub mod reduction;

pub use domains::{
    canonical_compare, canonical_index, canonical_successor, domain_size, index_to_value, tower,
    BigCount, Domain, DomainError, Value,
};
pub use eval::{
    eval, Environment, EvalError, EvalOptions, EvalStats, Evaluator, PfpOutcome, PfpTrace, StageSet,
};
pub use frontend::{ParseError, SourceSpan};
pub use logic::{check_well_formed, Formula, Type, TypeError, TypedFormula, TypingContext, Var};
pub use lts::{Lts, LtsError, ORDER_ACTION};
pub use machine::{Configuration, MachineError, Move, RunResult, TmBuilder, TmSpec, Verdict};
pub use reduction::{CodingContext, ReductionError, ReductionParams};

use thiserror::Error;

/// Any error surfaced by the library, grouped by how a caller should react.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Lts(#[from] LtsError),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

impl Error {
    /// Whether the failure is a budget or resource limit rather than bad input.
    pub fn is_resource(&self) -> bool {
        match self {
            Error::Domain(DomainError::Resource(_)) | Error::Eval(EvalError::Resource(_)) => true,
            Error::Reduction(r) => r.is_resource(),
            _ => false,
        }
    }
}
