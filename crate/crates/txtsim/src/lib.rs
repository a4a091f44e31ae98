//! Bounded-horizon workbench for text-based learning criteria.
//!
//! Everything here runs at explicit finite budgets: sets are stage-indexed
//! enumerations, learners answer within step budgets, and every judgment is a
//! three-valued [`criteria::Verdict`] that records the bounds it was computed
//! at. Nothing in this crate performs unbounded computation.
//!
//! Module map:
//!
//! - [`kernel`] — stage-enumerated sets, families-as-columns, text prefixes,
//!   hypotheses, learners, and the hypothesis registry.
//! - [`criteria`] — verdict engines for the TxtFin / TxtEx / TxtBC / TxtEx*
//!   identification criteria, plus the stage-approximated text evaluator.
//! - [`angluin`] — brute-force tell-tale search and refutation at bounds.
//! - [`constructions`] — stage-budgeted family/learner constructions used to
//!   stress the criteria (ray families, label-synchronization, column
//!   merging, adversarial enumeration, speculation and parity-pair machines).
//! - [`harness`] — experiment configuration, deterministic text generation,
//!   trace emission, and construction audits.

pub mod angluin;
pub mod constructions;
pub mod criteria;
pub mod harness;
pub mod kernel;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown hypothesis code {0}")]
    UnknownCode(String),
    #[error("registry is frozen; registration is only allowed during setup")]
    RegistryFrozen,
    #[error("finite set {0:?} has an element >= {1}, too large for a canonical finite code")]
    FiniteCodeOverflow(Vec<u64>, u32),
    #[error("prefix of length {got} is shorter than the evaluation horizon {want}")]
    PrefixTooShort { got: usize, want: u64 },
    #[error("prefix symbol {symbol} is not in the target set at stage {stage}")]
    ContentEscapesTarget { symbol: u64, stage: u64 },
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("column {column} is empty at stage {stage}")]
    EmptyColumn { column: u64, stage: u64 },
    #[error("target set `{label}` is empty at stage {stage}")]
    EmptyTarget { label: String, stage: u64 },
    #[error("bounded column has {elements} elements; subset enumeration is capped at 2^{cap} subsets")]
    SubsetCapExceeded { elements: usize, cap: u32 },
    #[error("cut points must be strictly increasing and start above zero: {0:?}")]
    BadCutPoints(Vec<u64>),
    #[error("stage budget must be at least 1")]
    ZeroStageBudget,
    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
