//! Foundational representations: stage-enumerated sets, families, text
//! prefixes, hypotheses, learners, and the hypothesis registry.
//!
//! Conventions used throughout the crate:
//!
//! - A "stage set" presents a computably enumerable set as a monotone function
//!   from stage numbers to finite ascending element lists.
//! - A family is a single stage set of paired codes; member `i` is the set of
//!   `x` with `pair(i, x)` in the carrier.
//! - Learners are total within a step budget: a call that would exceed its
//!   budget observably fails to answer, and the criteria layer treats that as
//!   a no-guess.

mod family;
mod learner;
mod pairing;
mod registry;
mod stage_set;
mod text;

pub use family::Family;
pub use learner::{Code, Hypothesis, Learner, FINITE_ELEM_LIMIT};
pub use pairing::{pair, pair3, unpair, unpair3};
pub use registry::{Registry, SharedRegistry};
pub use stage_set::StageSet;
pub use text::{ApproxText, TextPrefix};

/// Natural numbers as used for set elements, symbols and labels.
pub type Nat = u64;
/// Stage indices of enumerations.
pub type Stage = u64;
