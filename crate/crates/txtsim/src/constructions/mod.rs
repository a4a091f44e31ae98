//! Stage-budgeted family and learner constructions.
//!
//! Each construction here is a deterministic stage machine: it runs for an
//! explicit stage budget, logs every element enumeration with the stage it
//! happened at, and exposes the produced family as a replay of that log (so
//! family evaluations are monotone in the stage by construction). Machines
//! also expose their full state for invariant audits after every stage.

mod adversary;
mod label_sync;
mod merging;
mod normalize;
mod parity;
mod rays;
mod speculation;
mod union;

pub use adversary::{adversary_build, adversary_learner, replay_enumeration, AdversaryMachine};
pub use label_sync::{label_sync_build, LabelSyncMachine, TriplePredicate};
pub use merging::{block_union_build, merged_copies_build, split_learner};
pub use normalize::{fin_normalize, normalizer_search_space};
pub use parity::{parity_build, parity_learner, ParityEntry, ParityMachine};
pub use rays::{ray_family, ray_learner, GuessRule, RayFamily};
pub use speculation::{speculation_build, speculation_learner, SpeculationEntry, SpeculationMachine};
pub use union::{part_column, union_family};

use serde::{Deserialize, Serialize};

/// One structured record per construction stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: u64,
    /// Which case of the stage machine ran.
    pub case: String,
    /// Elements enumerated during the stage.
    pub enumerated: u64,
    /// Injuries (rollbacks/truncations) performed during the stage.
    pub injuries: u64,
}

/// A named invariant violation found by an audit, with the stage it first
/// appeared at.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantViolation {
    pub stage: u64,
    pub invariant: String,
    pub detail: String,
}

/// Common face of the stage machines, used by the audit runner.
pub trait StageMachine {
    /// Completed stages so far.
    fn completed_stages(&self) -> u64;
    /// Run one stage.
    fn step(&mut self);
    /// Violations present in the current state (empty when all hold).
    fn violations(&self) -> Vec<InvariantViolation>;
    /// Per-stage records so far.
    fn stage_log(&self) -> &[StageSummary];
}
