//! Stage-enumerated sets.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::{Nat, Stage};

type EvalFn = dyn Fn(Stage) -> Vec<Nat> + Send + Sync;
type BoundFn = dyn Fn(Stage) -> Nat + Send + Sync;

/// A computably enumerable set presented as a monotone stage function.
///
/// `eval(s)` is the finite ascending list of elements enumerated by stage `s`;
/// `bound(s)` is a declared ceiling on the elements present at stage `s`. Both
/// must be pure functions of the stage — the monotonicity and boundedness
/// invariants are checked by tests, never assumed.
#[derive(Clone)]
pub struct StageSet {
    label: String,
    eval: Arc<EvalFn>,
    bound: Arc<BoundFn>,
}

impl StageSet {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(Stage) -> Vec<Nat> + Send + Sync + 'static,
        bound: impl Fn(Stage) -> Nat + Send + Sync + 'static,
    ) -> Self {
        StageSet {
            label: label.into(),
            eval: Arc::new(eval),
            bound: Arc::new(bound),
        }
    }

    /// Stage function with the bound derived from the evaluation itself.
    pub fn from_fn(
        label: impl Into<String>,
        eval: impl Fn(Stage) -> Vec<Nat> + Send + Sync + 'static,
    ) -> Self {
        let eval = Arc::new(eval);
        let bound_eval = Arc::clone(&eval);
        StageSet {
            label: label.into(),
            eval,
            bound: Arc::new(move |s| bound_eval(s).last().copied().unwrap_or(0)),
        }
    }

    /// The empty set at every stage.
    pub fn empty(label: impl Into<String>) -> Self {
        StageSet::new(label, |_| Vec::new(), |_| 0)
    }

    /// A set that is constant across stages.
    pub fn constant(label: impl Into<String>, elems: impl IntoIterator<Item = Nat>) -> Self {
        let elems: BTreeSet<Nat> = elems.into_iter().collect();
        let top = elems.iter().next_back().copied().unwrap_or(0);
        let v: Vec<Nat> = elems.into_iter().collect();
        StageSet::new(label, move |_| v.clone(), move |_| top)
    }

    /// Explicit stage table: at stage `s` the set holds the union of all
    /// entries with stage at most `s`. Monotone by construction.
    pub fn from_steps(label: impl Into<String>, steps: Vec<(Stage, Vec<Nat>)>) -> Self {
        let mut steps = steps;
        steps.sort_by_key(|(s, _)| *s);
        let steps = Arc::new(steps);
        let steps2 = Arc::clone(&steps);
        StageSet::new(
            label,
            move |s| {
                let mut out: BTreeSet<Nat> = BTreeSet::new();
                for (at, elems) in steps.iter() {
                    if *at <= s {
                        out.extend(elems.iter().copied());
                    }
                }
                out.into_iter().collect()
            },
            move |s| {
                steps2
                    .iter()
                    .filter(|(at, _)| *at <= s)
                    .flat_map(|(_, e)| e.iter().copied())
                    .max()
                    .unwrap_or(0)
            },
        )
    }

    /// The ray `{start, start+1, ...}` truncated at the stage: `eval(s)`
    /// is `[start, start + s]`.
    pub fn interval(label: impl Into<String>, start: Nat) -> Self {
        StageSet::new(
            label,
            move |s| (start..=start + s).collect(),
            move |s| start + s,
        )
    }

    /// Replay of a timestamped element log: `eval(s)` is every element logged
    /// at a stage `<= min(s, cap)`. Construction runs log one entry per
    /// enumeration event and expose their families through this constructor.
    pub fn from_log(label: impl Into<String>, log: Arc<Vec<(Stage, Nat)>>, cap: Stage) -> Self {
        let log2 = Arc::clone(&log);
        StageSet::new(
            label,
            move |s| {
                let s = s.min(cap);
                let mut out: BTreeSet<Nat> = BTreeSet::new();
                for &(at, e) in log.iter() {
                    if at <= s {
                        out.insert(e);
                    }
                }
                out.into_iter().collect()
            },
            move |s| {
                let s = s.min(cap);
                log2.iter()
                    .filter(|(at, _)| *at <= s)
                    .map(|&(_, e)| e)
                    .max()
                    .unwrap_or(0)
            },
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn relabeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Elements enumerated by stage `s`, ascending.
    pub fn eval(&self, s: Stage) -> Vec<Nat> {
        (self.eval)(s)
    }

    pub fn eval_set(&self, s: Stage) -> BTreeSet<Nat> {
        (self.eval)(s).into_iter().collect()
    }

    /// `eval(s)` restricted to `[0, elem_bound]`.
    pub fn bounded(&self, s: Stage, elem_bound: Nat) -> BTreeSet<Nat> {
        (self.eval)(s).into_iter().filter(|&x| x <= elem_bound).collect()
    }

    pub fn cardinality(&self, s: Stage) -> u64 {
        (self.eval)(s).len() as u64
    }

    /// Declared element ceiling at stage `s`.
    pub fn bound(&self, s: Stage) -> Nat {
        (self.bound)(s)
    }

    /// First stage below `max_stage` where `eval(s) ⊆ eval(s+1)` fails, if any.
    pub fn first_monotonicity_violation(&self, max_stage: Stage) -> Option<Stage> {
        let mut prev = self.eval_set(0);
        for s in 1..=max_stage {
            let cur = self.eval_set(s);
            if !prev.is_subset(&cur) {
                return Some(s - 1);
            }
            prev = cur;
        }
        None
    }

    /// A 64-bit digest of the set as seen at `sample_stage`; used to key
    /// deterministic text generation and to stamp trace records.
    pub fn digest(&self, sample_stage: Stage) -> u64 {
        let mut h = Sha256::new();
        h.update(self.label.as_bytes());
        h.update([0u8]);
        for e in self.eval(sample_stage) {
            h.update(e.to_le_bytes());
        }
        let out = h.finalize();
        u64::from_le_bytes(out[..8].try_into().unwrap())
    }
}

impl fmt::Debug for StageSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StageSet({})", self.label)
    }
}
