//! Uniformly enumerable families as columns of a single carrier set.

use std::collections::BTreeSet;

use super::{pair, unpair, Nat, Stage, StageSet};

/// A family coded by one stage set of paired values: member `i` at stage `s`
/// is `{ x : pair(i, x) ∈ carrier.eval(s) }`.
#[derive(Clone, Debug)]
pub struct Family {
    carrier: StageSet,
    arity_hint: Option<u64>,
}

impl Family {
    pub fn new(carrier: StageSet, arity_hint: Option<u64>) -> Self {
        Family { carrier, arity_hint }
    }

    pub fn carrier(&self) -> &StageSet {
        &self.carrier
    }

    pub fn arity_hint(&self) -> Option<u64> {
        self.arity_hint
    }

    /// Column `i` evaluated at stage `s`, ascending.
    pub fn column(&self, i: Nat, s: Stage) -> BTreeSet<Nat> {
        self.carrier
            .eval(s)
            .into_iter()
            .filter_map(|p| {
                let (j, x) = unpair(p);
                (j == i).then_some(x)
            })
            .collect()
    }

    /// Column `i` as a stage set of its own.
    pub fn column_set(&self, i: Nat) -> StageSet {
        let carrier = self.carrier.clone();
        StageSet::from_fn(format!("{}[{}]", carrier.label(), i), move |s| {
            carrier
                .eval(s)
                .into_iter()
                .filter_map(|p| {
                    let (j, x) = unpair(p);
                    (j == i).then_some(x)
                })
                .collect()
        })
    }

    /// Indices of columns nonempty at stage `s`, scanning indices up to
    /// `max_index` inclusive.
    pub fn nonempty_columns(&self, max_index: Nat, s: Stage) -> Vec<Nat> {
        let present: BTreeSet<Nat> = self
            .carrier
            .eval(s)
            .into_iter()
            .map(|p| unpair(p).0)
            .collect();
        present.into_iter().filter(|&i| i <= max_index).collect()
    }

    /// A family over explicit constant columns; column `i` is `columns[i]`.
    pub fn from_columns(label: impl Into<String>, columns: Vec<Vec<Nat>>) -> Self {
        let n = columns.len() as u64;
        let mut elems: Vec<Nat> = Vec::new();
        for (i, col) in columns.iter().enumerate() {
            for &x in col {
                elems.push(pair(i as Nat, x));
            }
        }
        Family::new(StageSet::constant(label, elems), Some(n))
    }
}
