//! Brute-force tell-tale oracle at bounds.
//!
//! A tell-tale for member `i` of a family is a finite subset `F` of that
//! member such that no other member sits strictly between `F` and member `i`.
//! At bounds, members are compared as their stage-`S` evaluations capped at
//! the element bound `B`, and strictness demands an explicit discrepancy
//! element within the cap.
//!
//! Candidate subsets are drawn from the member's elements *strictly below*
//! `B`: an element sitting exactly at the cap cannot be separated from the
//! unseen continuation of the set, so subsets containing it would be
//! unblockable for bookkeeping reasons alone and the search/refutation pair
//! would disagree with the unbounded question on every growing member.
//!
//! Exactly one of "candidate found" / "complete blocking map found" holds for
//! any fixed `(i, bounds, max_j)`; the two entry points below are the two
//! sides of that search.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::criteria::Bounds;
use crate::kernel::{Family, Nat};
use crate::{Error, Result};

/// Subset enumeration cap: columns with more than this many candidate
/// elements are an error. Brute force is the point of this oracle; it exists
/// to validate small instances.
pub const SUBSET_CAP_BITS: u32 = 12;

/// Outcome of a tell-tale search for one member.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TellTaleReport {
    pub index: Nat,
    /// First subset (in size-then-lex order) with no blocking member.
    pub candidate: Option<BTreeSet<Nat>>,
    /// For each examined subset that was blocked, the least blocking member.
    pub blockers: Vec<(BTreeSet<Nat>, Nat)>,
    pub bounds: Bounds,
}

/// All subsets of `base` in size-then-lex order (lex over ascending element
/// lists), empty set first.
fn subsets_size_lex(base: &BTreeSet<Nat>) -> Vec<BTreeSet<Nat>> {
    let elems: Vec<Nat> = base.iter().copied().collect();
    let n = elems.len();
    let mut by_size: Vec<Vec<BTreeSet<Nat>>> = vec![Vec::new(); n + 1];
    for mask in 0u64..(1 << n) {
        let sub: BTreeSet<Nat> = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| elems[b]).collect();
        by_size[sub.len()].push(sub);
    }
    for group in &mut by_size {
        group.sort_by(|a, b| {
            let av: Vec<Nat> = a.iter().copied().collect();
            let bv: Vec<Nat> = b.iter().copied().collect();
            av.cmp(&bv)
        });
    }
    by_size.into_iter().flatten().collect()
}

struct BoundedView {
    columns: Vec<BTreeSet<Nat>>,
    target: BTreeSet<Nat>,
    candidates: Vec<BTreeSet<Nat>>,
}

fn bounded_view(fam: &Family, i: Nat, b: &Bounds, max_j: Nat) -> Result<BoundedView> {
    b.validate()?;
    let full = fam.column(i, b.stage);
    if full.is_empty() {
        return Err(Error::EmptyColumn { column: i, stage: b.stage });
    }
    let target: BTreeSet<Nat> = full.iter().copied().filter(|&x| x <= b.elem).collect();
    let base: BTreeSet<Nat> = target.iter().copied().filter(|&x| x < b.elem).collect();
    if base.len() as u32 > SUBSET_CAP_BITS {
        return Err(Error::SubsetCapExceeded { elements: base.len(), cap: SUBSET_CAP_BITS });
    }
    let columns = (0..=max_j)
        .map(|j| {
            fam.column(j, b.stage)
                .into_iter()
                .filter(|&x| x <= b.elem)
                .collect()
        })
        .collect();
    Ok(BoundedView { columns, target, candidates: subsets_size_lex(&base) })
}

impl BoundedView {
    /// Least member index that blocks `f`: the member contains `f`, sits
    /// inside the target, and misses some target element within the cap.
    fn blocker(&self, f: &BTreeSet<Nat>) -> Option<Nat> {
        self.columns.iter().enumerate().find_map(|(j, col)| {
            let proper = f.is_subset(col)
                && col.is_subset(&self.target)
                && self.target.difference(col).next().is_some();
            proper.then_some(j as Nat)
        })
    }
}

/// Search for a tell-tale candidate for member `i`, examining members up to
/// `max_j` as potential blockers.
///
/// Returns the first unblocked subset in size-then-lex order together with
/// the blocking evidence for every subset examined before it; when every
/// subset is blocked, the candidate is absent and the blockers list is the
/// complete map.
pub fn telltale_search(fam: &Family, i: Nat, b: &Bounds, max_j: Nat) -> Result<TellTaleReport> {
    let view = bounded_view(fam, i, b, max_j)?;
    let mut blockers = Vec::new();
    for f in &view.candidates {
        match view.blocker(f) {
            Some(j) => blockers.push((f.clone(), j)),
            None => {
                return Ok(TellTaleReport {
                    index: i,
                    candidate: Some(f.clone()),
                    blockers,
                    bounds: *b,
                })
            }
        }
    }
    Ok(TellTaleReport { index: i, candidate: None, blockers, bounds: *b })
}

/// The contrapositive direction: a complete blocking map, if one exists.
///
/// Present exactly when every candidate subset has a blocking member —
/// evidence at bounds against learnability of the family through member `i`.
pub fn telltale_refute(
    fam: &Family,
    i: Nat,
    b: &Bounds,
    max_j: Nat,
) -> Result<Option<Vec<(BTreeSet<Nat>, Nat)>>> {
    let view = bounded_view(fam, i, b, max_j)?;
    let mut map = Vec::new();
    for f in &view.candidates {
        match view.blocker(f) {
            Some(j) => map.push((f.clone(), j)),
            None => return Ok(None),
        }
    }
    Ok(Some(map))
}
