//! Interval-merged partial copies of a family member.
//!
//! Given a base family, a member index `n`, and a control set, the builder
//! fills column `i` with deeper and deeper finite pieces of member `n` as
//! longer intervals `[i, i+j]` show up inside the control set, merging all
//! columns spanned by an interval into one set. With a cofinite control set,
//! cofinitely many columns become full copies of the member; with a thin one
//! the columns stay shallow finite pieces. A pilot element (just above `n/2`)
//! is seeded into every touched column so none of them is empty.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::kernel::{pair, Code, Family, Hypothesis, Learner, Nat, Stage, StageSet};
use crate::{Error, Result};

use super::union_family;

/// Pilot element for member `n`: the least natural strictly above `n/2`.
fn pilot_of(n: Nat) -> Nat {
    n / 2 + 1
}

/// Maximal runs of consecutive naturals inside `set`.
fn runs(set: &BTreeSet<Nat>) -> Vec<(Nat, Nat)> {
    let mut out: Vec<(Nat, Nat)> = Vec::new();
    for &x in set {
        match out.last_mut() {
            Some((_, hi)) if *hi + 1 == x => *hi = x,
            _ => out.push((x, x)),
        }
    }
    out
}

/// Build the merged-copy family for member `n` of `base` under `control`,
/// running `stages` stages.
pub fn merged_copies_build(
    base: &Family,
    n: Nat,
    control: &StageSet,
    stages: u64,
) -> Result<Family> {
    if stages == 0 {
        return Err(Error::ZeroStageBudget);
    }
    let pilot = pilot_of(n);
    let mut columns: BTreeMap<Nat, BTreeSet<Nat>> = BTreeMap::new();
    let mut log: Vec<(Stage, Nat)> = Vec::new();
    for s in 0..=stages {
        let present: BTreeSet<Nat> = control.eval(s).into_iter().filter(|&i| i <= s).collect();
        for (lo, hi) in runs(&present) {
            // Depth of the piece grows with the run length; every column in
            // the run ends up identical.
            let mut merged: BTreeSet<Nat> = base.column(n, hi - lo);
            merged.insert(pilot);
            for i in lo..=hi {
                if let Some(prev) = columns.get(&i) {
                    merged.extend(prev.iter().copied());
                }
            }
            for i in lo..=hi {
                let col = columns.entry(i).or_default();
                for &x in &merged {
                    if col.insert(x) {
                        log.push((s, pair(i, x)));
                    }
                }
            }
        }
    }
    log.sort();
    let label = format!("merged[{}]", base.carrier().label());
    let arity = stages + 1;
    Ok(Family::new(
        StageSet::from_log(label, Arc::new(log), stages),
        Some(arity),
    ))
}

/// Assemble consecutive blocks of merged-copy families into one family.
///
/// Block `y` covers member indices from the previous cut point (0 for the
/// first block) through `cut_points[y]`, each built under `controls[y]`.
/// Blocks land in disjoint column ranges via the part/column pairing.
pub fn block_union_build(
    base: &Family,
    controls: &[StageSet],
    cut_points: &[Nat],
    stages: u64,
) -> Result<Family> {
    if cut_points.is_empty()
        || cut_points[0] == 0
        || cut_points.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::BadCutPoints(cut_points.to_vec()));
    }
    if controls.len() != cut_points.len() {
        return Err(Error::Other(format!(
            "{} control sets for {} cut points",
            controls.len(),
            cut_points.len()
        )));
    }
    let mut parts = Vec::new();
    for (y, &cut) in cut_points.iter().enumerate() {
        let lo = if y == 0 { 0 } else { cut_points[y - 1] };
        for n in lo..=cut {
            parts.push(merged_copies_build(base, n, &controls[y], stages)?);
        }
    }
    Ok(union_family(&parts))
}

/// A learner that splits on a pilot element: inputs containing it go to the
/// given machine, everything else is guessed to be exactly its own content.
///
/// Content with elements too large for a canonical finite code produces no
/// guess.
pub fn split_learner(pilot: Nat, m0: &Learner) -> Learner {
    let inner = m0.clone();
    Learner::budgeted(inner.id(), move |sigma, budget| {
        let content = sigma.content();
        if content.contains(&pilot) {
            inner.respond(sigma, budget)
        } else {
            match Code::finite(&content) {
                Ok(c) => Some(Hypothesis::Guess(c)),
                Err(_) => Some(Hypothesis::NoGuess),
            }
        }
    })
}
