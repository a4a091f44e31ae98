//! The ray family: interleaved rays and card-sized ray segments.
//!
//! For each registered control set `W_x`, the family holds two members built
//! over the ray starting at `x`: the full (stage-truncated) ray
//! `L_x = {x, x+1, ...}` at column `2x`, and the segment
//! `H_x = {x+n : n <= card(W_x at stage)}` at column `2x+1`. When `W_x` is
//! infinite the segment catches the ray inside any bounds; when it is finite
//! the two members differ. The paired learner classifies by the span of what
//! it has seen, which lets it be behaviorally correct while vacillating
//! between two codes on members where both are right.

use serde::{Deserialize, Serialize};

use crate::kernel::{pair, Code, Family, Hypothesis, Learner, Nat, Registry, StageSet};
use crate::Result;

/// Handle to a built ray family: the family itself plus the registered codes
/// its learner answers with.
#[derive(Clone, Debug)]
pub struct RayFamily {
    pub family: Family,
    pub control_sets: Vec<StageSet>,
    pub control_codes: Vec<Code>,
    /// Codes of the full rays `L_x` (columns `2x`).
    pub ray_codes: Vec<Code>,
    /// Codes of the sized segments `H_x` (columns `2x+1`).
    pub segment_codes: Vec<Code>,
}

impl RayFamily {
    pub fn arity(&self) -> u64 {
        2 * self.control_sets.len() as u64
    }

    /// The segment `H_x` as a stage set.
    pub fn segment(&self, x: usize) -> StageSet {
        segment_set(x as Nat, self.control_sets[x].clone())
    }

    /// The ray `L_x` as a stage set.
    pub fn ray(&self, x: usize) -> StageSet {
        StageSet::interval(format!("ray{x}"), x as Nat)
    }
}

fn segment_set(x: Nat, control: StageSet) -> StageSet {
    StageSet::new(
        format!("seg{x}"),
        move |s| {
            let card = control.cardinality(s);
            (x..=x + card).collect()
        },
        move |s| x + s + 1,
    )
}

/// Build the family over the given control sets, registering every control
/// set, ray, and segment.
pub fn ray_family(reg: &mut Registry, controls: &[StageSet]) -> Result<RayFamily> {
    let mut control_codes = Vec::new();
    let mut ray_codes = Vec::new();
    let mut segment_codes = Vec::new();
    for (x, w) in controls.iter().enumerate() {
        control_codes.push(reg.register(w.clone())?);
        ray_codes.push(reg.register(StageSet::interval(format!("ray{x}"), x as Nat))?);
        segment_codes.push(reg.register(segment_set(x as Nat, w.clone()))?);
    }
    let sets: Vec<StageSet> = controls.to_vec();
    let n = sets.len();
    let carrier = StageSet::from_fn("rays", move |s| {
        let mut out = Vec::new();
        for (x, w) in sets.iter().enumerate() {
            let x = x as Nat;
            for e in x..=x + s {
                out.push(pair(2 * x, e));
            }
            let card = w.cardinality(s);
            for e in x..=x + card {
                out.push(pair(2 * x + 1, e));
            }
        }
        out.sort();
        out
    });
    Ok(RayFamily {
        family: Family::new(carrier, Some(2 * n as u64)),
        control_sets: controls.to_vec(),
        control_codes,
        ray_codes,
        segment_codes,
    })
}

/// How the ray learner decides between the segment and the ray.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuessRule {
    /// Span of the observed content against the control set's cardinality.
    /// Converges behaviorally on every member.
    Cardinality,
    /// Span against the control set's greatest element. Misclassifies
    /// segments whose control set has max below its cardinality; kept for
    /// comparison runs.
    GreatestElement,
}

/// The span-based learner for a ray family.
///
/// On a nonempty prefix with least element `x0` and greatest `x1`, it guesses
/// the segment code when the span `x1 - x0` is within the rule's measure of
/// `W_x0` at stage `|sigma|`, and the ray code otherwise. Empty prefixes and
/// least elements outside the family produce no guess.
pub fn ray_learner(fam: &RayFamily, rule: GuessRule) -> Learner {
    let controls = fam.control_sets.clone();
    let rays = fam.ray_codes.clone();
    let segments = fam.segment_codes.clone();
    Learner::total(1, move |sigma| {
        let content = sigma.content();
        let (Some(&x0), Some(&x1)) = (content.first(), content.last()) else {
            return Hypothesis::NoGuess;
        };
        let Some(w) = controls.get(x0 as usize) else {
            return Hypothesis::NoGuess;
        };
        let stage = sigma.len() as u64;
        let span = x1 - x0;
        let segment_wins = match rule {
            GuessRule::Cardinality => span <= w.cardinality(stage),
            GuessRule::GreatestElement => {
                let y1 = w.eval(stage).last().copied().unwrap_or(0);
                y1 > span
            }
        };
        if segment_wins {
            Hypothesis::Guess(segments[x0 as usize])
        } else {
            Hypothesis::Guess(rays[x0 as usize])
        }
    })
}
