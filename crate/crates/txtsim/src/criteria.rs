//! Finite-horizon verdict engines for the four identification criteria, plus
//! bounded set comparison, learner totalization, and the evaluator for
//! stage-approximated texts.
//!
//! Limit quantifiers cannot be decided, so every judgment here is issued *at
//! bounds* and says so: a [`Verdict`] records the bounds it was computed at
//! and carries a witness that replays. No monotonicity under bound growth is
//! claimed anywhere.
//!
//! The stability window `w` stands in for "cofinitely many": a hypothesis
//! stream counts as settled when its last change happened at least `w`
//! positions before the horizon.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::kernel::{
    ApproxText, Code, Hypothesis, Learner, Nat, Registry, Stage, StageSet, TextPrefix,
};
use crate::{Error, Result};

/// Finite truncation parameters for all evaluators.
///
/// `horizon` is the prefix length examined, `elem` the largest element
/// compared, `stage` the stage at which sets are evaluated, and `window` the
/// trailing stability window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub horizon: u64,
    pub elem: Nat,
    pub stage: Stage,
    pub window: u64,
}

impl Bounds {
    pub fn new(horizon: u64, elem: Nat, stage: Stage, window: u64) -> Result<Self> {
        let b = Bounds { horizon, elem, stage, window };
        b.validate()?;
        Ok(b)
    }

    /// Window defaults to `⌈horizon/5⌉`.
    pub fn with_default_window(horizon: u64, elem: Nat, stage: Stage) -> Result<Self> {
        Bounds::new(horizon, elem, stage, horizon.div_ceil(5).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("horizon", self.horizon),
            ("elem", self.elem),
            ("stage", self.stage),
            ("window", self.window),
        ] {
            if v < 1 {
                problems.push(format!("{name} must be >= 1, got {v}"));
            }
        }
        if self.window > self.horizon {
            problems.push(format!(
                "window ({}) must not exceed horizon ({})",
                self.window, self.horizon
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidBounds(problems.join("; ")))
        }
    }

    /// The half-bounds used by the TxtEx* stabilization check: element and
    /// stage bounds halve, horizon and window stay.
    pub fn halved(&self) -> Bounds {
        Bounds {
            horizon: self.horizon,
            elem: (self.elem / 2).max(1),
            stage: (self.stage / 2).max(1),
            window: self.window,
        }
    }
}

/// The four identification criteria.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// First guess must be correct.
    Fin,
    /// Hypotheses converge to a single correct code.
    Ex,
    /// Cofinitely many hypotheses code the right set; codes may differ.
    Bc,
    /// Hypotheses converge to a code correct up to finite difference.
    ExStar,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Criterion::Fin => "TxtFin",
            Criterion::Ex => "TxtEx",
            Criterion::Bc => "TxtBC",
            Criterion::ExStar => "TxtEx*",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Verified,
    Refuted,
    Inconclusive,
}

/// Replayable evidence attached to a verdict: the position and hypothesis it
/// hinges on, the least discrepancy element if one was found, and a short
/// machine-independent note.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<Hypothesis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrepancy: Option<Nat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A bounded-horizon judgment. Semantics are explicitly at-bounds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub witness: Witness,
    pub bounds: Bounds,
}

/// Result of a bounded set comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundedCmp {
    Equal,
    /// Least element of the bounded symmetric difference.
    Differ(Nat),
}

/// Compare the set coded by `h` with `target`, both evaluated at
/// `bounds.stage` and restricted to `[0, bounds.elem]`.
pub fn bounded_eq(reg: &Registry, h: Code, target: &StageSet, bounds: &Bounds) -> Result<BoundedCmp> {
    let diff = bounded_symdiff(reg, h, target, bounds)?;
    Ok(match diff.first() {
        None => BoundedCmp::Equal,
        Some(&x) => BoundedCmp::Differ(x),
    })
}

/// Symmetric difference of the bounded evaluations, ascending.
pub fn bounded_symdiff(
    reg: &Registry,
    h: Code,
    target: &StageSet,
    bounds: &Bounds,
) -> Result<BTreeSet<Nat>> {
    let coded = reg.lookup(h)?.bounded(bounds.stage, bounds.elem);
    let tgt = target.bounded(bounds.stage, bounds.elem);
    Ok(coded.symmetric_difference(&tgt).copied().collect())
}

/// The hypothesis stream of `m` on `sigma`: positions `0..=horizon`, each
/// call budgeted at the prefix length.
pub fn hypothesis_stream(m: &Learner, sigma: &TextPrefix, horizon: u64) -> Vec<Hypothesis> {
    (0..=horizon)
        .map(|n| m.hypothesis(&sigma.take(n as usize), n))
        .collect()
}

/// Last position at which the stream's value differs from its predecessor
/// (0 when the stream never changes).
fn last_change(stream: &[Hypothesis]) -> u64 {
    stream
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, _)| i as u64 + 1)
        .next_back()
        .unwrap_or(0)
}

fn check_preconditions(sigma: &TextPrefix, target: &StageSet, b: &Bounds) -> Result<()> {
    b.validate()?;
    if (sigma.len() as u64) < b.horizon {
        return Err(Error::PrefixTooShort { got: sigma.len(), want: b.horizon });
    }
    let allowed = target.eval_set(b.stage);
    if let Some(&bad) = sigma.content().iter().find(|x| !allowed.contains(x)) {
        return Err(Error::ContentEscapesTarget { symbol: bad, stage: b.stage });
    }
    Ok(())
}

/// Evaluate one criterion for learner `m` on prefix `sigma` against `target`.
///
/// Preconditions (violations are errors, never refutations): the prefix must
/// reach the horizon, and its content must lie inside the target at
/// `bounds.stage` — the criteria quantify only over texts *for* the set.
pub fn identify(
    reg: &Registry,
    criterion: Criterion,
    m: &Learner,
    sigma: &TextPrefix,
    target: &StageSet,
    bounds: &Bounds,
) -> Result<Verdict> {
    check_preconditions(sigma, target, bounds)?;
    let stream = hypothesis_stream(m, sigma, bounds.horizon);
    let verdict = |outcome, witness| Verdict { outcome, witness, bounds: *bounds };

    match criterion {
        Criterion::Fin => {
            // Judge only the first guess; later outputs are out of scope.
            let Some(n) = stream.iter().position(Hypothesis::is_guess) else {
                return Ok(verdict(
                    Outcome::Inconclusive,
                    Witness { note: Some("no guess within horizon".into()), ..Default::default() },
                ));
            };
            let code = stream[n].code().expect("guess has a code");
            let w = Witness {
                position: Some(n as u64),
                hypothesis: Some(stream[n]),
                ..Default::default()
            };
            match bounded_eq(reg, code, target, bounds)? {
                BoundedCmp::Equal => Ok(verdict(Outcome::Verified, w)),
                BoundedCmp::Differ(x) => Ok(verdict(
                    Outcome::Refuted,
                    Witness { discrepancy: Some(x), ..w },
                )),
            }
        }
        Criterion::Ex => {
            let n_star = last_change(&stream);
            if bounds.horizon - n_star < bounds.window {
                return Ok(verdict(
                    Outcome::Inconclusive,
                    Witness {
                        position: Some(n_star),
                        note: Some("last hypothesis change is inside the stability window".into()),
                        ..Default::default()
                    },
                ));
            }
            let stable = stream[n_star as usize];
            let w = Witness {
                position: Some(n_star),
                hypothesis: Some(stable),
                ..Default::default()
            };
            let Some(code) = stable.code() else {
                return Ok(verdict(
                    Outcome::Refuted,
                    Witness { note: Some("stream settled on no-guess".into()), ..w },
                ));
            };
            match bounded_eq(reg, code, target, bounds)? {
                BoundedCmp::Equal => Ok(verdict(Outcome::Verified, w)),
                BoundedCmp::Differ(x) => Ok(verdict(
                    Outcome::Refuted,
                    Witness { discrepancy: Some(x), ..w },
                )),
            }
        }
        Criterion::Bc => {
            // Every hypothesis in the trailing window must code the target.
            for n in (bounds.horizon - bounds.window + 1)..=bounds.horizon {
                let h = stream[n as usize];
                let w = Witness {
                    position: Some(n),
                    hypothesis: Some(h),
                    ..Default::default()
                };
                let Some(code) = h.code() else {
                    return Ok(verdict(
                        Outcome::Refuted,
                        Witness { note: Some("no-guess inside the window".into()), ..w },
                    ));
                };
                if let BoundedCmp::Differ(x) = bounded_eq(reg, code, target, bounds)? {
                    return Ok(verdict(
                        Outcome::Refuted,
                        Witness { discrepancy: Some(x), ..w },
                    ));
                }
            }
            Ok(verdict(
                Outcome::Verified,
                Witness {
                    position: Some(bounds.horizon),
                    hypothesis: Some(stream[bounds.horizon as usize]),
                    ..Default::default()
                },
            ))
        }
        Criterion::ExStar => {
            let n_star = last_change(&stream);
            if bounds.horizon - n_star < bounds.window {
                return Ok(verdict(
                    Outcome::Inconclusive,
                    Witness {
                        position: Some(n_star),
                        note: Some("last hypothesis change is inside the stability window".into()),
                        ..Default::default()
                    },
                ));
            }
            let stable = stream[n_star as usize];
            let w = Witness {
                position: Some(n_star),
                hypothesis: Some(stable),
                ..Default::default()
            };
            let Some(code) = stable.code() else {
                return Ok(verdict(
                    Outcome::Refuted,
                    Witness { note: Some("stream settled on no-guess".into()), ..w },
                ));
            };
            // The finite-difference requirement is vacuous at fixed bounds;
            // instead demand that the difference stopped growing between the
            // half-bounds and the full bounds.
            let full = bounded_symdiff(reg, code, target, bounds)?;
            let half = bounded_symdiff(reg, code, target, &bounds.halved())?;
            if full == half {
                return Ok(verdict(Outcome::Verified, w));
            }
            let grew: BTreeSet<Nat> = full.difference(&half).copied().collect();
            if let Some(&x) = grew.iter().find(|&&x| x > bounds.elem / 2) {
                return Ok(verdict(
                    Outcome::Refuted,
                    Witness {
                        discrepancy: Some(x),
                        note: Some("difference still growing past the half element bound".into()),
                        ..w
                    },
                ));
            }
            Ok(verdict(
                Outcome::Inconclusive,
                Witness {
                    note: Some(
                        "difference moved below the half bounds; stabilization unresolved".into(),
                    ),
                    ..w
                },
            ))
        }
    }
}

/// Totalize a learner: on input `sigma`, answer as the underlying machine
/// does on the longest initial segment it halts on within `|sigma|` steps,
/// and fall back to code 0 when it halts nowhere.
pub fn totalize(m: &Learner) -> Learner {
    let inner = m.clone();
    Learner::total(m.id(), move |sigma| {
        let budget = sigma.len() as u64;
        for n in (0..=sigma.len()).rev() {
            if let Some(h) = inner.respond(&sigma.take(n), budget) {
                return h;
            }
        }
        Hypothesis::Guess(Code::EMPTY)
    })
}

/// Outcome of evaluating a learner against a stage-approximated text.
///
/// `xi_ok` says the approximation stabilizes onto the target over the
/// trailing half of the stages; `psi_ok` that some length exists past which
/// hypothesis content is stable across longer stabilized prefixes; `phi_ok`
/// that every hypothesis is right or later revised on a stabilized prefix.
/// A failed flag may reflect bound exhaustion, so the verdict is only ever
/// `Verified` or `Inconclusive`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub target_index: Nat,
    pub xi_ok: bool,
    pub psi_ok: bool,
    pub phi_ok: bool,
    pub verdict: Outcome,
}

fn hyp_content(
    reg: &Registry,
    h: Hypothesis,
    stage: Stage,
    elem: Nat,
) -> Result<Option<BTreeSet<Nat>>> {
    match h.code() {
        None => Ok(None),
        Some(c) => Ok(Some(reg.lookup(c)?.bounded(stage, elem))),
    }
}

/// Evaluate the three stage-approximation conditions at bounds.
pub fn eval_on_approx(
    reg: &Registry,
    m: &Learner,
    f: &ApproxText,
    target: &StageSet,
    target_index: Nat,
    b: &Bounds,
) -> Result<ApproxReport> {
    b.validate()?;
    let t = b.horizon;
    let s_max = b.stage;

    // Convergence: every position n <= horizon holds one value over the last
    // half of the stages, and those values agree with the target up to the
    // element bound.
    let half = s_max / 2;
    let mut stabilized = true;
    let mut values: BTreeSet<Nat> = BTreeSet::new();
    'positions: for n in 0..=t {
        let v = f.value(half, n);
        for s in half..=s_max {
            if f.value(s, n) != v {
                stabilized = false;
                break 'positions;
            }
        }
        values.insert(v);
    }
    let xi_ok = stabilized && {
        let tgt = target.bounded(s_max, b.elem);
        let seen: BTreeSet<Nat> = values.iter().copied().filter(|&x| x <= b.elem).collect();
        seen == tgt
    };

    // Hypothesis contents at every (stage, length) rectangle point, budgeted
    // at the prefix length.
    let mut content: Vec<Vec<Option<BTreeSet<Nat>>>> = Vec::with_capacity(s_max as usize + 1);
    for s in 0..=s_max {
        let mut row = Vec::with_capacity(t as usize + 1);
        for n in 0..=t {
            let h = m.hypothesis(&f.prefix(s, n), n);
            row.push(hyp_content(reg, h, b.stage, b.elem)?);
        }
        content.push(row);
    }
    let prefix_stable_from = |s: Stage, n: u64| -> bool {
        let p = f.prefix(s, n);
        (s..=s_max).all(|s2| f.prefix(s2, n) == p)
    };

    // Settling: some length n such that for every longer n' and stage s, the
    // hypotheses on the two prefixes code the same set, unless that longer
    // prefix still changes at a later stage. The settling length must leave
    // the stability window ahead of it, otherwise the check is vacuous at the
    // horizon.
    let psi_ok = (0..=t.saturating_sub(b.window)).any(|n| {
        (n + 1..=t).all(|n2| {
            (0..=s_max).all(|s| {
                content[s as usize][n as usize] == content[s as usize][n2 as usize]
                    || !prefix_stable_from(s, n2)
            })
        })
    });

    // Correction: each (n, s) is either already correct or followed by a
    // content change on a longer prefix that has stabilized.
    let tgt = target.bounded(b.stage, b.elem);
    let phi_ok = (0..=t).all(|n| {
        (0..=s_max).all(|s| {
            let here = &content[s as usize][n as usize];
            if here.as_ref() == Some(&tgt) {
                return true;
            }
            (n + 1..=t).any(|n2| {
                (s + 1..=s_max).any(|s2| {
                    content[s2 as usize][n2 as usize] != *here && prefix_stable_from(s2, n2)
                })
            })
        })
    });

    let verdict = if xi_ok && psi_ok && phi_ok {
        Outcome::Verified
    } else {
        Outcome::Inconclusive
    };
    Ok(ApproxReport { target_index, xi_ok, psi_ok, phi_ok, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::pair;

    fn bounds(t: u64, e: Nat, s: Stage, w: u64) -> Bounds {
        Bounds::new(t, e, s, w).unwrap()
    }

    fn const_learner(id: u64, c: Code) -> Learner {
        Learner::total(id, move |_| Hypothesis::Guess(c))
    }

    #[test]
    fn bounded_eq_empty_sets_agree() {
        let mut reg = Registry::new();
        let h = reg.register(StageSet::empty("a")).unwrap();
        let cmp = bounded_eq(&reg, h, &StageSet::empty("b"), &bounds(5, 10, 10, 1)).unwrap();
        assert_eq!(cmp, BoundedCmp::Equal);
    }

    #[test]
    fn bounded_eq_reports_least_discrepancy() {
        let mut reg = Registry::new();
        let h = reg.register(StageSet::constant("a", [0, 1])).unwrap();
        let tgt = StageSet::constant("b", [0, 2]);
        let cmp = bounded_eq(&reg, h, &tgt, &bounds(5, 5, 10, 1)).unwrap();
        assert_eq!(cmp, BoundedCmp::Differ(1));
    }

    #[test]
    fn bounded_eq_ray_versus_short_segment() {
        // Ray from 0 against the two-element segment {0,1}: least missing
        // element inside the bound is 2.
        let mut reg = Registry::new();
        let h = reg.register(StageSet::interval("l0", 0)).unwrap();
        let tgt = StageSet::constant("h0", [0, 1]);
        let cmp = bounded_eq(&reg, h, &tgt, &bounds(5, 5, 100, 1)).unwrap();
        assert_eq!(cmp, BoundedCmp::Differ(2));
    }

    #[test]
    fn bounded_eq_unknown_code_is_an_error() {
        let reg = Registry::new();
        let mut other = Registry::new();
        let h = other.register(StageSet::empty("x")).unwrap();
        assert!(matches!(
            bounded_eq(&reg, h, &StageSet::empty("t"), &bounds(5, 5, 5, 1)),
            Err(Error::UnknownCode(_))
        ));
    }

    #[test]
    fn symdiff_identical_and_shifted() {
        let mut reg = Registry::new();
        let a = reg.register(StageSet::constant("a", [0, 1])).unwrap();
        let b = bounds(5, 10, 10, 1);
        assert_eq!(
            bounded_symdiff(&reg, a, &StageSet::constant("t", [0, 1]), &b).unwrap(),
            BTreeSet::new()
        );
        assert_eq!(
            bounded_symdiff(&reg, a, &StageSet::constant("t", [1, 2]), &b).unwrap(),
            BTreeSet::from([0, 2])
        );
    }

    #[test]
    fn symdiff_vanishes_when_the_segment_catches_the_ray() {
        // Segment sized by an infinite enumeration agrees with the ray inside
        // the bounds once the stage is deep enough.
        let mut reg = Registry::new();
        let h1 = StageSet::from_fn("h1", |s| (1..=2 + s).collect());
        let c = reg.register(h1).unwrap();
        let l1 = StageSet::interval("l1", 1);
        let d = bounded_symdiff(&reg, c, &l1, &bounds(5, 20, 40, 1)).unwrap();
        assert_eq!(d, BTreeSet::new());
    }

    #[test]
    fn self_symdiff_is_empty_at_any_bounds() {
        let mut reg = Registry::new();
        let sets = [
            StageSet::interval("i", 3),
            StageSet::constant("c", [5, 9]),
            StageSet::empty("e"),
        ];
        let codes: Vec<Code> = sets.iter().map(|s| reg.register(s.clone()).unwrap()).collect();
        for (c, s) in codes.iter().zip(&sets) {
            for b in [bounds(3, 7, 9, 1), bounds(10, 100, 2, 4)] {
                assert!(bounded_symdiff(&reg, *c, s, &b).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn fin_no_guess_forever_is_inconclusive() {
        let reg = Registry::new();
        let m = Learner::total(0, |_| Hypothesis::NoGuess);
        let sigma = TextPrefix::new(vec![4; 20]);
        let tgt = StageSet::constant("t", [4]);
        let v = identify(&reg, Criterion::Fin, &m, &sigma, &tgt, &bounds(20, 10, 10, 2)).unwrap();
        assert_eq!(v.outcome, Outcome::Inconclusive);
    }

    #[test]
    fn fin_judges_only_the_first_guess() {
        let mut reg = Registry::new();
        let good = reg.register(StageSet::constant("t", [4])).unwrap();
        let bad = reg.register(StageSet::constant("u", [5])).unwrap();
        // First guess correct at position 3, later guesses wrong.
        let m = Learner::total(0, move |p| {
            if p.len() < 3 {
                Hypothesis::NoGuess
            } else if p.len() == 3 {
                Hypothesis::Guess(good)
            } else {
                Hypothesis::Guess(bad)
            }
        });
        let sigma = TextPrefix::new(vec![4; 20]);
        let tgt = StageSet::constant("t", [4]);
        let v = identify(&reg, Criterion::Fin, &m, &sigma, &tgt, &bounds(20, 10, 10, 2)).unwrap();
        assert_eq!(v.outcome, Outcome::Verified);
        assert_eq!(v.witness.position, Some(3));
    }

    #[test]
    fn ex_flip_flop_is_inconclusive_at_any_window() {
        let mut reg = Registry::new();
        let a = reg.register(StageSet::constant("a", [0])).unwrap();
        let b = reg.register(StageSet::constant("b", [1])).unwrap();
        let m = Learner::total(0, move |p| {
            Hypothesis::Guess(if p.len() % 2 == 0 { a } else { b })
        });
        let sigma = TextPrefix::new(vec![0; 30]);
        let tgt = StageSet::constant("t", [0]);
        for w in 2..6 {
            let v = identify(&reg, Criterion::Ex, &m, &sigma, &tgt, &bounds(30, 5, 5, w)).unwrap();
            assert_eq!(v.outcome, Outcome::Inconclusive, "window {w}");
        }
    }

    #[test]
    fn ex_settles_and_verifies() {
        let mut reg = Registry::new();
        let good = reg.register(StageSet::constant("t", [7])).unwrap();
        let m = Learner::total(0, move |p| {
            if p.len() < 4 {
                Hypothesis::NoGuess
            } else {
                Hypothesis::Guess(good)
            }
        });
        let sigma = TextPrefix::new(vec![7; 20]);
        let tgt = StageSet::constant("t", [7]);
        let v = identify(&reg, Criterion::Ex, &m, &sigma, &tgt, &bounds(20, 10, 10, 5)).unwrap();
        assert_eq!(v.outcome, Outcome::Verified);
        assert_eq!(v.witness.position, Some(4));
    }

    #[test]
    fn ex_settling_on_no_guess_refutes() {
        let reg = Registry::new();
        let m = Learner::total(0, |_| Hypothesis::NoGuess);
        let sigma = TextPrefix::new(vec![4; 20]);
        let tgt = StageSet::constant("t", [4]);
        let v = identify(&reg, Criterion::Ex, &m, &sigma, &tgt, &bounds(20, 10, 10, 2)).unwrap();
        assert_eq!(v.outcome, Outcome::Refuted);
    }

    #[test]
    fn bc_window_monotone_in_window_size() {
        // Verified at window w implies verified at any smaller window.
        let mut reg = Registry::new();
        let good = reg.register(StageSet::constant("t", [2])).unwrap();
        let bad = reg.register(StageSet::constant("u", [3])).unwrap();
        let m = Learner::total(0, move |p| {
            Hypothesis::Guess(if p.len() < 10 { bad } else { good })
        });
        let sigma = TextPrefix::new(vec![2; 24]);
        let tgt = StageSet::constant("t", [2]);
        let v = identify(&reg, Criterion::Bc, &m, &sigma, &tgt, &bounds(24, 5, 5, 14)).unwrap();
        assert_eq!(v.outcome, Outcome::Verified);
        for w in 1..14 {
            let v = identify(&reg, Criterion::Bc, &m, &sigma, &tgt, &bounds(24, 5, 5, w)).unwrap();
            assert_eq!(v.outcome, Outcome::Verified, "window {w}");
        }
    }

    #[test]
    fn bc_refutes_on_wrong_hypothesis_in_window() {
        let mut reg = Registry::new();
        let bad = reg.register(StageSet::constant("u", [3])).unwrap();
        let m = const_learner(0, bad);
        let sigma = TextPrefix::new(vec![2; 10]);
        let tgt = StageSet::constant("t", [2]);
        let v = identify(&reg, Criterion::Bc, &m, &sigma, &tgt, &bounds(10, 5, 5, 3)).unwrap();
        assert_eq!(v.outcome, Outcome::Refuted);
        assert_eq!(v.witness.discrepancy, Some(2));
    }

    #[test]
    fn exstar_verifies_stable_finite_difference() {
        let mut reg = Registry::new();
        // Code names {0..40}; target misses {3}: difference {3} at half and
        // full bounds alike.
        let c = reg.register(StageSet::constant("a", 0..=40)).unwrap();
        let tgt = StageSet::constant("t", (0..=40).filter(|&x| x != 3));
        let m = const_learner(0, c);
        let sigma: TextPrefix = (0..=40).filter(|&x| x != 3).cycle().take(50).collect();
        let v =
            identify(&reg, Criterion::ExStar, &m, &sigma, &tgt, &bounds(50, 40, 40, 5)).unwrap();
        assert_eq!(v.outcome, Outcome::Verified);
    }

    #[test]
    fn exstar_refutes_growing_difference() {
        let mut reg = Registry::new();
        // Code names the evens; target is the full ray: the difference keeps
        // acquiring elements past the half element bound.
        let c = reg
            .register(StageSet::from_fn("evens", |s| (0..=s).map(|x| 2 * x).collect()))
            .unwrap();
        let tgt = StageSet::interval("l0", 0);
        let m = const_learner(0, c);
        let sigma: TextPrefix = (0..=40).cycle().take(50).collect();
        let v =
            identify(&reg, Criterion::ExStar, &m, &sigma, &tgt, &bounds(50, 40, 80, 5)).unwrap();
        assert_eq!(v.outcome, Outcome::Refuted);
        assert!(v.witness.discrepancy.unwrap() > 20);
    }

    #[test]
    fn precondition_violations_are_errors_not_refutations() {
        let reg = Registry::new();
        let m = Learner::total(0, |_| Hypothesis::NoGuess);
        let tgt = StageSet::constant("t", [4]);
        let short = TextPrefix::new(vec![4; 3]);
        assert!(matches!(
            identify(&reg, Criterion::Fin, &m, &short, &tgt, &bounds(10, 5, 5, 2)),
            Err(Error::PrefixTooShort { .. })
        ));
        let escaping = TextPrefix::new(vec![4, 9, 4, 4, 4, 4, 4, 4, 4, 4]);
        assert!(matches!(
            identify(&reg, Criterion::Fin, &m, &escaping, &tgt, &bounds(10, 5, 5, 2)),
            Err(Error::ContentEscapesTarget { symbol: 9, .. })
        ));
    }

    #[test]
    fn identify_is_deterministic_including_witnesses() {
        let mut reg = Registry::new();
        let c = reg.register(StageSet::constant("a", [0, 1])).unwrap();
        let m = const_learner(0, c);
        let sigma = TextPrefix::new(vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
        let tgt = StageSet::constant("t", [0, 1]);
        for crit in [Criterion::Fin, Criterion::Ex, Criterion::Bc, Criterion::ExStar] {
            let a = identify(&reg, crit, &m, &sigma, &tgt, &bounds(10, 5, 5, 2)).unwrap();
            let b = identify(&reg, crit, &m, &sigma, &tgt, &bounds(10, 5, 5, 2)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fin_guess_locus_is_stable_under_horizon_growth() {
        let mut reg = Registry::new();
        let c = reg.register(StageSet::constant("a", [0])).unwrap();
        let m = Learner::total(0, move |p| {
            if p.len() >= 5 {
                Hypothesis::Guess(c)
            } else {
                Hypothesis::NoGuess
            }
        });
        let sigma = TextPrefix::new(vec![0; 40]);
        let tgt = StageSet::constant("t", [0]);
        let mut locus = None;
        for t in [10, 20, 40] {
            let v = identify(&reg, Criterion::Fin, &m, &sigma, &tgt, &bounds(t, 5, 5, 2)).unwrap();
            let at = v.witness.position;
            if let Some(prev) = locus {
                assert_eq!(at, prev);
            }
            locus = Some(at);
        }
        assert_eq!(locus, Some(Some(5)));
    }

    #[test]
    fn totalize_agrees_with_fast_total_learners() {
        let mut reg = Registry::new();
        let c = reg.register(StageSet::constant("a", [1])).unwrap();
        let m = const_learner(0, c);
        let hat = totalize(&m);
        for len in 0..10 {
            let p = TextPrefix::new(vec![1; len]);
            assert_eq!(hat.hypothesis(&p, 0), m.hypothesis(&p, 0));
        }
    }

    #[test]
    fn totalize_falls_back_to_code_zero() {
        let m = Learner::budgeted(0, |_, _| None);
        let hat = totalize(&m);
        let p = TextPrefix::new(vec![1, 2, 3]);
        assert_eq!(hat.hypothesis(&p, 0), Hypothesis::Guess(Code::EMPTY));
    }

    #[test]
    fn totalize_picks_the_longest_halting_prefix() {
        // Halts exactly on even-length inputs: the totalization answers as
        // the machine does on the longest even prefix.
        let mut reg = Registry::new();
        let mut codes = Vec::new();
        for n in 0..6u64 {
            codes.push(reg.register(StageSet::constant(format!("s{n}"), [n])).unwrap());
        }
        let c2 = codes.clone();
        let m = Learner::budgeted(0, move |p, _| {
            (p.len() % 2 == 0).then(|| Hypothesis::Guess(c2[p.len()]))
        });
        let hat = totalize(&m);
        for len in 0..6 {
            let p = TextPrefix::new(vec![0; len]);
            let expect = codes[len - len % 2];
            assert_eq!(hat.hypothesis(&p, 0), Hypothesis::Guess(expect), "len {len}");
        }
    }

    #[test]
    fn approx_constant_text_with_correct_learner_passes_all_three() {
        let mut reg = Registry::new();
        let tgt = StageSet::constant("t", [0, 1, 2]);
        let c = reg.register(tgt.clone()).unwrap();
        let m = const_learner(0, c);
        let f = ApproxText::constant(TextPrefix::new(vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 0]));
        let r = eval_on_approx(&reg, &m, &f, &tgt, 0, &bounds(9, 10, 10, 2)).unwrap();
        assert!(r.xi_ok && r.psi_ok && r.phi_ok);
        assert_eq!(r.verdict, Outcome::Verified);
    }

    #[test]
    fn approx_alternating_position_never_stabilizes() {
        let mut reg = Registry::new();
        let tgt = StageSet::constant("t", [0, 1]);
        let c = reg.register(tgt.clone()).unwrap();
        let m = const_learner(0, c);
        let f = ApproxText::from_fn(|s, n| if n == 0 { s % 2 } else { 1 });
        let r = eval_on_approx(&reg, &m, &f, &tgt, 0, &bounds(6, 10, 10, 2)).unwrap();
        assert!(!r.xi_ok);
        assert_eq!(r.verdict, Outcome::Inconclusive);
    }

    #[test]
    fn approx_flip_flop_learner_never_settles() {
        let mut reg = Registry::new();
        let tgt = StageSet::constant("t", [0, 1]);
        let a = reg.register(StageSet::constant("a", [0])).unwrap();
        let b = reg.register(StageSet::constant("b", [1])).unwrap();
        let m = Learner::total(0, move |p| {
            Hypothesis::Guess(if p.len() % 2 == 0 { a } else { b })
        });
        let f = ApproxText::constant(TextPrefix::new(vec![0, 1, 0, 1, 0, 1, 0]));
        let r = eval_on_approx(&reg, &m, &f, &tgt, 0, &bounds(6, 10, 10, 2)).unwrap();
        assert!(!r.psi_ok);
        assert_eq!(r.verdict, Outcome::Inconclusive);
    }

    #[test]
    fn verdicts_serialize_round_trip() {
        let v = Verdict {
            outcome: Outcome::Refuted,
            witness: Witness {
                position: Some(3),
                hypothesis: Some(Hypothesis::Guess(
                    Code::finite_index(pair(1, 2) as u128).unwrap(),
                )),
                discrepancy: Some(9),
                note: None,
            },
            bounds: bounds(10, 5, 5, 2),
        };
        let s = serde_json::to_string(&v).unwrap();
        let back: Verdict = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
