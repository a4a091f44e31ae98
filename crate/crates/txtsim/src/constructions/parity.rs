//! The active-pair family machine with parity-split witnesses.
//!
//! Driven by one learner, the machine grows a base set `A` and a sequence of
//! set pairs `(L_1, R_1), (L_2, R_2), ...`, at most one pair active at a
//! time. While the learner keeps changing its hypothesis on short extensions
//! of the current string, the string and the base set grow and any active
//! pair is cancelled (receiving a distinguishing marker). While the learner
//! sits still, the active pair receives matched fresh witnesses: an even
//! working number into the left set, its odd successor into the right set. A
//! control set releases witness pairs by index into both members, healing the
//! split; indices the control never covers leave a permanent even/odd
//! separation between the two members.
//!
//! Columns 0 and 1 of the element space are reserved for markers (identity
//! and cancellation, respectively). All working traffic happens in the
//! complement, addressed through its increasing enumeration ("working
//! copies"), so evenness of witnesses is evenness of the copy index.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::kernel::{pair, unpair, Code, Family, Hypothesis, Learner, Nat, Registry, Stage, StageSet, TextPrefix};
use crate::{Error, Result};

use super::{InvariantViolation, StageMachine, StageSummary};

/// Length cap for the stage-0 seed search.
const SEED_LEN_CAP: usize = 2;
/// Symbol-space cap for the stage-0 seed search.
const SEED_SYMBOLS: u64 = 40;

fn is_marker(v: Nat) -> bool {
    unpair(v).0 <= 1
}

fn learner_marker(m_id: u64) -> Nat {
    pair(0, pair(m_id, 0))
}

fn control_marker(e_id: u64) -> Nat {
    pair(0, pair(e_id, 1))
}

fn base_marker() -> Nat {
    pair(0, pair(0, 3))
}

fn cancel_marker(n: u64, side: u64) -> Nat {
    pair(1, pair(n, side))
}

/// The increasing enumeration of non-marker naturals.
#[derive(Default)]
struct WorkingCopy {
    raws: Vec<Nat>,
}

impl WorkingCopy {
    fn raw(&mut self, copy: usize) -> Nat {
        let mut next = self.raws.last().map_or(0, |&r| r + 1);
        while self.raws.len() <= copy {
            if !is_marker(next) {
                self.raws.push(next);
            }
            next += 1;
        }
        self.raws[copy]
    }

    fn copy_of(&mut self, raw: Nat) -> Option<usize> {
        if is_marker(raw) {
            return None;
        }
        while self.raws.last().map_or(true, |&r| r < raw) {
            let n = self.raws.len();
            self.raw(n);
        }
        self.raws.binary_search(&raw).ok()
    }
}

#[derive(Clone, Debug)]
struct PairState {
    left: BTreeSet<Nat>,
    right: BTreeSet<Nat>,
    left_log: Vec<(Stage, Nat)>,
    right_log: Vec<(Stage, Nat)>,
    /// Copy indices of the even witnesses handed to this pair, in order.
    witness_points: Vec<usize>,
    cancelled: bool,
}

pub struct ParityMachine {
    m: Learner,
    m_id: u64,
    e_set: StageSet,
    e_id: u64,
    stage: u64,
    degenerate: bool,
    base: BTreeSet<Nat>,
    base_log: Vec<(Stage, Nat)>,
    pairs: Vec<PairState>,
    active: Option<usize>,
    sigma: TextPrefix,
    sigma_lengths: Vec<usize>,
    used_copies: BTreeSet<usize>,
    wc: WorkingCopy,
    summaries: Vec<StageSummary>,
    enumerated: u64,
}

impl ParityMachine {
    pub fn new(m: &Learner, m_id: u64, e_set: &StageSet, e_id: u64) -> Self {
        let mut machine = ParityMachine {
            m: m.clone(),
            m_id,
            e_set: e_set.clone(),
            e_id,
            stage: 0,
            degenerate: false,
            base: BTreeSet::new(),
            base_log: Vec::new(),
            pairs: Vec::new(),
            active: None,
            sigma: TextPrefix::empty(),
            sigma_lengths: Vec::new(),
            used_copies: BTreeSet::new(),
            wc: WorkingCopy::default(),
            summaries: Vec::new(),
            enumerated: 0,
        };
        // Seed: the least string on which the learner guesses, searched over
        // short strings of small working symbols.
        match machine.least_guessing_string() {
            Some(sigma) => {
                machine.sigma = sigma;
                let content: Vec<Nat> = machine.sigma.content().into_iter().collect();
                for v in content {
                    machine.add_base(v);
                }
            }
            None => machine.degenerate = true,
        }
        for marker in [learner_marker(m_id), control_marker(e_id), base_marker()] {
            machine.add_base_marker(marker);
        }
        machine.sigma_lengths.push(machine.sigma.len());
        machine.summaries.push(StageSummary {
            stage: 0,
            case: if machine.degenerate { "degenerate".into() } else { "seed".into() },
            enumerated: machine.enumerated,
            injuries: 0,
        });
        machine.stage = 1;
        machine
    }

    fn least_guessing_string(&mut self) -> Option<TextPrefix> {
        let symbols: Vec<Nat> = (0..SEED_SYMBOLS as usize).map(|c| self.wc.raw(c)).collect();
        let mut digits: Vec<usize> = Vec::new();
        loop {
            let sigma: TextPrefix = digits.iter().map(|&d| symbols[d]).collect();
            if self
                .m
                .hypothesis(&sigma, SEED_SYMBOLS)
                .is_guess()
            {
                return Some(sigma);
            }
            // Next string in length-then-lex order.
            let mut i = digits.len();
            loop {
                if i == 0 {
                    digits = vec![0; digits.len() + 1];
                    if digits.len() > SEED_LEN_CAP {
                        return None;
                    }
                    break;
                }
                i -= 1;
                digits[i] += 1;
                if digits[i] < symbols.len() {
                    break;
                }
                digits[i] = 0;
                if i == 0 {
                    digits = vec![0; digits.len() + 1];
                    if digits.len() > SEED_LEN_CAP {
                        return None;
                    }
                    break;
                }
            }
        }
    }

    fn mark_used(&mut self, raw: Nat) {
        if let Some(c) = self.wc.copy_of(raw) {
            self.used_copies.insert(c);
        }
    }

    fn add_base(&mut self, v: Nat) {
        self.mark_used(v);
        if self.base.insert(v) {
            self.base_log.push((self.stage, v));
            self.enumerated += 1;
        }
    }

    fn add_base_marker(&mut self, v: Nat) {
        if self.base.insert(v) {
            self.base_log.push((self.stage, v));
            self.enumerated += 1;
        }
    }

    fn add_pair_elem(&mut self, idx: usize, left: bool, v: Nat) {
        self.mark_used(v);
        let stage = self.stage;
        let p = &mut self.pairs[idx];
        let (set, log) = if left {
            (&mut p.left, &mut p.left_log)
        } else {
            (&mut p.right, &mut p.right_log)
        };
        if set.insert(v) {
            log.push((stage, v));
            self.enumerated += 1;
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn active_pair(&self) -> Option<usize> {
        self.active
    }

    pub fn pair_cancelled(&self, idx: usize) -> bool {
        self.pairs[idx].cancelled
    }

    pub fn base_set(&self) -> &BTreeSet<Nat> {
        &self.base
    }

    pub fn left_set(&self, idx: usize) -> &BTreeSet<Nat> {
        &self.pairs[idx].left
    }

    pub fn right_set(&self, idx: usize) -> &BTreeSet<Nat> {
        &self.pairs[idx].right
    }

    pub fn witness_points(&self, idx: usize) -> &[usize] {
        &self.pairs[idx].witness_points
    }

    pub fn sigma_lengths(&self) -> &[usize] {
        &self.sigma_lengths
    }

    /// Copy index of a raw working value.
    pub fn copy_index(&mut self, raw: Nat) -> Option<usize> {
        self.wc.copy_of(raw)
    }

    /// The family: base at column 0, pair `n` at columns `2n-1` and `2n`.
    pub fn family(&self, cap: Stage) -> Family {
        let mut log: Vec<(Stage, Nat)> = self
            .base_log
            .iter()
            .map(|&(at, v)| (at, pair(0, v)))
            .collect();
        for (i, p) in self.pairs.iter().enumerate() {
            let n = i as Nat + 1;
            log.extend(p.left_log.iter().map(|&(at, v)| (at, pair(2 * n - 1, v))));
            log.extend(p.right_log.iter().map(|&(at, v)| (at, pair(2 * n, v))));
        }
        log.sort();
        Family::new(
            StageSet::from_log("parity-pairs", Arc::new(log), cap),
            Some(2 * self.pairs.len() as u64 + 1),
        )
    }

    pub fn base_replay(&self, cap: Stage) -> StageSet {
        StageSet::from_log(
            format!("pair-base[{},{}]", self.m_id, self.e_id),
            Arc::new(self.base_log.clone()),
            cap,
        )
    }

    /// Least single-symbol extension (working symbols up to the stage) on
    /// which the learner answers differently than on the current string.
    fn find_extension(&mut self, s: Stage) -> Option<TextPrefix> {
        let current = self.m.hypothesis(&self.sigma, s);
        let mut alpha = self.sigma.clone();
        for v in 0..=s {
            if is_marker(v) {
                continue;
            }
            alpha.push(v);
            if self.m.hypothesis(&alpha, s) != current {
                return Some(alpha);
            }
            alpha.pop();
        }
        None
    }

    fn extend_chain(&mut self, alpha: TextPrefix) {
        // Append the increasing sweep of working numbers below the extension
        // maximum, then absorb the whole content into the base set.
        let hi = alpha.max_symbol().unwrap_or(0);
        let mut beta = Vec::new();
        let mut v = 0;
        while v <= hi {
            if !is_marker(v) {
                beta.push(v);
            }
            v += 1;
        }
        self.sigma = alpha.concat(&TextPrefix::new(beta));
        let content: Vec<Nat> = self.sigma.content().into_iter().collect();
        for v in content {
            self.add_base(v);
        }
    }

    fn run_stage(&mut self) {
        let s = self.stage;
        self.enumerated = 0;
        if self.degenerate {
            self.sigma_lengths.push(self.sigma.len());
            self.summaries.push(StageSummary {
                stage: s,
                case: "degenerate".into(),
                enumerated: 0,
                injuries: 0,
            });
            self.stage += 1;
            return;
        }

        // Release withheld witness pairs whose index the control set covers.
        if let Some(idx) = self.active {
            let released: Vec<usize> = self
                .e_set
                .eval(s)
                .into_iter()
                .filter(|&j| (j as usize) < self.pairs[idx].witness_points.len())
                .map(|j| self.pairs[idx].witness_points[j as usize])
                .collect();
            for k in released {
                let (even, odd) = (self.wc.raw(k), self.wc.raw(k + 1));
                for v in [even, odd] {
                    self.add_pair_elem(idx, true, v);
                    self.add_pair_elem(idx, false, v);
                }
            }
        }

        let found = self.find_extension(s);
        let case = match (self.active, found) {
            (None, Some(alpha)) => {
                self.extend_chain(alpha);
                "advance"
            }
            (None, None) => {
                // Open the next pair on the current content and split the
                // first witness pair between its members.
                let content: BTreeSet<Nat> = self.sigma.content();
                let n = self.pairs.len() as u64 + 1;
                self.pairs.push(PairState {
                    left: BTreeSet::new(),
                    right: BTreeSet::new(),
                    left_log: Vec::new(),
                    right_log: Vec::new(),
                    witness_points: Vec::new(),
                    cancelled: false,
                });
                let idx = self.pairs.len() - 1;
                for marker in [learner_marker(self.m_id), control_marker(self.e_id)] {
                    let stage = self.stage;
                    let p = &mut self.pairs[idx];
                    if p.left.insert(marker) {
                        p.left_log.push((stage, marker));
                    }
                    if p.right.insert(marker) {
                        p.right_log.push((stage, marker));
                    }
                }
                for &v in &content {
                    self.add_pair_elem(idx, true, v);
                    self.add_pair_elem(idx, false, v);
                }
                let k = self.least_fresh_even(false);
                self.give_witness(idx, k);
                self.active = Some(idx);
                let _ = n;
                "open-pair"
            }
            (Some(idx), Some(alpha)) => {
                self.extend_chain(alpha);
                let n = idx as u64 + 1;
                let stage = self.stage;
                let p = &mut self.pairs[idx];
                let lm = cancel_marker(n, 0);
                let rm = cancel_marker(n, 1);
                if p.left.insert(lm) {
                    p.left_log.push((stage, lm));
                }
                if p.right.insert(rm) {
                    p.right_log.push((stage, rm));
                }
                p.cancelled = true;
                self.active = None;
                "cancel"
            }
            (Some(idx), None) => {
                let k = self.least_fresh_even(true);
                self.give_witness(idx, k);
                "withhold"
            }
        };

        self.sigma_lengths.push(self.sigma.len());
        self.summaries.push(StageSummary {
            stage: s,
            case: case.into(),
            enumerated: self.enumerated,
            injuries: 0,
        });
        self.stage += 1;
    }

    /// Least even copy index `k` with `k` and `k+1` unused; when
    /// `above_everything` is set, `k` must additionally exceed every used
    /// copy.
    fn least_fresh_even(&mut self, above_everything: bool) -> usize {
        let floor = if above_everything {
            self.used_copies.iter().next_back().map_or(0, |&m| m + 1)
        } else {
            0
        };
        let mut k = floor + (floor % 2);
        while self.used_copies.contains(&k) || self.used_copies.contains(&(k + 1)) {
            k += 2;
        }
        k
    }

    fn give_witness(&mut self, idx: usize, k: usize) {
        let even = self.wc.raw(k);
        let odd = self.wc.raw(k + 1);
        self.used_copies.insert(k);
        self.used_copies.insert(k + 1);
        self.add_pair_elem(idx, true, even);
        self.add_pair_elem(idx, false, odd);
        self.pairs[idx].witness_points.push(k);
    }
}

impl StageMachine for ParityMachine {
    fn completed_stages(&self) -> u64 {
        self.stage
    }

    fn step(&mut self) {
        self.run_stage();
    }

    fn violations(&self) -> Vec<InvariantViolation> {
        let mut out = Vec::new();
        let stage = self.stage.saturating_sub(1);
        let mut push = |invariant: &str, detail: String| {
            out.push(InvariantViolation { stage, invariant: invariant.into(), detail });
        };
        // At most one active pair, and active pairs are never cancelled.
        if let Some(idx) = self.active {
            if self.pairs[idx].cancelled {
                push("active-pair", format!("pair {} both active and cancelled", idx + 1));
            }
        }
        // Parity separation: exclusive non-marker elements of the left set
        // sit at even copies, of the right set at odd copies.
        let mut wc = WorkingCopy::default();
        for (i, p) in self.pairs.iter().enumerate() {
            for &v in p.left.difference(&p.right) {
                if is_marker(v) {
                    continue;
                }
                match wc.copy_of(v) {
                    Some(c) if c % 2 == 0 => {}
                    other => push(
                        "parity",
                        format!("pair {} left-exclusive {v} at copy {other:?}", i + 1),
                    ),
                }
            }
            for &v in p.right.difference(&p.left) {
                if is_marker(v) {
                    continue;
                }
                match wc.copy_of(v) {
                    Some(c) if c % 2 == 1 => {}
                    other => push(
                        "parity",
                        format!("pair {} right-exclusive {v} at copy {other:?}", i + 1),
                    ),
                }
            }
            // Cancelled pairs carry their markers.
            let n = i as u64 + 1;
            if p.cancelled
                && (!p.left.contains(&cancel_marker(n, 0))
                    || !p.right.contains(&cancel_marker(n, 1)))
            {
                push("cancel-markers", format!("pair {n} cancelled without markers"));
            }
            if !p.cancelled && Some(i) != self.active && !p.left.is_empty() {
                push("active-pair", format!("pair {n} inactive but not cancelled"));
            }
        }
        // The chain only ever extends.
        if self.sigma_lengths.windows(2).any(|w| w[0] > w[1]) {
            push("chain", "string chain shrank".into());
        }
        out
    }

    fn stage_log(&self) -> &[StageSummary] {
        &self.summaries
    }
}

/// Run the construction for `stages` stages past the seed.
pub fn parity_build(
    m: &Learner,
    m_id: u64,
    e_set: &StageSet,
    e_id: u64,
    stages: u64,
) -> Result<(Family, ParityMachine)> {
    if stages == 0 {
        return Err(Error::ZeroStageBudget);
    }
    let mut machine = ParityMachine::new(m, m_id, e_set, e_id);
    for _ in 0..stages {
        machine.run_stage();
    }
    let family = machine.family(stages);
    Ok((family, machine))
}

/// One construction run the dispatching learner knows how to recognize.
pub struct ParityEntry {
    pub m_id: u64,
    pub e_id: u64,
    pub machine: ParityMachine,
}

/// The dispatching learner over completed parity runs.
///
/// Inputs without both identity markers answer code 0. Otherwise: any
/// cancellation marker means the input names a cancelled (finite) set, and
/// the answer is the empty code; the base marker names the replayed base set;
/// everything else is guessed to be the whole working space (the complement
/// of the marker columns), which is correct up to finite difference for
/// surviving pair members.
pub fn parity_learner(
    reg: &mut Registry,
    entries: Vec<ParityEntry>,
    cap: Stage,
) -> Result<Learner> {
    let co_markers = StageSet::from_fn("co-markers", |s| {
        (0..=s).filter(|&v| !is_marker(v)).collect()
    });
    let a1 = reg.register(co_markers)?;
    let coded: Vec<(u64, u64, Code)> = entries
        .iter()
        .map(|e| {
            reg.register(e.machine.base_replay(cap))
                .map(|c| (e.m_id, e.e_id, c))
        })
        .collect::<Result<_>>()?;
    Ok(Learner::total(101, move |sigma| {
        let content = sigma.content();
        let entry = coded
            .iter()
            .find(|(m, e, _)| {
                content.contains(&learner_marker(*m)) && content.contains(&control_marker(*e))
            });
        let Some(&(_, _, base_code)) = entry else {
            return Hypothesis::Guess(Code::EMPTY);
        };
        if content.iter().any(|&v| unpair(v).0 == 1) {
            return Hypothesis::Guess(Code::EMPTY);
        }
        if content.contains(&base_marker()) {
            return Hypothesis::Guess(base_code);
        }
        Hypothesis::Guess(a1)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_control() -> StageSet {
        StageSet::from_fn("full", |s| (0..=s).collect())
    }

    fn constant_learner() -> Learner {
        Learner::total(2, |_| Hypothesis::Guess(Code::EMPTY))
    }

    /// Guesses the content code, so the answer changes whenever content grows.
    fn content_learner() -> Learner {
        Learner::total(4, |sigma| match Code::finite(&sigma.content()) {
            Ok(c) => Hypothesis::Guess(c),
            Err(_) => Hypothesis::NoGuess,
        })
    }

    #[test]
    fn constant_learner_keeps_one_pair_active_with_parity_split() {
        let m = constant_learner();
        let (_, machine) = parity_build(&m, 2, &StageSet::empty("none"), 0, 300).unwrap();
        assert_eq!(machine.pair_count(), 1);
        assert_eq!(machine.active_pair(), Some(0));
        assert!(!machine.pair_cancelled(0));
        assert!(machine.violations().is_empty());
        // With nothing released, every witness point stays split.
        let l = machine.left_set(0);
        let r = machine.right_set(0);
        let l_only: Vec<Nat> = l.difference(r).copied().collect();
        let r_only: Vec<Nat> = r.difference(l).copied().collect();
        assert_eq!(l_only.len(), machine.witness_points(0).len());
        assert_eq!(r_only.len(), machine.witness_points(0).len());
        assert!(l_only.len() >= 290);
    }

    #[test]
    fn full_control_heals_all_but_the_newest_witnesses() {
        let m = constant_learner();
        let (_, machine) = parity_build(&m, 2, &full_control(), 1, 300).unwrap();
        let l = machine.left_set(0);
        let r = machine.right_set(0);
        assert!(l.difference(r).count() <= 1);
        assert!(r.difference(l).count() <= 1);
        assert!(machine.violations().is_empty());
    }

    #[test]
    fn content_learner_cancels_every_pair_it_opens() {
        let m = content_learner();
        let mut machine = ParityMachine::new(&m, 4, &full_control(), 1, );
        for _ in 0..200 {
            machine.step();
            let v = machine.violations();
            assert!(v.is_empty(), "stage {}: {v:?}", machine.completed_stages());
        }
        // The learner changes its code whenever content grows, so pairs open
        // only to be cancelled; every cancelled pair carries its markers.
        assert!(machine.pair_count() >= 1);
        for i in 0..machine.pair_count() {
            if Some(i) != machine.active_pair() && !machine.left_set(i).is_empty() {
                assert!(machine.pair_cancelled(i), "pair {}", i + 1);
            }
        }
        assert!((0..machine.pair_count()).any(|i| machine.pair_cancelled(i)));
    }

    #[test]
    fn never_guessing_learner_degenerates() {
        let m = Learner::total(9, |_| Hypothesis::NoGuess);
        let (fam, machine) = parity_build(&m, 9, &full_control(), 1, 50).unwrap();
        assert!(machine.is_degenerate());
        assert_eq!(machine.pair_count(), 0);
        // Only the markers ever enter the base set.
        assert_eq!(fam.column(0, 50).len(), 3);
        assert!(machine
            .stage_log()
            .iter()
            .skip(1)
            .all(|r| r.case == "degenerate"));
    }

    #[test]
    fn family_replay_is_monotone() {
        let m = constant_learner();
        let (fam, _) = parity_build(&m, 2, &full_control(), 1, 100).unwrap();
        assert_eq!(fam.carrier().first_monotonicity_violation(110), None);
    }

    #[test]
    fn dispatch_learner_follows_the_markers() {
        let mut reg = Registry::new();
        let m = constant_learner();
        let (_, machine) = parity_build(&m, 2, &full_control(), 1, 60).unwrap();
        let n = parity_learner(
            &mut reg,
            vec![ParityEntry { m_id: 2, e_id: 1, machine }],
            120,
        )
        .unwrap();
        let id = [learner_marker(2), control_marker(1)];
        // Cancellation marker forces the empty guess.
        let h = n.hypothesis(
            &TextPrefix::new(vec![id[0], id[1], cancel_marker(1, 0)]),
            0,
        );
        assert_eq!(h, Hypothesis::Guess(Code::EMPTY));
        // Base marker names the replayed base set.
        let h = n.hypothesis(&TextPrefix::new(vec![id[0], id[1], base_marker()]), 0);
        let set = reg.lookup(h.code().unwrap()).unwrap();
        assert!(set.label().contains("pair-base"));
        // No marker beyond identity: the co-marker space.
        let h = n.hypothesis(&TextPrefix::new(vec![id[0], id[1], 6, 7]), 0);
        let set = reg.lookup(h.code().unwrap()).unwrap();
        assert_eq!(set.label(), "co-markers");
        // Missing identity markers: code 0.
        let h = n.hypothesis(&TextPrefix::new(vec![6, 7]), 0);
        assert_eq!(h, Hypothesis::Guess(Code::EMPTY));
    }
}
