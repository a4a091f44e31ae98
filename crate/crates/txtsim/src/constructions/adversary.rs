//! Adversarial stage-approximated enumeration against a learner.
//!
//! Given an enumeration `g` of a target set and a learner, the machine builds
//! a finite partial enumeration `f` in stages, repeatedly extending it by the
//! least (witness, extension) pair on which the learner's hypothesis content
//! changes. Two kinds of injury keep the choices canonical: when the sorted
//! prefix of `g` changes, the state rolls back to its snapshot at the first
//! affected stage; when a stored witness pair stops being valid or stops
//! being least, the state truncates at the lowest bad level. Because every
//! choice is the least over a space that depends only on the *set* of values
//! seen so far, two enumerations of the same set eventually make identical
//! choices.
//!
//! Extensions are searched one symbol at a time: candidate strings are the
//! current enumeration followed by a single allowed symbol (a value of the
//! enumeration seen so far, below the stage). This truncates the unbounded
//! search of the idealized construction to something tractable while keeping
//! least-choice canonicity; each level therefore restrains one position.
//!
//! All hypothesis contents consulted during a stage are cached; the cache is
//! refreshed at the start of every stage and any change invalidates the
//! incremental candidate bookkeeping, so results always match a full rescan.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::criteria::Bounds;
use crate::kernel::{Hypothesis, Learner, Nat, Registry, SharedRegistry, TextPrefix};
use crate::{Error, Result};

use super::{InvariantViolation, StageMachine, StageSummary};

/// Enumeration input: a total function from positions to values.
pub type Enumeration = Arc<dyn Fn(u64) -> Nat + Send + Sync>;

#[derive(Clone, Debug, PartialEq, Eq)]
struct Snapshot {
    f: Vec<Nat>,
    restraints: Vec<u64>,
    witnesses: Vec<Nat>,
    hyps: Vec<Hypothesis>,
}

type ContentCache = BTreeMap<Hypothesis, BTreeSet<Nat>>;

fn content_of(
    reg: &Registry,
    cache: &mut ContentCache,
    elem: Nat,
    h: Hypothesis,
    stage: u64,
) -> Result<BTreeSet<Nat>> {
    if let Some(c) = cache.get(&h) {
        return Ok(c.clone());
    }
    let c = match h.code() {
        None => BTreeSet::new(),
        Some(code) => reg.lookup(code)?.bounded(stage, elem),
    };
    cache.insert(h, c.clone());
    Ok(c)
}

fn symdiff(a: &BTreeSet<Nat>, b: &BTreeSet<Nat>) -> BTreeSet<Nat> {
    a.symmetric_difference(b).copied().collect()
}

pub struct AdversaryMachine {
    g: Enumeration,
    m: Learner,
    reg: SharedRegistry,
    bounds: Bounds,
    stage: u64,
    f: Vec<Nat>,
    /// `restraints[j]` is the enumeration length at level `j`; level 0 is the
    /// empty start, so `restraints.len() - 1` is the level counter.
    restraints: Vec<u64>,
    /// Witness separating level `j` from level `j-1`, for `j >= 1`.
    witnesses: Vec<Nat>,
    /// Hypotheses at the restraint points; `hyps[0]` is the answer on the
    /// empty prefix.
    hyps: Vec<Hypothesis>,
    k_prev: Vec<Nat>,
    /// `snapshots[t]` is the state at the beginning of stage `t`.
    snapshots: Vec<Snapshot>,
    summaries: Vec<StageSummary>,
    level_counts: Vec<u64>,
    /// Contents of every hypothesis consulted so far, as of the last refresh.
    cache: ContentCache,
    /// Symbols checked and rejected for the pending extension search.
    ext_checked: BTreeSet<Nat>,
}

impl AdversaryMachine {
    pub fn new(reg: SharedRegistry, g: Enumeration, m: Learner, bounds: Bounds) -> Result<Self> {
        bounds.validate()?;
        let h0 = m.hypothesis(&TextPrefix::empty(), bounds.horizon);
        let start = Snapshot {
            f: Vec::new(),
            restraints: vec![0],
            witnesses: Vec::new(),
            hyps: vec![h0],
        };
        Ok(AdversaryMachine {
            g,
            m,
            reg,
            bounds,
            stage: 0,
            f: start.f.clone(),
            restraints: start.restraints.clone(),
            witnesses: start.witnesses.clone(),
            hyps: start.hyps.clone(),
            k_prev: Vec::new(),
            snapshots: vec![start],
            summaries: Vec::new(),
            level_counts: Vec::new(),
            cache: ContentCache::new(),
            ext_checked: BTreeSet::new(),
        })
    }

    /// Completed extension levels.
    pub fn level(&self) -> u64 {
        (self.restraints.len() - 1) as u64
    }

    /// Level counter after each completed stage.
    pub fn level_history(&self) -> &[u64] {
        &self.level_counts
    }

    pub fn enumeration_prefix(&self) -> TextPrefix {
        TextPrefix::new(self.f.clone())
    }

    /// The (witness, extension) pair chosen at level `j >= 1`.
    pub fn level_pair(&self, j: usize) -> (Nat, TextPrefix) {
        (
            self.witnesses[j - 1],
            TextPrefix::new(self.f[..self.restraints[j] as usize].to_vec()),
        )
    }

    pub fn snapshot_count(&self) -> usize {
        self.snapshots.len()
    }

    /// State equals its stored snapshot for the given stage.
    pub fn matches_snapshot(&self, t: usize) -> bool {
        let snap = &self.snapshots[t];
        snap.f == self.f
            && snap.restraints == self.restraints
            && snap.witnesses == self.witnesses
            && snap.hyps == self.hyps
    }

    /// Least candidate (witness, symbol) extending `prefix` against content
    /// `from`, over the given symbols.
    fn least_candidate(
        &mut self,
        prefix: &mut TextPrefix,
        from: &BTreeSet<Nat>,
        symbols: &[Nat],
        stage: u64,
    ) -> Result<Option<(Nat, Nat)>> {
        let mut best: Option<(Nat, Nat)> = None;
        for &v in symbols {
            prefix.push(v);
            let h = self.m.hypothesis(prefix, self.bounds.horizon);
            prefix.pop();
            let content = content_of(&self.reg, &mut self.cache, self.bounds.elem, h, stage)?;
            if let Some(&y) = symdiff(from, &content).first() {
                if best.map_or(true, |b| (y, v) < b) {
                    best = Some((y, v));
                }
            }
        }
        Ok(best)
    }

    fn run_stage(&mut self) -> Result<()> {
        let t = self.stage + 1;
        let s = t - 1;
        self.snapshots.push(Snapshot {
            f: self.f.clone(),
            restraints: self.restraints.clone(),
            witnesses: self.witnesses.clone(),
            hyps: self.hyps.clone(),
        });
        let mut injuries = 0u64;

        // Sorted reordering of g(0..=t), with multiplicities.
        let mut k_new: Vec<Nat> = (0..=t).map(|n| (self.g)(n)).collect();
        k_new.sort();

        // Reorder injury: roll back to the first stage whose sorted prefix
        // moved.
        if let Some(j) = (0..self.k_prev.len()).find(|&j| self.k_prev[j] != k_new[j]) {
            let snap = self.snapshots[j].clone();
            self.f = snap.f;
            self.restraints = snap.restraints;
            self.witnesses = snap.witnesses;
            self.hyps = snap.hyps;
            self.ext_checked.clear();
            injuries += 1;
        }

        // Refresh every cached content at the current stage.
        let mut contents_changed = false;
        let keys: Vec<Hypothesis> = self.cache.keys().copied().collect();
        let old = std::mem::take(&mut self.cache);
        for h in keys {
            let now = content_of(&self.reg, &mut self.cache, self.bounds.elem, h, t)?;
            if old.get(&h) != Some(&now) {
                contents_changed = true;
            }
        }
        if contents_changed || injuries > 0 {
            self.ext_checked.clear();
        }

        let k_set: BTreeSet<Nat> = k_new.iter().copied().collect();
        let allowed: Vec<Nat> = k_set.iter().copied().filter(|&v| s > 0 && v < s).collect();
        let prev_set: BTreeSet<Nat> = self.k_prev.iter().copied().collect();
        let newly_allowed: Vec<Nat> = allowed
            .iter()
            .copied()
            .filter(|&v| !prev_set.contains(&v) || v + 1 >= s)
            .collect();
        let full_rescan = contents_changed || injuries > 0;

        // Witness injury: lowest level whose stored pair is wrong (no longer
        // separates its two hypotheses) or not least (beaten by a candidate
        // over the admitted symbols). Exactly one truncation per stage.
        let mut bad: Option<usize> = None;
        {
            let mut scratch = TextPrefix::new(self.f.clone());
            for j in (1..self.restraints.len()).rev() {
                scratch.truncate(self.restraints[j - 1] as usize);
                let here =
                    content_of(&self.reg, &mut self.cache, self.bounds.elem, self.hyps[j], t)?;
                let prev =
                    content_of(&self.reg, &mut self.cache, self.bounds.elem, self.hyps[j - 1], t)?;
                let x = self.witnesses[j - 1];
                if !symdiff(&prev, &here).contains(&x) {
                    bad = Some(j);
                    continue;
                }
                let probe: &[Nat] = if full_rescan { &allowed } else { &newly_allowed };
                let stored_v = self.f[self.restraints[j] as usize - 1];
                let probe = probe.to_vec();
                if let Some(best) = self.least_candidate(&mut scratch, &prev, &probe, t)? {
                    if best < (x, stored_v) {
                        bad = Some(j);
                    }
                }
            }
        }
        if let Some(j) = bad {
            self.f.truncate(self.restraints[j - 1] as usize);
            self.restraints.truncate(j);
            self.witnesses.truncate(j - 1);
            self.hyps.truncate(j);
            self.ext_checked.clear();
            injuries += 1;
        }

        // Extension search: least (witness, symbol) pair whose one-symbol
        // extension changes the hypothesis content, skipping symbols already
        // rejected for this exact state.
        let mut case = "idle";
        if (self.f.len() as u64) + 1 <= s {
            let top = *self.hyps.last().expect("level 0 exists");
            let top = content_of(&self.reg, &mut self.cache, self.bounds.elem, top, t)?;
            let probe: Vec<Nat> = allowed
                .iter()
                .copied()
                .filter(|v| !self.ext_checked.contains(v))
                .collect();
            let mut scratch = TextPrefix::new(self.f.clone());
            if let Some((y, v)) = self.least_candidate(&mut scratch, &top, &probe, t)? {
                self.f.push(v);
                self.restraints.push(self.f.len() as u64);
                self.witnesses.push(y);
                let h = self
                    .m
                    .hypothesis(&TextPrefix::new(self.f.clone()), self.bounds.horizon);
                self.hyps.push(h);
                self.ext_checked.clear();
                case = "extend";
            } else {
                self.ext_checked.extend(probe);
            }
        }

        self.k_prev = k_new;
        self.level_counts.push(self.level());
        self.summaries.push(StageSummary {
            stage: t,
            case: case.into(),
            enumerated: u64::from(case == "extend"),
            injuries,
        });
        self.stage = t;
        Ok(())
    }

    fn content_now(&self, h: Hypothesis) -> BTreeSet<Nat> {
        match h.code() {
            None => BTreeSet::new(),
            Some(code) => self
                .reg
                .lookup(code)
                .map(|s| s.bounded(self.stage.max(1), self.bounds.elem))
                .unwrap_or_default(),
        }
    }
}

impl StageMachine for AdversaryMachine {
    fn completed_stages(&self) -> u64 {
        self.stage
    }

    fn step(&mut self) {
        self.run_stage().expect("hypothesis codes resolve in the registry");
    }

    fn violations(&self) -> Vec<InvariantViolation> {
        let mut out = Vec::new();
        let stage = self.stage;
        let mut push = |invariant: &str, detail: String| {
            out.push(InvariantViolation { stage, invariant: invariant.into(), detail });
        };
        if self.restraints[0] != 0 {
            push("restraint", "level 0 restraint moved".into());
        }
        if self.restraints.windows(2).any(|w| w[0] >= w[1]) {
            push("restraint", format!("not strictly increasing: {:?}", self.restraints));
        }
        if *self.restraints.last().unwrap() != self.f.len() as u64 {
            push(
                "restraint",
                format!("length {} != top restraint {:?}", self.f.len(), self.restraints.last()),
            );
        }
        for j in 1..self.restraints.len() {
            let here = self.content_now(self.hyps[j]);
            let prev = self.content_now(self.hyps[j - 1]);
            if !symdiff(&prev, &here).contains(&self.witnesses[j - 1]) {
                push("witness", format!("level {j} witness no longer separates"));
            }
        }
        out
    }

    fn stage_log(&self) -> &[StageSummary] {
        &self.summaries
    }
}

/// Run the adversary for `stages` stages.
pub fn adversary_build(
    reg: &SharedRegistry,
    g: Enumeration,
    m: &Learner,
    stages: u64,
    bounds: Bounds,
) -> Result<AdversaryMachine> {
    if stages == 0 {
        return Err(Error::ZeroStageBudget);
    }
    let mut machine = AdversaryMachine::new(Arc::clone(reg), g, m.clone(), bounds)?;
    for _ in 0..stages {
        machine.run_stage()?;
    }
    Ok(machine)
}

/// Replay the construction on a finite prefix treated as the enumeration
/// (positions past the end repeat the last value), for `stages` stages, and
/// return the enumeration it builds.
pub fn replay_enumeration(
    reg: &SharedRegistry,
    m: &Learner,
    sigma: &TextPrefix,
    stages: u64,
    bounds: Bounds,
) -> Result<TextPrefix> {
    if sigma.is_empty() || stages == 0 {
        return Ok(TextPrefix::empty());
    }
    let syms = sigma.symbols().to_vec();
    let g: Enumeration = Arc::new(move |n| syms[(n as usize).min(syms.len() - 1)]);
    let machine = adversary_build(reg, g, m, stages, bounds)?;
    Ok(machine.enumeration_prefix())
}

/// Lift a learner through the adversary: the lifted machine answers as `m`
/// does on the enumeration built by replaying the construction on its input
/// (one stage per input symbol, capped at `stages_per_call`).
pub fn adversary_learner(
    reg: &SharedRegistry,
    m: &Learner,
    stages_per_call: u64,
    bounds: Bounds,
) -> Learner {
    let reg = Arc::clone(reg);
    let inner = m.clone();
    Learner::total(inner.id(), move |sigma| {
        let stages = (sigma.len() as u64).min(stages_per_call);
        let replayed = replay_enumeration(&reg, &inner, sigma, stages, bounds)
            .expect("replay resolves codes");
        inner.hypothesis(&replayed, bounds.horizon)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Code, StageSet};

    fn setup() -> (SharedRegistry, Code, Code) {
        let mut reg = Registry::new();
        let a = reg.register(StageSet::constant("a", [0])).unwrap();
        let b = reg.register(StageSet::constant("b", [1])).unwrap();
        (reg.into_shared(), a, b)
    }

    fn bounds() -> Bounds {
        Bounds::new(20, 50, 50, 2).unwrap()
    }

    fn identity_enum() -> Enumeration {
        Arc::new(|n| n)
    }

    #[test]
    fn constant_learner_never_extends() {
        let (reg, a, _) = setup();
        let m = Learner::total(0, move |_| Hypothesis::Guess(a));
        let machine = adversary_build(&reg, identity_enum(), &m, 400, bounds()).unwrap();
        assert_eq!(machine.level(), 0);
        assert!(machine.level_history().iter().all(|&i| i <= 1));
        assert!(machine.enumeration_prefix().is_empty());
        assert!(machine.violations().is_empty());
    }

    #[test]
    fn flip_flop_learner_extends_nearly_every_stage() {
        let (reg, a, b) = setup();
        let m = Learner::total(0, move |p| {
            Hypothesis::Guess(if p.len() % 2 == 0 { a } else { b })
        });
        let machine = adversary_build(&reg, identity_enum(), &m, 300, bounds()).unwrap();
        // One extension per stage once symbols are admitted (stage 2 on).
        assert_eq!(machine.level(), 299);
        assert!(machine.violations().is_empty());
        // All chosen witnesses separate {0} and {1}, least first.
        for j in 1..=3 {
            let (y, ext) = machine.level_pair(j);
            assert_eq!(y, 0);
            assert_eq!(ext.symbols(), vec![0; j].as_slice());
        }
    }

    #[test]
    fn reorder_injury_rolls_back_to_the_snapshot() {
        let (reg, a, b) = setup();
        let m = Learner::total(0, move |p| {
            Hypothesis::Guess(if p.len() % 2 == 0 { a } else { b })
        });
        // Values descend for a while (every arrival reorders the sorted
        // prefix), then switch to fresh increasing values that append
        // without disturbing it.
        let g: Enumeration = Arc::new(|n| if n <= 30 { 30 - n } else { n });
        let mut machine = AdversaryMachine::new(reg, g, m, bounds()).unwrap();
        let mut saw_rollback = false;
        for _ in 0..120 {
            let before = machine.completed_stages();
            machine.run_stage().unwrap();
            let rec = machine.stage_log().last().unwrap().clone();
            if rec.injuries > 0 && rec.case != "extend" {
                saw_rollback = true;
            }
            assert!(machine.violations().is_empty(), "after stage {before}");
        }
        assert!(saw_rollback);
        // Eventually the prefix stabilizes and levels grow again.
        assert!(machine.level() > 10);
    }

    #[test]
    fn two_enumerations_of_the_same_set_agree_on_early_choices() {
        let (reg, a, b) = setup();
        let m = Learner::total(0, move |p| {
            Hypothesis::Guess(if p.len() % 2 == 0 { a } else { b })
        });
        let forward: Enumeration = Arc::new(|n| n.min(30));
        let backward: Enumeration = Arc::new(|n| 30u64.saturating_sub(n));
        let run_a = adversary_build(&reg, forward, &m, 250, bounds()).unwrap();
        let run_b = adversary_build(&reg, backward, &m, 250, bounds()).unwrap();
        for j in 1..=3 {
            assert_eq!(run_a.level_pair(j), run_b.level_pair(j), "level {j}");
        }
    }

    #[test]
    fn lifted_constant_learner_stays_constant_and_correct() {
        let mut reg = Registry::new();
        let target = StageSet::constant("g", [0, 1, 2]);
        let c = reg.register(target).unwrap();
        let reg = reg.into_shared();
        let m = Learner::total(0, move |_| Hypothesis::Guess(c));
        let hat = adversary_learner(&reg, &m, 100, bounds());
        for sigma in [
            TextPrefix::empty(),
            TextPrefix::new(vec![0, 1, 2]),
            TextPrefix::new(vec![2; 30]),
        ] {
            assert_eq!(hat.hypothesis(&sigma, 0), Hypothesis::Guess(c));
        }
    }

    #[test]
    fn lifted_learner_changes_track_replay_levels() {
        let (reg, a, b) = setup();
        let m = Learner::total(0, move |p| {
            Hypothesis::Guess(if p.len() % 2 == 0 { a } else { b })
        });
        let hat = adversary_learner(&reg, &m, 200, bounds());
        // On growing prefixes of a fixed text, the lifted hypothesis flips
        // exactly when the replay completes another level.
        let text: Vec<Nat> = (0..40).map(|n| n % 3).collect();
        let mut changes = 0;
        let mut prev = hat.hypothesis(&TextPrefix::empty(), 0);
        for n in 1..=text.len() {
            let now = hat.hypothesis(&TextPrefix::new(text[..n].to_vec()), 0);
            if now != prev {
                changes += 1;
            }
            prev = now;
        }
        let replay = replay_enumeration(
            &reg,
            &m,
            &TextPrefix::new(text.clone()),
            text.len() as u64,
            bounds(),
        )
        .unwrap();
        // Parity of the replayed length decides the final answer, so change
        // count tracks completed levels.
        assert!(changes > 5);
        assert_eq!(replay.len() as u64, machine_levels(&reg, &m, &text));
        fn machine_levels(reg: &SharedRegistry, m: &Learner, text: &[Nat]) -> u64 {
            let syms = text.to_vec();
            let g: Enumeration = Arc::new(move |n| syms[(n as usize).min(syms.len() - 1)]);
            adversary_build(reg, g, m, text.len() as u64, bounds())
                .unwrap()
                .level()
        }
    }

    #[test]
    fn empty_input_replays_to_the_empty_enumeration() {
        let (reg, a, _) = setup();
        let m = Learner::total(0, move |_| Hypothesis::Guess(a));
        let hat = adversary_learner(&reg, &m, 50, bounds());
        assert_eq!(
            hat.hypothesis(&TextPrefix::empty(), 0),
            m.hypothesis(&TextPrefix::empty(), 0)
        );
    }
}
