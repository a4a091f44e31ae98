//! The speculation-chasing family machine.
//!
//! The machine grows a base set `A`, a sequence of side sets `B_1, B_2, ...`,
//! and a chain of strings, all driven by one learner. A *speculation* is an
//! element the learner's hypothesized set contains but its input does not;
//! each diagonalization step completes when a fresh speculation is found on
//! some short extension of the current string. On completion the speculation
//! is withheld (kept out of `A`), everything below the extension is flushed
//! into `A` and appended to the string, the current side set is tagged and
//! frozen, and the next side set opens as a copy of `A`. When no speculation
//! exists the current side set grows by one fresh element instead. A control
//! set releases withheld speculations by index into every set in play.
//!
//! Columns 0 and 1 of the element space are reserved: column 0 carries the
//! per-side-set tags, column 1 the identity markers present in every set.
//! All working traffic stays off those columns.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::kernel::{pair, unpair, Code, Family, Hypothesis, Learner, Nat, Registry, SharedRegistry, Stage, StageSet, TextPrefix};
use crate::{Error, Result};

use super::{InvariantViolation, StageMachine, StageSummary};

fn is_marker(v: Nat) -> bool {
    unpair(v).0 <= 1
}

/// Least non-marker natural at or above `from`, skipping the given sets.
fn least_working(from: Nat, avoid: &[&BTreeSet<Nat>]) -> Nat {
    let mut v = from;
    loop {
        if !is_marker(v) && avoid.iter().all(|s| !s.contains(&v)) {
            return v;
        }
        v += 1;
    }
}

fn tag_elem(step: u64) -> Nat {
    pair(0, step)
}

fn learner_marker(m_id: u64) -> Nat {
    pair(1, pair(0, m_id))
}

fn control_marker(e_id: u64) -> Nat {
    pair(1, pair(1, e_id))
}

#[derive(Clone, Debug)]
struct SideSet {
    elems: BTreeSet<Nat>,
    log: Vec<(Stage, Nat)>,
    tagged_at: Option<Stage>,
}

pub struct SpeculationMachine {
    m: Learner,
    m_id: u64,
    e_set: StageSet,
    e_id: u64,
    reg: SharedRegistry,
    stage: u64,
    a: BTreeSet<Nat>,
    a_log: Vec<(Stage, Nat)>,
    /// Side sets; index `i` holds `B_{i+1}`.
    sides: Vec<SideSet>,
    /// Speculations in choice order; release indices refer to this list.
    speculations: Vec<Nat>,
    spec_set: BTreeSet<Nat>,
    sigma: TextPrefix,
    /// Length of the string chain after each stage.
    sigma_lengths: Vec<usize>,
    /// Learner's answer on the chain string after each stage.
    hyp_chain: Vec<Hypothesis>,
    steps_done: u64,
    /// Side-set count after each stage, for replaying the learner.
    sides_by_stage: Vec<usize>,
    summaries: Vec<StageSummary>,
    enumerated: u64,
}

impl SpeculationMachine {
    pub fn new(
        reg: SharedRegistry,
        m: &Learner,
        m_id: u64,
        e_set: &StageSet,
        e_id: u64,
    ) -> Self {
        let mut machine = SpeculationMachine {
            m: m.clone(),
            m_id,
            e_set: e_set.clone(),
            e_id,
            reg,
            stage: 0,
            a: BTreeSet::new(),
            a_log: Vec::new(),
            sides: Vec::new(),
            speculations: Vec::new(),
            spec_set: BTreeSet::new(),
            sigma: TextPrefix::empty(),
            sigma_lengths: Vec::new(),
            hyp_chain: Vec::new(),
            steps_done: 0,
            sides_by_stage: Vec::new(),
            summaries: Vec::new(),
            enumerated: 0,
        };
        // Stage 0: seed the base set with the least working number, open the
        // first side set, and stamp identity markers everywhere.
        let w0 = least_working(0, &[]);
        machine.add_a(w0);
        machine.add_a(learner_marker(m_id));
        machine.add_a(control_marker(e_id));
        machine.sigma.push(w0);
        machine.open_side();
        machine.sigma_lengths.push(1);
        machine.hyp_chain.push(machine.m.hypothesis(&machine.sigma, 1));
        machine.sides_by_stage.push(1);
        machine.summaries.push(StageSummary {
            stage: 0,
            case: "seed".into(),
            enumerated: machine.enumerated,
            injuries: 0,
        });
        machine.stage = 1;
        machine
    }

    fn add_a(&mut self, v: Nat) {
        if self.a.insert(v) {
            self.a_log.push((self.stage, v));
            self.enumerated += 1;
        }
    }

    fn add_side(&mut self, i: usize, v: Nat) {
        let stage = self.stage;
        let side = &mut self.sides[i];
        if side.elems.insert(v) {
            side.log.push((stage, v));
            self.enumerated += 1;
        }
    }

    fn open_side(&mut self) {
        // New side sets start from the current base set (markers included).
        let seed: Vec<Nat> = self.a.iter().copied().collect();
        self.sides.push(SideSet {
            elems: BTreeSet::new(),
            log: Vec::new(),
            tagged_at: None,
        });
        let i = self.sides.len() - 1;
        for v in seed {
            self.add_side(i, v);
        }
    }

    pub fn steps_done(&self) -> u64 {
        self.steps_done
    }

    pub fn side_count(&self) -> usize {
        self.sides.len()
    }

    pub fn base_set(&self) -> &BTreeSet<Nat> {
        &self.a
    }

    pub fn side_set(&self, i: usize) -> &BTreeSet<Nat> {
        &self.sides[i].elems
    }

    pub fn pending_speculations(&self) -> BTreeSet<Nat> {
        self.spec_set.difference(&self.a).copied().collect()
    }

    pub fn chain_hypotheses(&self) -> &[Hypothesis] {
        &self.hyp_chain
    }

    pub fn sigma_lengths(&self) -> &[usize] {
        &self.sigma_lengths
    }

    /// Base-set contents as replayed at a given stage.
    pub fn base_at(&self, stage: Stage) -> BTreeSet<Nat> {
        self.a_log
            .iter()
            .filter(|&&(at, _)| at <= stage)
            .map(|&(_, v)| v)
            .collect()
    }

    /// Number of side sets open by the given stage.
    pub fn sides_at(&self, stage: Stage) -> usize {
        let idx = (stage as usize).min(self.sides_by_stage.len() - 1);
        self.sides_by_stage[idx]
    }

    /// The family: base set at column 0, side set `i` at column `i`.
    pub fn family(&self, cap: Stage) -> Family {
        let mut log: Vec<(Stage, Nat)> = self
            .a_log
            .iter()
            .map(|&(at, v)| (at, pair(0, v)))
            .collect();
        for (i, side) in self.sides.iter().enumerate() {
            let col = i as Nat + 1;
            log.extend(side.log.iter().map(|&(at, v)| (at, pair(col, v))));
        }
        log.sort();
        Family::new(
            StageSet::from_log("speculation", Arc::new(log), cap),
            Some(self.sides.len() as u64 + 1),
        )
    }

    /// Stage-set replays of the base, side, and stripped-union sets, for
    /// registration as hypothesis codes.
    pub fn base_replay(&self, cap: Stage) -> StageSet {
        StageSet::from_log(
            format!("spec-base[{},{}]", self.m_id, self.e_id),
            Arc::new(self.a_log.clone()),
            cap,
        )
    }

    pub fn side_replay(&self, i: usize, cap: Stage) -> StageSet {
        StageSet::from_log(
            format!("spec-side{}[{},{}]", i + 1, self.m_id, self.e_id),
            Arc::new(self.sides[i].log.clone()),
            cap,
        )
    }

    /// Base joined with side `k`, tags stripped.
    pub fn union_replay(&self, k: usize, cap: Stage) -> StageSet {
        let mut log = self.a_log.clone();
        log.extend(self.sides[k].log.iter().copied());
        log.retain(|&(_, v)| unpair(v).0 != 0);
        log.sort();
        StageSet::from_log(
            format!("spec-union{}[{},{}]", k + 1, self.m_id, self.e_id),
            Arc::new(log),
            cap,
        )
    }

    fn hyp_values(&self, h: Hypothesis, stage: Stage) -> Result<BTreeSet<Nat>> {
        match h.code() {
            None => Ok(BTreeSet::new()),
            Some(c) => Ok(self.reg.lookup(c)?.eval_set(stage)),
        }
    }

    /// Least fresh speculation at the current stage: a non-marker value at
    /// most the stage, never chosen before, inside the learner's hypothesized
    /// set on the current string extended by at most one allowed symbol, and
    /// outside that input's content. Candidates are ordered by value first,
    /// extension second (empty extension before single symbols, ascending).
    fn find_speculation(&mut self, s: Stage) -> Result<Option<(Nat, Option<Nat>)>> {
        let pending = self.pending_speculations();
        let mut exts: Vec<Option<Nat>> = vec![None];
        for v in 0..=s {
            if !is_marker(v) && !pending.contains(&v) {
                exts.push(Some(v));
            }
        }
        let mut best: Option<(Nat, usize)> = None;
        let content = self.sigma.content();
        for (rank, ext) in exts.iter().enumerate() {
            if let Some(v) = ext {
                self.sigma.push(*v);
            }
            let h = self.m.hypothesis(&self.sigma, s);
            let hyp = self.hyp_values(h, s)?;
            let candidate = hyp
                .iter()
                .copied()
                .filter(|&x| {
                    x <= s
                        && !is_marker(x)
                        && !self.spec_set.contains(&x)
                        && !content.contains(&x)
                        && Some(x) != *ext
                })
                .next();
            if let Some(v) = ext {
                debug_assert_eq!(self.sigma.symbols().last(), Some(v));
                self.sigma.pop();
            }
            if let Some(x) = candidate {
                if best.map_or(true, |(bx, brank)| (x, rank) < (bx, brank)) {
                    best = Some((x, rank));
                }
            }
        }
        Ok(best.map(|(x, rank)| (x, exts[rank])))
    }

    fn run_stage(&mut self) -> Result<()> {
        let s = self.stage;
        self.enumerated = 0;

        // Release withheld speculations whose index the control set has
        // enumerated, into the base set and every side set.
        let released: Vec<Nat> = self
            .e_set
            .eval(s)
            .into_iter()
            .filter(|&j| (j as usize) < self.speculations.len())
            .map(|j| self.speculations[j as usize])
            .collect();
        for v in released {
            self.add_a(v);
            for i in 0..self.sides.len() {
                self.add_side(i, v);
            }
        }

        let case;
        match self.find_speculation(s)? {
            None => {
                // Failure branch: the working side set grows by one fresh
                // element.
                case = "grow";
                let pending = self.pending_speculations();
                let i = self.sides.len() - 1;
                let v = least_working(0, &[&pending, &self.sides[i].elems]);
                self.add_side(i, v);
            }
            Some((x, ext)) => {
                case = "step";
                self.speculations.push(x);
                self.spec_set.insert(x);
                // Flush everything below the extension into the base set and
                // append it to the chain, skipping pending speculations.
                let mut alpha = TextPrefix::empty();
                if let Some(v) = ext {
                    alpha.push(v);
                }
                let flush_to = alpha.max_symbol();
                let pending = self.pending_speculations();
                let mut beta = Vec::new();
                if let Some(hi) = flush_to {
                    for y in 0..=hi {
                        if !is_marker(y) && !pending.contains(&y) {
                            beta.push(y);
                        }
                    }
                }
                for &y in &beta {
                    self.add_a(y);
                }
                self.sigma = self.sigma.concat(&alpha).concat(&TextPrefix::new(beta));
                // Tag and freeze the working side set; open the next one.
                let i = self.sides.len() - 1;
                self.steps_done += 1;
                let step = self.steps_done;
                self.add_side(i, tag_elem(step));
                self.sides[i].tagged_at = Some(s);
                self.open_side();
            }
        }

        self.sigma_lengths.push(self.sigma.len());
        self.hyp_chain.push(self.m.hypothesis(&self.sigma, s));
        self.sides_by_stage.push(self.sides.len());
        self.summaries.push(StageSummary {
            stage: s,
            case: case.into(),
            enumerated: self.enumerated,
            injuries: 0,
        });
        self.stage += 1;
        Ok(())
    }
}

impl StageMachine for SpeculationMachine {
    fn completed_stages(&self) -> u64 {
        self.stage
    }

    fn step(&mut self) {
        self.run_stage().expect("hypothesis codes resolve in the registry");
    }

    fn violations(&self) -> Vec<InvariantViolation> {
        let mut out = Vec::new();
        let stage = self.stage.saturating_sub(1);
        let mut push = |invariant: &str, detail: String| {
            out.push(InvariantViolation { stage, invariant: invariant.into(), detail });
        };
        // Pending speculations stay out of every tagged side set.
        let pending = self.pending_speculations();
        for (i, side) in self.sides.iter().enumerate() {
            if side.tagged_at.is_some() {
                if let Some(&v) = pending.iter().find(|v| side.elems.contains(v)) {
                    push(
                        "pending-disjoint",
                        format!("side {} holds pending speculation {v}", i + 1),
                    );
                }
            }
        }
        // Column 0 of the base set stays empty.
        if let Some(&v) = self.a.iter().find(|&&v| unpair(v).0 == 0) {
            push("base-untagged", format!("base set holds column-0 element {v}"));
        }
        // The chain only ever extends.
        if self.sigma_lengths.windows(2).any(|w| w[0] > w[1]) {
            push("chain", "string chain shrank".into());
        }
        // Identity markers present in every set.
        let mut all_sets: Vec<(String, &BTreeSet<Nat>)> = vec![("base".into(), &self.a)];
        for (i, s) in self.sides.iter().enumerate() {
            all_sets.push((format!("side {}", i + 1), &s.elems));
        }
        for (name, set) in all_sets {
            for marker in [learner_marker(self.m_id), control_marker(self.e_id)] {
                if !set.contains(&marker) {
                    push("identity-markers", format!("{name} misses marker {marker}"));
                }
            }
        }
        out
    }

    fn stage_log(&self) -> &[StageSummary] {
        &self.summaries
    }
}

/// Run the construction for `stages` stages past the seed.
pub fn speculation_build(
    reg: &SharedRegistry,
    m: &Learner,
    m_id: u64,
    e_set: &StageSet,
    e_id: u64,
    stages: u64,
) -> Result<(Family, SpeculationMachine)> {
    if stages == 0 {
        return Err(Error::ZeroStageBudget);
    }
    let mut machine = SpeculationMachine::new(Arc::clone(reg), m, m_id, e_set, e_id);
    for _ in 0..stages {
        machine.run_stage()?;
    }
    let family = machine.family(stages);
    Ok((family, machine))
}

/// One construction run the dispatching learner knows how to recognize.
pub struct SpeculationEntry {
    pub m_id: u64,
    pub e_id: u64,
    pub machine: SpeculationMachine,
}

struct EntryCodes {
    m_id: u64,
    e_id: u64,
    machine: Arc<SpeculationMachine>,
    base: Code,
    sides: Vec<Code>,
    unions: Vec<Code>,
    cap: Stage,
}

/// The dispatching learner over completed construction runs.
///
/// Inputs carrying fewer than two column-1 identity markers answer code 0.
/// Otherwise the entry matching the markers takes over: a column-0 tag names
/// the corresponding side set; content inside the replayed base set (at the
/// input length as the stage) names the base; anything else names the
/// tag-stripped union of the base with the newest side set open at that
/// stage.
pub fn speculation_learner(
    reg: &mut Registry,
    entries: Vec<SpeculationEntry>,
    cap: Stage,
) -> Result<Learner> {
    let mut coded = Vec::new();
    for entry in entries {
        let machine = entry.machine;
        let base = reg.register(machine.base_replay(cap))?;
        let mut sides = Vec::new();
        let mut unions = Vec::new();
        for i in 0..machine.side_count() {
            sides.push(reg.register(machine.side_replay(i, cap))?);
            unions.push(reg.register(machine.union_replay(i, cap))?);
        }
        coded.push(EntryCodes {
            m_id: entry.m_id,
            e_id: entry.e_id,
            machine: Arc::new(machine),
            base,
            sides,
            unions,
            cap,
        });
    }
    let coded = Arc::new(coded);
    Ok(Learner::total(100, move |sigma| {
        let content = sigma.content();
        let col1 = content.iter().filter(|&&v| unpair(v).0 == 1).count();
        if col1 <= 1 {
            return Hypothesis::Guess(Code::EMPTY);
        }
        let entry = coded.iter().find(|e| {
            content.contains(&learner_marker(e.m_id)) && content.contains(&control_marker(e.e_id))
        });
        let Some(entry) = entry else {
            return Hypothesis::Guess(Code::EMPTY);
        };
        // Tag dispatch: least column-0 tag present.
        let tag = content
            .iter()
            .find_map(|&v| {
                let (c, x) = unpair(v);
                (c == 0 && x >= 1).then_some(x)
            });
        if let Some(step) = tag {
            if let Some(code) = entry.sides.get(step as usize - 1) {
                return Hypothesis::Guess(*code);
            }
        }
        let stage = (sigma.len() as Stage).min(entry.cap);
        let base_now = entry.machine.base_at(stage);
        if content.iter().all(|v| base_now.contains(v)) {
            return Hypothesis::Guess(entry.base);
        }
        let newest = entry.machine.sides_at(stage);
        Hypothesis::Guess(entry.unions[newest - 1])
    }))
}

/// The speculating learner used to drive the construction in tests and
/// audits: it always guesses its own content plus one fresh element.
pub fn content_plus_one_learner(id: u64) -> Learner {
    Learner::total(id, |sigma| {
        let mut set = sigma.content();
        let next = least_working(set.iter().next_back().map_or(0, |&m| m + 1), &[]);
        set.insert(next);
        match Code::finite(&set) {
            Ok(c) => Hypothesis::Guess(c),
            Err(_) => Hypothesis::NoGuess,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shared() -> SharedRegistry {
        Registry::new().into_shared()
    }

    fn full_control() -> StageSet {
        StageSet::from_fn("full", |s| (0..=s).collect())
    }

    #[test]
    fn never_guessing_learner_never_completes_a_step() {
        let reg = shared();
        let m = Learner::total(0, |_| Hypothesis::NoGuess);
        let (_, machine) =
            speculation_build(&reg, &m, 0, &StageSet::empty("e"), 0, 40).unwrap();
        assert_eq!(machine.steps_done(), 0);
        assert_eq!(machine.side_count(), 1);
        // The working side set grew by one fresh element per stage.
        let growth: u64 = machine
            .stage_log()
            .iter()
            .filter(|r| r.case == "grow")
            .count() as u64;
        assert_eq!(growth, 40);
        assert!(machine.violations().is_empty());
    }

    #[test]
    fn speculating_learner_completes_steps_every_stage() {
        let reg = shared();
        let m = content_plus_one_learner(3);
        let (_, machine) = speculation_build(&reg, &m, 3, &full_control(), 1, 50).unwrap();
        assert!(machine.steps_done() >= 45, "steps: {}", machine.steps_done());
        assert!(machine.violations().is_empty());
        // The chain grows and hypotheses along it keep changing content.
        let distinct: BTreeSet<Hypothesis> = machine.chain_hypotheses().iter().copied().collect();
        assert!(distinct.len() >= 10, "distinct hypotheses: {}", distinct.len());
    }

    #[test]
    fn pending_disjointness_holds_with_an_empty_control() {
        let reg = shared();
        let m = content_plus_one_learner(3);
        let mut machine =
            SpeculationMachine::new(Arc::clone(&reg), &m, 3, &StageSet::empty("none"), 0);
        for _ in 0..60 {
            machine.step();
            let v = machine.violations();
            assert!(v.is_empty(), "stage {}: {v:?}", machine.completed_stages());
        }
        // Nothing was ever released, so all speculations stay pending.
        assert_eq!(
            machine.pending_speculations().len() as u64,
            machine.steps_done()
        );
    }

    #[test]
    fn full_control_releases_everything() {
        let reg = shared();
        let m = content_plus_one_learner(3);
        let (_, machine) = speculation_build(&reg, &m, 3, &full_control(), 1, 50).unwrap();
        // Only the newest speculation can still be pending.
        assert!(machine.pending_speculations().len() <= 1);
    }

    #[test]
    fn family_replay_is_monotone_and_tagged() {
        let reg = shared();
        let m = content_plus_one_learner(3);
        let (fam, machine) = speculation_build(&reg, &m, 3, &full_control(), 1, 30).unwrap();
        assert_eq!(fam.carrier().first_monotonicity_violation(35), None);
        // Columns: base at 0, sides at 1.., with tags on completed sides.
        for i in 1..machine.side_count() {
            let col = fam.column(i as Nat, 30);
            assert!(col.contains(&tag_elem(i as u64)), "side {i}");
        }
    }

    #[test]
    fn dispatch_learner_reads_tags_and_markers() {
        let mut reg = Registry::new();
        let shared_reg = Registry::new().into_shared();
        let m = content_plus_one_learner(3);
        let (_, machine) = speculation_build(&shared_reg, &m, 3, &full_control(), 1, 30).unwrap();
        let n = speculation_learner(
            &mut reg,
            vec![SpeculationEntry { m_id: 3, e_id: 1, machine }],
            60,
        )
        .unwrap();
        // Fewer than two identity markers: code 0.
        let h = n.hypothesis(&TextPrefix::new(vec![learner_marker(3), 6]), 0);
        assert_eq!(h, Hypothesis::Guess(Code::EMPTY));
        // Tag plus identity markers: the corresponding side set.
        let h = n.hypothesis(
            &TextPrefix::new(vec![learner_marker(3), control_marker(1), tag_elem(2)]),
            0,
        );
        let code = h.code().unwrap();
        let named = reg.lookup(code).unwrap();
        assert!(named.label().contains("side2"));
    }
}
