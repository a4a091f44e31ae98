//! The label-synchronization family machine.
//!
//! Driven by a total predicate `R(e, x, y, z)`, the machine builds a growing
//! family of sets of pairs and resolves two opposing forces. Progress for a
//! parameter `x` (measured by a counter `h_x` that bumps whenever the largest
//! fully-covered initial segment of `y`-values for `x` grows) causes sets
//! sharing an `x`-label to be synchronized ever deeper and a new set to be
//! labeled; stagnation causes each label group to sprout a clone that agrees
//! with the group below its bound but permanently misses one designated
//! witness value.
//!
//! Layout: each member set holds pair-encoded elements `pair(column, value)`.
//! Column 0 is reserved for withheld-witness values; an `x`-label `k` is the
//! element `pair(x + 1, k)` (so labels never land in the reserved column).
//! For every group the machine maintains one withheld value per member: all
//! other members contain it in the reserved column, the member itself never
//! does.
//!
//! Synchronization is eager and event-driven. Every element entering a set
//! propagates to that set's group mates whenever it sits below the group
//! bound (the label pairing value plus the progress counter) — the reserved
//! column included. Three follow-up events keep the state coherent:
//!
//! - a group's label landing in a non-member makes that set join the group,
//!   receiving the witness pool, a bounded copy of a member, and a fresh
//!   witness of its own;
//! - a witness value reaching its own set (possible only after a bound grew
//!   past it or a wider group shares it) is refreshed: the old value stays,
//!   now held by everyone, and a fresh value above every bound becomes the
//!   new witness;
//! - a progress bump widens the bounds of the groups involved, so their
//!   below-bound slices are redistributed.
//!
//! Witness values and label values come from separate monotone counters; the
//! witness counter absorbs every bound ever computed, so freshly issued
//! witnesses always start above every group's reach.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use crate::kernel::{pair, unpair, unpair3, Family, Nat, Stage, StageSet};
use crate::{Error, Result};

use super::{InvariantViolation, StageMachine, StageSummary};

/// Total predicate driving the construction.
pub type TriplePredicate = Arc<dyn Fn(u64, u64, u64, u64) -> bool + Send + Sync>;

const RESERVED: Nat = 0;

fn label_elem(x: u64, k: u64) -> Nat {
    pair(x + 1, k)
}

fn withheld_elem(v: Nat) -> Nat {
    pair(RESERVED, v)
}

type Key = (u64, u64);

#[derive(Clone, Debug, Default)]
struct Group {
    members: Vec<usize>,
    member_set: BTreeSet<usize>,
    withheld: Vec<Nat>,
    /// Elements known to be distributed to every member (the below-bound
    /// slice); guards propagation against quadratic re-sends.
    shared: BTreeSet<Nat>,
}

/// Per-stage bookkeeping beyond the common summary.
#[derive(Clone, Debug)]
pub struct LabelSyncRecord {
    pub summary: StageSummary,
    pub x: u64,
    /// Number of live groups for the stage's `x` when the action ran.
    pub groups_of_x: usize,
    pub sets_before: usize,
    pub sets_after: usize,
}

pub struct LabelSyncMachine {
    predicate: TriplePredicate,
    e: u64,
    stage: u64,
    sets: Vec<BTreeSet<Nat>>,
    log: Vec<(Stage, Nat)>,
    covered: BTreeMap<u64, BTreeSet<u64>>,
    segment_top: BTreeMap<u64, Option<u64>>,
    h: BTreeMap<u64, u64>,
    h_last_visit: BTreeMap<u64, u64>,
    groups: BTreeMap<Key, Group>,
    /// Label element -> owning group, for join detection on insert.
    label_index: BTreeMap<Nat, Key>,
    /// Witness value -> (group, member position), for trample detection.
    victim_index: BTreeMap<Nat, (Key, usize)>,
    /// Groups each set belongs to.
    groups_of_set: Vec<BTreeSet<Key>>,
    propagate_queue: VecDeque<(usize, Nat)>,
    key_scratch: Vec<Key>,
    member_scratch: Vec<usize>,
    join_queue: VecDeque<(Key, usize)>,
    refresh_queue: VecDeque<(Key, usize)>,
    rebound_queue: VecDeque<Key>,
    next_label: u64,
    next_withheld: Nat,
    issued_withheld: BTreeSet<Nat>,
    records: Vec<LabelSyncRecord>,
    summaries: Vec<StageSummary>,
    last_x: Option<u64>,
    enumerated_this_stage: u64,
}

impl LabelSyncMachine {
    pub fn new(predicate: TriplePredicate, e: u64) -> Self {
        LabelSyncMachine {
            predicate,
            e,
            stage: 0,
            sets: Vec::new(),
            log: Vec::new(),
            covered: BTreeMap::new(),
            segment_top: BTreeMap::new(),
            h: BTreeMap::new(),
            h_last_visit: BTreeMap::new(),
            groups: BTreeMap::new(),
            label_index: BTreeMap::new(),
            victim_index: BTreeMap::new(),
            groups_of_set: Vec::new(),
            propagate_queue: VecDeque::new(),
            key_scratch: Vec::new(),
            member_scratch: Vec::new(),
            join_queue: VecDeque::new(),
            refresh_queue: VecDeque::new(),
            rebound_queue: VecDeque::new(),
            next_label: 0,
            next_withheld: 1,
            issued_withheld: BTreeSet::new(),
            records: Vec::new(),
            summaries: Vec::new(),
            last_x: None,
            enumerated_this_stage: 0,
        }
    }

    pub fn progress_counter(&self, x: u64) -> u64 {
        self.h.get(&x).copied().unwrap_or(0)
    }

    pub fn set_count(&self) -> usize {
        self.sets.len()
    }

    pub fn set_elements(&self, g: usize) -> &BTreeSet<Nat> {
        &self.sets[g]
    }

    pub fn group_keys(&self) -> Vec<Key> {
        self.groups.keys().copied().collect()
    }

    pub fn group_members(&self, key: Key) -> &[usize] {
        &self.groups[&key].members
    }

    pub fn withheld_values(&self, key: Key) -> &[Nat] {
        &self.groups[&key].withheld
    }

    pub fn records(&self) -> &[LabelSyncRecord] {
        &self.records
    }

    /// Group bound: the label pairing value plus the progress counter.
    pub fn bound(&self, x: u64, k: u64) -> Nat {
        pair(x, k) + self.progress_counter(x)
    }

    /// The family built so far, replayed up to `cap` stages.
    pub fn family(&self, cap: Stage) -> Family {
        let mut log = self.log.clone();
        log.sort();
        Family::new(
            StageSet::from_log("label-sync", Arc::new(log), cap),
            Some(self.sets.len() as u64),
        )
    }

    fn fresh_withheld(&mut self, above: Nat) -> Nat {
        let v = self.next_withheld.max(above + 1);
        self.next_withheld = v + 1;
        self.issued_withheld.insert(v);
        v
    }

    fn absorb_bound(&mut self, m: Nat) {
        self.next_withheld = self.next_withheld.max(m + 1);
    }

    fn within_bound(&self, key: Key, elem: Nat) -> bool {
        let m = self.bound(key.0, key.1);
        let (col, v) = unpair(elem);
        col <= m + 1 && v <= m
    }

    /// Distribute an in-bound element to every member of a group, exactly
    /// once per (group, element).
    fn share(&mut self, key: Key, elem: Nat) {
        if !self.groups.get_mut(&key).expect("group").shared.insert(elem) {
            return;
        }
        let mut members = std::mem::take(&mut self.member_scratch);
        members.clear();
        members.extend_from_slice(&self.groups[&key].members);
        for &o in &members {
            self.add_elem(o, elem);
        }
        self.member_scratch = members;
    }

    fn add_elem(&mut self, g: usize, elem: Nat) -> bool {
        if !self.sets[g].insert(elem) {
            return false;
        }
        self.log.push((self.stage, pair(g as Nat, elem)));
        self.enumerated_this_stage += 1;
        self.propagate_queue.push_back((g, elem));
        let (col, v) = unpair(elem);
        if col == RESERVED {
            if let Some(&(key, i)) = self.victim_index.get(&v) {
                if self.groups[&key].members[i] == g {
                    self.refresh_queue.push_back((key, i));
                }
            }
        } else if col >= 2 {
            // Only label elements (columns >= 2) can trigger joins.
            if let Some(&key) = self.label_index.get(&elem) {
                if !self.groups[&key].member_set.contains(&g) {
                    self.join_queue.push_back((key, g));
                }
            }
        }
        true
    }

    fn materialize(&mut self) -> usize {
        self.sets.push(BTreeSet::new());
        self.groups_of_set.push(BTreeSet::new());
        self.sets.len() - 1
    }

    fn enroll(&mut self, key: Key, g: usize, witness: Nat) {
        let group = self.groups.get_mut(&key).expect("group exists");
        group.members.push(g);
        group.member_set.insert(g);
        group.withheld.push(witness);
        let i = group.withheld.len() - 1;
        self.victim_index.insert(witness, (key, i));
        self.groups_of_set[g].insert(key);
    }

    /// Settle all pending events. Order: element propagation first, then
    /// joins, witness refreshes, and bound redistributions.
    fn drain(&mut self) {
        loop {
            if let Some((g, elem)) = self.propagate_queue.pop_front() {
                let mut keys = std::mem::take(&mut self.key_scratch);
                keys.clear();
                keys.extend(self.groups_of_set[g].iter().copied());
                for &key in &keys {
                    if self.within_bound(key, elem) {
                        self.share(key, elem);
                    }
                }
                self.key_scratch = keys;
                continue;
            }
            if let Some((key, g)) = self.join_queue.pop_front() {
                if self.groups[&key].member_set.contains(&g) {
                    continue;
                }
                let m = self.bound(key.0, key.1);
                self.absorb_bound(m);
                // Pool of existing witnesses, then a bounded copy of the
                // first member, then a fresh witness of the joiner's own.
                let pool = self.groups[&key].withheld.clone();
                for p in pool {
                    self.add_elem(g, withheld_elem(p));
                }
                let slice: Vec<Nat> = self.groups[&key].shared.iter().copied().collect();
                for e in slice {
                    self.add_elem(g, e);
                }
                let fresh = self.fresh_withheld(m);
                let others = self.groups[&key].members.clone();
                self.enroll(key, g, fresh);
                for o in others {
                    self.add_elem(o, withheld_elem(fresh));
                }
                // The joiner's pre-existing elements must reach its new group
                // mates too; re-propagating everything covers them.
                let mine: Vec<(usize, Nat)> =
                    self.sets[g].iter().map(|&e| (g, e)).collect();
                self.propagate_queue.extend(mine);
                continue;
            }
            if let Some((key, i)) = self.refresh_queue.pop_front() {
                let victim = self.groups[&key].members[i];
                let old = self.groups[&key].withheld[i];
                // Stale event: already refreshed, or not actually shared.
                if self.victim_index.get(&old) != Some(&(key, i))
                    || !self.sets[victim].contains(&withheld_elem(old))
                {
                    continue;
                }
                let m = self.bound(key.0, key.1);
                self.absorb_bound(m);
                let fresh = self.fresh_withheld(m);
                self.victim_index.remove(&old);
                self.victim_index.insert(fresh, (key, i));
                self.groups.get_mut(&key).expect("group").withheld[i] = fresh;
                let members = self.groups[&key].members.clone();
                for (j, o) in members.into_iter().enumerate() {
                    if j != i {
                        self.add_elem(o, withheld_elem(fresh));
                    }
                }
                continue;
            }
            if let Some(key) = self.rebound_queue.pop_front() {
                // The bound grew: elements previously above it must now be
                // distributed.
                let members = self.groups[&key].members.clone();
                let mut fresh_in_bound: Vec<Nat> = Vec::new();
                for &g in &members {
                    for &e in &self.sets[g] {
                        if self.within_bound(key, e) && !self.groups[&key].shared.contains(&e) {
                            fresh_in_bound.push(e);
                        }
                    }
                }
                for e in fresh_in_bound {
                    self.share(key, e);
                }
                continue;
            }
            break;
        }
    }

    /// Least-index set with no `x`-label yet, materializing a new one when
    /// every existing set is labeled.
    fn least_unlabeled(&mut self, x: u64) -> usize {
        (0..self.sets.len())
            .find(|&g| !self.groups_of_set[g].iter().any(|k| k.0 == x))
            .unwrap_or_else(|| self.materialize())
    }
}

impl StageMachine for LabelSyncMachine {
    fn completed_stages(&self) -> u64 {
        self.stage
    }

    fn step(&mut self) {
        let s = self.stage;
        let (x, y, z) = unpair3(s);
        self.enumerated_this_stage = 0;
        let sets_before = self.sets.len();

        if x == 0 {
            // Progress is only defined for positive first coordinates.
            let summary = StageSummary {
                stage: s,
                case: "skip".into(),
                enumerated: 0,
                injuries: 0,
            };
            self.records.push(LabelSyncRecord {
                summary: summary.clone(),
                x,
                groups_of_x: 0,
                sets_before,
                sets_after: sets_before,
            });
            self.summaries.push(summary);
            self.last_x = None;
            self.stage += 1;
            return;
        }

        // Coverage update for x: the largest fully-covered initial segment
        // of y-values, and the progress counter that counts its growth.
        if (self.predicate)(self.e, x - 1, y, z) {
            self.covered.entry(x).or_default().insert(y);
        }
        let covered = self.covered.entry(x).or_default();
        let top = self.segment_top.entry(x).or_insert(None);
        let mut grew = false;
        loop {
            let next = top.map_or(0, |j| j + 1);
            if covered.contains(&next) {
                *top = Some(next);
                grew = true;
            } else {
                break;
            }
        }
        if grew {
            *self.h.entry(x).or_insert(0) += 1;
            // Bounds for every group of x just moved.
            let keys: Vec<Key> = self.groups.keys().copied().filter(|k| k.0 == x).collect();
            for key in &keys {
                let m = self.bound(key.0, key.1);
                self.absorb_bound(m);
            }
            self.rebound_queue.extend(keys);
            self.drain();
        }
        let increase = self.progress_counter(x) > self.h_last_visit.get(&x).copied().unwrap_or(0);
        let groups_of_x = self.groups.keys().filter(|k| k.0 == x).count();

        if increase {
            // Progress: label the least unlabeled set with a fresh label.
            let g = self.least_unlabeled(x);
            let k = self.next_label;
            self.next_label += 1;
            let key = (x, k);
            let m = self.bound(x, k);
            self.absorb_bound(m);
            let p0 = self.fresh_withheld(m);
            self.groups.insert(key, Group::default());
            self.label_index.insert(label_elem(x, k), key);
            self.enroll(key, g, p0);
            self.add_elem(g, label_elem(x, k));
            // Seed the group's shared slice with the founder's elements.
            let mine: Vec<(usize, Nat)> = self.sets[g].iter().map(|&e| (g, e)).collect();
            self.propagate_queue.extend(mine);
            self.drain();
        } else {
            // Stagnation: each group of x sprouts a clone agreeing with its
            // last member below the bound, holding the whole witness pool,
            // and missing only its own fresh witness.
            let keys: Vec<Key> = self.groups.keys().copied().filter(|k| k.0 == x).collect();
            for key in keys {
                let m = self.bound(key.0, key.1);
                self.absorb_bound(m);
                let slice: Vec<Nat> = self.groups[&key].shared.iter().copied().collect();
                let pool = self.groups[&key].withheld.clone();
                let olds = self.groups[&key].members.clone();
                let g_new = self.materialize();
                let fresh = self.fresh_withheld(m);
                self.enroll(key, g_new, fresh);
                for e in slice {
                    self.add_elem(g_new, e);
                }
                self.add_elem(g_new, label_elem(key.0, key.1));
                for p in pool {
                    self.add_elem(g_new, withheld_elem(p));
                }
                for o in olds {
                    self.add_elem(o, withheld_elem(fresh));
                }
                self.drain();
            }
        }

        let summary = StageSummary {
            stage: s,
            case: if increase { "progress".into() } else { "stall".into() },
            enumerated: self.enumerated_this_stage,
            injuries: 0,
        };
        self.records.push(LabelSyncRecord {
            summary: summary.clone(),
            x,
            groups_of_x,
            sets_before,
            sets_after: self.sets.len(),
        });
        self.summaries.push(summary);
        self.h_last_visit.insert(x, self.progress_counter(x));
        self.last_x = Some(x);
        self.stage += 1;
    }

    fn violations(&self) -> Vec<InvariantViolation> {
        let mut out = Vec::new();
        let stage = self.stage.saturating_sub(1);
        let mut push = |invariant: &str, detail: String| {
            out.push(InvariantViolation { stage, invariant: invariant.into(), detail });
        };

        // Withheld witnesses: each member misses exactly its own value and
        // holds everyone else's in the reserved column.
        for (key, group) in &self.groups {
            for (i, &g) in group.members.iter().enumerate() {
                if self.sets[g].contains(&withheld_elem(group.withheld[i])) {
                    push(
                        "withheld",
                        format!("group {key:?} member {g} contains its own witness"),
                    );
                }
                for (j, &p) in group.withheld.iter().enumerate() {
                    if j != i && !self.sets[g].contains(&withheld_elem(p)) {
                        push(
                            "withheld",
                            format!("group {key:?} member {g} misses witness of member {j}"),
                        );
                    }
                }
            }
        }

        // Label uniqueness: a label value belongs to at most one group.
        let mut seen = BTreeSet::new();
        for &(_, k) in self.groups.keys() {
            if !seen.insert(k) {
                push("label-uniqueness", format!("label value {k} reused"));
            }
        }

        // Membership is exactly label possession.
        for (key, group) in &self.groups {
            let lab = label_elem(key.0, key.1);
            for (g, set) in self.sets.iter().enumerate() {
                let has = set.contains(&lab);
                let member = group.member_set.contains(&g);
                if has != member {
                    push(
                        "membership",
                        format!("group {key:?} and set {g}: label={has}, member={member}"),
                    );
                }
            }
        }

        // Reserved column purity: only issued witness values live there.
        for (g, set) in self.sets.iter().enumerate() {
            for &e in set {
                let (col, v) = unpair(e);
                if col == RESERVED && !self.issued_withheld.contains(&v) {
                    push("reserved-column", format!("set {g} holds foreign value {v}"));
                }
            }
        }

        // Agreement below the bound for the groups touched by the last stage.
        if let Some(x) = self.last_x {
            for (key, group) in self.groups.iter().filter(|(k, _)| k.0 == x) {
                let slices: Vec<BTreeSet<Nat>> = group
                    .members
                    .iter()
                    .map(|&g| {
                        self.sets[g]
                            .iter()
                            .copied()
                            .filter(|&e| self.within_bound(*key, e))
                            .collect()
                    })
                    .collect();
                for w in slices.windows(2) {
                    if w[0] != w[1] {
                        push(
                            "agreement",
                            format!(
                                "group {key:?} members disagree below bound {}",
                                self.bound(key.0, key.1)
                            ),
                        );
                        break;
                    }
                }
            }
        }

        // Family growth: stalls add exactly one clone per live group of the
        // stage's x; progress stages add at most the one labeled set.
        for rec in &self.records {
            let grown = rec.sets_after - rec.sets_before;
            let expected_ok = match rec.summary.case.as_str() {
                "stall" => grown == rec.groups_of_x,
                "progress" => grown <= 1,
                _ => grown == 0,
            };
            if !expected_ok {
                push(
                    "growth",
                    format!(
                        "stage {} case {} grew {} sets with {} groups",
                        rec.summary.stage, rec.summary.case, grown, rec.groups_of_x
                    ),
                );
            }
        }
        out
    }

    fn stage_log(&self) -> &[StageSummary] {
        &self.summaries
    }
}

/// Run the machine for `stages` stages and return the family plus the full
/// state for audit.
pub fn label_sync_build(
    predicate: TriplePredicate,
    e: u64,
    stages: u64,
) -> Result<(Family, LabelSyncMachine)> {
    if stages == 0 {
        return Err(Error::ZeroStageBudget);
    }
    let mut machine = LabelSyncMachine::new(predicate, e);
    for _ in 0..stages {
        machine.step();
    }
    let family = machine.family(stages);
    Ok((family, machine))
}
