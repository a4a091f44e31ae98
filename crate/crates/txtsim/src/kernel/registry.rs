//! The hypothesis registry: a closed, per-experiment code space.
//!
//! A universal numbering of all programs is not implementable, so every
//! construction that needs "a code for set X" registers X here and consults
//! the registry. Codes below the registered range decode to the canonical
//! finite sets, so learners can name any small finite set without touching
//! the registry.

use std::sync::Arc;

use super::{Code, Nat, StageSet};
use crate::{Error, Result};

/// Registered stage sets plus the canonical finite block.
///
/// Mutation is confined to the setup phase: once [`Registry::freeze`] has been
/// called (or the registry is wrapped in an [`Arc`]), further registration
/// fails and the registry is safe to share across threads.
#[derive(Debug, Default)]
pub struct Registry {
    entries: Vec<StageSet>,
    frozen: bool,
}

/// A registry after setup, shareable across evaluation contexts.
pub type SharedRegistry = Arc<Registry>;

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// Register a stage set, yielding a fresh code outside the finite block.
    pub fn register(&mut self, set: StageSet) -> Result<Code> {
        if self.frozen {
            return Err(Error::RegistryFrozen);
        }
        let code = Code::registered(self.entries.len() as u64);
        self.entries.push(set);
        Ok(code)
    }

    /// End the setup phase; the registry is read-only afterwards.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn into_shared(mut self) -> SharedRegistry {
        self.freeze();
        Arc::new(self)
    }

    /// Resolve a code to the set it names. Finite-block codes decode to the
    /// canonical finite sets; registered codes look up their entry.
    pub fn lookup(&self, code: Code) -> Result<StageSet> {
        if let Some(idx) = code.registry_index() {
            return self
                .entries
                .get(idx as usize)
                .cloned()
                .ok_or_else(|| Error::UnknownCode(code.to_string()));
        }
        let set = code.finite_set().expect("finite code decodes");
        Ok(StageSet::constant(code.to_string(), set))
    }

    /// Canonical code of the `ℓ`-th finite set.
    pub fn finite_code(index: u128) -> Result<Code> {
        Code::finite_index(index)
    }

    /// Canonical code of an explicit finite set.
    pub fn finite_code_of(set: &std::collections::BTreeSet<Nat>) -> Result<Code> {
        Code::finite(set)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn register_then_lookup_returns_the_descriptor() {
        let mut reg = Registry::new();
        let set = StageSet::from_steps("w", vec![(0, vec![4]), (2, vec![6])]);
        let code = reg.register(set).unwrap();
        let got = reg.lookup(code).unwrap();
        for s in 0..10 {
            assert_eq!(got.eval(s), StageSet::from_steps("w", vec![(0, vec![4]), (2, vec![6])]).eval(s));
        }
    }

    #[test]
    fn registrations_get_distinct_codes() {
        let mut reg = Registry::new();
        let a = reg.register(StageSet::empty("a")).unwrap();
        let b = reg.register(StageSet::empty("b")).unwrap();
        assert_ne!(a, b);
        assert!(!a.is_finite() && !b.is_finite());
    }

    #[test]
    fn finite_codes_decode_canonically() {
        let reg = Registry::new();
        let code = Registry::finite_code(5).unwrap();
        assert_eq!(reg.lookup(code).unwrap().eval_set(0), BTreeSet::from([0, 2]));
        // Same code from the explicit set.
        assert_eq!(Registry::finite_code_of(&BTreeSet::from([0, 2])).unwrap(), code);
    }

    #[test]
    fn frozen_registry_rejects_registration() {
        let mut reg = Registry::new();
        reg.freeze();
        assert!(matches!(
            reg.register(StageSet::empty("x")),
            Err(Error::RegistryFrozen)
        ));
    }

    #[test]
    fn unknown_code_is_an_error() {
        let reg = Registry::new();
        assert!(matches!(
            reg.lookup(Code::registered(7)),
            Err(Error::UnknownCode(_))
        ));
    }

    #[test]
    fn registered_sets_stay_monotone_under_sampling() {
        let mut reg = Registry::new();
        let codes: Vec<Code> = [
            StageSet::interval("l3", 3),
            StageSet::from_steps("w", vec![(1, vec![9]), (30, vec![2])]),
            StageSet::empty("e"),
        ]
        .into_iter()
        .map(|s| reg.register(s).unwrap())
        .collect();
        for c in codes {
            let set = reg.lookup(c).unwrap();
            assert_eq!(set.first_monotonicity_violation(1000), None);
        }
    }
}
