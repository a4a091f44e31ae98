//! Hypothesis codes, hypotheses, and budgeted learners.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::{Nat, TextPrefix};
use crate::{Error, Result};

/// Largest element a finite set may contain and still receive a canonical
/// finite code (the code is the membership bit vector, so elements index bits
/// of a 128-bit word with the top bit reserved for registered codes).
pub const FINITE_ELEM_LIMIT: u32 = 127;

const REGISTERED_BIT: u128 = 1 << 127;

/// A hypothesis code: a natural number naming a set.
///
/// The code space is split in two. Codes below `2^127` form the canonical
/// finite block: code `ℓ` names the finite set whose members are the bit
/// positions set in `ℓ` (so code 0 names the empty set, code 5 names `{0,2}`).
/// Codes at or above `2^127` are issued by the registry for stage sets.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Code(u128);

impl Code {
    /// The canonical code for the empty set.
    pub const EMPTY: Code = Code(0);

    /// Canonical code of a finite set via its membership bit vector.
    pub fn finite(set: &BTreeSet<Nat>) -> Result<Code> {
        let mut mask: u128 = 0;
        for &x in set {
            if x >= FINITE_ELEM_LIMIT as Nat {
                return Err(Error::FiniteCodeOverflow(
                    set.iter().copied().collect(),
                    FINITE_ELEM_LIMIT,
                ));
            }
            mask |= 1 << x;
        }
        Ok(Code(mask))
    }

    /// Canonical code from the index of the finite set in the fixed
    /// enumeration (the bit-vector value itself).
    pub fn finite_index(index: u128) -> Result<Code> {
        if index & REGISTERED_BIT != 0 {
            return Err(Error::Other(format!(
                "finite index {index} collides with the registered code range"
            )));
        }
        Ok(Code(index))
    }

    pub(crate) fn registered(index: u64) -> Code {
        Code(REGISTERED_BIT | index as u128)
    }

    pub fn is_finite(&self) -> bool {
        self.0 & REGISTERED_BIT == 0
    }

    /// Members of the canonical finite set this code names, if it is finite.
    pub fn finite_set(&self) -> Option<BTreeSet<Nat>> {
        if !self.is_finite() {
            return None;
        }
        let mut out = BTreeSet::new();
        for b in 0..FINITE_ELEM_LIMIT {
            if self.0 & (1 << b) != 0 {
                out.insert(b as Nat);
            }
        }
        Some(out)
    }

    pub fn registry_index(&self) -> Option<u64> {
        (!self.is_finite()).then_some((self.0 & !REGISTERED_BIT) as u64)
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.registry_index() {
            Some(i) => write!(f, "R{i}"),
            None => write!(f, "D{}", self.0),
        }
    }
}

impl fmt::Debug for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Code {
    type Err = Error;

    fn from_str(s: &str) -> Result<Code> {
        let bad = || Error::Other(format!("malformed code `{s}`"));
        match s.split_at_checked(1) {
            Some(("R", rest)) => Ok(Code::registered(rest.parse().map_err(|_| bad())?)),
            Some(("D", rest)) => Code::finite_index(rest.parse().map_err(|_| bad())?),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Code {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Code {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Code, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// A learner's answer on a prefix: either no guess yet, or a code.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Hypothesis {
    NoGuess,
    Guess(Code),
}

impl Hypothesis {
    pub fn code(&self) -> Option<Code> {
        match self {
            Hypothesis::NoGuess => None,
            Hypothesis::Guess(c) => Some(*c),
        }
    }

    pub fn is_guess(&self) -> bool {
        matches!(self, Hypothesis::Guess(_))
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hypothesis::NoGuess => f.write_str("?"),
            Hypothesis::Guess(c) => write!(f, "{c}"),
        }
    }
}

impl Serialize for Hypothesis {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Hypothesis {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Hypothesis, D::Error> {
        let s = String::deserialize(de)?;
        if s == "?" {
            Ok(Hypothesis::NoGuess)
        } else {
            Ok(Hypothesis::Guess(s.parse().map_err(de::Error::custom)?))
        }
    }
}

type RespondFn = dyn Fn(&TextPrefix, u64) -> Option<Hypothesis> + Send + Sync;

/// A learning machine: a deterministic map from (prefix, step budget) to an
/// answer. `None` means the machine did not halt within the budget; the
/// criteria layer reads that as a no-guess, which keeps every learner total.
#[derive(Clone)]
pub struct Learner {
    id: u64,
    respond: Arc<RespondFn>,
}

impl Learner {
    /// A learner that always halts, whatever the budget.
    pub fn total(id: u64, f: impl Fn(&TextPrefix) -> Hypothesis + Send + Sync + 'static) -> Self {
        Learner {
            id,
            respond: Arc::new(move |p, _| Some(f(p))),
        }
    }

    /// A learner whose halting depends on the budget.
    pub fn budgeted(
        id: u64,
        f: impl Fn(&TextPrefix, u64) -> Option<Hypothesis> + Send + Sync + 'static,
    ) -> Self {
        Learner { id, respond: Arc::new(f) }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Raw budgeted evaluation; `None` means out of budget.
    pub fn respond(&self, prefix: &TextPrefix, budget: u64) -> Option<Hypothesis> {
        (self.respond)(prefix, budget)
    }

    /// Total evaluation: out-of-budget collapses to a no-guess.
    pub fn hypothesis(&self, prefix: &TextPrefix, budget: u64) -> Hypothesis {
        self.respond(prefix, budget).unwrap_or(Hypothesis::NoGuess)
    }
}

impl fmt::Debug for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Learner(m={})", self.id)
    }
}
