//! First-guess normalization of a learner.
//!
//! The normalized machine answers on `sigma` as the underlying machine does
//! on the least string (in length-then-lex order) whose content lies inside
//! `content(sigma)` and whose length is at most `|sigma|`, searching for the
//! first such string where the machine produces a guess within `|sigma|`
//! steps. This pushes any guess the machine makes anywhere inside the data
//! down to the earliest prefix that can see it.

use crate::kernel::{Hypothesis, Learner, Nat, TextPrefix};

/// All strings over `alphabet` of length at most `max_len`, in
/// length-then-lex order (lex by symbol value). The alphabet must be sorted.
fn strings_in_order(alphabet: &[Nat], max_len: usize) -> impl Iterator<Item = TextPrefix> + '_ {
    (0..=max_len).flat_map(move |len| OdometerStrings::new(alphabet, len))
}

struct OdometerStrings<'a> {
    alphabet: &'a [Nat],
    digits: Vec<usize>,
    done: bool,
}

impl<'a> OdometerStrings<'a> {
    fn new(alphabet: &'a [Nat], len: usize) -> Self {
        OdometerStrings {
            alphabet,
            digits: vec![0; len],
            done: alphabet.is_empty() && len > 0,
        }
    }
}

impl Iterator for OdometerStrings<'_> {
    type Item = TextPrefix;

    fn next(&mut self) -> Option<TextPrefix> {
        if self.done {
            return None;
        }
        let out: TextPrefix = self.digits.iter().map(|&d| self.alphabet[d]).collect();
        // Advance the rightmost digit; carry left.
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.digits[i] += 1;
            if self.digits[i] < self.alphabet.len() {
                break;
            }
            self.digits[i] = 0;
        }
        Some(out)
    }
}

/// The search space for input `sigma`: every string with content inside
/// `content(sigma)` and length at most `|sigma|`, in search order.
pub fn normalizer_search_space(sigma: &TextPrefix) -> Vec<TextPrefix> {
    let alphabet: Vec<Nat> = sigma.content().into_iter().collect();
    strings_in_order(&alphabet, sigma.len()).collect()
}

/// Normalize a learner for first-guess evaluation.
///
/// Each underlying call is budgeted at `|sigma|` steps; a call that does not
/// halt, or halts without a guess, is passed over. When no string in the
/// space yields a guess the normalized machine produces no guess either.
pub fn fin_normalize(m: &Learner) -> Learner {
    let inner = m.clone();
    Learner::total(m.id(), move |sigma| {
        let budget = sigma.len() as u64;
        let alphabet: Vec<Nat> = sigma.content().into_iter().collect();
        for tau in strings_in_order(&alphabet, sigma.len()) {
            if let Some(h @ Hypothesis::Guess(_)) = inner.respond(&tau, budget) {
                return h;
            }
        }
        Hypothesis::NoGuess
    })
}
