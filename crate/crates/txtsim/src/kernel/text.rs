//! Text prefixes and stage-approximated texts.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use super::{Nat, Stage};

/// A finite initial segment of a text: an ordered sequence of naturals.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TextPrefix(Vec<Nat>);

impl TextPrefix {
    pub fn new(symbols: impl Into<Vec<Nat>>) -> Self {
        TextPrefix(symbols.into())
    }

    pub fn empty() -> Self {
        TextPrefix(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Nat] {
        &self.0
    }

    /// The unordered range of the prefix, ascending.
    pub fn content(&self) -> BTreeSet<Nat> {
        self.0.iter().copied().collect()
    }

    /// First `n` symbols (the whole prefix if shorter).
    pub fn take(&self, n: usize) -> TextPrefix {
        TextPrefix(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn push(&mut self, symbol: Nat) {
        self.0.push(symbol);
    }

    pub fn pop(&mut self) -> Option<Nat> {
        self.0.pop()
    }

    /// Shorten in place to the first `len` symbols.
    pub fn truncate(&mut self, len: usize) {
        self.0.truncate(len);
    }

    pub fn concat(&self, other: &TextPrefix) -> TextPrefix {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        TextPrefix(v)
    }

    /// Whether `self` is an initial segment of `other`.
    pub fn is_prefix_of(&self, other: &TextPrefix) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn max_symbol(&self) -> Option<Nat> {
        self.0.iter().copied().max()
    }

    pub fn min_symbol(&self) -> Option<Nat> {
        self.0.iter().copied().min()
    }
}

impl From<Vec<Nat>> for TextPrefix {
    fn from(v: Vec<Nat>) -> Self {
        TextPrefix(v)
    }
}

impl FromIterator<Nat> for TextPrefix {
    fn from_iter<T: IntoIterator<Item = Nat>>(iter: T) -> Self {
        TextPrefix(iter.into_iter().collect())
    }
}

impl fmt::Debug for TextPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// A stage-indexed sequence of finite prefixes: `eval(s, n)` is the value at
/// position `n` of the stage-`s` approximation. Totality on the examined
/// rectangle is the caller's obligation; per-position stabilization is a
/// tested property, never an assumed one.
#[derive(Clone)]
pub struct ApproxText {
    eval: Arc<dyn Fn(Stage, u64) -> Nat + Send + Sync>,
}

impl ApproxText {
    pub fn from_fn(eval: impl Fn(Stage, u64) -> Nat + Send + Sync + 'static) -> Self {
        ApproxText { eval: Arc::new(eval) }
    }

    /// A computable text: the same prefix at every stage.
    pub fn constant(prefix: TextPrefix) -> Self {
        let syms = prefix.0;
        ApproxText::from_fn(move |_, n| syms[(n as usize).min(syms.len().saturating_sub(1))])
    }

    pub fn value(&self, stage: Stage, position: u64) -> Nat {
        (self.eval)(stage, position)
    }

    /// The stage-`s` prefix of the first `len` positions.
    pub fn prefix(&self, stage: Stage, len: u64) -> TextPrefix {
        (0..len).map(|n| (self.eval)(stage, n)).collect()
    }
}

impl fmt::Debug for ApproxText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApproxText")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_is_the_unordered_range() {
        let p = TextPrefix::new(vec![3, 3, 1]);
        assert_eq!(p.content(), BTreeSet::from([1, 3]));
        assert!(TextPrefix::empty().content().is_empty());
        let mut long = Vec::new();
        for _ in 0..2 {
            long.extend(0..10);
        }
        assert_eq!(
            TextPrefix::new(long).content(),
            (0..10).collect::<BTreeSet<_>>()
        );
    }

    #[test]
    fn content_ignores_symbol_order() {
        let p = TextPrefix::new(vec![9, 2, 9, 4]);
        let mut sorted = p.symbols().to_vec();
        sorted.sort();
        assert_eq!(p.content(), TextPrefix::new(sorted).content());
    }

    #[test]
    fn prefix_order_and_concat() {
        let a = TextPrefix::new(vec![1, 2]);
        let b = a.concat(&TextPrefix::new(vec![3]));
        assert!(a.is_prefix_of(&b));
        assert!(!b.is_prefix_of(&a));
        assert_eq!(b.take(2), a);
        assert!(TextPrefix::empty().is_prefix_of(&a));
    }

    #[test]
    fn approx_text_prefix_reads_positions() {
        let f = ApproxText::from_fn(|s, n| if s < 5 { n } else { n + 1 });
        assert_eq!(f.prefix(0, 3), TextPrefix::new(vec![0, 1, 2]));
        assert_eq!(f.prefix(9, 3), TextPrefix::new(vec![1, 2, 3]));
    }
}
