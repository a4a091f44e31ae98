//! Disjoint unions of families by column interleaving.

use crate::kernel::{pair, unpair, Family, Nat, StageSet};

/// The global column index of member `col` of part `part`.
pub fn part_column(part: Nat, col: Nat) -> Nat {
    pair(part, col)
}

/// Union of families with columns kept apart by pairing the part index with
/// the column index. Per-column contents are unchanged.
pub fn union_family(parts: &[Family]) -> Family {
    let carriers: Vec<StageSet> = parts.iter().map(|f| f.carrier().clone()).collect();
    let arity = parts
        .iter()
        .map(|f| f.arity_hint())
        .collect::<Option<Vec<u64>>>()
        .map(|hints| {
            hints
                .iter()
                .enumerate()
                .map(|(p, &n)| if n == 0 { 0 } else { part_column(p as Nat, n - 1) + 1 })
                .max()
                .unwrap_or(0)
        });
    let carrier = StageSet::from_fn("union", move |s| {
        let mut out = Vec::new();
        for (p, c) in carriers.iter().enumerate() {
            for e in c.eval(s) {
                let (col, x) = unpair(e);
                out.push(pair(part_column(p as Nat, col), x));
            }
        }
        out.sort();
        out.dedup();
        out
    });
    Family::new(carrier, arity)
}
