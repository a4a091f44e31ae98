//! The Cantor pairing polynomial and its inverse.
//!
//! `pair(i, x) = (i + x)(i + x + 1)/2 + x` is a bijection from pairs of
//! naturals onto the naturals. A fixed pairing keeps every trace byte-stable.

use super::Nat;

/// Cantor pairing polynomial.
pub fn pair(i: Nat, x: Nat) -> Nat {
    let d = i + x;
    d * (d + 1) / 2 + x
}

/// Inverse of [`pair`].
pub fn unpair(z: Nat) -> (Nat, Nat) {
    // Largest diagonal d with d(d+1)/2 <= z, via exact integer sqrt.
    let w = (8 * z as u128 + 1).isqrt();
    let d = ((w - 1) / 2) as Nat;
    let x = z - d * (d + 1) / 2;
    (d - x, x)
}

/// Triple pairing, nested as `pair(pair(x, y), z)`.
pub fn pair3(x: Nat, y: Nat, z: Nat) -> Nat {
    pair(pair(x, y), z)
}

/// Inverse of [`pair3`].
pub fn unpair3(s: Nat) -> (Nat, Nat, Nat) {
    let (a, z) = unpair(s);
    let (x, y) = unpair(a);
    (x, y, z)
}
