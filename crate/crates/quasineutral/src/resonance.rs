//! Lattice resonance sets of the corrector equations.
//!
//! The bilinear interactions between oscillatory branches survive the ε → 0
//! averaging only where their phases cancel exactly, on the sets
//!
//! ```text
//!   Ω¹_{η1,η2}(k) = {ℓ : 1 + η1 √(1+|k-ℓ|²) + η2 √(1+|ℓ|²) = 0}
//!   Ω²_{η1,η2}(k) = {ℓ : 1 + η1 √(1+|k|²)   + η2 √(1+|ℓ|²) = 0}
//! ```
//!
//! with η ∈ {±1}². Membership is decided in exact integer arithmetic: with
//! a = 1+|m|² and b = 1+|ℓ|², the relation √b = 1 + √a forces both a and b
//! to be perfect squares with consecutive roots, so no floating-point
//! tolerance enters.

use serde::{Deserialize, Serialize};

/// Which square root carries the k-dependence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResonanceKind {
    /// phases 1 + η1 √(1+|k-ℓ|²) + η2 √(1+|ℓ|²)
    One,
    /// phases 1 + η1 √(1+|k|²) + η2 √(1+|ℓ|²)
    Two,
}

/// One resonance set: all ℓ in the search box satisfying the relation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonanceSet {
    pub kind: ResonanceKind,
    pub signs: (i8, i8),
    pub k: [i64; 3],
    pub search_radius: i64,
    pub members: Vec<[i64; 3]>,
}

fn exact_sqrt(n: i64) -> Option<i64> {
    if n < 0 {
        return None;
    }
    let r = (n as f64).sqrt().round() as i64;
    for c in [r - 1, r, r + 1] {
        if c >= 0 && c * c == n {
            return Some(c);
        }
    }
    None
}

/// Exact membership test of 1 + η1 √a + η2 √b = 0 for positive integers
/// a, b ≥ 1 (a = 1+|m|², b = 1+|ℓ|²).
fn phase_vanishes(a: i64, b: i64, eta1: i8, eta2: i8) -> bool {
    match (eta1, eta2) {
        // 1 + √a + √b ≥ 3
        (1, 1) => false,
        // √a + √b = 1 impossible for a, b ≥ 1
        (-1, -1) => false,
        // √b = 1 + √a: both must be perfect squares with consecutive roots
        (1, -1) => match (exact_sqrt(a), exact_sqrt(b)) {
            (Some(ra), Some(rb)) => rb == ra + 1,
            _ => false,
        },
        // √a = 1 + √b
        (-1, 1) => match (exact_sqrt(a), exact_sqrt(b)) {
            (Some(ra), Some(rb)) => ra == rb + 1,
            _ => false,
        },
        _ => unreachable!("signs must be ±1"),
    }
}

fn norm_sq(v: &[i64; 3]) -> i64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// Enumerate the resonance set in the box |ℓ_i| ≤ radius (axes beyond `dim`
/// are pinned to zero).
pub fn resonance_set(
    kind: ResonanceKind,
    signs: (i8, i8),
    k: [i64; 3],
    dim: usize,
    radius: i64,
) -> ResonanceSet {
    assert!(signs.0.abs() == 1 && signs.1.abs() == 1, "signs must be ±1");
    let mut members = Vec::new();
    let range = |ax: usize| -> std::ops::RangeInclusive<i64> {
        if ax < dim {
            -radius..=radius
        } else {
            0..=0
        }
    };
    for l0 in range(0) {
        for l1 in range(1) {
            for l2 in range(2) {
                let l = [l0, l1, l2];
                let a = match kind {
                    ResonanceKind::One => {
                        let m = [k[0] - l0, k[1] - l1, k[2] - l2];
                        1 + norm_sq(&m)
                    }
                    ResonanceKind::Two => 1 + norm_sq(&k),
                };
                let b = 1 + norm_sq(&l);
                if phase_vanishes(a, b, signs.0, signs.1) {
                    members.push(l);
                }
            }
        }
    }
    ResonanceSet {
        kind,
        signs,
        k,
        search_radius: radius,
        members,
    }
}

/// The set 𝟏 = {ℓ : |ℓ|² = 3}, i.e. Ω²_{+,-}(0); the eight corners
/// (±1,±1,±1) in 3D, empty in lower dimension.
pub fn bold_one(dim: usize, radius: i64) -> Vec<[i64; 3]> {
    resonance_set(ResonanceKind::Two, (1, -1), [0, 0, 0], dim, radius).members
}

/// Brute-force float check of the same relation, for cross-validation.
pub fn resonance_set_brute_force(
    kind: ResonanceKind,
    signs: (i8, i8),
    k: [i64; 3],
    dim: usize,
    radius: i64,
    tol: f64,
) -> Vec<[i64; 3]> {
    let mut members = Vec::new();
    let range = |ax: usize| -> std::ops::RangeInclusive<i64> {
        if ax < dim {
            -radius..=radius
        } else {
            0..=0
        }
    };
    for l0 in range(0) {
        for l1 in range(1) {
            for l2 in range(2) {
                let l = [l0, l1, l2];
                let a = match kind {
                    ResonanceKind::One => {
                        let m = [k[0] - l0, k[1] - l1, k[2] - l2];
                        (1 + norm_sq(&m)) as f64
                    }
                    ResonanceKind::Two => (1 + norm_sq(&k)) as f64,
                };
                let b = (1 + norm_sq(&l)) as f64;
                let phase = 1.0 + signs.0 as f64 * a.sqrt() + signs.1 as f64 * b.sqrt();
                if phase.abs() < tol {
                    members.push(l);
                }
            }
        }
    }
    members
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plus_plus_is_always_empty() {
        for kx in -3..=3 {
            let s = resonance_set(ResonanceKind::Two, (1, 1), [kx, 1, 0], 3, 6);
            assert!(s.members.is_empty());
            let s = resonance_set(ResonanceKind::One, (1, 1), [kx, 1, 0], 3, 6);
            assert!(s.members.is_empty());
        }
    }

    #[test]
    fn bold_one_is_the_eight_cube_corners() {
        let mut members = bold_one(3, 20);
        members.sort();
        assert_eq!(members.len(), 8);
        for m in &members {
            assert!(m.iter().all(|&c| c.abs() == 1));
        }
    }

    #[test]
    fn bold_one_is_empty_below_three_dimensions() {
        assert!(bold_one(2, 20).is_empty());
        assert!(bold_one(1, 20).is_empty());
    }

    #[test]
    fn kind2_minus_plus_contains_origin_for_norm3_k() {
        // |k|² = 3: 1 - √4 + √1 = 0, so ℓ = 0 is a member
        let s = resonance_set(ResonanceKind::Two, (-1, 1), [1, 1, 1], 3, 5);
        assert!(s.members.contains(&[0, 0, 0]));
    }

    #[test]
    fn matches_brute_force_enumeration() {
        // exact equality of member lists for all |k|∞ ≤ 2 here (the
        // acceptance suite extends this to |k|∞ ≤ 5, radius 20)
        for kind in [ResonanceKind::One, ResonanceKind::Two] {
            for signs in [(1i8, 1i8), (1, -1), (-1, 1), (-1, -1)] {
                for kx in -2..=2 {
                    for ky in -2..=2 {
                        for kz in -2..=2 {
                            let k = [kx, ky, kz];
                            let exact = resonance_set(kind, signs, k, 3, 8).members;
                            let brute =
                                resonance_set_brute_force(kind, signs, k, 3, 8, 1e-12);
                            assert_eq!(exact, brute, "kind {kind:?} signs {signs:?} k {k:?}");
                        }
                    }
                }
            }
        }
    }
}
