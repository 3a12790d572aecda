//! Cubic fundamental zone in quaternion space.
//!
//! The zone is the truncated cube of Rodrigues ratios `r_k = q_k / q_1`:
//! three face constraints `|r_k| ≤ √2 − 1`, four octahedral constraints
//! `|r_2 ± r_3 ± r_4| ≤ 1`, and six edge constraints `|r_j ± r_k| ≤ √2`.
//! All of them are evaluated multiplied through by `|q_1|`, so `q_1 = 0`
//! needs no special casing: such a point simply fails the face constraints.

use std::f64::consts::SQRT_2;

use super::group::SymmetryGroup;
use super::quaternion::UnitQuaternion;
use crate::error::{Error, Result};

/// Smallest slack over the 13 inequalities, scaled by `|q1|`.
/// Non-negative inside the zone, negative outside.
pub fn cubic_fz_margin(q: &UnitQuaternion) -> f64 {
    let [q1, q2, q3, q4] = q.to_array();
    let s = q1.abs();
    let face = (SQRT_2 - 1.0) * s;
    let slacks = [
        face - q2.abs(),
        face - q3.abs(),
        face - q4.abs(),
        s - (q2 + q3 + q4).abs(),
        s - (q2 - q3 + q4).abs(),
        s - (q2 + q3 - q4).abs(),
        s - (q2 - q3 - q4).abs(),
        SQRT_2 * s - (q2 - q3).abs(),
        SQRT_2 * s - (q2 + q3).abs(),
        SQRT_2 * s - (q2 - q4).abs(),
        SQRT_2 * s - (q2 + q4).abs(),
        SQRT_2 * s - (q3 - q4).abs(),
        SQRT_2 * s - (q3 + q4).abs(),
    ];
    slacks.into_iter().fold(f64::INFINITY, f64::min)
}

pub fn in_cubic_fz(q: &UnitQuaternion) -> bool {
    q.as_vector()[0] != 0.0 && cubic_fz_margin(q) >= 0.0
}

/// Maps `q` to its representative in the cubic fundamental zone.
///
/// Elements are tried in group order and the first image that lies in the
/// zone with a non-negative scalar part wins, so boundary ties go to the
/// lowest element index and the result never has `q1 < 0`.
pub fn map_to_fundamental_zone(q: &UnitQuaternion, group: &SymmetryGroup) -> Result<UnitQuaternion> {
    group
        .elements()
        .iter()
        .map(|p| p.apply(q))
        .find(|img| img.as_vector()[0] > 0.0 && cubic_fz_margin(img) >= 0.0)
        .ok_or(Error::NoFzRepresentative(*q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_quaternions(n: usize, seed: u64) -> Vec<UnitQuaternion> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let v: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
                UnitQuaternion::new(v[0], v[1], v[2], v[3]).unwrap()
            })
            .collect()
    }

    #[test]
    fn identity_is_fixed() {
        let g = SymmetryGroup::cubic();
        let q = UnitQuaternion::IDENTITY;
        assert!(in_cubic_fz(&q));
        assert_eq!(map_to_fundamental_zone(&q, &g).unwrap(), q);
    }

    #[test]
    fn interior_point_unchanged() {
        let g = SymmetryGroup::cubic();
        let q = UnitQuaternion::new(0.95, 0.1, -0.15, 0.05).unwrap();
        assert!(cubic_fz_margin(&q) > 0.0);
        assert_eq!(map_to_fundamental_zone(&q, &g).unwrap(), q);
    }

    #[test]
    fn negative_scalar_part_is_flipped() {
        let g = SymmetryGroup::cubic();
        let q = -UnitQuaternion::new(0.95, 0.1, -0.15, 0.05).unwrap();
        let mapped = map_to_fundamental_zone(&q, &g).unwrap();
        assert_eq!(mapped, -q);
    }

    #[test]
    fn pure_vector_quaternion_has_representative() {
        let g = SymmetryGroup::cubic();
        let q = UnitQuaternion::new(0.0, 1.0, 0.0, 0.0).unwrap();
        assert!(!in_cubic_fz(&q));
        let m = map_to_fundamental_zone(&q, &g).unwrap();
        assert!(in_cubic_fz(&m));
        assert!(g.distance(&m, &q) < 1e-10);
    }

    #[test]
    fn mapping_is_equivalent_and_idempotent() {
        let g = SymmetryGroup::cubic();
        for q in random_quaternions(2000, 7) {
            let m = map_to_fundamental_zone(&q, &g).unwrap();
            assert!(g.distance(&m, &q) < 1e-10);
            assert!(in_cubic_fz(&m));
            assert_eq!(map_to_fundamental_zone(&m, &g).unwrap(), m);
        }
    }

    #[test]
    fn unique_representative_away_from_boundary() {
        let g = SymmetryGroup::cubic();
        for q in random_quaternions(2000, 11) {
            let inside: Vec<UnitQuaternion> = g
                .elements()
                .iter()
                .map(|p| p.apply(&q))
                .filter(|img| cubic_fz_margin(img) >= 0.0)
                .collect();
            if inside.iter().any(|img| cubic_fz_margin(img) < 1e-9) {
                continue;
            }
            // Exactly one rotation class, i.e. one ± pair.
            assert_eq!(inside.len(), 2, "{q:?}");
            assert!((inside[0].as_vector() + inside[1].as_vector()).norm() < 1e-12);
        }
    }

    #[test]
    fn malformed_group_has_no_representative() {
        let q = UnitQuaternion::new(0.0, 1.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            map_to_fundamental_zone(&q, &SymmetryGroup::trivial()),
            Err(Error::NoFzRepresentative(_))
        ));
    }
}
