use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Matrix4;

use super::quaternion::{left_mul_matrix, UnitQuaternion};
use crate::error::{Error, Result};

const CLOSURE_TOL: f64 = 1e-9;

/// One quaternionic symmetry action, stored as an orthogonal 4×4 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement(Matrix4<f64>);

impl GroupElement {
    /// Left multiplication by the unit quaternion `s`.
    pub fn left_multiplication(s: &UnitQuaternion) -> Self {
        GroupElement(left_mul_matrix(s.as_vector()))
    }

    pub fn from_matrix(m: Matrix4<f64>) -> Result<Self> {
        let err = (m.transpose() * m - Matrix4::identity()).amax();
        if err >= 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "group action is not orthogonal (deviation {err:e})"
            )));
        }
        Ok(GroupElement(m))
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    #[inline]
    pub fn apply(&self, q: &UnitQuaternion) -> UnitQuaternion {
        q.transform(&self.0)
    }
}

/// A finite group of quaternionic actions `{P_1, ..., P_M}`.
///
/// When `sign_paired` is set the second half of the element list is the
/// negation of the first half, element by element.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryGroup {
    elements: Vec<GroupElement>,
    sign_paired: bool,
}

impl SymmetryGroup {
    /// Validates identity, inverses, closure and (if requested) sign pairing.
    pub fn new(elements: Vec<GroupElement>, sign_paired: bool) -> Result<Self> {
        let group = SymmetryGroup {
            elements,
            sign_paired,
        };
        group.validate()?;
        Ok(group)
    }

    /// Builds the sign-paired group `{±L(s)}` from a list of proper rotations.
    pub fn from_rotations(rotations: &[UnitQuaternion]) -> Result<Self> {
        let positive: Vec<GroupElement> =
            rotations.iter().map(GroupElement::left_multiplication).collect();
        let mut elements = positive.clone();
        elements.extend(positive.iter().map(|p| GroupElement(-p.0)));
        Self::new(elements, true)
    }

    /// `{I}`: no symmetry at all.
    pub fn trivial() -> Self {
        SymmetryGroup {
            elements: vec![GroupElement(Matrix4::identity())],
            sign_paired: false,
        }
    }

    /// `{I, -I}`: the antipodal identification of quaternions.
    pub fn sign() -> Self {
        SymmetryGroup {
            elements: vec![
                GroupElement(Matrix4::identity()),
                GroupElement(-Matrix4::identity()),
            ],
            sign_paired: true,
        }
    }

    /// The 48-element quaternionic representation of the cubic point group:
    /// the 24 rotations of 432 followed by their negatives.
    pub fn cubic() -> Self {
        Self::from_rotations(&cubic_rotations()).expect("cubic rotation table is a group")
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_sign_paired(&self) -> bool {
        self.sign_paired
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn element(&self, index: usize) -> &GroupElement {
        &self.elements[index]
    }

    /// Positive representatives of the sign pairs (the whole group when the
    /// group is not sign-paired).
    pub fn half(&self) -> &[GroupElement] {
        if self.sign_paired {
            &self.elements[..self.elements.len() / 2]
        } else {
            &self.elements
        }
    }

    /// `G / {I, -I}`, represented by the first member of each sign pair.
    pub fn quotient(&self) -> Result<SymmetryGroup> {
        if !self.sign_paired {
            return Err(Error::NotSignPaired);
        }
        Ok(SymmetryGroup {
            elements: self.half().to_vec(),
            sign_paired: false,
        })
    }

    /// `min_P arccos(aᵀ P b)` over the group, in `[0, π]`.
    ///
    /// The angle is evaluated as `2·atan2(‖a − Pb‖, ‖a + Pb‖)` for the
    /// maximizing element, which stays accurate near zero where `acos` does not.
    pub fn distance(&self, a: &UnitQuaternion, b: &UnitQuaternion) -> f64 {
        let best = self.closest_element(a, b);
        let v = self.elements[best].0 * b.as_vector();
        let a = a.as_vector();
        2.0 * (a - v).norm().atan2((a + v).norm())
    }

    /// Index of the element maximizing `aᵀ P b` (lowest index on ties).
    pub fn closest_element(&self, reference: &UnitQuaternion, q: &UnitQuaternion) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, p) in self.elements.iter().enumerate() {
            let d = reference.as_vector().dot(&(p.0 * q.as_vector()));
            if d > best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Index `k` with `P_k ≈ m`, if any.
    pub fn find(&self, m: &Matrix4<f64>) -> Option<usize> {
        self.elements
            .iter()
            .position(|p| (p.0 - m).amax() < CLOSURE_TOL)
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.elements.is_empty() {
            return fail("empty symmetry group".into());
        }
        for (i, p) in self.elements.iter().enumerate() {
            let err = (p.0.transpose() * p.0 - Matrix4::identity()).amax();
            if err >= 1e-10 {
                return fail(format!("element {i} is not orthogonal ({err:e})"));
            }
        }
        if self.find(&Matrix4::identity()).is_none() {
            return fail("group has no identity".into());
        }
        for (i, p) in self.elements.iter().enumerate() {
            if self.find(&p.0.transpose()).is_none() {
                return fail(format!("element {i} has no inverse in the group"));
            }
            for (j, q) in self.elements.iter().enumerate() {
                if self.find(&(p.0 * q.0)).is_none() {
                    return fail(format!("product of elements {i} and {j} is not a member"));
                }
            }
        }
        if self.sign_paired {
            let m = self.elements.len();
            if !m.is_multiple_of(2) {
                return fail("sign-paired group must have even order".into());
            }
            for i in 0..m / 2 {
                if (self.elements[i].0 + self.elements[i + m / 2].0).amax() >= CLOSURE_TOL {
                    return fail(format!("element {} is not the negation of element {i}", i + m / 2));
                }
            }
        }
        Ok(())
    }
}

/// The 24 proper rotations of the cube as unit quaternions, identity first.
pub fn cubic_rotations() -> Vec<UnitQuaternion> {
    let mut axes_angles: Vec<([f64; 3], f64)> = vec![([1.0, 0.0, 0.0], 0.0)];
    let faces = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for axis in faces {
        axes_angles.push((axis, FRAC_PI_2));
        axes_angles.push((axis, -FRAC_PI_2));
    }
    for axis in faces {
        axes_angles.push((axis, PI));
    }
    for sy in [1.0, -1.0] {
        for sz in [1.0, -1.0] {
            let axis = [1.0, sy, sz];
            axes_angles.push((axis, 2.0 * PI / 3.0));
            axes_angles.push((axis, -2.0 * PI / 3.0));
        }
    }
    for axis in [
        [1.0, 1.0, 0.0],
        [1.0, -1.0, 0.0],
        [1.0, 0.0, 1.0],
        [1.0, 0.0, -1.0],
        [0.0, 1.0, 1.0],
        [0.0, 1.0, -1.0],
    ] {
        axes_angles.push((axis, PI));
    }
    axes_angles
        .into_iter()
        .map(|(axis, angle)| {
            UnitQuaternion::from_axis_angle(axis, angle).expect("nonzero axis")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn some_quaternions() -> Vec<UnitQuaternion> {
        vec![
            UnitQuaternion::new(0.9, 0.1, -0.3, 0.2).unwrap(),
            UnitQuaternion::new(-0.2, 0.5, 0.5, -0.6).unwrap(),
            UnitQuaternion::new(0.0, 0.0, 1.0, 0.0).unwrap(),
        ]
    }

    #[test]
    fn cubic_group_has_48_elements() {
        let g = SymmetryGroup::cubic();
        assert_eq!(g.len(), 48);
        assert!(g.is_sign_paired());
        for q in some_quaternions() {
            assert_eq!(g.element(0).apply(&q), q);
        }
    }

    #[test]
    fn cubic_closure_exhaustive() {
        let g = SymmetryGroup::cubic();
        for p in g.elements() {
            for q in g.elements() {
                assert!(g.find(&(p.matrix() * q.matrix())).is_some());
            }
        }
    }

    #[test]
    fn cubic_elements_distinct() {
        let g = SymmetryGroup::cubic();
        for (i, p) in g.elements().iter().enumerate() {
            assert_eq!(g.find(p.matrix()), Some(i));
        }
    }

    #[test]
    fn sign_group_involution_and_quotient() {
        let g = SymmetryGroup::sign();
        assert_eq!(g.len(), 2);
        let q = some_quaternions()[0];
        let neg = g.element(1);
        assert_eq!(neg.apply(&neg.apply(&q)), q);
        let quotient = g.quotient().unwrap();
        assert_eq!(quotient.len(), 1);
        assert!(!quotient.is_sign_paired());
    }

    #[test]
    fn quotient_takes_first_half() {
        let g = SymmetryGroup::cubic();
        let quotient = g.quotient().unwrap();
        assert_eq!(quotient.len(), 24);
        for i in 0..24 {
            assert_eq!(quotient.element(i), g.element(i));
        }
        assert!(matches!(quotient.quotient(), Err(Error::NotSignPaired)));
    }

    #[test]
    fn distance_basic_values() {
        let g = SymmetryGroup::sign();
        let a = UnitQuaternion::IDENTITY;
        let b = UnitQuaternion::new(0.0, 1.0, 0.0, 0.0).unwrap();
        assert!((g.distance(&a, &b) - FRAC_PI_2).abs() < 1e-15);
        for q in some_quaternions() {
            assert_eq!(g.distance(&q, &q), 0.0);
        }
    }

    #[test]
    fn distance_zero_on_orbit() {
        let g = SymmetryGroup::cubic();
        for q in some_quaternions() {
            for p in g.elements() {
                assert!(g.distance(&q, &p.apply(&q)) < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_non_groups() {
        let rots = cubic_rotations();
        assert!(SymmetryGroup::from_rotations(&rots[..5]).is_err());
        let not_orthogonal = Matrix4::identity() * 2.0;
        assert!(GroupElement::from_matrix(not_orthogonal).is_err());
    }
}
