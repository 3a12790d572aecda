use std::fmt;
use std::ops::Neg;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

/// A point on the unit 3-sphere, stored as `(q1, q2, q3, q4)` with `q1` the
/// scalar part. `q` and `-q` describe the same rotation.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", try_from = "[f64; 4]")]
pub struct UnitQuaternion(Vector4<f64>);

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion(Vector4::new(1.0, 0.0, 0.0, 0.0));

    /// Normalizes `(q1, q2, q3, q4)`. Returns `None` for a zero or non-finite vector.
    pub fn new(q1: f64, q2: f64, q3: f64, q4: f64) -> Option<Self> {
        Self::from_vector(Vector4::new(q1, q2, q3, q4))
    }

    pub fn from_vector(v: Vector4<f64>) -> Option<Self> {
        let norm = v.norm();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        Some(UnitQuaternion(v / norm))
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Option<Self> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Self::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n)
    }

    #[inline]
    pub fn as_vector(&self) -> &Vector4<f64> {
        &self.0
    }

    #[inline]
    pub fn into_vector(self) -> Vector4<f64> {
        self.0
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    #[inline]
    pub fn dot(&self, other: &UnitQuaternion) -> f64 {
        self.0.dot(&other.0)
    }

    /// Hamilton product `self ⊗ other`.
    pub fn mul(&self, other: &UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion::from_vector(left_mul_matrix(&self.0) * other.0)
            .expect("product of unit quaternions is nonzero")
    }

    pub fn conjugate(&self) -> UnitQuaternion {
        UnitQuaternion(Vector4::new(self.0[0], -self.0[1], -self.0[2], -self.0[3]))
    }

    /// Applies an orthogonal 4×4 action. No renormalization, so the identity
    /// action reproduces its input bit for bit.
    pub fn transform(&self, action: &Matrix4<f64>) -> UnitQuaternion {
        UnitQuaternion(action * self.0)
    }

    /// Representative with non-negative scalar part.
    pub fn canonical(self) -> UnitQuaternion {
        if self.0[0] < 0.0 {
            -self
        } else {
            self
        }
    }
}

/// Matrix `L(s)` with `L(s) q = s ⊗ q`.
pub fn left_mul_matrix(s: &Vector4<f64>) -> Matrix4<f64> {
    let (w, x, y, z) = (s[0], s[1], s[2], s[3]);
    Matrix4::new(
        w, -x, -y, -z, //
        x, w, -z, y, //
        y, z, w, -x, //
        z, -y, x, w,
    )
}

impl Neg for UnitQuaternion {
    type Output = UnitQuaternion;

    fn neg(self) -> UnitQuaternion {
        UnitQuaternion(-self.0)
    }
}

impl fmt::Debug for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "UnitQuaternion({}, {}, {}, {})",
            self.0[0], self.0[1], self.0[2], self.0[3]
        )
    }
}

impl From<UnitQuaternion> for [f64; 4] {
    fn from(q: UnitQuaternion) -> [f64; 4] {
        q.to_array()
    }
}

impl TryFrom<[f64; 4]> for UnitQuaternion {
    type Error = &'static str;

    fn try_from(a: [f64; 4]) -> Result<Self, Self::Error> {
        UnitQuaternion::new(a[0], a[1], a[2], a[3]).ok_or("zero or non-finite quaternion")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_normalizes() {
        let q = UnitQuaternion::new(1.0, 2.0, 3.0, 4.0).unwrap();
        assert!((q.as_vector().norm() - 1.0).abs() < 1e-12);
        assert!(UnitQuaternion::new(0.0, 0.0, 0.0, 0.0).is_none());
        assert!(UnitQuaternion::new(f64::NAN, 0.0, 0.0, 1.0).is_none());
    }

    #[test]
    fn left_mul_matches_hamilton_product() {
        // i ⊗ j = k
        let i = UnitQuaternion::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let j = UnitQuaternion::new(0.0, 0.0, 1.0, 0.0).unwrap();
        let k = i.mul(&j);
        assert_eq!(k.to_array(), [0.0, 0.0, 0.0, 1.0]);
        // j ⊗ i = -k
        assert_eq!(j.mul(&i).to_array(), [0.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn conjugate_is_inverse() {
        let q = UnitQuaternion::new(0.3, -0.2, 0.9, 0.1).unwrap();
        let e = q.mul(&q.conjugate());
        assert!((e.as_vector() - UnitQuaternion::IDENTITY.as_vector()).norm() < 1e-15);
    }
}
