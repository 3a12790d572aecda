//! Quaternions, finite spherical symmetry groups, the group-invariant
//! distance and the cubic fundamental zone.

mod euler;
mod fz;
mod group;
mod quaternion;

pub use euler::{euler_to_quaternion, quaternion_to_euler};
pub use fz::{cubic_fz_margin, in_cubic_fz, map_to_fundamental_zone};
pub use group::{cubic_rotations, GroupElement, SymmetryGroup};
pub use quaternion::{left_mul_matrix, UnitQuaternion};

use crate::error::Result;

pub fn build_cubic_group() -> SymmetryGroup {
    SymmetryGroup::cubic()
}

pub fn build_sign_group() -> SymmetryGroup {
    SymmetryGroup::sign()
}

pub fn quotient_group(g: &SymmetryGroup) -> Result<SymmetryGroup> {
    g.quotient()
}

pub fn group_distance(a: &UnitQuaternion, b: &UnitQuaternion, g: &SymmetryGroup) -> f64 {
    g.distance(a, b)
}
