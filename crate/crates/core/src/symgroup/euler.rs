//! Bunge (ZXZ) Euler angles.

use std::f64::consts::TAU;

use super::quaternion::UnitQuaternion;

/// `R_Z(φ1) · R_X(Φ) · R_Z(φ2)` as a unit quaternion.
pub fn euler_to_quaternion(phi1: f64, big_phi: f64, phi2: f64) -> UnitQuaternion {
    let sigma = 0.5 * (phi1 + phi2);
    let delta = 0.5 * (phi1 - phi2);
    let (s, c) = (0.5 * big_phi).sin_cos();
    UnitQuaternion::new(
        c * sigma.cos(),
        s * delta.cos(),
        s * delta.sin(),
        c * sigma.sin(),
    )
    .expect("Euler angles must be finite")
}

/// Inverse of [`euler_to_quaternion`]; `φ1, φ2 ∈ [0, 2π)`, `Φ ∈ [0, π]`.
/// In the gimbal-locked cases (`Φ = 0` or `π`) the whole in-plane angle is
/// assigned to `φ1`.
pub fn quaternion_to_euler(q: &UnitQuaternion) -> [f64; 3] {
    const EPS: f64 = 1e-12;
    let [q1, q2, q3, q4] = q.to_array();
    let chi = q1.hypot(q4);
    let eta = q2.hypot(q3);
    let big_phi = 2.0 * eta.atan2(chi);
    let (phi1, phi2) = if eta < EPS {
        (2.0 * q4.atan2(q1), 0.0)
    } else if chi < EPS {
        (2.0 * q3.atan2(q2), 0.0)
    } else {
        let sigma = q4.atan2(q1);
        let delta = q3.atan2(q2);
        (sigma + delta, sigma - delta)
    };
    [phi1.rem_euclid(TAU), big_phi, phi2.rem_euclid(TAU)]
}
