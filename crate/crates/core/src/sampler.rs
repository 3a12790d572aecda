//! Random orientations: uniform on `S³`, VMF and Watson via the
//! tangent-normal decomposition `x = tμ + √(1−t²) u`, and wrapping of a
//! sample into the cubic fundamental zone.
//!
//! The tangent component `t = μᵀx` is drawn by rejection sampling. Each
//! sampler picks its envelope from the concentration:
//!
//! | law    | κ range   | proposal                                         |
//! |--------|-----------|--------------------------------------------------|
//! | VMF    | κ ≤ 5     | uniform on [−1, 1] under the density maximum     |
//! | VMF    | κ > 5     | `1 − t ~ Gamma(3/2, κ)`                          |
//! | Watson | \|κ\| ≤ 5 | uniform on [−1, 1] under the density maximum     |
//! | Watson | κ < −5    | `t ~ N(0, 1/(2|κ|))`                             |
//! | Watson | κ > 5     | `1 − |t|` from a Gamma head plus a uniform tail  |
//!
//! Envelope acceptance probabilities are available in closed form so the
//! empirical rates can be checked against them.

use std::f64::consts::{PI, SQRT_2};
use std::ops::Deref;

use nalgebra::Vector4;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::Result;
use crate::specfun::{ln_bessel_i, ln_kummer_m};
use crate::symgroup::{map_to_fundamental_zone, SymmetryGroup, UnitQuaternion};

const UNIFORM_ENVELOPE_MAX_KAPPA: f64 = 5.0;

/// Seeded, reproducible random stream. Streams derived from the same seed
/// with different indices are independent.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream(rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// An i.i.d. set of orientations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OrientationSample(Vec<UnitQuaternion>);

impl OrientationSample {
    pub fn new(quaternions: Vec<UnitQuaternion>) -> Self {
        OrientationSample(quaternions)
    }

    pub fn into_inner(self) -> Vec<UnitQuaternion> {
        self.0
    }
}

impl Deref for OrientationSample {
    type Target = [UnitQuaternion];

    fn deref(&self) -> &[UnitQuaternion] {
        &self.0
    }
}

impl From<Vec<UnitQuaternion>> for OrientationSample {
    fn from(v: Vec<UnitQuaternion>) -> Self {
        OrientationSample(v)
    }
}

impl FromIterator<UnitQuaternion> for OrientationSample {
    fn from_iter<I: IntoIterator<Item = UnitQuaternion>>(iter: I) -> Self {
        OrientationSample(iter.into_iter().collect())
    }
}

/// Accepted tangent values plus the number of proposals it took.
#[derive(Debug, Clone)]
pub struct TangentDraws {
    pub values: Vec<f64>,
    pub proposals: usize,
}

impl TangentDraws {
    pub fn acceptance_rate(&self) -> f64 {
        self.values.len() as f64 / self.proposals as f64
    }
}

fn standard_normal4<R: Rng + ?Sized>(rng: &mut R) -> Vector4<f64> {
    Vector4::from_fn(|_, _| StandardNormal.sample(rng))
}

pub fn uniform_quaternion<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion {
    loop {
        if let Some(q) = UnitQuaternion::from_vector(standard_normal4(rng)) {
            return q;
        }
    }
}

pub fn sample_uniform_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> OrientationSample {
    (0..n).map(|_| uniform_quaternion(rng)).collect()
}

/// Uniform unit vector orthogonal to `mu`.
fn orthogonal_direction<R: Rng + ?Sized>(mu: &Vector4<f64>, rng: &mut R) -> Vector4<f64> {
    loop {
        let v = standard_normal4(rng);
        let w = v - mu * mu.dot(&v);
        let norm = w.norm();
        if norm > 1e-12 {
            return w / norm;
        }
    }
}

fn embed<R: Rng + ?Sized>(mu: &UnitQuaternion, tangents: &[f64], rng: &mut R) -> OrientationSample {
    let m = mu.as_vector();
    tangents
        .iter()
        .map(|&t| {
            let u = orthogonal_direction(m, rng);
            let x = m * t + u * (1.0 - t * t).max(0.0).sqrt();
            UnitQuaternion::from_vector(x).expect("unit combination")
        })
        .collect()
}

/// Maximizer of `exp(κt)√(1−t²)` on [−1, 1].
fn vmf_tangent_mode(kappa: f64) -> f64 {
    if kappa == 0.0 {
        0.0
    } else {
        ((1.0 + 4.0 * kappa * kappa).sqrt() - 1.0) / (2.0 * kappa)
    }
}

/// Probability that one proposal of [`sample_tangent_vmf`] is accepted.
pub fn vmf_envelope_acceptance(kappa: f64) -> f64 {
    if kappa <= UNIFORM_ENVELOPE_MAX_KAPPA {
        // ∫ e^{κt}(1−t²)^{1/2} dt = π I₁(κ)/κ
        let mass = if kappa == 0.0 {
            0.5 * PI
        } else {
            PI * ln_bessel_i(1.0, kappa).exp() / kappa
        };
        let t = vmf_tangent_mode(kappa);
        let bound = (kappa * t).exp() * (1.0 - t * t).sqrt();
        mass / (2.0 * bound)
    } else {
        (2.0 * PI * kappa).sqrt() * (ln_bessel_i(1.0, kappa) - kappa).exp()
    }
}

/// Draws `t` with density `∝ exp(κt)(1−t²)^{1/2}` on [−1, 1].
pub fn sample_tangent_vmf<R: Rng + ?Sized>(kappa: f64, n: usize, rng: &mut R) -> TangentDraws {
    assert!(kappa >= 0.0 && kappa.is_finite(), "VMF concentration must be finite and ≥ 0");
    let mut values = Vec::with_capacity(n);
    let mut proposals = 0;
    if kappa <= UNIFORM_ENVELOPE_MAX_KAPPA {
        let mode = vmf_tangent_mode(kappa);
        let ln_bound = kappa * mode + 0.5 * (1.0 - mode * mode).ln();
        while values.len() < n {
            proposals += 1;
            let t: f64 = rng.random_range(-1.0..=1.0);
            let ln_h = kappa * t + 0.5 * (1.0 - t * t).ln();
            if rng.random::<f64>().ln() <= ln_h - ln_bound {
                values.push(t);
            }
        }
    } else {
        let gamma = Gamma::new(1.5, 1.0 / kappa).expect("valid gamma");
        while values.len() < n {
            proposals += 1;
            let s = gamma.sample(rng);
            if s > 2.0 {
                continue;
            }
            // target / envelope = √(1+t) / √2
            if rng.random::<f64>() <= (1.0 - 0.5 * s).sqrt() {
                values.push(1.0 - s);
            }
        }
    }
    TangentDraws { values, proposals }
}

/// `∫₋₁¹ exp(κt²)(1−t²)^{1/2} dt = (π/2) M(½, 2, κ)`, in logs.
fn ln_watson_tangent_mass(kappa: f64) -> f64 {
    (0.5 * PI).ln() + ln_kummer_m(0.5, 2.0, kappa)
}

/// Envelope for the positive-κ Watson tangent, in `s = 1 − |t|`:
/// a Gamma(3/2, rate λ) head on [0, c] and a flat tail on [c, 1].
#[derive(Debug, Clone, Copy)]
struct WatsonBipolarEnvelope {
    cut: f64,
    rate: f64,
    head_mass: f64,
    tail_mass: f64,
}

impl WatsonBipolarEnvelope {
    fn new(kappa: f64) -> Self {
        let build = |cut: f64| {
            let rate = kappa * (2.0 - cut);
            let head_mass = SQRT_2 * (ln_gamma(1.5) - 1.5 * rate.ln()).exp();
            let tail_mass = SQRT_2 * (-kappa * cut * (2.0 - cut)).exp() * (1.0 - cut);
            WatsonBipolarEnvelope {
                cut,
                rate,
                head_mass,
                tail_mass,
            }
        };
        (1..=200)
            .map(|i| build(i as f64 / 200.0))
            .min_by(|a, b| a.total().total_cmp(&b.total()))
            .expect("nonempty grid")
    }

    fn total(&self) -> f64 {
        self.head_mass + self.tail_mass
    }
}

/// Maximum of `exp(κt²)√(1−t²)` on [−1, 1], in logs.
fn ln_watson_uniform_bound(kappa: f64) -> f64 {
    if kappa > 0.5 {
        let u = 1.0 - 0.5 / kappa;
        kappa * u + 0.5 * (1.0 - u).ln()
    } else {
        0.0
    }
}

/// Probability that one proposal of [`sample_tangent_watson`] is accepted.
pub fn watson_envelope_acceptance(kappa: f64) -> f64 {
    let ln_mass = ln_watson_tangent_mass(kappa);
    if kappa.abs() <= UNIFORM_ENVELOPE_MAX_KAPPA {
        (ln_mass - ln_watson_uniform_bound(kappa)).exp() / 2.0
    } else if kappa < 0.0 {
        (ln_mass - 0.5 * (PI / -kappa).ln()).exp()
    } else {
        // mass of s = 1 − |t| on [0, 1], scaled by e^{−κ}
        let env = WatsonBipolarEnvelope::new(kappa);
        (ln_mass - std::f64::consts::LN_2 - kappa).exp() / env.total()
    }
}

/// Draws `t` with density `∝ exp(κt²)(1−t²)^{1/2}` on [−1, 1].
pub fn sample_tangent_watson<R: Rng + ?Sized>(kappa: f64, n: usize, rng: &mut R) -> TangentDraws {
    assert!(kappa.is_finite(), "Watson concentration must be finite");
    let mut values = Vec::with_capacity(n);
    let mut proposals = 0;
    if kappa.abs() <= UNIFORM_ENVELOPE_MAX_KAPPA {
        let ln_bound = ln_watson_uniform_bound(kappa);
        while values.len() < n {
            proposals += 1;
            let t: f64 = rng.random_range(-1.0..=1.0);
            let ln_h = kappa * t * t + 0.5 * (1.0 - t * t).ln();
            if rng.random::<f64>().ln() <= ln_h - ln_bound {
                values.push(t);
            }
        }
    } else if kappa < 0.0 {
        let normal = Normal::new(0.0, (0.5 / -kappa).sqrt()).expect("valid normal");
        while values.len() < n {
            proposals += 1;
            let t: f64 = normal.sample(rng);
            if t.abs() >= 1.0 {
                continue;
            }
            if rng.random::<f64>() <= (1.0 - t * t).sqrt() {
                values.push(t);
            }
        }
    } else {
        let env = WatsonBipolarEnvelope::new(kappa);
        let head = Gamma::new(1.5, 1.0 / env.rate).expect("valid gamma");
        let p_head = env.head_mass / env.total();
        let c = env.cut;
        while values.len() < n {
            proposals += 1;
            let (s, ratio) = if rng.random::<f64>() < p_head {
                let s = head.sample(rng);
                if s > c {
                    continue;
                }
                (s, (kappa * s * (s - c)).exp() * (1.0 - 0.5 * s).sqrt())
            } else {
                let s = rng.random_range(c..=1.0);
                let ratio = (-kappa * (s * (2.0 - s) - c * (2.0 - c))).exp()
                    * (0.5 * s * (2.0 - s)).sqrt();
                (s, ratio)
            };
            if rng.random::<f64>() <= ratio {
                let t = 1.0 - s;
                values.push(if rng.random::<bool>() { t } else { -t });
            }
        }
    }
    TangentDraws { values, proposals }
}

pub fn sample_vmf<R: Rng + ?Sized>(mu: &UnitQuaternion, kappa: f64, n: usize, rng: &mut R) -> OrientationSample {
    let tangents = sample_tangent_vmf(kappa, n, rng);
    embed(mu, &tangents.values, rng)
}

pub fn sample_watson<R: Rng + ?Sized>(mu: &UnitQuaternion, kappa: f64, n: usize, rng: &mut R) -> OrientationSample {
    let tangents = sample_tangent_watson(kappa, n, rng);
    embed(mu, &tangents.values, rng)
}

/// Replaces every orientation by its cubic fundamental-zone representative.
pub fn wrap_to_fz(sample: &OrientationSample, group: &SymmetryGroup) -> Result<OrientationSample> {
    sample
        .iter()
        .map(|q| map_to_fundamental_zone(q, group))
        .collect::<Result<Vec<_>>>()
        .map(OrientationSample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{a_p, y_p};
    use nalgebra::{Matrix4, SymmetricEigen};

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Two-sample Kolmogorov–Smirnov statistic.
    fn ks(a: &[f64], b: &[f64]) -> f64 {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    /// CDF of the VMF tangent law by trapezoid quadrature of the unnormalized density.
    fn vmf_tangent_cdf_oracle(kappa: f64, grid: usize) -> Vec<(f64, f64)> {
        let h = |t: f64| (kappa * t).exp() * (1.0 - t * t).max(0.0).sqrt();
        let dt = 2.0 / grid as f64;
        let mut acc = vec![(-1.0, 0.0)];
        let mut total = 0.0;
        for i in 0..grid {
            let t0 = -1.0 + i as f64 * dt;
            total += 0.5 * (h(t0) + h(t0 + dt)) * dt;
            acc.push((t0 + dt, total));
        }
        acc.into_iter().map(|(t, c)| (t, c / total)).collect()
    }

    #[test]
    fn streams_are_deterministic() {
        let a = sample_uniform_sphere(50, &mut RngStream::new(9));
        let b = sample_uniform_sphere(50, &mut RngStream::new(9));
        assert_eq!(a, b);
        let c = sample_uniform_sphere(50, &mut RngStream::derive(9, 1));
        assert_ne!(a, c);
        let d = sample_vmf(&UnitQuaternion::IDENTITY, 30.0, 20, &mut RngStream::derive(9, 1));
        let e = sample_vmf(&UnitQuaternion::IDENTITY, 30.0, 20, &mut RngStream::derive(9, 1));
        assert_eq!(d, e);
    }

    #[test]
    fn uniform_moments() {
        let s = sample_uniform_sphere(200_000, &mut RngStream::new(1));
        for k in 0..4 {
            let m = mean(&s.iter().map(|q| q.as_vector()[k]).collect::<Vec<_>>());
            assert!(m.abs() < 3.0 / (2.0 * (s.len() as f64).sqrt()), "{k} {m}");
        }
        let m2 = mean(&s.iter().map(|q| q.as_vector()[0].powi(2)).collect::<Vec<_>>());
        assert!((m2 - 0.25).abs() < 0.01);
        assert!(s.iter().all(|q| (q.as_vector().norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn vmf_tangent_moments() {
        let mut rng = RngStream::new(2);
        let zero = sample_tangent_vmf(0.0, 100_000, &mut rng);
        assert!(mean(&zero.values).abs() < 0.01);
        let fifty = sample_tangent_vmf(50.0, 100_000, &mut rng);
        assert!((mean(&fifty.values) - a_p(50.0, 4)).abs() < 0.005);
    }

    #[test]
    fn vmf_tangent_matches_quadrature_cdf() {
        let draws = sample_tangent_vmf(10.0, 100_000, &mut RngStream::new(3));
        let mut v = draws.values.clone();
        v.sort_by(f64::total_cmp);
        let cdf = vmf_tangent_cdf_oracle(10.0, 20_000);
        let mut gap = 0.0f64;
        for (t, c) in cdf.iter().step_by(50) {
            let emp = v.partition_point(|x| x <= t) as f64 / v.len() as f64;
            gap = gap.max((emp - c).abs());
        }
        assert!(gap < 0.01, "{gap}");
    }

    #[test]
    fn watson_tangent_moments() {
        let mut rng = RngStream::new(4);
        for k in [-50.0, -10.0, 0.0, 3.0, 10.0] {
            let d = sample_tangent_watson(k, 100_000, &mut rng);
            assert!(mean(&d.values).abs() < 0.01, "{k}");
        }
        let d = sample_tangent_watson(50.0, 100_000, &mut rng);
        let m2 = mean(&d.values.iter().map(|t| t * t).collect::<Vec<_>>());
        assert!((m2 - y_p(50.0, 4)).abs() < 0.005);
        let d = sample_tangent_watson(-30.0, 100_000, &mut rng);
        let m2 = mean(&d.values.iter().map(|t| t * t).collect::<Vec<_>>());
        assert!((m2 - y_p(-30.0, 4)).abs() < 0.005);
    }

    #[test]
    fn watson_and_vmf_agree_at_zero() {
        let a = sample_tangent_vmf(0.0, 100_000, &mut RngStream::new(5));
        let b = sample_tangent_watson(0.0, 100_000, &mut RngStream::new(6));
        assert!(ks(&a.values, &b.values) < 0.01);
    }

    #[test]
    fn acceptance_matches_envelope() {
        for k in [0.0, 1.0, 5.0, 6.0, 10.0, 100.0] {
            let d = sample_tangent_vmf(k, 50_000, &mut RngStream::new(7));
            let expected = vmf_envelope_acceptance(k);
            assert!((d.acceptance_rate() - expected).abs() < 0.02, "vmf {k}");
        }
        for k in [-100.0, -10.0, -1.0, 0.0, 1.0, 10.0, 100.0] {
            let d = sample_tangent_watson(k, 50_000, &mut RngStream::new(8));
            let expected = watson_envelope_acceptance(k);
            assert!((d.acceptance_rate() - expected).abs() < 0.02, "watson {k}");
            assert!(expected > 0.3, "watson {k} envelope acceptance {expected}");
        }
    }

    #[test]
    fn zero_concentration_is_uniform() {
        let mu = UnitQuaternion::new(0.2, -0.4, 0.6, 0.3).unwrap();
        let v = sample_vmf(&mu, 0.0, 100_000, &mut RngStream::new(10));
        let w = sample_watson(&mu, 0.0, 100_000, &mut RngStream::new(11));
        let u = sample_uniform_sphere(100_000, &mut RngStream::new(12));
        for k in 0..4 {
            let coord = |s: &OrientationSample| s.iter().map(|q| q.as_vector()[k]).collect::<Vec<_>>();
            assert!(ks(&coord(&v), &coord(&u)) < 0.01);
            assert!(ks(&coord(&w), &coord(&u)) < 0.01);
        }
    }

    #[test]
    fn vmf_resultant_length() {
        let mu = UnitQuaternion::new(0.2, -0.4, 0.6, 0.3).unwrap();
        let s = sample_vmf(&mu, 30.0, 100_000, &mut RngStream::new(13));
        let sum: Vector4<f64> = s.iter().map(|q| *q.as_vector()).sum();
        assert!((sum.norm() / s.len() as f64 - a_p(30.0, 4)).abs() < 0.01);
    }

    #[test]
    fn watson_scatter_axis() {
        let mu = UnitQuaternion::new(0.2, -0.4, 0.6, 0.3).unwrap();
        let s = sample_watson(&mu, 40.0, 100_000, &mut RngStream::new(14));
        let t: Matrix4<f64> =
            s.iter().map(|q| q.as_vector() * q.as_vector().transpose()).sum::<Matrix4<f64>>() / s.len() as f64;
        let eig = SymmetricEigen::new(t);
        let top = eig.eigenvalues.imax();
        assert!(eig.eigenvectors.column(top).dot(mu.as_vector()).abs() > 0.999);
    }

    #[test]
    fn wrapping_preserves_classes() {
        let g = SymmetryGroup::cubic();
        let s = sample_uniform_sphere(500, &mut RngStream::new(15));
        let w = wrap_to_fz(&s, &g).unwrap();
        for (a, b) in s.iter().zip(w.iter()) {
            assert!(g.distance(a, b) < 1e-10);
        }
        for i in (0..50).step_by(7) {
            for j in (0..50).step_by(5) {
                assert!((g.distance(&s[i], &s[j]) - g.distance(&w[i], &w[j])).abs() < 1e-10);
            }
        }
        assert_eq!(wrap_to_fz(&w, &g).unwrap(), w);
    }

    #[test]
    fn concentrated_interior_cloud_barely_moves() {
        let g = SymmetryGroup::cubic();
        let mu = UnitQuaternion::new(0.98, 0.05, -0.05, 0.03).unwrap();
        let s = sample_vmf(&mu, 100.0, 5_000, &mut RngStream::new(16));
        let w = wrap_to_fz(&s, &g).unwrap();
        let moved = s.iter().zip(w.iter()).filter(|(a, b)| a != b).count();
        assert!((moved as f64) < 0.01 * s.len() as f64, "{moved}");
    }
}
