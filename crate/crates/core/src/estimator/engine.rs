//! E-step and M-step kernels shared by single-population and mixture EM.
//!
//! A single population is a mixture with one cluster and `α = 1`, so both
//! cases run through the same per-sample posterior routine. Sufficient
//! statistics are accumulated per component: `S_{c,m} = Σ_i r_{i,c,m} x_i`
//! for VMF and `Σ_i r_{i,c,m} x_i x_iᵀ` for Watson. Rotating them by `P_mᵀ`
//! happens once per M-step rather than once per sample.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};

use crate::density::{Family, GInvariantModel, DIM};
use crate::error::{Error, Result};
use crate::specfun::{a_p_inverse, ln_kummer_m, y_p_inverse};
use crate::symgroup::{GroupElement, UnitQuaternion};

pub const VMF_KAPPA_MAX: f64 = 1e6;
pub const WATSON_KAPPA_MAX: f64 = 1e6;
const RESULTANT_CEILING: f64 = 1.0 - 1e-12;
/// Log-weights (relative to the largest term of a sample) below which the
/// folded mixture E-step drops a term. All dropped terms together stay
/// under one ulp of the normalizer.
const NEGLIGIBLE_LOG_WEIGHT: f64 = -40.0;

/// Group elements whose images of `μ` form the components of `model`.
pub(crate) fn component_elements(model: &GInvariantModel) -> &[GroupElement] {
    match model.family() {
        Family::Vmf => model.group().elements(),
        Family::Watson => model.group().half(),
    }
}

/// Writes normalized posteriors over all `(c, m)` into `buf` and returns
/// the log-density of `x` under the mixture.
pub(crate) fn posterior_row(x: &Vector4<f64>, clusters: &[GInvariantModel], ln_alpha: &[f64], buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    for (model, la) in clusters.iter().zip(ln_alpha) {
        let base = la + model.ln_weight();
        let kappa = model.kappa();
        match model.family() {
            Family::Vmf => buf.extend(model.component_means().iter().map(|m| base + kappa * m.dot(x))),
            Family::Watson => buf.extend(model.component_means().iter().map(|m| {
                let t = m.dot(x);
                base + kappa * t * t
            })),
        }
    }
    let max = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in buf.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    for v in buf.iter_mut() {
        *v *= inv;
    }
    max + sum.ln()
}

/// Per-component sufficient statistics for one E-step.
pub(crate) struct Accumulator {
    per_cluster: usize,
    /// `Σ_i Σ_m r_{i,c,m}` for each cluster.
    pub mass: Vec<f64>,
    first: Vec<Vector4<f64>>,
    second: Vec<Matrix4<f64>>,
}

impl Accumulator {
    pub fn new(family: Family, clusters: usize, per_cluster: usize) -> Self {
        let len = clusters * per_cluster;
        let (first, second) = match family {
            Family::Vmf => (vec![Vector4::zeros(); len], Vec::new()),
            Family::Watson => (Vec::new(), vec![Matrix4::zeros(); len]),
        };
        Accumulator {
            per_cluster,
            mass: vec![0.0; clusters],
            first,
            second,
        }
    }

    /// `γ_c = Σ_m P_mᵀ S_{c,m}`.
    pub fn gamma(&self, cluster: usize, elements: &[GroupElement]) -> Vector4<f64> {
        let start = cluster * self.per_cluster;
        elements
            .iter()
            .zip(&self.first[start..start + self.per_cluster])
            .fold(Vector4::zeros(), |acc, (p, s)| acc + p.matrix().tr_mul(s))
    }

    /// `Σ_m P_mᵀ S_{c,m} P_m / Σ r`, the weighted scatter matrix of cluster `c`.
    pub fn scatter(&self, cluster: usize, elements: &[GroupElement]) -> Matrix4<f64> {
        let start = cluster * self.per_cluster;
        let sum = elements
            .iter()
            .zip(&self.second[start..start + self.per_cluster])
            .fold(Matrix4::zeros(), |acc, (p, s)| acc + p.matrix().tr_mul(s) * p.matrix());
        let t = sum / self.mass[cluster];
        (t + t.transpose()) * 0.5
    }
}

/// E-step over a mixture. Returns the total log-likelihood.
pub(crate) fn e_step(xs: &[UnitQuaternion], clusters: &[GInvariantModel], alpha: &[f64]) -> (f64, Accumulator) {
    let family = clusters[0].family();
    let per_cluster = clusters[0].component_means().len();
    let ln_alpha: Vec<f64> = alpha.iter().map(|a| a.ln()).collect();
    let mut acc = Accumulator::new(family, clusters.len(), per_cluster);
    let mut buf = Vec::with_capacity(clusters.len() * per_cluster);
    let mut loglik = 0.0;
    for x in xs {
        let x = x.as_vector();
        loglik += posterior_row(x, clusters, &ln_alpha, &mut buf);
        match family {
            Family::Vmf => {
                for (j, &r) in buf.iter().enumerate() {
                    acc.mass[j / per_cluster] += r;
                    acc.first[j] += x * r;
                }
            }
            Family::Watson => {
                let xx = x * x.transpose();
                for (j, &r) in buf.iter().enumerate() {
                    acc.mass[j / per_cluster] += r;
                    acc.second[j] += xx * r;
                }
            }
        }
    }
    (loglik, acc)
}

/// Mixture VMF E-step over sign-paired groups, folded like
/// [`hyperbolic_e_step`]. The accumulator holds, per cluster, one resultant
/// per sign pair, so [`Accumulator::gamma`] takes the first half of the group.
pub(crate) fn folded_vmf_e_step(xs: &[UnitQuaternion], clusters: &[GInvariantModel], alpha: &[f64]) -> (f64, Accumulator) {
    let half = clusters[0].group().half().len();
    let base: Vec<f64> = clusters.iter().zip(alpha).map(|(m, a)| a.ln() + m.ln_weight()).collect();
    let mut acc = Accumulator::new(Family::Vmf, clusters.len(), half);
    let mut a = vec![0.0; clusters.len() * half];
    let mut masses = vec![0.0; clusters.len()];
    let mut loglik = 0.0;
    for x in xs {
        let x = x.as_vector();
        let mut top = f64::NEG_INFINITY;
        for (c, model) in clusters.iter().enumerate() {
            let kappa = model.kappa();
            let mut peak = 0.0f64;
            for (am, m) in a[c * half..(c + 1) * half].iter_mut().zip(model.component_means()) {
                *am = kappa * m.dot(x);
                peak = peak.max(am.abs());
            }
            top = top.max(base[c] + peak);
        }
        let mut z = 0.0;
        for (c, b) in base.iter().enumerate() {
            let shift = b - top;
            // e^{shift + a} · e^{shift − a} = e^{2 shift}
            let product = (2.0 * shift).exp();
            let mut cluster_mass = 0.0;
            for am in a[c * half..(c + 1) * half].iter_mut() {
                let (lu, lv) = (shift + *am, shift - *am);
                let u = if lu > NEGLIGIBLE_LOG_WEIGHT { lu.exp() } else { 0.0 };
                let v = if lv <= NEGLIGIBLE_LOG_WEIGHT {
                    0.0
                } else if u > 0.0 && product > 0.0 {
                    product / u
                } else {
                    lv.exp()
                };
                cluster_mass += u + v;
                *am = u - v;
            }
            masses[c] = cluster_mass;
            z += cluster_mass;
        }
        loglik += top + z.ln();
        let inv = 1.0 / z;
        for (total, m) in acc.mass.iter_mut().zip(&masses) {
            *total += m * inv;
        }
        for (d, &w) in acc.first.iter_mut().zip(&a) {
            if w != 0.0 {
                *d += x * (w * inv);
            }
        }
    }
    (loglik, acc)
}

/// VMF E-step folded over sign pairs: only the first half of the group is
/// visited and each pair contributes `e^{a} + e^{-a}` to the normalizer and
/// `e^{a} − e^{-a}` to the resultant, with `a = κ (P_m μ)ᵀ x`.
///
/// Returns the total log-likelihood and `γ`.
pub(crate) fn hyperbolic_e_step(xs: &[UnitQuaternion], model: &GInvariantModel) -> Result<(f64, Vector4<f64>)> {
    let group = model.group();
    if !group.is_sign_paired() {
        return Err(Error::NotSignPaired);
    }
    let half = group.half();
    let means = &model.component_means()[..half.len()];
    let kappa = model.kappa();
    let mut diff = vec![Vector4::zeros(); half.len()];
    let mut a = vec![0.0; half.len()];
    let mut loglik = 0.0;
    for x in xs {
        let x = x.as_vector();
        let mut c = 0.0f64;
        for (am, m) in a.iter_mut().zip(means) {
            *am = kappa * m.dot(x);
            c = c.max(am.abs());
        }
        let e2c = (-2.0 * c).exp();
        let mut z = 0.0;
        for am in a.iter_mut() {
            let u = (*am - c).exp();
            let v = if u > 0.0 { e2c / u } else { (-*am - c).exp() };
            z += u + v;
            *am = u - v;
        }
        loglik += c + z.ln();
        let inv = 1.0 / z;
        for (d, &w) in diff.iter_mut().zip(&a) {
            *d += x * (w * inv);
        }
    }
    loglik += xs.len() as f64 * model.ln_weight();
    let gamma = half
        .iter()
        .zip(&diff)
        .fold(Vector4::zeros(), |acc, (p, d)| acc + p.matrix().tr_mul(d));
    Ok((loglik, gamma))
}

/// `μ̂ = γ/‖γ‖`, `κ̂ = A₄⁻¹(‖γ‖/mass)` clamped to `[0, 10⁶]`.
pub(crate) fn vmf_update(gamma: &Vector4<f64>, mass: f64) -> Result<(UnitQuaternion, f64)> {
    let norm = gamma.norm();
    let mu = UnitQuaternion::from_vector(*gamma).ok_or(Error::DegenerateResultant {
        resultant: 0.0,
        mean: None,
    })?;
    let r = norm / mass;
    let kappa = if r >= RESULTANT_CEILING {
        VMF_KAPPA_MAX
    } else {
        a_p_inverse(r, DIM)?.min(VMF_KAPPA_MAX)
    };
    Ok((mu, kappa))
}

/// Watson M-step from a scatter matrix. Both axis candidates are scored by
/// `Q(κ) = κλ − ln M(½, 2, κ)`; sign-consistent candidates are preferred.
/// The flag reports whether the returned candidate is sign-consistent.
pub(crate) fn watson_update(scatter: &Matrix4<f64>) -> Result<(UnitQuaternion, f64, bool)> {
    let eig = SymmetricEigen::new(*scatter);
    let top = eig.eigenvalues.imax();
    let bottom = eig.eigenvalues.imin();
    let b = 0.5 * DIM as f64;
    let candidate = |idx: usize, bipolar: bool| -> Result<(UnitQuaternion, f64, bool, f64)> {
        let lambda = eig.eigenvalues[idx];
        let kappa = y_p_inverse(lambda, DIM)?.clamp(-WATSON_KAPPA_MAX, WATSON_KAPPA_MAX);
        let consistent = if bipolar { kappa >= 0.0 } else { kappa <= 0.0 };
        let mu = UnitQuaternion::from_vector(eig.eigenvectors.column(idx).into_owned())
            .expect("eigenvectors are unit");
        let q = kappa * lambda - ln_kummer_m(0.5, b, kappa);
        Ok((mu, kappa, consistent, q))
    };
    let first = candidate(top, true);
    let second = candidate(bottom, false);
    let best = match (first, second) {
        (Ok(a), Ok(b)) => {
            let a_wins = match (a.2, b.2) {
                (true, false) => true,
                (false, true) => false,
                _ => a.3 >= b.3,
            };
            if a_wins {
                a
            } else {
                b
            }
        }
        (Ok(a), Err(_)) => a,
        (Err(_), Ok(b)) => b,
        (Err(e), Err(_)) => return Err(e),
    };
    Ok((best.0, best.1, best.2))
}
