//! Log-densities of the VMF and Watson laws on `S³`, their group-invariant
//! mixtures, and mixtures of several group-invariant populations.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{ln_kummer_m, ln_sphere_area, ln_vmf_normalizer};
use crate::symgroup::{SymmetryGroup, UnitQuaternion};

/// Ambient dimension of the quaternion sphere.
pub const DIM: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Vmf,
    Watson,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Vmf => "vmf",
            Family::Watson => "watson",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vmf" => Ok(Family::Vmf),
            "watson" => Ok(Family::Watson),
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }
}

/// `ln Σ exp(v_i)` without overflow. `-∞` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln φ(x; μ, κ) = ln c₄(κ) + κ μᵀx`.
pub fn vmf_logpdf(x: &UnitQuaternion, mu: &UnitQuaternion, kappa: f64) -> f64 {
    ln_vmf_normalizer(kappa, DIM) + kappa * mu.dot(x)
}

/// `ln W₄(x; μ, κ)` with respect to surface measure on `S³`.
pub fn watson_logpdf(x: &UnitQuaternion, mu: &UnitQuaternion, kappa: f64) -> f64 {
    let t = mu.dot(x);
    kappa * t * t + watson_ln_normalizer(kappa)
}

fn watson_ln_normalizer(kappa: f64) -> f64 {
    -ln_kummer_m(0.5, 0.5 * DIM as f64, kappa) - ln_sphere_area(DIM)
}

/// A group-invariant VMF or Watson law: the equal-weight mixture of the base
/// law over the orbit `{P_m μ}`. VMF models mix over every group element;
/// Watson models over the sign-pair quotient, since `±P_m` give identical
/// Watson components.
#[derive(Debug, Clone)]
pub struct GInvariantModel {
    family: Family,
    mu: UnitQuaternion,
    kappa: f64,
    group: Arc<SymmetryGroup>,
    component_means: Vec<Vector4<f64>>,
    /// Per-component log normalizer minus `ln(#components)`.
    ln_weight: f64,
}

impl GInvariantModel {
    pub fn new(family: Family, mu: UnitQuaternion, kappa: f64, group: Arc<SymmetryGroup>) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::InvalidArgument(format!("concentration {kappa} is not finite")));
        }
        if family == Family::Vmf && kappa < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "VMF concentration must be non-negative, got {kappa}"
            )));
        }
        if family == Family::Watson && !group.is_sign_paired() {
            return Err(Error::NotSignPaired);
        }
        let elements = match family {
            Family::Vmf => group.elements(),
            Family::Watson => group.half(),
        };
        let component_means: Vec<Vector4<f64>> =
            elements.iter().map(|p| p.matrix() * mu.as_vector()).collect();
        let ln_norm = match family {
            Family::Vmf => ln_vmf_normalizer(kappa, DIM),
            Family::Watson => watson_ln_normalizer(kappa),
        };
        let ln_weight = ln_norm - (component_means.len() as f64).ln();
        Ok(GInvariantModel {
            family,
            mu,
            kappa,
            group,
            component_means,
            ln_weight,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn mu(&self) -> UnitQuaternion {
        self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn group(&self) -> &Arc<SymmetryGroup> {
        &self.group
    }

    /// `P_m μ` for every mixture component.
    pub fn component_means(&self) -> &[Vector4<f64>] {
        &self.component_means
    }

    /// Unnormalized component exponents `κ (P_m μ)ᵀx` or `κ ((P_m μ)ᵀx)²`.
    pub(crate) fn component_exponents(&self, x: &Vector4<f64>, out: &mut Vec<f64>) {
        out.clear();
        match self.family {
            Family::Vmf => out.extend(self.component_means.iter().map(|m| self.kappa * m.dot(x))),
            Family::Watson => out.extend(self.component_means.iter().map(|m| {
                let t = m.dot(x);
                self.kappa * t * t
            })),
        }
    }

    /// `ln` of the per-component weight times normalizer, `ln(c / K)`.
    pub(crate) fn ln_weight(&self) -> f64 {
        self.ln_weight
    }

    pub fn logpdf(&self, x: &UnitQuaternion) -> f64 {
        let mut buf = Vec::with_capacity(self.component_means.len());
        self.component_exponents(x.as_vector(), &mut buf);
        self.ln_weight + log_sum_exp(&buf)
    }

    pub fn loglik(&self, xs: &[UnitQuaternion]) -> f64 {
        let mut buf = Vec::with_capacity(self.component_means.len());
        xs.iter()
            .map(|x| {
                self.component_exponents(x.as_vector(), &mut buf);
                self.ln_weight + log_sum_exp(&buf)
            })
            .sum()
    }
}

pub fn ginv_logpdf(x: &UnitQuaternion, model: &GInvariantModel) -> f64 {
    model.logpdf(x)
}

/// `Σ_c α_c f_c` over group-invariant populations sharing family and group.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    clusters: Vec<GInvariantModel>,
    alpha: Vec<f64>,
}

impl MixtureModel {
    pub fn new(clusters: Vec<GInvariantModel>, alpha: Vec<f64>) -> Result<Self> {
        if clusters.is_empty() || clusters.len() != alpha.len() {
            return Err(Error::InvalidArgument(format!(
                "{} clusters but {} mixing weights",
                clusters.len(),
                alpha.len()
            )));
        }
        let family = clusters[0].family;
        if clusters
            .iter()
            .any(|c| c.family != family || *c.group != *clusters[0].group)
        {
            return Err(Error::InvalidArgument(
                "mixture clusters must share family and group".into(),
            ));
        }
        if alpha.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::InvalidArgument("mixing weights must be positive".into()));
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("mixing weights sum to {total}")));
        }
        Ok(MixtureModel { clusters, alpha })
    }

    pub fn clusters(&self) -> &[GInvariantModel] {
        &self.clusters
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn family(&self) -> Family {
        self.clusters[0].family
    }

    pub fn logpdf(&self, x: &UnitQuaternion) -> f64 {
        let terms: Vec<f64> = self
            .clusters
            .iter()
            .zip(&self.alpha)
            .map(|(c, a)| a.ln() + c.logpdf(x))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn loglik(&self, xs: &[UnitQuaternion]) -> f64 {
        xs.iter().map(|x| self.logpdf(x)).sum()
    }
}

pub fn mixture_logpdf(x: &UnitQuaternion, mix: &MixtureModel) -> f64 {
    mix.logpdf(x)
}
