//! Single-file commands: simulate a data set, fit one, or map it into the
//! fundamental zone.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ingest_orientations, Format, GroupKind};
use crate::cluster::glrt_multimodal;
use crate::density::{Family, GInvariantModel};
use crate::error::{Error, Result};
use crate::estimator::{em_fit, EmConfig};
use crate::sampler::{sample_vmf, sample_watson, uniform_quaternion, OrientationSample, RngStream};
use crate::symgroup::{quaternion_to_euler, SymmetryGroup, UnitQuaternion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub family: Family,
    pub group: GroupKind,
    pub kappa: f64,
    pub n: usize,
    /// Number of populations, each with a uniform random mean and an equal share of `n`.
    pub clusters: usize,
    /// Report each sample by its fundamental-zone representative.
    pub wrap: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Simulation {
    pub config: SimulateConfig,
    pub means: Vec<UnitQuaternion>,
    #[serde(skip)]
    pub sample: OrientationSample,
}

pub fn simulate(cfg: &SimulateConfig) -> Result<Simulation> {
    if cfg.clusters < 1 || cfg.n < cfg.clusters {
        return Err(Error::Config(format!("cannot split {} samples into {} clusters", cfg.n, cfg.clusters)));
    }
    if !(cfg.kappa.is_finite() && cfg.kappa >= 0.0) {
        return Err(Error::Config(format!("kappa {} must be finite and non-negative", cfg.kappa)));
    }
    let group = cfg.group.build();
    let mut rng = RngStream::new(cfg.seed);
    let mut means = Vec::with_capacity(cfg.clusters);
    let mut raw = Vec::with_capacity(cfg.n);
    for c in 0..cfg.clusters {
        let mu = uniform_quaternion(&mut rng);
        let size = cfg.n / cfg.clusters + usize::from(c < cfg.n % cfg.clusters);
        let draw = match cfg.family {
            Family::Vmf => sample_vmf(&mu, cfg.kappa, size, &mut rng),
            Family::Watson => sample_watson(&mu, cfg.kappa, size, &mut rng),
        };
        raw.extend(draw.iter());
        means.push(mu);
    }
    let sample = if cfg.wrap {
        cfg.group.wrap_sample(&group, &raw)?
    } else {
        raw.into()
    };
    Ok(Simulation {
        config: cfg.clone(),
        means,
        sample,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub family: Family,
    pub group: GroupKind,
    pub clusters: usize,
    /// Level of the one-versus-`clusters` test, run when `clusters ≥ 2`.
    pub alpha_level: f64,
    pub em: EmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterFit {
    /// Fundamental-zone representative of `μ̂`.
    pub mu: [f64; 4],
    /// Bunge angles of `mu`, radians.
    pub euler: [f64; 3],
    pub kappa: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlrtVerdict {
    pub statistic: f64,
    pub dof: usize,
    pub threshold: f64,
    pub alpha_level: f64,
    pub reject_h0: bool,
    pub h0_loglik: f64,
    pub h0_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub input: Option<String>,
    pub n: usize,
    pub options: FitOptions,
    pub seed: u64,
    pub clusters: Vec<ClusterFit>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub glrt: Option<GlrtVerdict>,
}

fn cluster_fit(kind: GroupKind, group: &SymmetryGroup, model: &GInvariantModel, alpha: f64) -> Result<ClusterFit> {
    let mu = kind.wrap(group, &model.mu())?;
    Ok(ClusterFit {
        mu: mu.to_array(),
        euler: quaternion_to_euler(&mu),
        kappa: model.kappa(),
        alpha,
    })
}

/// Single-population EM when `clusters = 1`; otherwise mixture EM and the
/// test of one population against `clusters`.
pub fn fit_sample(xs: &[UnitQuaternion], opts: &FitOptions) -> Result<FitReport> {
    let group = opts.group.build();
    let (clusters, loglik, iterations, converged, glrt) = match opts.clusters {
        0 => return Err(Error::Config("clusters must be at least 1".into())),
        1 => {
            let fit = em_fit(xs, &group, opts.family, &opts.em)?;
            let c = cluster_fit(opts.group, &group, &fit.model, 1.0)?;
            (vec![c], fit.loglik, fit.iterations, fit.converged, None)
        }
        k => {
            let test = glrt_multimodal(xs, &group, k, opts.family, opts.alpha_level, &opts.em)?;
            let mix = &test.h1_fit.model;
            let clusters = mix
                .clusters()
                .iter()
                .zip(mix.alpha())
                .map(|(m, &a)| cluster_fit(opts.group, &group, m, a))
                .collect::<Result<Vec<_>>>()?;
            let verdict = GlrtVerdict {
                statistic: test.statistic,
                dof: test.dof,
                threshold: test.threshold,
                alpha_level: opts.alpha_level,
                reject_h0: test.reject_h0,
                h0_loglik: test.h0_fit.loglik,
                h0_iterations: test.h0_fit.iterations,
            };
            (clusters, test.h1_fit.loglik, test.h1_fit.iterations, test.h1_fit.converged, Some(verdict))
        }
    };
    Ok(FitReport {
        input: None,
        n: xs.len(),
        options: opts.clone(),
        seed: opts.em.seed,
        clusters,
        loglik,
        iterations,
        converged,
        glrt,
    })
}

pub fn fit_command(path: &Path, format: Format, opts: &FitOptions) -> Result<FitReport> {
    let xs = ingest_orientations(path, format)?;
    let mut report = fit_sample(&xs, opts)?;
    report.input = Some(path.display().to_string());
    Ok(report)
}

/// Replaces every orientation by its fundamental-zone representative.
pub fn fz_map(xs: &[UnitQuaternion], kind: GroupKind) -> Result<OrientationSample> {
    kind.wrap_sample(&kind.build(), xs)
}
