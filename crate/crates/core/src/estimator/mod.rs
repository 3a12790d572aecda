//! Single-population estimation: closed-form ML (plain and
//! reference-aligned) and EM for the group-invariant VMF and Watson laws.

mod engine;

pub(crate) use engine::{component_elements, e_step, folded_vmf_e_step, posterior_row, vmf_update, watson_update};

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::{Family, GInvariantModel};
use crate::error::{Error, Result};
use crate::sampler::{uniform_quaternion, RngStream};
use crate::symgroup::{SymmetryGroup, UnitQuaternion};

pub use engine::{VMF_KAPPA_MAX, WATSON_KAPPA_MAX};

/// Starting point of the first EM run. Later restarts are always random.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Reference-aligned ML estimate.
    FromData,
    Provided { mu: UnitQuaternion, kappa: f64 },
    /// `μ` uniform on `S³`, `κ` uniform on `[1, 100]`.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stopping threshold on the change in mean per-sample log-likelihood.
    pub tol: f64,
    pub n_restarts: usize,
    pub init: Init,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 1000,
            tol: 1e-8,
            n_restarts: 3,
            init: Init::FromData,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.n_restarts < 1 {
            return Err(Error::Config("n_restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of an EM fit. `loglik_trace[k]` is the mean per-sample
/// log-likelihood after `k` M-steps of the winning restart.
#[derive(Debug, Clone)]
pub struct EmReport<M> {
    pub model: M,
    /// Total log-likelihood of `model`.
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub loglik_trace: Vec<f64>,
    /// Seconds spent on all restarts together.
    pub wall_time: f64,
}

/// Posterior component probabilities `r[i][m]`, row-major.
#[derive(Debug, Clone)]
pub struct Responsibilities {
    components: usize,
    values: Vec<f64>,
}

impl Responsibilities {
    pub fn n(&self) -> usize {
        self.values.len() / self.components
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.components..(i + 1) * self.components]
    }

    pub fn get(&self, i: usize, m: usize) -> f64 {
        self.values[i * self.components + m]
    }
}

/// E-step posteriors of `model`'s components: `M` columns for VMF, `M/2`
/// for Watson.
pub fn responsibilities(xs: &[UnitQuaternion], model: &GInvariantModel) -> Responsibilities {
    let components = model.component_means().len();
    let mut values = Vec::with_capacity(xs.len() * components);
    let mut buf = Vec::with_capacity(components);
    let clusters = std::slice::from_ref(model);
    for x in xs {
        posterior_row(x.as_vector(), clusters, &[0.0], &mut buf);
        values.extend_from_slice(&buf);
    }
    Responsibilities { components, values }
}

fn require_samples(xs: &[UnitQuaternion], min: usize) -> Result<()> {
    if xs.len() < min {
        return Err(Error::InvalidArgument(format!(
            "need at least {min} samples, got {}",
            xs.len()
        )));
    }
    Ok(())
}

fn scatter(xs: &[UnitQuaternion]) -> Matrix4<f64> {
    xs.iter()
        .fold(Matrix4::zeros(), |acc, x| acc + x.as_vector() * x.as_vector().transpose())
        / xs.len() as f64
}

/// Closed-form ML ignoring symmetry. VMF fits come back with the trivial
/// group, Watson fits with the sign group (a single axial component).
pub fn ml_naive(xs: &[UnitQuaternion], family: Family) -> Result<GInvariantModel> {
    require_samples(xs, 2)?;
    match family {
        Family::Vmf => {
            let gamma: Vector4<f64> = xs.iter().map(|x| x.as_vector()).sum();
            let r = gamma.norm() / xs.len() as f64;
            if r >= 1.0 - 1e-12 {
                return Err(Error::DegenerateResultant {
                    resultant: r,
                    mean: UnitQuaternion::from_vector(gamma),
                });
            }
            let (mu, kappa) = vmf_update(&gamma, xs.len() as f64)?;
            GInvariantModel::new(Family::Vmf, mu, kappa, Arc::new(SymmetryGroup::trivial()))
        }
        Family::Watson => {
            let (mu, kappa, _) = watson_update(&scatter(xs))?;
            GInvariantModel::new(Family::Watson, mu, kappa, Arc::new(SymmetryGroup::sign()))
        }
    }
}

/// Replaces every sample by its symmetry copy closest to `reference`.
pub fn align_to_reference(xs: &[UnitQuaternion], reference: &UnitQuaternion, group: &SymmetryGroup) -> Vec<UnitQuaternion> {
    xs.iter()
        .map(|x| group.element(group.closest_element(reference, x)).apply(x))
        .collect()
}

/// ML after aligning the sample toward a reference drawn uniformly from it.
/// The fitted `(μ, κ)` is attached to `group`.
pub fn ml_modified<R: Rng + ?Sized>(
    xs: &[UnitQuaternion],
    group: &Arc<SymmetryGroup>,
    family: Family,
    rng: &mut R,
) -> Result<GInvariantModel> {
    require_samples(xs, 2)?;
    let reference = xs[rng.random_range(0..xs.len())];
    let aligned = align_to_reference(xs, &reference, group);
    let naive = ml_naive(&aligned, family)?;
    GInvariantModel::new(family, naive.mu(), naive.kappa(), group.clone())
}

/// Result of one E-step at `model` followed by one M-step.
#[derive(Debug, Clone)]
pub struct VmfStep {
    /// Total log-likelihood of the input model.
    pub loglik: f64,
    /// `Σ_i Σ_m r_{i,m} P_mᵀ x_i`.
    pub gamma: Vector4<f64>,
    pub next: GInvariantModel,
}

#[derive(Debug, Clone)]
pub struct WatsonStep {
    pub loglik: f64,
    /// Responsibility-weighted scatter matrix of the aligned samples.
    pub scatter: Matrix4<f64>,
    pub next: GInvariantModel,
    /// Whether the chosen axis agrees in sign with its concentration.
    pub consistent: bool,
}

fn require_family(model: &GInvariantModel, family: Family) -> Result<()> {
    if model.family() != family {
        return Err(Error::InvalidArgument(format!(
            "expected a {family} model, got {}",
            model.family()
        )));
    }
    Ok(())
}

pub fn vmf_em_step(xs: &[UnitQuaternion], model: &GInvariantModel) -> Result<VmfStep> {
    require_family(model, Family::Vmf)?;
    let (loglik, acc) = e_step(xs, std::slice::from_ref(model), &[1.0]);
    let gamma = acc.gamma(0, component_elements(model));
    let (mu, kappa) = vmf_update(&gamma, xs.len() as f64)?;
    let next = GInvariantModel::new(Family::Vmf, mu, kappa, model.group().clone())?;
    Ok(VmfStep { loglik, gamma, next })
}

/// Same fixed-point map as [`vmf_em_step`], with the E-step folded over sign
/// pairs. Requires a sign-paired group.
pub fn vmf_em_step_hyperbolic(xs: &[UnitQuaternion], model: &GInvariantModel) -> Result<VmfStep> {
    require_family(model, Family::Vmf)?;
    let (loglik, gamma) = engine::hyperbolic_e_step(xs, model)?;
    let (mu, kappa) = vmf_update(&gamma, xs.len() as f64)?;
    let next = GInvariantModel::new(Family::Vmf, mu, kappa, model.group().clone())?;
    Ok(VmfStep { loglik, gamma, next })
}

pub fn watson_em_step(xs: &[UnitQuaternion], model: &GInvariantModel) -> Result<WatsonStep> {
    require_family(model, Family::Watson)?;
    let (loglik, acc) = e_step(xs, std::slice::from_ref(model), &[1.0]);
    let scatter = acc.scatter(0, component_elements(model));
    let (mu, kappa, consistent) = watson_update(&scatter)?;
    let next = GInvariantModel::new(Family::Watson, mu, kappa, model.group().clone())?;
    Ok(WatsonStep {
        loglik,
        scatter,
        next,
        consistent,
    })
}

pub(crate) struct StepOutcome<M> {
    pub loglik: f64,
    pub next: M,
    pub consistent: bool,
}

/// Runs EM from `init` until the mean log-likelihood changes by less than
/// `cfg.tol` or `cfg.max_iters` M-steps have been taken.
pub(crate) fn iterate<M>(
    init: M,
    n: usize,
    cfg: &EmConfig,
    mut step: impl FnMut(&M) -> Result<StepOutcome<M>>,
) -> Result<EmReport<M>> {
    let mut model = init;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut consistent;
    loop {
        let out = step(&model)?;
        if !out.loglik.is_finite() {
            return Err(Error::NonFiniteLikelihood { iteration: iterations });
        }
        let mean = out.loglik / n as f64;
        consistent = out.consistent;
        let delta = trace.last().map(|prev: &f64| (mean - prev).abs());
        trace.push(mean);
        if delta.is_some_and(|d| d < cfg.tol) {
            converged = true;
        }
        if converged || iterations == cfg.max_iters {
            return Ok(EmReport {
                model,
                loglik: out.loglik,
                iterations,
                converged: converged && consistent,
                loglik_trace: trace,
                wall_time: 0.0,
            });
        }
        model = out.next;
        iterations += 1;
    }
}

/// Runs `attempt(r)` for each restart and keeps the highest final
/// log-likelihood (earliest restart on ties). Fails only if every restart does.
pub(crate) fn best_of_restarts<M>(
    n_restarts: usize,
    mut attempt: impl FnMut(usize) -> Result<EmReport<M>>,
) -> Result<EmReport<M>> {
    let start = Instant::now();
    let mut best: Option<EmReport<M>> = None;
    let mut first_err = None;
    for r in 0..n_restarts {
        match attempt(r) {
            Ok(report) => {
                if best.as_ref().is_none_or(|b| report.loglik > b.loglik) {
                    best = Some(report);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let mut report = best.ok_or_else(|| first_err.expect("at least one restart"))?;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

pub(crate) fn random_start<R: Rng + ?Sized>(rng: &mut R) -> (UnitQuaternion, f64) {
    (uniform_quaternion(rng), rng.random_range(1.0..=100.0))
}

fn initial_model(
    xs: &[UnitQuaternion],
    group: &Arc<SymmetryGroup>,
    family: Family,
    init: Init,
    rng: &mut RngStream,
) -> Result<GInvariantModel> {
    match init {
        Init::FromData => match ml_modified(xs, group, family, rng) {
            Err(Error::DegenerateResultant { mean: Some(mu), .. }) => {
                GInvariantModel::new(family, mu, VMF_KAPPA_MAX, group.clone())
            }
            other => other,
        },
        Init::Provided { mu, kappa } => GInvariantModel::new(family, mu, kappa, group.clone()),
        Init::Random => {
            let (mu, kappa) = random_start(rng);
            GInvariantModel::new(family, mu, kappa, group.clone())
        }
    }
}

fn run_single(
    xs: &[UnitQuaternion],
    group: &Arc<SymmetryGroup>,
    family: Family,
    cfg: &EmConfig,
    step: impl Fn(&[UnitQuaternion], &GInvariantModel) -> Result<StepOutcome<GInvariantModel>>,
) -> Result<EmReport<GInvariantModel>> {
    cfg.validate()?;
    require_samples(xs, 2)?;
    let mut rng = RngStream::new(cfg.seed);
    best_of_restarts(cfg.n_restarts, |r| {
        let init = if r == 0 { cfg.init } else { Init::Random };
        let model = initial_model(xs, group, family, init, &mut rng)?;
        iterate(model, xs.len(), cfg, |m| step(xs, m))
    })
}

/// EM for the group-invariant VMF law, visiting all `M` components.
pub fn em_vmf(xs: &[UnitQuaternion], group: &Arc<SymmetryGroup>, cfg: &EmConfig) -> Result<EmReport<GInvariantModel>> {
    run_single(xs, group, Family::Vmf, cfg, |xs, m| {
        vmf_em_step(xs, m).map(|s| StepOutcome {
            loglik: s.loglik,
            next: s.next,
            consistent: true,
        })
    })
}

/// [`em_vmf`] with the E-step folded over sign pairs.
pub fn em_vmf_hyperbolic(
    xs: &[UnitQuaternion],
    group: &Arc<SymmetryGroup>,
    cfg: &EmConfig,
) -> Result<EmReport<GInvariantModel>> {
    if !group.is_sign_paired() {
        return Err(Error::NotSignPaired);
    }
    run_single(xs, group, Family::Vmf, cfg, |xs, m| {
        vmf_em_step_hyperbolic(xs, m).map(|s| StepOutcome {
            loglik: s.loglik,
            next: s.next,
            consistent: true,
        })
    })
}

/// EM for the group-invariant Watson law over the sign-pair quotient.
pub fn em_watson(xs: &[UnitQuaternion], group: &Arc<SymmetryGroup>, cfg: &EmConfig) -> Result<EmReport<GInvariantModel>> {
    if !group.is_sign_paired() {
        return Err(Error::NotSignPaired);
    }
    run_single(xs, group, Family::Watson, cfg, |xs, m| {
        watson_em_step(xs, m).map(|s| StepOutcome {
            loglik: s.loglik,
            next: s.next,
            consistent: s.consistent,
        })
    })
}

/// Dispatches to [`em_vmf`] or [`em_watson`].
pub fn em_fit(
    xs: &[UnitQuaternion],
    group: &Arc<SymmetryGroup>,
    family: Family,
    cfg: &EmConfig,
) -> Result<EmReport<GInvariantModel>> {
    match family {
        Family::Vmf => em_vmf(xs, group, cfg),
        Family::Watson => em_watson(xs, group, cfg),
    }
}
