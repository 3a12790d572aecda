//! Several group-invariant populations at once: mixture EM, spherical
//! k-means baselines, and the likelihood-ratio test for more than one
//! population.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::Vector4;
use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::density::{Family, GInvariantModel, MixtureModel, DIM};
use crate::error::{Error, Result};
use crate::estimator::{
    best_of_restarts, component_elements, e_step, em_fit, folded_vmf_e_step, iterate, ml_modified, ml_naive, posterior_row,
    random_start, vmf_update, watson_update, EmConfig, EmReport, Init, StepOutcome,
};
use crate::sampler::RngStream;
use crate::symgroup::{SymmetryGroup, UnitQuaternion};

const MIN_ALPHA: f64 = 1e-8;
const MAX_RESEEDS: usize = 20;
const MAX_LLOYD_ITERS: usize = 100;

/// Posteriors `r[i][c][m]` over clusters and symmetry components.
#[derive(Debug, Clone)]
pub struct ClusterResponsibilities {
    clusters: usize,
    components: usize,
    values: Vec<f64>,
}

impl ClusterResponsibilities {
    pub fn n(&self) -> usize {
        self.values.len() / (self.clusters * self.components)
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn get(&self, i: usize, c: usize, m: usize) -> f64 {
        self.values[(i * self.clusters + c) * self.components + m]
    }

    /// Posterior probability that sample `i` came from cluster `c`.
    pub fn cluster_probability(&self, i: usize, c: usize) -> f64 {
        let start = (i * self.clusters + c) * self.components;
        self.values[start..start + self.components].iter().sum()
    }
}

pub fn cluster_responsibilities(xs: &[UnitQuaternion], mix: &MixtureModel) -> ClusterResponsibilities {
    let clusters = mix.len();
    let components = mix.clusters()[0].component_means().len();
    let ln_alpha: Vec<f64> = mix.alpha().iter().map(|a| a.ln()).collect();
    let mut values = Vec::with_capacity(xs.len() * clusters * components);
    let mut buf = Vec::new();
    for x in xs {
        posterior_row(x.as_vector(), mix.clusters(), &ln_alpha, &mut buf);
        values.extend_from_slice(&buf);
    }
    ClusterResponsibilities {
        clusters,
        components,
        values,
    }
}

/// One mixture E-step at `mix` followed by one M-step.
#[derive(Debug, Clone)]
pub struct MixtureStep {
    /// Total log-likelihood of the input mixture.
    pub loglik: f64,
    pub next: MixtureModel,
    /// False if some Watson cluster had no sign-consistent axis candidate.
    pub consistent: bool,
}

/// VMF mixtures over sign-paired groups fold each `±P` pair into one term.
pub fn mixture_em_step(xs: &[UnitQuaternion], mix: &MixtureModel) -> Result<MixtureStep> {
    let folded = mix.family() == Family::Vmf && mix.clusters()[0].group().is_sign_paired();
    let (loglik, acc) = if folded {
        folded_vmf_e_step(xs, mix.clusters(), mix.alpha())
    } else {
        e_step(xs, mix.clusters(), mix.alpha())
    };
    let total: f64 = acc.mass.iter().sum();
    let mut clusters = Vec::with_capacity(mix.len());
    let mut alpha = Vec::with_capacity(mix.len());
    let mut consistent = true;
    for (c, model) in mix.clusters().iter().enumerate() {
        let a = acc.mass[c] / total;
        if !(a >= MIN_ALPHA) {
            return Err(Error::EmptyCluster { cluster: c });
        }
        let elements = if folded { model.group().half() } else { component_elements(model) };
        let (mu, kappa) = match model.family() {
            Family::Vmf => vmf_update(&acc.gamma(c, elements), acc.mass[c])?,
            Family::Watson => {
                let (mu, kappa, ok) = watson_update(&acc.scatter(c, elements))?;
                consistent &= ok;
                (mu, kappa)
            }
        };
        clusters.push(GInvariantModel::new(model.family(), mu, kappa, model.group().clone())?);
        alpha.push(a);
    }
    let sum: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= sum);
    Ok(MixtureStep {
        loglik,
        next: MixtureModel::new(clusters, alpha)?,
        consistent,
    })
}

/// Clusters reordered by descending mixing weight (stable on ties).
pub fn sort_by_weight(mix: &MixtureModel) -> MixtureModel {
    let mut order: Vec<usize> = (0..mix.len()).collect();
    order.sort_by(|&a, &b| mix.alpha()[b].total_cmp(&mix.alpha()[a]));
    let clusters = order.iter().map(|&i| mix.clusters()[i].clone()).collect();
    let alpha = order.iter().map(|&i| mix.alpha()[i]).collect();
    MixtureModel::new(clusters, alpha).expect("permutation of a valid mixture")
}

fn random_mixture(
    group: &Arc<SymmetryGroup>,
    family: Family,
    clusters: usize,
    rng: &mut RngStream,
) -> Result<MixtureModel> {
    let models = (0..clusters)
        .map(|_| {
            let (mu, kappa) = random_start(rng);
            GInvariantModel::new(family, mu, kappa, group.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    MixtureModel::new(models, vec![1.0 / clusters as f64; clusters])
}

fn kmeans_start(
    xs: &[UnitQuaternion],
    group: &Arc<SymmetryGroup>,
    family: Family,
    clusters: usize,
    rng: &mut RngStream,
) -> Result<MixtureModel> {
    let km = kmeans_spherical(xs, clusters, &KMeansMode::SymmetryAware(group.clone()), family, rng)?;
    km.mixture(xs.len())
}

fn initial_mixture(
    xs: &[UnitQuaternion],
    group: &Arc<SymmetryGroup>,
    family: Family,
    clusters: usize,
    init: Init,
    rng: &mut RngStream,
) -> Result<MixtureModel> {
    match init {
        Init::FromData => kmeans_start(xs, group, family, clusters, rng),
        Init::Random => random_mixture(group, family, clusters, rng),
        Init::Provided { mu, kappa } => {
            let mut models = vec![GInvariantModel::new(family, mu, kappa, group.clone())?];
            for _ in 1..clusters {
                let (mu, kappa) = random_start(rng);
                models.push(GInvariantModel::new(family, mu, kappa, group.clone())?);
            }
            MixtureModel::new(models, vec![1.0 / clusters as f64; clusters])
        }
    }
}

fn run_mixture(xs: &[UnitQuaternion], start: MixtureModel, cfg: &EmConfig) -> Result<EmReport<MixtureModel>> {
    iterate(start, xs.len(), cfg, |mix| {
        mixture_em_step(xs, mix).map(|s| StepOutcome {
            loglik: s.loglik,
            next: s.next,
            consistent: s.consistent,
        })
    })
}

/// Mixture EM over `clusters` populations. The first run starts from
/// `cfg.init` (symmetry-aware k-means for [`Init::FromData`]), the remaining
/// `n_restarts − 1` from random parameters, and `extra_starts` are tried in
/// addition. Clusters of the returned model are sorted by descending weight.
pub fn em_mixture_with_starts(
    xs: &[UnitQuaternion],
    group: &Arc<SymmetryGroup>,
    clusters: usize,
    family: Family,
    cfg: &EmConfig,
    extra_starts: &[MixtureModel],
) -> Result<EmReport<MixtureModel>> {
    cfg.validate()?;
    if clusters < 1 {
        return Err(Error::InvalidArgument("need at least one cluster".into()));
    }
    if xs.len() < 2 * clusters {
        return Err(Error::InvalidArgument(format!(
            "{} samples are too few for {clusters} clusters",
            xs.len()
        )));
    }
    if family == Family::Watson && !group.is_sign_paired() {
        return Err(Error::NotSignPaired);
    }
    let start = Instant::now();
    let mut rng = RngStream::new(cfg.seed);
    let mut report = best_of_restarts(cfg.n_restarts + extra_starts.len(), |r| {
        let init = if r < cfg.n_restarts {
            let init = if r == 0 { cfg.init } else { Init::Random };
            initial_mixture(xs, group, family, clusters, init, &mut rng)?
        } else {
            extra_starts[r - cfg.n_restarts].clone()
        };
        run_mixture(xs, init, cfg)
    })?;
    report.model = sort_by_weight(&report.model);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

pub fn em_mixture(
    xs: &[UnitQuaternion],
    group: &Arc<SymmetryGroup>,
    clusters: usize,
    family: Family,
    cfg: &EmConfig,
) -> Result<EmReport<MixtureModel>> {
    em_mixture_with_starts(xs, group, clusters, family, cfg, &[])
}

#[derive(Debug, Clone)]
pub enum KMeansMode {
    /// Distance `arccos(xᵀc)`, fits by plain ML.
    Naive,
    /// Group-invariant distance, fits by reference-aligned ML.
    SymmetryAware(Arc<SymmetryGroup>),
}

impl KMeansMode {
    fn distance(&self, x: &UnitQuaternion, c: &UnitQuaternion) -> f64 {
        match self {
            KMeansMode::Naive => x.dot(c).clamp(-1.0, 1.0).acos(),
            KMeansMode::SymmetryAware(g) => g.distance(c, x),
        }
    }

    fn centroid(&self, members: &[UnitQuaternion], previous: &UnitQuaternion) -> UnitQuaternion {
        let sum: Vector4<f64> = match self {
            KMeansMode::Naive => members.iter().map(|x| x.as_vector()).sum(),
            KMeansMode::SymmetryAware(g) => members
                .iter()
                .map(|x| g.element(g.closest_element(previous, x)).matrix() * x.as_vector())
                .sum(),
        };
        UnitQuaternion::from_vector(sum).unwrap_or(*previous)
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<UnitQuaternion>,
    pub models: Vec<GInvariantModel>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.centroids.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Fitted per-cluster models weighted by cluster size.
    pub fn mixture(&self, n: usize) -> Result<MixtureModel> {
        let alpha = self.counts().iter().map(|&k| k as f64 / n as f64).collect();
        MixtureModel::new(self.models.clone(), alpha)
    }
}

/// Draws a point with probability proportional to its squared distance
/// to the nearest existing centroid.
fn plus_plus_pick<R: Rng + ?Sized>(
    xs: &[UnitQuaternion],
    centroids: &[UnitQuaternion],
    mode: &KMeansMode,
    rng: &mut R,
) -> UnitQuaternion {
    let weights: Vec<f64> = xs
        .iter()
        .map(|x| {
            centroids
                .iter()
                .map(|c| mode.distance(x, c))
                .fold(f64::INFINITY, f64::min)
                .powi(2)
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return xs[rng.random_range(0..xs.len())];
    }
    let mut target = rng.random::<f64>() * total;
    for (x, w) in xs.iter().zip(&weights) {
        if target < *w {
            return *x;
        }
        target -= w;
    }
    *xs.last().expect("nonempty")
}

/// Lloyd iterations under the chosen distance with k-means++ seeding, then
/// a per-cluster fit. A cluster left with fewer than two members is
/// reseeded, at most 20 times per call.
pub fn kmeans_spherical<R: Rng + ?Sized>(
    xs: &[UnitQuaternion],
    clusters: usize,
    mode: &KMeansMode,
    family: Family,
    rng: &mut R,
) -> Result<KMeansResult> {
    if clusters < 1 || xs.len() < 2 * clusters {
        return Err(Error::InvalidArgument(format!(
            "cannot form {clusters} clusters from {} samples",
            xs.len()
        )));
    }
    let mut centroids = vec![xs[rng.random_range(0..xs.len())]];
    while centroids.len() < clusters {
        let pick = plus_plus_pick(xs, &centroids, mode, rng);
        centroids.push(pick);
    }
    let mut labels = vec![usize::MAX; xs.len()];
    let mut reseeds = 0;
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for (x, label) in xs.iter().zip(labels.iter_mut()) {
            let best = centroids
                .iter()
                .enumerate()
                .map(|(c, centroid)| (c, mode.distance(x, centroid)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least one centroid")
                .0;
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        let members: Vec<Vec<UnitQuaternion>> = (0..clusters)
            .map(|c| xs.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(x, _)| *x).collect())
            .collect();
        if let Some(empty) = members.iter().position(|m| m.len() < 2) {
            reseeds += 1;
            if reseeds > MAX_RESEEDS {
                return Err(Error::EmptyCluster { cluster: empty });
            }
            let others: Vec<UnitQuaternion> =
                centroids.iter().enumerate().filter(|(c, _)| *c != empty).map(|(_, c)| *c).collect();
            centroids[empty] = plus_plus_pick(xs, &others, mode, rng);
            labels.fill(usize::MAX);
            continue;
        }
        iterations += 1;
        if !changed || iterations >= MAX_LLOYD_ITERS {
            let models = members
                .iter()
                .map(|m| match mode {
                    KMeansMode::Naive => ml_naive(m, family),
                    KMeansMode::SymmetryAware(g) => ml_modified(m, g, family, rng),
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(KMeansResult {
                labels,
                centroids,
                models,
                iterations,
            });
        }
        for (c, m) in members.iter().enumerate() {
            centroids[c] = mode.centroid(m, &centroids[c]);
        }
    }
}

/// Likelihood-ratio statistic of a k-means detector: twice the log-likelihood
/// gain of the size-weighted `clusters`-way fit over the single-cluster fit.
pub fn kmeans_glrt_statistic<R: Rng + ?Sized>(
    xs: &[UnitQuaternion],
    clusters: usize,
    mode: &KMeansMode,
    family: Family,
    rng: &mut R,
) -> Result<f64> {
    let one = kmeans_spherical(xs, 1, mode, family, rng)?;
    let many = kmeans_spherical(xs, clusters, mode, family, rng)?;
    let ll0 = one.models[0].loglik(xs);
    let ll1 = many.mixture(xs.len())?.loglik(xs);
    Ok(2.0 * (ll1 - ll0))
}

#[derive(Debug, Clone)]
pub struct GlrtResult {
    /// `2(ℓ₁ − ℓ₀)`, clamped at zero.
    pub statistic: f64,
    /// The statistic before clamping.
    pub raw_statistic: f64,
    /// Set when the mixture fit fell short of the single fit by more than 1e-6.
    pub suboptimal: bool,
    pub dof: usize,
    pub threshold: f64,
    pub reject_h0: bool,
    pub h0_fit: EmReport<GInvariantModel>,
    pub h1_fit: EmReport<MixtureModel>,
}

/// Degrees of freedom `(p + 1)(C − 1)` for `C` populations on `S^{p−1}`.
pub fn glrt_dof(clusters: usize) -> usize {
    (DIM as usize + 1) * clusters.saturating_sub(1)
}

/// Upper `alpha_level` quantile of `χ²_dof`.
pub fn glrt_threshold(dof: usize, alpha_level: f64) -> Result<f64> {
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(Error::Config(format!("alpha level {alpha_level} outside (0, 1)")));
    }
    let chi = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(chi.inverse_cdf(1.0 - alpha_level))
}

/// Tests one population against `clusters` populations. Both sides use the
/// same EM configuration; the mixture fit is additionally started from the
/// single-population fit replicated across clusters so that it never ends
/// below it.
pub fn glrt_multimodal(
    xs: &[UnitQuaternion],
    group: &Arc<SymmetryGroup>,
    clusters: usize,
    family: Family,
    alpha_level: f64,
    cfg: &EmConfig,
) -> Result<GlrtResult> {
    if clusters < 2 {
        return Err(Error::Config("the test needs at least two clusters".into()));
    }
    let dof = glrt_dof(clusters);
    let threshold = glrt_threshold(dof, alpha_level)?;
    let h0_fit = em_fit(xs, group, family, cfg)?;
    let nested = MixtureModel::new(
        vec![h0_fit.model.clone(); clusters],
        vec![1.0 / clusters as f64; clusters],
    )?;
    let h1_fit = em_mixture_with_starts(xs, group, clusters, family, cfg, &[nested])?;
    let raw_statistic = 2.0 * (h1_fit.loglik - h0_fit.loglik);
    let statistic = raw_statistic.max(0.0);
    Ok(GlrtResult {
        statistic,
        raw_statistic,
        suboptimal: raw_statistic < -1e-6,
        dof,
        threshold,
        reject_h0: statistic > threshold,
        h0_fit,
        h1_fit,
    })
}

/// Assignment of estimated means to true means minimizing the summed group
/// distance, found by exhaustive search.
#[derive(Debug, Clone, Serialize)]
pub struct Matching {
    /// `assignment[k]` is the estimate matched to truth `k`.
    pub assignment: Vec<usize>,
    pub distances: Vec<f64>,
}

impl Matching {
    pub fn mean_distance(&self) -> f64 {
        self.distances.iter().sum::<f64>() / self.distances.len() as f64
    }

    pub fn mean_cosine(&self) -> f64 {
        self.distances.iter().map(|d| d.cos()).sum::<f64>() / self.distances.len() as f64
    }
}

pub fn best_permutation(estimates: &[UnitQuaternion], truth: &[UnitQuaternion], group: &SymmetryGroup) -> Result<Matching> {
    if estimates.len() != truth.len() || truth.is_empty() || truth.len() > 8 {
        return Err(Error::InvalidArgument(format!(
            "cannot match {} estimates to {} means",
            estimates.len(),
            truth.len()
        )));
    }
    let k = truth.len();
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| estimates.iter().map(|e| group.distance(t, e)).collect())
        .collect();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = (f64::INFINITY, perm.clone());
    permute(&mut perm, 0, &mut |p| {
        let total: f64 = p.iter().enumerate().map(|(t, &e)| cost[t][e]).sum();
        if total < best.0 {
            best = (total, p.to_vec());
        }
    });
    let distances = best.1.iter().enumerate().map(|(t, &e)| cost[t][e]).collect();
    Ok(Matching {
        assignment: best.1,
        distances,
    })
}

fn permute(p: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == p.len() {
        visit(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, visit);
        p.swap(start, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_vmf, sample_watson, uniform_quaternion, wrap_to_fz};

    fn cubic() -> Arc<SymmetryGroup> {
        Arc::new(SymmetryGroup::cubic())
    }

    fn q(a: f64, b: f64, c: f64, d: f64) -> UnitQuaternion {
        UnitQuaternion::new(a, b, c, d).unwrap()
    }

    fn two_clusters(family: Family, mus: [UnitQuaternion; 2], kappa: f64, n: usize, seed: u64) -> Vec<UnitQuaternion> {
        let mut rng = RngStream::new(seed);
        let mut xs = Vec::new();
        for (mu, count) in mus.iter().zip([n / 2, n - n / 2]) {
            let s = match family {
                Family::Vmf => sample_vmf(mu, kappa, count, &mut rng),
                Family::Watson => sample_watson(mu, kappa, count, &mut rng),
            };
            xs.extend(wrap_to_fz(&s, &SymmetryGroup::cubic()).unwrap().into_inner());
        }
        xs
    }

    #[test]
    fn one_step_matches_direct_formula() {
        let g = Arc::new(SymmetryGroup::sign());
        let xs = vec![q(0.9, 0.1, -0.3, 0.2), q(-0.2, 0.8, 0.4, 0.1), q(0.5, 0.5, -0.5, 0.4), q(0.1, -0.2, 0.9, 0.3)];
        let mus = [q(0.6, 0.2, -0.1, 0.7), q(0.1, 0.9, 0.3, -0.2)];
        let kappas = [3.0, 5.5];
        let alpha = [0.35, 0.65];
        let models = (0..2)
            .map(|c| GInvariantModel::new(Family::Vmf, mus[c], kappas[c], g.clone()).unwrap())
            .collect();
        let mix = MixtureModel::new(models, alpha.to_vec()).unwrap();
        let step = mixture_em_step(&xs, &mix).unwrap();

        let ln_c = |k: f64| crate::specfun::ln_vmf_normalizer(k, 4);
        let mut gamma = [Vector4::zeros(); 2];
        let mut mass = [0.0; 2];
        let mut loglik = 0.0;
        for x in &xs {
            let w: Vec<[f64; 2]> = (0..2)
                .map(|c| {
                    let t = mus[c].dot(x);
                    let scale = alpha[c] * 0.5 * ln_c(kappas[c]).exp();
                    [scale * (kappas[c] * t).exp(), scale * (-kappas[c] * t).exp()]
                })
                .collect();
            let total: f64 = w.iter().map(|p| p[0] + p[1]).sum();
            loglik += total.ln();
            for c in 0..2 {
                mass[c] += (w[c][0] + w[c][1]) / total;
                gamma[c] += x.as_vector() * ((w[c][0] - w[c][1]) / total);
            }
        }
        assert!((step.loglik - loglik).abs() < 1e-12);
        for c in 0..2 {
            assert!((step.next.alpha()[c] - mass[c] / 4.0).abs() < 1e-12);
            let mu = gamma[c] / gamma[c].norm();
            assert!((step.next.clusters()[c].mu().as_vector() - mu).norm() < 1e-12);
            let r = gamma[c].norm() / mass[c];
            assert!((crate::specfun::a_p(step.next.clusters()[c].kappa(), 4) - r).abs() < 1e-12);
        }
    }

    #[test]
    fn folded_step_matches_general_step() {
        let g = cubic();
        let xs = two_clusters(Family::Vmf, [q(0.9, 0.3, 0.1, 0.2), q(0.2, 0.1, 0.8, 0.5)], 60.0, 400, 6);
        let models: Vec<_> = [(q(0.8, 0.4, 0.0, 0.1), 35.0), (q(0.1, 0.2, 0.9, 0.4), 80.0)]
            .into_iter()
            .map(|(mu, k)| GInvariantModel::new(Family::Vmf, mu, k, g.clone()).unwrap())
            .collect();
        let alpha = [0.3, 0.7];
        let (l1, folded) = folded_vmf_e_step(&xs, &models, &alpha);
        let (l2, general) = e_step(&xs, &models, &alpha);
        assert!(((l1 - l2) / l2).abs() < 1e-13);
        for c in 0..2 {
            assert!((folded.mass[c] - general.mass[c]).abs() < 1e-10);
            let gf = folded.gamma(c, g.half());
            let gg = general.gamma(c, g.elements());
            assert!((gf - gg).norm() / gg.norm() < 1e-12);
        }
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let g = cubic();
        let xs = two_clusters(Family::Vmf, [q(1.0, 0.1, 0.0, 0.0), q(0.7, 0.7, 0.1, 0.0)], 30.0, 40, 1);
        let models = vec![
            GInvariantModel::new(Family::Vmf, q(1.0, 0.0, 0.1, 0.0), 20.0, g.clone()).unwrap(),
            GInvariantModel::new(Family::Vmf, q(0.6, 0.7, 0.0, 0.2), 40.0, g.clone()).unwrap(),
        ];
        let mix = MixtureModel::new(models, vec![0.4, 0.6]).unwrap();
        let r = cluster_responsibilities(&xs, &mix);
        assert_eq!((r.n(), r.clusters(), r.components()), (40, 2, 48));
        for i in 0..r.n() {
            let total: f64 = (0..2).map(|c| r.cluster_probability(i, c)).sum();
            assert!((total - 1.0).abs() < 1e-10);
            assert!(r.get(i, 1, 7) >= 0.0);
        }
    }

    #[test]
    fn single_cluster_mixture_is_single_em() {
        let g = cubic();
        let xs = two_clusters(Family::Vmf, [q(0.9, 0.3, 0.1, 0.2); 2], 40.0, 300, 2);
        for family in [Family::Vmf, Family::Watson] {
            let cfg = EmConfig {
                init: Init::Provided { mu: q(0.8, 0.4, 0.0, 0.1), kappa: 15.0 },
                ..EmConfig::default()
            };
            let single = em_fit(&xs, &g, family, &cfg).unwrap();
            let mix = em_mixture(&xs, &g, 1, family, &cfg).unwrap();
            assert_eq!(mix.model.alpha(), &[1.0]);
            assert!((mix.loglik - single.loglik).abs() < 1e-9);
            assert!(g.distance(&mix.model.clusters()[0].mu(), &single.model.mu()) < 1e-9);
            assert!((mix.model.clusters()[0].kappa() - single.model.kappa()).abs() < 1e-8);
        }
    }

    #[test]
    fn mixture_recovers_two_wrapped_clusters() {
        let g = cubic();
        let mut rng = RngStream::new(3);
        let mus = [uniform_quaternion(&mut rng), uniform_quaternion(&mut rng)];
        for family in [Family::Vmf, Family::Watson] {
            let xs = two_clusters(family, mus, 50.0, 1000, 4);
            let rep = em_mixture(&xs, &g, 2, family, &EmConfig::default()).unwrap();
            let est: Vec<UnitQuaternion> = rep.model.clusters().iter().map(|m| m.mu()).collect();
            let matching = best_permutation(&est, &mus, &g).unwrap();
            assert!(matching.mean_distance() < 0.02, "{family} {matching:?}");
            let a = rep.model.alpha();
            assert!(a[0] >= a[1] && (a[0] + a[1] - 1.0).abs() < 1e-12);
            for w in rep.loglik_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9);
            }
        }
    }

    #[test]
    fn sorting_preserves_density() {
        let g = cubic();
        let models = vec![
            GInvariantModel::new(Family::Watson, q(1.0, 0.0, 0.1, 0.0), 20.0, g.clone()).unwrap(),
            GInvariantModel::new(Family::Watson, q(0.6, 0.7, 0.0, 0.2), -4.0, g.clone()).unwrap(),
        ];
        let mix = MixtureModel::new(models, vec![0.3, 0.7]).unwrap();
        let sorted = sort_by_weight(&mix);
        assert_eq!(sorted.alpha(), &[0.7, 0.3]);
        let xs = two_clusters(Family::Vmf, [q(1.0, 0.0, 0.0, 0.0); 2], 5.0, 30, 5);
        for x in &xs {
            assert_eq!(mix.logpdf(x), sorted.logpdf(x));
        }
    }

    #[test]
    fn kmeans_single_cluster_is_baseline() {
        let g = cubic();
        let xs = two_clusters(Family::Vmf, [q(0.9, 0.3, 0.1, 0.2); 2], 40.0, 200, 6);
        let km = kmeans_spherical(&xs, 1, &KMeansMode::Naive, Family::Vmf, &mut RngStream::new(1)).unwrap();
        assert!(km.labels.iter().all(|&l| l == 0));
        let naive = ml_naive(&xs, Family::Vmf).unwrap();
        assert_eq!(km.models[0].mu(), naive.mu());
        let km = kmeans_spherical(&xs, 1, &KMeansMode::SymmetryAware(g), Family::Vmf, &mut RngStream::new(1)).unwrap();
        assert_eq!(km.counts(), vec![200]);
    }

    #[test]
    fn symmetry_aware_kmeans_merges_symmetric_copies() {
        let g = cubic();
        let mu = q(0.9, 0.2, 0.1, 0.05);
        let base = sample_vmf(&mu, 1e5, 200, &mut RngStream::new(7)).into_inner();
        let p = g.element(9);
        let xs: Vec<UnitQuaternion> = base.iter().copied().chain(base.iter().map(|x| -p.apply(x))).collect();
        let km = kmeans_spherical(&xs, 2, &KMeansMode::SymmetryAware(g.clone()), Family::Vmf, &mut RngStream::new(2)).unwrap();
        assert!(g.distance(&km.centroids[0], &km.centroids[1]) < 0.01);
        let naive = kmeans_spherical(&xs, 2, &KMeansMode::Naive, Family::Vmf, &mut RngStream::new(2)).unwrap();
        assert!(g.distance(&naive.centroids[0], &naive.centroids[1]) < 0.01);
        assert!(naive.centroids[0].dot(&naive.centroids[1]) < 0.5);
    }

    #[test]
    fn glrt_dof_and_threshold() {
        assert_eq!(glrt_dof(2), 5);
        let t = glrt_threshold(5, 0.05).unwrap();
        assert!((t - 11.070497693516351).abs() < 1e-9);
        assert!(glrt_threshold(5, 0.1).unwrap() < t);
        assert!(glrt_threshold(5, 1.0).is_err());
    }

    #[test]
    fn glrt_detects_two_clusters() {
        let g = cubic();
        let mus = [q(0.95, 0.2, 0.1, 0.0), q(0.8, -0.1, 0.5, 0.3)];
        assert!(g.distance(&mus[0], &mus[1]) > 0.3);
        let xs = two_clusters(Family::Vmf, mus, 50.0, 1000, 8);
        let res = glrt_multimodal(&xs, &g, 2, Family::Vmf, 0.05, &EmConfig::default()).unwrap();
        assert_eq!(res.dof, 5);
        assert!(res.reject_h0, "{}", res.statistic);
        assert!(res.h1_fit.loglik >= res.h0_fit.loglik - 1e-6);
    }

    #[test]
    fn glrt_nesting_on_single_cluster() {
        let g = cubic();
        let xs = two_clusters(Family::Watson, [q(0.7, 0.2, 0.5, 0.1); 2], 50.0, 1000, 9);
        let res = glrt_multimodal(&xs, &g, 2, Family::Watson, 0.05, &EmConfig::default()).unwrap();
        assert!(res.h1_fit.loglik >= res.h0_fit.loglik - 1e-6);
        assert!(!res.suboptimal);
        assert!(res.statistic >= 0.0);
    }

    #[test]
    fn matching_finds_best_permutation() {
        let g = SymmetryGroup::cubic();
        let a = q(1.0, 0.0, 0.0, 0.0);
        let b = q(0.9, 0.3, 0.2, 0.1);
        let m = best_permutation(&[b, a], &[a, b], &g).unwrap();
        assert_eq!(m.assignment, vec![1, 0]);
        assert!(m.mean_distance() < 1e-7);
    }
}
