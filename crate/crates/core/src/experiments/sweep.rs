//! Concentration sweeps: simulate wrapped data over a grid of `κ_o`, run a
//! set of estimators on each trial and record recovery error and `κ̂`.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{finite, fmt_f64, mean, GroupKind};
use crate::density::{Family, GInvariantModel};
use crate::error::{Error, Result};
use crate::estimator::{em_vmf, em_vmf_hyperbolic, em_watson, ml_modified, ml_naive, EmConfig};
use crate::sampler::{sample_vmf, sample_watson, uniform_quaternion, RngStream};
use crate::symgroup::{SymmetryGroup, UnitQuaternion};

pub const RESULT_HEADER: [&str; 8] = [
    "method",
    "kappa_o",
    "trial",
    "inner_product",
    "dist_g",
    "kappa_hat",
    "wall_time_s",
    "converged",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MlNaive,
    MlModified,
    EmVmf,
    EmVmfHyperbolic,
    EmWatson,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::MlNaive,
        Method::MlModified,
        Method::EmVmf,
        Method::EmVmfHyperbolic,
        Method::EmWatson,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::MlNaive => "ml_naive",
            Method::MlModified => "ml_modified",
            Method::EmVmf => "em_vmf",
            Method::EmVmfHyperbolic => "em_vmf_hyperbolic",
            Method::EmWatson => "em_watson",
        }
    }

    /// Family of the fitted model. The ML baselines fit the generating family.
    pub fn fit_family(self, generator: Family) -> Family {
        match self {
            Method::MlNaive | Method::MlModified => generator,
            Method::EmVmf | Method::EmVmfHyperbolic => Family::Vmf,
            Method::EmWatson => Family::Watson,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Generating families. Every method runs on data from each of them.
    pub generate: Vec<Family>,
    pub methods: Vec<Method>,
    pub kappa_grid: Vec<f64>,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub group: GroupKind,
    /// EM settings; the seed field is replaced per trial.
    pub em: EmConfig,
}

/// Ten values from 1 to 100.
pub fn desk_kappa_grid() -> Vec<f64> {
    (0..10).map(|i| 1.0 + 11.0 * i as f64).collect()
}

impl SweepConfig {
    /// 100 trials at every integer `κ_o` in `[1, 100]`.
    pub fn full(family: Family, group: GroupKind, seed: u64) -> Self {
        SweepConfig {
            generate: vec![family],
            methods: Method::ALL.to_vec(),
            kappa_grid: (1..=100).map(f64::from).collect(),
            n: 1000,
            trials: 100,
            seed,
            group,
            em: EmConfig::default(),
        }
    }

    /// 20 trials at ten `κ_o` values.
    pub fn desk(family: Family, group: GroupKind, seed: u64) -> Self {
        SweepConfig {
            kappa_grid: desk_kappa_grid(),
            trials: 20,
            ..Self::full(family, group, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa_grid.is_empty() {
            return Err(Error::Config("kappa grid is empty".into()));
        }
        if self.kappa_grid.iter().any(|k| !k.is_finite() || *k < 0.0) {
            return Err(Error::Config("kappa grid values must be finite and non-negative".into()));
        }
        if self.kappa_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("kappa grid must be strictly increasing".into()));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::Config("n must be at least 2".into()));
        }
        if self.methods.is_empty() || self.generate.is_empty() {
            return Err(Error::Config("need at least one method and one generating family".into()));
        }
        self.em.validate()
    }

    /// Method column value. With more than one generating family the
    /// generator is appended, as in `em_watson@vmf`.
    fn method_id(&self, method: Method, generator: Family) -> String {
        if self.generate.len() > 1 {
            format!("{method}@{generator}")
        } else {
            method.to_string()
        }
    }
}

/// One method on one simulated set. Failed fits carry NaN estimates and
/// `converged = false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub method: String,
    pub kappa_o: f64,
    pub trial: usize,
    /// `cos d_G(μ̂, μ_o)`, the inner product after the best symmetry alignment.
    pub inner_product: f64,
    pub dist_g: f64,
    pub kappa_hat: f64,
    pub wall_time_s: f64,
    pub converged: bool,
}

impl ResultRecord {
    fn failed(&self) -> bool {
        !self.kappa_hat.is_finite()
    }
}

/// Per-(method, κ_o) means over the successful trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub method: String,
    pub kappa_o: f64,
    pub trials: usize,
    pub failures: usize,
    pub mean_inner_product: Option<f64>,
    pub mean_dist_g: Option<f64>,
    pub mean_kappa_hat: Option<f64>,
    /// `mean κ̂ − κ_o`.
    pub kappa_bias: Option<f64>,
    pub converged_fraction: f64,
    pub mean_wall_time_s: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub config: SweepConfig,
    /// Ordered by generator, κ_o, trial, then method.
    pub records: Vec<ResultRecord>,
    pub summary: Vec<SweepSummary>,
}

fn fit(
    method: Method,
    generator: Family,
    xs: &[UnitQuaternion],
    group: &Arc<SymmetryGroup>,
    em: &EmConfig,
) -> Result<(GInvariantModel, bool)> {
    let family = method.fit_family(generator);
    match method {
        Method::MlNaive => ml_naive(xs, family).map(|m| (m, true)),
        Method::MlModified => ml_modified(xs, group, family, &mut RngStream::new(em.seed)).map(|m| (m, true)),
        Method::EmVmf => em_vmf(xs, group, em).map(|r| (r.model, r.converged)),
        Method::EmVmfHyperbolic => em_vmf_hyperbolic(xs, group, em).map(|r| (r.model, r.converged)),
        Method::EmWatson => em_watson(xs, group, em).map(|r| (r.model, r.converged)),
    }
}

fn run_trial(cfg: &SweepConfig, group: &Arc<SymmetryGroup>, unit: usize) -> Vec<ResultRecord> {
    let per_gen = cfg.kappa_grid.len() * cfg.trials;
    let generator = cfg.generate[unit / per_gen];
    let kappa_o = cfg.kappa_grid[(unit % per_gen) / cfg.trials];
    let trial = unit % cfg.trials;

    let mut rng = RngStream::derive(cfg.seed, unit as u64);
    let mu_o = uniform_quaternion(&mut rng);
    let raw = match generator {
        Family::Vmf => sample_vmf(&mu_o, kappa_o, cfg.n, &mut rng),
        Family::Watson => sample_watson(&mu_o, kappa_o, cfg.n, &mut rng),
    };
    let wrapped = cfg.group.wrap_sample(group, &raw);
    let em = EmConfig {
        seed: rng.random(),
        ..cfg.em
    };

    cfg.methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let outcome = wrapped.as_ref().map_err(|_| ()).and_then(|xs| fit(method, generator, xs, group, &em).map_err(|_| ()));
            let wall_time_s = start.elapsed().as_secs_f64();
            let (inner_product, dist_g, kappa_hat, converged) = match outcome {
                Ok((model, converged)) => {
                    let d = group.distance(&mu_o, &model.mu());
                    (d.cos(), d, model.kappa(), converged)
                }
                Err(()) => (f64::NAN, f64::NAN, f64::NAN, false),
            };
            ResultRecord {
                method: cfg.method_id(method, generator),
                kappa_o,
                trial,
                inner_product,
                dist_g,
                kappa_hat,
                wall_time_s,
                converged,
            }
        })
        .collect()
}

fn summarize(cfg: &SweepConfig, records: &[ResultRecord]) -> Vec<SweepSummary> {
    let mut out = Vec::new();
    for &generator in &cfg.generate {
        for &kappa_o in &cfg.kappa_grid {
            for &method in &cfg.methods {
                let id = cfg.method_id(method, generator);
                let rows: Vec<&ResultRecord> = records
                    .iter()
                    .filter(|r| r.method == id && r.kappa_o == kappa_o)
                    .collect();
                let ok = || rows.iter().filter(|r| !r.failed());
                let mean_kappa_hat = mean(ok().map(|r| r.kappa_hat));
                out.push(SweepSummary {
                    method: id,
                    kappa_o,
                    trials: rows.len(),
                    failures: rows.iter().filter(|r| r.failed()).count(),
                    mean_inner_product: finite(mean(ok().map(|r| r.inner_product))),
                    mean_dist_g: finite(mean(ok().map(|r| r.dist_g))),
                    mean_kappa_hat: finite(mean_kappa_hat),
                    kappa_bias: finite(mean_kappa_hat - kappa_o),
                    converged_fraction: rows.iter().filter(|r| r.converged).count() as f64 / rows.len() as f64,
                    mean_wall_time_s: finite(mean(rows.iter().map(|r| r.wall_time_s))),
                });
            }
        }
    }
    out
}

/// Runs every (generator, κ_o, trial) unit, in parallel, each with its own
/// derived random stream.
pub fn run_estimation_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let group = cfg.group.build();
    let units = cfg.generate.len() * cfg.kappa_grid.len() * cfg.trials;
    let records: Vec<ResultRecord> = (0..units)
        .into_par_iter()
        .map(|u| run_trial(cfg, &group, u))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let summary = summarize(cfg, &records);
    Ok(SweepOutput {
        config: cfg.clone(),
        records,
        summary,
    })
}

/// Writes `<stem>.csv` (one row per record, preceded by a `# ` line holding
/// the config as JSON) and `<stem>.json` (config plus summary). Returns both paths.
pub fn write_sweep(out: &SweepOutput, stem: &Path) -> Result<(PathBuf, PathBuf)> {
    let csv_path = stem.with_extension("csv");
    let json_path = stem.with_extension("json");
    let mut file = BufWriter::new(File::create(&csv_path)?);
    writeln!(file, "# {}", serde_json::to_string(&out.config)?)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(RESULT_HEADER)?;
    for r in &out.records {
        w.write_record([
            r.method.clone(),
            fmt_f64(r.kappa_o),
            r.trial.to_string(),
            fmt_f64(r.inner_product),
            fmt_f64(r.dist_g),
            fmt_f64(r.kappa_hat),
            fmt_f64(r.wall_time_s),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;

    let doc = serde_json::json!({
        "config": out.config,
        "summary": out.summary,
    });
    let mut file = BufWriter::new(File::create(&json_path)?);
    serde_json::to_writer_pretty(&mut file, &doc)?;
    writeln!(file)?;
    file.flush()?;
    Ok((csv_path, json_path))
}
