//! Detection of two populations versus one: labeled simulated sets, one
//! likelihood-ratio statistic per method and set, and ROC curves.

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
use crate::cluster::{glrt_dof, glrt_multimodal, glrt_threshold, kmeans_glrt_statistic, KMeansMode};
use crate::density::Family;
use crate::error::{Error, Result};
use crate::estimator::EmConfig;
use crate::sampler::{sample_vmf, sample_watson, uniform_quaternion, RngStream};
use crate::symgroup::{SymmetryGroup, UnitQuaternion};

const SEPARATION_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RocMethod {
    KmeansNaive,
    KmeansSymmetry,
    EmVmf,
    EmWatson,
}

impl RocMethod {
    pub const ALL: [RocMethod; 4] = [
        RocMethod::KmeansNaive,
        RocMethod::KmeansSymmetry,
        RocMethod::EmVmf,
        RocMethod::EmWatson,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RocMethod::KmeansNaive => "kmeans_naive",
            RocMethod::KmeansSymmetry => "kmeans_symmetry",
            RocMethod::EmVmf => "em_vmf",
            RocMethod::EmWatson => "em_watson",
        }
    }
}

impl fmt::Display for RocMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RocMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RocMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown detection method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocConfig {
    pub sets: usize,
    /// Samples per set; a two-population set splits them evenly.
    pub n: usize,
    pub kappa: f64,
    /// Generating family. The k-means detectors fit this family too.
    pub family: Family,
    pub group: GroupKind,
    /// Probability that a set is two-population.
    pub p_bimodal: f64,
    /// Minimum `d_G(μ₁, μ₂)` for two-population sets. Means are redrawn
    /// until it holds.
    pub min_separation: Option<f64>,
    pub alpha_level: f64,
    pub methods: Vec<RocMethod>,
    /// EM settings; the seed field is replaced per set.
    pub em: EmConfig,
    pub seed: u64,
}

impl RocConfig {
    /// 1000 sets of 1000 samples at `κ = 50`.
    pub fn full(family: Family, group: GroupKind, seed: u64) -> Self {
        RocConfig {
            sets: 1000,
            n: 1000,
            kappa: 50.0,
            family,
            group,
            p_bimodal: 0.5,
            min_separation: None,
            alpha_level: 0.05,
            methods: RocMethod::ALL.to_vec(),
            em: EmConfig::default(),
            seed,
        }
    }

    pub fn desk(family: Family, group: GroupKind, seed: u64) -> Self {
        RocConfig {
            sets: 200,
            ..Self::full(family, group, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sets < 1 {
            return Err(Error::Config("sets must be at least 1".into()));
        }
        if self.n < 8 {
            return Err(Error::Config("n must be at least 8".into()));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::Config(format!("kappa {} must be finite and non-negative", self.kappa)));
        }
        if !(0.0..=1.0).contains(&self.p_bimodal) {
            return Err(Error::Config(format!("p_bimodal {} outside [0, 1]", self.p_bimodal)));
        }
        if let Some(s) = self.min_separation {
            if !(0.0..std::f64::consts::FRAC_PI_4).contains(&s) {
                return Err(Error::Config(format!("min_separation {s} outside [0, π/4)")));
            }
        }
        if self.methods.is_empty() {
            return Err(Error::Config("need at least one method".into()));
        }
        glrt_threshold(glrt_dof(2), self.alpha_level)?;
        self.em.validate()
    }
}

/// One method on one set. A failed fit has a NaN statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocRecord {
    pub set: usize,
    pub bimodal: bool,
    /// `d_G(μ₁, μ₂)` for two-population sets.
    pub separation: Option<f64>,
    pub method: RocMethod,
    pub statistic: f64,
    /// Statistic above the Wilks threshold.
    pub reject: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocSummary {
    pub method: RocMethod,
    pub auc: Option<f64>,
    /// Rejection rate on one-population sets at the Wilks threshold.
    pub fpr_at_threshold: Option<f64>,
    /// Rejection rate on two-population sets at the Wilks threshold.
    pub tpr_at_threshold: Option<f64>,
    pub failures: usize,
    pub mean_wall_time_s: Option<f64>,
    pub curve: Vec<RocPoint>,
}

#[derive(Debug, Clone)]
pub struct RocOutput {
    pub config: RocConfig,
    pub threshold: f64,
    /// Ordered by set, then method.
    pub records: Vec<RocRecord>,
    pub summary: Vec<RocSummary>,
}

/// Area under the ROC curve as the Mann-Whitney probability that a positive
/// scores above a negative, ties counting one half. NaN scores are dropped.
pub fn auc(scores: &[f64], labels: &[bool]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(s, &l)| l && !s.is_nan()).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(s, &l)| !l && !s.is_nan()).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return f64::NAN;
    }
    let mut wins = 0.0;
    for p in &pos {
        for q in &neg {
            wins += if p > q {
                1.0
            } else if p == q {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// `(FPR, TPR)` for the rule `score ≥ threshold` at every distinct score,
/// from `(0, 0)` at `+∞` down to `(1, 1)`.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Vec<RocPoint> {
    let mut pairs: Vec<(f64, bool)> = scores
        .iter()
        .zip(labels)
        .filter(|(s, _)| !s.is_nan())
        .map(|(s, l)| (*s, *l))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let pos = pairs.iter().filter(|p| p.1).count().max(1) as f64;
    let neg = pairs.iter().filter(|p| !p.1).count().max(1) as f64;
    let mut out = vec![RocPoint {
        threshold: f64::INFINITY,
        tpr: 0.0,
        fpr: 0.0,
    }];
    let (mut tp, mut fp) = (0.0, 0.0);
    for (i, &(s, l)) in pairs.iter().enumerate() {
        if l {
            tp += 1.0;
        } else {
            fp += 1.0;
        }
        if i + 1 == pairs.len() || pairs[i + 1].0 != s {
            out.push(RocPoint {
                threshold: s,
                tpr: tp / pos,
                fpr: fp / neg,
            });
        }
    }
    out
}

fn draw_means(cfg: &RocConfig, group: &SymmetryGroup, rng: &mut RngStream) -> Result<(UnitQuaternion, UnitQuaternion)> {
    let mu1 = uniform_quaternion(rng);
    let min = cfg.min_separation.unwrap_or(0.0);
    for _ in 0..SEPARATION_ATTEMPTS {
        let mu2 = uniform_quaternion(rng);
        if group.distance(&mu1, &mu2) > min {
            return Ok((mu1, mu2));
        }
    }
    Err(Error::Config(format!("could not draw means separated by more than {min}")))
}

fn simulate_set(cfg: &RocConfig, group: &SymmetryGroup, bimodal: bool, rng: &mut RngStream) -> Result<(Vec<UnitQuaternion>, Option<f64>)> {
    let draw = |mu: &UnitQuaternion, n: usize, rng: &mut RngStream| match cfg.family {
        Family::Vmf => sample_vmf(mu, cfg.kappa, n, rng),
        Family::Watson => sample_watson(mu, cfg.kappa, n, rng),
    };
    let (raw, separation) = if bimodal {
        let (mu1, mu2) = draw_means(cfg, group, rng)?;
        let first = cfg.n / 2;
        let mut raw = draw(&mu1, first, rng).into_inner();
        raw.extend(draw(&mu2, cfg.n - first, rng).iter());
        (raw, Some(group.distance(&mu1, &mu2)))
    } else {
        (draw(&uniform_quaternion(rng), cfg.n, rng).into_inner(), None)
    };
    Ok((cfg.group.wrap_sample(group, &raw)?.into_inner(), separation))
}

fn statistic(method: RocMethod, xs: &[UnitQuaternion], group: &Arc<SymmetryGroup>, cfg: &RocConfig, em: &EmConfig) -> Result<f64> {
    let mut rng = RngStream::new(em.seed);
    match method {
        RocMethod::KmeansNaive => kmeans_glrt_statistic(xs, 2, &KMeansMode::Naive, cfg.family, &mut rng),
        RocMethod::KmeansSymmetry => {
            kmeans_glrt_statistic(xs, 2, &KMeansMode::SymmetryAware(group.clone()), cfg.family, &mut rng)
        }
        RocMethod::EmVmf => glrt_multimodal(xs, group, 2, Family::Vmf, cfg.alpha_level, em).map(|g| g.statistic),
        RocMethod::EmWatson => glrt_multimodal(xs, group, 2, Family::Watson, cfg.alpha_level, em).map(|g| g.statistic),
    }
}

fn run_set(cfg: &RocConfig, group: &Arc<SymmetryGroup>, threshold: f64, set: usize) -> Result<Vec<RocRecord>> {
    let mut rng = RngStream::derive(cfg.seed, set as u64);
    let bimodal = rng.random_bool(cfg.p_bimodal);
    let (xs, separation) = simulate_set(cfg, group, bimodal, &mut rng)?;
    let em = EmConfig {
        seed: rng.random(),
        ..cfg.em
    };
    Ok(cfg
        .methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let s = statistic(method, &xs, group, cfg, &em).unwrap_or(f64::NAN);
            RocRecord {
                set,
                bimodal,
                separation,
                method,
                statistic: s,
                reject: s > threshold,
                wall_time_s: start.elapsed().as_secs_f64(),
            }
        })
        .collect())
}

fn rate(rows: &[&RocRecord], bimodal: bool) -> Option<f64> {
    finite(mean(
        rows.iter()
            .filter(|r| r.bimodal == bimodal && !r.statistic.is_nan())
            .map(|r| if r.reject { 1.0 } else { 0.0 }),
    ))
}

pub fn run_roc(cfg: &RocConfig) -> Result<RocOutput> {
    cfg.validate()?;
    let group = cfg.group.build();
    let threshold = glrt_threshold(glrt_dof(2), cfg.alpha_level)?;
    let per_set: Vec<Vec<RocRecord>> = (0..cfg.sets)
        .into_par_iter()
        .map(|s| run_set(cfg, &group, threshold, s))
        .collect::<Result<_>>()?;
    let records: Vec<RocRecord> = per_set.into_iter().flatten().collect();
    let summary = cfg
        .methods
        .iter()
        .map(|&method| {
            let rows: Vec<&RocRecord> = records.iter().filter(|r| r.method == method).collect();
            let scores: Vec<f64> = rows.iter().map(|r| r.statistic).collect();
            let labels: Vec<bool> = rows.iter().map(|r| r.bimodal).collect();
            RocSummary {
                method,
                auc: finite(auc(&scores, &labels)),
                fpr_at_threshold: rate(&rows, false),
                tpr_at_threshold: rate(&rows, true),
                failures: scores.iter().filter(|s| s.is_nan()).count(),
                mean_wall_time_s: finite(mean(rows.iter().map(|r| r.wall_time_s))),
                curve: roc_curve(&scores, &labels),
            }
        })
        .collect();
    Ok(RocOutput {
        config: cfg.clone(),
        threshold,
        records,
        summary,
    })
}

/// Writes `<stem>.csv` with per-set statistics and `<stem>.json` with the
/// config, threshold and per-method curves.
pub fn write_roc(out: &RocOutput, stem: &Path) -> Result<(PathBuf, PathBuf)> {
    let csv_path = stem.with_extension("csv");
    let json_path = stem.with_extension("json");
    let mut file = BufWriter::new(File::create(&csv_path)?);
    writeln!(file, "# {}", serde_json::to_string(&out.config)?)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["set", "bimodal", "separation", "method", "statistic", "reject", "wall_time_s"])?;
    for r in &out.records {
        w.write_record([
            r.set.to_string(),
            r.bimodal.to_string(),
            r.separation.map(fmt_f64).unwrap_or_default(),
            r.method.to_string(),
            fmt_f64(r.statistic),
            r.reject.to_string(),
            fmt_f64(r.wall_time_s),
        ])?;
    }
    w.flush()?;

    // JSON cannot hold +∞, so the first curve point is written with a null threshold.
    let doc = serde_json::json!({
        "config": out.config,
        "threshold": out.threshold,
        "summary": out.summary.iter().map(|s| serde_json::json!({
            "method": s.method,
            "auc": s.auc,
            "fpr_at_threshold": s.fpr_at_threshold,
            "tpr_at_threshold": s.tpr_at_threshold,
            "failures": s.failures,
            "mean_wall_time_s": s.mean_wall_time_s,
            "curve": s.curve.iter().map(|p| serde_json::json!({
                "threshold": finite(p.threshold),
                "tpr": p.tpr,
                "fpr": p.fpr,
            })).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    });
    let mut file = BufWriter::new(File::create(&json_path)?);
    serde_json::to_writer_pretty(&mut file, &doc)?;
    writeln!(file)?;
    file.flush()?;
    Ok((csv_path, json_path))
}
