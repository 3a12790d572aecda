//! Experiment harness: ingestion, simulation, estimation sweeps, detection
//! studies and single-file fits. Everything here is deterministic given a seed.

mod commands;
mod ingest;
mod roc;
mod sweep;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::OrientationSample;
use crate::symgroup::{map_to_fundamental_zone, SymmetryGroup, UnitQuaternion};

pub use commands::{fit_command, fit_sample, fz_map, simulate, ClusterFit, FitOptions, FitReport, GlrtVerdict, SimulateConfig, Simulation};
pub use ingest::{fmt_f64, ingest_orientations, read_orientations, write_quaternions, Format};
pub use roc::{auc, roc_curve, run_roc, write_roc, RocConfig, RocMethod, RocOutput, RocPoint, RocRecord, RocSummary};
pub use sweep::{
    desk_kappa_grid, run_estimation_sweep, write_sweep, Method, ResultRecord, SweepConfig, SweepOutput, SweepSummary,
    RESULT_HEADER,
};

/// The symmetry groups shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Cubic,
    Sign,
}

impl GroupKind {
    pub fn build(self) -> Arc<SymmetryGroup> {
        Arc::new(match self {
            GroupKind::Cubic => SymmetryGroup::cubic(),
            GroupKind::Sign => SymmetryGroup::sign(),
        })
    }

    /// Representative an indexing program would report: the cubic
    /// fundamental zone, or the `q1 ≥ 0` hemisphere for the sign group.
    pub fn wrap(self, group: &SymmetryGroup, q: &UnitQuaternion) -> Result<UnitQuaternion> {
        match self {
            GroupKind::Cubic => map_to_fundamental_zone(q, group),
            GroupKind::Sign => Ok(q.canonical()),
        }
    }

    pub fn wrap_sample(self, group: &SymmetryGroup, xs: &[UnitQuaternion]) -> Result<OrientationSample> {
        xs.iter().map(|q| self.wrap(group, q)).collect()
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupKind::Cubic => "cubic",
            GroupKind::Sign => "sign",
        })
    }
}

impl FromStr for GroupKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cubic" => Ok(GroupKind::Cubic),
            "sign" => Ok(GroupKind::Sign),
            other => Err(Error::Config(format!("unknown group '{other}'"))),
        }
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// JSON has no NaN; non-finite summary values are written as `null`.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
