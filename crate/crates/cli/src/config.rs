use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pnet_core::bounds::Coupling;
use pnet_core::CoefficientVector;

use crate::failure::{CliResult, Failure};

pub const DEFAULT_TRIALS: usize = 500;
pub const DEFAULT_SHOTS: usize = 100_000;
pub const DEFAULT_PHASE_BUDGETS: [u64; 6] = [16, 32, 64, 128, 256, 512];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverLimits {
    #[serde(default)]
    pub support_cap: Option<u64>,
    #[serde(default)]
    pub node_budget: Option<u64>,
    #[serde(default)]
    pub omega_limit: Option<u64>,
}

/// Either a list of photon budgets (one default schedule each) or one
/// explicit stage table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpeOverrides {
    #[serde(default)]
    pub budgets: Option<Vec<u64>>,
    #[serde(default)]
    pub multipliers: Option<Vec<u64>>,
    #[serde(default)]
    pub repetitions: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: Vec<String>,
    #[serde(default)]
    pub coupling: Option<Coupling>,
    #[serde(rename = "N", default)]
    pub n: Option<u64>,
    #[serde(rename = "N_bar", default)]
    pub nbar: Option<f64>,
    #[serde(rename = "N_bar_sweep", default)]
    pub nbar_sweep: Option<Vec<f64>>,
    #[serde(rename = "M", default = "one")]
    pub m: u64,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub solver: SolverLimits,
    #[serde(default)]
    pub rpe: RpeOverrides,
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub shots: Option<usize>,
    /// Precomputed schedule for `simulate-phase`; solved from scratch when absent.
    #[serde(default)]
    pub schedule: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub csv_out: Option<PathBuf>,
}

fn one() -> u64 {
    1
}

impl ExperimentConfig {
    /// Reads a config; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.schedule, &mut cfg.out, &mut cfg.csv_out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.m == 0 {
            return Err(Failure::validation("M must be at least 1"));
        }
        Ok(cfg)
    }

    pub fn alpha(&self) -> CliResult<CoefficientVector> {
        let raw: Vec<&str> = self.alpha.iter().map(String::as_str).collect();
        Ok(CoefficientVector::from_strs(&raw)?)
    }

    pub fn require_seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| Failure::validation("a seed is required for sampling (config \"seed\" or --seed)"))
    }

    pub fn require_theta(&self, d: usize) -> CliResult<&[f64]> {
        let theta = self.theta.as_deref().ok_or_else(|| Failure::validation("config needs \"theta\""))?;
        if theta.len() != d {
            return Err(Failure::validation(format!("theta has {} entries, alpha has {d}", theta.len())));
        }
        Ok(theta)
    }

    /// Photon number for the phase-coupled subcommands.
    pub fn phase_photons(&self) -> CliResult<u64> {
        if self.coupling == Some(Coupling::Displacement) {
            return Err(Failure::validation("this subcommand needs coupling \"phase\""));
        }
        if self.nbar.is_some() || self.nbar_sweep.is_some() {
            return Err(Failure::validation("N_bar is only meaningful for displacement coupling"));
        }
        match self.n {
            Some(0) | None => Err(Failure::validation("phase coupling needs a positive photon number N")),
            Some(n) => Ok(n),
        }
    }

    /// Mean photon numbers for `simulate-displacement`.
    pub fn displacement_budgets(&self) -> CliResult<Vec<f64>> {
        if self.coupling == Some(Coupling::Phase) {
            return Err(Failure::validation("this subcommand needs coupling \"displacement\""));
        }
        if self.n.is_some() {
            return Err(Failure::validation("N is only meaningful for phase coupling"));
        }
        let list = match (&self.nbar, &self.nbar_sweep) {
            (Some(_), Some(_)) => return Err(Failure::validation("set N_bar or N_bar_sweep, not both")),
            (Some(x), None) => vec![*x],
            (None, Some(v)) if !v.is_empty() => v.clone(),
            _ => return Err(Failure::validation("displacement coupling needs N_bar or N_bar_sweep")),
        };
        if let Some(bad) = list.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Failure::validation(format!("mean photon number must be positive, got {bad}")));
        }
        Ok(list)
    }
}
