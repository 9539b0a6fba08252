//! TOML run configuration. One file per run; flags override `cutoff` and `seed`.

use std::path::{Path, PathBuf};

use rsplab_core::qkd::{Basis, ChainProtocol};
use rsplab_core::regime::{AlphaGrid, Axis, SweepSpec, Target};
use rsplab_core::{Protocol, ProtocolParams};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub params: Option<ProtocolParams>,
    pub sweep: Option<SweepConfig>,
    pub verify: Option<VerifyConfig>,
    pub qkd: Option<QkdConfig>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "all_protocols")]
    pub protocols: Vec<Protocol>,
    #[serde(default)]
    pub alpha_grid: AlphaGrid,
    #[serde(default)]
    pub axes: Vec<Axis>,
    pub target: Option<Target>,
    #[serde(default = "all_protocols")]
    pub tie_order: Vec<Protocol>,
}

fn all_protocols() -> Vec<Protocol> {
    Protocol::ALL.to_vec()
}

/// Randomized oracle-versus-closed-form campaign.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub tuples: usize,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default = "default_budget")]
    pub truncation_budget: f64,
    #[serde(default = "default_eta_range")]
    pub eta_range: [f64; 2],
    #[serde(default = "default_alpha_sq_range")]
    pub alpha_sq_range: [f64; 2],
    #[serde(default = "default_verify_tolerance")]
    pub tolerance: f64,
}

fn default_cutoff() -> usize {
    rsplab_core::fock::DEFAULT_CUTOFF
}

fn default_budget() -> f64 {
    rsplab_core::fock::DEFAULT_TRUNCATION_BUDGET
}

fn default_eta_range() -> [f64; 2] {
    [0.05, 1.0]
}

fn default_alpha_sq_range() -> [f64; 2] {
    [1e-3, 0.5]
}

fn default_verify_tolerance() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QkdConfig {
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_swap_counts")]
    pub swap_counts: Vec<usize>,
    #[serde(default = "default_chain")]
    pub protocol: ChainProtocol,
    /// Double-click encodings to run; ignored for single-click.
    #[serde(default = "default_bases")]
    pub bases: Vec<Basis>,
    /// Bright-state override; the Bell condition is used when absent.
    pub xi: Option<f64>,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default = "default_qkd_tolerance")]
    pub tolerance: f64,
}

impl Default for QkdConfig {
    fn default() -> Self {
        Self {
            alphas: default_alphas(),
            swap_counts: default_swap_counts(),
            protocol: default_chain(),
            bases: default_bases(),
            xi: None,
            cutoff: default_cutoff(),
            tolerance: default_qkd_tolerance(),
        }
    }
}

fn default_alphas() -> Vec<f64> {
    vec![0.1, 0.3, 0.7]
}

fn default_swap_counts() -> Vec<usize> {
    vec![0, 1, 2, 3]
}

fn default_chain() -> ChainProtocol {
    ChainProtocol::ScPurified
}

fn default_bases() -> Vec<Basis> {
    vec![Basis::Z, Basis::X]
}

fn default_qkd_tolerance() -> f64 {
    1e-10
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_owned()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Sweep description with the baseline parameters validated.
    pub fn sweep_spec(&self) -> Result<SweepSpec, CliError> {
        let params = self.params.ok_or_else(|| CliError::Config("missing [params] section".into()))?;
        params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let sweep = self.sweep.clone().ok_or_else(|| CliError::Config("missing [sweep] section".into()))?;
        if sweep.protocols.is_empty() {
            return Err(CliError::Config("no protocols selected".into()));
        }
        Ok(SweepSpec {
            baseline: params,
            protocols: sweep.protocols,
            alpha_grid: sweep.alpha_grid,
            axes: sweep.axes,
            target: sweep.target,
            tie_order: sweep.tie_order,
        })
    }
}

/// Everything one subcommand needs: the parsed file plus flag overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub file: ConfigFile,
    pub out: Option<PathBuf>,
    pub cutoff: Option<usize>,
    pub seed: Option<u64>,
    /// Worker threads; 0 lets rayon choose.
    pub jobs: usize,
}

impl RunConfig {
    pub fn new(file: ConfigFile) -> Self {
        Self { file, out: None, cutoff: None, seed: None, jobs: 0 }
    }

    /// Flag, then config file, then zero.
    pub fn seed(&self) -> u64 {
        self.seed.or(self.file.seed).unwrap_or(0)
    }
}
