//! TOML configuration shared by all subcommands.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rcs_core::christoffel::{cap_estimate, gram_dense, gram_quadrature, GramMatrix, PruneMode};
use rcs_core::lsq::TargetSpec;
use rcs_core::rcs::{L1Choice, RcsMode};
use rcs_core::{BasisSet, BasisSpec, ChainConfig, RcsConfig};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Master seed; `--seed` overrides it.
    #[serde(default)]
    pub seed: u64,
    pub basis: Option<BasisSpec>,
    #[serde(default)]
    pub rcs: RcsSection,
    pub fit: Option<FitSection>,
    pub oracle: Option<OracleSection>,
    pub experiment: Option<ExperimentSection>,
    pub leverage: Option<LeverageSection>,
}

/// Overrides for [`RcsConfig`]; unset bounds are derived from the basis.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RcsSection {
    pub eps: Option<f64>,
    pub cap_bound: Option<f64>,
    pub n_eps_bound: Option<f64>,
    pub delta: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub mode: Option<RcsMode>,
    pub max_iters: Option<usize>,
    pub chain: Option<ChainConfig>,
    pub l1_method: Option<L1Choice>,
    pub prune_mode: Option<PruneMode>,
    /// Grid size for the automatic cap estimate.
    pub cap_grid: Option<usize>,
    /// Run seed; defaults to the master seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Batch CSV, relative to the config file.
    pub batch: PathBuf,
    pub target: TargetSpec,
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub eps: Option<f64>,
    pub gram_points: Option<usize>,
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: Option<String>,
    pub grid: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub target: Option<TargetSpec>,
    pub eps: Option<f64>,
    /// Polynomial degree per direction in the rational part (lightning-2d).
    pub n2: Option<usize>,
    /// Polynomial degree per direction in the plain part (lightning-2d).
    pub n3: Option<usize>,
    /// Seed of the hidden parameters (elm).
    pub basis_seed: Option<u64>,
    /// Points per axis of the u-field grid (2D experiments).
    pub field_grid: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UValues {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeverageSection {
    /// Matrix CSV, relative to the config file.
    pub matrix: PathBuf,
    pub eps: f64,
    pub u: UValues,
    pub tol: Option<f64>,
    pub max_sweeps: Option<usize>,
}

/// A parsed config together with the directory its relative paths refer to.
pub struct Loaded {
    pub config: Config,
    pub base: PathBuf,
}

impl Loaded {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base.join(path)
        }
    }
}

pub fn load(path: Option<&Path>, required: bool) -> Result<Loaded, Failure> {
    let Some(path) = path else {
        if required {
            return Err(Failure::Usage(anyhow::anyhow!("--config is required")));
        }
        return Ok(Loaded {
            config: Config::default(),
            base: PathBuf::from("."),
        });
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))
        .map_err(Failure::Usage)?;
    let config: Config = toml::from_str(&text)
        .with_context(|| format!("invalid config {}", path.display()))
        .map_err(Failure::Usage)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base })
}

impl Config {
    pub fn basis_spec(&self) -> Result<&BasisSpec, Failure> {
        self.basis
            .as_ref()
            .ok_or_else(|| Failure::Usage(anyhow::anyhow!("config has no [basis] section")))
    }
}

pub fn build_basis(spec: &BasisSpec) -> Result<BasisSet, Failure> {
    spec.build()
        .with_context(|| format!("invalid basis {spec:?}"))
        .map_err(Failure::Usage)
}

/// Quadrature Gram when the domain has a rule, otherwise a 10⁵-point dense grid.
pub fn reference_gram(basis: &BasisSet, seed: u64) -> anyhow::Result<GramMatrix> {
    if basis.domain().quadrature().is_some() {
        Ok(gram_quadrature(basis)?)
    } else {
        Ok(gram_dense(basis, 100_000, seed)?)
    }
}

impl RcsSection {
    /// Fills every unset field. `cap_bound` defaults to twice the grid maximum of
    /// `k^ε` (at least `n_eps_bound`), `n_eps_bound` to the basis size.
    pub fn resolve(&self, basis: &BasisSet, eps: f64, seed: u64) -> Result<RcsConfig, Failure> {
        let n_eps_bound = self.n_eps_bound.unwrap_or(basis.n() as f64);
        let cap_bound = match self.cap_bound {
            Some(cap) => cap,
            None => {
                if eps.is_nan() || eps <= 0.0 {
                    return Err(Failure::Usage(anyhow::anyhow!("eps must be positive, got {eps}")));
                }
                let gram = reference_gram(basis, seed)?;
                let grid = self.cap_grid.unwrap_or(10_000);
                cap_estimate(basis, &gram, eps, grid)?.max(n_eps_bound)
            }
        };
        let mut cfg = RcsConfig::practical(eps, cap_bound, n_eps_bound, self.seed.unwrap_or(seed));
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.c1 {
            cfg.c1 = v;
        }
        if let Some(v) = self.c2 {
            cfg.c2 = v;
        }
        if let Some(v) = self.c3 {
            cfg.c3 = v;
        }
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
        if let Some(chain) = &self.chain {
            cfg.chain = chain.clone();
        }
        if let Some(l1) = &self.l1_method {
            cfg.l1_method = l1.clone();
        }
        cfg.max_iters = self.max_iters.or(Some(cfg.max_iters()));
        cfg.prune_mode = self.prune_mode.or(Some(cfg.prune_mode()));
        if let Err(e) = cfg.validate() {
            return Err(Failure::Usage(anyhow::anyhow!("invalid rcs settings: {e}")));
        }
        Ok(cfg)
    }
}

/// Everything a run used, written next to its outputs.
#[derive(Serialize)]
pub struct Echo<'a, T: Serialize> {
    pub seed: u64,
    pub basis: Option<&'a BasisSpec>,
    #[serde(flatten)]
    pub extra: T,
}

pub fn echo<T: Serialize>(seed: u64, basis: Option<&BasisSpec>, extra: T) -> anyhow::Result<String> {
    Ok(toml::to_string(&Echo { seed, basis, extra })?)
}
