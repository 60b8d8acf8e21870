use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use cadlag_rough::drivers::SMOOTH_PATHS;
use cadlag_rough::smooth::SMOOTH_FNS;
use cadlag_rough::{DriverSpec, JumpDist, NormSpec};
use serde::{Deserialize, Serialize};

use crate::scenarios;

/// Largest grid size any refinement level may reach.
pub const MAX_GRID: usize = 1 << 20;

/// One experiment, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    /// Intervals of the coarsest grid.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Number of dyadic refinement levels: grids `n, 2n, ..., n 2^(levels-1)`.
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_ensemble")]
    pub ensemble: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_drivers")]
    pub drivers: Vec<DriverConfig>,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub norm: NormConfig,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_n() -> usize {
    64
}

fn default_levels() -> usize {
    1
}

fn default_ensemble() -> usize {
    1000
}

fn default_horizon() -> f64 {
    1.0
}

fn default_drivers() -> Vec<DriverConfig> {
    vec![DriverConfig::Brownian { dim: 1, vol: None }]
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriverConfig {
    Brownian {
        #[serde(default = "one")]
        dim: usize,
        /// Row-major `dim x dim` volatility; identity when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vol: Option<Vec<f64>>,
    },
    CompoundPoisson {
        #[serde(default = "one")]
        dim: usize,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default)]
        jump: JumpConfig,
    },
    Mixed {
        #[serde(default = "one")]
        dim: usize,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default)]
        jump: JumpConfig,
    },
    Smooth { path: String },
}

fn one() -> usize {
    1
}

fn default_lambda() -> f64 {
    5.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpConfig {
    Constant { size: f64 },
    Normal { mean: f64, std: f64 },
    Exponential { rate: f64 },
    Uniform { low: f64, high: f64 },
}

impl Default for JumpConfig {
    fn default() -> Self {
        JumpConfig::Normal { mean: 0.0, std: 1.0 }
    }
}

impl From<JumpConfig> for JumpDist {
    fn from(j: JumpConfig) -> Self {
        match j {
            JumpConfig::Constant { size } => JumpDist::Constant(size),
            JumpConfig::Normal { mean, std } => JumpDist::Normal { mean, std },
            JumpConfig::Exponential { rate } => JumpDist::Exponential { rate },
            JumpConfig::Uniform { low, high } => JumpDist::Uniform { low, high },
        }
    }
}

impl DriverConfig {
    pub fn label(&self) -> String {
        match self {
            DriverConfig::Brownian { dim, .. } => format!("brownian{dim}"),
            DriverConfig::CompoundPoisson { dim, .. } => format!("poisson{dim}"),
            DriverConfig::Mixed { dim, .. } => format!("mixed{dim}"),
            DriverConfig::Smooth { path } => path.clone(),
        }
    }

    pub fn spec(&self) -> Result<DriverSpec> {
        let spec = match self {
            DriverConfig::Brownian { dim, vol } => {
                let mut spec = DriverSpec::brownian(*dim);
                if let Some(v) = vol {
                    spec.vol = v.clone();
                }
                spec
            }
            DriverConfig::CompoundPoisson { dim, lambda, jump } => {
                DriverSpec::compound_poisson(*dim, *lambda, (*jump).into())
            }
            DriverConfig::Mixed { dim, lambda, jump } => DriverSpec::mixed(*dim, *lambda, (*jump).into()),
            DriverConfig::Smooth { path } => {
                ensure!(SMOOTH_PATHS.contains(&path.as_str()), "unknown smooth path {path:?}; known: {SMOOTH_PATHS:?}");
                DriverSpec::smooth(path)
            }
        };
        spec.validate().with_context(|| format!("driver {}", self.label()))?;
        Ok(spec)
    }
}

/// Coefficient ids from the smooth-function registry, or `"none"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    #[serde(default = "default_b")]
    pub b: String,
    #[serde(default = "default_sigma")]
    pub sigma: String,
    #[serde(default = "default_f")]
    pub f: String,
    /// Initial condition; its length is the state dimension.
    #[serde(default = "default_y0")]
    pub y0: Vec<f64>,
}

fn default_b() -> String {
    "tanh_affine".into()
}

fn default_sigma() -> String {
    "sin_bundle".into()
}

fn default_f() -> String {
    "sin_bundle".into()
}

fn default_y0() -> Vec<f64> {
    vec![0.5]
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        Self { b: default_b(), sigma: default_sigma(), f: default_f(), y0: default_y0() }
    }
}

impl CoefficientConfig {
    pub fn id(field: &str) -> Option<&str> {
        (field != "none").then_some(field)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_q")]
    pub q: f64,
}

fn default_p() -> f64 {
    2.5
}

fn default_q() -> f64 {
    2.0
}

impl Default for NormConfig {
    fn default() -> Self {
        Self { p: default_p(), q: default_q() }
    }
}

/// Command-line values that replace fields of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub levels: Option<usize>,
    pub ensemble: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(levels) = o.levels {
            self.levels = levels;
        }
        if let Some(n) = o.ensemble {
            self.ensemble = n;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !scenarios::SCENARIOS.iter().any(|s| s.id == self.scenario) {
            let ids: Vec<&str> = scenarios::SCENARIOS.iter().map(|s| s.id).collect();
            bail!("unknown scenario {:?}; known: {ids:?}", self.scenario);
        }
        ensure!(self.n >= 2, "grid size n must be at least 2, got {}", self.n);
        ensure!(self.ensemble >= 1, "ensemble size must be at least 1");
        ensure!(self.levels >= 1, "levels must be at least 1");
        ensure!(
            self.levels <= 21 && self.finest() <= MAX_GRID,
            "the finest grid n 2^(levels-1) must not exceed {MAX_GRID}"
        );
        ensure!(self.horizon > 0.0 && self.horizon.is_finite(), "horizon must be positive");
        ensure!(!self.drivers.is_empty(), "at least one driver is required");
        for d in &self.drivers {
            d.spec()?;
        }
        let c = &self.coefficients;
        for (name, id) in [("b", &c.b), ("sigma", &c.sigma), ("f", &c.f)] {
            ensure!(
                id == "none" || SMOOTH_FNS.contains(&id.as_str()),
                "unknown coefficient {name} = {id:?}; known: {SMOOTH_FNS:?} or \"none\""
            );
        }
        ensure!(!c.y0.is_empty() && c.y0.iter().all(|v| v.is_finite()), "y0 must be a nonempty finite vector");
        NormSpec::new(self.norm.p, self.norm.q)?;
        Ok(())
    }

    /// Grid sizes of the refinement levels.
    pub fn sizes(&self) -> Vec<usize> {
        (0..self.levels).map(|h| self.n << h).collect()
    }

    pub fn finest(&self) -> usize {
        self.n << (self.levels - 1)
    }
}
