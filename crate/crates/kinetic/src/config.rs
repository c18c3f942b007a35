//! Experiment configuration files.
//!
//! A configuration is a JSON object. Unknown keys are rejected. Every field
//! except `model` has a default; see `configs/` for complete examples.

use std::path::{Path, PathBuf};

use kinetic_core::branching::{BranchingConfig, PruneRule, DEFAULT_PARTICLE_CAP};
use kinetic_core::initial_laws::{InitialLaw, MeanBase, VarianceBase};
use kinetic_core::rng::Streams;
use kinetic_core::solver::XiGrid;
use kinetic_core::spectral::{SpectralProfile, WeightModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{KineticError, Result};
use crate::table::Header;

/// Seed used when neither the file nor the command line sets one.
pub const DEFAULT_SEED: u64 = 20_250_101;
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Deterministic { weights: Vec<f64> },
    /// `A_i = U_i^p`, `i = 1..n`.
    PowerUniform { n: usize, p: f64 },
    KacAngle {},
}

impl ModelSpec {
    pub fn build(&self) -> Result<WeightModel> {
        let model = match self {
            ModelSpec::Deterministic { weights } => WeightModel::Deterministic(weights.clone()),
            ModelSpec::PowerUniform { n, p } => WeightModel::PowerUniform { children: *n, exponent: *p },
            ModelSpec::KacAngle {} => WeightModel::KacAngle,
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    /// `X ≡ mean`.
    FiniteMeanDegenerate { mean: f64 },
    FiniteMeanExponential { mean: f64 },
    FiniteMeanUniform { mean: f64, half_width: f64 },
    CauchyLike {
        c_plus: f64,
        #[serde(default)]
        location: f64,
    },
    FiniteVarianceNormal { sigma: f64 },
    /// `±sigma` with probability one half each.
    FiniteVarianceTwoPoint { sigma: f64 },
    ParetoTail { gamma: f64, c_plus: f64, c_minus: f64 },
}

impl LawSpec {
    pub fn build(&self) -> Result<InitialLaw> {
        let law = match *self {
            LawSpec::FiniteMeanDegenerate { mean } => InitialLaw::FiniteMean { mean, base: MeanBase::Degenerate },
            LawSpec::FiniteMeanExponential { mean } => InitialLaw::FiniteMean { mean, base: MeanBase::Exponential },
            LawSpec::FiniteMeanUniform { mean, half_width } => {
                InitialLaw::FiniteMean { mean, base: MeanBase::Uniform { half_width } }
            }
            LawSpec::CauchyLike { c_plus, location } => InitialLaw::CauchyLike { c_plus, location },
            LawSpec::FiniteVarianceNormal { sigma } => InitialLaw::FiniteVariance { sigma, base: VarianceBase::Normal },
            LawSpec::FiniteVarianceTwoPoint { sigma } => {
                InitialLaw::FiniteVariance { sigma, base: VarianceBase::TwoPoint }
            }
            LawSpec::ParetoTail { gamma, c_plus, c_minus } => InitialLaw::ParetoTail { gamma, c_plus, c_minus },
        };
        law.validate()?;
        Ok(law)
    }
}

/// `points` equally spaced values from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn xi(&self) -> Result<XiGrid> {
        Ok(XiGrid::new(self.min, self.max, self.points)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolSpec {
    pub size: usize,
    pub iterations: u32,
}

impl Default for PoolSpec {
    fn default() -> Self {
        Self { size: 100_000, iterations: 50 }
    }
}

/// Drops particles whose expected share of `M_t(γ*)` is below
/// `e^{−level}`, with `level = max(kappa γ* √(Φ″(γ*) T), min_level)` and
/// `T` the last checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneSpec {
    pub kappa: f64,
    pub min_level: f64,
}

/// What the `ecf` subcommand estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `Σ e^{z_k} X_k`, whose characteristic function is the solution.
    #[default]
    Solution,
    /// The solution statistic times `t^{1/(2γ*)} e^{−μ(γ*) t}`.
    Rescaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Width of mean checks in standard errors.
    pub sigmas: f64,
    /// Significance level of distributional tests.
    pub alpha: f64,
    /// Bound on the final boundary distance.
    pub final_tol: f64,
    /// Slack added to the Monte Carlo error in the ODE comparison.
    pub ode_slack: f64,
    pub gamma_tol: f64,
    pub gamma_check: f64,
    pub tangency: f64,
    pub finite_difference: f64,
    pub min_expected: f64,
    pub bootstrap_level: f64,
    pub bootstrap_resamples: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sigmas: 4.0,
            alpha: 1e-3,
            final_tol: 0.1,
            ode_slack: 1e-3,
            gamma_tol: 1e-12,
            gamma_check: 1e-9,
            tangency: 1e-8,
            finite_difference: 1e-6,
            min_expected: 5.0,
            bootstrap_level: 0.95,
            bootstrap_resamples: 1000,
        }
    }
}

fn default_replicates() -> u64 {
    10_000
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_workers() -> usize {
    1
}

fn default_cap() -> usize {
    DEFAULT_PARTICLE_CAP
}

fn default_samples() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Suffix of output file names.
    #[serde(default)]
    pub label: Option<String>,
    pub model: ModelSpec,
    #[serde(default)]
    pub law: Option<LawSpec>,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default)]
    pub xi_grid: Option<GridSpec>,
    /// Range of the spectral table.
    #[serde(default)]
    pub s_grid: Option<GridSpec>,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    /// Exponents of the Biggins martingales checked by `verify`.
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
    #[serde(default)]
    pub pool: PoolSpec,
    #[serde(default)]
    pub prune: Option<PruneSpec>,
    #[serde(default = "default_cap")]
    pub particle_cap: usize,
    #[serde(default)]
    pub statistic: Statistic,
    /// Independent `X` vectors drawn per trajectory. Values above 1 reuse
    /// each tree for several samples, which makes samples dependent.
    #[serde(default = "default_samples")]
    pub samples_per_trajectory: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    pub fn new(model: ModelSpec) -> Self {
        Self {
            label: None,
            model,
            law: None,
            times: Vec::new(),
            xi_grid: None,
            s_grid: None,
            replicates: default_replicates(),
            gammas: None,
            pool: PoolSpec::default(),
            prune: None,
            particle_cap: DEFAULT_PARTICLE_CAP,
            statistic: Statistic::default(),
            samples_per_trajectory: 1,
            seed: DEFAULT_SEED,
            workers: 1,
            out: None,
            tolerances: Tolerances::default(),
        }
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|source| KineticError::Parse { path: path.to_path_buf(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KineticError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.build()?;
        if let Some(law) = &self.law {
            law.build()?;
        }
        if self.replicates == 0 {
            return Err(KineticError::config("replicates must be at least 1"));
        }
        if self.workers == 0 {
            return Err(KineticError::config("workers must be at least 1"));
        }
        if self.samples_per_trajectory == 0 {
            return Err(KineticError::config("samples_per_trajectory must be at least 1"));
        }
        if self.times.iter().any(|&t| !(t.is_finite() && t >= 0.0)) {
            return Err(KineticError::config("times must be finite and nonnegative"));
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(KineticError::config("times must be strictly increasing"));
        }
        if let Some(g) = &self.xi_grid {
            g.xi()?;
        }
        if let Some(g) = &self.s_grid {
            if !(g.min >= 0.0 && g.max > g.min && g.points >= 2) {
                return Err(KineticError::config("s_grid needs 0 <= min < max and at least two points"));
            }
        }
        if let Some(p) = &self.prune {
            if !(p.kappa > 0.0 && p.min_level >= 0.0 && p.kappa.is_finite() && p.min_level.is_finite()) {
                return Err(KineticError::config("prune needs kappa > 0 and min_level >= 0"));
            }
        }
        if let Some(gs) = &self.gammas {
            if gs.is_empty() || gs.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
                return Err(KineticError::config("gammas must be positive"));
            }
        }
        let t = &self.tolerances;
        if !(t.sigmas > 0.0 && t.alpha > 0.0 && t.alpha < 1.0 && t.bootstrap_level > 0.0 && t.bootstrap_level < 1.0) {
            return Err(KineticError::config("tolerances out of range"));
        }
        Ok(())
    }

    pub fn weight_model(&self) -> Result<WeightModel> {
        self.model.build()
    }

    pub fn profile(&self) -> Result<SpectralProfile> {
        Ok(self.weight_model()?.find_gamma_star(self.tolerances.gamma_tol)?)
    }

    pub fn initial_law(&self) -> Result<InitialLaw> {
        self.law
            .as_ref()
            .ok_or_else(|| KineticError::config("this command needs an initial law"))?
            .build()
    }

    pub fn xi(&self) -> Result<XiGrid> {
        self.xi_grid.ok_or_else(|| KineticError::config("this command needs xi_grid"))?.xi()
    }

    pub fn require_times(&self) -> Result<&[f64]> {
        if self.times.is_empty() {
            return Err(KineticError::config("this command needs at least one time"));
        }
        Ok(&self.times)
    }

    /// Tree settings for checkpoints `times`, with pruning if configured.
    pub fn branching(&self, times: &[f64], profile: &SpectralProfile) -> Result<BranchingConfig> {
        let mut cfg = BranchingConfig::new(self.weight_model()?, times.to_vec()).with_particle_cap(self.particle_cap);
        if let Some(p) = self.prune {
            let rule = PruneRule::for_profile(profile, cfg.horizon, p.kappa, p.min_level);
            cfg = cfg.with_prune(rule);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn streams(&self) -> Streams {
        Streams::new(self.seed)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or("run")
    }

    /// SHA-256 of the configuration with `workers` and `out` cleared, since
    /// neither affects results.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.workers = 1;
        canon.out = None;
        let json = serde_json::to_string(&canon).expect("configuration serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn header(&self) -> Header {
        Header { config_hash: self.hash(), seed: self.seed }
    }
}
