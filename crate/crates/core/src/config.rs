//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//!
//! [smc]
//! model = "gaussian_mean"
//! schedule = [2.0, 1.0, 0.5, 0.2, 0.1]
//! n_particles = 2000
//! schemes = ["prior", "beaumont_kde", "optimal"]
//! out_dir = "smc_out"
//! fit = { method = "gaussian_mixture", k = 2 }
//! prior = { type = "gaussian", mean = 0.0, std = 5.0 }
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::density::DensitySpec;
use crate::error::{Error, Result};
use crate::proposals::{KdeSettings, Scheme};
use crate::smc::{toy_by_name, EpsilonSchedule, FitOptions, ForwardProblem, GaussianMeanToy, SmcOptions, DEFAULT_MAX_PROPOSALS_PER_TARGET};

/// Tagged density record.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    Gaussian { mean: f64, std: f64 },
    /// `[weight, mean, std]` triples.
    Mixture { components: Vec<[f64; 3]> },
    Chi2 { dof: u32 },
    Uniform { lo: f64, hi: f64 },
}

impl DensityConfig {
    pub fn build(&self) -> Result<DensitySpec> {
        let spec = match self {
            Self::Gaussian { mean, std } => DensitySpec::gaussian(*mean, *std),
            Self::Mixture { components } => {
                let triples: Vec<_> = components.iter().map(|c| (c[0], c[1], c[2])).collect();
                DensitySpec::mixture(&triples)
            }
            Self::Chi2 { dof } => DensitySpec::chi_squared(*dof),
            Self::Uniform { lo, hi } => DensitySpec::uniform(*lo, *hi),
        };
        spec.map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub smc: Option<SmcConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmcConfig {
    pub model: String,
    pub schedule: Vec<f64>,
    pub n_particles: usize,
    #[serde(default)]
    pub scheme: Option<String>,
    #[serde(default)]
    pub schemes: Vec<String>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub max_proposals_per_target: Option<usize>,
    #[serde(default)]
    pub kde_variance_factor: Option<f64>,
    #[serde(default)]
    pub optimal_tol: Option<f64>,
    /// Replaces the model's prior.
    #[serde(default)]
    pub prior: Option<DensityConfig>,
    /// Replaces the model's observed summary.
    #[serde(default)]
    pub observed: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn smc(&self) -> Result<&SmcConfig> {
        self.smc.as_ref().ok_or_else(|| Error::Config("missing [smc] section".into()))
    }
}

impl SmcConfig {
    pub fn problem(&self) -> Result<GaussianMeanToy> {
        let base = toy_by_name(&self.model)?;
        if self.prior.is_none() && self.observed.is_none() {
            return Ok(base);
        }
        let prior = match &self.prior {
            Some(p) => p.build()?,
            None => base.prior().clone(),
        };
        GaussianMeanToy::with_prior(prior, self.observed.unwrap_or(0.0)).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn schedule(&self) -> Result<EpsilonSchedule> {
        EpsilonSchedule::new(self.schedule.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    /// `schemes` if given, else the single `scheme`, else `optimal`.
    pub fn schemes(&self) -> Result<Vec<Scheme>> {
        let names: Vec<&str> = if !self.schemes.is_empty() {
            self.schemes.iter().map(String::as_str).collect()
        } else {
            vec![self.scheme.as_deref().unwrap_or("optimal")]
        };
        names
            .into_iter()
            .map(|n| match Scheme::parse(n) {
                Some(Scheme::Series) | None => Err(Error::Config(format!("unknown or unsupported SMC scheme {n:?}"))),
                Some(s) => Ok(s),
            })
            .collect()
    }

    pub fn options(&self) -> Result<SmcOptions> {
        if self.n_particles == 0 {
            return Err(Error::Config("n_particles must be positive".into()));
        }
        let defaults = SmcOptions::default();
        Ok(SmcOptions {
            fit: self.fit,
            max_proposals_per_target: self.max_proposals_per_target.unwrap_or(DEFAULT_MAX_PROPOSALS_PER_TARGET),
            kde: KdeSettings {
                variance_factor: self.kde_variance_factor.unwrap_or(defaults.kde.variance_factor),
                truncate_to: None,
            },
            optimal_tol: self.optimal_tol.unwrap_or(defaults.optimal_tol),
        })
    }
}
