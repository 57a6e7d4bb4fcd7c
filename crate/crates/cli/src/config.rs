//! Optional TOML run configuration. Command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use counterfact::counterfactual::Wave;
use counterfact::inference::SamplerConfig;

use crate::error::{CliError, CliResult};

/// Default number of extra doses in the uptake scenario.
pub const DEFAULT_BOOST_DOSES: f64 = 55_746.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub chains: Option<usize>,
    pub init_steps: Option<usize>,
    pub keep: Option<usize>,
    pub tune: Option<usize>,
    pub draws: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub mixing: Option<f64>,
    pub seed: Option<u64>,
    pub anchor_day: Option<f64>,
    pub sampler: SamplerSection,
    pub scenarios: Vec<String>,
    pub doses: Option<f64>,
    pub max_draws: Option<usize>,
    /// Reporting windows; defaults to the Israeli waves that overlap the data.
    pub waves: Vec<Wave>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|source| CliError::Toml {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Sampler settings with `overrides` taking precedence over the file.
    pub fn sampler(&self, overrides: &SamplerSection, seed: Option<u64>) -> CliResult<SamplerConfig> {
        let base = SamplerConfig::default();
        let pick = |flag: Option<usize>, file: Option<usize>, default: usize| flag.or(file).unwrap_or(default);
        let file = &self.sampler;
        let config = SamplerConfig {
            chains: pick(overrides.chains, file.chains, base.chains),
            init_sweeps: pick(overrides.init_steps, file.init_steps, base.init_sweeps),
            keep: pick(overrides.keep, file.keep, base.keep),
            tune_sweeps: pick(overrides.tune, file.tune, base.tune_sweeps),
            draws: pick(overrides.draws, file.draws, base.draws),
            seed: seed.or(self.seed).unwrap_or(base.seed),
            ..base
        };
        if config.draws == 0 {
            return Err(CliError::Config("at least one draw per chain is required".into()));
        }
        config.validate()?;
        Ok(config)
    }
}

/// Flag value, else file value, else an error naming the flag.
pub fn required_path(flag: Option<PathBuf>, file: &Option<PathBuf>, name: &str) -> CliResult<PathBuf> {
    flag.or_else(|| file.clone())
        .ok_or_else(|| CliError::Config(format!("--{name} is required (flag or config file)")))
}

pub fn check_mixing(gamma: f64) -> CliResult<f64> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(gamma)
    } else {
        Err(CliError::Config(format!("mixing factor {gamma} outside [0, 1]")))
    }
}
