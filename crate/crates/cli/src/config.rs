//! Settings resolved from flags, `XVAR_*` environment variables, an optional
//! flat JSON config file, and defaults, in that order of precedence.

use std::path::Path;

use clap::ValueEnum;
use serde::Deserialize;
use xvar::{Error, Result};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_Q0: f64 = 0.98;
pub const DEFAULT_POINTS: usize = 101;
pub const DEFAULT_KKT_SAMPLES: usize = 20_000;
pub const DEFAULT_YEARS: [f64; 3] = [10.0, 100.0, 1000.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Contents of `--config`. Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub q0: Option<f64>,
    pub xi: Option<f64>,
    pub format: Option<Format>,
    pub lambda: Option<f64>,
    pub max_dim: Option<usize>,
    pub points: Option<usize>,
    pub kkt_samples: Option<usize>,
    pub years: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))
    }
}

/// Values after precedence has been applied.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub q0: f64,
    /// `None` means "use the fitted value" where a fit exists.
    pub xi: Option<f64>,
    pub format: Format,
    pub lambda: f64,
    pub max_dim: usize,
    pub points: usize,
    pub kkt_samples: usize,
    pub years: Vec<f64>,
}

impl Settings {
    /// Overlays `flags` (which already include environment values) on `file`.
    pub fn resolve(flags: FileConfig, file: FileConfig) -> Settings {
        Settings {
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            q0: flags.q0.or(file.q0).unwrap_or(DEFAULT_Q0),
            xi: flags.xi.or(file.xi),
            format: flags.format.or(file.format).unwrap_or_default(),
            lambda: flags.lambda.or(file.lambda).unwrap_or(xvar::calibration::DEFAULT_LAMBDA),
            max_dim: flags.max_dim.or(file.max_dim).unwrap_or(xvar::tm_lp::DEFAULT_MAX_DIM),
            points: flags.points.or(file.points).unwrap_or(DEFAULT_POINTS),
            kkt_samples: flags.kkt_samples.or(file.kkt_samples).unwrap_or(DEFAULT_KKT_SAMPLES),
            years: flags.years.or(file.years).unwrap_or_else(|| DEFAULT_YEARS.to_vec()),
        }
    }

    pub fn require_xi(&self) -> Result<f64> {
        self.xi
            .ok_or_else(|| Error::InvalidInput("this command needs --xi (or XVAR_XI, or \"xi\" in the config file)".into()))
    }
}
