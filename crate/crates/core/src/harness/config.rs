use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ao::AoConfig;
use crate::baselines::{Scheme, ThetaPolicy};
use crate::channel::{db_to_linear, ScenarioConfig};
use crate::constellation::PskConstellation;
use crate::error::{invalid, Result};
use crate::precoder::{MirrorDescentOptions, PrecoderOptions};

/// Monte-Carlo experiment description, read from JSON.
///
/// Every field has a default; the defaults describe the full-scale QPSK run
/// with 128 antennas, 32 IRS elements, 14 users and 100 slots per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// BS antennas `M`.
    pub antennas: usize,
    /// IRS elements `N`.
    pub elements: usize,
    /// Users `K`.
    pub users: usize,
    /// Symbol slots per block `T`.
    pub slots: usize,
    pub constellation: PskConstellation,
    /// Transmit power `10 log10(P)`.
    pub power_db: f64,
    /// Values of `1/sigma^2` in dB.
    pub noise_grid_db: Vec<f64>,
    pub n_channels: usize,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    /// Noise realizations per `(k, t)` and channel.
    pub noise_draws: usize,
    pub theta_policy: ThetaPolicy,
    /// Transmit and phase solver settings; the seed is replaced per channel.
    pub ao: AoConfig,
    /// Solver settings of the `relaxed` and `relaxed-quant` schemes. The small
    /// default weight keeps the design close to the unregularized box optimum.
    pub relaxed_precoder: PrecoderOptions,
    pub scenario: ScenarioConfig,
    /// Write zeros in the runtime column so repeated runs give identical files.
    pub deterministic_csv: bool,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            antennas: 128,
            elements: 32,
            users: 14,
            slots: 100,
            constellation: PskConstellation::new(4).expect("QPSK"),
            power_db: 20.0,
            noise_grid_db: vec![25.0, 30.0, 35.0, 40.0, 45.0, 50.0],
            n_channels: 1000,
            schemes: Scheme::ALL.to_vec(),
            seed: 1,
            noise_draws: 1,
            theta_policy: ThetaPolicy::default(),
            ao: AoConfig::default(),
            relaxed_precoder: PrecoderOptions {
                mu: 1e-5,
                mirror_descent: MirrorDescentOptions {
                    tolerance: 1e-6,
                    ..MirrorDescentOptions::default()
                },
                ..PrecoderOptions::default()
            },
            scenario: ScenarioConfig::default(),
            deterministic_csv: false,
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("antennas", self.antennas),
            ("elements", self.elements),
            ("users", self.users),
            ("slots", self.slots),
            ("n_channels", self.n_channels),
            ("noise_draws", self.noise_draws),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be at least 1"));
            }
        }
        if self.noise_grid_db.is_empty() {
            return Err(invalid("noise_grid_db", "must not be empty"));
        }
        if self.noise_grid_db.iter().any(|v| !v.is_finite()) || !self.power_db.is_finite() {
            return Err(invalid("noise_grid_db", "values must be finite"));
        }
        if self.schemes.is_empty() {
            return Err(invalid("schemes", "must not be empty"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be at least 1"));
        }
        self.relaxed_precoder.validate()?;
        self.ao.validate()
    }

    /// Linear transmit power.
    pub fn power(&self) -> f64 {
        db_to_linear(self.power_db)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Noise variance for a `1/sigma^2` value in dB.
pub fn sigma2_from_db(inv_sigma2_db: f64) -> f64 {
    db_to_linear(-inv_sigma2_db)
}
