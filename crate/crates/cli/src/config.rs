//! Experiment configuration.
//!
//! ```json
//! {
//!   "algorithm": "fair_bandits",
//!   "instance": {"family": "lower_bound", "k": 10},
//!   "delta": 0.1,
//!   "horizon": 10000,
//!   "trials": 1,
//!   "seed": 7,
//!   "output_dir": "out"
//! }
//! ```
//!
//! `algorithm` is one of `fair_bandits`, `ucb`, `uniform`, `kwik_to_fair`,
//! `kwik_to_fair_doubling`, `conjunction_bandit`. `instance.family` is one of
//! `lower_bound {k}`, `classic {means}`, `linear {k, d}`, `conjunction {k, d}`.
//! Optional keys: `epsilon` fixes the accuracy the KWIK learners are tuned to
//! (by default it is chosen from the horizon), `write_traces` (default `true`)
//! turns per-trial trace and interval files on or off.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    FairBandits,
    Ucb,
    Uniform,
    KwikToFair,
    KwikToFairDoubling,
    ConjunctionBandit,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::FairBandits,
        Algorithm::Ucb,
        Algorithm::Uniform,
        Algorithm::KwikToFair,
        Algorithm::KwikToFairDoubling,
        Algorithm::ConjunctionBandit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FairBandits => "fair_bandits",
            Algorithm::Ucb => "ucb",
            Algorithm::Uniform => "uniform",
            Algorithm::KwikToFair => "kwik_to_fair",
            Algorithm::KwikToFairDoubling => "kwik_to_fair_doubling",
            Algorithm::ConjunctionBandit => "conjunction_bandit",
        }
    }

    /// Whether the algorithm runs KWIK learners and so reports abstentions.
    pub fn uses_learners(self) -> bool {
        matches!(self, Algorithm::KwikToFair | Algorithm::KwikToFairDoubling)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                CliError::Config(format!(
                    "unknown algorithm \"{s}\" (expected one of {})",
                    known.join(", ")
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceConfig {
    /// Means drawn per trial from the lower-bound prior.
    LowerBound { k: usize },
    /// Fixed Bernoulli means.
    Classic { means: Vec<f64> },
    /// Linear payoffs with weights drawn per trial; rewards are noiseless.
    Linear { k: usize, d: usize },
    /// Conjunction payoffs drawn per trial; rewards are noiseless.
    Conjunction { k: usize, d: usize },
}

impl InstanceConfig {
    pub fn family(&self) -> &'static str {
        match self {
            InstanceConfig::LowerBound { .. } => "lower_bound",
            InstanceConfig::Classic { .. } => "classic",
            InstanceConfig::Linear { .. } => "linear",
            InstanceConfig::Conjunction { .. } => "conjunction",
        }
    }

    pub fn k(&self) -> usize {
        match self {
            InstanceConfig::LowerBound { k }
            | InstanceConfig::Linear { k, .. }
            | InstanceConfig::Conjunction { k, .. } => *k,
            InstanceConfig::Classic { means } => means.len(),
        }
    }

    pub fn d(&self) -> Option<usize> {
        match self {
            InstanceConfig::Linear { d, .. } | InstanceConfig::Conjunction { d, .. } => Some(*d),
            _ => None,
        }
    }

    pub fn is_classic(&self) -> bool {
        matches!(
            self,
            InstanceConfig::LowerBound { .. } | InstanceConfig::Classic { .. }
        )
    }
}

fn default_trials() -> u64 {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: String,
    pub instance: InstanceConfig,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub horizon: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_true")]
    pub write_traces: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        self.algorithm.parse()
    }

    /// Checks value ranges and that the algorithm can run on the instance family.
    pub fn validate(&self) -> Result<Algorithm> {
        let algorithm = self.algorithm()?;
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta {} outside (0, 1)", self.delta));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e <= 1.0) {
                return bad(format!("epsilon {e} outside (0, 1]"));
            }
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let k = self.instance.k();
        if k == 0 {
            return bad("instance needs at least one arm".into());
        }
        match &self.instance {
            InstanceConfig::LowerBound { k } if *k < 2 => {
                return bad("lower_bound family needs k >= 2".into())
            }
            InstanceConfig::Classic { means } if means.iter().any(|m| !(0.0..=1.0).contains(m)) => {
                return bad("classic means must lie in [0, 1]".into())
            }
            InstanceConfig::Linear { d, .. } if *d == 0 => {
                return bad("linear family needs d >= 1".into())
            }
            InstanceConfig::Conjunction { d, .. } if *d == 0 || *d > 64 => {
                return bad("conjunction family needs 1 <= d <= 64".into())
            }
            _ => {}
        }
        let family = self.instance.family();
        let ok = match algorithm {
            Algorithm::FairBandits | Algorithm::Ucb => self.instance.is_classic(),
            Algorithm::Uniform => true,
            Algorithm::KwikToFair | Algorithm::KwikToFairDoubling => match self.instance {
                InstanceConfig::Conjunction { d, .. } => d <= chainfair::kwik::MAX_ENUM_DIM,
                _ => true,
            },
            Algorithm::ConjunctionBandit => {
                matches!(self.instance, InstanceConfig::Conjunction { .. })
            }
        };
        if !ok {
            return bad(format!(
                "algorithm {algorithm} cannot run on the {family} family with these parameters"
            ));
        }
        Ok(algorithm)
    }

    /// Copy with one sweep axis (`k`, `d` or `T`) set to `value`.
    pub fn with_axis(&self, axis: Axis, value: u64) -> Result<Self> {
        let mut cfg = self.clone();
        let v = value as usize;
        match (axis, &mut cfg.instance) {
            (Axis::T, _) => cfg.horizon = value,
            (Axis::K, InstanceConfig::LowerBound { k })
            | (Axis::K, InstanceConfig::Linear { k, .. })
            | (Axis::K, InstanceConfig::Conjunction { k, .. }) => *k = v,
            (Axis::D, InstanceConfig::Linear { d, .. })
            | (Axis::D, InstanceConfig::Conjunction { d, .. }) => *d = v,
            (axis, inst) => {
                return Err(CliError::Config(format!(
                    "cannot sweep {axis} on the {} family",
                    inst.family()
                )))
            }
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    K,
    D,
    T,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::K => "k",
            Axis::D => "d",
            Axis::T => "T",
        })
    }
}

impl FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(Axis::K),
            "d" => Ok(Axis::D),
            "T" | "t" => Ok(Axis::T),
            other => Err(CliError::Config(format!(
                "unknown sweep axis \"{other}\" (expected k, d or T)"
            ))),
        }
    }
}
