//! Experiment configuration: JSON file plus kebab-case flag overrides.

use serde::{Deserialize, Serialize};

use robsub_core::matcore::Exponent;
use robsub_core::{Error, SolveParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    PcaFrob,
    PcaSpec,
    Poison,
    Mean,
    Cluster,
    SpikeDetect,
    SpikeRecover,
    Bench,
}

/// Synthetic-instance generators. Exactly one of `input` or `generator`
/// must be set in the final config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Generator {
    /// Planted rank-`r` instance: disjoint sparse directions, optional noise.
    Planted { n: usize, m: usize, support: usize, noise: f64 },
    /// The identity matrix (n samples = coordinate vectors).
    Identity { n: usize },
    /// Standard normal data.
    Gaussian { n: usize, m: usize },
    /// Sparse-mean instance: k-sparse unit mean plus bounded noise.
    MeanSparse { n: usize, m: usize, support: usize, sigma: f64 },
    /// The mean-estimation lower-bound pair (the corrupted member is used).
    MeanLbPair { n: usize, m: usize, sigma: f64 },
    /// Stable mixture with sparse centers.
    Mixture { n: usize, m: usize, k: usize, separation: f64, sigma: f64, support: usize },
    /// Spiked covariance samples.
    Scm { n: usize, m: usize, support: usize, theta: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Config {
    pub task: Task,
    #[serde(default)]
    pub input: Option<String>,
    #[serde(default)]
    pub generator: Option<Generator>,
    /// `null` means `q = infinity`.
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_rank")]
    pub rank: usize,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Spike signal strength (detection threshold input).
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Cluster count for the cluster task.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Corruption strategy applied before the algorithm (poison/mean/cluster).
    #[serde(default)]
    pub corruption: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub out: Option<String>,
    /// Directory for CSV matrix dumps (optional).
    #[serde(default)]
    pub matrices_out: Option<String>,
}

fn default_kappa() -> f64 {
    1.0
}
fn default_rank() -> usize {
    1
}
fn default_gamma() -> f64 {
    1.0
}
fn default_eta() -> f64 {
    0.1
}
fn default_sigma() -> f64 {
    0.1
}
fn default_theta() -> f64 {
    1.0
}
fn default_k() -> usize {
    2
}
fn default_trials() -> usize {
    1
}

impl Config {
    pub fn validate(&self) -> Result<(), Error> {
        match (&self.input, &self.generator) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidParams(
                    "exactly one of input and generator must be set, got both".into(),
                ))
            }
            (None, None) if self.task != Task::Bench => {
                return Err(Error::InvalidParams(
                    "exactly one of input and generator must be set, got neither".into(),
                ))
            }
            _ => {}
        }
        if let Some(q) = self.q {
            if !(q >= 2.0) {
                return Err(Error::InvalidParams(format!("q must be >= 2 (or omitted for inf), got {q}")));
            }
        }
        if !(self.kappa >= 1.0) {
            return Err(Error::InvalidParams(format!("kappa must be >= 1, got {}", self.kappa)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParams("trials must be >= 1".into()));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidParams("delta must be >= 0".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParams("sigma must be > 0".into()));
        }
        Ok(())
    }

    pub fn exponent(&self) -> Exponent {
        match self.q {
            Some(q) => Exponent::new(q).expect("validated"),
            None => Exponent::Inf,
        }
    }

    pub fn solve_params(&self, trial_seed: u64) -> SolveParams {
        SolveParams {
            gamma: self.gamma,
            eta: self.eta,
            tau: self.tau,
            seed: trial_seed,
            ..SolveParams::default()
        }
    }
}
