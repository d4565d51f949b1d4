use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::soft::DEFAULT_CANDIDATE_CAP;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscoveryAlgorithm {
    Alg1,
    Alg2,
    Alg3,
    Exhaustive,
}

impl fmt::Display for DiscoveryAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiscoveryAlgorithm::Alg1 => "alg1",
            DiscoveryAlgorithm::Alg2 => "alg2",
            DiscoveryAlgorithm::Alg3 => "alg3",
            DiscoveryAlgorithm::Exhaustive => "exhaustive",
        })
    }
}

impl FromStr for DiscoveryAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "alg1" => Ok(DiscoveryAlgorithm::Alg1),
            "2" | "alg2" => Ok(DiscoveryAlgorithm::Alg2),
            "3" | "alg3" => Ok(DiscoveryAlgorithm::Alg3),
            "exhaustive" => Ok(DiscoveryAlgorithm::Exhaustive),
            other => Err(Error::Config(format!("unknown discovery algorithm `{other}`"))),
        }
    }
}

/// Which fixed action maps the outer loop of the first two algorithms visits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionFamily {
    /// Per agent, the identity or a single legal transposition.
    #[default]
    Transpositions,
    /// Every legal action permutation.
    AllPermutations,
}

/// Reward fed to the permutation policy gradient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardSignal {
    /// Return of one sampled episode.
    #[default]
    Episode,
    /// Exact expected return of the sampled relabeling on the sampled policy.
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    /// Inner-loop episodes per candidate.
    pub episodes: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    /// Fixed reward baseline; a running mean of observed returns when unset.
    pub baseline: Option<f64>,
    pub top_l: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Largest per-member return gap a returned map may show.
    pub tolerance: f64,
    pub seed: u64,
    /// Number of action maps visited, 0 for all of them.
    pub transposition_budget: usize,
    pub action_family: ActionFamily,
    pub signal: RewardSignal,
    pub candidate_cap: usize,
    pub exhaustive_cap: u64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            episodes: 2000,
            learning_rate: 0.01,
            temperature: 1.0 / 2.667,
            baseline: None,
            top_l: 3,
            lambda1: 0.0,
            lambda2: 0.0,
            tolerance: 0.02,
            seed: 0,
            transposition_budget: 0,
            action_family: ActionFamily::Transpositions,
            signal: RewardSignal::Episode,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            exhaustive_cap: 1_000_000,
        }
    }
}

impl DiscoveryConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        DiscoveryConfig { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.episodes == 0 {
            return bad("discovery.episodes must be ≥ 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("discovery.learning_rate must be positive");
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return bad("discovery.temperature must be positive");
        }
        if !(0.0..1.0).contains(&self.lambda1) {
            return bad("discovery.lambda1 must lie in [0, 1)");
        }
        if !(self.lambda2.is_finite() && self.lambda2 >= 0.0) {
            return bad("discovery.lambda2 must be ≥ 0");
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return bad("discovery.tolerance must be ≥ 0");
        }
        if self.baseline.is_some_and(|b| !b.is_finite()) {
            return bad("discovery.baseline must be finite");
        }
        Ok(())
    }
}
