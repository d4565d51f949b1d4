use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Iql,
    Pg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub algorithm: Algorithm,
    pub episodes: usize,
    pub learning_rate: f64,
    /// ε-greedy exploration for IQL.
    pub epsilon: f64,
    /// Boltzmann temperature for PG.
    pub temperature: f64,
    /// Constant baseline subtracted from PG returns.
    pub baseline: f64,
    pub seed: u64,
    /// Agents share one table (Q-values for IQL, logits for PG).
    pub shared_q: bool,
    /// Uniform noise of this half-width on initial Q-values.
    pub q_init_noise: f64,
    /// Record the exact return of the current policy every this many
    /// episodes; 0 disables checkpoints.
    pub checkpoint_every: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            algorithm: Algorithm::Iql,
            episodes: 10_000,
            learning_rate: 0.1,
            epsilon: 0.1,
            temperature: 1.0,
            baseline: 0.0,
            seed: 0,
            shared_q: false,
            q_init_noise: 0.0,
            checkpoint_every: 0,
        }
    }
}

impl TrainerConfig {
    pub fn iql(episodes: usize, learning_rate: f64, epsilon: f64, seed: u64) -> Self {
        TrainerConfig { algorithm: Algorithm::Iql, episodes, learning_rate, epsilon, seed, ..Default::default() }
    }

    pub fn pg(episodes: usize, learning_rate: f64, temperature: f64, baseline: f64, seed: u64) -> Self {
        TrainerConfig {
            algorithm: Algorithm::Pg,
            episodes,
            learning_rate,
            temperature,
            baseline,
            seed,
            ..Default::default()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        TrainerConfig { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be ≥ 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config("epsilon must lie in [0, 1]".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config("temperature must be > 0".into()));
        }
        if self.q_init_noise < 0.0 {
            return Err(Error::Config("q_init_noise must be ≥ 0".into()));
        }
        Ok(())
    }
}
