use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::TrainerConfig;
use super::refine::refine_soft_best_response;
use super::run::{derive_seed, train_selfplay};
use crate::error::{Error, Result};
use crate::eval::exact_expected_return;
use crate::model::TabularDecPomdp;
use crate::policy::{epsilon_soften, TabularJointPolicy};

const POOL_STREAM: u64 = 0x9001;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolOptions {
    /// Accept a policy whose exact return is within this fraction of the best.
    pub accept_fraction: f64,
    /// Extra trainings allowed beyond the first `k`.
    pub retry_cap: usize,
    /// Sweeps of ε-soft best-response refinement applied to each trained
    /// policy before acceptance, 0 to skip.
    pub refine_sweeps: usize,
}

impl Default for PoolOptions {
    fn default() -> Self {
        PoolOptions { accept_fraction: 0.02, retry_cap: 50, refine_sweeps: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolMember {
    pub seed: u64,
    /// Exact return before softening.
    pub raw_return: f64,
    pub policy: TabularJointPolicy<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyPool {
    pub members: Vec<PoolMember>,
    pub best_return: f64,
    pub trainings: usize,
}

impl PolicyPool {
    pub fn policies(&self) -> Vec<TabularJointPolicy<f64>> {
        self.members.iter().map(|m| m.policy.clone()).collect()
    }
}

/// Trains `k` self-play policies from seeds derived from `cfg.seed`, replaces
/// those far from the best return with fresh seeds, then softens each.
pub fn build_policy_pool(
    model: &TabularDecPomdp<f64>,
    k: usize,
    cfg: &TrainerConfig,
    epsilon: f64,
    opts: &PoolOptions,
) -> Result<PolicyPool> {
    if k == 0 {
        return Err(Error::Config("pool size k must be ≥ 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let train = |index: usize| -> Result<(u64, TabularJointPolicy<f64>, f64)> {
        let seed = derive_seed(cfg.seed, POOL_STREAM, index as u64);
        let mut policy = train_selfplay(model, &cfg.with_seed(seed))?.policy;
        if opts.refine_sweeps > 0 {
            policy = refine_soft_best_response(model, &policy, epsilon, opts.refine_sweeps)?.0;
        }
        let j = exact_expected_return(model, &policy)?;
        Ok((seed, policy, j))
    };
    let mut slots: Vec<(u64, TabularJointPolicy<f64>, f64)> =
        (0..k).into_par_iter().map(train).collect::<Result<_>>()?;
    let mut next_index = k;
    loop {
        let best = slots.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
        let threshold = best - opts.accept_fraction * best.abs();
        let failing: Vec<usize> = (0..k).filter(|&i| slots[i].2 < threshold).collect();
        if failing.is_empty() {
            break;
        }
        let budget_left = k + opts.retry_cap - next_index;
        if budget_left < failing.len() {
            return Err(Error::RetryCapExhausted {
                attempts: next_index,
                accepted: k - failing.len(),
                wanted: k,
            });
        }
        let fresh: Vec<_> = (0..failing.len())
            .into_par_iter()
            .map(|j| train(next_index + j))
            .collect::<Result<_>>()?;
        next_index += failing.len();
        for (slot, replacement) in failing.into_iter().zip(fresh) {
            slots[slot] = replacement;
        }
    }
    let best_return = slots.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
    let members = slots
        .into_iter()
        .map(|(seed, policy, raw_return)| {
            Ok(PoolMember { seed, raw_return, policy: epsilon_soften(model, &policy, epsilon)? })
        })
        .collect::<Result<_>>()?;
    Ok(PolicyPool { members, best_return, trainings: next_index })
}
