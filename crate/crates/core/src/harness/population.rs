use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DeployMode, PopulationConfig};
use super::xp::{close, xp_matrix, XpMatrix};
use crate::discovery::{discover, DiscoveryConfig};
use crate::error::{Error, Result};
use crate::eval::exact_expected_return;
use crate::model::TabularDecPomdp;
use crate::policy::TabularJointPolicy;
use crate::symmetry::{enumerate_mdp_symmetries, op_objective, symmetrize, SymmetrySet, DEFAULT_ENUMERATION_BUDGET};
use crate::training::{build_policy_pool, derive_seed, refine_other_play, train_other_play};

pub const RESULT_SCHEMA_VERSION: u32 = 1;

const AGENT_STREAM: u64 = 0xa9e7;
const POOL_STREAM: u64 = 0x9001;
const DISCOVERY_STREAM: u64 = 0xd15c;
const OP_STREAM: u64 = 0x0b01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent: usize,
    pub seed: u64,
    /// Exact returns of the softened pool members.
    pub pool_returns: Vec<f64>,
    pub set: SymmetrySet,
    pub warnings: Vec<String>,
    /// Other-play objective of each of the m trained policies.
    pub op_values: Vec<f64>,
    /// Exact J of each deployment candidate.
    pub candidate_returns: Vec<f64>,
    pub deployed_index: usize,
    /// Self-play value of the deployed policy.
    pub sp_score: f64,
    pub deployed: TabularJointPolicy<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostic {
    pub i: usize,
    pub j: usize,
    pub xp: f64,
    /// Mean of the two self-play scores minus their cross-play.
    pub breaking_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationResult {
    pub schema_version: u32,
    pub model_fingerprint: String,
    pub config: PopulationConfig,
    pub agents: Vec<AgentRecord>,
    pub xp: XpMatrix,
    pub pairs: Vec<PairDiagnostic>,
}

impl PopulationResult {
    pub fn deployed(&self) -> Vec<TabularJointPolicy<f64>> {
        self.agents.iter().map(|a| a.deployed.clone()).collect()
    }

    pub fn mean_xp(&self) -> f64 {
        self.xp.stats.as_ref().map(|s| s.mean).unwrap_or(f64::NAN)
    }
}

fn phase<T>(agent: usize, phase: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Phase { agent, phase, source: Box::new(e) })
}

/// Seed of agent `i`: taken from the explicit list when present.
pub fn agent_seed(cfg: &PopulationConfig, i: usize) -> u64 {
    match &cfg.agent_seeds {
        Some(seeds) => seeds[i],
        None => derive_seed(cfg.master_seed, AGENT_STREAM, i as u64),
    }
}

fn discovery_cfg(cfg: &PopulationConfig, seed: u64) -> DiscoveryConfig {
    DiscoveryConfig { top_l: cfg.l, ..cfg.discovery.with_seed(derive_seed(seed, DISCOVERY_STREAM, 0)) }
}

/// One agent's pipeline: pool, discovery, other-play and deployment. Only
/// the model, the config and the agent's own seed go in.
pub fn run_agent(
    model: &TabularDecPomdp<f64>,
    cfg: &PopulationConfig,
    agent: usize,
    mdp_group: Option<&SymmetrySet>,
) -> Result<AgentRecord> {
    let seed = agent_seed(cfg, agent);
    let mut warnings = Vec::new();
    let (pool_returns, set) = if cfg.is_baseline() {
        (Vec::new(), SymmetrySet::identity(model))
    } else {
        let sp = cfg.sp.with_seed(derive_seed(seed, POOL_STREAM, 0));
        let pool = phase(agent, "pool", build_policy_pool(model, cfg.k, &sp, cfg.epsilon, &cfg.pool))?;
        let policies = pool.policies();
        let returns = phase(agent, "pool", policies.iter().map(|p| exact_expected_return(model, p)).collect())?;
        let found = phase(agent, "discovery", discover(model, &policies, cfg.algorithm, &discovery_cfg(cfg, seed)))?;
        warnings.extend(found.warnings);
        let set = if found.set.is_empty() {
            warnings.push("discovery kept no maps; falling back to the identity".into());
            SymmetrySet::identity(model)
        } else {
            found.set
        };
        (returns, set)
    };
    let trained: Vec<(TabularJointPolicy<f64>, f64)> = (0..cfg.m)
        .map(|j| {
            let op = cfg.op.with_seed(derive_seed(seed, OP_STREAM, j as u64));
            let mut pi = train_other_play(model, &set, &op)?.policy;
            if cfg.op_refine_sweeps > 0 {
                pi = refine_other_play(model, &set, &pi, cfg.epsilon, cfg.op_refine_sweeps, cfg.orbit_mode)?.0;
            }
            let value = op_objective(model, &set, &pi, cfg.orbit_mode)?;
            Ok((pi, value))
        })
        .collect::<Result<_>>()
        .map_err(|e| Error::Phase { agent, phase: "other-play", source: Box::new(e) })?;
    let group = match cfg.deploy {
        DeployMode::Raw => None,
        DeployMode::SymmetrizedEr => Some(phase(agent, "deploy", close(&set, cfg.closure_cap))?),
        DeployMode::SymmetrizedMdp => mdp_group.cloned(),
    };
    let candidates: Vec<TabularJointPolicy<f64>> = trained
        .iter()
        .map(|(pi, _)| match &group {
            Some(g) => symmetrize(model, g, pi),
            None => Ok(pi.clone()),
        })
        .collect::<Result<_>>()
        .map_err(|e| Error::Phase { agent, phase: "deploy", source: Box::new(e) })?;
    let candidate_returns: Vec<f64> =
        phase(agent, "deploy", candidates.iter().map(|p| exact_expected_return(model, p)).collect())?;
    let mut deployed_index = 0;
    for (i, &j) in candidate_returns.iter().enumerate() {
        if j > candidate_returns[deployed_index] {
            deployed_index = i;
        }
    }
    for w in &warnings {
        warn!("agent {agent}: {w}");
    }
    info!("agent {agent}: deployed candidate {deployed_index} with J = {}", candidate_returns[deployed_index]);
    Ok(AgentRecord {
        agent,
        seed,
        pool_returns,
        set,
        warnings,
        op_values: trained.iter().map(|t| t.1).collect(),
        sp_score: candidate_returns[deployed_index],
        deployed: candidates[deployed_index].clone(),
        candidate_returns,
        deployed_index,
    })
}

/// Trains every agent independently, then evaluates the full cross-play
/// matrix of the deployed policies.
pub fn run_population(model: &TabularDecPomdp<f64>, cfg: &PopulationConfig) -> Result<PopulationResult> {
    cfg.validate()?;
    if model.num_agents() != 2 {
        return Err(Error::NotTwoAgent(model.num_agents()));
    }
    let mdp_group = match cfg.deploy {
        DeployMode::SymmetrizedMdp => Some(enumerate_mdp_symmetries(model, DEFAULT_ENUMERATION_BUDGET)?),
        _ => None,
    };
    let agents: Vec<AgentRecord> =
        (0..cfg.size).into_par_iter().map(|i| run_agent(model, cfg, i, mdp_group.as_ref())).collect::<Result<_>>()?;
    let deployed: Vec<_> = agents.iter().map(|a| a.deployed.clone()).collect();
    let xp = xp_matrix(model, &deployed)?;
    let n = agents.len();
    let pairs = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| PairDiagnostic {
            i,
            j,
            xp: xp.values[i][j],
            breaking_gap: 0.5 * (xp.values[i][i] + xp.values[j][j]) - xp.values[i][j],
        })
        .collect();
    Ok(PopulationResult {
        schema_version: RESULT_SCHEMA_VERSION,
        model_fingerprint: model.fingerprint(),
        config: cfg.clone(),
        agents,
        xp,
        pairs,
    })
}
