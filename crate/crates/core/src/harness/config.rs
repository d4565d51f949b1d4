use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::discovery::{ActionFamily, DiscoveryAlgorithm, DiscoveryConfig, RewardSignal};
use crate::envs::{make_cat_dog, make_lever_game, make_matrix_game, LeverGameConfig, MatrixGameConfig, ENV_NAMES};
use crate::error::{Error, Result};
use crate::model::TabularDecPomdp;
use crate::symmetry::OrbitMode;
use crate::training::{PoolOptions, TrainerConfig};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// How each agent's chosen other-play policy is turned into the policy it
/// brings to cross-play.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeployMode {
    #[default]
    Raw,
    /// Orbit average under the closure of the agent's own symmetry set.
    SymmetrizedEr,
    /// Orbit average under the enumerated Dec-POMDP symmetry group.
    SymmetrizedMdp,
}

impl std::str::FromStr for DeployMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(DeployMode::Raw),
            "symmetrized-er" => Ok(DeployMode::SymmetrizedEr),
            "symmetrized-mdp" => Ok(DeployMode::SymmetrizedMdp),
            other => Err(Error::Config(format!("unknown deploy mode `{other}`"))),
        }
    }
}

/// Environment selection plus the parameters of the parametric games.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_levers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<Vec<Vec<f64>>>,
}

impl EnvConfig {
    pub fn named(name: &str) -> Self {
        EnvConfig { name: name.to_string(), num_levers: None, rounds: None, actions: None, payoff: None }
    }

    pub fn build(&self) -> Result<TabularDecPomdp<f64>> {
        let lever = |levers: usize| -> Result<TabularDecPomdp<f64>> {
            let cfg = LeverGameConfig { num_levers: self.num_levers.unwrap_or(levers), rounds: self.rounds.unwrap_or(2) };
            if cfg.num_levers < 2 || cfg.rounds < 1 {
                return Err(Error::Config("lever games need at least 2 levers and 1 round".into()));
            }
            Ok(make_lever_game(&cfg))
        };
        match self.name.as_str() {
            "lever3" => lever(3),
            "lever2" => lever(2),
            "catdog" => Ok(make_cat_dog()),
            "matrix" => {
                let mut cfg = MatrixGameConfig::default();
                if let Some(a) = &self.actions {
                    cfg.actions = a.clone();
                }
                if let Some(p) = &self.payoff {
                    cfg.payoff = p.clone();
                }
                make_matrix_game(&cfg)
            }
            other => Err(Error::Config(format!(
                "unknown environment `{other}`, expected one of {}",
                ENV_NAMES.join(", ")
            ))),
        }
    }
}

/// Everything one population run needs. `l = 0` is the self-play baseline:
/// no pool or discovery, other-play over the identity alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub env: EnvConfig,
    /// Population size P.
    pub size: usize,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub epsilon: f64,
    pub master_seed: u64,
    /// Explicit per-agent seeds; derived from `master_seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_seeds: Option<Vec<u64>>,
    pub algorithm: DiscoveryAlgorithm,
    pub deploy: DeployMode,
    /// Coordinate-ascent sweeps applied to each other-play policy, 0 to skip.
    pub op_refine_sweeps: usize,
    pub orbit_mode: OrbitMode,
    pub closure_cap: usize,
    pub pool: PoolOptions,
    pub sp: TrainerConfig,
    pub op: TrainerConfig,
    pub discovery: DiscoveryConfig,
}

impl PopulationConfig {
    /// Tuned defaults for a bundled environment.
    pub fn preset(env: &str) -> Result<Self> {
        let base = PopulationConfig {
            env: EnvConfig::named(env),
            size: 5,
            k: 10,
            l: 3,
            m: 1,
            epsilon: 0.1,
            master_seed: 0,
            agent_seeds: None,
            algorithm: DiscoveryAlgorithm::Exhaustive,
            deploy: DeployMode::Raw,
            op_refine_sweeps: 20,
            orbit_mode: OrbitMode::GroupElements,
            closure_cap: crate::symmetry::DEFAULT_CLOSURE_CAP,
            pool: PoolOptions::default(),
            sp: TrainerConfig::iql(10_000, 0.1, 0.1, 0),
            op: TrainerConfig::iql(20_000, 0.1, 0.1, 0),
            discovery: DiscoveryConfig::default(),
        };
        let lever = |l: usize| PopulationConfig {
            l,
            algorithm: DiscoveryAlgorithm::Alg1,
            deploy: DeployMode::SymmetrizedEr,
            sp: TrainerConfig { shared_q: true, q_init_noise: 0.01, ..TrainerConfig::iql(10_000, 0.1, 0.1, 0) },
            op: TrainerConfig { shared_q: true, ..TrainerConfig::iql(20_000, 0.1, 0.3, 0) },
            discovery: DiscoveryConfig {
                learning_rate: 0.1,
                action_family: ActionFamily::AllPermutations,
                signal: RewardSignal::Exact,
                ..DiscoveryConfig::default()
            },
            ..base.clone()
        };
        match env {
            "lever3" => Ok(lever(6)),
            "lever2" => Ok(lever(2)),
            "catdog" => Ok(PopulationConfig {
                pool: PoolOptions { refine_sweeps: 20, ..PoolOptions::default() },
                discovery: DiscoveryConfig { baseline: Some(9.5), ..DiscoveryConfig::default() },
                ..base
            }),
            "matrix" => Ok(PopulationConfig {
                k: 4,
                l: 2,
                sp: TrainerConfig::iql(2_000, 0.1, 0.1, 0),
                op: TrainerConfig::iql(2_000, 0.1, 0.1, 0),
                ..base
            }),
            other => Err(Error::Config(format!(
                "unknown environment `{other}`, expected one of {}",
                ENV_NAMES.join(", ")
            ))),
        }
    }

    /// The self-play baseline for `env`: plain independent learners with no
    /// pool, no discovery and no refinement of the trained policy.
    pub fn baseline(env: &str) -> Result<Self> {
        Ok(PopulationConfig { l: 0, op_refine_sweeps: 0, ..Self::preset(env)? })
    }

    pub fn is_baseline(&self) -> bool {
        self.l == 0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.size < 2 {
            return bad(format!("population.size must be ≥ 2, got {}", self.size));
        }
        if self.k == 0 {
            return bad("population.k must be ≥ 1".into());
        }
        if self.m == 0 {
            return bad("population.m must be ≥ 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        if let Some(seeds) = &self.agent_seeds {
            if seeds.len() != self.size {
                return bad(format!("{} agent seeds given for a population of {}", seeds.len(), self.size));
            }
        }
        if self.closure_cap == 0 {
            return bad("population.closure_cap must be ≥ 1".into());
        }
        self.sp.validate()?;
        self.op.validate()?;
        self.discovery.validate()
    }
}

/// Merges `overlay` into `base`, table by table.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parsed configuration file: dotted keys over the sections `env`,
/// `population`, `pool`, `sp`, `op` and `discovery`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub env: Option<String>,
    sections: Value,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut root = serde_json::to_value(table)?;
        let obj = root.as_object_mut().expect("a TOML document is a table");
        match obj.remove("schema_version") {
            Some(Value::Number(n)) if n.as_u64() == Some(u64::from(CONFIG_SCHEMA_VERSION)) => {}
            Some(v) => return Err(Error::Config(format!("unsupported schema_version {v}"))),
            None => return Err(Error::Config("config file lacks schema_version".into())),
        }
        const KNOWN: [&str; 6] = ["env", "population", "pool", "sp", "op", "discovery"];
        if let Some(k) = obj.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown config section `{k}`")));
        }
        let env = match obj.get("env") {
            None => None,
            Some(Value::String(s)) => {
                let name = s.clone();
                obj.insert("env".into(), serde_json::json!({ "name": name }));
                Some(name)
            }
            Some(Value::Object(t)) => t.get("name").and_then(Value::as_str).map(str::to_string),
            Some(_) => return Err(Error::Config("`env` must be a name or a table".into())),
        };
        Ok(ConfigFile { env, sections: root })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The preset for the chosen environment with the file's keys applied.
    pub fn population(&self, env_override: Option<&str>) -> Result<PopulationConfig> {
        let name = env_override
            .map(str::to_string)
            .or_else(|| self.env.clone())
            .ok_or_else(|| Error::Config("no environment given (use --env or `env = ...`)".into()))?;
        let mut value = serde_json::to_value(PopulationConfig::preset(&name)?)?;
        let mut sections = self.sections.clone();
        let obj = sections.as_object_mut().expect("sections are a table");
        if let Some(Value::Object(mut population)) = obj.remove("population") {
            if let Some(n) = population.remove("size").or_else(|| population.remove("p")) {
                population.insert("size".into(), n);
            }
            merge(&mut value, Value::Object(population));
        }
        if let Some(env) = obj.get_mut("env") {
            env.as_object_mut().expect("normalized above").insert("name".into(), Value::String(name));
        }
        merge(&mut value, sections);
        let cfg: PopulationConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Key reference printed by `--help` and the README.
pub const CONFIG_KEYS: &str = "\
schema_version = 1                  required
env = \"lever3\" | env.name           lever3, lever2, catdog, matrix
env.num_levers, env.rounds          lever games
env.actions, env.payoff             matrix game
population.size (or .p), .k, .l, .m, .epsilon, .master_seed, .agent_seeds
population.algorithm                alg1 | alg2 | alg3 | exhaustive
population.deploy                   raw | symmetrized-er | symmetrized-mdp
population.op_refine_sweeps, .orbit_mode, .closure_cap
pool.accept_fraction, .retry_cap, .refine_sweeps
sp.* / op.*                         algorithm, episodes, learning_rate, epsilon, temperature,
                                    baseline, seed, shared_q, q_init_noise, checkpoint_every
discovery.*                         episodes, learning_rate, temperature, baseline, top_l, lambda1,
                                    lambda2, tolerance, seed, transposition_budget, action_family,
                                    signal, candidate_cap, exhaustive_cap";
