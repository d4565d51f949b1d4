use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, TrainerConfig};
use crate::aoh::LocalAoh;
use crate::error::{Error, Result};
use crate::model::TabularDecPomdp;
use crate::policy::{argmax_legal, TabularJointPolicy};

/// One real decision taken during an episode, in the acting agent's own
/// frame.
#[derive(Clone, Debug)]
pub struct Decision {
    pub t: usize,
    pub aoh: LocalAoh,
    pub action: usize,
}

pub trait Learner: Send {
    fn act(&self, agent: usize, aoh: &LocalAoh, legal: &[usize], rng: &mut ChaCha8Rng) -> usize;
    /// End-of-episode update from every agent's decisions and the per-step
    /// team rewards.
    fn update(&mut self, decisions: &[Vec<Decision>], rewards: &[f64]) -> Result<()>;
    fn policy(&self) -> TabularJointPolicy<f64>;
}

/// Per-agent tables over the reachable decision histories, or a single table
/// used by every agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub shared: bool,
    pub tables: Vec<BTreeMap<LocalAoh, Vec<f64>>>,
}

impl QTable {
    fn new(model: &TabularDecPomdp<f64>, shared: bool, noise: f64, rng: &mut ChaCha8Rng) -> Self {
        let domain = model.reachable_decision_aohs();
        let width = |agent: usize| model.num_actions(agent);
        let mut fill = |keys: Vec<LocalAoh>, agent: usize| -> BTreeMap<LocalAoh, Vec<f64>> {
            keys.into_iter()
                .map(|k| {
                    let row = (0..width(agent))
                        .map(|_| if noise > 0.0 { rng.gen_range(-noise..=noise) } else { 0.0 })
                        .collect();
                    (k, row)
                })
                .collect()
        };
        let tables = if shared {
            let union: std::collections::BTreeSet<LocalAoh> = domain.into_iter().flatten().collect();
            vec![fill(union.into_iter().collect(), 0)]
        } else {
            domain
                .into_iter()
                .enumerate()
                .map(|(agent, keys)| fill(keys.into_iter().collect(), agent))
                .collect()
        };
        QTable { shared, tables }
    }

    fn index(&self, agent: usize) -> usize {
        if self.shared {
            0
        } else {
            agent
        }
    }

    pub fn row(&self, agent: usize, aoh: &LocalAoh) -> Option<&Vec<f64>> {
        self.tables[self.index(agent)].get(aoh)
    }

    fn row_mut(&mut self, agent: usize, aoh: &LocalAoh) -> Result<&mut Vec<f64>> {
        let idx = self.index(agent);
        self.tables[idx]
            .get_mut(aoh)
            .ok_or_else(|| Error::MissingAoh { agent, aoh: aoh.to_string() })
    }
}

pub struct IqlLearner {
    q: QTable,
    legal: Vec<Vec<Vec<usize>>>,
    widths: Vec<usize>,
    domain: Vec<Vec<LocalAoh>>,
    lr: f64,
    epsilon: f64,
    gamma: f64,
}

impl IqlLearner {
    pub fn new(model: &TabularDecPomdp<f64>, cfg: &TrainerConfig, rng: &mut ChaCha8Rng) -> Self {
        IqlLearner {
            q: QTable::new(model, cfg.shared_q, cfg.q_init_noise, rng),
            legal: legal_table(model),
            widths: (0..model.num_agents()).map(|i| model.num_actions(i)).collect(),
            domain: domain_of(model),
            lr: cfg.learning_rate,
            epsilon: cfg.epsilon,
            gamma: model.gamma,
        }
    }

    pub fn q_table(&self) -> &QTable {
        &self.q
    }

    fn max_q(&self, agent: usize, aoh: &LocalAoh) -> f64 {
        let legal = &self.legal[agent][aoh.len()];
        match self.q.row(agent, aoh) {
            Some(row) => legal.iter().map(|&a| row[a]).fold(f64::NEG_INFINITY, f64::max),
            None => 0.0,
        }
    }
}

fn legal_table(model: &TabularDecPomdp<f64>) -> Vec<Vec<Vec<usize>>> {
    (0..model.num_agents())
        .map(|i| (0..model.horizon).map(|t| model.legal(i, t)).collect())
        .collect()
}

fn domain_of(model: &TabularDecPomdp<f64>) -> Vec<Vec<LocalAoh>> {
    model.reachable_decision_aohs().into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Discounted reward from step `from` up to (not including) step `to`.
fn discounted(rewards: &[f64], from: usize, to: usize, gamma: f64) -> f64 {
    let mut g = 0.0;
    let mut d = 1.0;
    for r in &rewards[from..to.min(rewards.len())] {
        g += d * r;
        d *= gamma;
    }
    g
}

impl Learner for IqlLearner {
    fn act(&self, agent: usize, aoh: &LocalAoh, legal: &[usize], rng: &mut ChaCha8Rng) -> usize {
        let explore: f64 = rng.gen();
        if explore < self.epsilon {
            return legal[rng.gen_range(0..legal.len())];
        }
        match self.q.row(agent, aoh) {
            Some(row) => argmax_legal(row, legal),
            None => legal[0],
        }
    }

    fn update(&mut self, decisions: &[Vec<Decision>], rewards: &[f64]) -> Result<()> {
        for (agent, list) in decisions.iter().enumerate() {
            for (k, d) in list.iter().enumerate() {
                let target = match list.get(k + 1) {
                    Some(next) => {
                        discounted(rewards, d.t, next.t, self.gamma)
                            + self.gamma.powi((next.t - d.t) as i32) * self.max_q(agent, &next.aoh)
                    }
                    None => discounted(rewards, d.t, rewards.len(), self.gamma),
                };
                let lr = self.lr;
                let q = &mut self.q.row_mut(agent, &d.aoh)?[d.action];
                *q += lr * (target - *q);
                if !q.is_finite() {
                    return Err(Error::Divergence(format!(
                        "Q-value of agent {agent} at `{}` became {q}",
                        d.aoh
                    )));
                }
            }
        }
        Ok(())
    }

    fn policy(&self) -> TabularJointPolicy<f64> {
        let agents = self
            .domain
            .iter()
            .enumerate()
            .map(|(agent, keys)| {
                keys.iter()
                    .map(|aoh| {
                        let legal = &self.legal[agent][aoh.len()];
                        let zeros = vec![0.0; self.widths[agent]];
                        let row = self.q.row(agent, aoh).unwrap_or(&zeros);
                        let mut out = vec![0.0; self.widths[agent]];
                        out[argmax_legal(row, legal)] = 1.0;
                        (aoh.clone(), out)
                    })
                    .collect()
            })
            .collect();
        TabularJointPolicy { agents }
    }
}

/// Tabular softmax policy trained with REINFORCE.
pub struct PgLearner {
    theta: QTable,
    legal: Vec<Vec<Vec<usize>>>,
    widths: Vec<usize>,
    domain: Vec<Vec<LocalAoh>>,
    lr: f64,
    temperature: f64,
    baseline: f64,
    gamma: f64,
}

impl PgLearner {
    pub fn new(model: &TabularDecPomdp<f64>, cfg: &TrainerConfig, rng: &mut ChaCha8Rng) -> Self {
        PgLearner {
            theta: QTable::new(model, cfg.shared_q, cfg.q_init_noise, rng),
            legal: legal_table(model),
            widths: (0..model.num_agents()).map(|i| model.num_actions(i)).collect(),
            domain: domain_of(model),
            lr: cfg.learning_rate,
            temperature: cfg.temperature,
            baseline: cfg.baseline,
            gamma: model.gamma,
        }
    }

    fn probs(&self, agent: usize, aoh: &LocalAoh, legal: &[usize], width: usize) -> Vec<f64> {
        let mut out = vec![0.0; width];
        match self.theta.row(agent, aoh) {
            Some(theta) => {
                let logits: Vec<f64> = legal.iter().map(|&a| theta[a] / self.temperature).collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let z: f64 = exps.iter().sum();
                for (&a, e) in legal.iter().zip(exps) {
                    out[a] = e / z;
                }
            }
            None => {
                for &a in legal {
                    out[a] = 1.0 / legal.len() as f64;
                }
            }
        }
        out
    }

}

impl Learner for PgLearner {
    fn act(&self, agent: usize, aoh: &LocalAoh, legal: &[usize], rng: &mut ChaCha8Rng) -> usize {
        let p = self.probs(agent, aoh, legal, self.widths[agent]);
        crate::sim::sample_f64(&p, rng)
    }

    fn update(&mut self, decisions: &[Vec<Decision>], rewards: &[f64]) -> Result<()> {
        for (agent, list) in decisions.iter().enumerate() {
            for d in list {
                let legal = self.legal[agent][d.t].clone();
                let p = self.probs(agent, &d.aoh, &legal, self.widths[agent]);
                let advantage = discounted(rewards, d.t, rewards.len(), self.gamma) - self.baseline;
                let scale = self.lr * advantage / self.temperature;
                let theta = self.theta.row_mut(agent, &d.aoh)?;
                for &a in &legal {
                    let indicator = if a == d.action { 1.0 } else { 0.0 };
                    theta[a] += scale * (indicator - p[a]);
                    if !theta[a].is_finite() {
                        return Err(Error::Divergence(format!("logit of agent {agent} at `{}` diverged", d.aoh)));
                    }
                }
            }
        }
        Ok(())
    }

    fn policy(&self) -> TabularJointPolicy<f64> {
        let agents = self
            .domain
            .iter()
            .enumerate()
            .map(|(agent, keys)| {
                let width = self.widths[agent];
                keys.iter()
                    .map(|aoh| {
                        let legal = &self.legal[agent][aoh.len()];
                        (aoh.clone(), self.probs(agent, aoh, legal, width))
                    })
                    .collect()
            })
            .collect();
        TabularJointPolicy { agents }
    }
}

pub fn make_learner(model: &TabularDecPomdp<f64>, cfg: &TrainerConfig, rng: &mut ChaCha8Rng) -> Box<dyn Learner> {
    match cfg.algorithm {
        Algorithm::Iql => Box::new(IqlLearner::new(model, cfg, rng)),
        Algorithm::Pg => Box::new(PgLearner::new(model, cfg, rng)),
    }
}
