//! Finite Dec-POMDP model.
//!
//! All tables are dense and indexed by position: states, per-agent actions and
//! per-agent observations are referred to by their index in the label lists.
//! Joint actions are flattened in mixed radix with agent 0 most significant.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aoh::LocalAoh;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance used when checking that probability rows are normalized.
pub const ROW_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub actions: Vec<String>,
    pub observations: Vec<String>,
    /// Legal action indices per time step. `None` means every action is legal
    /// at every step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legal_actions: Option<Vec<Vec<usize>>>,
}

impl AgentSpec {
    pub fn new(actions: &[&str], observations: &[&str]) -> Self {
        AgentSpec {
            actions: actions.iter().map(|s| s.to_string()).collect(),
            observations: observations.iter().map(|s| s.to_string()).collect(),
            legal_actions: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct TabularDecPomdp<S> {
    pub name: String,
    pub states: Vec<String>,
    pub agents: Vec<AgentSpec>,
    /// `transition[s][joint][s']`
    pub transition: Vec<Vec<Vec<S>>>,
    /// `observation[agent][s'][joint][o]`, the distribution of the agent's
    /// observation after the joint action led to `s'`.
    pub observation: Vec<Vec<Vec<Vec<S>>>>,
    /// Optional observation an agent receives before its first action,
    /// `initial_observation[agent][s0][o]`.
    pub initial_observation: Vec<Option<Vec<Vec<S>>>>,
    /// `reward[s'][joint]`, the team reward for reaching `s'` with `joint`.
    pub reward: Vec<Vec<S>>,
    pub horizon: usize,
    pub gamma: S,
    pub initial: Vec<S>,
    /// Episodes end on entering a terminal state.
    pub terminal: Vec<bool>,
    /// Symmetry enumeration uses one permutation for all agents when set.
    #[serde(default)]
    pub shared_symmetries: bool,
}

/// List of invariant violations; empty means the model is valid.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl<S: Scalar> TabularDecPomdp<S> {
    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self, agent: usize) -> usize {
        self.agents[agent].actions.len()
    }

    pub fn num_observations(&self, agent: usize) -> usize {
        self.agents[agent].observations.len()
    }

    pub fn num_joint_actions(&self) -> usize {
        self.agents.iter().map(|a| a.actions.len()).product()
    }

    pub fn joint_index(&self, actions: &[usize]) -> usize {
        let mut idx = 0;
        for (agent, &a) in actions.iter().enumerate() {
            idx = idx * self.num_actions(agent) + a;
        }
        idx
    }

    pub fn joint_actions(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.num_agents()];
        for agent in (0..self.num_agents()).rev() {
            let n = self.num_actions(agent);
            out[agent] = idx % n;
            idx /= n;
        }
        out
    }

    /// Legal actions of `agent` at time step `t`.
    pub fn legal(&self, agent: usize, t: usize) -> Vec<usize> {
        match &self.agents[agent].legal_actions {
            Some(per_step) => per_step[t.min(per_step.len() - 1)].clone(),
            None => (0..self.num_actions(agent)).collect(),
        }
    }

    /// An agent decides at `t` only if it has more than one legal action.
    pub fn is_decision_step(&self, agent: usize, t: usize) -> bool {
        self.legal(agent, t).len() > 1
    }

    pub fn gamma_f64(&self) -> f64 {
        self.gamma.to_f64_lossy()
    }

    /// Converts every table entry through `f64`.
    pub fn convert<T: Scalar>(&self) -> TabularDecPomdp<T> {
        let c = |x: &S| T::from_f64_lossy(x.to_f64_lossy());
        TabularDecPomdp {
            name: self.name.clone(),
            states: self.states.clone(),
            agents: self.agents.clone(),
            transition: self
                .transition
                .iter()
                .map(|r| r.iter().map(|v| v.iter().map(c).collect()).collect())
                .collect(),
            observation: self
                .observation
                .iter()
                .map(|a| {
                    a.iter()
                        .map(|r| r.iter().map(|v| v.iter().map(c).collect()).collect())
                        .collect()
                })
                .collect(),
            initial_observation: self
                .initial_observation
                .iter()
                .map(|o| o.as_ref().map(|t| t.iter().map(|v| v.iter().map(c).collect()).collect()))
                .collect(),
            reward: self.reward.iter().map(|v| v.iter().map(c).collect()).collect(),
            horizon: self.horizon,
            gamma: c(&self.gamma),
            initial: self.initial.iter().map(c).collect(),
            terminal: self.terminal.clone(),
            shared_symmetries: self.shared_symmetries,
        }
    }

    /// Every local history at which an agent has a real decision and which
    /// some joint policy reaches with positive probability.
    pub fn reachable_decision_aohs(&self) -> Vec<BTreeSet<LocalAoh>> {
        let mut out = vec![BTreeSet::new(); self.num_agents()];
        let n = self.num_agents();
        for (s0, p0) in self.initial.iter().enumerate() {
            if p0.is_zero() {
                continue;
            }
            for init in self.initial_observation_combos(s0) {
                let aohs: Vec<LocalAoh> = init
                    .iter()
                    .map(|o| LocalAoh::new(o.map(|o| o as u32)))
                    .collect();
                self.collect_reachable(0, s0, &aohs, &mut out, n);
            }
        }
        out
    }

    fn collect_reachable(
        &self,
        t: usize,
        s: usize,
        aohs: &[LocalAoh],
        out: &mut [BTreeSet<LocalAoh>],
        n: usize,
    ) {
        if t >= self.horizon || self.terminal[s] {
            return;
        }
        for (agent, aoh) in aohs.iter().enumerate() {
            if self.is_decision_step(agent, t) {
                out[agent].insert(aoh.clone());
            }
        }
        let legal: Vec<Vec<usize>> = (0..n).map(|i| self.legal(i, t)).collect();
        for joint in cartesian(&legal) {
            let ja = self.joint_index(&joint);
            for (s_next, p) in self.transition[s][ja].iter().enumerate() {
                if p.is_zero() || self.terminal[s_next] || t + 1 >= self.horizon {
                    continue;
                }
                for obs in self.observation_combos(s_next, ja) {
                    let next: Vec<LocalAoh> = aohs
                        .iter()
                        .enumerate()
                        .map(|(i, h)| h.extended(joint[i] as u32, obs[i] as u32))
                        .collect();
                    self.collect_reachable(t + 1, s_next, &next, out, n);
                }
            }
        }
    }

    /// Per-agent initial observations with positive probability in `s0`,
    /// as a cartesian product (`None` for agents without one).
    pub(crate) fn initial_observation_combos(&self, s0: usize) -> Vec<Vec<Option<usize>>> {
        let per_agent: Vec<Vec<Option<usize>>> = self
            .initial_observation
            .iter()
            .map(|table| match table {
                None => vec![None],
                Some(t) => t[s0]
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| !p.is_zero())
                    .map(|(o, _)| Some(o))
                    .collect(),
            })
            .collect();
        cartesian(&per_agent)
    }

    pub(crate) fn observation_combos(&self, s_next: usize, ja: usize) -> Vec<Vec<usize>> {
        let per_agent: Vec<Vec<usize>> = (0..self.num_agents())
            .map(|i| {
                self.observation[i][s_next][ja]
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| !p.is_zero())
                    .map(|(o, _)| o)
                    .collect()
            })
            .collect();
        cartesian(&per_agent)
    }

    pub(crate) fn initial_observation_prob(&self, s0: usize, init: &[Option<usize>]) -> S {
        let mut p = S::one();
        for (agent, o) in init.iter().enumerate() {
            if let (Some(table), Some(o)) = (&self.initial_observation[agent], o) {
                p = p * table[s0][*o].clone();
            }
        }
        p
    }

    pub(crate) fn observation_prob(&self, s_next: usize, ja: usize, obs: &[usize]) -> S {
        let mut p = S::one();
        for (agent, &o) in obs.iter().enumerate() {
            p = p * self.observation[agent][s_next][ja][o].clone();
        }
        p
    }
}

impl TabularDecPomdp<f64> {
    /// SHA-256 of the canonical JSON serialization.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("model serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Cartesian product in lexicographic order (first factor slowest).
pub(crate) fn cartesian<T: Clone>(factors: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::with_capacity(factors.len())];
    for f in factors {
        let mut next = Vec::with_capacity(out.len() * f.len());
        for prefix in &out {
            for x in f {
                let mut v = prefix.clone();
                v.push(x.clone());
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn check_row<S: Scalar>(row: &[S], what: impl Fn() -> String, report: &mut ValidationReport) {
    if row.iter().any(|p| p.is_negative()) {
        report.violations.push(format!("{} has a negative entry", what()));
    }
    let sum = row.iter().cloned().fold(S::zero(), |a, b| a + b);
    if !crate::scalar::approx_eq(&sum, &S::one(), ROW_TOLERANCE) {
        report
            .violations
            .push(format!("{} sums to {}", what(), sum.to_f64_lossy()));
    }
}

/// Checks every structural and probabilistic invariant of the model.
pub fn validate_model<S: Scalar>(model: &TabularDecPomdp<S>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let v = &mut report.violations;
    let n_states = model.num_states();
    let n = model.num_agents();
    if n == 0 {
        v.push("model needs at least one agent".into());
        return report;
    }
    if n_states == 0 {
        v.push("model needs at least one state".into());
        return report;
    }
    if model.horizon < 1 {
        v.push("horizon must be ≥ 1".into());
    }
    if model.gamma.is_negative() || model.gamma > S::one() {
        v.push(format!("gamma must lie in [0, 1], got {}", model.gamma.to_f64_lossy()));
    }
    for (i, agent) in model.agents.iter().enumerate() {
        if agent.actions.is_empty() {
            v.push(format!("agent {i} has no actions"));
        }
        if agent.observations.is_empty() {
            v.push(format!("agent {i} has no observations"));
        }
        if let Some(legal) = &agent.legal_actions {
            if legal.len() < model.horizon {
                v.push(format!(
                    "agent {i} lists legal actions for {} steps, horizon is {}",
                    legal.len(),
                    model.horizon
                ));
            }
            for (t, set) in legal.iter().enumerate() {
                let distinct: BTreeSet<_> = set.iter().collect();
                if set.is_empty() || distinct.len() != set.len() {
                    v.push(format!("agent {i} legal set at step {t} is empty or repeats an action"));
                }
                if set.iter().any(|&a| a >= agent.actions.len()) {
                    v.push(format!("agent {i} legal set at step {t} names an unknown action"));
                }
            }
        }
    }
    if !v.is_empty() {
        return report;
    }
    let n_joint = model.num_joint_actions();
    if model.initial.len() != n_states
        || model.terminal.len() != n_states
        || model.transition.len() != n_states
        || model.reward.len() != n_states
        || model.observation.len() != n
        || model.initial_observation.len() != n
    {
        v.push("table dimensions do not match the state and agent counts".into());
        return report;
    }
    check_row(&model.initial, || "initial distribution".into(), &mut report);
    for s in 0..n_states {
        if model.transition[s].len() != n_joint || model.reward[s].len() != n_joint {
            report
                .violations
                .push(format!("state {} has wrong joint-action dimension", model.states[s]));
            continue;
        }
        for ja in 0..n_joint {
            let row = &model.transition[s][ja];
            if row.len() != n_states {
                report.violations.push(format!("transition row ({}, {ja}) has wrong length", model.states[s]));
                continue;
            }
            check_row(
                row,
                || format!("transition row (state {}, joint action {ja})", model.states[s]),
                &mut report,
            );
        }
    }
    for agent in 0..n {
        let n_obs = model.num_observations(agent);
        let table = &model.observation[agent];
        if table.len() != n_states {
            report.violations.push(format!("observation table of agent {agent} has wrong state dimension"));
            continue;
        }
        for s in 0..n_states {
            if table[s].len() != n_joint {
                report.violations.push(format!("observation table of agent {agent} has wrong joint dimension"));
                break;
            }
            for ja in 0..n_joint {
                if table[s][ja].len() != n_obs {
                    report.violations.push(format!("observation row ({agent}, {s}, {ja}) has wrong length"));
                    continue;
                }
                check_row(
                    &table[s][ja],
                    || format!("observation row (agent {agent}, state {}, joint action {ja})", model.states[s]),
                    &mut report,
                );
            }
        }
        if let Some(init) = &model.initial_observation[agent] {
            if init.len() != n_states || init.iter().any(|r| r.len() != n_obs) {
                report.violations.push(format!("initial observation table of agent {agent} has wrong shape"));
                continue;
            }
            for (s, row) in init.iter().enumerate() {
                check_row(
                    row,
                    || format!("initial observation row (agent {agent}, state {})", model.states[s]),
                    &mut report,
                );
            }
        }
    }
    report
}

/// Validates and converts the report into an error.
pub fn ensure_valid<S: Scalar>(model: &TabularDecPomdp<S>) -> Result<()> {
    let report = validate_model(model);
    if report.is_valid() {
        Ok(())
    } else {
        Err(Error::InvalidModel(report.violations.join("; ")))
    }
}
