//! Tabular joint policies and read-only policy views.

use std::borrow::Cow;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::aoh::LocalAoh;
use crate::error::{Error, Result};
use crate::model::TabularDecPomdp;
use crate::scalar::Scalar;

/// Anything that yields a local action distribution for a local history.
///
/// Rows cover the agent's full action list; illegal actions carry zero mass.
pub trait PolicySource<S: Scalar>: Sync {
    fn row(&self, agent: usize, aoh: &LocalAoh) -> Result<Cow<'_, [S]>>;
}

impl<S: Scalar, P: PolicySource<S> + ?Sized> PolicySource<S> for &P {
    fn row(&self, agent: usize, aoh: &LocalAoh) -> Result<Cow<'_, [S]>> {
        (**self).row(agent, aoh)
    }
}

/// Per agent, a table from decision histories to action distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct TabularJointPolicy<S> {
    pub agents: Vec<BTreeMap<LocalAoh, Vec<S>>>,
}

impl<S: Scalar> PolicySource<S> for TabularJointPolicy<S> {
    fn row(&self, agent: usize, aoh: &LocalAoh) -> Result<Cow<'_, [S]>> {
        self.agents
            .get(agent)
            .and_then(|table| table.get(aoh))
            .map(|r| Cow::Borrowed(r.as_slice()))
            .ok_or_else(|| Error::MissingAoh { agent, aoh: aoh.to_string() })
    }
}

impl<S: Scalar> TabularJointPolicy<S> {
    /// Builds a policy on every reachable decision history from `row_fn`.
    pub fn from_fn(
        model: &TabularDecPomdp<S>,
        mut row_fn: impl FnMut(usize, &LocalAoh, &[usize]) -> Vec<S>,
    ) -> Self {
        let domain = model.reachable_decision_aohs();
        let agents = domain
            .into_iter()
            .enumerate()
            .map(|(agent, aohs)| {
                aohs.into_iter()
                    .map(|aoh| {
                        let legal = model.legal(agent, aoh.len());
                        let row = row_fn(agent, &aoh, &legal);
                        (aoh, row)
                    })
                    .collect()
            })
            .collect();
        TabularJointPolicy { agents }
    }

    /// Uniform over the legal actions at every decision history.
    pub fn uniform(model: &TabularDecPomdp<S>) -> Self {
        Self::from_fn(model, |agent, _, legal| {
            let mut row = vec![S::zero(); model.num_actions(agent)];
            let p = S::from_ratio(1, legal.len() as i64);
            for &a in legal {
                row[a] = p.clone();
            }
            row
        })
    }

    /// Point mass on `choose(agent, aoh)` at every decision history.
    pub fn deterministic(
        model: &TabularDecPomdp<S>,
        mut choose: impl FnMut(usize, &LocalAoh) -> usize,
    ) -> Self {
        Self::from_fn(model, |agent, aoh, _| {
            let mut row = vec![S::zero(); model.num_actions(agent)];
            row[choose(agent, aoh)] = S::one();
            row
        })
    }

    /// Random full-support policy with integer weights in `1..=9` on the legal
    /// actions, so rational instances stay exact.
    pub fn random<R: rand::Rng + ?Sized>(model: &TabularDecPomdp<S>, rng: &mut R) -> Self {
        Self::from_fn(model, |agent, _, legal| {
            let weights: Vec<i64> = legal.iter().map(|_| rng.gen_range(1..=9)).collect();
            let total: i64 = weights.iter().sum();
            let mut row = vec![S::zero(); model.num_actions(agent)];
            for (&a, &w) in legal.iter().zip(&weights) {
                row[a] = S::from_ratio(w, total);
            }
            row
        })
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    /// Largest deviation of any stored row from normalization, plus whether
    /// any entry is negative.
    pub fn check_rows(&self, tol: f64) -> Vec<String> {
        let mut problems = Vec::new();
        for (agent, table) in self.agents.iter().enumerate() {
            for (aoh, row) in table {
                let sum = row.iter().cloned().fold(S::zero(), |a, b| a + b);
                if row.iter().any(|p| p.is_negative()) || !crate::scalar::approx_eq(&sum, &S::one(), tol) {
                    problems.push(format!("agent {agent} at `{aoh}`"));
                }
            }
        }
        problems
    }

    pub fn convert<T: Scalar>(&self) -> TabularJointPolicy<T> {
        TabularJointPolicy {
            agents: self
                .agents
                .iter()
                .map(|t| {
                    t.iter()
                        .map(|(k, row)| {
                            (k.clone(), row.iter().map(|p| T::from_f64_lossy(p.to_f64_lossy())).collect())
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Joint policy whose agent `i` is agent `i` of `parts[i]`.
    pub fn combine(parts: &[&TabularJointPolicy<S>]) -> Self {
        TabularJointPolicy {
            agents: parts.iter().enumerate().map(|(i, p)| p.agents[i].clone()).collect(),
        }
    }
}

/// Agent `i` acts according to `parts[i]`.
pub struct MixedPolicy<'a, S> {
    pub parts: Vec<&'a (dyn PolicySource<S> + 'a)>,
}

impl<'a, S: Scalar> PolicySource<S> for MixedPolicy<'a, S> {
    fn row(&self, agent: usize, aoh: &LocalAoh) -> Result<Cow<'_, [S]>> {
        self.parts[agent].row(agent, aoh)
    }
}

/// Mixes toward uniform: `(1 - eps) * pi + eps * uniform(legal)`.
///
/// Every legal action ends up with probability at least `eps / |legal|`.
pub fn epsilon_soften<S: Scalar>(
    model: &TabularDecPomdp<S>,
    policy: &TabularJointPolicy<S>,
    epsilon: S,
) -> Result<TabularJointPolicy<S>> {
    if epsilon <= S::zero() || epsilon >= S::one() {
        return Err(Error::InvalidEpsilon(epsilon.to_f64_lossy()));
    }
    let keep = S::one() - epsilon.clone();
    let agents = policy
        .agents
        .iter()
        .enumerate()
        .map(|(agent, table)| {
            table
                .iter()
                .map(|(aoh, row)| {
                    let legal = model.legal(agent, aoh.len());
                    let floor = epsilon.clone() / S::from_count(legal.len());
                    let mut out: Vec<S> = row.iter().map(|p| keep.clone() * p.clone()).collect();
                    for &a in &legal {
                        out[a] = out[a].clone() + floor.clone();
                    }
                    (aoh.clone(), out)
                })
                .collect()
        })
        .collect();
    Ok(TabularJointPolicy { agents })
}

/// Greedy row: point mass on the highest-valued legal action, lowest index on
/// ties.
pub fn argmax_legal(values: &[f64], legal: &[usize]) -> usize {
    let mut best = legal[0];
    for &a in &legal[1..] {
        if values[a] > values[best] {
            best = a;
        }
    }
    best
}
