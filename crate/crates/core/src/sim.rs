//! Step-wise episode simulation with seeded sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aoh::LocalAoh;
use crate::model::TabularDecPomdp;
use crate::scalar::Scalar;

/// Inverse-CDF draw from an unnormalized-safe probability row.
pub fn sample_index<S: Scalar, R: Rng + ?Sized>(row: &[S], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in row.iter().enumerate() {
        let p = p.to_f64_lossy();
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Draw from an `f64` row.
pub fn sample_f64<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    sample_index(row, rng)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub joint_action: Vec<usize>,
    pub next_state: usize,
    pub joint_observation: Vec<usize>,
    pub reward: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub realized_return: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Running episode: current time, state and every agent's history.
#[derive(Clone, Debug)]
pub struct Episode {
    pub t: usize,
    pub state: usize,
    pub aohs: Vec<LocalAoh>,
    pub discount: f64,
    pub realized_return: f64,
}

impl Episode {
    pub fn reset<S: Scalar, R: Rng + ?Sized>(model: &TabularDecPomdp<S>, rng: &mut R) -> Self {
        let state = sample_index(&model.initial, rng);
        let aohs = model
            .initial_observation
            .iter()
            .map(|table| LocalAoh::new(table.as_ref().map(|t| sample_index(&t[state], rng) as u32)))
            .collect();
        Episode { t: 0, state, aohs, discount: 1.0, realized_return: 0.0 }
    }

    pub fn is_done<S: Scalar>(&self, model: &TabularDecPomdp<S>) -> bool {
        self.t >= model.horizon || model.terminal[self.state]
    }

    /// Advances one step and returns it.
    pub fn step<S: Scalar, R: Rng + ?Sized>(
        &mut self,
        model: &TabularDecPomdp<S>,
        joint_action: &[usize],
        rng: &mut R,
    ) -> Step {
        let ja = model.joint_index(joint_action);
        let next_state = sample_index(&model.transition[self.state][ja], rng);
        let joint_observation: Vec<usize> = (0..model.num_agents())
            .map(|i| sample_index(&model.observation[i][next_state][ja], rng))
            .collect();
        let reward = model.reward[next_state][ja].to_f64_lossy();
        for (i, h) in self.aohs.iter_mut().enumerate() {
            h.steps.push((joint_action[i] as u32, joint_observation[i] as u32));
        }
        let step = Step {
            state: self.state,
            joint_action: joint_action.to_vec(),
            next_state,
            joint_observation,
            reward,
        };
        self.realized_return += self.discount * reward;
        self.discount *= model.gamma_f64();
        self.state = next_state;
        self.t += 1;
        step
    }
}
