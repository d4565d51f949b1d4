//! Expected return: exact trajectory-tree enumeration, Monte Carlo estimates,
//! single rollouts and cross-play.

use std::borrow::Cow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aoh::LocalAoh;
use crate::error::{Error, Result};
use crate::model::{cartesian, TabularDecPomdp};
use crate::policy::{MixedPolicy, PolicySource};
use crate::scalar::Scalar;
use crate::sim::{sample_index, Episode, Trajectory};

pub const DEFAULT_LEAF_CAP: usize = 10_000_000;

/// Local action distribution, with forced steps answered without a lookup.
pub(crate) fn local_row<'a, S: Scalar, P: PolicySource<S> + ?Sized>(
    model: &TabularDecPomdp<S>,
    policy: &'a P,
    agent: usize,
    aoh: &LocalAoh,
) -> Result<Cow<'a, [S]>> {
    let legal = model.legal(agent, aoh.len());
    if legal.len() == 1 {
        let mut row = vec![S::zero(); model.num_actions(agent)];
        row[legal[0]] = S::one();
        return Ok(Cow::Owned(row));
    }
    policy.row(agent, aoh)
}

struct Enumerator<'a, S, P: ?Sized> {
    model: &'a TabularDecPomdp<S>,
    policy: &'a P,
    leaves: usize,
    cap: usize,
}

impl<'a, S: Scalar, P: PolicySource<S> + ?Sized> Enumerator<'a, S, P> {
    fn value(&mut self, t: usize, s: usize, aohs: &[LocalAoh]) -> Result<S> {
        let model = self.model;
        if t >= model.horizon || model.terminal[s] {
            self.leaves += 1;
            if self.leaves > self.cap {
                return Err(Error::TreeTooLarge { cap: self.cap });
            }
            return Ok(S::zero());
        }
        let n = model.num_agents();
        let mut rows = Vec::with_capacity(n);
        let mut support = Vec::with_capacity(n);
        for (agent, aoh) in aohs.iter().enumerate() {
            let row = local_row(model, self.policy, agent, aoh)?.into_owned();
            support.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, p)| !p.is_zero())
                    .map(|(a, _)| a)
                    .collect::<Vec<_>>(),
            );
            rows.push(row);
        }
        let mut total = S::zero();
        for joint in cartesian(&support) {
            let mut p_joint = S::one();
            for (agent, &a) in joint.iter().enumerate() {
                p_joint = p_joint * rows[agent][a].clone();
            }
            let ja = model.joint_index(&joint);
            let mut inner = S::zero();
            for (s_next, p_t) in model.transition[s][ja].iter().enumerate() {
                if p_t.is_zero() {
                    continue;
                }
                let mut branch = model.reward[s_next][ja].clone();
                if t + 1 < model.horizon && !model.terminal[s_next] {
                    let mut future = S::zero();
                    for obs in model.observation_combos(s_next, ja) {
                        let p_o = model.observation_prob(s_next, ja, &obs);
                        let next: Vec<LocalAoh> = aohs
                            .iter()
                            .enumerate()
                            .map(|(i, h)| h.extended(joint[i] as u32, obs[i] as u32))
                            .collect();
                        future = future + p_o * self.value(t + 1, s_next, &next)?;
                    }
                    branch = branch + model.gamma.clone() * future;
                } else {
                    self.leaves += 1;
                    if self.leaves > self.cap {
                        return Err(Error::TreeTooLarge { cap: self.cap });
                    }
                }
                inner = inner + p_t.clone() * branch;
            }
            total = total + p_joint * inner;
        }
        Ok(total)
    }
}

/// Exact J(π) by weighted enumeration of every trajectory.
pub fn exact_expected_return<S: Scalar, P: PolicySource<S> + ?Sized>(
    model: &TabularDecPomdp<S>,
    policy: &P,
) -> Result<S> {
    exact_expected_return_capped(model, policy, DEFAULT_LEAF_CAP)
}

pub fn exact_expected_return_capped<S: Scalar, P: PolicySource<S> + ?Sized>(
    model: &TabularDecPomdp<S>,
    policy: &P,
    leaf_cap: usize,
) -> Result<S> {
    let mut e = Enumerator { model, policy, leaves: 0, cap: leaf_cap };
    let mut total = S::zero();
    for (s0, p0) in model.initial.iter().enumerate() {
        if p0.is_zero() {
            continue;
        }
        for init in model.initial_observation_combos(s0) {
            let p_init = model.initial_observation_prob(s0, &init);
            let aohs: Vec<LocalAoh> = init.iter().map(|o| LocalAoh::new(o.map(|o| o as u32))).collect();
            total = total + p0.clone() * p_init * e.value(0, s0, &aohs)?;
        }
    }
    Ok(total)
}

/// One sampled episode.
pub fn rollout<S: Scalar, P: PolicySource<S> + ?Sized>(
    model: &TabularDecPomdp<S>,
    policy: &P,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rollout_with(model, policy, &mut rng)
}

pub fn rollout_with<S: Scalar, P: PolicySource<S> + ?Sized>(
    model: &TabularDecPomdp<S>,
    policy: &P,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    let mut ep = Episode::reset(model, rng);
    let mut steps = Vec::new();
    while !ep.is_done(model) {
        let mut joint = Vec::with_capacity(model.num_agents());
        for (agent, aoh) in ep.aohs.iter().enumerate() {
            let row = local_row(model, policy, agent, aoh)?;
            joint.push(sample_index(&row, rng));
        }
        steps.push(ep.step(model, &joint, rng));
    }
    Ok(Trajectory { steps, realized_return: ep.realized_return })
}

/// Monte Carlo estimate of J(π) and its standard error.
pub fn mc_expected_return<S: Scalar, P: PolicySource<S> + ?Sized>(
    model: &TabularDecPomdp<S>,
    policy: &P,
    episodes: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(Error::Config("episodes must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..episodes {
        let g = rollout_with(model, policy, &mut rng)?.realized_return;
        sum += g;
        sum_sq += g * g;
    }
    let n = episodes as f64;
    let mean = sum / n;
    if episodes == 1 {
        return Ok((mean, 0.0));
    }
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// J of the team that takes agent `i` from `parts[i]`.
pub fn mixed_return<S: Scalar>(
    model: &TabularDecPomdp<S>,
    parts: &[&dyn PolicySource<S>],
) -> Result<S> {
    let mixed = MixedPolicy { parts: parts.to_vec() };
    exact_expected_return(model, &mixed)
}

/// XP(π1, π2) = ½ (J(π1¹, π2²) + J(π2¹, π1²)).
pub fn cross_play<S: Scalar>(
    model: &TabularDecPomdp<S>,
    pi1: &dyn PolicySource<S>,
    pi2: &dyn PolicySource<S>,
) -> Result<S> {
    if model.num_agents() != 2 {
        return Err(Error::NotTwoAgent(model.num_agents()));
    }
    let a = mixed_return(model, &[pi1, pi2])?;
    let b = mixed_return(model, &[pi2, pi1])?;
    Ok((a + b) / S::from_count(2))
}
