use std::borrow::Cow;
use std::collections::BTreeSet;

use super::map::{SymmetryMap, SymmetrySet};
use super::perm::{factorial, Permutation};
use crate::aoh::LocalAoh;
use crate::error::{Error, Result};
use crate::eval::exact_expected_return;
use crate::model::{cartesian, TabularDecPomdp};
use crate::policy::{PolicySource, TabularJointPolicy};
use crate::scalar::Scalar;

pub const DEFAULT_SYMMETRY_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 10_000_000;

/// The action permutation of every agent maps each step's legal set onto
/// itself.
pub fn preserves_legal_sets<S: Scalar>(model: &TabularDecPomdp<S>, phi: &SymmetryMap) -> bool {
    (0..model.num_agents()).all(|i| {
        (0..model.horizon.max(1)).all(|t| phi.actions[i].preserves(&model.legal(i, t)))
    })
}

/// φ(π)(a | τ) = π(φ⁻¹(a) | φ⁻¹(τ)), materialized as a table.
pub fn transform_policy<S: Scalar>(
    model: &TabularDecPomdp<S>,
    phi: &SymmetryMap,
    pi: &TabularJointPolicy<S>,
) -> Result<TabularJointPolicy<S>> {
    if !phi.fits(model) {
        return Err(Error::ShapeMismatch("symmetry map does not fit the model".into()));
    }
    if !preserves_legal_sets(model, phi) {
        return Err(Error::DomainGap("action map does not preserve legal action sets".into()));
    }
    let mut agents = Vec::with_capacity(pi.num_agents());
    for (agent, table) in pi.agents.iter().enumerate() {
        let mut out = std::collections::BTreeMap::new();
        for (aoh, row) in table {
            let mut new_row = vec![S::zero(); row.len()];
            for (a, p) in row.iter().enumerate() {
                new_row[phi.apply_action(agent, a)] = p.clone();
            }
            out.insert(phi.apply_aoh(agent, aoh), new_row);
        }
        let before: BTreeSet<&LocalAoh> = table.keys().collect();
        let after: BTreeSet<&LocalAoh> = out.keys().collect();
        if before != after {
            return Err(Error::DomainGap(format!(
                "policy domain of agent {agent} is not closed under the map"
            )));
        }
        agents.push(out);
    }
    Ok(TabularJointPolicy { agents })
}

/// Lazy φ(π): looks up φ⁻¹(τ) in the base policy on demand.
pub struct TransformedPolicy<'a, S> {
    base: &'a (dyn PolicySource<S> + 'a),
    phi: SymmetryMap,
    inv: SymmetryMap,
}

impl<'a, S: Scalar> TransformedPolicy<'a, S> {
    pub fn new(base: &'a (dyn PolicySource<S> + 'a), phi: &SymmetryMap) -> Self {
        TransformedPolicy { base, phi: phi.clone(), inv: phi.inverse() }
    }
}

impl<'a, S: Scalar> PolicySource<S> for TransformedPolicy<'a, S> {
    fn row(&self, agent: usize, aoh: &LocalAoh) -> Result<Cow<'_, [S]>> {
        let source = self.inv.apply_aoh(agent, aoh);
        let row = self.base.row(agent, &source)?;
        let mut out = vec![S::zero(); row.len()];
        for (a, p) in row.iter().enumerate() {
            out[self.phi.apply_action(agent, a)] = p.clone();
        }
        Ok(Cow::Owned(out))
    }
}

/// Transition, observation, reward and initial-observation tables are all
/// invariant under the map (state map fixed to the identity).
pub fn is_mdp_symmetry<S: Scalar>(model: &TabularDecPomdp<S>, phi: &SymmetryMap, tol: f64) -> bool {
    if !phi.fits(model) || !preserves_legal_sets(model, phi) {
        return false;
    }
    actions_preserve_dynamics(model, &phi.actions, tol)
        && (0..model.num_agents()).all(|i| observation_invariant(model, i, &phi.actions, &phi.observations[i], tol))
}

fn mapped_joint<S: Scalar>(model: &TabularDecPomdp<S>, actions: &[Permutation], ja: usize) -> usize {
    let joint = model.joint_actions(ja);
    let mapped: Vec<usize> = joint.iter().enumerate().map(|(i, &a)| actions[i].apply(a)).collect();
    model.joint_index(&mapped)
}

fn close<S: Scalar>(a: &S, b: &S, tol: f64) -> bool {
    crate::scalar::approx_eq(a, b, tol)
}

fn actions_preserve_dynamics<S: Scalar>(model: &TabularDecPomdp<S>, actions: &[Permutation], tol: f64) -> bool {
    for ja in 0..model.num_joint_actions() {
        let mja = mapped_joint(model, actions, ja);
        for s in 0..model.num_states() {
            if !close(&model.reward[s][mja], &model.reward[s][ja], tol) {
                return false;
            }
            for s_next in 0..model.num_states() {
                if !close(&model.transition[s][mja][s_next], &model.transition[s][ja][s_next], tol) {
                    return false;
                }
            }
        }
    }
    true
}

fn observation_invariant<S: Scalar>(
    model: &TabularDecPomdp<S>,
    agent: usize,
    actions: &[Permutation],
    obs: &Permutation,
    tol: f64,
) -> bool {
    let table = &model.observation[agent];
    for ja in 0..model.num_joint_actions() {
        let mja = mapped_joint(model, actions, ja);
        for s_next in 0..model.num_states() {
            for o in 0..model.num_observations(agent) {
                if !close(&table[s_next][mja][obs.apply(o)], &table[s_next][ja][o], tol) {
                    return false;
                }
            }
        }
    }
    if let Some(init) = &model.initial_observation[agent] {
        for row in init {
            for o in 0..row.len() {
                if !close(&row[obs.apply(o)], &row[o], tol) {
                    return false;
                }
            }
        }
    }
    true
}

/// Action permutations of one agent that preserve its legal set at every
/// step, in lexicographic order.
pub fn legal_action_permutations<S: Scalar>(model: &TabularDecPomdp<S>, agent: usize) -> Vec<Permutation> {
    Permutation::all(model.num_actions(agent))
        .into_iter()
        .filter(|p| (0..model.horizon.max(1)).all(|t| p.preserves(&model.legal(agent, t))))
        .collect()
}

/// Per-agent action maps (joint tuples) admissible for the model; a single
/// permutation repeated across agents when symmetries are shared.
pub fn action_map_candidates<S: Scalar>(model: &TabularDecPomdp<S>) -> Vec<Vec<Permutation>> {
    let n = model.num_agents();
    if model.shared_symmetries {
        let common: Vec<Permutation> = legal_action_permutations(model, 0)
            .into_iter()
            .filter(|p| (1..n).all(|i| p.len() == model.num_actions(i) && (0..model.horizon.max(1)).all(|t| p.preserves(&model.legal(i, t)))))
            .collect();
        common.into_iter().map(|p| vec![p; n]).collect()
    } else {
        let per_agent: Vec<Vec<Permutation>> = (0..n).map(|i| legal_action_permutations(model, i)).collect();
        cartesian(&per_agent)
    }
}

/// Observation-permutation tuples, shared or per agent like the action maps.
pub fn observation_map_candidates<S: Scalar>(model: &TabularDecPomdp<S>) -> Vec<Vec<Permutation>> {
    let n = model.num_agents();
    if model.shared_symmetries {
        Permutation::all(model.num_observations(0)).into_iter().map(|p| vec![p; n]).collect()
    } else {
        let per_agent: Vec<Vec<Permutation>> = (0..n).map(|i| Permutation::all(model.num_observations(i))).collect();
        cartesian(&per_agent)
    }
}

/// Size of the factored candidate space, computed without enumerating it.
pub fn candidate_count<S: Scalar>(model: &TabularDecPomdp<S>) -> u128 {
    let n = model.num_agents();
    let actions = action_map_candidates(model).len() as u128;
    let obs = if model.shared_symmetries {
        factorial(model.num_observations(0))
    } else {
        (0..n).map(|i| factorial(model.num_observations(i))).product()
    };
    actions * obs
}

/// Every factored map passing [`is_mdp_symmetry`], in canonical order.
pub fn enumerate_mdp_symmetries<S: Scalar>(model: &TabularDecPomdp<S>, budget: u128) -> Result<SymmetrySet> {
    let needed = candidate_count(model);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let tol = DEFAULT_SYMMETRY_TOLERANCE;
    let n = model.num_agents();
    let mut found = Vec::new();
    for actions in action_map_candidates(model) {
        if !actions_preserve_dynamics(model, &actions, tol) {
            continue;
        }
        let obs_choices: Vec<Vec<Permutation>> = if model.shared_symmetries {
            let ok: Vec<Permutation> = Permutation::all(model.num_observations(0))
                .into_iter()
                .filter(|p| (0..n).all(|i| observation_invariant(model, i, &actions, p, tol)))
                .collect();
            ok.into_iter().map(|p| vec![p; n]).collect()
        } else {
            let per_agent: Vec<Vec<Permutation>> = (0..n)
                .map(|i| {
                    Permutation::all(model.num_observations(i))
                        .into_iter()
                        .filter(|p| observation_invariant(model, i, &actions, p, tol))
                        .collect()
                })
                .collect();
            cartesian(&per_agent)
        };
        for observations in obs_choices {
            found.push(SymmetryMap { actions: actions.clone(), observations });
        }
    }
    found.sort();
    Ok(SymmetrySet { maps: found, closed: true })
}

/// Absolute return change |J(π) − J(φ(π))| for each pool member.
pub fn return_gaps<S: Scalar>(
    model: &TabularDecPomdp<S>,
    phi: &SymmetryMap,
    pool: &[TabularJointPolicy<S>],
) -> Result<Vec<S>> {
    pool.iter()
        .map(|pi| {
            let before = exact_expected_return(model, pi)?;
            let after = exact_expected_return(model, &TransformedPolicy::new(pi, phi))?;
            Ok((before - after).abs())
        })
        .collect()
}

/// Whether φ preserves the return of every pool member within `tol`, with
/// the largest gap seen.
pub fn is_er_symmetry<S: Scalar>(
    model: &TabularDecPomdp<S>,
    phi: &SymmetryMap,
    pool: &[TabularJointPolicy<S>],
    tol: f64,
) -> Result<(bool, f64)> {
    let gaps = return_gaps(model, phi, pool)?;
    let max = gaps.iter().map(|g| g.to_f64_lossy()).fold(0.0, f64::max);
    Ok((max <= tol, max))
}
