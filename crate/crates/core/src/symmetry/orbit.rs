use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::action::transform_policy;
use super::map::{ensure_closed, SymmetryMap, SymmetrySet};
use crate::error::{Error, Result};
use crate::eval::{cross_play, exact_expected_return};
use crate::model::TabularDecPomdp;
use crate::policy::TabularJointPolicy;
use crate::scalar::{sorted_sum, Scalar};

/// How the other-play average weighs the orbit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitMode {
    /// Uniform over the distinct policies φ(π).
    #[default]
    DistinctPolicies,
    /// Uniform over group elements, so stabilized policies count repeatedly.
    GroupElements,
}

/// φ(π) for every φ in the closed set, in closure order.
pub fn orbit_with_repeats<S: Scalar>(
    model: &TabularDecPomdp<S>,
    set: &SymmetrySet,
    pi: &TabularJointPolicy<S>,
) -> Result<Vec<TabularJointPolicy<S>>> {
    let closed = ensure_closed(set)?;
    closed.maps.par_iter().map(|phi| transform_policy(model, phi, pi)).collect()
}

/// Distinct members of [π] under exact table equality.
pub fn orbit<S: Scalar>(
    model: &TabularDecPomdp<S>,
    set: &SymmetrySet,
    pi: &TabularJointPolicy<S>,
) -> Result<Vec<TabularJointPolicy<S>>> {
    let all = orbit_with_repeats(model, set, pi)?;
    let mut distinct: Vec<TabularJointPolicy<S>> = Vec::new();
    for p in all {
        if !distinct.contains(&p) {
            distinct.push(p);
        }
    }
    Ok(distinct)
}

/// Average of XP(π, π̃) over the orbit of π.
pub fn op_objective<S: Scalar>(
    model: &TabularDecPomdp<S>,
    set: &SymmetrySet,
    pi: &TabularJointPolicy<S>,
    mode: OrbitMode,
) -> Result<S> {
    if model.num_agents() != 2 {
        return Err(Error::NotTwoAgent(model.num_agents()));
    }
    let members = match mode {
        OrbitMode::DistinctPolicies => orbit(model, set, pi)?,
        OrbitMode::GroupElements => orbit_with_repeats(model, set, pi)?,
    };
    let values: Vec<S> = members
        .par_iter()
        .map(|other| cross_play(model, pi, other))
        .collect::<Result<_>>()?;
    let count = S::from_count(values.len());
    Ok(sorted_sum(values) / count)
}

/// J(π) − XP(π, φ(π)); positive when φ breaks π's convention incompatibly.
pub fn symmetry_breaking_gap<S: Scalar>(
    model: &TabularDecPomdp<S>,
    pi: &TabularJointPolicy<S>,
    phi: &SymmetryMap,
) -> Result<S> {
    let moved = transform_policy(model, phi, pi)?;
    Ok(exact_expected_return(model, pi)? - cross_play(model, pi, &moved)?)
}

/// Orbit average S(π)(a | τ) = mean over [π] of π′(a | τ).
///
/// Summands are added in sorted order, so the result is invariant under every
/// map in the set bit for bit.
pub fn symmetrize<S: Scalar>(
    model: &TabularDecPomdp<S>,
    set: &SymmetrySet,
    pi: &TabularJointPolicy<S>,
) -> Result<TabularJointPolicy<S>> {
    let members = orbit(model, set, pi)?;
    let count = S::from_count(members.len());
    let mut agents = Vec::with_capacity(pi.num_agents());
    for (agent, table) in pi.agents.iter().enumerate() {
        let keys: BTreeSet<_> = table.keys().collect();
        for m in &members {
            if m.agents[agent].keys().collect::<BTreeSet<_>>() != keys {
                return Err(Error::DomainGap(format!("orbit members of agent {agent} differ in domain")));
            }
        }
        let averaged = table
            .iter()
            .map(|(aoh, row)| {
                let new_row = (0..row.len())
                    .map(|a| {
                        let terms = members.iter().map(|m| m.agents[agent][aoh][a].clone()).collect();
                        sorted_sum(terms) / count.clone()
                    })
                    .collect();
                (aoh.clone(), new_row)
            })
            .collect();
        agents.push(averaged);
    }
    Ok(TabularJointPolicy { agents })
}
