use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::search::transformed_return;
use crate::error::{Error, Result};
use crate::eval::exact_expected_return;
use crate::model::TabularDecPomdp;
use crate::policy::TabularJointPolicy;
use crate::symmetry::{SymmetryMap, SymmetrySet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPropertyReport {
    /// E[J(π)] over the holdout pool.
    pub mean_return: f64,
    /// E[J((φ1∘…∘φk)(π))] for k = 1, 2, 3, tuples drawn uniformly from the set.
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    /// E[‖τ − φ_O²(τ)‖ / ‖τ‖] over maps, agents and reachable histories,
    /// histories encoded as stacked one-hot observations.
    pub reconstruction_loss: f64,
    pub set_size: usize,
}

/// Multiplicity of every k-fold composition.
fn compositions(set: &SymmetrySet, k: usize) -> Result<HashMap<SymmetryMap, u64>> {
    let mut level: HashMap<SymmetryMap, u64> = HashMap::new();
    for m in &set.maps {
        *level.entry(m.clone()).or_default() += 1;
    }
    for _ in 1..k {
        let mut next: HashMap<SymmetryMap, u64> = HashMap::new();
        for (m, c) in &level {
            for g in &set.maps {
                *next.entry(m.compose(g)?).or_default() += c;
            }
        }
        level = next;
    }
    Ok(level)
}

fn reconstruction_loss(model: &TabularDecPomdp<f64>, set: &SymmetrySet) -> f64 {
    let domain = model.reachable_decision_aohs();
    let mut total = 0.0;
    let mut count = 0usize;
    for phi in &set.maps {
        for (agent, aohs) in domain.iter().enumerate() {
            let twice = phi.observations[agent].compose(&phi.observations[agent]);
            for aoh in aohs {
                let obs: Vec<u32> = aoh.observations().collect();
                if obs.is_empty() {
                    continue;
                }
                let moved = obs.iter().filter(|&&o| twice.apply(o as usize) != o as usize).count();
                total += ((2 * moved) as f64).sqrt() / (obs.len() as f64).sqrt();
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Composition and invertibility diagnostics of a (not necessarily closed)
/// set on held-out policies.
pub fn group_property_report(
    model: &TabularDecPomdp<f64>,
    set: &SymmetrySet,
    holdout: &[TabularJointPolicy<f64>],
) -> Result<GroupPropertyReport> {
    if holdout.is_empty() {
        return Err(Error::Config("group property report needs held-out policies".into()));
    }
    if set.is_empty() {
        return Err(Error::Config("group property report needs a nonempty set".into()));
    }
    let mean_return =
        holdout.iter().map(|pi| exact_expected_return(model, pi)).sum::<Result<f64>>()? / holdout.len() as f64;
    let mut cache: HashMap<SymmetryMap, f64> = HashMap::new();
    let mut j = [0.0; 3];
    for (k, slot) in j.iter_mut().enumerate() {
        let mut weighted = 0.0;
        let mut total = 0u64;
        let mut entries: Vec<_> = compositions(set, k + 1)?.into_iter().collect();
        entries.sort();
        for (m, c) in entries {
            let v = match cache.get(&m) {
                Some(v) => *v,
                None => {
                    let v = transformed_return(model, &m, holdout)?;
                    cache.insert(m, v);
                    v
                }
            };
            weighted += c as f64 * v;
            total += c;
        }
        *slot = weighted / total as f64;
    }
    Ok(GroupPropertyReport {
        mean_return,
        j1: j[0],
        j2: j[1],
        j3: j[2],
        reconstruction_loss: reconstruction_loss(model, set),
        set_size: set.len(),
    })
}
