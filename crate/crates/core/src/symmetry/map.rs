use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::perm::Permutation;
use crate::aoh::LocalAoh;
use crate::error::{Error, Result};
use crate::model::TabularDecPomdp;
use crate::scalar::Scalar;

pub const DEFAULT_CLOSURE_CAP: usize = 100_000;

/// Per-agent relabeling of actions and observations; states are left fixed.
///
/// The derived order (actions first, then observations, agent by agent) is
/// the canonical order used for every deterministic tie-break.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymmetryMap {
    pub actions: Vec<Permutation>,
    pub observations: Vec<Permutation>,
}

impl SymmetryMap {
    pub fn identity<S: Scalar>(model: &TabularDecPomdp<S>) -> Self {
        SymmetryMap {
            actions: (0..model.num_agents()).map(|i| Permutation::identity(model.num_actions(i))).collect(),
            observations: (0..model.num_agents())
                .map(|i| Permutation::identity(model.num_observations(i)))
                .collect(),
        }
    }

    pub fn num_agents(&self) -> usize {
        self.actions.len()
    }

    pub fn is_identity(&self) -> bool {
        self.actions.iter().chain(&self.observations).all(Permutation::is_identity)
    }

    fn shape(&self) -> Vec<(usize, usize)> {
        self.actions.iter().zip(&self.observations).map(|(a, o)| (a.len(), o.len())).collect()
    }

    /// Checks that this map fits the model's agent, action and observation
    /// counts.
    pub fn fits<S: Scalar>(&self, model: &TabularDecPomdp<S>) -> bool {
        self.num_agents() == model.num_agents()
            && self.observations.len() == model.num_agents()
            && (0..model.num_agents())
                .all(|i| self.actions[i].len() == model.num_actions(i) && self.observations[i].len() == model.num_observations(i))
    }

    /// `(self ∘ other)`, applied componentwise.
    pub fn compose(&self, other: &SymmetryMap) -> Result<SymmetryMap> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "cannot compose maps of shapes {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(SymmetryMap {
            actions: self.actions.iter().zip(&other.actions).map(|(a, b)| a.compose(b)).collect(),
            observations: self.observations.iter().zip(&other.observations).map(|(a, b)| a.compose(b)).collect(),
        })
    }

    pub fn inverse(&self) -> SymmetryMap {
        SymmetryMap {
            actions: self.actions.iter().map(Permutation::inverse).collect(),
            observations: self.observations.iter().map(Permutation::inverse).collect(),
        }
    }

    pub fn apply_action(&self, agent: usize, a: usize) -> usize {
        self.actions[agent].apply(a)
    }

    pub fn apply_observation(&self, agent: usize, o: usize) -> usize {
        self.observations[agent].apply(o)
    }

    pub fn apply_joint_action(&self, joint: &[usize]) -> Vec<usize> {
        joint.iter().enumerate().map(|(i, &a)| self.apply_action(i, a)).collect()
    }

    pub fn apply_aoh(&self, agent: usize, aoh: &LocalAoh) -> LocalAoh {
        let pa = &self.actions[agent];
        let po = &self.observations[agent];
        aoh.map(|a| pa.apply(a as usize) as u32, |o| po.apply(o as usize) as u32)
    }

    /// Every observation permutation is an involution.
    pub fn is_observation_involution(&self) -> bool {
        self.observations.iter().all(Permutation::is_involution)
    }
}

/// Ordered, duplicate-free list of maps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetrySet {
    pub maps: Vec<SymmetryMap>,
    #[serde(default)]
    pub closed: bool,
}

impl SymmetrySet {
    /// Drops repeated maps, keeping the first occurrence.
    pub fn new(maps: Vec<SymmetryMap>) -> Self {
        let mut seen = HashSet::new();
        let maps = maps.into_iter().filter(|m| seen.insert(m.clone())).collect();
        SymmetrySet { maps, closed: false }
    }

    pub fn identity<S: Scalar>(model: &TabularDecPomdp<S>) -> Self {
        SymmetrySet { maps: vec![SymmetryMap::identity(model)], closed: true }
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn contains(&self, map: &SymmetryMap) -> bool {
        self.maps.contains(map)
    }

    /// Same members regardless of order.
    pub fn same_members(&self, other: &SymmetrySet) -> bool {
        let a: HashSet<_> = self.maps.iter().collect();
        let b: HashSet<_> = other.maps.iter().collect();
        a == b
    }

    /// Checks closure under composition and inverses directly.
    pub fn is_group(&self) -> bool {
        let members: HashSet<_> = self.maps.iter().collect();
        let Some(first) = self.maps.first() else { return false };
        let id = SymmetryMap {
            actions: first.actions.iter().map(|p| Permutation::identity(p.len())).collect(),
            observations: first.observations.iter().map(|p| Permutation::identity(p.len())).collect(),
        };
        if !members.contains(&id) {
            return false;
        }
        self.maps.iter().all(|a| {
            members.contains(&a.inverse())
                && self
                    .maps
                    .iter()
                    .all(|b| a.compose(b).map(|c| members.contains(&c)).unwrap_or(false))
        })
    }
}

/// Smallest composition-closed superset containing the identity; generated
/// breadth first so the output order is deterministic.
pub fn group_closure(set: &SymmetrySet, cap: usize) -> Result<SymmetrySet> {
    let Some(first) = set.maps.first() else {
        return Err(Error::ShapeMismatch("cannot close an empty symmetry set".into()));
    };
    let id = SymmetryMap {
        actions: first.actions.iter().map(|p| Permutation::identity(p.len())).collect(),
        observations: first.observations.iter().map(|p| Permutation::identity(p.len())).collect(),
    };
    let mut members = vec![id.clone()];
    let mut seen: HashSet<SymmetryMap> = HashSet::from([id]);
    for m in &set.maps {
        if seen.insert(m.clone()) {
            members.push(m.clone());
        }
    }
    let generators = members.clone();
    let mut frontier = 0;
    while frontier < members.len() {
        let current = members[frontier].clone();
        frontier += 1;
        for g in &generators {
            let next = current.compose(g)?;
            if seen.insert(next.clone()) {
                members.push(next);
                if members.len() > cap {
                    return Err(Error::ClosureCap { cap });
                }
            }
        }
    }
    // Finite groups of permutations contain inverses of all generated
    // elements, since every element has finite order.
    Ok(SymmetrySet { maps: members, closed: true })
}

/// Returns `set` unchanged when already flagged closed.
pub fn ensure_closed(set: &SymmetrySet) -> Result<SymmetrySet> {
    if set.closed {
        Ok(set.clone())
    } else {
        group_closure(set, DEFAULT_CLOSURE_CAP)
    }
}
