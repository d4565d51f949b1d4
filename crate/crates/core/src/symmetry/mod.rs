//! Per-agent relabelings, their group structure and their action on policies.

mod action;
mod map;
mod orbit;
mod perm;

pub use action::{
    action_map_candidates, candidate_count, enumerate_mdp_symmetries, is_er_symmetry, is_mdp_symmetry,
    legal_action_permutations, observation_map_candidates, preserves_legal_sets, return_gaps, transform_policy,
    TransformedPolicy, DEFAULT_ENUMERATION_BUDGET, DEFAULT_SYMMETRY_TOLERANCE,
};
pub use map::{ensure_closed, group_closure, SymmetryMap, SymmetrySet, DEFAULT_CLOSURE_CAP};
pub use orbit::{op_objective, orbit, orbit_with_repeats, symmetrize, symmetry_breaking_gap, OrbitMode};
pub use perm::{factorial, Permutation};

use crate::model::TabularDecPomdp;
use crate::scalar::Scalar;

pub fn identity_symmetry<S: Scalar>(model: &TabularDecPomdp<S>) -> SymmetryMap {
    SymmetryMap::identity(model)
}

pub fn compose(phi1: &SymmetryMap, phi2: &SymmetryMap) -> crate::Result<SymmetryMap> {
    phi1.compose(phi2)
}

pub fn inverse(phi: &SymmetryMap) -> SymmetryMap {
    phi.inverse()
}
