//! Learning expected-return symmetries from a frozen pool of self-play
//! policies, plus an exhaustive oracle and group diagnostics.

mod config;
mod learn;
mod manifest;
mod report;
mod search;
mod soft;

pub use config::{ActionFamily, DiscoveryAlgorithm, DiscoveryConfig, RewardSignal};
pub use learn::{action_maps, learn_alg1, learn_alg2, learn_alg3};
pub use manifest::{DiscoveryManifest, MANIFEST_SCHEMA_VERSION};
pub use report::{group_property_report, GroupPropertyReport};
pub use search::{
    displacement, er_gap, moved_points, pool_warnings, rank_and_select, search_exhaustive, transformed_return, CandidateRecord, Discovery,
    RANK_RESOLUTION,
};
pub use soft::{penalty, Choice, Factor, SoftSymmetry, DEFAULT_CANDIDATE_CAP};

use crate::error::{Error, Result};
use crate::model::TabularDecPomdp;
use crate::policy::TabularJointPolicy;

/// Runs the chosen algorithm; the regularized one first runs the
/// unregularized search to obtain the maps it composes with.
pub fn discover(
    model: &TabularDecPomdp<f64>,
    pool: &[TabularJointPolicy<f64>],
    algorithm: DiscoveryAlgorithm,
    cfg: &DiscoveryConfig,
) -> Result<Discovery> {
    match algorithm {
        DiscoveryAlgorithm::Alg1 => learn_alg1(model, pool, cfg),
        DiscoveryAlgorithm::Alg2 => {
            let unreg = learn_alg1(model, pool, cfg)?;
            if unreg.set.is_empty() {
                return Err(Error::Config("unregularized search kept no maps".into()));
            }
            learn_alg2(model, pool, &unreg.set, cfg)
        }
        DiscoveryAlgorithm::Alg3 => learn_alg3(model, pool, cfg),
        DiscoveryAlgorithm::Exhaustive => search_exhaustive(model, pool, cfg.top_l, u128::from(cfg.exhaustive_cap)),
    }
}
