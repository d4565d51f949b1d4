use serde::{Deserialize, Serialize};

use super::config::{DiscoveryAlgorithm, DiscoveryConfig};
use super::search::{CandidateRecord, Discovery};
use crate::error::Result;
use crate::eval::exact_expected_return;
use crate::model::TabularDecPomdp;
use crate::policy::TabularJointPolicy;
use crate::symmetry::SymmetrySet;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryManifest {
    pub schema_version: u32,
    pub algorithm: DiscoveryAlgorithm,
    pub config: DiscoveryConfig,
    pub model_fingerprint: String,
    pub pool_returns: Vec<f64>,
    pub candidates: Vec<CandidateRecord>,
    pub selected: SymmetrySet,
    /// Path of the symmetry-set file written alongside, when there is one.
    pub selected_file: Option<String>,
    pub warnings: Vec<String>,
}

impl DiscoveryManifest {
    pub fn new(
        model: &TabularDecPomdp<f64>,
        pool: &[TabularJointPolicy<f64>],
        algorithm: DiscoveryAlgorithm,
        config: &DiscoveryConfig,
        outcome: &Discovery,
    ) -> Result<Self> {
        Ok(DiscoveryManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            algorithm,
            config: config.clone(),
            model_fingerprint: model.fingerprint(),
            pool_returns: pool.iter().map(|pi| exact_expected_return(model, pi)).collect::<Result<_>>()?,
            candidates: outcome.candidates.clone(),
            selected: outcome.set.clone(),
            selected_file: None,
            warnings: outcome.warnings.clone(),
        })
    }
}
