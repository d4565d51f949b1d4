//! Population experiments: per-agent pipelines, cross-play matrices and the
//! file formats the command line reads and writes.

mod config;
mod io;
mod population;
mod xp;

pub use config::{ConfigFile, DeployMode, EnvConfig, PopulationConfig, CONFIG_KEYS, CONFIG_SCHEMA_VERSION};
pub use io::{
    load_policy, load_set, output_dir, read_json, save_policy, save_set, write_curve_csv, write_histogram_csv,
    write_json, write_xp_csv, PolicyFile, SetFile, SymmetryFile, DEFAULT_OUT_DIR, FILE_SCHEMA_VERSION, OUT_ENV,
};
pub use population::{
    agent_seed, run_agent, run_population, AgentRecord, PairDiagnostic, PopulationResult, RESULT_SCHEMA_VERSION,
};
pub use xp::{
    histogram, op_gap_report, symmetrized_comparison, xp_matrix, OpGapReport, OpGapRow, SymmetrizedComparison,
    XpMatrix, XpStats,
};

#[cfg(test)]
mod tests;
