use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("policy has no entry for agent {agent} at history `{aoh}`")]
    MissingAoh { agent: usize, aoh: String },
    #[error("trajectory tree exceeds the cap of {cap} leaves")]
    TreeTooLarge { cap: usize },
    #[error("operation needs a two-agent model, got {0} agents")]
    NotTwoAgent(usize),
    #[error("epsilon must lie strictly between 0 and 1, got {0}")]
    InvalidEpsilon(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("symmetry does not map the policy domain onto itself: {0}")]
    DomainGap(String),
    #[error("enumeration needs {needed} candidates but the budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("group closure exceeded the cap of {cap} elements")]
    ClosureCap { cap: usize },
    #[error("non-finite value during training: {0}")]
    Divergence(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("policy pool: retry cap exhausted after {attempts} attempts ({accepted} of {wanted} accepted)")]
    RetryCapExhausted { attempts: usize, accepted: usize, wanted: usize },
    #[error("model fingerprint mismatch: file has {found}, model is {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("agent {agent} failed during {phase}: {source}")]
    Phase {
        agent: usize,
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
