//! Tabular trainers: independent Q-learning, REINFORCE, and the other-play
//! loop built on the same episode runner.

mod config;
mod learner;
mod pool;
mod refine;
mod run;

pub use config::{Algorithm, TrainerConfig};
pub use learner::{make_learner, Decision, IqlLearner, Learner, PgLearner, QTable};
pub use pool::{build_policy_pool, PolicyPool, PoolMember, PoolOptions};
pub use refine::{refine_other_play, refine_soft_best_response};
pub use run::{
    derive_seed, play_episode, train_other_play, train_selfplay, Checkpoint, CurvePoint, PartnerView,
    TrainOutput,
};

#[cfg(test)]
mod tests;
