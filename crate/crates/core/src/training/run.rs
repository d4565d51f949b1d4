use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainerConfig;
use super::learner::{make_learner, Decision, Learner};
use crate::aoh::LocalAoh;
use crate::error::{Error, Result};
use crate::eval::exact_expected_return;
use crate::model::TabularDecPomdp;
use crate::policy::TabularJointPolicy;
use crate::sim::Episode;
use crate::symmetry::{ensure_closed, SymmetryMap, SymmetrySet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub episode_return: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub episode: usize,
    pub exact_return: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutput {
    pub policy: TabularJointPolicy<f64>,
    pub curve: Vec<CurvePoint>,
    pub checkpoints: Vec<Checkpoint>,
}

/// Seed for sub-task `index` of stream `tag`, derived from `base`.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(tag);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

/// Which agent plays through the sampled relabeling in one episode.
pub struct PartnerView {
    pub agent: usize,
    pub phi: SymmetryMap,
    pub inv: SymmetryMap,
}

impl PartnerView {
    pub fn new(agent: usize, phi: &SymmetryMap) -> Self {
        PartnerView { agent, phi: phi.clone(), inv: phi.inverse() }
    }

    /// History as the relabeled agent perceives it.
    pub fn internal_aoh(&self, aoh: &LocalAoh) -> LocalAoh {
        self.inv.apply_aoh(self.agent, aoh)
    }

    /// Environment action emitted for the agent's internal choice.
    pub fn external_action(&self, action: usize) -> usize {
        self.phi.apply_action(self.agent, action)
    }
}

/// Plays one episode; the agent named in `view` perceives φ⁻¹ of its true
/// history and its chosen actions are emitted through φ.
pub fn play_episode(
    model: &TabularDecPomdp<f64>,
    learner: &dyn Learner,
    view: Option<&PartnerView>,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<Decision>>, Vec<f64>, f64) {
    let n = model.num_agents();
    let mut ep = Episode::reset(model, rng);
    let mut decisions: Vec<Vec<Decision>> = vec![Vec::new(); n];
    let mut rewards = Vec::new();
    while !ep.is_done(model) {
        let t = ep.t;
        let mut joint = Vec::with_capacity(n);
        for agent in 0..n {
            let legal = model.legal(agent, t);
            if legal.len() == 1 {
                joint.push(legal[0]);
                continue;
            }
            match view {
                Some(v) if v.agent == agent => {
                    let internal = v.internal_aoh(&ep.aohs[agent]);
                    let a = learner.act(agent, &internal, &legal, rng);
                    joint.push(v.external_action(a));
                    decisions[agent].push(Decision { t, aoh: internal, action: a });
                }
                _ => {
                    let a = learner.act(agent, &ep.aohs[agent], &legal, rng);
                    joint.push(a);
                    decisions[agent].push(Decision { t, aoh: ep.aohs[agent].clone(), action: a });
                }
            }
        }
        let step = ep.step(model, &joint, rng);
        rewards.push(step.reward);
    }
    (decisions, rewards, ep.realized_return)
}

fn train_loop(
    model: &TabularDecPomdp<f64>,
    cfg: &TrainerConfig,
    set: Option<&SymmetrySet>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    crate::model::ensure_valid(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut learner = make_learner(model, cfg, &mut rng);
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut checkpoints = Vec::new();
    let sampled = set.filter(|s| s.len() > 1);
    for episode in 0..cfg.episodes {
        let view = sampled.map(|s| {
            let phi = &s.maps[rng.gen_range(0..s.len())];
            let agent = rng.gen_range(0..model.num_agents());
            PartnerView::new(agent, phi)
        });
        let (decisions, rewards, ret) = play_episode(model, learner.as_ref(), view.as_ref(), &mut rng);
        learner.update(&decisions, &rewards)?;
        curve.push(CurvePoint { episode, episode_return: ret });
        if cfg.checkpoint_every > 0 && (episode + 1) % cfg.checkpoint_every == 0 {
            let exact = exact_expected_return(model, &learner.policy())?;
            checkpoints.push(Checkpoint { episode: episode + 1, exact_return: exact });
        }
    }
    Ok(TrainOutput { policy: learner.policy(), curve, checkpoints })
}

/// Self-play training: greedy policy for IQL, softmax policy for PG.
pub fn train_selfplay(model: &TabularDecPomdp<f64>, cfg: &TrainerConfig) -> Result<TrainOutput> {
    train_loop(model, cfg, None)
}

/// Other-play training: in every episode one uniformly drawn agent plays
/// through a uniformly drawn member of the closed set. With a single-element
/// set nothing is drawn and the run is the self-play run.
pub fn train_other_play(
    model: &TabularDecPomdp<f64>,
    set: &SymmetrySet,
    cfg: &TrainerConfig,
) -> Result<TrainOutput> {
    if model.num_agents() != 2 {
        return Err(Error::NotTwoAgent(model.num_agents()));
    }
    if set.is_empty() {
        return Err(Error::Config("other-play needs a nonempty symmetry set".into()));
    }
    let closed = ensure_closed(set)?;
    train_loop(model, cfg, Some(&closed))
}
