use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ActionFamily, DiscoveryConfig, RewardSignal};
use super::search::{by_value_desc, pool_warnings, record, transformed_return, CandidateRecord, Discovery};
use super::soft::SoftSymmetry;
use crate::error::{Error, Result};
use crate::eval::{cross_play, exact_expected_return, rollout_with};
use crate::model::{cartesian, TabularDecPomdp};
use crate::policy::{MixedPolicy, PolicySource, TabularJointPolicy};
use crate::symmetry::{action_map_candidates, legal_action_permutations, Permutation, SymmetryMap, SymmetrySet, TransformedPolicy};
use crate::training::derive_seed;

const ORDER_STREAM: u64 = 0xd15c;
const CANDIDATE_STREAM: u64 = 0xd15d;
const PAIR_STREAM: u64 = 0xd15e;
/// Choices below this probability are left out of the soft estimate.
const SUPPORT_FLOOR: f64 = 1e-6;
/// Choices at least this fraction as likely as the mode compete for the
/// hardened map.
const HARDEN_SHARE: f64 = 0.5;

/// Fixed action maps visited by the outer loop, before ordering.
pub fn action_maps(model: &TabularDecPomdp<f64>, family: ActionFamily) -> Vec<Vec<Permutation>> {
    let keep = |p: &Permutation| family == ActionFamily::AllPermutations || p.0.iter().enumerate().filter(|(i, &x)| *i != x).count() <= 2;
    if model.shared_symmetries {
        action_map_candidates(model).into_iter().filter(|maps| keep(&maps[0])).collect()
    } else {
        let per_agent: Vec<Vec<Permutation>> = (0..model.num_agents())
            .map(|i| legal_action_permutations(model, i).into_iter().filter(|p| keep(p)).collect())
            .collect();
        cartesian(&per_agent)
    }
}

/// Seeded visiting order, truncated to the budget.
fn visiting_order(count: usize, cfg: &DiscoveryConfig) -> Vec<usize> {
    let mut order: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, ORDER_STREAM, 0));
    order.shuffle(&mut rng);
    if cfg.transposition_budget > 0 {
        order.truncate(cfg.transposition_budget);
    }
    order
}

/// REINFORCE over the factors of `soft`. `episode` plays one episode under a
/// hard relabeling and returns its return.
fn optimize<F>(
    soft: &mut SoftSymmetry,
    cfg: &DiscoveryConfig,
    compose_with: Option<&SymmetrySet>,
    rng: &mut ChaCha8Rng,
    mut episode: F,
) -> Result<()>
where
    F: FnMut(&SymmetryMap, &mut ChaCha8Rng) -> Result<f64>,
{
    let t = cfg.temperature;
    let mut mean = 0.0;
    for k in 0..cfg.episodes {
        let choice = soft.sample(t, rng);
        let mut phi = soft.map(&choice);
        if let Some(set) = compose_with.filter(|s| cfg.lambda1 > 0.0 && !s.is_empty()) {
            if rng.gen::<f64>() < cfg.lambda1 {
                let left = &set.maps[rng.gen_range(0..set.len())];
                let right = &set.maps[rng.gen_range(0..set.len())];
                phi = left.compose(&phi.compose(right)?)?;
            }
        }
        let ret = episode(&phi, rng)?;
        let baseline = cfg.baseline.unwrap_or(mean);
        soft.reinforce(&choice, t, cfg.learning_rate * (ret - baseline));
        if cfg.lambda2 > 0.0 {
            soft.descend_penalty(t, cfg.learning_rate * cfg.lambda2);
        }
        if !soft.logits_finite() {
            return Err(Error::Divergence(format!("permutation logits diverged after {} episodes", k + 1)));
        }
        mean += (ret - mean) / (k + 1) as f64;
    }
    Ok(())
}

/// Scores the learned distribution: the soft estimate is the
/// probability-weighted objective over its support, and the hard map is the
/// best-ranked choice among those within [`HARDEN_SHARE`] of the modal
/// probability.
fn score_soft<F>(
    model: &TabularDecPomdp<f64>,
    soft: &SoftSymmetry,
    cfg: &DiscoveryConfig,
    index: usize,
    pool: &[TabularJointPolicy<f64>],
    value: F,
) -> Result<CandidateRecord>
where
    F: Fn(&SymmetryMap) -> Result<f64> + Sync,
{
    let t = cfg.temperature;
    let mut support = soft.support(t, SUPPORT_FLOOR);
    let mode = soft.mode();
    let p_mode = soft.probability(&mode, t);
    if !support.iter().any(|(c, _)| *c == mode) {
        support.push((mode, p_mode));
    }
    let scored: Vec<(SymmetryMap, f64, f64)> = support
        .par_iter()
        .map(|(choice, p)| {
            let map = soft.map(choice);
            let v = value(&map)?;
            Ok((map, *p, v))
        })
        .collect::<Result<_>>()?;
    let mass: f64 = scored.iter().map(|s| s.1).sum();
    let estimate = scored.iter().map(|(_, p, v)| p * v).sum::<f64>() / mass;
    let contenders: Vec<CandidateRecord> = scored
        .into_iter()
        .filter(|(_, p, _)| *p >= HARDEN_SHARE * p_mode)
        .map(|(map, _, v)| record(model, index, map, v, Some(estimate), pool))
        .collect::<Result<_>>()?;
    Ok(contenders.into_iter().min_by(by_value_desc).expect("the mode is always a contender"))
}

/// Best first, one entry per distinct map, only maps within tolerance on the
/// pool; the first `l` of them form the set.
fn select(mut records: Vec<CandidateRecord>, cfg: &DiscoveryConfig, warnings: &mut Vec<String>) -> (SymmetrySet, Vec<CandidateRecord>) {
    records.sort_by(by_value_desc);
    let mut chosen = Vec::new();
    for r in &records {
        if chosen.len() == cfg.top_l {
            break;
        }
        if chosen.contains(&r.map) {
            continue;
        }
        if r.max_gap > cfg.tolerance {
            warnings.push(format!(
                "candidate {} dropped: return gap {:.4} exceeds tolerance {}",
                r.index, r.max_gap, cfg.tolerance
            ));
            continue;
        }
        chosen.push(r.map.clone());
    }
    if cfg.top_l == 0 {
        warnings.push("l = 0 selects nothing".into());
    } else if chosen.len() < cfg.top_l {
        warnings.push(format!("only {} of the requested {} maps were kept", chosen.len(), cfg.top_l));
    }
    let set = SymmetrySet::new(chosen);
    (SymmetrySet { closed: !set.is_empty() && set.is_group(), ..set }, records)
}

fn finish(
    model: &TabularDecPomdp<f64>,
    pool: &[TabularJointPolicy<f64>],
    cfg: &DiscoveryConfig,
    outcomes: Vec<Result<CandidateRecord>>,
) -> Result<Discovery> {
    let mut warnings = pool_warnings(model, pool)?;
    let mut records = Vec::new();
    for (i, r) in outcomes.into_iter().enumerate() {
        match r {
            Ok(r) => records.push(r),
            Err(Error::Divergence(msg)) => warnings.push(format!("candidate {i} aborted: {msg}")),
            Err(e) => return Err(e),
        }
    }
    let (set, candidates) = select(records, cfg, &mut warnings);
    for w in &warnings {
        warn!("{w}");
    }
    Ok(Discovery { set, candidates, warnings })
}

fn check_inputs(pool: &[TabularJointPolicy<f64>], cfg: &DiscoveryConfig) -> Result<()> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(Error::Config("discovery needs a nonempty policy pool".into()));
    }
    Ok(())
}

fn learn_fixed_action(
    model: &TabularDecPomdp<f64>,
    pool: &[TabularJointPolicy<f64>],
    cfg: &DiscoveryConfig,
    compose_with: Option<&SymmetrySet>,
) -> Result<Discovery> {
    check_inputs(pool, cfg)?;
    let maps = action_maps(model, cfg.action_family);
    let order = visiting_order(maps.len(), cfg);
    let outcomes: Vec<Result<CandidateRecord>> = order
        .par_iter()
        .map(|&idx| {
            let mut soft = SoftSymmetry::with_fixed_actions(model, &maps[idx], cfg.candidate_cap)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, CANDIDATE_STREAM, idx as u64));
            optimize(&mut soft, cfg, compose_with, &mut rng, |phi, rng| {
                let pi = &pool[rng.gen_range(0..pool.len())];
                let view = TransformedPolicy::new(pi as &dyn PolicySource<f64>, phi);
                match cfg.signal {
                    RewardSignal::Episode => Ok(rollout_with(model, &view, rng)?.realized_return),
                    RewardSignal::Exact => exact_expected_return(model, &view),
                }
            })?;
            score_soft(model, &soft, cfg, idx, pool, |phi| transformed_return(model, phi, pool))
        })
        .collect();
    finish(model, pool, cfg, outcomes)
}

/// Learns observation relabelings for each fixed action map by policy
/// gradient on mean J(φ_θ(π)) over the frozen pool, hardens each to its
/// modal permutation and keeps the best `top_l`.
pub fn learn_alg1(model: &TabularDecPomdp<f64>, pool: &[TabularJointPolicy<f64>], cfg: &DiscoveryConfig) -> Result<Discovery> {
    learn_fixed_action(model, pool, cfg, None)
}

/// As [`learn_alg1`], with updates through φ_i ∘ φ_θ ∘ φ_j (probability λ1,
/// φ_i and φ_j drawn from `unreg`) and the invertibility penalty weighted by
/// λ2.
pub fn learn_alg2(
    model: &TabularDecPomdp<f64>,
    pool: &[TabularJointPolicy<f64>],
    unreg: &SymmetrySet,
    cfg: &DiscoveryConfig,
) -> Result<Discovery> {
    if unreg.is_empty() {
        return Err(Error::Config("the regularized search needs a nonempty unregularized set".into()));
    }
    learn_fixed_action(model, pool, cfg, Some(unreg))
}

/// For every ordered pair of pool members, learns action and observation
/// relabelings maximizing XP(π_i, φ_θ(π_j)).
pub fn learn_alg3(model: &TabularDecPomdp<f64>, pool: &[TabularJointPolicy<f64>], cfg: &DiscoveryConfig) -> Result<Discovery> {
    check_inputs(pool, cfg)?;
    if model.num_agents() != 2 {
        return Err(Error::NotTwoAgent(model.num_agents()));
    }
    if pool.len() < 2 {
        return Err(Error::Config("cross-play discovery needs at least two pool policies".into()));
    }
    let pairs: Vec<(usize, usize)> =
        (0..pool.len()).flat_map(|i| (0..pool.len()).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let outcomes: Vec<Result<CandidateRecord>> = pairs
        .par_iter()
        .enumerate()
        .map(|(idx, &(i, j))| {
            let mut soft = SoftSymmetry::with_learned_actions(model, cfg.candidate_cap)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, PAIR_STREAM, idx as u64));
            let (pi_i, pi_j) = (&pool[i] as &dyn PolicySource<f64>, &pool[j] as &dyn PolicySource<f64>);
            optimize(&mut soft, cfg, None, &mut rng, |phi, rng| {
                let moved = TransformedPolicy::new(pi_j, phi);
                if cfg.signal == RewardSignal::Exact {
                    return cross_play(model, pi_i, &moved);
                }
                let parts: Vec<&dyn PolicySource<f64>> =
                    if rng.gen::<bool>() { vec![pi_i, &moved] } else { vec![&moved, pi_i] };
                Ok(rollout_with(model, &MixedPolicy { parts }, rng)?.realized_return)
            })?;
            let xp = |phi: &SymmetryMap| cross_play(model, pi_i, &TransformedPolicy::new(pi_j, phi));
            score_soft(model, &soft, cfg, idx, pool, xp)
        })
        .collect();
    finish(model, pool, cfg, outcomes)
}
