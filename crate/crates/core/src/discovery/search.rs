use std::cmp::Ordering;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::exact_expected_return;
use crate::model::TabularDecPomdp;
use crate::policy::{PolicySource, TabularJointPolicy};
use crate::symmetry::{
    action_map_candidates, candidate_count, observation_map_candidates, return_gaps, Permutation, SymmetryMap, SymmetrySet,
    TransformedPolicy,
};

/// Values closer than this are treated as tied when ranking.
pub const RANK_RESOLUTION: f64 = 1e-9;

/// Per-candidate diagnostics kept in the discovery manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub index: usize,
    pub map: SymmetryMap,
    /// Objective the candidate was ranked by: mean J(φ(π)) or achieved XP.
    pub value: f64,
    /// Same objective under the soft distribution, when one was learned.
    pub soft_value: Option<f64>,
    pub er_gap: f64,
    pub max_gap: f64,
    /// Mean over the pool of the summed total-variation distance between the
    /// rows of π and φ(π).
    pub displacement: f64,
    /// Action and observation labels the map moves, over all agents.
    pub moved_points: usize,
}

fn quantize(x: f64) -> i64 {
    (x / RANK_RESOLUTION).round() as i64
}

/// Higher value first. Among tied values, maps that move the pool further
/// come first, then maps touching fewer labels, then canonical map order.
pub(crate) fn by_value_desc(a: &CandidateRecord, b: &CandidateRecord) -> Ordering {
    quantize(b.value)
        .cmp(&quantize(a.value))
        .then_with(|| quantize(b.displacement).cmp(&quantize(a.displacement)))
        .then_with(|| a.moved_points.cmp(&b.moved_points))
        .then_with(|| a.map.cmp(&b.map))
}

pub fn moved_points(phi: &SymmetryMap) -> usize {
    let count = |p: &Permutation| p.0.iter().enumerate().filter(|(i, &x)| *i != x).count();
    phi.actions.iter().chain(&phi.observations).map(count).sum()
}

/// See [`CandidateRecord::displacement`].
pub fn displacement(phi: &SymmetryMap, pool: &[TabularJointPolicy<f64>]) -> Result<f64> {
    require_pool(pool)?;
    let mut total = 0.0;
    for pi in pool {
        let moved = TransformedPolicy::new(pi as &dyn PolicySource<f64>, phi);
        for (agent, table) in pi.agents.iter().enumerate() {
            for (aoh, row) in table {
                let other = moved.row(agent, aoh)?;
                total += 0.5 * row.iter().zip(other.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>();
            }
        }
    }
    Ok(total / pool.len() as f64)
}

fn require_pool(pool: &[TabularJointPolicy<f64>]) -> Result<()> {
    if pool.is_empty() {
        return Err(Error::Config("discovery needs a nonempty policy pool".into()));
    }
    Ok(())
}

/// Mean over the pool of |J(π) − J(φ(π))|.
pub fn er_gap(model: &TabularDecPomdp<f64>, phi: &SymmetryMap, pool: &[TabularJointPolicy<f64>]) -> Result<f64> {
    require_pool(pool)?;
    let gaps = return_gaps(model, phi, pool)?;
    Ok(gaps.iter().sum::<f64>() / gaps.len() as f64)
}

/// Mean over the pool of J(φ(π)).
pub fn transformed_return(
    model: &TabularDecPomdp<f64>,
    phi: &SymmetryMap,
    pool: &[TabularJointPolicy<f64>],
) -> Result<f64> {
    require_pool(pool)?;
    let mut total = 0.0;
    for pi in pool {
        total += exact_expected_return(model, &TransformedPolicy::new(pi as &dyn PolicySource<f64>, phi))?;
    }
    Ok(total / pool.len() as f64)
}

pub(crate) fn record(
    model: &TabularDecPomdp<f64>,
    index: usize,
    map: SymmetryMap,
    value: f64,
    soft_value: Option<f64>,
    pool: &[TabularJointPolicy<f64>],
) -> Result<CandidateRecord> {
    let gaps = return_gaps(model, &map, pool)?;
    let er_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let max_gap = gaps.iter().cloned().fold(0.0, f64::max);
    let displacement = displacement(&map, pool)?;
    let moved_points = moved_points(&map);
    Ok(CandidateRecord { index, map, value, soft_value, er_gap, max_gap, displacement, moved_points })
}

/// Warnings about a pool that is a poor stand-in for the optimal ε-soft set.
pub fn pool_warnings(model: &TabularDecPomdp<f64>, pool: &[TabularJointPolicy<f64>]) -> Result<Vec<String>> {
    let js: Vec<f64> = pool.iter().map(|pi| exact_expected_return(model, pi)).collect::<Result<_>>()?;
    let n = js.len() as f64;
    let mean = js.iter().sum::<f64>() / n;
    let var = js.iter().map(|j| (j - mean).powi(2)).sum::<f64>() / n;
    let mut out = Vec::new();
    if var > 0.05 * mean.abs() {
        out.push(format!("degenerate pool: return variance {var:.4} exceeds 5% of the mean {mean:.4}"));
    }
    Ok(out)
}

fn emit(warnings: &[String]) {
    for w in warnings {
        warn!("{w}");
    }
}

/// Outcome of one discovery run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discovery {
    pub set: SymmetrySet,
    /// Every evaluated candidate, best first.
    pub candidates: Vec<CandidateRecord>,
    pub warnings: Vec<String>,
}

/// Scores every factored relabeling by mean J(φ(π)) over the pool and keeps
/// the best `l`.
pub fn search_exhaustive(
    model: &TabularDecPomdp<f64>,
    pool: &[TabularJointPolicy<f64>],
    l: usize,
    cap: u128,
) -> Result<Discovery> {
    require_pool(pool)?;
    let needed = candidate_count(model);
    if needed > cap {
        return Err(Error::BudgetExceeded { needed, budget: cap });
    }
    let observation_maps = observation_map_candidates(model);
    let mut maps = Vec::new();
    for actions in action_map_candidates(model) {
        for observations in &observation_maps {
            maps.push(SymmetryMap { actions: actions.clone(), observations: observations.clone() });
        }
    }
    let base: Vec<f64> = pool.iter().map(|pi| exact_expected_return(model, pi)).collect::<Result<_>>()?;
    let mut candidates: Vec<CandidateRecord> = maps
        .into_par_iter()
        .enumerate()
        .map(|(index, map)| {
            let moved = pool
                .iter()
                .map(|pi| exact_expected_return(model, &TransformedPolicy::new(pi as &dyn PolicySource<f64>, &map)))
                .collect::<Result<Vec<f64>>>()?;
            let n = moved.len() as f64;
            let gaps: Vec<f64> = base.iter().zip(&moved).map(|(a, b)| (a - b).abs()).collect();
            Ok(CandidateRecord {
                index,
                value: moved.iter().sum::<f64>() / n,
                soft_value: None,
                er_gap: gaps.iter().sum::<f64>() / n,
                max_gap: gaps.iter().cloned().fold(0.0, f64::max),
                displacement: displacement(&map, pool)?,
                moved_points: moved_points(&map),
                map,
            })
        })
        .collect::<Result<_>>()?;
    candidates.sort_by(by_value_desc);
    let mut warnings = pool_warnings(model, pool)?;
    let take = l.min(candidates.len());
    if l > 0 && candidates.len() > l && quantize(candidates[l - 1].value) == quantize(candidates[l].value) {
        warnings.push(format!(
            "candidate ranked {} ties with the last selected one at {:.6}",
            l + 1,
            candidates[l].value
        ));
    }
    if candidates.len() > 1 && quantize(candidates[0].value) == quantize(candidates[candidates.len() - 1].value) {
        warnings.push("degenerate pool: every candidate attains the same value".into());
    }
    emit(&warnings);
    let set = SymmetrySet::new(candidates[..take].iter().map(|c| c.map.clone()).collect());
    Ok(Discovery { set: SymmetrySet { closed: set.is_group(), ..set }, candidates, warnings })
}

/// Keeps the `l` candidates with the smallest mean return gap, ties broken
/// by canonical map order.
pub fn rank_and_select(
    model: &TabularDecPomdp<f64>,
    candidates: &SymmetrySet,
    pool: &[TabularJointPolicy<f64>],
    l: usize,
) -> Result<SymmetrySet> {
    if candidates.is_empty() {
        return Err(Error::Config("rank_and_select needs at least one candidate".into()));
    }
    if l == 0 {
        warn!("l = 0 selects nothing");
        return Ok(SymmetrySet { maps: Vec::new(), closed: false });
    }
    if l > candidates.len() {
        warn!("l = {l} exceeds the {} candidates; keeping all of them", candidates.len());
    }
    let mut scored: Vec<(f64, SymmetryMap)> = candidates
        .maps
        .par_iter()
        .map(|phi| Ok((er_gap(model, phi, pool)?, phi.clone())))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| quantize(a.0).cmp(&quantize(b.0)).then_with(|| a.1.cmp(&b.1)));
    scored.truncate(l);
    let set = SymmetrySet::new(scored.into_iter().map(|(_, m)| m).collect());
    Ok(SymmetrySet { closed: set.is_group(), ..set })
}
