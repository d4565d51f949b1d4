use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{cross_play, exact_expected_return};
use crate::model::TabularDecPomdp;
use crate::policy::TabularJointPolicy;
use crate::symmetry::{op_objective, symmetrize, OrbitMode, SymmetrySet};

/// Summary of the off-diagonal entries over unordered pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XpStats {
    pub mean: f64,
    pub median: f64,
    pub std_error: f64,
    pub pairs: usize,
}

impl XpStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / n;
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 { 0.5 * (sorted[mid - 1] + sorted[mid]) } else { sorted[mid] };
        let std_error = if sorted.len() > 1 {
            let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Some(XpStats { mean, median, std_error, pairs: sorted.len() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XpMatrix {
    /// `values[i][j]` = XP(π_i, π_j); the diagonal holds J(π_i).
    pub values: Vec<Vec<f64>>,
    /// None with fewer than two policies.
    pub stats: Option<XpStats>,
}

impl XpMatrix {
    pub fn off_diagonal(&self) -> Vec<f64> {
        let n = self.values.len();
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| self.values[i][j]).collect()
    }
}

/// Exact pairwise cross-play. Only the upper triangle is evaluated; the lower
/// one is its mirror image.
pub fn xp_matrix(model: &TabularDecPomdp<f64>, policies: &[TabularJointPolicy<f64>]) -> Result<XpMatrix> {
    let n = policies.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let entries: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            if i == j {
                exact_expected_return(model, &policies[i])
            } else {
                cross_play(model, &policies[i], &policies[j])
            }
        })
        .collect::<Result<_>>()?;
    let mut values = vec![vec![0.0; n]; n];
    for (&(i, j), v) in pairs.iter().zip(entries) {
        values[i][j] = v;
        values[j][i] = v;
    }
    let mut out = XpMatrix { values, stats: None };
    out.stats = XpStats::from_values(&out.off_diagonal());
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizedComparison {
    pub before: Option<XpStats>,
    pub after: Option<XpStats>,
    /// Fewer than two policies, so there is no cross-play to compare.
    pub degenerate: bool,
}

/// Cross-play statistics before and after symmetrizing every policy over the
/// closed set.
pub fn symmetrized_comparison(
    model: &TabularDecPomdp<f64>,
    policies: &[TabularJointPolicy<f64>],
    set: &SymmetrySet,
    closure_cap: usize,
) -> Result<SymmetrizedComparison> {
    let closed = close(set, closure_cap)?;
    let moved: Vec<_> = policies.par_iter().map(|pi| symmetrize(model, &closed, pi)).collect::<Result<_>>()?;
    let before = xp_matrix(model, policies)?.stats;
    let after = xp_matrix(model, &moved)?.stats;
    Ok(SymmetrizedComparison { degenerate: before.is_none(), before, after })
}

pub(crate) fn close(set: &SymmetrySet, cap: usize) -> Result<SymmetrySet> {
    if set.is_empty() {
        return Err(Error::Config("symmetry set is empty".into()));
    }
    if set.closed {
        Ok(set.clone())
    } else {
        crate::symmetry::group_closure(set, cap)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpGapRow {
    pub index: usize,
    pub self_play: f64,
    pub other_play: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpGapReport {
    pub rows: Vec<OpGapRow>,
    pub best_other_play: f64,
    /// Mean off-diagonal cross-play, or the single policy's return.
    pub population_xp: f64,
    /// best_other_play − population_xp; positive when optimal other-play
    /// policies still break symmetry against each other.
    pub gap: f64,
}

pub fn op_gap_report(
    model: &TabularDecPomdp<f64>,
    policies: &[TabularJointPolicy<f64>],
    set: &SymmetrySet,
    mode: OrbitMode,
) -> Result<OpGapReport> {
    if policies.is_empty() {
        return Err(Error::Config("op_gap_report needs at least one policy".into()));
    }
    let rows: Vec<OpGapRow> = policies
        .par_iter()
        .enumerate()
        .map(|(index, pi)| {
            Ok(OpGapRow {
                index,
                self_play: exact_expected_return(model, pi)?,
                other_play: op_objective(model, set, pi, mode)?,
            })
        })
        .collect::<Result<_>>()?;
    let best_other_play = rows.iter().map(|r| r.other_play).fold(f64::NEG_INFINITY, f64::max);
    let xp = xp_matrix(model, policies)?;
    let population_xp = xp.stats.map(|s| s.mean).unwrap_or(xp.values[0][0]);
    Ok(OpGapReport { rows, best_other_play, population_xp, gap: best_other_play - population_xp })
}

/// Equal-width histogram over `[lo, hi]`; values outside are clamped into the
/// end bins.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<(f64, f64, usize)> {
    let bins = bins.max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts.into_iter().enumerate().map(|(b, c)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, c)).collect()
}
