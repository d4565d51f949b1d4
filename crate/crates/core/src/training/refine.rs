use crate::error::Result;
use crate::eval::exact_expected_return;
use crate::model::TabularDecPomdp;
use crate::policy::{epsilon_soften, TabularJointPolicy};
use crate::symmetry::{op_objective, OrbitMode, SymmetrySet};

/// Coordinate ascent on the ε-softened return: every decision row of a
/// deterministic policy is switched to the legal action that maximizes
/// J(soften(π)), sweeping agents and histories in canonical order until a
/// sweep changes nothing or `max_sweeps` is reached.
///
/// Returns the improved deterministic policy and the number of sweeps used.
pub fn refine_soft_best_response(
    model: &TabularDecPomdp<f64>,
    policy: &TabularJointPolicy<f64>,
    epsilon: f64,
    max_sweeps: usize,
) -> Result<(TabularJointPolicy<f64>, usize)> {
    coordinate_ascent(model, policy, max_sweeps, |p| exact_expected_return(model, &epsilon_soften(model, p, epsilon)?))
}

/// [`refine_soft_best_response`] with the other-play objective over `set` in
/// place of J.
pub fn refine_other_play(
    model: &TabularDecPomdp<f64>,
    set: &SymmetrySet,
    policy: &TabularJointPolicy<f64>,
    epsilon: f64,
    max_sweeps: usize,
    mode: OrbitMode,
) -> Result<(TabularJointPolicy<f64>, usize)> {
    coordinate_ascent(model, policy, max_sweeps, |p| op_objective(model, set, &epsilon_soften(model, p, epsilon)?, mode))
}

fn coordinate_ascent<F>(
    model: &TabularDecPomdp<f64>,
    policy: &TabularJointPolicy<f64>,
    max_sweeps: usize,
    value: F,
) -> Result<(TabularJointPolicy<f64>, usize)>
where
    F: Fn(&TabularJointPolicy<f64>) -> Result<f64>,
{
    let mut pi = policy.clone();
    let mut current = value(&pi)?;
    for sweep in 0..max_sweeps {
        let mut changed = false;
        for agent in 0..pi.num_agents() {
            let keys: Vec<_> = pi.agents[agent].keys().cloned().collect();
            for aoh in keys {
                let legal = model.legal(agent, aoh.len());
                if legal.len() < 2 {
                    continue;
                }
                let original = pi.agents[agent][&aoh].clone();
                let mut best = (current, original.clone());
                for &a in &legal {
                    let mut row = vec![0.0; original.len()];
                    row[a] = 1.0;
                    if row == original {
                        continue;
                    }
                    pi.agents[agent].insert(aoh.clone(), row.clone());
                    let v = value(&pi)?;
                    // strict improvement beyond rounding keeps conventions stable
                    if v > best.0 + 1e-12 {
                        best = (v, row);
                    }
                }
                if best.1 != original {
                    changed = true;
                }
                current = best.0;
                pi.agents[agent].insert(aoh, best.1);
            }
        }
        if !changed {
            return Ok((pi, sweep + 1));
        }
    }
    Ok((pi, max_sweeps))
}
