use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TabularDecPomdp;
use crate::symmetry::{factorial, legal_action_permutations, Permutation, SymmetryMap};

/// Largest candidate list a single factor may hold.
pub const DEFAULT_CANDIDATE_CAP: usize = 5040;

/// A categorical distribution over a list of permutations, parameterized by
/// logits and read through a Boltzmann temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub candidates: Vec<Permutation>,
    pub logits: Vec<f64>,
}

impl Factor {
    pub fn new(candidates: Vec<Permutation>) -> Self {
        let logits = vec![0.0; candidates.len()];
        Factor { candidates, logits }
    }

    pub fn fixed(p: Permutation) -> Self {
        Factor::new(vec![p])
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn probs(&self, temperature: f64) -> Vec<f64> {
        let max = self.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = self.logits.iter().map(|l| ((l - max) / temperature).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }

    pub fn sample(&self, temperature: f64, rng: &mut ChaCha8Rng) -> usize {
        if self.len() == 1 {
            return 0;
        }
        let p = self.probs(temperature);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, pk) in p.iter().enumerate() {
            acc += pk;
            if u < acc {
                return k;
            }
        }
        p.len() - 1
    }

    /// Index of the largest logit, lowest index on ties.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for k in 1..self.len() {
            if self.logits[k] > self.logits[best] {
                best = k;
            }
        }
        best
    }

    /// ∂ log p_k / ∂θ = (e_k − p) / T.
    pub fn score(&self, k: usize, temperature: f64) -> Vec<f64> {
        let mut g: Vec<f64> = self.probs(temperature).into_iter().map(|p| -p / temperature).collect();
        g[k] += 1.0 / temperature;
        g
    }

    /// Expected permutation matrix Σ_k p_k M_k, with (M_k)[σ(o)][o] = 1.
    pub fn soft_matrix(&self, temperature: f64) -> Vec<Vec<f64>> {
        let n = self.candidates[0].len();
        let mut m = vec![vec![0.0; n]; n];
        for (perm, p) in self.candidates.iter().zip(self.probs(temperature)) {
            for o in 0..n {
                m[perm.apply(o)][o] += p;
            }
        }
        m
    }
}

fn check_cap(size: u128, cap: usize) -> Result<()> {
    if size > cap as u128 {
        return Err(Error::BudgetExceeded { needed: size, budget: cap as u128 });
    }
    Ok(())
}

/// Indices into each factor's candidate list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Choice {
    pub actions: Vec<usize>,
    pub observations: Vec<usize>,
}

/// Distribution over relabelings: one factor per agent, or a single factor
/// applied to every agent when the model shares its symmetries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftSymmetry {
    pub num_agents: usize,
    pub shared: bool,
    pub actions: Vec<Factor>,
    pub observations: Vec<Factor>,
}

impl SoftSymmetry {
    fn observation_factors(model: &TabularDecPomdp<f64>, cap: usize) -> Result<Vec<Factor>> {
        let agents: Vec<usize> = if model.shared_symmetries { vec![0] } else { (0..model.num_agents()).collect() };
        agents
            .into_iter()
            .map(|i| {
                let n = model.num_observations(i);
                check_cap(factorial(n), cap)?;
                Ok(Factor::new(Permutation::all(n)))
            })
            .collect()
    }

    /// Fixed action map, learnable observation logits.
    pub fn with_fixed_actions(model: &TabularDecPomdp<f64>, actions: &[Permutation], cap: usize) -> Result<Self> {
        let shared = model.shared_symmetries;
        let actions = if shared {
            vec![Factor::fixed(actions[0].clone())]
        } else {
            actions.iter().cloned().map(Factor::fixed).collect()
        };
        Ok(SoftSymmetry {
            num_agents: model.num_agents(),
            shared,
            actions,
            observations: Self::observation_factors(model, cap)?,
        })
    }

    /// Learnable logits over every legal action permutation and every
    /// observation permutation.
    pub fn with_learned_actions(model: &TabularDecPomdp<f64>, cap: usize) -> Result<Self> {
        let shared = model.shared_symmetries;
        let agents: Vec<usize> = if shared { vec![0] } else { (0..model.num_agents()).collect() };
        let mut actions = Vec::new();
        for i in agents {
            let mut perms = legal_action_permutations(model, i);
            if shared {
                perms.retain(|p| {
                    (1..model.num_agents()).all(|j| {
                        p.len() == model.num_actions(j) && (0..model.horizon.max(1)).all(|t| p.preserves(&model.legal(j, t)))
                    })
                });
            }
            check_cap(perms.len() as u128, cap)?;
            actions.push(Factor::new(perms));
        }
        Ok(SoftSymmetry {
            num_agents: model.num_agents(),
            shared,
            actions,
            observations: Self::observation_factors(model, cap)?,
        })
    }

    pub fn factors(&self) -> impl Iterator<Item = &Factor> {
        self.actions.iter().chain(self.observations.iter())
    }

    fn factors_mut(&mut self) -> impl Iterator<Item = &mut Factor> {
        self.actions.iter_mut().chain(self.observations.iter_mut())
    }

    pub fn sample(&self, temperature: f64, rng: &mut ChaCha8Rng) -> Choice {
        Choice {
            actions: self.actions.iter().map(|f| f.sample(temperature, rng)).collect(),
            observations: self.observations.iter().map(|f| f.sample(temperature, rng)).collect(),
        }
    }

    pub fn mode(&self) -> Choice {
        Choice {
            actions: self.actions.iter().map(Factor::mode).collect(),
            observations: self.observations.iter().map(Factor::mode).collect(),
        }
    }

    pub fn map(&self, choice: &Choice) -> SymmetryMap {
        let pick = |factors: &[Factor], idx: &[usize], agent: usize| {
            let f = if self.shared { 0 } else { agent };
            factors[f].candidates[idx[f]].clone()
        };
        SymmetryMap {
            actions: (0..self.num_agents).map(|i| pick(&self.actions, &choice.actions, i)).collect(),
            observations: (0..self.num_agents).map(|i| pick(&self.observations, &choice.observations, i)).collect(),
        }
    }

    /// Hardened relabeling: the modal candidate of every factor.
    pub fn harden(&self) -> SymmetryMap {
        self.map(&self.mode())
    }

    pub fn probability(&self, choice: &Choice, temperature: f64) -> f64 {
        let a: f64 = self.actions.iter().zip(&choice.actions).map(|(f, &k)| f.probs(temperature)[k]).product();
        let o: f64 =
            self.observations.iter().zip(&choice.observations).map(|(f, &k)| f.probs(temperature)[k]).product();
        a * o
    }

    /// Every choice whose probability is at least `floor`, with its
    /// probability.
    pub fn support(&self, temperature: f64, floor: f64) -> Vec<(Choice, f64)> {
        let probs: Vec<Vec<f64>> = self.factors().map(|f| f.probs(temperature)).collect();
        let mut out = Vec::new();
        let mut idx = Vec::with_capacity(probs.len());
        fn rec(probs: &[Vec<f64>], idx: &mut Vec<usize>, p: f64, floor: f64, out: &mut Vec<(Vec<usize>, f64)>) {
            if idx.len() == probs.len() {
                out.push((idx.clone(), p));
                return;
            }
            for (k, &pk) in probs[idx.len()].iter().enumerate() {
                if p * pk >= floor {
                    idx.push(k);
                    rec(probs, idx, p * pk, floor, out);
                    idx.pop();
                }
            }
        }
        let mut flat = Vec::new();
        rec(&probs, &mut idx, 1.0, floor, &mut flat);
        let na = self.actions.len();
        for (v, p) in flat {
            out.push((Choice { actions: v[..na].to_vec(), observations: v[na..].to_vec() }, p));
        }
        out
    }

    /// Adds `step` times the log-probability gradient of `choice`.
    pub fn reinforce(&mut self, choice: &Choice, temperature: f64, step: f64) {
        let picks: Vec<usize> = choice.actions.iter().chain(&choice.observations).copied().collect();
        for (f, k) in self.factors_mut().zip(picks) {
            if f.len() == 1 {
                continue;
            }
            let g = f.score(k, temperature);
            for (l, gi) in f.logits.iter_mut().zip(g) {
                *l += step * gi;
            }
        }
    }

    /// Invertibility penalty averaged over the observation factors.
    pub fn invertibility_penalty(&self, temperature: f64) -> f64 {
        let n = self.observations.len() as f64;
        self.observations.iter().map(|f| penalty(&f.soft_matrix(temperature))).sum::<f64>() / n
    }

    /// Gradient of [`Self::invertibility_penalty`] with respect to each
    /// observation factor's logits.
    pub fn invertibility_gradient(&self, temperature: f64) -> Vec<Vec<f64>> {
        let n = self.observations.len() as f64;
        self.observations
            .iter()
            .map(|f| factor_penalty_gradient(f, temperature).into_iter().map(|g| g / n).collect())
            .collect()
    }

    pub fn descend_penalty(&mut self, temperature: f64, step: f64) {
        let grads = self.invertibility_gradient(temperature);
        for (f, g) in self.observations.iter_mut().zip(grads) {
            for (l, gi) in f.logits.iter_mut().zip(g) {
                *l -= step * gi;
            }
        }
    }

    pub fn logits_finite(&self) -> bool {
        self.factors().all(|f| f.logits.iter().all(|l| l.is_finite()))
    }
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn mat_t_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let n = m.len();
    (0..n).map(|j| (0..n).map(|i| m[i][j] * v[i]).sum()).collect()
}

/// Residual e_o − P²e_o for every o.
fn residuals(m: &[Vec<f64>]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = m.len();
    (0..n)
        .map(|o| {
            let mut e = vec![0.0; n];
            e[o] = 1.0;
            let pe = mat_vec(m, &e);
            let ppe = mat_vec(m, &pe);
            let v: Vec<f64> = e.iter().zip(&ppe).map(|(a, b)| a - b).collect();
            (v, pe)
        })
        .collect()
}

/// Mean over o of d(o)², d(o) = ‖e_o − P²e_o‖².
pub fn penalty(m: &[Vec<f64>]) -> f64 {
    let n = m.len() as f64;
    residuals(m)
        .iter()
        .map(|(v, _)| {
            let d: f64 = v.iter().map(|x| x * x).sum();
            d * d
        })
        .sum::<f64>()
        / n
}

fn factor_penalty_gradient(f: &Factor, temperature: f64) -> Vec<f64> {
    let m = f.soft_matrix(temperature);
    let n = m.len();
    // dPen/dP
    let mut g = vec![vec![0.0; n]; n];
    for (o, (v, pe)) in residuals(&m).into_iter().enumerate() {
        let d: f64 = v.iter().map(|x| x * x).sum();
        let ptv = mat_t_vec(&m, &v);
        for i in 0..n {
            for j in 0..n {
                let dd = -2.0 * (v[i] * pe[j] + if j == o { ptv[i] } else { 0.0 });
                g[i][j] += 2.0 * d * dd / n as f64;
            }
        }
    }
    let p = f.probs(temperature);
    let dp: Vec<f64> = f
        .candidates
        .iter()
        .map(|perm| (0..n).map(|o| g[perm.apply(o)][o]).sum())
        .collect();
    let dot: f64 = p.iter().zip(&dp).map(|(a, b)| a * b).sum();
    p.iter().zip(&dp).map(|(pk, gk)| pk * (gk - dot) / temperature).collect()
}
