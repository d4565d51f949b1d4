//! Bundled environments: the repeated lever game, the cat/dog signalling game,
//! and one-shot matrix games.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgentSpec, TabularDecPomdp};
use crate::scalar::Scalar;

/// Names accepted by [`make_env`].
pub const ENV_NAMES: [&str; 4] = ["lever3", "lever2", "catdog", "matrix"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeverGameConfig {
    pub num_levers: usize,
    pub rounds: usize,
}

impl Default for LeverGameConfig {
    fn default() -> Self {
        LeverGameConfig { num_levers: 3, rounds: 2 }
    }
}

/// Two agents pull one of `num_levers` levers each round, score 1 when they
/// match and observe the partner's lever afterwards.
pub fn make_lever_game<S: Scalar>(cfg: &LeverGameConfig) -> TabularDecPomdp<S> {
    let n = cfg.num_levers;
    let labels: Vec<String> = (0..n).map(|i| format!("lever{i}")).collect();
    let spec = AgentSpec {
        actions: labels.clone(),
        observations: labels,
        legal_actions: None,
    };
    let n_joint = n * n;
    let transition = vec![vec![vec![S::one()]; n_joint]];
    let mut reward = vec![vec![S::zero(); n_joint]];
    let mut observation = vec![vec![vec![vec![S::zero(); n]; n_joint]]; 2];
    for a0 in 0..n {
        for a1 in 0..n {
            let ja = a0 * n + a1;
            if a0 == a1 {
                reward[0][ja] = S::one();
            }
            observation[0][0][ja][a1] = S::one();
            observation[1][0][ja][a0] = S::one();
        }
    }
    TabularDecPomdp {
        name: format!("lever{n}"),
        states: vec!["s".into()],
        agents: vec![spec.clone(), spec],
        transition,
        observation,
        initial_observation: vec![None, None],
        reward,
        horizon: cfg.rounds,
        gamma: S::one(),
        initial: vec![S::one()],
        terminal: vec![false],
        shared_symmetries: true,
    }
}

/// Reward constants of the cat/dog game.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CatDogConfig;

impl CatDogConfig {
    /// Hundredths, so that rational models stay exact.
    pub const LIGHT_ON: (i64, i64) = (1, 100);
    pub const LIGHT_OFF: (i64, i64) = (0, 1);
    pub const ALICE_BAIL: (i64, i64) = (1, 1);
    pub const BARRIER_COST: (i64, i64) = (5, 1);
    pub const BOB_BAIL: (i64, i64) = (1, 2);
    pub const CAT_CORRECT: (i64, i64) = (10, 1);
    pub const DOG_CORRECT: (i64, i64) = (11, 1);
    pub const WRONG: (i64, i64) = (-10, 1);
}

pub mod catdog {
    //! Index constants for the cat/dog model.
    pub const ALICE: usize = 0;
    pub const BOB: usize = 1;

    pub const S_ALICE_CAT: usize = 0;
    pub const S_ALICE_DOG: usize = 1;
    pub const S_BOB_CAT: usize = 2;
    pub const S_BOB_DOG: usize = 3;
    pub const S_END_CAT: usize = 4;
    pub const S_END_DOG: usize = 5;

    pub const A_LIGHT_ON: usize = 0;
    pub const A_LIGHT_OFF: usize = 1;
    pub const A_BAIL: usize = 2;
    pub const A_BARRIER: usize = 3;
    pub const A_NOOP: usize = 4;

    pub const B_BAIL: usize = 0;
    pub const B_GUESS_CAT: usize = 1;
    pub const B_GUESS_DOG: usize = 2;
    pub const B_NOOP: usize = 3;

    pub const O_CAT: usize = 0;
    pub const O_DOG: usize = 1;

    pub const O_LIGHT_ON: usize = 0;
    pub const O_LIGHT_OFF: usize = 1;
    pub const O_CAT_REVEALED: usize = 2;
    pub const O_DOG_REVEALED: usize = 3;
}

/// Alice sees the pet and may signal with the light, bail, or pay to remove
/// the barrier; Bob then bails or guesses. Realized as two simultaneous-move
/// steps in which the idle agent has only a no-op.
pub fn make_cat_dog<S: Scalar>() -> TabularDecPomdp<S> {
    use catdog::*;
    let r = |(n, d): (i64, i64)| S::from_ratio(n, d);
    let alice = AgentSpec {
        actions: ["light_on", "light_off", "bail", "remove_barrier", "noop"]
            .map(String::from)
            .to_vec(),
        observations: vec!["cat".into(), "dog".into()],
        legal_actions: Some(vec![vec![0, 1, 2, 3], vec![A_NOOP]]),
    };
    let bob = AgentSpec {
        actions: ["bail", "guess_cat", "guess_dog", "noop"].map(String::from).to_vec(),
        observations: ["light_on", "light_off", "cat_revealed", "dog_revealed"]
            .map(String::from)
            .to_vec(),
        legal_actions: Some(vec![vec![B_NOOP], vec![B_BAIL, B_GUESS_CAT, B_GUESS_DOG]]),
    };
    let n_states = 6;
    let (na, nb) = (alice.actions.len(), bob.actions.len());
    let n_joint = na * nb;
    let pet_of = |s: usize| s % 2;

    let mut transition = vec![vec![vec![S::zero(); n_states]; n_joint]; n_states];
    let mut reward = vec![vec![S::zero(); n_joint]; n_states];
    let mut obs_alice = vec![vec![vec![S::zero(); 2]; n_joint]; n_states];
    let mut obs_bob = vec![vec![vec![S::zero(); 4]; n_joint]; n_states];

    for s in 0..n_states {
        let pet = pet_of(s);
        for a in 0..na {
            for b in 0..nb {
                let ja = a * nb + b;
                let next = match s {
                    S_ALICE_CAT | S_ALICE_DOG if a == A_BAIL => S_END_CAT + pet,
                    S_ALICE_CAT | S_ALICE_DOG => S_BOB_CAT + pet,
                    _ => S_END_CAT + pet,
                };
                transition[s][ja][next] = S::one();

                // observation tables are indexed by the state entered
                obs_alice[s][ja][pet] = S::one();
                let bob_obs = match (s, a) {
                    (S_BOB_CAT | S_BOB_DOG, A_LIGHT_ON) => O_LIGHT_ON,
                    (S_BOB_CAT | S_BOB_DOG, A_BARRIER) => O_CAT_REVEALED + pet,
                    _ => O_LIGHT_OFF,
                };
                obs_bob[s][ja][bob_obs] = S::one();
            }
        }
    }
    for s_next in 0..n_states {
        let pet = pet_of(s_next);
        let into_bob = s_next == S_BOB_CAT || s_next == S_BOB_DOG;
        let into_end = s_next == S_END_CAT || s_next == S_END_DOG;
        for a in 0..na {
            for b in 0..nb {
                let ja = a * nb + b;
                let mut total = S::zero();
                if into_bob {
                    match a {
                        A_LIGHT_ON => total = total + r(CatDogConfig::LIGHT_ON),
                        A_LIGHT_OFF => total = total + r(CatDogConfig::LIGHT_OFF),
                        A_BARRIER => total = total - r(CatDogConfig::BARRIER_COST),
                        _ => {}
                    }
                }
                if into_end {
                    if a == A_BAIL {
                        total = total + r(CatDogConfig::ALICE_BAIL);
                    }
                    let correct = if pet == O_CAT { CatDogConfig::CAT_CORRECT } else { CatDogConfig::DOG_CORRECT };
                    match b {
                        B_BAIL => total = total + r(CatDogConfig::BOB_BAIL),
                        B_GUESS_CAT | B_GUESS_DOG if b - B_GUESS_CAT == pet => total = total + r(correct),
                        B_GUESS_CAT | B_GUESS_DOG => total = total + r(CatDogConfig::WRONG),
                        _ => {}
                    }
                }
                reward[s_next][ja] = total;
            }
        }
    }

    let mut initial_alice = vec![vec![S::zero(); 2]; n_states];
    for (s, row) in initial_alice.iter_mut().enumerate() {
        row[pet_of(s)] = S::one();
    }
    let half = S::from_ratio(1, 2);
    TabularDecPomdp {
        name: "catdog".into(),
        states: ["alice_cat", "alice_dog", "bob_cat", "bob_dog", "end_cat", "end_dog"]
            .map(String::from)
            .to_vec(),
        agents: vec![alice, bob],
        transition,
        observation: vec![obs_alice, obs_bob],
        initial_observation: vec![Some(initial_alice), None],
        reward,
        horizon: 2,
        gamma: S::one(),
        initial: vec![half.clone(), half, S::zero(), S::zero(), S::zero(), S::zero()],
        terminal: vec![false, false, false, false, true, true],
        shared_symmetries: false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixGameConfig {
    pub actions: Vec<String>,
    pub payoff: Vec<Vec<f64>>,
}

impl Default for MatrixGameConfig {
    /// Handshake or fist bump: matching scores 1, mismatching -1.
    fn default() -> Self {
        MatrixGameConfig {
            actions: vec!["handshake".into(), "fist_bump".into()],
            payoff: vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
        }
    }
}

/// One-shot game with a single state and an uninformative observation.
pub fn make_matrix_game<S: Scalar>(cfg: &MatrixGameConfig) -> Result<TabularDecPomdp<S>> {
    let n = cfg.actions.len();
    if n == 0 || cfg.payoff.len() != n || cfg.payoff.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidModel(format!(
            "payoff matrix must be {n}x{n} to match the action labels"
        )));
    }
    if cfg.payoff.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidModel("payoff entries must be finite".into()));
    }
    let spec = AgentSpec {
        actions: cfg.actions.clone(),
        observations: vec!["none".into()],
        legal_actions: None,
    };
    let n_joint = n * n;
    let reward = vec![cfg.payoff.iter().flatten().map(|&x| S::from_f64_lossy(x)).collect()];
    Ok(TabularDecPomdp {
        name: "matrix".into(),
        states: vec!["s".into()],
        agents: vec![spec.clone(), spec],
        transition: vec![vec![vec![S::one()]; n_joint]],
        observation: vec![vec![vec![vec![S::one()]; n_joint]]; 2],
        initial_observation: vec![None, None],
        reward,
        horizon: 1,
        gamma: S::one(),
        initial: vec![S::one()],
        terminal: vec![false],
        shared_symmetries: false,
    })
}

/// Builds a bundled environment by name.
pub fn make_env<S: Scalar>(name: &str) -> Result<TabularDecPomdp<S>> {
    match name {
        "lever3" => Ok(make_lever_game(&LeverGameConfig::default())),
        "lever2" => Ok(make_lever_game(&LeverGameConfig { num_levers: 2, rounds: 2 })),
        "catdog" => Ok(make_cat_dog()),
        "matrix" => make_matrix_game(&MatrixGameConfig::default()),
        other => Err(Error::Config(format!(
            "unknown environment `{other}`, expected one of {}",
            ENV_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::catdog::*;
    use super::*;
    use crate::eval::{cross_play, exact_expected_return};
    use crate::model::validate_model;
    use crate::policy::TabularJointPolicy;
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::from_ratio(n, d)
    }

    /// Hand-coded game rules: `alice[pet]` is her first move, `bob[obs]` his
    /// answer to what he sees.
    fn catdog_oracle(alice: [usize; 2], bob: [usize; 4]) -> Q {
        let mut total = q(0, 1);
        for pet in 0..2 {
            let value = match alice[pet] {
                A_BAIL => q(1, 1),
                a => {
                    let (cost, seen) = match a {
                        A_LIGHT_ON => (q(1, 100), O_LIGHT_ON),
                        A_LIGHT_OFF => (q(0, 1), O_LIGHT_OFF),
                        _ => (q(-5, 1), O_CAT_REVEALED + pet),
                    };
                    let guess = match bob[seen] {
                        B_BAIL => q(1, 2),
                        g if g - B_GUESS_CAT == pet => if pet == 0 { q(10, 1) } else { q(11, 1) },
                        _ => q(-10, 1),
                    };
                    cost + guess
                }
            };
            total += value * q(1, 2);
        }
        total
    }

    pub(crate) fn catdog_policy<S: Scalar>(
        m: &TabularDecPomdp<S>,
        alice: [usize; 2],
        bob: [usize; 4],
    ) -> TabularJointPolicy<S> {
        TabularJointPolicy::deterministic(m, |agent, aoh| {
            if agent == ALICE {
                alice[aoh.initial.unwrap() as usize]
            } else {
                bob[aoh.steps[0].1 as usize]
            }
        })
    }

    /// Light on for cat, off for dog; Bob reads it accordingly.
    pub(crate) const CHEAP_TALK_A: ([usize; 2], [usize; 4]) =
        ([A_LIGHT_ON, A_LIGHT_OFF], [B_GUESS_CAT, B_GUESS_DOG, B_GUESS_CAT, B_GUESS_DOG]);
    /// The opposite light encoding.
    pub(crate) const CHEAP_TALK_B: ([usize; 2], [usize; 4]) =
        ([A_LIGHT_OFF, A_LIGHT_ON], [B_GUESS_DOG, B_GUESS_CAT, B_GUESS_CAT, B_GUESS_DOG]);
    /// Barrier removal with correct guesses.
    pub(crate) const GROUNDED: ([usize; 2], [usize; 4]) =
        ([A_BARRIER, A_BARRIER], [B_GUESS_CAT, B_GUESS_CAT, B_GUESS_CAT, B_GUESS_DOG]);

    #[test]
    fn bundled_models_are_valid() {
        for name in ENV_NAMES {
            let m: TabularDecPomdp<Q> = make_env(name).unwrap();
            assert!(validate_model(&m).is_valid(), "{name}: {:?}", validate_model(&m));
        }
        assert!(make_env::<f64>("hanabi").is_err());
    }

    #[test]
    fn lever_observation_is_partner_action() {
        let m: TabularDecPomdp<f64> = make_lever_game(&LeverGameConfig::default());
        for a0 in 0..3 {
            for a1 in 0..3 {
                let ja = m.joint_index(&[a0, a1]);
                assert_eq!(m.observation[0][0][ja][a1], 1.0);
                assert_eq!(m.observation[1][0][ja][a0], 1.0);
                assert_eq!(m.reward[0][ja], if a0 == a1 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn catdog_bail_is_absorbing() {
        let m: TabularDecPomdp<Q> = make_cat_dog();
        for s in [S_END_CAT, S_END_DOG] {
            assert!(m.terminal[s]);
            for ja in 0..m.num_joint_actions() {
                assert_eq!(m.transition[s][ja][s], q(1, 1));
            }
        }
        let bail = m.joint_index(&[A_BAIL, B_NOOP]);
        assert_eq!(m.transition[S_ALICE_DOG][bail][S_END_DOG], q(1, 1));
    }

    #[test]
    fn catdog_matches_oracle_on_all_deterministic_policies() {
        let m: TabularDecPomdp<Q> = make_cat_dog();
        let alice_moves = [A_LIGHT_ON, A_LIGHT_OFF, A_BAIL, A_BARRIER];
        let bob_moves = [B_BAIL, B_GUESS_CAT, B_GUESS_DOG];
        let mut best = None::<Q>;
        let mut count = 0;
        for &x in &alice_moves {
            for &y in &alice_moves {
                for code in 0..81 {
                    let bob = [0, 1, 2, 3].map(|k| bob_moves[(code / 3usize.pow(k)) % 3]);
                    let oracle = catdog_oracle([x, y], bob);
                    let got = exact_expected_return(&m, &catdog_policy(&m, [x, y], bob)).unwrap();
                    assert_eq!(got, oracle);
                    best = Some(match best {
                        Some(b) if b >= got => b,
                        _ => got,
                    });
                    count += 1;
                }
            }
        }
        assert_eq!(count, 1296);
        assert_eq!(best.unwrap(), q(10505, 1000));
    }

    #[test]
    fn catdog_reference_values() {
        let m: TabularDecPomdp<Q> = make_cat_dog();
        let a = catdog_policy(&m, CHEAP_TALK_A.0, CHEAP_TALK_A.1);
        let b = catdog_policy(&m, CHEAP_TALK_B.0, CHEAP_TALK_B.1);
        let g = catdog_policy(&m, GROUNDED.0, GROUNDED.1);
        assert_eq!(exact_expected_return(&m, &a).unwrap(), q(10505, 1000));
        assert_eq!(exact_expected_return(&m, &b).unwrap(), q(10505, 1000));
        assert_eq!(exact_expected_return(&m, &g).unwrap(), q(11, 2));
        assert_eq!(cross_play(&m, &a, &b).unwrap(), q(-9995, 1000));
        assert_eq!(cross_play(&m, &a, &g).unwrap(), cross_play(&m, &g, &a).unwrap());
    }

    #[test]
    fn matrix_game_rejects_non_square() {
        let cfg = MatrixGameConfig { actions: vec!["a".into(), "b".into()], payoff: vec![vec![1.0, 0.0]] };
        assert!(make_matrix_game::<f64>(&cfg).is_err());
    }
}
