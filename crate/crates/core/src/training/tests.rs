use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::envs::{make_cat_dog, make_lever_game, LeverGameConfig};
use crate::eval::exact_expected_return;
use crate::model::TabularDecPomdp;
use crate::policy::{PolicySource, TabularJointPolicy};
use crate::symmetry::{enumerate_mdp_symmetries, transform_policy, SymmetrySet, DEFAULT_ENUMERATION_BUDGET};

fn lever3() -> TabularDecPomdp<f64> {
    make_lever_game(&LeverGameConfig::default())
}

fn lever_iql(seed: u64) -> TrainerConfig {
    TrainerConfig { shared_q: true, ..TrainerConfig::iql(10_000, 0.1, 0.1, seed) }
}

#[test]
fn lever_iql_finds_a_matching_convention() {
    let m = lever3();
    for seed in 0..3 {
        let out = train_selfplay(&m, &lever_iql(seed)).unwrap();
        assert_eq!(exact_expected_return(&m, &out.policy).unwrap(), 2.0);
        assert_eq!(out.curve.len(), 10_000);
    }
}

#[test]
fn single_episode_is_fine() {
    let m = lever3();
    let out = train_selfplay(&m, &TrainerConfig::iql(1, 0.1, 0.1, 4)).unwrap();
    assert!(out.policy.check_rows(1e-12).is_empty());
    let out = train_selfplay(&m, &TrainerConfig::pg(1, 0.1, 1.0, 0.0, 4)).unwrap();
    assert!(out.policy.check_rows(1e-12).is_empty());
}

#[test]
fn training_is_deterministic() {
    let m: TabularDecPomdp<f64> = make_cat_dog();
    for cfg in [TrainerConfig::iql(800, 0.1, 0.2, 9), TrainerConfig::pg(800, 0.01, 0.375, 9.5, 9)] {
        let a = train_selfplay(&m, &cfg).unwrap();
        let b = train_selfplay(&m, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train_selfplay(&m, &cfg.with_seed(10)).unwrap();
        assert_ne!(a.curve, c.curve);
    }
}

#[test]
fn other_play_with_identity_is_self_play() {
    let m: TabularDecPomdp<f64> = make_cat_dog();
    let id = SymmetrySet::identity(&m);
    for cfg in [TrainerConfig::iql(500, 0.1, 0.2, 3), TrainerConfig::pg(500, 0.01, 0.375, 9.5, 3)] {
        assert_eq!(train_other_play(&m, &id, &cfg).unwrap(), train_selfplay(&m, &cfg).unwrap());
    }
}

#[test]
fn bad_configs_are_rejected() {
    let m = lever3();
    assert!(train_selfplay(&m, &TrainerConfig::iql(0, 0.1, 0.1, 0)).is_err());
    assert!(train_selfplay(&m, &TrainerConfig::iql(10, -1.0, 0.1, 0)).is_err());
    assert!(train_selfplay(&m, &TrainerConfig::pg(10, 0.1, 0.0, 0.0, 0)).is_err());
}

/// The stream form (partner perceives φ⁻¹ of its history and emits φ of its
/// choice) induces exactly the action distribution of φ(π).
#[test]
fn partner_stream_matches_transformed_policy() {
    let m = lever3();
    let set = enumerate_mdp_symmetries(&m, DEFAULT_ENUMERATION_BUDGET).unwrap();
    let pi = TabularJointPolicy::<f64>::random(&m, &mut ChaCha8Rng::seed_from_u64(5));
    for phi in &set.maps {
        let moved = transform_policy(&m, phi, &pi).unwrap();
        for agent in 0..2 {
            let view = PartnerView::new(agent, phi);
            for (aoh, row) in &moved.agents[agent] {
                let inner = pi.row(agent, &view.internal_aoh(aoh)).unwrap();
                let mut stream = vec![0.0; row.len()];
                for (a, p) in inner.iter().enumerate() {
                    stream[view.external_action(a)] += p;
                }
                assert_eq!(&stream, row);
            }
        }
    }
}

#[test]
fn pool_has_k_softened_optima() {
    let m = lever3();
    let pool = build_policy_pool(&m, 4, &lever_iql(21), 0.1, &PoolOptions::default()).unwrap();
    assert_eq!(pool.members.len(), 4);
    for member in &pool.members {
        assert_eq!(member.raw_return, 2.0);
        for table in &member.policy.agents {
            for row in table.values() {
                assert!(row.iter().all(|&p| p >= 0.1 / 3.0 - 1e-15));
            }
        }
    }
    let single = build_policy_pool(&m, 1, &lever_iql(21), 0.1, &PoolOptions::default()).unwrap();
    assert_eq!(single.members.len(), 1);
    assert_eq!(single.members[0], pool.members[0]);
}

#[test]
fn pool_rejects_bad_arguments() {
    let m = lever3();
    assert!(build_policy_pool(&m, 0, &lever_iql(0), 0.1, &PoolOptions::default()).is_err());
    assert!(build_policy_pool(&m, 2, &lever_iql(0), 0.0, &PoolOptions::default()).is_err());
}

#[test]
fn seeds_are_distinct() {
    let seeds: std::collections::HashSet<u64> = (0..100).map(|i| derive_seed(7, 1, i)).collect();
    assert_eq!(seeds.len(), 100);
    assert_ne!(derive_seed(7, 1, 0), derive_seed(7, 2, 0));
}

mod refinement {
    use super::*;
    use crate::envs::catdog::*;
    use crate::envs::tests::{catdog_policy, CHEAP_TALK_A, GROUNDED};
    use crate::policy::epsilon_soften;
    use crate::symmetry::OrbitMode;

    fn soft_j(m: &TabularDecPomdp<f64>, p: &TabularJointPolicy<f64>) -> f64 {
        exact_expected_return(m, &epsilon_soften(m, p, 0.1).unwrap()).unwrap()
    }

    #[test]
    fn bailing_start_climbs() {
        let m: TabularDecPomdp<f64> = make_cat_dog();
        let bail = catdog_policy(&m, [A_BAIL; 2], [B_BAIL; 4]);
        let (out, sweeps) = refine_soft_best_response(&m, &bail, 0.1, 20).unwrap();
        assert!(sweeps <= 20);
        assert!(soft_j(&m, &out) > soft_j(&m, &bail) + 1.0);
        assert!(out.check_rows(0.0).is_empty());
        for table in &out.agents {
            for row in table.values() {
                assert_eq!(row.iter().filter(|&&p| p == 1.0).count(), 1);
            }
        }
    }

    #[test]
    fn soft_optimum_is_a_fixed_point() {
        let m: TabularDecPomdp<f64> = make_cat_dog();
        let talk = catdog_policy(&m, CHEAP_TALK_A.0, CHEAP_TALK_A.1);
        let (out, sweeps) = refine_soft_best_response(&m, &talk, 0.1, 20).unwrap();
        assert_eq!(sweeps, 1);
        assert_eq!(out, talk);
    }

    #[test]
    fn zero_sweeps_is_a_no_op() {
        let m: TabularDecPomdp<f64> = make_cat_dog();
        let g = catdog_policy(&m, GROUNDED.0, GROUNDED.1);
        assert_eq!(refine_soft_best_response(&m, &g, 0.1, 0).unwrap(), (g, 0));
    }

    #[test]
    fn identity_other_play_matches_self_play_refinement() {
        let m: TabularDecPomdp<f64> = make_cat_dog();
        let id = SymmetrySet::identity(&m);
        let bail = catdog_policy(&m, [A_BAIL; 2], [B_BAIL; 4]);
        let a = refine_soft_best_response(&m, &bail, 0.1, 20).unwrap();
        let b = refine_other_play(&m, &id, &bail, 0.1, 20, OrbitMode::GroupElements).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_epsilon_is_an_error() {
        let m: TabularDecPomdp<f64> = make_cat_dog();
        let g = catdog_policy(&m, GROUNDED.0, GROUNDED.1);
        assert!(refine_soft_best_response(&m, &g, 0.0, 3).is_err());
    }
}
