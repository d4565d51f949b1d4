//! Invariants of the public API, checked on random policies. Exact rationals
//! wherever the claim is an equality.

use ersym::envs::{make_env, ENV_NAMES};
use ersym::eval::{cross_play, exact_expected_return};
use ersym::harness::xp_matrix;
use ersym::symmetry::{
    enumerate_mdp_symmetries, op_objective, orbit, orbit_with_repeats, symmetrize, transform_policy, OrbitMode,
    SymmetryMap, SymmetrySet, DEFAULT_ENUMERATION_BUDGET,
};
use ersym::{epsilon_soften, DecPomdp, ExactDecPomdp, ExactPolicy, Policy, Rational};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exact(env: usize) -> (ExactDecPomdp, SymmetrySet) {
    let m: ExactDecPomdp = make_env(ENV_NAMES[env]).unwrap();
    let set = enumerate_mdp_symmetries(&m, DEFAULT_ENUMERATION_BUDGET).unwrap();
    (m, set)
}

fn random_exact(m: &ExactDecPomdp, seed: u64) -> ExactPolicy {
    ExactPolicy::random(m, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn enumerated_groups_satisfy_the_axioms() {
    for env in 0..ENV_NAMES.len() {
        let (m, set) = exact(env);
        let id = SymmetryMap::identity(&m);
        assert!(set.contains(&id), "{}", ENV_NAMES[env]);
        for a in &set.maps {
            assert!(set.contains(&a.inverse()));
            assert_eq!(a.compose(&a.inverse()).unwrap(), id);
            for b in &set.maps {
                let ab = a.compose(b).unwrap();
                assert!(set.contains(&ab));
                for c in &set.maps {
                    assert_eq!(ab.compose(c).unwrap(), a.compose(&b.compose(c).unwrap()).unwrap());
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn symmetries_preserve_return_exactly(seed in any::<u64>(), env in 0usize..4) {
        let (m, set) = exact(env);
        let pi = random_exact(&m, seed);
        let j = exact_expected_return(&m, &pi).unwrap();
        for phi in &set.maps {
            prop_assert_eq!(&exact_expected_return(&m, &transform_policy(&m, phi, &pi).unwrap()).unwrap(), &j);
        }
    }

    #[test]
    fn symmetrized_policies_are_fixed_points(seed in any::<u64>(), env in 0usize..4) {
        let (m, set) = exact(env);
        let sym = symmetrize(&m, &set, &random_exact(&m, seed)).unwrap();
        for phi in &set.maps {
            prop_assert_eq!(&transform_policy(&m, phi, &sym).unwrap(), &sym);
        }
        prop_assert_eq!(symmetrize(&m, &set, &sym).unwrap(), sym);
    }

    #[test]
    fn orbit_size_divides_group_order(seed in any::<u64>(), env in 0usize..4) {
        let (m, set) = exact(env);
        let pi = random_exact(&m, seed);
        let distinct = orbit(&m, &set, &pi).unwrap().len();
        prop_assert_eq!(orbit_with_repeats(&m, &set, &pi).unwrap().len(), set.len());
        prop_assert_eq!(set.len() % distinct, 0);
    }

    #[test]
    fn identity_other_play_is_the_return(seed in any::<u64>(), env in 0usize..4) {
        let (m, _) = exact(env);
        let pi = random_exact(&m, seed);
        let id = SymmetrySet::identity(&m);
        let j = exact_expected_return(&m, &pi).unwrap();
        for mode in [OrbitMode::DistinctPolicies, OrbitMode::GroupElements] {
            prop_assert_eq!(&op_objective(&m, &id, &pi, mode).unwrap(), &j);
        }
        prop_assert_eq!(cross_play(&m, &pi, &pi).unwrap(), j);
    }

    #[test]
    fn symmetrized_policies_lose_nothing_to_other_play(seed in any::<u64>(), env in 0usize..4) {
        // the orbit of S(π) is S(π) alone
        let (m, set) = exact(env);
        let sym = symmetrize(&m, &set, &random_exact(&m, seed)).unwrap();
        let j = exact_expected_return(&m, &sym).unwrap();
        prop_assert_eq!(op_objective(&m, &set, &sym, OrbitMode::GroupElements).unwrap(), j);
    }

    #[test]
    fn softening_floors_every_legal_action(seed in any::<u64>(), env in 0usize..4, k in 1i64..10) {
        let (m, _) = exact(env);
        let eps = Rational::new(k.into(), 10.into());
        let soft = epsilon_soften(&m, &random_exact(&m, seed), eps.clone()).unwrap();
        prop_assert!(soft.check_rows(0.0).is_empty());
        for (agent, table) in soft.agents.iter().enumerate() {
            for (aoh, row) in table {
                let legal = m.legal(agent, aoh.len());
                let floor = eps.clone() / Rational::from_integer((legal.len() as i64).into());
                for a in legal {
                    prop_assert!(row[a] >= floor);
                }
            }
        }
    }

    #[test]
    fn xp_matrix_is_symmetric(seed in any::<u64>(), env in 0usize..4) {
        let m: DecPomdp = make_env(ENV_NAMES[env]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ps: Vec<Policy> = (0..3).map(|_| Policy::random(&m, &mut rng)).collect();
        let xp = xp_matrix(&m, &ps).unwrap();
        for i in 0..3 {
            prop_assert_eq!(xp.values[i][i], exact_expected_return(&m, &ps[i]).unwrap());
            for j in 0..3 {
                prop_assert_eq!(xp.values[i][j], xp.values[j][i]);
            }
        }
    }
}
