use std::path::Path;

use super::*;
use crate::discovery::DiscoveryAlgorithm;
use crate::envs::tests::{catdog_policy, CHEAP_TALK_A, CHEAP_TALK_B, GROUNDED};
use crate::envs::{make_cat_dog, make_lever_game, make_matrix_game, LeverGameConfig, MatrixGameConfig};
use crate::error::Error;
use crate::eval::exact_expected_return;
use crate::model::TabularDecPomdp;
use crate::policy::TabularJointPolicy;
use crate::symmetry::{
    enumerate_mdp_symmetries, OrbitMode, Permutation, SymmetryMap, SymmetrySet, DEFAULT_ENUMERATION_BUDGET,
};
use crate::training::{CurvePoint, TrainerConfig};

fn lever3() -> TabularDecPomdp<f64> {
    make_lever_game(&LeverGameConfig::default())
}

fn always(m: &TabularDecPomdp<f64>, lever: usize) -> TabularJointPolicy<f64> {
    TabularJointPolicy::deterministic(m, |_, _| lever)
}

fn catdog_three() -> (TabularDecPomdp<f64>, Vec<TabularJointPolicy<f64>>) {
    let m = make_cat_dog();
    let ps = [CHEAP_TALK_A, CHEAP_TALK_B, GROUNDED].iter().map(|(a, b)| catdog_policy(&m, *a, *b)).collect();
    (m, ps)
}

fn small_matrix_config() -> PopulationConfig {
    PopulationConfig {
        size: 3,
        k: 2,
        sp: TrainerConfig::iql(300, 0.1, 0.1, 0),
        op: TrainerConfig::iql(300, 0.1, 0.1, 0),
        ..PopulationConfig::preset("matrix").unwrap()
    }
}

#[test]
fn every_preset_validates_and_builds() {
    for env in crate::envs::ENV_NAMES {
        let cfg = PopulationConfig::preset(env).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.env.build().unwrap().fingerprint(), crate::envs::make_env::<f64>(env).unwrap().fingerprint());
        let base = PopulationConfig::baseline(env).unwrap();
        assert!(base.is_baseline());
        assert_eq!(base.op_refine_sweeps, 0);
    }
    assert!(PopulationConfig::preset("hanabi").is_err());
}

#[test]
fn invalid_population_configs_are_rejected() {
    let ok = PopulationConfig::preset("catdog").unwrap();
    let bad = [
        PopulationConfig { size: 1, ..ok.clone() },
        PopulationConfig { k: 0, ..ok.clone() },
        PopulationConfig { m: 0, ..ok.clone() },
        PopulationConfig { epsilon: 1.0, ..ok.clone() },
        PopulationConfig { agent_seeds: Some(vec![1, 2]), ..ok.clone() },
        PopulationConfig { closure_cap: 0, ..ok.clone() },
    ];
    for cfg in bad {
        assert!(cfg.validate().is_err(), "{cfg:?}");
    }
}

#[test]
fn config_file_overrides_the_preset() {
    let text = r#"
schema_version = 1
env = "catdog"
population.p = 7
population.master_seed = 3
population.algorithm = "alg3"
population.deploy = "symmetrized-er"
op.episodes = 123
discovery.learning_rate = 0.5
"#;
    let file = ConfigFile::parse(text).unwrap();
    assert_eq!(file.env.as_deref(), Some("catdog"));
    let cfg = file.population(None).unwrap();
    assert_eq!(cfg.size, 7);
    assert_eq!(cfg.master_seed, 3);
    assert_eq!(cfg.algorithm, DiscoveryAlgorithm::Alg3);
    assert_eq!(cfg.deploy, DeployMode::SymmetrizedEr);
    assert_eq!(cfg.op.episodes, 123);
    assert_eq!(cfg.discovery.learning_rate, 0.5);
    // untouched keys keep the preset's values
    let preset = PopulationConfig::preset("catdog").unwrap();
    assert_eq!(cfg.sp, preset.sp);
    assert_eq!(cfg.pool, preset.pool);
}

#[test]
fn env_flag_beats_the_file() {
    let file = ConfigFile::parse("schema_version = 1\nenv = \"catdog\"\n").unwrap();
    assert_eq!(file.population(Some("lever2")).unwrap().env.name, "lever2");
    let bare = ConfigFile::parse("schema_version = 1\n").unwrap();
    assert!(bare.population(None).is_err());
    assert_eq!(bare.population(Some("matrix")).unwrap(), PopulationConfig::preset("matrix").unwrap());
}

#[test]
fn env_tables_carry_game_parameters() {
    let file = ConfigFile::parse("schema_version = 1\n[env]\nname = \"lever3\"\nnum_levers = 4\n").unwrap();
    let cfg = file.population(None).unwrap();
    assert_eq!(cfg.env.num_levers, Some(4));
    assert_eq!(cfg.env.build().unwrap().agents[0].actions.len(), 4);
}

#[test]
fn malformed_config_files_fail() {
    for text in [
        "env = \"catdog\"\n",
        "schema_version = 2\nenv = \"catdog\"\n",
        "schema_version = 1\nenv = \"catdog\"\nmystery.key = 1\n",
        "schema_version = 1\nenv = 5\n",
        "schema_version = 1\nenv = \"catdog\"\npopulation.bogus = 1\n",
        "schema_version = 1\nenv = \"catdog\"\npopulation.epsilon = 2.0\n",
        "schema_version = 1\nenv = \"catdog\"\npopulation.deploy = \"sideways\"\n",
        "schema_version = [1\n",
    ] {
        let res = ConfigFile::parse(text).and_then(|f| f.population(None));
        assert!(matches!(res, Err(Error::Config(_)) | Err(Error::InvalidEpsilon(_))), "{text:?} gave {res:?}");
    }
}

#[test]
fn deploy_modes_parse() {
    for (s, d) in
        [("raw", DeployMode::Raw), ("symmetrized-er", DeployMode::SymmetrizedEr), ("symmetrized-mdp", DeployMode::SymmetrizedMdp)]
    {
        assert_eq!(s.parse::<DeployMode>().unwrap(), d);
        assert_eq!(serde_json::to_value(d).unwrap(), s);
    }
    assert!("nope".parse::<DeployMode>().is_err());
}

#[test]
fn xp_matrix_is_symmetric_with_returns_on_the_diagonal() {
    let (m, ps) = catdog_three();
    let xp = xp_matrix(&m, &ps).unwrap();
    for i in 0..3 {
        assert_eq!(xp.values[i][i], exact_expected_return(&m, &ps[i]).unwrap());
        for j in 0..3 {
            assert_eq!(xp.values[i][j], xp.values[j][i]);
        }
    }
    assert!((xp.values[0][0] - 10.505).abs() < 1e-12);
    assert!((xp.values[0][1] + 9.995).abs() < 1e-12);
    assert!((xp.values[2][2] - 5.5).abs() < 1e-12);
    let stats = xp.stats.clone().unwrap();
    assert_eq!(stats.pairs, 3);
    let off = xp.off_diagonal();
    assert!((stats.mean - off.iter().sum::<f64>() / 3.0).abs() < 1e-12);
}

#[test]
fn opposite_handshakes_score_minus_one() {
    let m = make_matrix_game(&MatrixGameConfig::default()).unwrap();
    let xp = xp_matrix(&m, &[always(&m, 0), always(&m, 1)]).unwrap();
    assert_eq!(xp.values, vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
    assert_eq!(xp.stats.unwrap().mean, -1.0);
}

#[test]
fn single_policy_has_no_stats() {
    let m = lever3();
    let xp = xp_matrix(&m, &[always(&m, 0)]).unwrap();
    assert!(xp.stats.is_none());
    let cmp = symmetrized_comparison(&m, &[always(&m, 0)], &SymmetrySet::identity(&m), 10).unwrap();
    assert!(cmp.degenerate);
}

#[test]
fn xp_stats_known_values() {
    let s = XpStats::from_values(&[1.0, 2.0, 3.0, 10.0]).unwrap();
    assert_eq!(s.mean, 4.0);
    assert_eq!(s.median, 2.5);
    // squared deviations 9 + 4 + 1 + 36 = 50, sample variance 50/3
    assert!((s.std_error - (50.0f64 / 12.0).sqrt()).abs() < 1e-12);
    assert_eq!(XpStats::from_values(&[5.0]).unwrap().std_error, 0.0);
    assert!(XpStats::from_values(&[]).is_none());
}

#[test]
fn identity_symmetrization_changes_nothing() {
    let (m, ps) = catdog_three();
    let cmp = symmetrized_comparison(&m, &ps, &SymmetrySet::identity(&m), 10).unwrap();
    assert!(!cmp.degenerate);
    assert_eq!(cmp.before, cmp.after);
}

#[test]
fn symmetrizing_lever_conventions_removes_the_mismatch() {
    let m = lever3();
    let group = enumerate_mdp_symmetries(&m, DEFAULT_ENUMERATION_BUDGET).unwrap();
    let ps: Vec<_> = (0..3).map(|a| always(&m, a)).collect();
    let cmp = symmetrized_comparison(&m, &ps, &group, 100).unwrap();
    assert_eq!(cmp.before.unwrap().mean, 0.0);
    let after = cmp.after.unwrap();
    assert!((after.mean - 2.0 / 3.0).abs() < 1e-12);
    assert!(after.std_error < 1e-12);
}

#[test]
fn empty_sets_cannot_be_closed() {
    let m = lever3();
    assert!(symmetrized_comparison(&m, &[always(&m, 0)], &SymmetrySet::new(vec![]), 10).is_err());
}

#[test]
fn identity_other_play_is_self_play() {
    let (m, ps) = catdog_three();
    let report = op_gap_report(&m, &ps, &SymmetrySet::identity(&m), OrbitMode::DistinctPolicies).unwrap();
    for row in &report.rows {
        assert_eq!(row.self_play, row.other_play);
    }
    assert_eq!(report.best_other_play, report.rows[0].self_play);
    assert!((report.gap - (report.best_other_play - report.population_xp)).abs() < 1e-15);
    assert!(op_gap_report(&m, &[], &SymmetrySet::identity(&m), OrbitMode::DistinctPolicies).is_err());
}

#[test]
fn histogram_counts_everything() {
    let h = histogram(&[0.0, 0.1, 0.5, 0.99, 1.0, -3.0, 7.0], 4, 0.0, 1.0);
    assert_eq!(h.len(), 4);
    assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 7);
    assert_eq!(h[0], (0.0, 0.25, 3));
    assert_eq!(h[3].2, 3);
}

#[test]
fn policy_files_round_trip_and_check_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p/policy.json");
    let (m, ps) = catdog_three();
    save_policy(&path, &m, &ps[0]).unwrap();
    assert_eq!(load_policy(&path, &m).unwrap(), ps[0]);
    let other = lever3();
    assert!(matches!(load_policy(&path, &other), Err(Error::FingerprintMismatch { .. })));

    let mut file: PolicyFile = read_json(&path).unwrap();
    file.schema_version = 99;
    write_json(&path, &file).unwrap();
    assert!(matches!(load_policy(&path, &m), Err(Error::Config(_))));

    let mut file = PolicyFile::new(&m, &ps[0]);
    file.policy.agents[0].values_mut().next().unwrap()[0] = 0.7;
    write_json(&path, &file).unwrap();
    assert!(matches!(load_policy(&path, &m), Err(Error::ShapeMismatch(_))));
}

#[test]
fn set_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("set.json");
    let m = lever3();
    let group = enumerate_mdp_symmetries(&m, DEFAULT_ENUMERATION_BUDGET).unwrap();
    save_set(&path, &m, &group).unwrap();
    let back = load_set(&path, &m).unwrap();
    assert!(back.same_members(&group));
    assert!(back.closed);
    assert!(matches!(load_set(&path, &make_cat_dog()), Err(Error::FingerprintMismatch { .. })));
}

#[test]
fn set_files_must_earn_the_closed_flag() {
    let m = lever3();
    let swap = Permutation::transposition(3, 0, 1);
    let cycle = Permutation::new(vec![1, 2, 0]).unwrap();
    let phi = |p: &Permutation| SymmetryMap { actions: vec![p.clone(), p.clone()], observations: vec![p.clone(), p.clone()] };
    let mut file = SetFile::new(&m, &SymmetrySet::new(vec![SymmetryMap::identity(&m), phi(&cycle)]));
    file.closed = true;
    assert!(file.to_set(&m).is_err());
    file.closed = false;
    assert!(!file.to_set(&m).unwrap().closed);

    let mut single = SymmetryFile::new(&m, &phi(&swap));
    assert!(single.to_map(&m).unwrap() == phi(&swap));
    single.actions[0] = vec![0, 0, 1];
    assert!(single.to_map(&m).is_err());
    single.actions[0] = vec![0, 1];
    assert!(single.to_map(&m).is_err());
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn csv_writers_emit_headers_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let m = make_matrix_game(&MatrixGameConfig::default()).unwrap();
    let xp = xp_matrix(&m, &[always(&m, 0), always(&m, 1)]).unwrap();
    write_xp_csv(&dir.path().join("xp.csv"), &xp).unwrap();
    assert_eq!(read(&dir.path().join("xp.csv")), "policy,0,1\n0,1,-1\n1,-1,1\n");

    write_histogram_csv(&dir.path().join("h.csv"), &[0.0, 1.0, 1.0], 2).unwrap();
    assert_eq!(read(&dir.path().join("h.csv")), "bin_low,bin_high,count\n0,0.5,1\n0.5,1,2\n");
    write_histogram_csv(&dir.path().join("flat.csv"), &[2.0, 2.0], 1).unwrap();
    assert_eq!(read(&dir.path().join("flat.csv")), "bin_low,bin_high,count\n1.5,2.5,2\n");

    let curve = [CurvePoint { episode: 0, episode_return: 1.5 }, CurvePoint { episode: 1, episode_return: -2.0 }];
    write_curve_csv(&dir.path().join("c.csv"), &curve).unwrap();
    assert_eq!(read(&dir.path().join("c.csv")), "episode,return\n0,1.5\n1,-2\n");
}

#[test]
fn output_dir_precedence() {
    let flag = Path::new("/tmp/flagged");
    std::env::set_var(OUT_ENV, "/tmp/from-env");
    assert_eq!(output_dir(Some(flag)), flag);
    assert_eq!(output_dir(None), Path::new("/tmp/from-env"));
    std::env::set_var(OUT_ENV, "");
    assert_eq!(output_dir(None), Path::new(DEFAULT_OUT_DIR));
    std::env::remove_var(OUT_ENV);
    assert_eq!(output_dir(None), Path::new(DEFAULT_OUT_DIR));
}

#[test]
fn population_runs_are_reproducible() {
    let cfg = small_matrix_config();
    let m = cfg.env.build().unwrap();
    let a = run_population(&m, &cfg).unwrap();
    let b = run_population(&m, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.agents.len(), 3);
    assert_eq!(a.pairs.len(), 3);
    assert_eq!(a.model_fingerprint, m.fingerprint());
    for p in &a.pairs {
        assert_eq!(p.xp, a.xp.values[p.i][p.j]);
    }
}

#[test]
fn agents_depend_only_on_their_own_seed() {
    let seeds = vec![11, 22, 33];
    let cfg = PopulationConfig { agent_seeds: Some(seeds.clone()), ..small_matrix_config() };
    let m = cfg.env.build().unwrap();
    let a = run_population(&m, &cfg).unwrap();
    let swapped = PopulationConfig { agent_seeds: Some(vec![33, 11, 22]), ..cfg.clone() };
    let b = run_population(&m, &swapped).unwrap();
    let perm = [2, 0, 1];
    for (i, &j) in perm.iter().enumerate() {
        assert_eq!(b.agents[i].deployed, a.agents[j].deployed);
        assert_eq!(b.agents[i].set, a.agents[j].set);
        for (k, &l) in perm.iter().enumerate() {
            assert_eq!(b.xp.values[i][k], a.xp.values[j][l]);
        }
    }
}

#[test]
fn baseline_agents_use_the_identity() {
    let cfg = PopulationConfig { l: 0, ..small_matrix_config() };
    let m = cfg.env.build().unwrap();
    let r = run_population(&m, &cfg).unwrap();
    for a in &r.agents {
        assert!(a.pool_returns.is_empty());
        assert_eq!(a.set, SymmetrySet::identity(&m));
        assert_eq!(a.sp_score, 1.0);
    }
}

#[test]
fn deployment_picks_the_best_candidate() {
    let cfg = PopulationConfig { m: 3, ..small_matrix_config() };
    let m = cfg.env.build().unwrap();
    let r = run_population(&m, &cfg).unwrap();
    for a in &r.agents {
        assert_eq!(a.candidate_returns.len(), 3);
        assert_eq!(a.op_values.len(), 3);
        let best = a.candidate_returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.sp_score, best);
        assert_eq!(a.candidate_returns[a.deployed_index], best);
        assert!(a.candidate_returns[..a.deployed_index].iter().all(|&v| v < best));
    }
}

#[test]
fn one_agent_populations_are_refused() {
    let cfg = PopulationConfig { size: 1, ..small_matrix_config() };
    let m = cfg.env.build().unwrap();
    assert!(run_population(&m, &cfg).is_err());
}
