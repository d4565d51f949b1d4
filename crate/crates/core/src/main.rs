use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use ersym::discovery::{discover, group_property_report, DiscoveryAlgorithm, DiscoveryManifest};
use ersym::error::{Error, Result};
use ersym::eval::exact_expected_return;
use ersym::harness::{
    load_policy, load_set, output_dir, run_population, save_policy, save_set, symmetrized_comparison,
    write_curve_csv, write_histogram_csv, write_json, write_xp_csv, xp_matrix, ConfigFile, PopulationConfig,
    CONFIG_KEYS,
};
use ersym::model::{validate_model, TabularDecPomdp};
use ersym::policy::{epsilon_soften, TabularJointPolicy};
use ersym::symmetry::{
    enumerate_mdp_symmetries, group_closure, op_objective, symmetrize, SymmetrySet, DEFAULT_ENUMERATION_BUDGET,
};
use ersym::training::{build_policy_pool, derive_seed, refine_other_play, train_other_play, train_selfplay};

const HISTOGRAM_BINS: usize = 20;

#[derive(Parser)]
#[command(name = "ersym", version, about = "Expected-return symmetry discovery and other-play on tabular Dec-POMDPs")]
#[command(after_help = format!("Config file keys:\n{CONFIG_KEYS}"))]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(clap::Args)]
struct Common {
    /// Bundled environment: lever3, lever2, catdog or matrix.
    #[arg(long, global = true)]
    env: Option<String>,
    /// Versioned TOML config file with dotted keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed the command uses.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: $ERSYM_OUT, else ./ersym-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format of the summary printed and written next to the other outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check a bundled environment or a model JSON file.
    ValidateEnv {
        /// Model JSON file to check instead of a bundled environment.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train one self-play policy.
    TrainSp,
    /// Train one other-play policy over a symmetry set.
    TrainOp {
        /// Symmetry set file; defaults to the enumerated Dec-POMDP symmetries.
        #[arg(long)]
        set: Option<PathBuf>,
    },
    /// Discover expected-return symmetries from a policy pool.
    Discover {
        #[arg(long, value_parser = parse_alg)]
        alg: DiscoveryAlgorithm,
        /// Pool policy files; a pool is trained when none are given.
        #[arg(long, num_args = 1..)]
        policies: Vec<PathBuf>,
    },
    /// Enumerate the Dec-POMDP symmetry group.
    EnumerateMdpSymmetries,
    /// Exact cross-play matrix of policy files.
    EvalXp {
        #[arg(long, num_args = 2.., required = true)]
        policies: Vec<PathBuf>,
    },
    /// Orbit-average policies over the closure of a symmetry set.
    Symmetrize {
        #[arg(long, num_args = 1.., required = true)]
        policies: Vec<PathBuf>,
        /// Symmetry set file; defaults to the enumerated Dec-POMDP symmetries.
        #[arg(long)]
        set: Option<PathBuf>,
    },
    /// Train a population and evaluate its cross-play.
    RunPopulation {
        /// Self-play baseline: no discovery, other-play over the identity.
        #[arg(long)]
        baseline: bool,
    },
    /// Composition and invertibility diagnostics of a symmetry set.
    ReportGroupProperties {
        /// Symmetry set file; defaults to the enumerated Dec-POMDP symmetries.
        #[arg(long)]
        set: Option<PathBuf>,
        /// Held-out policy files; a pool is trained when none are given.
        #[arg(long, num_args = 1..)]
        policies: Vec<PathBuf>,
    },
}

fn parse_alg(s: &str) -> std::result::Result<DiscoveryAlgorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Input problems exit with 1, everything else with 2.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidModel(_)
        | Error::InvalidEpsilon(_)
        | Error::ShapeMismatch(_)
        | Error::Config(_)
        | Error::FingerprintMismatch { .. }
        | Error::NotTwoAgent(_)
        | Error::Json(_) => 1,
        Error::Phase { source, .. } => exit_code(source),
        _ => 2,
    }
}

struct Ctx {
    model: TabularDecPomdp<f64>,
    cfg: PopulationConfig,
    seed: u64,
    out: PathBuf,
    format: Format,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let file = match &common.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::parse("schema_version = 1")?,
        };
        let mut cfg = file.population(common.env.as_deref())?;
        if let Some(s) = common.seed {
            cfg.master_seed = s;
        }
        let model = cfg.env.build()?;
        Ok(Ctx { model, seed: cfg.master_seed, cfg, out: output_dir(common.out.as_deref()), format: common.format })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn set_or_mdp(&self, set: Option<&Path>) -> Result<SymmetrySet> {
        match set {
            Some(p) => load_set(p, &self.model),
            None => enumerate_mdp_symmetries(&self.model, DEFAULT_ENUMERATION_BUDGET),
        }
    }

    fn policies(&self, paths: &[PathBuf]) -> Result<Vec<TabularJointPolicy<f64>>> {
        paths.iter().map(|p| load_policy(p, &self.model)).collect()
    }

    fn pool(&self, paths: &[PathBuf]) -> Result<Vec<TabularJointPolicy<f64>>> {
        if !paths.is_empty() {
            return self.policies(paths);
        }
        let sp = self.cfg.sp.with_seed(derive_seed(self.seed, 0x9001, 0));
        info!("training a pool of {} policies", self.cfg.k);
        Ok(build_policy_pool(&self.model, self.cfg.k, &sp, self.cfg.epsilon, &self.cfg.pool)?.policies())
    }

    /// Writes the summary in the chosen format and echoes it to stdout.
    fn finish(&self, command: &str, summary: Value) -> Result<()> {
        match self.format {
            Format::Json => {
                write_json(&self.path(&format!("{command}.json")), &summary)?;
                emit(&serde_json::to_string_pretty(&summary)?);
            }
            Format::Csv => {
                let mut rows = Vec::new();
                flatten("", &summary, &mut rows);
                std::fs::create_dir_all(&self.out)?;
                let mut w = csv::Writer::from_path(self.path(&format!("{command}.csv")))?;
                w.write_record(["key", "value"])?;
                for (k, v) in &rows {
                    w.write_record([k, v])?;
                    emit(&format!("{k},{v}"));
                }
                w.flush()?;
            }
        }
        Ok(())
    }
}

/// Stdout may be a closed pipe; the files are already written by then.
fn emit(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, v)| flatten(&key(k), v, rows)),
        Value::Array(items) => items.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, rows)),
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn validate_env(common: &Common, model_file: Option<&Path>) -> Result<bool> {
    let (model, out) = match model_file {
        Some(p) => (ersym::harness::read_json::<TabularDecPomdp<f64>>(p)?, output_dir(common.out.as_deref())),
        None => {
            let ctx = Ctx::new(common)?;
            (ctx.model, ctx.out)
        }
    };
    let report = validate_model(&model);
    let ctx = Ctx { cfg: PopulationConfig::preset("matrix")?, model, seed: 0, out, format: common.format };
    let mut summary = json!({
        "env": ctx.model.name,
        "valid": report.is_valid(),
        "violations": report.violations,
    });
    if report.is_valid() {
        let aohs = ctx.model.reachable_decision_aohs();
        summary["model_fingerprint"] = json!(ctx.model.fingerprint());
        summary["agents"] = json!(ctx.model.num_agents());
        summary["states"] = json!(ctx.model.num_states());
        summary["horizon"] = json!(ctx.model.horizon);
        summary["decision_histories"] = json!(aohs.iter().map(|a| a.len()).collect::<Vec<_>>());
    }
    ctx.finish("validate-env", summary)?;
    Ok(report.is_valid())
}

fn train_sp(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg.sp.with_seed(ctx.seed);
    let out = train_selfplay(&ctx.model, &cfg)?;
    let j = exact_expected_return(&ctx.model, &out.policy)?;
    let soft = exact_expected_return(&ctx.model, &epsilon_soften(&ctx.model, &out.policy, ctx.cfg.epsilon)?)?;
    save_policy(&ctx.path("sp_policy.json"), &ctx.model, &out.policy)?;
    write_curve_csv(&ctx.path("sp_curve.csv"), &out.curve)?;
    ctx.finish(
        "train-sp",
        json!({
            "env": ctx.cfg.env.name,
            "seed": ctx.seed,
            "trainer": to_value(&cfg)?,
            "return": j,
            "softened_return": soft,
            "policy_file": "sp_policy.json",
            "curve_file": "sp_curve.csv",
        }),
    )
}

fn train_op(ctx: &Ctx, set: Option<&Path>) -> Result<()> {
    let set = ctx.set_or_mdp(set)?;
    let cfg = ctx.cfg.op.with_seed(ctx.seed);
    let out = train_other_play(&ctx.model, &set, &cfg)?;
    let mut policy = out.policy;
    if ctx.cfg.op_refine_sweeps > 0 {
        policy = refine_other_play(&ctx.model, &set, &policy, ctx.cfg.epsilon, ctx.cfg.op_refine_sweeps, ctx.cfg.orbit_mode)?.0;
    }
    let j = exact_expected_return(&ctx.model, &policy)?;
    let op = op_objective(&ctx.model, &set, &policy, ctx.cfg.orbit_mode)?;
    save_policy(&ctx.path("op_policy.json"), &ctx.model, &policy)?;
    write_curve_csv(&ctx.path("op_curve.csv"), &out.curve)?;
    ctx.finish(
        "train-op",
        json!({
            "env": ctx.cfg.env.name,
            "seed": ctx.seed,
            "trainer": to_value(&cfg)?,
            "set_size": set.len(),
            "refine_sweeps": ctx.cfg.op_refine_sweeps,
            "return": j,
            "other_play": op,
            "policy_file": "op_policy.json",
            "curve_file": "op_curve.csv",
        }),
    )
}

fn discover_cmd(ctx: &Ctx, alg: DiscoveryAlgorithm, paths: &[PathBuf]) -> Result<()> {
    let pool = ctx.pool(paths)?;
    let mut dcfg = ctx.cfg.discovery.with_seed(derive_seed(ctx.seed, 0xd15c, 0));
    if ctx.cfg.l > 0 {
        dcfg.top_l = ctx.cfg.l;
    }
    let found = discover(&ctx.model, &pool, alg, &dcfg)?;
    let mut manifest = DiscoveryManifest::new(&ctx.model, &pool, alg, &dcfg, &found)?;
    manifest.selected_file = Some("set.json".into());
    save_set(&ctx.path("set.json"), &ctx.model, &found.set)?;
    write_json(&ctx.path("manifest.json"), &manifest)?;
    ctx.finish(
        "discover",
        json!({
            "env": ctx.cfg.env.name,
            "algorithm": alg.to_string(),
            "pool_size": pool.len(),
            "selected": found.set.len(),
            "values": found.candidates.iter().take(found.set.len()).map(|c| c.value).collect::<Vec<_>>(),
            "warnings": found.warnings,
            "set_file": "set.json",
            "manifest_file": "manifest.json",
        }),
    )
}

fn enumerate_cmd(ctx: &Ctx) -> Result<()> {
    let set = enumerate_mdp_symmetries(&ctx.model, DEFAULT_ENUMERATION_BUDGET)?;
    save_set(&ctx.path("mdp_symmetries.json"), &ctx.model, &set)?;
    ctx.finish(
        "enumerate-mdp-symmetries",
        json!({
            "env": ctx.cfg.env.name,
            "count": set.len(),
            "is_group": set.is_group(),
            "set_file": "mdp_symmetries.json",
        }),
    )
}

fn eval_xp(ctx: &Ctx, paths: &[PathBuf]) -> Result<()> {
    let policies = ctx.policies(paths)?;
    let xp = xp_matrix(&ctx.model, &policies)?;
    write_xp_csv(&ctx.path("xp.csv"), &xp)?;
    write_histogram_csv(&ctx.path("xp_histogram.csv"), &xp.off_diagonal(), HISTOGRAM_BINS)?;
    ctx.finish(
        "eval-xp",
        json!({
            "policies": paths,
            "matrix": xp.values,
            "stats": to_value(&xp.stats)?,
            "xp_file": "xp.csv",
            "histogram_file": "xp_histogram.csv",
        }),
    )
}

fn symmetrize_cmd(ctx: &Ctx, paths: &[PathBuf], set: Option<&Path>) -> Result<()> {
    let set = ctx.set_or_mdp(set)?;
    let closed = if set.closed { set.clone() } else { group_closure(&set, ctx.cfg.closure_cap)? };
    let policies = ctx.policies(paths)?;
    let mut rows = Vec::new();
    for (i, pi) in policies.iter().enumerate() {
        let sym = symmetrize(&ctx.model, &closed, pi)?;
        let name = format!("symmetrized_{i}.json");
        save_policy(&ctx.path(&name), &ctx.model, &sym)?;
        rows.push(json!({
            "input": paths[i],
            "output": name,
            "return_before": exact_expected_return(&ctx.model, pi)?,
            "return_after": exact_expected_return(&ctx.model, &sym)?,
        }));
    }
    let cmp = symmetrized_comparison(&ctx.model, &policies, &closed, ctx.cfg.closure_cap)?;
    ctx.finish("symmetrize", json!({ "group_size": closed.len(), "policies": rows, "cross_play": to_value(&cmp)? }))
}

fn population_cmd(ctx: &Ctx, baseline: bool) -> Result<()> {
    let mut cfg = ctx.cfg.clone();
    if baseline {
        cfg.l = 0;
        cfg.op_refine_sweeps = 0;
    }
    let result = run_population(&ctx.model, &cfg)?;
    write_json(&ctx.path("population.json"), &result)?;
    write_xp_csv(&ctx.path("xp.csv"), &result.xp)?;
    write_histogram_csv(&ctx.path("xp_histogram.csv"), &result.xp.off_diagonal(), HISTOGRAM_BINS)?;
    ctx.finish(
        "run-population",
        json!({
            "env": cfg.env.name,
            "master_seed": cfg.master_seed,
            "baseline": cfg.is_baseline(),
            "self_play": result.agents.iter().map(|a| a.sp_score).collect::<Vec<_>>(),
            "set_sizes": result.agents.iter().map(|a| a.set.len()).collect::<Vec<_>>(),
            "stats": to_value(&result.xp.stats)?,
            "result_file": "population.json",
            "xp_file": "xp.csv",
            "histogram_file": "xp_histogram.csv",
        }),
    )
}

fn group_report_cmd(ctx: &Ctx, set: Option<&Path>, paths: &[PathBuf]) -> Result<()> {
    let set = ctx.set_or_mdp(set)?;
    let holdout = ctx.pool(paths)?;
    let report = group_property_report(&ctx.model, &set, &holdout)?;
    let closure = group_closure(&set, ctx.cfg.closure_cap)?;
    ctx.finish(
        "report-group-properties",
        json!({
            "report": to_value(&report)?,
            "set_is_group": set.is_group(),
            "closure_size": closure.len(),
            "closure_is_group": closure.is_group(),
        }),
    )
}

fn run(cli: &Cli) -> Result<u8> {
    if let Command::ValidateEnv { model } = &cli.command {
        return Ok(if validate_env(&cli.common, model.as_deref())? { 0 } else { 1 });
    }
    let ctx = Ctx::new(&cli.common)?;
    match &cli.command {
        Command::ValidateEnv { .. } => unreachable!(),
        Command::TrainSp => train_sp(&ctx)?,
        Command::TrainOp { set } => train_op(&ctx, set.as_deref())?,
        Command::Discover { alg, policies } => discover_cmd(&ctx, *alg, policies)?,
        Command::EnumerateMdpSymmetries => enumerate_cmd(&ctx)?,
        Command::EvalXp { policies } => eval_xp(&ctx, policies)?,
        Command::Symmetrize { policies, set } => symmetrize_cmd(&ctx, policies, set.as_deref())?,
        Command::RunPopulation { baseline } => population_cmd(&ctx, *baseline)?,
        Command::ReportGroupProperties { set, policies } => group_report_cmd(&ctx, set.as_deref(), policies)?,
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
