//! Command-line front end: configuration, file I/O and report emission.
//!
//! The binary is a thin wrapper around [`main_with_args`]. Every subcommand
//! reads one TOML file; command-line flags override individual keys.
//!
//! ```toml
//! [data]
//! train = "train.csv"        # relative to the config file
//! test = "test.csv"
//!
//! [solver]                   # every key optional, see SolveConfig
//! algorithm = "rdd"
//! epsilon = 1e-6
//! max_iterations = 60
//! kernel = { bandwidth_h = 0.1, rule = { kind = "auto_rate", c_h = 0.1 } }
//! rho = { kind = "manual", rho = 0.1 }
//!
//! [report]
//! wealth_columns = 4         # terminal columns summed into wealth
//! benchmark_wealth = 1.003
//!
//! [crossval]
//! grid = [0.0, 0.05, 0.1]
//! folds = 2
//!
//! [bound]                    # see BoundInputs
//!
//! [synth]
//! n_train = 20
//! n_test = 20
//! seed = 0
//! model = { kind = "portfolio", assets = 3, horizon = 4, mean = [1.01, 1.015, 1.02],
//!           persistence = 0.8, vol = [0.03, 0.05, 0.07] }
//! ```

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dro::RhoRule;
use crate::error::{Error, Result};
use crate::scenario::{load_trajectories, save_trajectories, simulate_markov_features, trajectories_from_features, TrajectorySet};
use crate::sddp::{
    cross_validate_rho, evaluate_policy_out_of_sample, generalization_bound, run, Algorithm, BoundInputs, ReportSpec,
    RunOutcome, SolveConfig,
};
use crate::stage::{PiecewiseUtility, PortfolioInstance};
use crate::toy::InventoryToy;

/// Exit code for a solve that stopped at the iteration limit.
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "ddsddp", version, about = "Data-driven SDDP over observed trajectories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy and write bounds, iteration log, cuts and manifest.
    Solve(RunArgs),
    /// Train, then simulate the policy on test trajectories.
    Evaluate(RunArgs),
    /// Pick the ambiguity radius by k-fold validation.
    Crossval(RunArgs),
    /// Evaluate the out-of-sample generalization bound.
    Bound(BoundArgs),
    /// Generate synthetic trajectory files.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgorithmArg {
    Dd,
    Rdd,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Training trajectories; overrides `data.train`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Test trajectories; overrides `data.test`.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmArg>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Leading terminal-stage columns summed into terminal wealth.
    pub wealth_columns: Option<usize>,
    pub benchmark_wealth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossvalConfig {
    pub grid: Vec<f64>,
    pub folds: usize,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        Self {
            grid: vec![0.0, 0.05, 0.1, 0.2, 0.4],
            folds: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SynthModel {
    Portfolio {
        assets: usize,
        horizon: usize,
        #[serde(default = "default_fee")]
        buy_fee: f64,
        #[serde(default = "default_fee")]
        sell_fee: f64,
        #[serde(default = "default_risk_free")]
        risk_free: f64,
        /// `(wealth, utility)` pairs; defaults to chords of `1 - exp(-w)`.
        #[serde(default)]
        utility_breakpoints: Option<Vec<(f64, f64)>>,
        mean: Vec<f64>,
        persistence: f64,
        vol: Vec<f64>,
    },
    Inventory {
        products: usize,
        horizon: usize,
        persistence: f64,
        noise: f64,
    },
}

fn default_fee() -> f64 {
    0.001
}

fn default_risk_free() -> f64 {
    1.001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub model: SynthModel,
    pub n_train: usize,
    #[serde(default)]
    pub n_test: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Parsed configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub solver: SolveConfig,
    pub report: ReportConfig,
    pub crossval: CrossvalConfig,
    pub bound: Option<BoundInputs>,
    pub synth: Option<SynthConfig>,
}

impl RunConfig {
    /// Reads a TOML config; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data.train, &mut cfg.data.test].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn apply(&mut self, args: &RunArgs) {
        if let Some(p) = &args.data {
            self.data.train = Some(p.clone());
        }
        if let Some(p) = &args.test {
            self.data.test = Some(p.clone());
        }
        if let Some(s) = args.seed {
            self.solver.seed = s;
        }
        if let Some(a) = args.algorithm {
            self.solver.algorithm = match a {
                AlgorithmArg::Dd => Algorithm::Dd,
                AlgorithmArg::Rdd => Algorithm::Rdd,
            };
        }
        if let Some(r) = args.rho {
            self.solver.rho = RhoRule::Manual { rho: r };
        }
        if let Some(e) = args.epsilon {
            self.solver.epsilon = e;
        }
        if let Some(k) = args.max_iters {
            self.solver.max_iterations = k;
        }
    }
}

/// Provenance written next to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub data: Vec<DataFingerprint>,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFingerprint {
    pub path: PathBuf,
    pub sha256: String,
}

/// Final solve results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub converged: bool,
    pub iterations: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub first_stage: Vec<f64>,
    pub bandwidth: f64,
    pub rho: f64,
    pub cuts: usize,
    pub envelope_points: usize,
}

/// Parses `args` and runs the subcommand; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn dispatch(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Solve(a) => cmd_solve(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Crossval(a) => cmd_crossval(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

pub fn cmd_solve(args: &RunArgs) -> Result<i32> {
    let started = unix_now();
    let (cfg, train, prints) = prepare(args)?;
    let outcome = run(&train, &cfg.solver)?;
    fs::create_dir_all(&args.out).map_err(|source| Error::File {
        path: args.out.clone(),
        source,
    })?;
    write_iterations(&args.out.join("iterations.csv"), &outcome)?;
    let summary = summarize(&outcome);
    write_json(&args.out.join("summary.json"), &summary)?;
    let cuts_path = args.out.join("cuts.csv");
    let mut w = BufWriter::new(create(&cuts_path)?);
    outcome.policy.cut_pool().dump(&mut w)?;
    w.flush()?;
    write_manifest(&args.out, "solve", &cfg, prints, cfg.solver.seed, started)?;

    println!(
        "{} after {} iterations: LB = {:.16e}, UB = {:.16e}, gap = {:.3e}",
        if summary.converged { "converged" } else { "iteration limit reached" },
        summary.iterations,
        summary.lower_bound,
        summary.upper_bound,
        summary.gap
    );
    Ok(if summary.converged { 0 } else { EXIT_NOT_CONVERGED })
}

pub fn cmd_evaluate(args: &RunArgs) -> Result<i32> {
    let started = unix_now();
    let (cfg, train, mut prints) = prepare(args)?;
    let test_path = cfg
        .data
        .test
        .clone()
        .ok_or_else(|| Error::Config("evaluate needs test data (--test or data.test)".into()))?;
    let test = read_trajectories(&test_path)?;
    prints.push(fingerprint(&test_path)?);
    let outcome = run(&train, &cfg.solver)?;
    let wealth_fn = cfg.report.wealth_columns.map(|k| move |x: &[f64]| x[..k.min(x.len())].iter().sum::<f64>());
    let spec = ReportSpec {
        terminal_wealth: wealth_fn.as_ref().map(|f| f as &(dyn Fn(&[f64]) -> f64 + Sync)),
        benchmark_wealth: cfg.report.benchmark_wealth,
    };
    let report = evaluate_policy_out_of_sample(&outcome.policy, &test, &spec)?;
    fs::create_dir_all(&args.out).map_err(|source| Error::File {
        path: args.out.clone(),
        source,
    })?;
    write_json(&args.out.join("summary.json"), &summarize(&outcome))?;
    write_json(&args.out.join("evaluation.json"), &report)?;
    write_manifest(&args.out, "evaluate", &cfg, prints, cfg.solver.seed, started)?;
    println!(
        "{} test paths ({} failed): mean cost {:.16e}, variance {:.16e}, utility {:.16e}",
        report.n_paths,
        report.failures.len(),
        report.mean,
        report.variance,
        report.utility
    );
    if let Some(w) = &report.wealth_stats {
        println!("mean wealth {:.16e}, sharpe {:.16e}", w.mean, w.sharpe);
    }
    Ok(0)
}

pub fn cmd_crossval(args: &RunArgs) -> Result<i32> {
    let started = unix_now();
    let (cfg, train, prints) = prepare(args)?;
    let report = cross_validate_rho(&train, &cfg.solver, &cfg.crossval.grid, cfg.crossval.folds)?;
    fs::create_dir_all(&args.out).map_err(|source| Error::File {
        path: args.out.clone(),
        source,
    })?;
    write_json(&args.out.join("crossval.json"), &report)?;
    write_manifest(&args.out, "crossval", &cfg, prints, cfg.solver.seed, started)?;
    for (r, s) in report.grid.iter().zip(&report.scores) {
        println!("rho {r:<10} validation cost {s:.16e}");
    }
    println!("selected rho {}", report.best_rho);
    Ok(0)
}

pub fn cmd_bound(args: &BoundArgs) -> Result<i32> {
    let cfg = RunConfig::load(&args.config)?;
    let inputs = cfg
        .bound
        .as_ref()
        .ok_or_else(|| Error::Config("config has no [bound] section".into()))?;
    let value = generalization_bound(inputs)?;
    println!("{value:.16e}");
    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(|source| Error::File {
            path: out.clone(),
            source,
        })?;
        write_json(&out.join("bound.json"), &serde_json::json!({ "inputs": inputs, "bound": value }))?;
    }
    Ok(0)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<i32> {
    let started = unix_now();
    let mut cfg = RunConfig::load(&args.config)?;
    let synth = cfg
        .synth
        .as_mut()
        .ok_or_else(|| Error::Config("config has no [synth] section".into()))?;
    if let Some(s) = args.seed {
        synth.seed = s;
    }
    let synth = synth.clone();
    let (train, test) = synthesize(&synth)?;
    fs::create_dir_all(&args.out).map_err(|source| Error::File {
        path: args.out.clone(),
        source,
    })?;
    let mut prints = Vec::new();
    for (name, set) in [("train.csv", Some(&train)), ("test.csv", test.as_ref())] {
        if let Some(set) = set {
            let path = args.out.join(name);
            let w = BufWriter::new(create(&path)?);
            save_trajectories(set, w)?;
            prints.push(fingerprint(&path)?);
            println!("wrote {} ({} paths)", path.display(), set.n_paths());
        }
    }
    write_manifest(&args.out, "synth", &cfg, prints, synth.seed, started)?;
    Ok(0)
}

/// Generates training (and optional test) trajectories from one seeded
/// simulation; test paths follow the training paths.
pub fn synthesize(s: &SynthConfig) -> Result<(TrajectorySet, Option<TrajectorySet>)> {
    let total = s.n_train + s.n_test;
    if s.n_train == 0 {
        return Err(Error::Config("n_train must be positive".into()));
    }
    let split = |paths: Vec<Vec<Vec<f64>>>, template: &dyn crate::scenario::DatumTemplate| {
        let train = trajectories_from_features(template, &paths[..s.n_train])?;
        let test = if s.n_test > 0 {
            Some(trajectories_from_features(template, &paths[s.n_train..])?)
        } else {
            None
        };
        Ok((train, test))
    };
    match &s.model {
        SynthModel::Portfolio {
            assets,
            horizon,
            buy_fee,
            sell_fee,
            risk_free,
            utility_breakpoints,
            mean,
            persistence,
            vol,
        } => {
            let utility = match utility_breakpoints {
                Some(b) => PiecewiseUtility::from_breakpoints(b)?,
                None => PiecewiseUtility::default_exponential(),
            };
            let inst = PortfolioInstance::new(*assets, *horizon, (*buy_fee, *sell_fee), *risk_free, utility)?;
            let spec = inst.return_process(mean, *persistence, vol)?;
            split(simulate_markov_features(&spec, *horizon, total, s.seed)?, &inst)
        }
        SynthModel::Inventory {
            products,
            horizon,
            persistence,
            noise,
        } => {
            let toy = InventoryToy::new(*products, *horizon);
            let spec = toy.demand_process(*persistence, *noise);
            split(simulate_markov_features(&spec, *horizon, total, s.seed)?, &toy)
        }
    }
}

fn prepare(args: &RunArgs) -> Result<(RunConfig, TrajectorySet, Vec<DataFingerprint>)> {
    let mut cfg = RunConfig::load(&args.config)?;
    cfg.apply(args);
    cfg.solver.validate()?;
    let path = cfg
        .data
        .train
        .clone()
        .ok_or_else(|| Error::Config("no training data (--data or data.train)".into()))?;
    let train = read_trajectories(&path)?;
    let prints = vec![fingerprint(&path)?];
    Ok((cfg, train, prints))
}

fn read_trajectories(path: &Path) -> Result<TrajectorySet> {
    let f = fs::File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    load_trajectories(BufReader::new(f), None)
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

fn fingerprint(path: &Path) -> Result<DataFingerprint> {
    let bytes = fs::read(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    let digest = Sha256::digest(&bytes);
    Ok(DataFingerprint {
        path: path.to_path_buf(),
        sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn summarize(o: &RunOutcome) -> SolveSummary {
    let last = o.records.last().expect("at least one iteration");
    SolveSummary {
        converged: o.converged,
        iterations: o.records.len(),
        lower_bound: last.lb,
        upper_bound: last.ub,
        gap: last.gap,
        first_stage: o.first_stage.clone(),
        bandwidth: o.policy.bandwidth(),
        rho: o.policy.rho(),
        cuts: o.policy.cut_pool().len(),
        envelope_points: o.policy.envelopes().len(),
    }
}

/// 17 significant digits.
fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_iterations(path: &Path, o: &RunOutcome) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(create(path)?));
    w.write_record([
        "k",
        "lb",
        "ub",
        "raw_lb",
        "raw_ub",
        "gap",
        "wall_time",
        "cuts_added",
        "envelope_points_added",
        "forward_scenario",
    ])?;
    for r in &o.records {
        let scenarios: Vec<String> = r
            .forward_scenarios
            .iter()
            .map(|s| {
                let idx: Vec<String> = s.indices.iter().map(|i| (i + 1).to_string()).collect();
                format!("{}@{}", idx.join(" "), s.rng_seed)
            })
            .collect();
        w.write_record([
            r.k.to_string(),
            f17(r.lb),
            f17(r.ub),
            f17(r.raw_lb),
            f17(r.raw_ub),
            f17(r.gap),
            format!("{:.6}", r.wall_time),
            r.cuts_added.to_string(),
            r.envelope_points_added.to_string(),
            scenarios.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Malformed(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

fn write_manifest(
    out: &Path,
    command: &str,
    cfg: &RunConfig,
    data: Vec<DataFingerprint>,
    seed: u64,
    started: u64,
) -> Result<()> {
    let m = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config: cfg.clone(),
        data,
        seed,
        started_unix: started,
        finished_unix: unix_now(),
    };
    write_json(&out.join("manifest.json"), &m)
}
