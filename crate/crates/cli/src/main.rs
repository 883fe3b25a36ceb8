//! `freightbid`: run the bandit and fleet experiments, the theory checks,
//! scenario generation and offline model fitting.
//!
//! Exit codes: 0 success, 1 failed check or run, 2 configuration error.

mod manifest;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use freightbid::belief::design_matrices;
use freightbid::belief::io::{read_history_csv, write_history_csv};
use freightbid::booking::io::{read_trace_csv, write_trace_csv};
use freightbid::choice_model::io::{write_registry, write_weights_csv};
use freightbid::choice_model::{build_feature_registry, fit_l1_logistic, FitConfig, RegionId};
use freightbid::config::{load_bandit_config, load_fleet_config, parse_toml, to_toml};
use freightbid::fleet::io::{read_drivers_csv, write_drivers_csv};
use freightbid::harness::{
    curve_deviation, emit_bandit_metrics, emit_fleet_metrics, network_registry, run_bandit_experiment, run_fleet_experiment,
    synthetic_history, BanditResult, BanditRunConfig, FleetRunConfig, SummaryRow,
};
use freightbid::policies::PolicyName;
use freightbid::rng::{self, label};
use freightbid::theory::{run_all, write_report, TheoryConfig};

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "freightbid", version, about = "Dynamic bidding for truckload brokerage")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML run configuration; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (must not exist or be empty unless --force).
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated policy list, e.g. `kg,exploit`.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<PolicyName>>,
    /// Write into a non-empty output directory, overwriting files.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Regret of each policy against a simulated truth.
    BanditSim(RunArgs),
    /// Revenue and acceptance of each policy with carrier answers from the fleet simulator.
    FleetSim {
        #[command(flatten)]
        run: RunArgs,
        /// Replay this offered-load trace instead of sampling offers.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Start every rep from this driver CSV.
        #[arg(long)]
        drivers: Option<PathBuf>,
    },
    /// Numerical checks of the KG policy's properties.
    CheckTheory {
        #[arg(long)]
        out: PathBuf,
        /// TOML overrides for suite sizes.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Writes an offer trace, a starting fleet and a quote history for a fleet configuration.
    GenScenario {
        #[command(flatten)]
        run: RunArgs,
        /// Quotes in the synthetic history.
        #[arg(long, default_value_t = 2000)]
        history: usize,
    },
    /// Fits the L1-regularized carrier and shipper models to a quote history.
    Fit {
        /// History CSV (`n,origin,destination,equipment,miles,p,y_c,y_s`).
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// L1 weight against the mean loss (default: one over the number of quotes).
        #[arg(long)]
        lambda: Option<f64>,
        /// A region gets an indicator when it appears more than this many times.
        #[arg(long, default_value_t = 1)]
        min_count: u64,
        #[arg(long)]
        force: bool,
    },
}

enum Failure {
    Config(String),
    Run(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(_) | Failure::Check(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Run(m) | Failure::Check(m) => m,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn run_err(e: impl std::fmt::Display) -> Failure {
    Failure::Run(e.to_string())
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::BanditSim(args) => bandit_sim(&args),
        Command::FleetSim { run, trace, drivers } => fleet_sim(&run, trace.as_deref(), drivers.as_deref()),
        Command::CheckTheory { out, config, force } => check_theory(&out, config.as_deref(), force),
        Command::GenScenario { run, history } => gen_scenario(&run, history),
        Command::Fit { history, out, lambda, min_count, force } => fit(&history, &out, lambda, min_count, force),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

/// Creates `dir`, refusing a non-empty one without `force`.
fn prepare_out(dir: &Path, force: bool) -> Outcome {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(Failure::Config(format!("{} exists and is not a directory", dir.display())));
        }
        let occupied = std::fs::read_dir(dir).map_err(run_err)?.next().is_some();
        if occupied && !force {
            return Err(Failure::Config(format!("{} is not empty; pass --force to overwrite", dir.display())));
        }
    }
    std::fs::create_dir_all(dir).map_err(run_err)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    Ok(BufReader::new(File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?))
}

/// Manifest first, then the effective configuration.
fn start_run<T: serde::Serialize>(command: &str, args: &RunArgs, seed: u64, config: &T) -> Outcome {
    prepare_out(&args.out, args.force)?;
    let text = to_toml(config).map_err(run_err)?;
    RunManifest::new(command, args.config.as_deref(), seed, &args.out, &text).write(&args.out.join("manifest.json")).map_err(run_err)?;
    std::fs::write(args.out.join("config.toml"), text).map_err(run_err)
}

fn print_summary(rows: &[SummaryRow], metric: &str) {
    for r in rows.iter().filter(|r| r.metric == metric) {
        println!("{:>10}  {metric} {:.4} (se {:.4}, {} reps)", r.policy, r.mean, r.se, r.reps);
    }
}

fn bandit_config(args: &RunArgs) -> Result<BanditRunConfig, Failure> {
    let mut c = match &args.config {
        Some(p) => load_bandit_config(p).map_err(config_err)?,
        None => BanditRunConfig::default(),
    };
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(p) = &args.policies {
        c.policies = p.clone();
    }
    c.validate().map_err(config_err)?;
    Ok(c)
}

/// `policy,rep,r,n,mad`: deviation of the most probable candidate from the
/// truth just before each resampling event.
fn write_bagging_csv(result: &BanditResult, path: &Path) -> Outcome {
    let mut w = create(path)?;
    use std::io::Write;
    writeln!(w, "policy,rep,r,n,mad").map_err(run_err)?;
    for p in &result.policies {
        for rep in &p.reps {
            for s in &rep.snapshots {
                let mad = curve_deviation(&s.map, &result.truth, &result.registry, &result.heldout, &result.grid).map_err(run_err)?;
                writeln!(w, "{},{},{},{},{}", p.policy, rep.rep, s.r, s.n, mad).map_err(run_err)?;
            }
        }
    }
    w.flush().map_err(run_err)
}

fn bandit_sim(args: &RunArgs) -> Outcome {
    let config = bandit_config(args)?;
    start_run("bandit-sim", args, config.seed, &config)?;
    let result = run_bandit_experiment(&config).map_err(run_err)?;
    let (_, summary) = emit_bandit_metrics(&result, &args.out).map_err(run_err)?;
    write_bagging_csv(&result, &args.out.join("bagging.csv"))?;
    for p in &result.policies {
        if p.fallbacks > 0 {
            eprintln!("warning: {} used its fallback price in {} reps", p.policy, p.fallbacks);
        }
    }
    print_summary(&summary, "avg_regret");
    Ok(())
}

fn fleet_config(args: &RunArgs) -> Result<FleetRunConfig, Failure> {
    let mut c = match &args.config {
        Some(p) => load_fleet_config(p).map_err(config_err)?,
        None => FleetRunConfig::default(),
    };
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(p) = &args.policies {
        c.policies = p.clone();
    }
    c.validate().map_err(config_err)?;
    Ok(c)
}

fn fleet_booking(config: &FleetRunConfig) -> Result<freightbid::booking::BookingConfig, Failure> {
    config.network.build(&mut rng::stream(config.seed, &[label::CONTEXT])).map_err(config_err)
}

fn fleet_sim(args: &RunArgs, trace: Option<&Path>, drivers: Option<&Path>) -> Outcome {
    let mut config = fleet_config(args)?;
    if let Some(path) = trace {
        let booking = fleet_booking(&config)?;
        let offers = read_trace_csv(open(path)?, &booking).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        config.trace = Some(offers);
    }
    if let Some(path) = drivers {
        let d = read_drivers_csv(open(path)?).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        config.start_drivers = Some(d);
    }
    start_run("fleet-sim", args, config.seed, &config)?;
    let result = run_fleet_experiment(&config).map_err(|e| match e {
        freightbid::Error::Config(m) => Failure::Config(m),
        e => run_err(e),
    })?;
    let (_, summary) = emit_fleet_metrics(&result, &args.out).map_err(run_err)?;
    print_summary(&summary, "avg_revenue");
    print_summary(&summary, "accept_rate");
    Ok(())
}

fn check_theory(out: &Path, config: Option<&Path>, force: bool) -> Outcome {
    let config: TheoryConfig = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            parse_toml(&text, &p.display().to_string()).map_err(config_err)?
        }
        None => TheoryConfig::default(),
    };
    prepare_out(out, force)?;
    let text = to_toml(&config).map_err(run_err)?;
    RunManifest::new("check-theory", None, config.seed, out, &text).write(&out.join("manifest.json")).map_err(run_err)?;
    let results = run_all(&config);
    write_report(&results, create(&out.join("theory.csv"))?).map_err(run_err)?;
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed checks: {}", failed.join(", "))))
    }
}

fn gen_scenario(args: &RunArgs, history: usize) -> Outcome {
    let config = fleet_config(args)?;
    start_run("gen-scenario", args, config.seed, &config)?;
    let booking = fleet_booking(&config)?;
    let mut offers = Vec::new();
    for t in 0..config.batches {
        offers.extend(booking.sample_offers(t, &mut rng::stream(config.seed, &[label::BOOKING, 0, t as u64])));
    }
    write_trace_csv(&offers, create(&args.out.join("offers.csv"))?).map_err(run_err)?;
    let drivers = config.drivers.generate(&booking.network, &config.fleet, &mut rng::stream(config.seed, &[label::DRIVERS, 0]));
    write_drivers_csv(&drivers, create(&args.out.join("drivers.csv"))?).map_err(run_err)?;
    let registry = network_registry(&booking).map_err(run_err)?;
    let truth = config.truth_prior.draw(&registry, &mut rng::stream(config.seed, &[label::TRUTH]));
    let quotes = synthetic_history(&booking, &truth, &registry, history, (0.5, 4.5), config.seed, 0).map_err(run_err)?;
    write_history_csv(&quotes, create(&args.out.join("history.csv"))?).map_err(run_err)?;
    println!("{} offers, {} drivers, {} quotes", offers.len(), drivers.total(), quotes.len());
    Ok(())
}

fn fit(history: &Path, out: &Path, lambda: Option<f64>, min_count: u64, force: bool) -> Outcome {
    let records = read_history_csv(open(history)?).map_err(|e| Failure::Config(format!("{}: {e}", history.display())))?;
    if records.is_empty() {
        return Err(Failure::Config(format!("{}: no quotes", history.display())));
    }
    let lambda = lambda.unwrap_or(1.0 / records.len() as f64);
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Failure::Config(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    let mut origins = std::collections::BTreeMap::<RegionId, u64>::new();
    let mut destinations = std::collections::BTreeMap::<RegionId, u64>::new();
    for r in &records {
        *origins.entry(r.b.origin).or_default() += 1;
        *destinations.entry(r.b.destination).or_default() += 1;
    }
    let registry = build_feature_registry(&origins, &destinations, min_count).map_err(config_err)?;
    let (carrier, shipper) = design_matrices(&records, &registry).map_err(run_err)?;
    let cfg = FitConfig { lambda, ..FitConfig::default() };
    prepare_out(out, force)?;
    for (name, data) in [("carrier", &carrier), ("shipper", &shipper)] {
        let fitted = fit_l1_logistic(data, &cfg).map_err(run_err)?;
        write_weights_csv(&registry, &fitted.weights, create(&out.join(format!("{name}_weights.csv")))?).map_err(run_err)?;
        println!(
            "{name}: {} rows, {} nonzero of {}, objective {:.6}{}",
            data.len(),
            fitted.weights.weights.iter().filter(|w| **w != 0.0).count(),
            fitted.weights.len(),
            fitted.objective,
            if fitted.converged { "" } else { " (not converged)" }
        );
    }
    write_registry(&registry, create(&out.join("registry.json"))?).map_err(run_err)
}
