//! `seqcoord`: rate solving, coordination experiments, and capacity bounds
//! over JSON experiment configs.
//!
//! Subcommands: `rate`, `simulate`, `bounds`, `selftest`. Set the log level
//! with the `SEQCOORD_LOG` environment variable. Exit codes: 0 ok,
//! 2 config error, 3 guard violation, 4 I/O error.

mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use seqcoord_core::sim::run_experiment;
use seqcoord_core::solver::{awgn_capacity_avg, awgn_capacity_peak, kop_bound, solve_rate};
use seqcoord_core::tree::{sample_codebook, NODE_GUARD};
use seqcoord_core::CoordError;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Guard(String),
    Io(String),
    Other(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Guard(m) => write!(f, "guard violation: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Other(m) => write!(f, "error: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Guard(_) => 3,
            CliError::Io(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<CoordError> for CliError {
    fn from(e: CoordError) -> Self {
        match e {
            CoordError::GuardExceeded(m) => CliError::Guard(m),
            CoordError::InvalidInput(m) | CoordError::DimensionMismatch(m) => CliError::Config(m),
            CoordError::NumericFailure(m) => CliError::Other(m),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "seqcoord",
    version,
    about = "Sequential empirical coordination at desk scale: rates, tree-code simulations, bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the sequential rate-distortion problem; prints a summary and
    /// writes rate.json
    Rate(RunArgs),
    /// Run the experiment ladder; writes experiment.json, experiment.csv,
    /// and codebook_n*.json for materialized trees
    Simulate(RunArgs),
    /// Print the bound table: the rate, the test-channel bound, and the
    /// AWGN capacities
    Bounds(RunArgs),
    /// Run the numerical acceptance suite and print one line per criterion
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// Output directory for result files
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the config's RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo trials (0 = library default)
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SEQCOORD_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rate(args) => cmd_rate(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Bounds(args) => cmd_bounds(&args),
        Command::Selftest => cmd_selftest(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn read_config(args: &RunArgs) -> Result<config::LoadedConfig, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", args.config.display())))?;
    config::parse_config(&text)
}

fn in_pool<T: Send>(
    threads: usize,
    job: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    if threads == 0 {
        return job();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Other(format!("thread pool: {e}")))?;
    pool.install(job)
}

fn cmd_rate(args: &RunArgs) -> Result<ExitCode, CliError> {
    let loaded = read_config(args)?;
    let manifest = output::RunManifest::begin(
        &loaded.config_hash,
        args.seed.unwrap_or(loaded.file.seed),
    );
    log::info!(
        "solving rate for config {} ({} states, {} actions)",
        loaded.config_hash,
        loaded.state_alphabet.size(),
        loaded.action_alphabet.size()
    );
    let sol = solve_rate(&loaded.instance)?;
    println!("rate                {:.10} nats/step", sol.rate);
    println!("achieved_constraint {:.10}", sol.achieved_constraint);
    println!("iterations          {}", sol.report.iterations);
    println!("residual            {:.3e}", sol.report.residual);
    println!("lower_bound         {:.10}", sol.report.lower_bound);
    let manifest = manifest.finish();
    let value = output::solution_json(&sol, &manifest);
    let path = args.out.join("rate.json");
    output::write_text(&path, &serde_json::to_string_pretty(&value).unwrap())?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: &RunArgs) -> Result<ExitCode, CliError> {
    let loaded = read_config(args)?;
    let experiment = loaded.experiment(args.seed)?;
    let manifest = output::RunManifest::begin(&loaded.config_hash, experiment.seed);
    log::info!(
        "simulating ladder {:?} with {} trials",
        experiment.n_ladder,
        experiment.trials
    );
    let result = in_pool(args.threads, || Ok(run_experiment(&experiment)?))?;
    for rec in &result.records {
        println!(
            "N={:<5} distortion {:.4} ± {:.4}  H/NT {:.4} ({})  cap {:.4}",
            rec.n,
            rec.distortion_mean,
            rec.distortion_se,
            rec.entropy_norm,
            output::mode_name(rec.entropy_mode),
            rec.entropy_cap,
        );
    }
    println!("rate_reference {:.6}", result.rate_reference);

    let manifest = manifest.finish();
    let json_path = args.out.join("experiment.json");
    output::write_text(
        &json_path,
        &serde_json::to_string_pretty(&output::experiment_json(&result, &manifest)).unwrap(),
    )?;
    let csv_path = args.out.join("experiment.csv");
    output::write_text(&csv_path, &output::experiment_csv(&result))?;
    println!("wrote {} and {}", json_path.display(), csv_path.display());

    // persist the codebooks of materialized trees for reproducibility
    for rec in &result.records {
        let mut nodes: u128 = 0;
        let mut width: u128 = 1;
        for &m in &rec.branch_counts {
            width = width.saturating_mul(m as u128);
            nodes = nodes.saturating_add(width);
        }
        if nodes <= NODE_GUARD as u128 {
            let book = sample_codebook(
                loaded.instance.source(),
                &result.coding_policy,
                rec.n,
                &rec.branch_counts,
                experiment.seed,
            )?;
            let path = args.out.join(format!("codebook_n{}.json", rec.n));
            let value = output::codebook_json(&book, &loaded.action_alphabet);
            // the tree format must reproduce the codebook exactly
            let reread = output::codebook_from_json(&value)?;
            for (p, tuple) in book.nodes() {
                if reread.node(&p) != Some(tuple) {
                    return Err(CliError::Other(format!(
                        "codebook round-trip mismatch at path {p:?}"
                    )));
                }
            }
            output::write_text(&path, &serde_json::to_string_pretty(&value).unwrap())?;
            log::info!("wrote {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bounds(args: &RunArgs) -> Result<ExitCode, CliError> {
    let loaded = read_config(args)?;
    let delta = loaded.instance.delta();
    println!("{:<14} {:<14} {}", "bound", "value (nats)", "definition");
    let sol = solve_rate(&loaded.instance)?;
    println!(
        "{:<14} {:<14.8} min I(X_[T];U_[T])/T s.t. avg seminorm <= {delta}",
        "R_T(delta)", sol.rate
    );
    if loaded.instance.source().horizon() == 1 {
        match &loaded.action_metric {
            Some(metric) => {
                let mu = loaded.instance.source().factor(1).row(0).to_vec();
                let mu = seqcoord_core::prob::Distribution::new(mu)
                    .map_err(CliError::from)?;
                let bound = kop_bound(&mu, loaded.instance.target().factor(1), metric, delta)?;
                println!(
                    "{:<14} {:<14.8} min I(X;U_hat) s.t. E d(U,U_hat) <= {delta}",
                    "R_bar(delta)", bound.value
                );
            }
            None => println!(
                "{:<14} {:<14} needs `action_metric` in the config",
                "R_bar(delta)", "n/a"
            ),
        }
    } else {
        println!("{:<14} {:<14} n/a (T>1)", "R_bar(delta)", "-");
    }
    for &s in &loaded.file.awgn_snr {
        let cav = awgn_capacity_avg(s)?;
        println!("{:<14} {:<14.10} (1/2)·ln(1+s) at s = {s}", "C_av(s)", cav);
        let cpk = awgn_capacity_peak(s, &loaded.peak_grid)?;
        println!(
            "{:<14} {:<14.10} sup I(Y; sqrt(s)·Y+Z), |Y|<=1, grid lower bound (BA gap {:.1e}) at s = {s}",
            "C_pk(s)", cpk.value, cpk.ba_gap
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_selftest() -> Result<ExitCode, CliError> {
    let outcomes = seqcoord_core::acceptance::run_all();
    let mut all_ok = true;
    for o in &outcomes {
        println!("{}", o.line());
        all_ok &= o.passed;
    }
    if all_ok {
        println!("all {} criteria passed", outcomes.len());
        Ok(ExitCode::SUCCESS)
    } else {
        Err(CliError::Other("acceptance criteria failed".into()))
    }
}
