//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::accountant::{self, RdpCurve, DEFAULT_ORDERS};
use crate::dp::PrivacyParams;
use crate::error::{Error, Result};
use crate::trainer::timing_report;

use super::config::ExperimentConfig;
use super::presets::{self, PresetName};
use super::report;
use super::sweep;

#[derive(Debug, Parser)]
#[command(name = "specclip", version, about = "DP-SGD with spectrally controlled clipping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model from a JSON config.
    Train(TrainArgs),
    /// Run a preset grid over several seeds.
    Sweep(SweepArgs),
    /// Privacy accounting for the subsampled Gaussian mechanism.
    Accountant(AccountantArgs),
    /// Summarise a run log CSV.
    InspectLog(InspectArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// JSON config; desk defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config's `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    preset: String,
    /// Base JSON config the preset varies; desk defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// First seed; runs use `seed..seed+repeats`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AccountantArgs {
    /// Poisson sampling rate.
    #[arg(long)]
    q: f64,
    /// Noise multiplier (omit with --target-epsilon).
    #[arg(long, required_unless_present = "target_epsilon")]
    sigma: Option<f64>,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    delta: f64,
    /// Solve for the noise multiplier reaching this epsilon.
    #[arg(long, conflicts_with = "sigma")]
    target_epsilon: Option<f64>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    path: PathBuf,
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::desk_default()),
    }
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_ref())?;
    if let Some(seed) = a.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = a.out {
        cfg.output.dir = out;
    }
    cfg.train_config()?;
    let log = sweep::run_config(&cfg)?;
    let dir = &cfg.output.dir;
    let csv = report::write_run(dir, &cfg.output.name, &log)?;
    report::write_atomic(
        &dir.join(format!("{}.config.json", cfg.output.name)),
        cfg.canonical_json().as_bytes(),
    )?;
    let t = timing_report(&log, None);
    println!("log          {}", csv.display());
    println!("epsilon      {:.4} (delta {}, order {})", log.epsilon, log.delta, log.best_order);
    println!("test acc     {:.4}", log.final_accuracy);
    println!("C median/T   {:.4} / {:.4}", log.median_clip(), log.final_c);
    println!("time         {:.2}s (probe share {:.2}%)", t.total, t.probe_share_pct);
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let name: PresetName = a.preset.parse()?;
    let base = load_config(a.config.as_ref())?;
    let seed = a.seed.unwrap_or(base.trainer.seed);
    let out = a.out.unwrap_or_else(|| base.output.dir.clone());
    let preset = presets::expand(name, &base);
    let outcome = sweep::run_sweep(&preset, a.repeats, seed, Some(&out))?;
    println!(
        "{name}: {} runs, q={} sigma={} T={} delta={}",
        outcome.runs.len(),
        outcome.privacy.q,
        outcome.privacy.sigma,
        outcome.privacy.total_steps,
        outcome.privacy.delta
    );
    print!("{}", sweep::format_summary(&outcome.summary));
    println!("tables in {}", out.display());
    Ok(())
}

fn cmd_accountant(a: AccountantArgs) -> Result<()> {
    let sigma = match (a.sigma, a.target_epsilon) {
        (Some(s), _) => s,
        (None, Some(target)) => {
            let s = accountant::sigma_for_epsilon(a.q, a.steps, a.delta, target, 1e-3)?;
            println!("sigma        {s}");
            s
        }
        (None, None) => unreachable!("clap requires one of them"),
    };
    let p = PrivacyParams::new(a.q, sigma, a.steps, a.delta)?;
    let curve = accountant::compose(&RdpCurve::subsampled_gaussian(p.q, p.sigma, &DEFAULT_ORDERS)?, p.total_steps);
    let (eps, order) = accountant::rdp_to_dp(&curve, p.delta)?;
    println!("epsilon      {eps}");
    println!("best order   {order}");
    println!("{:>8} {:>24} {:>24}", "order", "rdp", "epsilon");
    for c in accountant::candidates(&curve, p.delta) {
        println!("{:>8} {:>24} {:>24}", c.order, c.rdp, c.epsilon);
    }
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> Result<()> {
    let (records, summary) = report::read_run(&a.path)?;
    print!("{}", report::describe(&records, summary.as_ref()));
    Ok(())
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Accountant(a) => cmd_accountant(a),
        Command::InspectLog(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        1
    } else {
        2
    }
}
