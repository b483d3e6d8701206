use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use covbai::bench::{self, AlgoKind, BenchConfig};
use covbai::complexity;
use covbai::environments::{scenario, PRESET_NAMES};
use covbai::pairwise::DEFAULT_MAX_ROUNDS;
use covbai::{ConfidenceSchedule, Error};

#[derive(Parser)]
#[command(name = "covbai", version, about = "Best-arm identification with joint queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo runs over scenarios x algorithms, written as CSV.
    Bench(BenchArgs),
    /// One traced run.
    Run(RunArgs),
    /// Complexity measures and bounds of an instance.
    Bounds(BoundsArgs),
    /// List preset scenarios.
    Scenarios,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ROUNDS)]
    max_rounds: u64,
    /// Replace the oversampling multiplier of `pairwise` and `convex`.
    #[arg(long)]
    oversample_mult: Option<f64>,
    /// Use delta itself in the confidence schedule instead of delta / 4.
    #[arg(long)]
    raw_delta: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated preset names or instance JSON paths.
    #[arg(long, value_delimiter = ',', required = true)]
    scenarios: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "pairwise,hoeffding")]
    algos: Vec<String>,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[command(flatten)]
    common: Common,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run trials on one thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, visible_alias = "scenarios")]
    scenario: String,
    #[arg(long, visible_alias = "algos", default_value = "pairwise")]
    algo: String,
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, visible_alias = "scenarios")]
    scenario: String,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Also write the report as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::UnknownScenario(_) | Error::UnknownAlgo(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(command: Command) -> covbai::Result<()> {
    match command {
        Command::Bench(a) => cmd_bench(a),
        Command::Run(a) => cmd_run(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Scenarios => cmd_scenarios(),
    }
}

fn parse_algos(names: &[String]) -> covbai::Result<Vec<AlgoKind>> {
    names.iter().map(|s| s.trim().parse()).collect()
}

fn cmd_bench(a: BenchArgs) -> covbai::Result<()> {
    let cfg = BenchConfig {
        scenarios: a.scenarios,
        algos: parse_algos(&a.algos)?,
        delta: a.common.delta,
        trials: a.trials,
        seed: a.common.seed,
        max_rounds: a.common.max_rounds,
        raw_delta: a.common.raw_delta,
        oversample_mult: a.common.oversample_mult,
        parallel: !a.serial,
    };
    // Fail on an unwritable destination before spending time on trials.
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    let rows = bench::run_bench(&cfg)?;
    bench::write_csv(&rows, sink)?;
    let summary = bench::format_summary(&bench::summarize(&rows));
    if a.out.is_some() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> covbai::Result<()> {
    let algo: AlgoKind = a.algo.parse()?;
    let inst = scenario(&a.scenario)?;
    let cfg = BenchConfig {
        delta: a.common.delta,
        seed: a.common.seed,
        max_rounds: a.common.max_rounds,
        raw_delta: a.common.raw_delta,
        oversample_mult: a.common.oversample_mult,
        ..BenchConfig::default()
    };
    cfg.validate()?;
    let (res, _) = bench::run_trial(&a.scenario, &inst, algo, a.trial, &cfg)?;
    let sched = ConfidenceSchedule::with_split(cfg.delta, inst.arms(), cfg.raw_delta)?;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{} on {} (K = {}, delta = {}, effective delta = {}, seed = {}, trial = {})",
        algo,
        a.scenario,
        inst.arms(),
        cfg.delta,
        sched.effective_delta(),
        cfg.seed,
        a.trial
    )?;
    for ev in &res.events {
        writeln!(out, "{ev}")?;
    }
    writeln!(
        out,
        "chosen {} (best {}), {} queries over {} rounds, {}",
        res.chosen.0 + 1,
        inst.best().0 + 1,
        res.total_queries,
        res.rounds,
        res.flag
    )?;
    Ok(())
}

fn cmd_bounds(a: BoundsArgs) -> covbai::Result<()> {
    let inst = scenario(&a.scenario)?;
    let report = complexity::report(&inst, a.delta)?;
    println!("{report}");
    if let Some(p) = a.out {
        report.write_csv(BufWriter::new(File::create(p)?))?;
    }
    Ok(())
}

fn cmd_scenarios() -> covbai::Result<()> {
    println!("{:<18}{:>4}{:>6}  kind", "name", "K", "best");
    for name in PRESET_NAMES {
        let inst = scenario(name)?;
        println!("{:<18}{:>4}{:>6}  {:?}", name, inst.arms(), inst.best().0 + 1, inst.kind());
    }
    println!();
    println!("Patterns: fig1-rho-<rho>, fig1-clusters-<n dividing 16>, toy2-<eps>, toy3-<eps>, or a JSON instance file.");
    Ok(())
}
