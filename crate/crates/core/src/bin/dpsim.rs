//! `dpsim`: run pricing tournaments, rebuild reports, inspect competitions.

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dpsim::config::ConfigFile;
use dpsim::engine::{CompetitionKind, TraceLevel};
use dpsim::persist::{read_simulation, trace_file_name};
use dpsim::pipeline::{execute, REPORT_DIR};
use dpsim::report::{build_report, slot_labels, ReportBundle};

#[derive(Parser)]
#[command(name = "dpsim", version, about = "Dynamic pricing competition simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a tournament, write traces and the report.
    Run(RunArgs),
    /// Rebuild the report from the traces in a run directory.
    Report {
        /// Run directory holding the trace files
        #[arg(long)]
        out: PathBuf,
        /// Only use simulations 0..K.
        #[arg(long)]
        first_k: Option<u64>,
    },
    /// Print one competition's price and revenue series as CSV.
    Inspect {
        /// Run directory holding the trace files
        #[arg(long)]
        out: PathBuf,
        /// Simulation index
        #[arg(long)]
        sim: u64,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Roster slots of the duopoly, e.g. `0,3`.
        #[arg(long, value_delimiter = ',')]
        pair: Option<Vec<usize>>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of simulations [default: 5000]
    #[arg(long, allow_negative_numbers = true)]
    sims: Option<i64>,
    /// Periods per competition [default: 1000]
    #[arg(long, allow_negative_numbers = true)]
    periods: Option<i64>,
    /// Master seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated strategy identifiers; duplicates allowed.
    #[arg(long, value_delimiter = ',')]
    roster: Option<Vec<String>>,
    /// Run directory [default: dpsim-out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    parallel: Option<usize>,
    #[arg(long, value_enum)]
    trace_level: Option<Level>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Full,
    Revenue,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Oligopoly,
    Duopoly,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command.dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

impl Command {
    fn dispatch(self) -> Result<()> {
        match self {
            Command::Run(args) => run(args),
            Command::Report { out, first_k } => {
                let report = build_report(&out, first_k)?;
                report.write_csv(&out.join(REPORT_DIR))?;
                print_scores(&report);
                Ok(())
            }
            Command::Inspect { out, sim, kind, pair } => inspect(&out, sim, kind, pair.as_deref()),
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(v) = args.sims {
        file.simulations = v;
    }
    if let Some(v) = args.periods {
        file.periods = v;
    }
    if let Some(v) = args.seed {
        file.seed = v;
    }
    if let Some(v) = args.roster {
        file.roster = v;
    }
    if let Some(v) = args.out {
        file.out = v;
    }
    if let Some(v) = args.parallel {
        file.parallelism = v;
    }
    if let Some(v) = args.trace_level {
        file.trace_level = match v {
            Level::Full => TraceLevel::Full,
            Level::Revenue => TraceLevel::Revenue,
        };
    }
    let config = file.resolve()?;
    let started = std::time::Instant::now();
    let outcome = execute(&config)?;
    log::info!(
        "{} simulations in {:.1} s; traces in {}, report in {}",
        outcome.manifest.files.len(),
        started.elapsed().as_secs_f64(),
        config.out.display(),
        config.out.join(REPORT_DIR).display()
    );
    print_scores(&outcome.report);
    Ok(())
}

fn print_scores(report: &ReportBundle) {
    println!("{:<12} {:>10} {:>10} {:>10} {:>5}", "competitor", "oligopoly", "duopoly", "final", "rank");
    let mut rows: Vec<_> = report.scores.iter().collect();
    rows.sort_by_key(|r| r.rank);
    for r in rows {
        println!("{:<12} {:>10.4} {:>10.4} {:>10.4} {:>5}", r.competitor, r.oligopoly_share, r.duopoly_share, r.final_score, r.rank);
    }
}

fn inspect(out: &Path, sim: u64, kind: Kind, pair: Option<&[usize]>) -> Result<()> {
    let path = out.join(trace_file_name(sim));
    let trace = read_simulation(&path).with_context(|| format!("simulation {sim}"))?;
    let competition = match (kind, pair) {
        (Kind::Oligopoly, None) => trace.oligopoly(),
        (Kind::Oligopoly, Some(_)) => bail!("--pair applies to duopolies only"),
        (Kind::Duopoly, None) => bail!("--kind duopoly needs --pair J,K"),
        (Kind::Duopoly, Some(&[a, b])) => {
            let (j, k) = (a.min(b), a.max(b));
            trace
                .duopolies()
                .iter()
                .find(|c| c.id.kind == CompetitionKind::Duopoly { first: j, second: k })
                .with_context(|| format!("no duopoly between slots {a} and {b}"))?
        }
        (Kind::Duopoly, Some(_)) => bail!("--pair takes exactly two slots"),
    };
    if competition.periods.is_empty() {
        bail!("simulation {sim} was recorded without per-period data (trace level `revenue`)");
    }
    let labels = slot_labels(&trace.header.roster);
    let names: Vec<&str> = competition.participants.iter().map(|&s| labels[s].as_str()).collect();

    let mut w = csv::Writer::from_writer(io::stdout().lock());
    let mut header = vec!["period".to_string()];
    header.extend(names.iter().map(|n| format!("price:{n}")));
    header.extend(names.iter().map(|n| format!("revenue:{n}")));
    w.write_record(&header)?;
    for (t, p) in competition.periods.iter().enumerate() {
        let mut rec = vec![(t + 1).to_string()];
        rec.extend(p.prices.iter().map(f64::to_string));
        rec.extend(p.outcome.revenue.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
