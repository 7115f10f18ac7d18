//! End-to-end run: tournament, trace files, manifest and report.

use thiserror::Error;

use crate::config::RunConfig;
use crate::engine::{run_tournament, TournamentError, TournamentSummary};
use crate::persist::{Manifest, PersistError, SimulationTrace, TraceWriter};
use crate::report::{ReportBuilder, ReportBundle, ReportError};
use crate::strategies::build_roster;

pub const REPORT_DIR: &str = "report";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Tournament(#[from] TournamentError<ReportOrPersist>),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

/// Failure inside the per-simulation sink.
#[derive(Debug, Error)]
pub enum ReportOrPersist {
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

pub struct RunOutcome {
    pub summary: TournamentSummary,
    pub manifest: Manifest,
    pub report: ReportBundle,
}

/// Run the configured tournament into `config.out`.
///
/// Trace files are written in simulation order whatever the parallelism, so
/// equal configurations give byte-identical directories. On error the
/// partial-output marker stays in place.
pub fn execute(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let roster = build_roster(&config.roster, &config.strategies);
    let settings = config.tournament_settings();
    let mut writer = TraceWriter::create(config)?;
    let mut report = ReportBuilder::new(&config.roster);
    log::info!(
        "running {} simulations x {} periods, roster {:?}, into {}",
        config.simulations,
        config.periods,
        config.roster,
        config.out.display()
    );
    let summary = run_tournament(&roster, &settings, |result| -> Result<(), ReportOrPersist> {
        let sim = result.sim;
        let trace = SimulationTrace::from_result(result, &config.roster, config.periods, config.trace_level);
        writer.write(&trace)?;
        report.add(&trace)?;
        if (sim + 1) % 100 == 0 {
            log::info!("{} / {} simulations", sim + 1, config.simulations);
        }
        Ok(())
    })?;
    let report = report.finish();
    report.write_csv(&config.out.join(REPORT_DIR))?;
    let manifest = writer.finish()?;
    Ok(RunOutcome { summary, manifest, report })
}
