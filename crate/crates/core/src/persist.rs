//! Trace files and the run manifest.
//!
//! Each simulation is one JSON-lines file `sim-NNNNNN.jsonl`:
//!
//! ```text
//! {"record":"simulation", sim, periods, trace_level, roster, market}
//! {"record":"competition", id, participants}      one per competition,
//! {"record":"period", competition, period, ...}   followed by its periods
//! {"record":"summary", competition, summary, faults}
//! ...
//! {"record":"scorecard", ...}                     last line
//! ```
//!
//! A run directory also holds `manifest.json`, written last. While a run is
//! in progress a `PARTIAL` marker file exists; it is removed on success and
//! left behind if the run aborts.

use std::borrow::Cow;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ResolvedConfig, RunConfig};
use crate::engine::{
    CompetitionId, CompetitionKind, CompetitionSummary, CompetitionTrace, FaultEvent, PeriodRecord, Scorecard, SimulationResult,
    TraceLevel,
};
use crate::market::{MarketParams, PeriodArrivals, PeriodOutcome};
use crate::strategies::StrategyId;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARTIAL_MARKER: &str = "PARTIAL";
pub const FORMAT_VERSION: u32 = 1;

pub fn trace_file_name(sim: u64) -> String {
    format!("sim-{sim:06}.jsonl")
}

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: truncated or malformed trace: {reason}")]
    Truncated { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PersistError + '_ {
    move |source| PersistError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationHeader {
    pub sim: u64,
    pub periods: usize,
    pub trace_level: TraceLevel,
    pub roster: Vec<StrategyId>,
    pub market: MarketParams,
}

/// One simulation as stored on disk: duopolies in order, oligopoly last.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationTrace {
    pub header: SimulationHeader,
    pub competitions: Vec<CompetitionTrace>,
    pub scorecard: Scorecard,
}

impl SimulationTrace {
    pub fn from_result(result: SimulationResult, roster: &[StrategyId], periods: usize, trace_level: TraceLevel) -> Self {
        let header = SimulationHeader { sim: result.sim, periods, trace_level, roster: roster.to_vec(), market: result.params };
        let mut competitions = result.duopolies;
        competitions.push(result.oligopoly);
        Self { header, competitions, scorecard: result.scorecard }
    }

    pub fn oligopoly(&self) -> &CompetitionTrace {
        self.competitions.last().expect("a simulation always has an oligopoly")
    }

    pub fn duopolies(&self) -> &[CompetitionTrace] {
        &self.competitions[..self.competitions.len() - 1]
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        write_line(w, &HeaderLine::new(&self.header))?;
        for (i, c) in self.competitions.iter().enumerate() {
            write_line(w, &Record::Competition { id: c.id, participants: c.participants.clone() })?;
            for (t, p) in c.periods.iter().enumerate() {
                write_line(w, &PeriodLine::new(i, t + 1, p))?;
            }
            write_line(w, &Record::Summary { competition: i, summary: c.summary.clone(), faults: c.faults.clone() })?;
        }
        write_line(w, &Record::Scorecard(self.scorecard.clone()))
    }
}

fn write_line(w: &mut impl Write, record: &impl Serialize) -> io::Result<()> {
    serde_json::to_writer(&mut *w, record)?;
    w.write_all(b"\n")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Competition {
        id: CompetitionId,
        participants: Vec<usize>,
    },
    Period {
        competition: usize,
        period: usize,
        prices: Vec<f64>,
        arrivals: PeriodArrivals,
        sales_sho: Vec<u32>,
        sales_loy: Vec<u32>,
        sales_sci: Vec<u32>,
        revenue: Vec<f64>,
    },
    Summary {
        competition: usize,
        summary: CompetitionSummary,
        faults: Vec<FaultEvent>,
    },
    Scorecard(Scorecard),
}

/// The header is read without the tagged enum or `flatten`: buffered
/// content cannot rebuild the integer-keyed slope maps from JSON string keys.
#[derive(Serialize, Deserialize)]
struct HeaderLine<'a> {
    record: Cow<'a, str>,
    sim: u64,
    periods: usize,
    trace_level: TraceLevel,
    roster: Cow<'a, [StrategyId]>,
    market: Cow<'a, MarketParams>,
}

impl<'a> HeaderLine<'a> {
    fn new(h: &'a SimulationHeader) -> Self {
        Self {
            record: "simulation".into(),
            sim: h.sim,
            periods: h.periods,
            trace_level: h.trace_level,
            roster: Cow::Borrowed(&h.roster),
            market: Cow::Borrowed(&h.market),
        }
    }

    fn into_header(self) -> SimulationHeader {
        SimulationHeader {
            sim: self.sim,
            periods: self.periods,
            trace_level: self.trace_level,
            roster: self.roster.into_owned(),
            market: self.market.into_owned(),
        }
    }
}

/// Borrowing twin of `Record::Period`; keeps the field order identical.
#[derive(Serialize)]
struct PeriodLine<'a> {
    record: &'static str,
    competition: usize,
    period: usize,
    prices: &'a [f64],
    arrivals: PeriodArrivals,
    sales_sho: &'a [u32],
    sales_loy: &'a [u32],
    sales_sci: &'a [u32],
    revenue: &'a [f64],
}

impl<'a> PeriodLine<'a> {
    fn new(competition: usize, period: usize, p: &'a PeriodRecord) -> Self {
        let o = &p.outcome;
        Self {
            record: "period",
            competition,
            period,
            prices: &p.prices,
            arrivals: o.arrivals,
            sales_sho: &o.sales_sho,
            sales_loy: &o.sales_loy,
            sales_sci: &o.sales_sci,
            revenue: &o.revenue,
        }
    }
}

/// Parse and validate one trace file.
pub fn read_simulation(path: &Path) -> Result<SimulationTrace, PersistError> {
    let file = File::open(path).map_err(io_err(path))?;
    let truncated = |reason: String| PersistError::Truncated { path: path.to_path_buf(), reason };

    let mut header: Option<SimulationHeader> = None;
    let mut competitions: Vec<CompetitionTrace> = Vec::new();
    let mut open: Option<CompetitionTrace> = None;
    let mut scorecard: Option<Scorecard> = None;

    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        if scorecard.is_some() {
            return Err(truncated(format!("line {}: data after the scorecard", n + 1)));
        }
        let parse_err = |source| PersistError::Parse { path: path.to_path_buf(), line: n + 1, source };
        if header.is_none() {
            let h: HeaderLine = serde_json::from_str(&line).map_err(parse_err)?;
            if h.record != "simulation" {
                return Err(truncated("first record is not a simulation header".into()));
            }
            header = Some(h.into_header());
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(parse_err)?;
        match record {
            Record::Competition { id, participants } => {
                if open.is_some() {
                    return Err(truncated(format!("line {}: competition without summary", n + 1)));
                }
                open = Some(CompetitionTrace {
                    id,
                    participants,
                    periods: Vec::new(),
                    summary: CompetitionSummary::default(),
                    faults: Vec::new(),
                });
            }
            Record::Period { competition, period, prices, arrivals, sales_sho, sales_loy, sales_sci, revenue } => {
                let Some(c) = open.as_mut().filter(|_| competition == competitions.len()) else {
                    return Err(truncated(format!("line {}: period outside its competition", n + 1)));
                };
                if period != c.periods.len() + 1 {
                    return Err(truncated(format!("line {}: expected period {}, found {period}", n + 1, c.periods.len() + 1)));
                }
                let outcome = PeriodOutcome { arrivals, sales_sho, sales_loy, sales_sci, revenue };
                c.periods.push(PeriodRecord { prices, outcome });
            }
            Record::Summary { competition, summary, faults } => {
                let Some(mut c) = open.take().filter(|_| competition == competitions.len()) else {
                    return Err(truncated(format!("line {}: summary outside its competition", n + 1)));
                };
                c.summary = summary;
                c.faults = faults;
                competitions.push(c);
            }
            Record::Scorecard(s) => scorecard = Some(s),
        }
    }

    let header = header.ok_or_else(|| truncated("empty file".into()))?;
    let scorecard = scorecard.ok_or_else(|| truncated("missing scorecard".into()))?;
    let m = header.roster.len();
    if competitions.len() != m * (m - 1) / 2 + 1 {
        return Err(truncated(format!("{} competitions, expected {}", competitions.len(), m * (m - 1) / 2 + 1)));
    }
    if competitions.last().map(|c| c.id.kind) != Some(CompetitionKind::Oligopoly) {
        return Err(truncated("last competition is not the oligopoly".into()));
    }
    for c in &competitions {
        let expected = if header.trace_level == TraceLevel::Full { header.periods } else { 0 };
        if c.periods.len() != expected || c.summary.periods != header.periods {
            return Err(truncated(format!("competition {} holds {} periods", c.id.index, c.periods.len())));
        }
    }
    Ok(SimulationTrace { header, competitions, scorecard })
}

/// Trace files in a run directory, sorted by name.
pub fn list_trace_files(dir: &Path) -> Result<Vec<PathBuf>, PersistError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("sim-") && n.ends_with(".jsonl")))
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub generator: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: ResolvedConfig,
    pub files: Vec<String>,
    pub status: String,
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, PersistError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|source| PersistError::Parse { path, line: 1, source })
}

/// Writes one run directory.
pub struct TraceWriter {
    dir: PathBuf,
    config: RunConfig,
    files: Vec<String>,
}

impl TraceWriter {
    /// Prepare `config.out`, removing traces and manifest of any earlier run
    /// there, and drop the partial-output marker.
    pub fn create(config: &RunConfig) -> Result<Self, PersistError> {
        let dir = config.out.clone();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for stale in list_trace_files(&dir)? {
            fs::remove_file(&stale).map_err(io_err(&stale))?;
        }
        let manifest = dir.join(MANIFEST_FILE);
        if manifest.exists() {
            fs::remove_file(&manifest).map_err(io_err(&manifest))?;
        }
        let marker = dir.join(PARTIAL_MARKER);
        fs::write(&marker, format!("run {} in progress or aborted\n", config.hash())).map_err(io_err(&marker))?;
        Ok(Self { dir, config: config.clone(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, trace: &SimulationTrace) -> Result<(), PersistError> {
        let name = trace_file_name(trace.header.sim);
        let path = self.dir.join(&name);
        let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        trace.write_to(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
        self.files.push(name);
        Ok(())
    }

    /// Write the manifest and remove the partial marker.
    pub fn finish(self) -> Result<Manifest, PersistError> {
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            generator: format!("dpsim {}", env!("CARGO_PKG_VERSION")),
            config_hash: self.config.hash(),
            seed: self.config.seed,
            config: self.config.resolved(),
            files: self.files,
            status: "complete".into(),
        };
        let path = self.dir.join(MANIFEST_FILE);
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        json.push('\n');
        fs::write(&path, json).map_err(io_err(&path))?;
        let marker = self.dir.join(PARTIAL_MARKER);
        fs::remove_file(&marker).map_err(io_err(&marker))?;
        Ok(manifest)
    }
}
