//! Simulations (all duopolies plus one oligopoly on a shared market) and
//! tournaments of many simulations.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::competition::{run_competition, CompetitionId, CompetitionKind, CompetitionSettings, CompetitionTrace, TraceLevel};
use super::scoring::{score_simulation, Scorecard};
use super::strategy::StrategyFactory;
use crate::market::{sample_market_params, MarketError, MarketParams};
use crate::rng::RngStream;

/// Shared handle to a roster entry.
pub type Roster = Vec<Arc<dyn StrategyFactory>>;

/// Default per-call step budget; generous enough that no shipped strategy
/// reaches it in normal operation.
pub const DEFAULT_STEP_BUDGET: u64 = 2_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub master_seed: u64,
    pub periods: usize,
    pub trace_level: TraceLevel,
    pub step_budget: u64,
}

impl SimulationSettings {
    pub fn new(master_seed: u64, periods: usize) -> Self {
        Self { master_seed, periods, trace_level: TraceLevel::Full, step_budget: DEFAULT_STEP_BUDGET }
    }

    fn competition(&self) -> CompetitionSettings {
        CompetitionSettings { periods: self.periods, trace_level: self.trace_level, step_budget: self.step_budget }
    }
}

/// Everything one simulation produced.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationResult {
    pub sim: u64,
    pub params: MarketParams,
    /// Lexicographic over `(j, k)` with `j < k`.
    pub duopolies: Vec<CompetitionTrace>,
    pub oligopoly: CompetitionTrace,
    pub scorecard: Scorecard,
}

/// Roster slot pairs of all duopolies, in competition order.
pub fn duopoly_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|j| (j + 1..m).map(move |k| (j, k))).collect()
}

fn simulation_stream(master_seed: u64, sim: u64) -> RngStream {
    RngStream::from_seed(master_seed).child("simulation").child_index(sim)
}

/// Run every duopoly and the oligopoly of simulation `sim`.
pub fn run_simulation(roster: &[Arc<dyn StrategyFactory>], sim: u64, settings: &SimulationSettings) -> Result<SimulationResult, MarketError> {
    let m = roster.len();
    let root = simulation_stream(settings.master_seed, sim);
    let params = sample_market_params(m, &mut root.child("market-params"))?;
    let comp_settings = settings.competition();

    let run = |index: usize, kind: CompetitionKind, slots: Vec<usize>| {
        let comp = root.child("competition").child_index(index as u64);
        let strategies = slots
            .iter()
            .enumerate()
            .map(|(pos, &slot)| roster[slot].create(comp.child("strategy").child_index(pos as u64)))
            .collect();
        let id = CompetitionId { sim, index, kind };
        run_competition(id, slots, strategies, &params, &comp_settings, &mut comp.child("market"))
    };

    let pairs = duopoly_pairs(m);
    let mut duopolies = Vec::with_capacity(pairs.len());
    let mut duopoly_revenue = vec![vec![0.0; m]; m];
    for (index, &(j, k)) in pairs.iter().enumerate() {
        let trace = run(index, CompetitionKind::Duopoly { first: j, second: k }, vec![j, k])?;
        duopoly_revenue[j][k] = trace.revenue()[0];
        duopoly_revenue[k][j] = trace.revenue()[1];
        duopolies.push(trace);
    }
    let oligopoly = run(pairs.len(), CompetitionKind::Oligopoly, (0..m).collect())?;
    let scorecard = score_simulation(oligopoly.revenue(), &duopoly_revenue);

    Ok(SimulationResult { sim, params, duopolies, oligopoly, scorecard })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TournamentSettings {
    pub simulations: u64,
    /// Worker threads; `0` uses every available core, `1` runs serially.
    pub parallelism: usize,
    pub simulation: SimulationSettings,
}

/// Aggregate scores over all simulations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TournamentSummary {
    pub scorecards: Vec<Scorecard>,
    pub mean_oligopoly_share: Vec<f64>,
    pub mean_duopoly_share: Vec<f64>,
    /// Mean over simulations of each slot's final share.
    pub final_score: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum TournamentError<E: std::error::Error + 'static> {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("result sink failed: {0}")]
    Sink(#[source] E),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

/// Run `settings.simulations` simulations and hand each result to `sink` in
/// simulation order. Results are independent of `parallelism`.
pub fn run_tournament<E, F>(roster: &Roster, settings: &TournamentSettings, mut sink: F) -> Result<TournamentSummary, TournamentError<E>>
where
    E: std::error::Error + 'static,
    F: FnMut(SimulationResult) -> Result<(), E>,
{
    assert!(roster.len() >= 2, "a tournament needs at least two strategies");
    let m = roster.len();
    let mut scorecards = Vec::with_capacity(settings.simulations as usize);
    let mut accept = |r: SimulationResult, cards: &mut Vec<Scorecard>| -> Result<(), TournamentError<E>> {
        cards.push(r.scorecard.clone());
        sink(r).map_err(TournamentError::Sink)
    };

    if settings.parallelism == 1 {
        for sim in 0..settings.simulations {
            let r = run_simulation(roster, sim, &settings.simulation)?;
            accept(r, &mut scorecards)?;
        }
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(settings.parallelism)
            .build()
            .map_err(|e| TournamentError::Pool(e.to_string()))?;
        let batch = (pool.current_num_threads() * 2).max(1) as u64;
        let mut start = 0;
        while start < settings.simulations {
            let end = (start + batch).min(settings.simulations);
            let results: Vec<Result<SimulationResult, MarketError>> =
                pool.install(|| (start..end).into_par_iter().map(|sim| run_simulation(roster, sim, &settings.simulation)).collect());
            for r in results {
                accept(r?, &mut scorecards)?;
            }
            start = end;
        }
    }

    Ok(summarize(m, scorecards))
}

fn summarize(m: usize, scorecards: Vec<Scorecard>) -> TournamentSummary {
    let s = scorecards.len().max(1) as f64;
    let mean = |f: &dyn Fn(&Scorecard) -> &Vec<f64>| -> Vec<f64> {
        let mut acc = vec![0.0; m];
        for c in &scorecards {
            for (a, v) in acc.iter_mut().zip(f(c)) {
                *a += v;
            }
        }
        acc.into_iter().map(|a| a / s).collect()
    };
    TournamentSummary {
        mean_oligopoly_share: mean(&|c| &c.oligopoly_share),
        mean_duopoly_share: mean(&|c| &c.duopoly_share),
        final_score: mean(&|c| &c.final_share),
        scorecards,
    }
}
