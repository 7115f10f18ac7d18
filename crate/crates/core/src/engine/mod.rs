//! Competitions, simulations, tournaments and revenue-share scoring.

mod competition;
mod scoring;
mod strategy;
mod tournament;

pub use competition::{
    run_competition, CompetitionId, CompetitionKind, CompetitionSettings, CompetitionSummary, CompetitionTrace, FaultEvent,
    PeriodRecord, TraceLevel,
};
pub use scoring::{score_simulation, Scorecard};
pub use strategy::{sanitize_price, Observation, PriceHistory, StepBudget, Strategy, StrategyFactory, StrategyFault};
pub use tournament::{
    duopoly_pairs, run_simulation, run_tournament, Roster, SimulationResult, SimulationSettings, TournamentError,
    TournamentSettings, TournamentSummary, DEFAULT_STEP_BUDGET,
};
