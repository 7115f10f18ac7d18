//! A single competition: the period loop between posted prices and demand.

use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::{Deserialize, Serialize};

use super::strategy::{sanitize_price, Observation, PriceHistory, StepBudget, Strategy, StrategyFault};
use crate::market::{realize_period_into, MarketError, MarketParams, PeriodOutcome};
use crate::rng::RngStream;

/// How much of each competition is retained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceLevel {
    /// Every period's prices and outcome.
    #[default]
    Full,
    /// Per-competition totals only.
    Revenue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompetitionKind {
    /// Roster slots `(j, k)` with `j < k`; slot `j` plays index 0.
    Duopoly { first: usize, second: usize },
    Oligopoly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompetitionId {
    pub sim: u64,
    /// Position within the simulation: duopolies first, oligopoly last.
    pub index: usize,
    #[serde(flatten)]
    pub kind: CompetitionKind,
}

/// One period as it happened.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub prices: Vec<f64>,
    pub outcome: PeriodOutcome,
}

/// Per-competitor totals over a competition.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompetitionSummary {
    pub periods: usize,
    pub revenue: Vec<f64>,
    pub revenue_sho: Vec<f64>,
    pub revenue_loy: Vec<f64>,
    pub revenue_sci: Vec<f64>,
    pub sales_sho: Vec<u64>,
    pub sales_loy: Vec<u64>,
    pub sales_sci: Vec<u64>,
    pub price_sum: Vec<f64>,
    /// Total arrivals `[sho, loy, phd, prof]`.
    pub arrivals: [u64; 4],
}

impl CompetitionSummary {
    pub fn new(n: usize) -> Self {
        Self {
            periods: 0,
            revenue: vec![0.0; n],
            revenue_sho: vec![0.0; n],
            revenue_loy: vec![0.0; n],
            revenue_sci: vec![0.0; n],
            sales_sho: vec![0; n],
            sales_loy: vec![0; n],
            sales_sci: vec![0; n],
            price_sum: vec![0.0; n],
            arrivals: [0; 4],
        }
    }

    pub fn add(&mut self, prices: &[f64], o: &PeriodOutcome) {
        self.periods += 1;
        for (k, &p) in prices.iter().enumerate() {
            self.revenue[k] += o.revenue[k];
            self.revenue_sho[k] += p * o.sales_sho[k] as f64;
            self.revenue_loy[k] += p * o.sales_loy[k] as f64;
            self.revenue_sci[k] += p * o.sales_sci[k] as f64;
            self.sales_sho[k] += o.sales_sho[k] as u64;
            self.sales_loy[k] += o.sales_loy[k] as u64;
            self.sales_sci[k] += o.sales_sci[k] as u64;
            self.price_sum[k] += p;
        }
        let a = o.arrivals;
        for (t, v) in self.arrivals.iter_mut().zip([a.sho, a.loy, a.phd, a.prof]) {
            *t += v as u64;
        }
    }
}

/// A strategy call that failed and was replaced by price zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub period: usize,
    pub competitor: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompetitionTrace {
    pub id: CompetitionId,
    /// Roster slot of each market index.
    pub participants: Vec<usize>,
    /// Empty at [`TraceLevel::Revenue`].
    pub periods: Vec<PeriodRecord>,
    pub summary: CompetitionSummary,
    pub faults: Vec<FaultEvent>,
}

impl CompetitionTrace {
    /// Cumulative revenue per market index.
    pub fn revenue(&self) -> &[f64] {
        &self.summary.revenue
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CompetitionSettings {
    pub periods: usize,
    pub trace_level: TraceLevel,
    /// Work units allowed per `next_price` call.
    pub step_budget: u64,
}

/// Run `periods` periods between freshly created `strategies`.
///
/// A strategy that panics or exhausts its step budget posts price zero for
/// that period; the event is logged and recorded in the trace.
pub fn run_competition(
    id: CompetitionId,
    participants: Vec<usize>,
    mut strategies: Vec<Box<dyn Strategy>>,
    params: &MarketParams,
    settings: &CompetitionSettings,
    market_rng: &mut RngStream,
) -> Result<CompetitionTrace, MarketError> {
    let n = strategies.len();
    assert!(n >= 2, "a competition needs at least two strategies");
    assert_eq!(participants.len(), n);
    assert!(settings.periods >= 1, "a competition needs at least one period");

    let mut history = PriceHistory::new(n);
    let mut sales: Vec<Vec<u32>> = vec![Vec::with_capacity(settings.periods); n];
    let mut summary = CompetitionSummary::new(n);
    let mut records = Vec::new();
    if settings.trace_level == TraceLevel::Full {
        records.reserve(settings.periods);
    }
    let mut faults = Vec::new();
    let mut budget = StepBudget::new(settings.step_budget);
    let mut prices = vec![0.0; n];
    let mut outcome = PeriodOutcome::zeroed(n);

    for period in 1..=settings.periods {
        for (k, strategy) in strategies.iter_mut().enumerate() {
            let obs = Observation { period, own_index: k, prices: &history, own_sales: &sales[k] };
            budget.reset();
            let raw = match catch_unwind(AssertUnwindSafe(|| strategy.next_price(&obs, &mut budget))) {
                Ok(Ok(p)) => p,
                Ok(Err(fault)) => {
                    record_fault(&mut faults, id, period, k, strategy.id(), fault.to_string());
                    0.0
                }
                Err(panic) => {
                    let msg = panic_message(&panic);
                    record_fault(&mut faults, id, period, k, strategy.id(), StrategyFault::Failed(msg).to_string());
                    0.0
                }
            };
            prices[k] = sanitize_price(raw);
        }
        realize_period_into(&prices, params, market_rng, &mut outcome)?;
        history.push(&prices);
        for (k, s) in sales.iter_mut().enumerate() {
            s.push(outcome.total_sales(k));
        }
        summary.add(&prices, &outcome);
        if settings.trace_level == TraceLevel::Full {
            records.push(PeriodRecord { prices: prices.clone(), outcome: outcome.clone() });
        }
    }

    Ok(CompetitionTrace { id, participants, periods: records, summary, faults })
}

fn record_fault(faults: &mut Vec<FaultEvent>, id: CompetitionId, period: usize, k: usize, who: &str, message: String) {
    log::warn!("sim {} competition {} period {period}: {who} (index {k}) priced at 0: {message}", id.sim, id.index);
    faults.push(FaultEvent { period, competitor: k, message });
}

fn panic_message(panic: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = panic.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = panic.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}
