//! What a pricing agent sees each period and the contract it implements.

use thiserror::Error;

use crate::rng::RngStream;

/// Posted (sanitised) prices of every competitor, one row per past period.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PriceHistory {
    n: usize,
    data: Vec<f64>,
}

impl PriceHistory {
    pub fn new(n: usize) -> Self {
        Self { n, data: Vec::new() }
    }

    /// Build from rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n = rows.first().map_or(0, |r| r.as_ref().len());
        let mut h = Self::new(n);
        for r in rows {
            h.push(r.as_ref());
        }
        h
    }

    pub fn push(&mut self, prices: &[f64]) {
        assert_eq!(prices.len(), self.n, "price row has wrong width");
        self.data.extend_from_slice(prices);
    }

    /// Number of competitors (columns).
    pub fn width(&self) -> usize {
        self.n
    }

    /// Number of recorded periods (rows).
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.n).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row of the `i`-th recorded period (0-based).
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn last(&self) -> Option<&[f64]> {
        let len = self.len();
        (len > 0).then(|| self.row(len - 1))
    }

    pub fn rows(&self) -> impl DoubleEndedIterator<Item = &[f64]> + ExactSizeIterator {
        self.data.chunks_exact(self.n.max(1))
    }

    /// Column of one competitor across all recorded periods.
    pub fn column(&self, k: usize) -> impl DoubleEndedIterator<Item = f64> + ExactSizeIterator + '_ {
        self.rows().map(move |r| r[k])
    }
}

/// Everything a strategy may read before pricing `period`.
///
/// Only the observer's own sales are exposed; other competitors' sales are
/// private to them.
#[derive(Clone, Copy, Debug)]
pub struct Observation<'a> {
    /// The 1-based period about to be priced. History covers `period - 1`
    /// periods.
    pub period: usize,
    pub own_index: usize,
    pub prices: &'a PriceHistory,
    pub own_sales: &'a [u32],
}

impl<'a> Observation<'a> {
    /// Number of competitors in the market, including the observer.
    pub fn n(&self) -> usize {
        self.prices.width()
    }

    pub fn is_first_period(&self) -> bool {
        self.prices.is_empty()
    }

    /// Periods observed so far.
    pub fn observed(&self) -> usize {
        self.prices.len()
    }

    pub fn own_price(&self, i: usize) -> f64 {
        self.prices.row(i)[self.own_index]
    }

    pub fn own_prices(&self) -> impl DoubleEndedIterator<Item = f64> + ExactSizeIterator + 'a {
        self.prices.column(self.own_index)
    }

    /// Own realised revenue of the `i`-th recorded period.
    pub fn own_revenue(&self, i: usize) -> f64 {
        self.own_price(i) * self.own_sales[i] as f64
    }

    /// Competitor prices of the `i`-th recorded period, in index order.
    pub fn competitor_prices(&self, i: usize) -> Vec<f64> {
        let own = self.own_index;
        self.prices.row(i).iter().enumerate().filter(|(k, _)| *k != own).map(|(_, p)| *p).collect()
    }

    pub fn last_competitor_prices(&self) -> Option<Vec<f64>> {
        (!self.is_first_period()).then(|| self.competitor_prices(self.observed() - 1))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyFault {
    #[error("step budget of {0} units exhausted")]
    BudgetExhausted(u64),
    #[error("strategy failed: {0}")]
    Failed(String),
}

/// Deterministic work allowance for one `next_price` call.
#[derive(Clone, Debug)]
pub struct StepBudget {
    limit: u64,
    remaining: u64,
}

impl StepBudget {
    pub fn new(limit: u64) -> Self {
        Self { limit, remaining: limit }
    }

    pub fn unlimited() -> Self {
        Self::new(u64::MAX)
    }

    pub fn reset(&mut self) {
        self.remaining = self.limit;
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    /// Charge `units` of work, failing once the allowance is gone.
    #[inline]
    pub fn spend(&mut self, units: u64) -> Result<(), StrategyFault> {
        match self.remaining.checked_sub(units) {
            Some(r) => {
                self.remaining = r;
                Ok(())
            }
            None => {
                self.remaining = 0;
                Err(StrategyFault::BudgetExhausted(self.limit))
            }
        }
    }
}

/// A pricing agent. One fresh instance is created per competition.
pub trait Strategy: Send {
    /// Stable identifier, e.g. `"greedy"`.
    fn id(&self) -> &str;

    fn next_price(&mut self, obs: &Observation<'_>, budget: &mut StepBudget) -> Result<f64, StrategyFault>;
}

/// Creates fresh strategy instances; each gets its own private stream.
pub trait StrategyFactory: Send + Sync {
    fn id(&self) -> &str;

    fn create(&self, rng: RngStream) -> Box<dyn Strategy>;
}

/// Clamp a proposed price into the legal range: non-finite and negative
/// values become zero, anything else passes through.
#[inline]
pub fn sanitize_price(raw: f64) -> f64 {
    if raw.is_finite() && raw > 0.0 {
        raw
    } else {
        0.0
    }
}
