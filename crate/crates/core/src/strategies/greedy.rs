//! Tit-for-tat price matching with a floor against downward spirals.

use serde::{Deserialize, Serialize};

use crate::engine::{Observation, StepBudget, Strategy, StrategyFault};
use crate::rng::RngStream;
use crate::stats::percentile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyParams {
    /// Periods of price history feeding the percentile floor.
    pub window: usize,
    /// Percentile (0-100) used as floor trigger.
    pub percentile: f64,
    pub min_price: f64,
    /// First-period price is drawn uniformly from this range.
    pub initial_range: (f64, f64),
}

impl Default for GreedyParams {
    fn default() -> Self {
        Self { window: 30, percentile: 10.0, min_price: 5.0, initial_range: (30.0, 70.0) }
    }
}

/// Apply the matching rule to a previous-period minimum and a window
/// percentile.
pub fn greedy_rule(prev_min: f64, floor_quantile: f64, min_price: f64) -> f64 {
    if prev_min < floor_quantile {
        floor_quantile.max(min_price)
    } else {
        prev_min
    }
}

pub struct Greedy {
    params: GreedyParams,
    rng: RngStream,
}

impl Greedy {
    pub fn new(params: GreedyParams, rng: RngStream) -> Self {
        Self { params, rng }
    }
}

impl Strategy for Greedy {
    fn id(&self) -> &str {
        "greedy"
    }

    fn next_price(&mut self, obs: &Observation<'_>, budget: &mut StepBudget) -> Result<f64, StrategyFault> {
        let Some(last) = obs.last_competitor_prices() else {
            let (lo, hi) = self.params.initial_range;
            return Ok(self.rng.uniform(lo, hi));
        };
        let prev_min = last.iter().copied().fold(f64::INFINITY, f64::min);
        let t = obs.observed();
        let from = t.saturating_sub(self.params.window);
        let window: Vec<f64> = (from..t).flat_map(|i| obs.competitor_prices(i)).collect();
        budget.spend(window.len() as u64)?;
        let q = percentile(&window, self.params.percentile).unwrap_or(prev_min);
        Ok(greedy_rule(prev_min, q, self.params.min_price))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::PriceHistory;

    #[test]
    fn rule_examples() {
        assert_eq!(greedy_rule(7.0, 6.0, 5.0), 7.0);
        assert_eq!(greedy_rule(1.0, 4.0, 5.0), 5.0);
        assert_eq!(greedy_rule(1.0, 8.0, 5.0), 8.0);
    }

    #[test]
    fn follows_previous_minimum() {
        let h = PriceHistory::from_rows(&[[50.0, 5.0, 5.0, 5.0], [50.0, 10.0, 7.0, 12.0]]);
        let sales = [0, 0];
        let obs = Observation { period: 3, own_index: 0, prices: &h, own_sales: &sales };
        let mut g = Greedy::new(GreedyParams::default(), RngStream::from_seed(1));
        assert_eq!(g.next_price(&obs, &mut StepBudget::unlimited()).unwrap(), 7.0);
    }

    #[test]
    fn floor_kicks_in_after_a_drop() {
        let mut rows = vec![[0.0, 40.0]; 29];
        rows.push([0.0, 1.0]);
        let h = PriceHistory::from_rows(&rows);
        let sales = vec![0; 30];
        let obs = Observation { period: 31, own_index: 0, prices: &h, own_sales: &sales };
        let mut g = Greedy::new(GreedyParams::default(), RngStream::from_seed(1));
        assert_eq!(g.next_price(&obs, &mut StepBudget::unlimited()).unwrap(), 40.0);
    }

    #[test]
    fn first_period_in_range() {
        let h = PriceHistory::new(3);
        let obs = Observation { period: 1, own_index: 2, prices: &h, own_sales: &[] };
        for seed in 0..200 {
            let mut g = Greedy::new(GreedyParams::default(), RngStream::from_seed(seed));
            let p = g.next_price(&obs, &mut StepBudget::unlimited()).unwrap();
            assert!((30.0..70.0).contains(&p));
        }
    }
}
