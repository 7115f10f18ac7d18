//! Own-price demand regression with log/linear model selection by R².

use serde::{Deserialize, Serialize};

use super::line_search;
use super::regression::{simple_ols, SimpleFit};
use crate::engine::{Observation, StepBudget, Strategy, StrategyFault};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OlsParams {
    pub exploration_periods: usize,
    pub explore_probability: f64,
    pub disruption_probability: f64,
    pub price_step: f64,
    pub max_price: f64,
    /// Half-width of the uniform perturbation added to the optimum.
    pub perturbation: f64,
}

impl Default for OlsParams {
    fn default() -> Self {
        Self {
            exploration_periods: 40,
            explore_probability: 0.05,
            disruption_probability: 0.01,
            price_step: 0.1,
            max_price: 100.0,
            perturbation: 1.0,
        }
    }
}

/// Which variables enter in logs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OlsForm {
    LinLin,
    LogPrice,
    LogDemand,
    LogLog,
}

impl OlsForm {
    pub const ALL: [OlsForm; 4] = [OlsForm::LinLin, OlsForm::LogPrice, OlsForm::LogDemand, OlsForm::LogLog];

    fn log_price(self) -> bool {
        matches!(self, OlsForm::LogPrice | OlsForm::LogLog)
    }

    fn log_demand(self) -> bool {
        matches!(self, OlsForm::LogDemand | OlsForm::LogLog)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OlsModel {
    pub form: OlsForm,
    pub fit: SimpleFit,
}

impl OlsModel {
    pub fn demand(&self, price: f64) -> f64 {
        let x = if self.form.log_price() { price.ln() } else { price };
        let y = self.fit.intercept + self.fit.slope * x;
        if self.form.log_demand() {
            y.exp()
        } else {
            y
        }
    }

    /// Revenue-maximising price on the grid `step, 2*step, ..., max_price`.
    pub fn optimal_price(&self, step: f64, max_price: f64) -> f64 {
        line_search(step, max_price, |p| {
            let r = p * self.demand(p).max(0.0);
            if r.is_finite() {
                r
            } else {
                f64::NEG_INFINITY
            }
        })
        .0
    }
}

/// Fit all four forms; log forms use only the observations where the logged
/// variable is positive. Returns the form with the highest R².
pub fn select_model(prices: &[f64], demand: &[f64]) -> Option<OlsModel> {
    let mut best: Option<OlsModel> = None;
    for form in OlsForm::ALL {
        let (mut x, mut y) = (Vec::with_capacity(prices.len()), Vec::with_capacity(prices.len()));
        for (&p, &d) in prices.iter().zip(demand) {
            if (form.log_price() && p <= 0.0) || (form.log_demand() && d <= 0.0) {
                continue;
            }
            x.push(if form.log_price() { p.ln() } else { p });
            y.push(if form.log_demand() { d.ln() } else { d });
        }
        if let Some(fit) = simple_ols(&x, &y) {
            if best.is_none_or(|b| fit.r_squared > b.fit.r_squared) {
                best = Some(OlsModel { form, fit });
            }
        }
    }
    best
}

pub struct Ols {
    params: OlsParams,
    rng: RngStream,
}

impl Ols {
    pub fn new(params: OlsParams, rng: RngStream) -> Self {
        Self { params, rng }
    }

    fn explore(&mut self) -> f64 {
        self.params.max_price * self.rng.unit_open()
    }
}

impl Strategy for Ols {
    fn id(&self) -> &str {
        "ols"
    }

    fn next_price(&mut self, obs: &Observation<'_>, budget: &mut StepBudget) -> Result<f64, StrategyFault> {
        if obs.period <= self.params.exploration_periods {
            return Ok(self.explore());
        }
        let u = self.rng.unit();
        if u < self.params.disruption_probability {
            return Ok(0.0);
        }
        if u < self.params.disruption_probability + self.params.explore_probability {
            return Ok(self.explore());
        }
        let prices: Vec<f64> = obs.own_prices().collect();
        let demand: Vec<f64> = obs.own_sales.iter().map(|&s| s as f64).collect();
        budget.spend(4 * prices.len() as u64 + (self.params.max_price / self.params.price_step) as u64)?;
        let Some(model) = select_model(&prices, &demand) else {
            return Ok(self.explore());
        };
        let p = model.optimal_price(self.params.price_step, self.params.max_price);
        let jitter = self.rng.uniform(-self.params.perturbation, self.params.perturbation);
        Ok((p + jitter).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::PriceHistory;

    #[test]
    fn linear_demand_vertex() {
        let prices: Vec<f64> = (1..=45).map(|i| i as f64).collect();
        let demand: Vec<f64> = prices.iter().map(|p| 100.0 - 2.0 * p).collect();
        let m = select_model(&prices, &demand).unwrap();
        assert_eq!(m.form, OlsForm::LinLin);
        assert!((m.fit.r_squared - 1.0).abs() < 1e-12);
        assert!((m.optimal_price(0.1, 100.0) - 25.0).abs() <= 0.1);
    }

    #[test]
    fn log_demand_wins_on_exponential_data() {
        let prices: Vec<f64> = (0..60).map(|i| 1.0 + i as f64 * 1.5).collect();
        let demand: Vec<f64> = prices.iter().map(|p| (5.0 - 0.1 * p).exp()).collect();
        let m = select_model(&prices, &demand).unwrap();
        assert_eq!(m.form, OlsForm::LogDemand);
        // revenue p*exp(5-0.1p) peaks at p = 10
        assert!((m.optimal_price(0.1, 100.0) - 10.0).abs() <= 0.1);
    }

    #[test]
    fn degenerate_prices_have_no_model() {
        assert!(select_model(&[20.0; 10], &[3.0; 10]).is_none());
    }

    #[test]
    fn disruption_branch_posts_zero() {
        let p = OlsParams { disruption_probability: 1.0, ..Default::default() };
        let rows: Vec<[f64; 2]> = (0..50).map(|i| [10.0 + i as f64, 30.0]).collect();
        let h = PriceHistory::from_rows(&rows);
        let sales: Vec<u32> = (0..50).map(|i| 40 - (i % 40) as u32).collect();
        let mut s = Ols::new(p, RngStream::from_seed(3));
        let obs = Observation { period: 51, own_index: 0, prices: &h, own_sales: &sales };
        assert_eq!(s.next_price(&obs, &mut StepBudget::unlimited()).unwrap(), 0.0);
    }

    #[test]
    fn exploration_support() {
        let h = PriceHistory::new(2);
        let obs = Observation { period: 1, own_index: 0, prices: &h, own_sales: &[] };
        let mut s = Ols::new(OlsParams::default(), RngStream::from_seed(8));
        for _ in 0..1000 {
            let p = s.next_price(&obs, &mut StepBudget::unlimited()).unwrap();
            assert!(p > 0.0 && p < 100.0);
        }
    }

    #[test]
    fn running_price_near_vertex() {
        let rows: Vec<[f64; 2]> = (0..60).map(|i| [5.0 + (i % 40) as f64, 50.0]).collect();
        let h = PriceHistory::from_rows(&rows);
        let sales: Vec<u32> = rows.iter().map(|r| (100.0 - 2.0 * r[0]) as u32).collect();
        let params = OlsParams { disruption_probability: 0.0, explore_probability: 0.0, ..Default::default() };
        let mut s = Ols::new(params, RngStream::from_seed(3));
        let obs = Observation { period: 61, own_index: 0, prices: &h, own_sales: &sales };
        for _ in 0..50 {
            let p = s.next_price(&obs, &mut StepBudget::unlimited()).unwrap();
            assert!((p - 25.0).abs() <= 1.1, "{p}");
        }
    }
}
