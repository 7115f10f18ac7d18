//! Relative-revenue maximisation on a weighted-least-squares linear demand
//! model `d(x, y) = a + b*x + c*sum(y)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::line_search;
use super::regression::weighted_least_squares;
use crate::engine::{Observation, StepBudget, Strategy, StrategyFault};
use crate::rng::RngStream;
use crate::stats::median;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum WeightScheme {
    Uniform,
    /// Exponential decay; an observation `h` periods old weighs one half.
    HalfLife(f64),
    /// Only the most recent `n` observations count.
    Window(usize),
}

impl WeightScheme {
    /// Weights of `n` observations ordered oldest first.
    pub fn weights(&self, n: usize) -> Vec<f64> {
        match *self {
            WeightScheme::Uniform => vec![1.0; n],
            WeightScheme::HalfLife(h) => (0..n).map(|i| 0.5f64.powf((n - 1 - i) as f64 / h)).collect(),
            WeightScheme::Window(w) => (0..n).map(|i| if i + w >= n { 1.0 } else { 0.0 }).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WlsParams {
    pub exploration_periods: usize,
    pub schemes: Vec<WeightScheme>,
    /// Candidate windows for the median price forecast.
    pub price_windows: Vec<usize>,
    pub price_step: f64,
    pub max_price: f64,
    /// Own price constant over this many periods triggers a random price.
    pub constant_run: usize,
    /// The random price is drawn from `p * (1 -/+ spread)`.
    pub spread: f64,
}

impl Default for WlsParams {
    fn default() -> Self {
        Self {
            exploration_periods: 10,
            schemes: vec![
                WeightScheme::Uniform,
                WeightScheme::HalfLife(20.0),
                WeightScheme::HalfLife(100.0),
                WeightScheme::Window(50),
            ],
            price_windows: vec![5, 10, 20, 50],
            price_step: 0.1,
            max_price: 100.0,
            constant_run: 3,
            spread: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WlsModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl WlsModel {
    pub fn demand(&self, own: f64, others_sum: f64) -> f64 {
        self.a + self.b * own + self.c * others_sum
    }

    /// Own revenue minus the best competitor revenue when posting `p` against
    /// predicted competitor prices.
    pub fn relative_revenue(&self, p: f64, competitors: &[f64]) -> f64 {
        let total = sorted_sum(competitors);
        let own = p * self.demand(p, total);
        let rival = competitors
            .iter()
            .map(|&q| q * self.demand(q, p + total - q))
            .fold(f64::NEG_INFINITY, f64::max);
        if competitors.is_empty() {
            own
        } else {
            own - rival
        }
    }
}

/// Sum in ascending order so the result does not depend on competitor order.
fn sorted_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Weighted least squares fit of `demand ~ 1 + own + others_sum`.
pub fn wls_fit(own: &[f64], others_sum: &[f64], demand: &[f64], scheme: WeightScheme) -> Option<WlsModel> {
    let n = own.len();
    if n < 4 {
        return None;
    }
    let design = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => own[i],
        _ => others_sum[i],
    });
    let beta = weighted_least_squares(&design, demand, &scheme.weights(n))?;
    let m = WlsModel { a: beta[0], b: beta[1], c: beta[2] };
    (m.a.is_finite() && m.b.is_finite() && m.c.is_finite()).then_some(m)
}

pub struct Wls {
    params: WlsParams,
    rng: RngStream,
    own: Vec<f64>,
    others_sum: Vec<f64>,
    demand: Vec<f64>,
    /// Per competitor column, its observed prices.
    competitor_prices: Vec<Vec<f64>>,
    /// `price_errors[k][w]`: absolute errors of window `w` forecasting competitor `k`.
    price_errors: Vec<Vec<Vec<f64>>>,
    models: Vec<Option<WlsModel>>,
    demand_errors: Vec<Vec<f64>>,
}

impl Wls {
    pub fn new(params: WlsParams, rng: RngStream) -> Self {
        let s = params.schemes.len();
        Self {
            params,
            rng,
            own: Vec::new(),
            others_sum: Vec::new(),
            demand: Vec::new(),
            competitor_prices: Vec::new(),
            price_errors: Vec::new(),
            models: vec![None; s],
            demand_errors: vec![Vec::new(); s],
        }
    }

    fn explore(&mut self) -> f64 {
        self.params.max_price * self.rng.unit_open()
    }

    fn ingest(&mut self, obs: &Observation<'_>, budget: &mut StepBudget) -> Result<(), StrategyFault> {
        while self.own.len() < obs.observed() {
            let i = self.own.len();
            let comps = obs.competitor_prices(i);
            if self.competitor_prices.is_empty() {
                self.competitor_prices = vec![Vec::new(); comps.len()];
                self.price_errors = vec![vec![Vec::new(); self.params.price_windows.len()]; comps.len()];
            }
            for (k, &q) in comps.iter().enumerate() {
                let hist = &self.competitor_prices[k];
                if !hist.is_empty() {
                    for (w, &len) in self.params.price_windows.iter().enumerate() {
                        let f = median(&hist[hist.len().saturating_sub(len)..]).unwrap_or(q);
                        self.price_errors[k][w].push((f - q).abs());
                    }
                }
                self.competitor_prices[k].push(q);
            }
            let x = obs.own_price(i);
            let y = sorted_sum(&comps);
            let d = obs.own_sales[i] as f64;
            for (s, m) in self.models.iter().enumerate() {
                if let Some(m) = m {
                    self.demand_errors[s].push((m.demand(x, y) - d).abs());
                }
            }
            self.own.push(x);
            self.others_sum.push(y);
            self.demand.push(d);
            budget.spend(self.params.schemes.len() as u64 * 9 * self.own.len() as u64)?;
            for (s, scheme) in self.params.schemes.iter().enumerate() {
                self.models[s] = wls_fit(&self.own, &self.others_sum, &self.demand, *scheme);
            }
        }
        Ok(())
    }

    /// Model of the scheme with the lowest median one-step error.
    pub fn best_model(&self) -> Option<WlsModel> {
        let score = |s: usize| median(&self.demand_errors[s]).unwrap_or(f64::INFINITY);
        let mut best: Option<(f64, WlsModel)> = None;
        for (s, m) in self.models.iter().enumerate() {
            if let Some(m) = m {
                let e = score(s);
                if best.is_none_or(|(b, _)| e < b) {
                    best = Some((e, *m));
                }
            }
        }
        best.map(|(_, m)| m)
    }

    /// Next-period price forecast for every competitor column.
    pub fn predicted_competitor_prices(&self) -> Vec<f64> {
        self.competitor_prices
            .iter()
            .zip(&self.price_errors)
            .map(|(hist, errs)| {
                let scores: Vec<f64> = errs.iter().map(|e| median(e).unwrap_or(f64::INFINITY)).collect();
                let w = super::argmax(&scores.iter().map(|s| -s).collect::<Vec<_>>());
                let len = self.params.price_windows[w];
                median(&hist[hist.len().saturating_sub(len)..]).unwrap_or(0.0)
            })
            .collect()
    }
}

impl Strategy for Wls {
    fn id(&self) -> &str {
        "wls"
    }

    fn next_price(&mut self, obs: &Observation<'_>, budget: &mut StepBudget) -> Result<f64, StrategyFault> {
        self.ingest(obs, budget)?;
        if obs.period <= self.params.exploration_periods {
            return Ok(self.explore());
        }
        let run = self.params.constant_run;
        if run > 0 && self.own.len() >= run {
            let last = &self.own[self.own.len() - run..];
            if last.iter().all(|&p| p == last[0]) {
                let p = last[0];
                return Ok(if p > 0.0 {
                    self.rng.uniform(p * (1.0 - self.params.spread), p * (1.0 + self.params.spread))
                } else {
                    self.explore()
                });
            }
        }
        let Some(model) = self.best_model() else {
            return Ok(self.explore());
        };
        let predicted = self.predicted_competitor_prices();
        budget.spend((self.params.max_price / self.params.price_step) as u64 * (predicted.len() as u64 + 1))?;
        Ok(line_search(self.params.price_step, self.params.max_price, |p| model.relative_revenue(p, &predicted)).0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::PriceHistory;

    fn synthetic(n: usize, rng: &mut RngStream) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let own: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 40.0)).collect();
        let sum: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 120.0)).collect();
        let d = own.iter().zip(&sum).map(|(x, y)| 50.0 - 2.0 * x + 0.5 * y).collect();
        (own, sum, d)
    }

    #[test]
    fn exact_recovery_under_every_scheme() {
        let mut rng = RngStream::from_seed(12);
        let (own, sum, d) = synthetic(200, &mut rng);
        for scheme in WlsParams::default().schemes {
            let m = wls_fit(&own, &sum, &d, scheme).unwrap();
            assert!((m.a - 50.0).abs() < 1e-6 && (m.b + 2.0).abs() < 1e-6 && (m.c - 0.5).abs() < 1e-6, "{scheme:?} {m:?}");
        }
    }

    #[test]
    fn constant_demand() {
        let mut rng = RngStream::from_seed(13);
        let (own, sum, _) = synthetic(30, &mut rng);
        let m = wls_fit(&own, &sum, &[7.0; 30], WeightScheme::Uniform).unwrap();
        assert!((m.a - 7.0).abs() < 1e-9 && m.b.abs() < 1e-10 && m.c.abs() < 1e-10);
    }

    #[test]
    fn too_few_observations() {
        assert!(wls_fit(&[1.0, 2.0, 3.0], &[1.0, 5.0, 2.0], &[1.0, 1.0, 1.0], WeightScheme::Uniform).is_none());
    }

    #[test]
    fn scheme_weights() {
        let w = WeightScheme::HalfLife(20.0).weights(21);
        assert!((w[0] - 0.5).abs() < 1e-12 && w[20] == 1.0);
        assert_eq!(WeightScheme::Window(2).weights(4), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn relative_revenue_duopoly_maximiser() {
        // p(50 - 2p + 15) - 30(50 - 60 + 0.5p) = 300 + 50p - 2p^2, peak at 12.5
        let m = WlsModel { a: 50.0, b: -2.0, c: 0.5 };
        let (p, v) = line_search(0.1, 100.0, |p| m.relative_revenue(p, &[30.0]));
        assert!((p - 12.5).abs() <= 0.1);
        assert!((v - (300.0 + 50.0 * 12.5 - 2.0 * 12.5 * 12.5)).abs() < 0.1);
        // concave: second differences negative
        let f = |p: f64| m.relative_revenue(p, &[30.0]);
        for k in 1..99 {
            let p = k as f64;
            assert!(f(p + 1.0) - 2.0 * f(p) + f(p - 1.0) < 0.0);
        }
    }

    fn run(h: &PriceHistory, sales: &[u32], own_index: usize, seed: u64) -> (Wls, f64) {
        let mut w = Wls::new(WlsParams::default(), RngStream::from_seed(seed));
        let obs = Observation { period: h.len() + 1, own_index, prices: h, own_sales: sales };
        let p = w.next_price(&obs, &mut StepBudget::unlimited()).unwrap();
        (w, p)
    }

    #[test]
    fn constant_competitor_forecast() {
        let mut rng = RngStream::from_seed(2);
        let rows: Vec<[f64; 2]> = (0..60).map(|_| [rng.uniform(0.0, 50.0), 30.0]).collect();
        let h = PriceHistory::from_rows(&rows);
        let sales: Vec<u32> = rows.iter().map(|r| (50.0 - r[0]).max(0.0) as u32).collect();
        let (w, _) = run(&h, &sales, 0, 1);
        assert_eq!(w.predicted_competitor_prices(), vec![30.0]);
    }

    #[test]
    fn constant_own_price_randomises() {
        let mut rng = RngStream::from_seed(3);
        let mut rows: Vec<[f64; 2]> = (0..20).map(|_| [rng.uniform(0.0, 50.0), rng.uniform(10.0, 60.0)]).collect();
        for r in rows.iter_mut().skip(17) {
            r[0] = 12.0;
        }
        let h = PriceHistory::from_rows(&rows);
        let sales: Vec<u32> = rows.iter().map(|r| (60.0 - r[0] + 0.2 * r[1]) as u32).collect();
        let mut seen = Vec::new();
        for seed in 0..50 {
            let (_, p) = run(&h, &sales, 0, seed);
            assert!((6.0..=18.0).contains(&p));
            seen.push(p);
        }
        seen.dedup();
        assert!(seen.len() > 40);
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = RngStream::from_seed(4);
        let rows: Vec<[f64; 4]> =
            (0..40).map(|_| [rng.uniform(0.0, 50.0), rng.uniform(10.0, 60.0), rng.uniform(10.0, 60.0), rng.uniform(5.0, 20.0)]).collect();
        let sales: Vec<u32> = rows.iter().map(|r| (60.0 - r[0] + 0.2 * (r[1] + r[2] + r[3])).max(0.0) as u32).collect();
        let permuted: Vec<[f64; 4]> = rows.iter().map(|r| [r[0], r[3], r[1], r[2]]).collect();
        let (_, a) = run(&PriceHistory::from_rows(&rows), &sales, 0, 7);
        let (_, b) = run(&PriceHistory::from_rows(&permuted), &sales, 0, 7);
        assert_eq!(a, b);
    }
}
