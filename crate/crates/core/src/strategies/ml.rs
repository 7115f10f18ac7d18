//! Alternating cosine price exploration and regression-driven exploitation,
//! with the regressor chosen by cross-validation.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::line_search;
use super::regression::{cross_validated_mse, fit, Fitted, RegressorKind};
use super::smoothing::ExpSmoother;
use crate::engine::{Observation, StepBudget, Strategy, StrategyFault};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlParams {
    pub exploration_length: usize,
    pub amplitude: f64,
    pub cosine_period: f64,
    /// First-cycle reference price range.
    pub initial_range: (f64, f64),
    pub exploit_min: usize,
    pub exploit_max: usize,
    /// Abort exploitation when the rolling mean revenue falls below this
    /// fraction of the opening mean.
    pub abort_ratio: f64,
    pub abort_window: usize,
    pub folds: usize,
    pub smoothing: f64,
    pub price_step: f64,
    pub max_price: f64,
    pub ridge_lambda: f64,
    pub lasso_lambda: f64,
    pub gd_iterations: usize,
    pub gd_rate: f64,
    pub forest_trees: usize,
    pub forest_depth: usize,
}

impl Default for MlParams {
    fn default() -> Self {
        Self {
            exploration_length: 40,
            amplitude: 0.3,
            cosine_period: 20.0,
            initial_range: (20.0, 80.0),
            exploit_min: 70,
            exploit_max: 150,
            abort_ratio: 0.5,
            abort_window: 10,
            folds: 5,
            smoothing: 0.3,
            price_step: 0.1,
            max_price: 100.0,
            ridge_lambda: 1.0,
            lasso_lambda: 0.1,
            gd_iterations: 500,
            gd_rate: 0.1,
            forest_trees: 20,
            forest_depth: 4,
        }
    }
}

impl MlParams {
    pub fn family(&self) -> [RegressorKind; 5] {
        [
            RegressorKind::LeastSquares,
            RegressorKind::Ridge { lambda: self.ridge_lambda },
            RegressorKind::Lasso { lambda: self.lasso_lambda },
            RegressorKind::GradientDescent { iterations: self.gd_iterations, rate: self.gd_rate },
            RegressorKind::Forest { trees: self.forest_trees, depth: self.forest_depth },
        ]
    }
}

/// Cosine exploration price at step `tau` of a cycle around `reference`.
pub fn cosine_price(reference: f64, amplitude: f64, period: f64, tau: usize) -> f64 {
    reference * (1.0 + amplitude * (TAU * tau as f64 / period).cos())
}

/// Pick the regressor with the lowest cross-validated error and refit it on
/// all data.
pub fn select_and_fit(
    family: &[RegressorKind],
    x: &[Vec<f64>],
    y: &[f64],
    folds: usize,
    rng: &mut RngStream,
) -> Option<(RegressorKind, Fitted)> {
    let mut best: Option<(f64, RegressorKind)> = None;
    for &kind in family {
        if let Some(mse) = cross_validated_mse(kind, x, y, folds, rng) {
            if mse.is_finite() && best.is_none_or(|(b, _)| mse < b) {
                best = Some((mse, kind));
            }
        }
    }
    let (_, kind) = best?;
    fit(kind, x, y, rng).map(|m| (kind, m))
}

/// Revenue-maximising own price given forecast competitor prices.
pub fn best_price(model: &Fitted, competitors: &[f64], step: f64, max_price: f64) -> f64 {
    let mut features = Vec::with_capacity(competitors.len() + 1);
    features.push(0.0);
    features.extend_from_slice(competitors);
    line_search(step, max_price, |p| {
        features[0] = p;
        p * model.predict(&features).max(0.0)
    })
    .0
}

enum Phase {
    Explore { reference: f64, tau: usize },
    Exploit { model: Option<Fitted>, fallback: f64, length: usize, revenues: Vec<f64> },
}

pub struct Ml {
    params: MlParams,
    rng: RngStream,
    phase: Phase,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    cycle_prices: Vec<f64>,
    forecaster: ExpSmoother,
    seen: usize,
    lengths: Vec<usize>,
}

impl Ml {
    pub fn new(params: MlParams, mut rng: RngStream) -> Self {
        let (lo, hi) = params.initial_range;
        let reference = rng.uniform(lo, hi);
        let forecaster = ExpSmoother::new(params.smoothing);
        Self { params, rng, phase: Phase::Explore { reference, tau: 0 }, x: Vec::new(), y: Vec::new(), cycle_prices: Vec::new(), forecaster, seen: 0, lengths: Vec::new() }
    }

    /// Observations currently retained.
    pub fn retained(&self) -> usize {
        self.y.len()
    }

    fn start_exploration(&mut self) {
        let n = self.cycle_prices.len().max(1) as f64;
        let reference = (self.cycle_prices.iter().sum::<f64>() / n).clamp(1.0, self.params.max_price);
        self.phase = Phase::Explore { reference, tau: 0 };
        self.x.clear();
        self.y.clear();
        self.cycle_prices.clear();
        self.forecaster.reset();
    }

    fn start_exploitation(&mut self, budget: &mut StepBudget) -> Result<(), StrategyFault> {
        let p = self.x.first().map_or(1, |r| r.len()) as u64;
        budget.spend(self.params.folds as u64 * 40 * self.x.len() as u64 * p * self.params.forest_trees as u64)?;
        let fallback = self.cycle_prices.iter().sum::<f64>() / self.cycle_prices.len().max(1) as f64;
        let model = select_and_fit(&self.params.family(), &self.x, &self.y, self.params.folds, &mut self.rng).map(|(_, m)| m);
        if model.is_none() {
            log::debug!("ml: no regressor could be fitted; exploiting at the mean explored price");
        }
        let length = self.params.exploit_min + self.rng.below(self.params.exploit_max - self.params.exploit_min + 1);
        self.lengths.push(length);
        self.cycle_prices.clear();
        self.phase = Phase::Exploit { model, fallback, length, revenues: Vec::new() };
        Ok(())
    }

    fn ingest(&mut self, obs: &Observation<'_>) {
        while self.seen < obs.observed() {
            let i = self.seen;
            let comps = obs.competitor_prices(i);
            let mut row = Vec::with_capacity(comps.len() + 1);
            row.push(obs.own_price(i));
            row.extend_from_slice(&comps);
            self.x.push(row);
            self.y.push(obs.own_sales[i] as f64);
            self.cycle_prices.push(obs.own_price(i));
            self.forecaster.update(&comps);
            if let Phase::Exploit { revenues, .. } = &mut self.phase {
                revenues.push(obs.own_revenue(i));
            }
            self.seen += 1;
        }
    }

    /// Lengths drawn for every exploitation cycle so far.
    pub fn exploit_lengths(&self) -> &[usize] {
        &self.lengths
    }
}

/// Rolling mean revenue over the last window has fallen below the allowed
/// fraction of the cycle's opening mean.
fn should_abort(params: &MlParams, revenues: &[f64]) -> bool {
    let w = params.abort_window;
    if w == 0 || revenues.len() < 2 * w {
        return false;
    }
    let opening = revenues[..w].iter().sum::<f64>() / w as f64;
    let rolling = revenues[revenues.len() - w..].iter().sum::<f64>() / w as f64;
    rolling < params.abort_ratio * opening
}

impl Strategy for Ml {
    fn id(&self) -> &str {
        "ml"
    }

    fn next_price(&mut self, obs: &Observation<'_>, budget: &mut StepBudget) -> Result<f64, StrategyFault> {
        self.ingest(obs);
        loop {
            match &mut self.phase {
                Phase::Explore { reference, tau } if *tau < self.params.exploration_length => {
                    let p = cosine_price(*reference, self.params.amplitude, self.params.cosine_period, *tau);
                    *tau += 1;
                    return Ok(p);
                }
                Phase::Explore { .. } => self.start_exploitation(budget)?,
                Phase::Exploit { length, revenues, .. } if revenues.len() >= *length || should_abort(&self.params, revenues) => {
                    self.start_exploration()
                }
                Phase::Exploit { model: Some(m), .. } => {
                    let comps = self.forecaster.level().map(<[f64]>::to_vec).unwrap_or_default();
                    budget.spend((self.params.max_price / self.params.price_step) as u64 * 64)?;
                    return Ok(best_price(m, &comps, self.params.price_step, self.params.max_price));
                }
                Phase::Exploit { model: None, fallback, .. } => return Ok(*fallback),
            }
        }
    }
}
