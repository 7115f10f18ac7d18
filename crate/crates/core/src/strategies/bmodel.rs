//! A four-armed bandit whose arms are three customer-behaviour demand models
//! plus an epsilon-greedy price grid.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::anneal::{anneal, AnnealSchedule};
use super::bandit::{ArmTable, BGridParams};
use super::line_search;
use super::smoothing::HoltSmoother;
use crate::engine::{Observation, StepBudget, Strategy, StrategyFault};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BModelParams {
    pub exploration_periods: usize,
    pub epsilon: f64,
    pub level_smoothing: f64,
    pub trend_smoothing: f64,
    /// Annealing schedule shared by the three fits; `proposals` is the total
    /// across them.
    pub anneal: AnnealSchedule,
    /// Quadrature nodes over the willingness-to-pay distribution.
    pub wtp_nodes: usize,
    pub price_step: f64,
    pub max_price: f64,
    /// The fourth arm.
    pub grid: BGridParams,
}

impl Default for BModelParams {
    fn default() -> Self {
        Self {
            exploration_periods: 100,
            epsilon: 0.2,
            level_smoothing: 0.3,
            trend_smoothing: 0.1,
            anneal: AnnealSchedule::default(),
            wtp_nodes: 8,
            price_step: 0.1,
            max_price: 100.0,
            grid: BGridParams::default(),
        }
    }
}

/// Parameters of the three demand models.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemandModels {
    /// Normal willingness-to-pay of models 1 and 2.
    pub mu: [f64; 2],
    pub sigma: [f64; 2],
    /// Price sensitivity of model 1.
    pub b: f64,
    /// Price-as-quality exponent of model 2.
    pub c: f64,
    /// Subset size bounds of model 3.
    pub d: usize,
    pub e: usize,
}

impl DemandModels {
    pub fn initial(mean_price: f64, n: usize) -> Self {
        let mu = (2.0 * mean_price).max(1.0);
        Self { mu: [mu; 2], sigma: [0.5 * mu; 2], b: 1.0, c: 1.0, d: 1, e: n.max(1) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemandModel {
    BargainHunters,
    QualitySeekers,
    CheapestSubset,
}

impl DemandModel {
    pub const ALL: [DemandModel; 3] = [DemandModel::BargainHunters, DemandModel::QualitySeekers, DemandModel::CheapestSubset];
}

/// Standard normal quantiles at the midpoints of `k` equal-probability cells.
pub fn normal_nodes(k: usize) -> Vec<f64> {
    static CACHE: OnceLock<Vec<(usize, Vec<f64>)>> = OnceLock::new();
    let build = |k: usize| {
        let n = Normal::standard();
        (0..k).map(|i| n.inverse_cdf((i as f64 + 0.5) / k as f64)).collect::<Vec<f64>>()
    };
    let cache = CACHE.get_or_init(|| [4, 6, 8, 12, 16].into_iter().map(|k| (k, build(k))).collect());
    cache.iter().find(|(n, _)| *n == k).map_or_else(|| build(k), |(_, v)| v.clone())
}

/// Choice weight of a feasible price `p < w` under model 1 or 2.
#[inline]
fn weight(model: DemandModel, p: f64, w: f64, exponent: f64) -> f64 {
    match model {
        DemandModel::BargainHunters => ((w - p) / w).powf(exponent),
        _ => (p / w).powf(exponent),
    }
}

/// Own purchase probability per arrival under the willingness-to-pay models.
pub fn wtp_share(model: DemandModel, own: f64, others: &[f64], mu: f64, sigma: f64, exponent: f64, nodes: &[f64]) -> f64 {
    let mut total = 0.0;
    for z in nodes {
        let w = mu + sigma * z;
        if w <= 0.0 || own >= w {
            continue;
        }
        let own_w = weight(model, own, w, exponent);
        let mut sum = own_w;
        let mut feasible = 1usize;
        for &p in others {
            if p < w {
                sum += weight(model, p, w, exponent);
                feasible += 1;
            }
        }
        total += if sum > 0.0 { own_w / sum } else { 1.0 / feasible as f64 };
    }
    total / nodes.len() as f64
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Own purchase probability when each customer sees a uniformly random
/// subset of between `d` and `e` prices and buys the cheapest; ties split.
pub fn subset_share(own: f64, others: &[f64], d: usize, e: usize) -> f64 {
    let n = others.len() + 1;
    let lower = others.iter().filter(|&&p| p < own).count();
    let equal = others.iter().filter(|&&p| p == own).count();
    let higher = n - 1 - lower - equal;
    let (d, e) = (d.clamp(1, n), e.clamp(1, n));
    let (d, e) = (d.min(e), e.max(d));
    let mut total = 0.0;
    for k in d..=e {
        let others_seen = binomial(n - 1, k - 1);
        let mut win = 0.0;
        for j in 0..=equal.min(k - 1) {
            win += binomial(equal, j) * binomial(higher, k - 1 - j) / (j + 1) as f64;
        }
        total += k as f64 / n as f64 * win / others_seen;
    }
    total / (e - d + 1) as f64
}

/// Expected revenue per arriving customer when posting `own_price` against
/// a competitor profile.
pub fn eval_demand(model: DemandModel, own_price: f64, profile: &[f64], params: &DemandModels, nodes: &[f64]) -> f64 {
    let share = match model {
        DemandModel::BargainHunters => wtp_share(model, own_price, profile, params.mu[0], params.sigma[0], params.b, nodes),
        DemandModel::QualitySeekers => wtp_share(model, own_price, profile, params.mu[1], params.sigma[1], params.c, nodes),
        DemandModel::CheapestSubset => subset_share(own_price, profile, params.d, params.e),
    };
    own_price * share
}

/// One observed period: own price, sorted competitor prices, own sales.
#[derive(Clone, Debug, PartialEq)]
pub struct SalesRecord {
    pub own_price: f64,
    pub profile: Vec<f64>,
    pub sales: f64,
}

/// Squared error of `sales ~ scale * share` with the scale profiled out.
fn profiled_sse(data: &[SalesRecord], mut share: impl FnMut(&SalesRecord) -> f64) -> f64 {
    let (mut sq, mut sy, mut yy) = (0.0, 0.0, 0.0);
    for r in data {
        let q = share(r);
        sq += q * q;
        sy += q * r.sales;
        yy += r.sales * r.sales;
    }
    if sq > 0.0 {
        yy - sy.max(0.0).powi(2) / sq
    } else {
        yy
    }
}

/// Fit all three models by simulated annealing on own-sales squared error.
/// Models whose annealing fails keep their `start` parameters.
pub fn fit_models(
    data: &[SalesRecord],
    start: DemandModels,
    schedule: &AnnealSchedule,
    nodes: &[f64],
    rng: &mut RngStream,
    budget: &mut StepBudget,
) -> Result<DemandModels, StrategyFault> {
    let n = data.first().map_or(1, |r| r.profile.len() + 1);
    let cost = (data.len() * n * nodes.len()) as u64;
    let mut out = start;
    // the discrete subset model needs far fewer proposals
    let subset_proposals = (schedule.proposals / 10).max(1);
    let wtp_proposals = (schedule.proposals - subset_proposals.min(schedule.proposals)) / 2;

    for (slot, model) in [DemandModel::BargainHunters, DemandModel::QualitySeekers].into_iter().enumerate() {
        let exponent = if slot == 0 { start.b } else { start.c };
        let init = [start.mu[slot], start.sigma[slot], exponent];
        let sched = AnnealSchedule { proposals: wtp_proposals, ..*schedule };
        let result = anneal(
            init,
            |s| profiled_sse(data, |r| wtp_share(model, r.own_price, &r.profile, s[0], s[1], s[2], nodes)),
            |s, frac, rng| {
                let step = 0.05 + 0.95 * frac;
                [
                    (s[0] + rng.uniform(-20.0, 20.0) * step).clamp(0.5, 300.0),
                    (s[1] + rng.uniform(-10.0, 10.0) * step).clamp(0.5, 150.0),
                    (s[2] * (rng.uniform(-1.0, 1.0) * step).exp()).clamp(0.05, 50.0),
                ]
            },
            &sched,
            cost,
            rng,
            budget,
        )?;
        match result {
            Some(r) => {
                out.mu[slot] = r.best[0];
                out.sigma[slot] = r.best[1];
                if slot == 0 {
                    out.b = r.best[2];
                } else {
                    out.c = r.best[2];
                }
            }
            None => log::warn!("annealing of {model:?} hit a non-finite objective; keeping previous parameters"),
        }
    }

    let sched = AnnealSchedule { proposals: subset_proposals, ..*schedule };
    let result = anneal(
        (start.d.clamp(1, n), start.e.clamp(1, n).max(start.d.clamp(1, n))),
        |&(d, e)| profiled_sse(data, |r| subset_share(r.own_price, &r.profile, d, e)),
        |&(d, e), _, rng| {
            let delta = if rng.unit() < 0.5 { -1 } else { 1 };
            let (mut d, mut e) = (d as i64, e as i64);
            if rng.unit() < 0.5 {
                d += delta;
            } else {
                e += delta;
            }
            let d = d.clamp(1, n as i64) as usize;
            let e = e.clamp(1, n as i64) as usize;
            (d.min(e), e.max(d))
        },
        &sched,
        (data.len() * n) as u64,
        rng,
        budget,
    )?;
    match result {
        Some(r) => (out.d, out.e) = r.best,
        None => log::warn!("annealing of the subset model hit a non-finite objective; keeping previous parameters"),
    }
    Ok(out)
}

const GRID_ARM: usize = 3;

pub struct BModel {
    params: BModelParams,
    rng: RngStream,
    nodes: Vec<f64>,
    models: Option<DemandModels>,
    arms: ArmTable,
    grid: ArmTable,
    forecaster: HoltSmoother,
    /// Arm and grid arm pulled for the pending period.
    pending: Option<(usize, Option<usize>)>,
    seen: usize,
}

impl BModel {
    pub fn new(params: BModelParams, rng: RngStream) -> Self {
        let nodes = normal_nodes(params.wtp_nodes.max(1));
        let forecaster = HoltSmoother::new(params.level_smoothing, params.trend_smoothing);
        let grid = ArmTable::new(params.grid.prices.len());
        Self { params, rng, nodes, models: None, arms: ArmTable::new(4), grid, forecaster, pending: None, seen: 0 }
    }

    pub fn models(&self) -> Option<&DemandModels> {
        self.models.as_ref()
    }

    /// Untried arms first, then the highest mean realised revenue.
    fn exploit_arm(&self) -> usize {
        self.arms.counts.iter().position(|&c| c == 0).unwrap_or_else(|| self.arms.best())
    }

    fn fit(&mut self, obs: &Observation<'_>, budget: &mut StepBudget) -> Result<(), StrategyFault> {
        let data: Vec<SalesRecord> = (0..obs.observed())
            .map(|i| {
                let mut profile = obs.competitor_prices(i);
                profile.sort_by(f64::total_cmp);
                SalesRecord { own_price: obs.own_price(i), profile, sales: obs.own_sales[i] as f64 }
            })
            .collect();
        let mean_price = data.iter().flat_map(|r| r.profile.iter().copied().chain([r.own_price])).sum::<f64>()
            / (data.len() * obs.n()).max(1) as f64;
        let start = DemandModels::initial(mean_price, obs.n());
        self.models = Some(fit_models(&data, start, &self.params.anneal, &self.nodes, &mut self.rng, budget)?);
        self.arms.reset();
        self.grid.reset();
        Ok(())
    }
}

impl Strategy for BModel {
    fn id(&self) -> &str {
        "b-model"
    }

    fn next_price(&mut self, obs: &Observation<'_>, budget: &mut StepBudget) -> Result<f64, StrategyFault> {
        while self.seen < obs.observed() {
            let mut profile = obs.competitor_prices(self.seen);
            profile.sort_by(f64::total_cmp);
            self.forecaster.update(&profile);
            self.seen += 1;
        }
        if let Some((arm, grid_arm)) = self.pending.take() {
            let r = obs.own_revenue(obs.observed() - 1);
            self.arms.update(arm, r);
            if let Some(g) = grid_arm {
                self.grid.update(g, r);
            }
        }
        if obs.period <= self.params.exploration_periods {
            return Ok(self.params.max_price * self.rng.unit_open());
        }
        if self.models.is_none() {
            self.fit(obs, budget)?;
        }
        let arm = if self.rng.unit() < self.params.epsilon { self.rng.below(4) } else { self.exploit_arm() };
        if arm == GRID_ARM {
            let g = self.grid.select(self.params.grid.epsilon, &mut self.rng);
            self.pending = Some((arm, Some(g)));
            return Ok(self.params.grid.prices[g]);
        }
        self.pending = Some((arm, None));
        let models = self.models.expect("fitted above");
        let profile: Vec<f64> = self.forecaster.forecast().unwrap_or_default().into_iter().map(|p| p.max(0.0)).collect();
        let model = DemandModel::ALL[arm];
        budget.spend((self.params.max_price / self.params.price_step) as u64 * (self.nodes.len() * obs.n()) as u64)?;
        let nodes = &self.nodes;
        Ok(line_search(self.params.price_step, self.params.max_price, |p| eval_demand(model, p, &profile, &models, nodes)).0)
    }
}
