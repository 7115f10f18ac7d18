//! Ground-truth market: per-simulation parameter sampling and per-period
//! demand realisation for shoppers, loyal customers and scientists.
//!
//! Scientists follow a two-class logit (PhDs and professors) whose slopes
//! are calibrated with the Lambert W function so that, in a market of only
//! that class, the revenue-maximising symmetric price is the class's target
//! price.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RngStream;
use crate::stats::dist::{dirichlet, exponential, multinomial, poisson};
use crate::stats::{lambert_w, StatsError};

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("market size must be at least 2, got {0}")]
    InvalidMarketSize(usize),
    #[error("no logit slope calibrated for market size {0}")]
    UncalibratedSize(usize),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// One simulation's sampled ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Mean arrivals per period.
    pub lambda: f64,
    pub theta_sho: f64,
    pub theta_loy: f64,
    pub theta_sci: f64,
    pub gamma_phd: f64,
    pub gamma_prof: f64,
    /// Mean shopper willingness to pay.
    pub beta_sho: f64,
    /// Mean loyal willingness to pay.
    pub beta_loy: f64,
    pub alpha_phd: f64,
    pub alpha_prof: f64,
    pub p_phd: f64,
    pub p_prof: f64,
    /// Logit slopes keyed by number of competitors in the market.
    pub beta_phd_by_n: BTreeMap<usize, f64>,
    pub beta_prof_by_n: BTreeMap<usize, f64>,
}

/// The raw random quantities from which [`MarketParams`] are built.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarketDraws {
    /// `U(50, 150)`
    pub lambda: f64,
    /// `(sho, loy, sci)` shares, summing to one.
    pub theta: [f64; 3],
    /// `U(0, 1)`
    pub gamma_phd: f64,
    /// `U(5, 15)`
    pub beta_sho: f64,
    /// `U(1.5, 2.0)`, loyal to shopper WTP ratio.
    pub loyal_ratio: f64,
    /// `U(0.5, 1.5)`, PhD target price over shopper WTP.
    pub phd_price_ratio: f64,
    /// `U(1.0, 1.25)`, professor over PhD intercept.
    pub prof_alpha_ratio: f64,
    /// `U(1.0, 1.5)`, professor over PhD target price.
    pub prof_price_ratio: f64,
}

impl MarketDraws {
    /// Draw in a fixed order from `rng`.
    pub fn sample(rng: &mut RngStream) -> Self {
        let lambda = rng.uniform(50.0, 150.0);
        let t = dirichlet(rng, &[1.0, 1.0, 1.0]);
        let gamma_phd = rng.unit();
        let beta_sho = rng.uniform(5.0, 15.0);
        let loyal_ratio = rng.uniform(1.5, 2.0);
        let phd_price_ratio = rng.uniform(0.5, 1.5);
        let prof_alpha_ratio = rng.uniform(1.0, 1.25);
        let prof_price_ratio = rng.uniform(1.0, 1.5);
        Self {
            lambda,
            theta: [t[0], t[1], t[2]],
            gamma_phd,
            beta_sho,
            loyal_ratio,
            phd_price_ratio,
            prof_alpha_ratio,
            prof_price_ratio,
        }
    }

    /// Every uniform at its midpoint and equal segment shares.
    pub fn midpoint() -> Self {
        Self {
            lambda: 100.0,
            theta: [1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0],
            gamma_phd: 0.5,
            beta_sho: 10.0,
            loyal_ratio: 1.75,
            phd_price_ratio: 1.0,
            prof_alpha_ratio: 1.125,
            prof_price_ratio: 1.25,
        }
    }
}

/// Logit slope that makes `target_price` the revenue-maximising symmetric
/// price among `n` competitors with intercept `alpha`.
pub fn calibrated_slope(alpha: f64, target_price: f64, n: usize) -> Result<f64, StatsError> {
    let w = lambert_w(n as f64 * (alpha - 1.0).exp())?;
    Ok((w + 1.0) / target_price)
}

impl MarketParams {
    /// Build parameters for market sizes `2` and `m` from raw draws.
    pub fn from_draws(d: &MarketDraws, m: usize) -> Result<Self, MarketError> {
        if m < 2 {
            return Err(MarketError::InvalidMarketSize(m));
        }
        let beta_sho = d.beta_sho;
        let alpha_phd = beta_sho;
        let p_phd = beta_sho * d.phd_price_ratio;
        let alpha_prof = alpha_phd * d.prof_alpha_ratio;
        let p_prof = p_phd * d.prof_price_ratio;
        let mut beta_phd_by_n = BTreeMap::new();
        let mut beta_prof_by_n = BTreeMap::new();
        for n in [2, m] {
            beta_phd_by_n.insert(n, calibrated_slope(alpha_phd, p_phd, n)?);
            beta_prof_by_n.insert(n, calibrated_slope(alpha_prof, p_prof, n)?);
        }
        Ok(Self {
            lambda: d.lambda,
            theta_sho: d.theta[0],
            theta_loy: d.theta[1],
            theta_sci: d.theta[2],
            gamma_phd: d.gamma_phd,
            gamma_prof: 1.0 - d.gamma_phd,
            beta_sho,
            beta_loy: d.loyal_ratio * beta_sho,
            alpha_phd,
            alpha_prof,
            p_phd,
            p_prof,
            beta_phd_by_n,
            beta_prof_by_n,
        })
    }

    pub fn beta_phd(&self, n: usize) -> Result<f64, MarketError> {
        self.beta_phd_by_n.get(&n).copied().ok_or(MarketError::UncalibratedSize(n))
    }

    pub fn beta_prof(&self, n: usize) -> Result<f64, MarketError> {
        self.beta_prof_by_n.get(&n).copied().ok_or(MarketError::UncalibratedSize(n))
    }

    /// Segment shares `(sho, loy, sci)`.
    pub fn theta(&self) -> [f64; 3] {
        [self.theta_sho, self.theta_loy, self.theta_sci]
    }
}

/// Sample one simulation's market for an oligopoly of size `m`.
pub fn sample_market_params(m: usize, rng: &mut RngStream) -> Result<MarketParams, MarketError> {
    if m < 2 {
        return Err(MarketError::InvalidMarketSize(m));
    }
    MarketParams::from_draws(&MarketDraws::sample(rng), m)
}

/// Arrivals of one period by (sub)segment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodArrivals {
    pub sho: u32,
    pub loy: u32,
    pub phd: u32,
    pub prof: u32,
}

impl PeriodArrivals {
    pub fn sci(&self) -> u32 {
        self.phd + self.prof
    }

    pub fn total(&self) -> u32 {
        self.sho + self.loy + self.phd + self.prof
    }
}

pub fn sample_arrivals(params: &MarketParams, rng: &mut RngStream) -> PeriodArrivals {
    let n = poisson(rng, params.lambda);
    let seg = multinomial(rng, n, &params.theta());
    let sub = multinomial(rng, seg[2], &[params.gamma_phd, params.gamma_prof]);
    PeriodArrivals {
        sho: seg[0] as u32,
        loy: seg[1] as u32,
        phd: sub[0] as u32,
        prof: sub[1] as u32,
    }
}

/// Per-competitor sales and revenue of one period.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodOutcome {
    pub arrivals: PeriodArrivals,
    pub sales_sho: Vec<u32>,
    pub sales_loy: Vec<u32>,
    pub sales_sci: Vec<u32>,
    pub revenue: Vec<f64>,
}

impl PeriodOutcome {
    pub fn zeroed(n: usize) -> Self {
        Self {
            arrivals: PeriodArrivals::default(),
            sales_sho: vec![0; n],
            sales_loy: vec![0; n],
            sales_sci: vec![0; n],
            revenue: vec![0.0; n],
        }
    }

    pub fn total_sales(&self, k: usize) -> u32 {
        self.sales_sho[k] + self.sales_loy[k] + self.sales_sci[k]
    }

    fn reset(&mut self, n: usize) {
        for v in [&mut self.sales_sho, &mut self.sales_loy, &mut self.sales_sci] {
            v.clear();
            v.resize(n, 0);
        }
        self.revenue.clear();
        self.revenue.resize(n, 0.0);
    }
}

/// Shoppers buy from a uniformly chosen lowest-priced competitor when their
/// exponential WTP strictly exceeds the lowest price.
pub fn realize_shopper_sales(prices: &[f64], n_sho: u32, beta_sho: f64, rng: &mut RngStream) -> Vec<u32> {
    let mut out = vec![0; prices.len()];
    add_shopper_sales(prices, n_sho, beta_sho, rng, &mut out);
    out
}

fn add_shopper_sales(prices: &[f64], n_sho: u32, beta_sho: f64, rng: &mut RngStream, out: &mut [u32]) {
    let pmin = prices.iter().copied().fold(f64::INFINITY, f64::min);
    let cheapest: Vec<usize> = (0..prices.len()).filter(|&k| prices[k] == pmin).collect();
    for _ in 0..n_sho {
        if exponential(rng, beta_sho) > pmin {
            let k = if cheapest.len() == 1 { cheapest[0] } else { cheapest[rng.below(cheapest.len())] };
            out[k] += 1;
        }
    }
}

/// Each loyal customer is bound to a uniformly random competitor and buys
/// when their exponential WTP strictly exceeds that competitor's price.
pub fn realize_loyal_sales(prices: &[f64], n_loy: u32, beta_loy: f64, rng: &mut RngStream) -> Vec<u32> {
    let mut out = vec![0; prices.len()];
    add_loyal_sales(prices, n_loy, beta_loy, rng, &mut out);
    out
}

fn add_loyal_sales(prices: &[f64], n_loy: u32, beta_loy: f64, rng: &mut RngStream, out: &mut [u32]) {
    for _ in 0..n_loy {
        let k = rng.below(prices.len());
        if exponential(rng, beta_loy) > prices[k] {
            out[k] += 1;
        }
    }
}

/// Logit purchase probabilities over competitors plus the no-purchase option.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceProbs {
    pub purchase: Vec<f64>,
    pub no_purchase: f64,
}

/// `q_k = exp(alpha - beta*p_k) / (1 + sum_j exp(alpha - beta*p_j))`,
/// evaluated with a max shift.
pub fn scientist_choice_probs(prices: &[f64], alpha: f64, beta_n: f64) -> ChoiceProbs {
    let shift = prices.iter().map(|p| alpha - beta_n * p).fold(0.0, f64::max);
    let mut purchase: Vec<f64> = prices.iter().map(|p| (alpha - beta_n * p - shift).exp()).collect();
    let outside = (-shift).exp();
    let total = outside + purchase.iter().sum::<f64>();
    for q in &mut purchase {
        *q /= total;
    }
    ChoiceProbs { purchase, no_purchase: outside / total }
}

fn add_scientist_sales(choice: &ChoiceProbs, arrivals: u32, rng: &mut RngStream, out: &mut [u32]) {
    if arrivals == 0 {
        return;
    }
    for _ in 0..arrivals {
        let mut u = rng.unit();
        for (k, q) in choice.purchase.iter().enumerate() {
            if u < *q {
                out[k] += 1;
                break;
            }
            u -= q;
        }
    }
}

/// Realise one period of demand for the posted `prices` in a market of
/// `prices.len()` competitors.
///
/// Prices must already be sanitised (finite, nonnegative).
pub fn realize_period(prices: &[f64], params: &MarketParams, rng: &mut RngStream) -> Result<PeriodOutcome, MarketError> {
    let mut out = PeriodOutcome::zeroed(prices.len());
    realize_period_into(prices, params, rng, &mut out)?;
    Ok(out)
}

/// Allocation-free variant of [`realize_period`] reusing `out`.
pub fn realize_period_into(
    prices: &[f64],
    params: &MarketParams,
    rng: &mut RngStream,
    out: &mut PeriodOutcome,
) -> Result<(), MarketError> {
    let n = prices.len();
    assert!(
        prices.iter().all(|p| p.is_finite() && *p >= 0.0),
        "unsanitised prices reached the market: {prices:?}"
    );
    let beta_phd = params.beta_phd(n)?;
    let beta_prof = params.beta_prof(n)?;
    out.reset(n);
    let arrivals = sample_arrivals(params, rng);
    out.arrivals = arrivals;
    add_shopper_sales(prices, arrivals.sho, params.beta_sho, rng, &mut out.sales_sho);
    add_loyal_sales(prices, arrivals.loy, params.beta_loy, rng, &mut out.sales_loy);
    if arrivals.phd > 0 {
        let q = scientist_choice_probs(prices, params.alpha_phd, beta_phd);
        add_scientist_sales(&q, arrivals.phd, rng, &mut out.sales_sci);
    }
    if arrivals.prof > 0 {
        let q = scientist_choice_probs(prices, params.alpha_prof, beta_prof);
        add_scientist_sales(&q, arrivals.prof, rng, &mut out.sales_sci);
    }
    for k in 0..n {
        out.revenue[k] = prices[k] * out.total_sales(k) as f64;
    }
    Ok(())
}
