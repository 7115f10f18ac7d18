//! Finite-mixture logit demand learned by EM, with competitor prices
//! forecast as a multivariate normal over the sorted price profile.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::refined_search;
use crate::engine::{Observation, StepBudget, Strategy, StrategyFault};
use crate::rng::RngStream;
use crate::stats::fit_mvn_default;
use crate::stats::mvn::draw_into;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogitParams {
    /// Periods spent matching the previous minimum before the first fit.
    pub exploration_periods: usize,
    pub refit_every: usize,
    /// Mixture components; arrival counts up to the bound are bucketed into
    /// this many groups.
    pub groups: usize,
    pub em_iterations: usize,
    pub em_refit_iterations: usize,
    pub samples: usize,
    pub price_step: f64,
    /// Spacing of the first search pass; the grid is then searched
    /// exhaustively around the best coarse price. `0` searches every step.
    pub coarse_step: f64,
    pub max_price: f64,
    /// Components lighter than this are skipped when pricing.
    pub min_weight: f64,
}

impl Default for LogitParams {
    fn default() -> Self {
        Self {
            exploration_periods: 100,
            refit_every: 20,
            groups: 10,
            em_iterations: 30,
            em_refit_iterations: 10,
            samples: 1000,
            price_step: 0.5,
            coarse_step: 2.5,
            max_price: 99.5,
            min_weight: 1e-4,
        }
    }
}

/// One mixture component: `arrivals` customers per period, each buying from
/// competitor `i` with logit utility `a - b*p_i` against a zero-utility
/// no-purchase option.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogitComponent {
    pub arrivals: f64,
    pub weight: f64,
    pub a: f64,
    pub b: f64,
}

/// A period as seen by the learner.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceObservation {
    pub own_price: f64,
    pub competitor_prices: Vec<f64>,
    pub sales: f64,
}

struct Shares {
    ln_own: f64,
    ln_not_own: f64,
    own: f64,
    no_purchase: f64,
    /// `sum_k p_k * P(buy k)` over all competitors, own included.
    price_weighted: f64,
}

fn shares(a: f64, b: f64, own_price: f64, others: &[f64]) -> Shares {
    let u_own = a - b * own_price;
    let mut m = u_own.max(0.0);
    for &p in others {
        m = m.max(a - b * p);
    }
    let e_own = (u_own - m).exp();
    let mut rest = (-m).exp();
    let mut pw = own_price * e_own;
    for &p in others {
        let e = (a - b * p - m).exp();
        rest += e;
        pw += p * e;
    }
    let total = e_own + rest;
    let ln_total = total.ln();
    Shares {
        ln_own: u_own - m - ln_total,
        ln_not_own: rest.ln() - ln_total,
        own: e_own / total,
        no_purchase: (-m).exp() / total,
        price_weighted: pw / total,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureLogit {
    pub components: Vec<LogitComponent>,
}

impl MixtureLogit {
    /// Components with arrival counts `U*(g+1)/G`, equal weights and a
    /// starting utility matched to mean observed sales.
    pub fn initial(upper_bound: f64, groups: usize, data: &[ChoiceObservation]) -> Self {
        let groups = groups.clamp(1, upper_bound.max(1.0) as usize);
        let t = data.len().max(1) as f64;
        let mean_sales = data.iter().map(|d| d.sales).sum::<f64>() / t;
        let mean_price = data.iter().map(|d| d.own_price).sum::<f64>() / t;
        let n = data.first().map_or(2, |d| d.competitor_prices.len() + 1) as f64;
        let b = 0.1;
        let components = (0..groups)
            .map(|g| {
                let arrivals = (upper_bound * (g + 1) as f64 / groups as f64).round().max(1.0);
                let q = (mean_sales / arrivals).clamp(1e-3, 0.9 / n);
                let z = q / (1.0 - n * q);
                LogitComponent { arrivals, weight: 1.0 / groups as f64, a: z.ln() + b * mean_price, b }
            })
            .collect();
        Self { components }
    }

    /// Expected own sales.
    pub fn expected_sales(&self, own_price: f64, competitor_prices: &[f64]) -> f64 {
        self.components.iter().map(|c| c.weight * c.arrivals * shares(c.a, c.b, own_price, competitor_prices).own).sum()
    }

    /// Dominant component (largest weight).
    pub fn dominant(&self) -> &LogitComponent {
        self.components.iter().fold(&self.components[0], |best, c| if c.weight > best.weight { c } else { best })
    }

    /// Run `iterations` EM steps; returns the final log-likelihood.
    pub fn em(&mut self, data: &[ChoiceObservation], iterations: usize, budget: &mut StepBudget) -> Result<f64, StrategyFault> {
        let g_count = self.components.len();
        let t_count = data.len();
        let n = data.first().map_or(1, |d| d.competitor_prices.len() + 1) as u64;
        // log binomial coefficients; -inf where sales exceed the component's arrivals
        let ln_coef: Vec<Vec<f64>> = self
            .components
            .iter()
            .map(|c| {
                data.iter()
                    .map(|d| {
                        if d.sales > c.arrivals {
                            f64::NEG_INFINITY
                        } else {
                            ln_gamma(c.arrivals + 1.0) - ln_gamma(d.sales + 1.0) - ln_gamma(c.arrivals - d.sales + 1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut resp = vec![vec![0.0; t_count]; g_count];
        let mut loglik = f64::NEG_INFINITY;

        for iter in 0..iterations {
            budget.spend(40 * g_count as u64 * t_count as u64 * n)?;
            // E-step
            let mut ll = 0.0;
            for (t, d) in data.iter().enumerate() {
                let mut logs = vec![f64::NEG_INFINITY; g_count];
                for (g, c) in self.components.iter().enumerate() {
                    if ln_coef[g][t].is_finite() && c.weight > 0.0 {
                        let s = shares(c.a, c.b, d.own_price, &d.competitor_prices);
                        let l = ln_coef[g][t] + d.sales * s.ln_own + (c.arrivals - d.sales) * s.ln_not_own;
                        logs[g] = c.weight.ln() + l;
                    }
                }
                let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if !m.is_finite() {
                    for r in resp.iter_mut() {
                        r[t] = 0.0;
                    }
                    continue;
                }
                let z: f64 = logs.iter().map(|l| (l - m).exp()).sum();
                ll += m + z.ln();
                for (g, r) in resp.iter_mut().enumerate() {
                    r[t] = (logs[g] - m).exp() / z;
                }
            }
            // M-step
            let total: f64 = resp.iter().flatten().sum();
            if total <= 0.0 {
                log::debug!("mixture logit: no period is feasible under any component");
                break;
            }
            for (g, c) in self.components.iter_mut().enumerate() {
                c.weight = resp[g].iter().sum::<f64>() / total;
                if c.weight > 0.0 {
                    let (a, b) = fit_component(c.a, c.b, c.arrivals, data, &resp[g]);
                    c.a = a;
                    c.b = b;
                }
            }
            let converged = (ll - loglik).abs() <= 1e-8 * (1.0 + ll.abs());
            loglik = ll;
            if converged {
                return Ok(loglik);
            }
            if iter + 1 == iterations {
                log::debug!("mixture logit EM stopped at the iteration cap (log-likelihood {loglik:.4})");
            }
        }
        Ok(loglik)
    }
}

fn component_loglik(a: f64, b: f64, arrivals: f64, data: &[ChoiceObservation], resp: &[f64]) -> f64 {
    data.iter()
        .zip(resp)
        .filter(|(d, &r)| r > 0.0 && d.sales <= arrivals)
        .map(|(d, r)| {
            let s = shares(a, b, d.own_price, &d.competitor_prices);
            r * (d.sales * s.ln_own + (arrivals - d.sales) * s.ln_not_own)
        })
        .sum()
}

/// Weighted binomial-logit maximum likelihood by Fisher scoring with
/// backtracking, keeping `b >= 0`.
fn fit_component(mut a: f64, mut b: f64, arrivals: f64, data: &[ChoiceObservation], resp: &[f64]) -> (f64, f64) {
    let mut current = component_loglik(a, b, arrivals, data, resp);
    for _ in 0..4 {
        let (mut ga, mut gb) = (0.0, 0.0);
        let (mut iaa, mut iab, mut ibb) = (0.0, 0.0, 0.0);
        for (d, &r) in data.iter().zip(resp) {
            if r <= 0.0 || d.sales > arrivals {
                continue;
            }
            let s = shares(a, b, d.own_price, &d.competitor_prices);
            let q = s.own.clamp(1e-300, 1.0 - 1e-16);
            let dqa = q * s.no_purchase;
            let dqb = q * (s.price_weighted - d.own_price);
            let v = q * (1.0 - q);
            let score = (d.sales - arrivals * q) / v;
            ga += r * score * dqa;
            gb += r * score * dqb;
            let w = r * arrivals / v;
            iaa += w * dqa * dqa;
            iab += w * dqa * dqb;
            ibb += w * dqb * dqb;
        }
        let det = iaa * ibb - iab * iab;
        let (da, db) = if det > 1e-12 * (iaa * ibb).max(1e-300) {
            ((ibb * ga - iab * gb) / det, (iaa * gb - iab * ga) / det)
        } else if iaa > 0.0 {
            (ga / iaa, 0.0)
        } else {
            break;
        };
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let na = a + step * da;
            let nb = (b + step * db).max(0.0);
            let l = component_loglik(na, nb, arrivals, data, resp);
            if l.is_finite() && l >= current {
                let gain = l - current;
                a = na;
                b = nb;
                current = l;
                improved = gain > 1e-12 * (1.0 + current.abs());
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

/// `sum_s e / (e + rest_s)`, accumulated in four lanes so it vectorises.
fn mean_share(e: f64, rest: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = rest.chunks_exact(4);
    let tail: f64 = chunks.remainder().iter().map(|r| e / (e + r)).sum();
    for ch in chunks {
        for j in 0..4 {
            acc[j] += e / (e + ch[j]);
        }
    }
    acc.iter().sum::<f64>() + tail
}

pub struct Logit {
    params: LogitParams,
    rng: RngStream,
    model: Option<MixtureLogit>,
    upper_bound: Option<f64>,
    last_fit: Option<usize>,
    samples: Vec<f64>,
}

impl Logit {
    pub fn new(params: LogitParams, rng: RngStream) -> Self {
        Self { params, rng, model: None, upper_bound: None, last_fit: None, samples: Vec::new() }
    }

    pub fn model(&self) -> Option<&MixtureLogit> {
        self.model.as_ref()
    }

    fn refit(&mut self, obs: &Observation<'_>, budget: &mut StepBudget) -> Result<(), StrategyFault> {
        let data: Vec<ChoiceObservation> = (0..obs.observed())
            .map(|i| {
                let mut competitor_prices = obs.competitor_prices(i);
                competitor_prices.sort_by(f64::total_cmp);
                ChoiceObservation { own_price: obs.own_price(i), competitor_prices, sales: obs.own_sales[i] as f64 }
            })
            .collect();
        let upper = *self.upper_bound.get_or_insert_with(|| {
            let max_sales = obs.own_sales.iter().copied().max().unwrap_or(0).max(1);
            max_sales as f64 * (obs.n() + 1) as f64
        });
        let (mut model, iterations) = match self.model.take() {
            Some(m) => (m, self.params.em_refit_iterations),
            None => (MixtureLogit::initial(upper, self.params.groups, &data), self.params.em_iterations),
        };
        let ll = model.em(&data, iterations, budget)?;
        if ll.is_finite() && model.components.iter().all(|c| c.a.is_finite() && c.b.is_finite()) {
            self.model = Some(model);
        } else {
            log::warn!("mixture logit fit produced non-finite parameters; keeping the previous model");
        }
        Ok(())
    }

    fn optimise(&mut self, obs: &Observation<'_>, budget: &mut StepBudget) -> Result<Option<f64>, StrategyFault> {
        let Some(model) = &self.model else { return Ok(None) };
        let profiles: Vec<Vec<f64>> = (0..obs.observed())
            .map(|i| {
                let mut c = obs.competitor_prices(i);
                c.sort_by(f64::total_cmp);
                c
            })
            .collect();
        let Ok(mvn) = fit_mvn_default(&profiles) else { return Ok(None) };
        let Ok(factor) = mvn.factor() else { return Ok(None) };
        let dim = mvn.dim();
        let k = self.params.samples;
        self.samples.resize(k * dim, 0.0);
        for s in self.samples.chunks_exact_mut(dim) {
            draw_into(&mvn, &factor, &mut self.rng, s);
            for v in s.iter_mut() {
                *v = v.max(0.0);
            }
        }
        let active: Vec<&LogitComponent> = model.components.iter().filter(|c| c.weight >= self.params.min_weight).collect();
        budget.spend((active.len() * k) as u64 * (dim as u64 + (self.params.max_price / self.params.price_step) as u64))?;
        // rest[g][s] = 1 + sum_k exp(a_g - b_g * c_sk), the non-own denominator
        let rest: Vec<Vec<f64>> = active
            .iter()
            .map(|c| {
                self.samples.chunks_exact(dim).map(|s| 1.0 + s.iter().map(|&p| (c.a - c.b * p).exp()).sum::<f64>()).collect()
            })
            .collect();
        let inv_k = 1.0 / k as f64;
        let (price, _) = refined_search(self.params.price_step, self.params.max_price, self.params.coarse_step, |p| {
            let mut sales = 0.0;
            for (c, rest) in active.iter().zip(&rest) {
                let e = (c.a - c.b * p).exp();
                if !e.is_finite() {
                    sales += c.weight * c.arrivals;
                    continue;
                }
                sales += c.weight * c.arrivals * mean_share(e, rest) * inv_k;
            }
            p * sales
        });
        Ok(Some(price))
    }
}

impl Strategy for Logit {
    fn id(&self) -> &str {
        "logit"
    }

    fn next_price(&mut self, obs: &Observation<'_>, budget: &mut StepBudget) -> Result<f64, StrategyFault> {
        let Some(last) = obs.last_competitor_prices() else {
            return Ok(0.0);
        };
        let min_rule = last.iter().copied().fold(f64::INFINITY, f64::min);
        if obs.period <= self.params.exploration_periods {
            return Ok(min_rule);
        }
        let due = match self.last_fit {
            None => true,
            Some(at) => obs.period >= at + self.params.refit_every,
        };
        if due {
            self.refit(obs, budget)?;
            self.last_fit = Some(obs.period);
        }
        Ok(self.optimise(obs, budget)?.unwrap_or(min_rule))
    }
}
