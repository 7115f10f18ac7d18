//! Epsilon-greedy bandits over a price grid (b-grid) and over price buckets
//! conditioned on the competitors' modal bucket (b-bucket).

use serde::{Deserialize, Serialize};

use super::argmax;
use super::smoothing::ExpSmoother;
use crate::engine::{Observation, StepBudget, Strategy, StrategyFault};
use crate::rng::RngStream;

/// Pull counts and running mean rewards of a set of arms.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmTable {
    pub counts: Vec<u64>,
    pub means: Vec<f64>,
}

impl ArmTable {
    pub fn new(arms: usize) -> Self {
        Self { counts: vec![0; arms], means: vec![0.0; arms] }
    }

    pub fn arms(&self) -> usize {
        self.counts.len()
    }

    pub fn update(&mut self, arm: usize, reward: f64) {
        self.counts[arm] += 1;
        self.means[arm] += (reward - self.means[arm]) / self.counts[arm] as f64;
    }

    /// Greedy arm; ties go to the lowest index.
    pub fn best(&self) -> usize {
        argmax(&self.means)
    }

    /// With probability `epsilon` a uniformly random arm, else [`Self::best`].
    pub fn select(&self, epsilon: f64, rng: &mut RngStream) -> usize {
        if rng.unit() < epsilon {
            rng.below(self.arms())
        } else {
            self.best()
        }
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.arms());
    }
}

/// Own revenue of the most recently observed period.
fn last_revenue(obs: &Observation<'_>) -> Option<f64> {
    obs.observed().checked_sub(1).map(|i| obs.own_revenue(i))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BGridParams {
    pub epsilon: f64,
    /// Posted price of each arm.
    pub prices: Vec<f64>,
}

impl Default for BGridParams {
    fn default() -> Self {
        Self { epsilon: 0.2, prices: (1..=10).map(|k| 10.0 * k as f64).collect() }
    }
}

pub struct BGrid {
    params: BGridParams,
    table: ArmTable,
    pending: Option<usize>,
    rng: RngStream,
}

impl BGrid {
    pub fn new(params: BGridParams, rng: RngStream) -> Self {
        let table = ArmTable::new(params.prices.len());
        Self { params, table, pending: None, rng }
    }

    pub fn table(&self) -> &ArmTable {
        &self.table
    }
}

impl Strategy for BGrid {
    fn id(&self) -> &str {
        "b-grid"
    }

    fn next_price(&mut self, obs: &Observation<'_>, _budget: &mut StepBudget) -> Result<f64, StrategyFault> {
        if let (Some(arm), Some(r)) = (self.pending.take(), last_revenue(obs)) {
            self.table.update(arm, r);
        }
        let arm = self.table.select(self.params.epsilon, &mut self.rng);
        self.pending = Some(arm);
        Ok(self.params.prices[arm])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BBucketParams {
    pub epsilon: f64,
    pub buckets: usize,
    pub bucket_width: f64,
    /// Smoothing coefficient of the per-bucket competitor price counts.
    pub smoothing: f64,
}

impl Default for BBucketParams {
    fn default() -> Self {
        Self { epsilon: 0.2, buckets: 10, bucket_width: 10.0, smoothing: 0.3 }
    }
}

/// Bucket `k` covers `(k*w, (k+1)*w]`; out-of-range prices go to the end
/// buckets.
pub fn bucket_of(price: f64, width: f64, buckets: usize) -> usize {
    let k = (price / width).ceil() as i64 - 1;
    k.clamp(0, buckets as i64 - 1) as usize
}

pub struct BBucket {
    params: BBucketParams,
    /// One arm table per forecast modal bucket.
    tables: Vec<ArmTable>,
    counts: ExpSmoother,
    pending: Option<(usize, usize)>,
    rng: RngStream,
}

impl BBucket {
    pub fn new(params: BBucketParams, rng: RngStream) -> Self {
        let tables = vec![ArmTable::new(params.buckets); params.buckets];
        let counts = ExpSmoother::new(params.smoothing);
        Self { params, tables, counts, pending: None, rng }
    }

    /// Forecast modal competitor bucket; ties go to the lower bucket.
    pub fn modal_bucket(&self) -> usize {
        self.counts.level().map_or(0, argmax)
    }

    pub fn table(&self, modal: usize) -> &ArmTable {
        &self.tables[modal]
    }

    pub fn table_mut(&mut self, modal: usize) -> &mut ArmTable {
        &mut self.tables[modal]
    }

    /// Uniform draw from bucket `arm`, i.e. from `(lo, hi]`.
    pub fn sample_price(&mut self, arm: usize) -> f64 {
        let w = self.params.bucket_width;
        let lo = arm as f64 * w;
        lo + w * (1.0 - self.rng.unit())
    }

    fn observe(&mut self, competitor_prices: &[f64]) {
        let mut c = vec![0.0; self.params.buckets];
        for &p in competitor_prices {
            c[bucket_of(p, self.params.bucket_width, self.params.buckets)] += 1.0;
        }
        self.counts.update(&c);
    }
}

impl Strategy for BBucket {
    fn id(&self) -> &str {
        "b-bucket"
    }

    fn next_price(&mut self, obs: &Observation<'_>, _budget: &mut StepBudget) -> Result<f64, StrategyFault> {
        if let Some(last) = obs.last_competitor_prices() {
            if let (Some((arm, modal)), Some(r)) = (self.pending.take(), last_revenue(obs)) {
                self.tables[modal].update(arm, r);
            }
            self.observe(&last);
        }
        let modal = self.modal_bucket();
        let arm = self.tables[modal].select(self.params.epsilon, &mut self.rng);
        self.pending = Some((arm, modal));
        Ok(self.sample_price(arm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::PriceHistory;

    #[test]
    fn greedy_arm_and_tie_break() {
        let mut t = ArmTable::new(10);
        t.means[..4].copy_from_slice(&[5.0, 9.0, 1.0, 0.0]);
        let mut rng = RngStream::from_seed(1);
        let arm = t.select(0.0, &mut rng);
        assert_eq!(BGridParams::default().prices[arm], 20.0);
        assert_eq!(ArmTable::new(10).select(0.0, &mut rng), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let t = ArmTable::new(10);
        let mut rng = RngStream::from_seed(2).child("explore");
        let mut freq = [0usize; 10];
        for _ in 0..10_000 {
            freq[t.select(1.0, &mut rng)] += 1;
        }
        for f in freq {
            assert!((f as f64 / 1e4 - 0.1).abs() <= 0.02);
        }
    }

    #[test]
    fn running_mean() {
        let mut t = ArmTable::new(2);
        for r in [2.0, 4.0, 9.0] {
            t.update(1, r);
        }
        assert_eq!(t.counts[1], 3);
        assert!((t.means[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn argmax_invariant_under_positive_scaling() {
        let mut rng = RngStream::from_seed(5);
        for _ in 0..100 {
            let mut t = ArmTable::new(10);
            for m in t.means.iter_mut() {
                *m = rng.uniform(0.0, 100.0);
            }
            let best = t.best();
            for m in t.means.iter_mut() {
                *m *= 3.7;
            }
            assert_eq!(t.best(), best);
        }
    }

    #[test]
    fn grid_updates_pulled_arm_with_own_revenue() {
        let mut g = BGrid::new(BGridParams { epsilon: 0.0, ..Default::default() }, RngStream::from_seed(1));
        let h0 = PriceHistory::new(2);
        let p = g.next_price(&Observation { period: 1, own_index: 1, prices: &h0, own_sales: &[] }, &mut StepBudget::unlimited());
        assert_eq!(p.unwrap(), 10.0);
        let h1 = PriceHistory::from_rows(&[[99.0, 10.0]]);
        g.next_price(&Observation { period: 2, own_index: 1, prices: &h1, own_sales: &[3] }, &mut StepBudget::unlimited())
            .unwrap();
        assert_eq!(g.table().counts[0], 1);
        assert_eq!(g.table().means[0], 30.0);
    }

    #[test]
    fn modal_bucket_fixed_point() {
        for alpha in [0.05, 0.3, 0.9] {
            let mut b = BBucket::new(BBucketParams { smoothing: alpha, ..Default::default() }, RngStream::from_seed(1));
            for i in 0..50 {
                b.observe(&[21.0 + i as f64 * 0.1, 25.0, 30.0]);
                assert_eq!(b.modal_bucket() + 1, 3);
            }
        }
    }

    #[test]
    fn exploits_row_of_modal_bucket() {
        let mut b = BBucket::new(BBucketParams { epsilon: 0.0, ..Default::default() }, RngStream::from_seed(9));
        b.table_mut(2).means[4] = 100.0;
        let rows: Vec<[f64; 3]> = (0..5).map(|_| [0.0, 22.0, 28.0]).collect();
        let h = PriceHistory::from_rows(&rows);
        let sales = [0; 5];
        let p = b.next_price(&Observation { period: 6, own_index: 0, prices: &h, own_sales: &sales }, &mut StepBudget::unlimited());
        let p = p.unwrap();
        assert!(p > 40.0 && p <= 50.0, "{p}");
    }

    #[test]
    fn bucket_price_support() {
        let mut b = BBucket::new(BBucketParams::default(), RngStream::from_seed(4));
        for _ in 0..10_000 {
            let p = b.sample_price(9);
            assert!(p > 90.0 && p <= 100.0);
        }
    }

    #[test]
    fn bucket_boundaries() {
        assert_eq!(bucket_of(10.0, 10.0, 10), 0);
        assert_eq!(bucket_of(10.01, 10.0, 10), 1);
        assert_eq!(bucket_of(0.0, 10.0, 10), 0);
        assert_eq!(bucket_of(250.0, 10.0, 10), 9);
    }
}
