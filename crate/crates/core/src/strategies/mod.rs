//! The eight contest strategies and the learners they are built from.
//!
//! Every tunable constant lives in [`StrategyParams`], which is loaded from
//! the `[strategies]` table of a run configuration.

pub mod anneal;
pub mod bandit;
pub mod bmodel;
pub mod greedy;
pub mod logit;
pub mod ml;
pub mod ols;
pub mod regression;
pub mod smoothing;
pub mod wls;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{Observation, Roster, StepBudget, Strategy, StrategyFactory, StrategyFault};
use crate::rng::RngStream;

pub use bandit::{BBucket, BBucketParams, BGrid, BGridParams};
pub use bmodel::{BModel, BModelParams};
pub use greedy::{Greedy, GreedyParams};
pub use logit::{Logit, LogitParams};
pub use ml::{Ml, MlParams};
pub use ols::{Ols, OlsParams};
pub use wls::{Wls, WlsParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyId {
    Logit,
    Ols,
    BBucket,
    BGrid,
    BModel,
    Ml,
    Greedy,
    Wls,
}

impl StrategyId {
    /// The contest roster, in the order the results tables list it.
    pub const ALL: [StrategyId; 8] = [
        StrategyId::Logit,
        StrategyId::Ols,
        StrategyId::BBucket,
        StrategyId::BGrid,
        StrategyId::BModel,
        StrategyId::Ml,
        StrategyId::Greedy,
        StrategyId::Wls,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyId::Logit => "logit",
            StrategyId::Ols => "ols",
            StrategyId::BBucket => "b-bucket",
            StrategyId::BGrid => "b-grid",
            StrategyId::BModel => "b-model",
            StrategyId::Ml => "ml",
            StrategyId::Greedy => "greedy",
            StrategyId::Wls => "wls",
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown strategy identifier `{0}` (expected one of logit, ols, b-grid, b-bucket, b-model, ml, greedy, wls)")]
pub struct UnknownStrategy(pub String);

impl FromStr for StrategyId {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyId::ALL.into_iter().find(|id| id.as_str() == s.trim()).ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

/// Hyperparameters of every strategy.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyParams {
    pub logit: LogitParams,
    pub ols: OlsParams,
    #[serde(rename = "b-grid")]
    pub b_grid: BGridParams,
    #[serde(rename = "b-bucket")]
    pub b_bucket: BBucketParams,
    #[serde(rename = "b-model")]
    pub b_model: BModelParams,
    pub ml: MlParams,
    pub greedy: GreedyParams,
    pub wls: WlsParams,
}

/// Factory for one roster entry.
#[derive(Clone, Debug)]
pub struct StrategySpec {
    pub id: StrategyId,
    pub params: Arc<StrategyParams>,
}

impl StrategyFactory for StrategySpec {
    fn id(&self) -> &str {
        self.id.as_str()
    }

    fn create(&self, rng: RngStream) -> Box<dyn Strategy> {
        let p = &self.params;
        match self.id {
            StrategyId::Logit => Box::new(Logit::new(p.logit.clone(), rng)),
            StrategyId::Ols => Box::new(Ols::new(p.ols.clone(), rng)),
            StrategyId::BBucket => Box::new(BBucket::new(p.b_bucket.clone(), rng)),
            StrategyId::BGrid => Box::new(BGrid::new(p.b_grid.clone(), rng)),
            StrategyId::BModel => Box::new(BModel::new(p.b_model.clone(), rng)),
            StrategyId::Ml => Box::new(Ml::new(p.ml.clone(), rng)),
            StrategyId::Greedy => Box::new(Greedy::new(p.greedy.clone(), rng)),
            StrategyId::Wls => Box::new(Wls::new(p.wls.clone(), rng)),
        }
    }
}

/// Build a roster from identifiers; duplicates are allowed.
pub fn build_roster(ids: &[StrategyId], params: &StrategyParams) -> Roster {
    let params = Arc::new(params.clone());
    ids.iter()
        .map(|&id| Arc::new(StrategySpec { id, params: params.clone() }) as Arc<dyn StrategyFactory>)
        .collect()
}

/// A stub that always posts the same price. Useful as a control opponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPrice(pub f64);

impl Strategy for FixedPrice {
    fn id(&self) -> &str {
        "fixed"
    }

    fn next_price(&mut self, _obs: &Observation<'_>, _budget: &mut StepBudget) -> Result<f64, StrategyFault> {
        Ok(self.0)
    }
}

impl StrategyFactory for FixedPrice {
    fn id(&self) -> &str {
        "fixed"
    }

    fn create(&self, _rng: RngStream) -> Box<dyn Strategy> {
        Box::new(*self)
    }
}

/// Evaluate `f` at `step, 2*step, ...` up to `hi` (inclusive when `hi` is a
/// multiple of `step`) and return the first maximiser with its value.
pub(crate) fn line_search(step: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let count = (hi / step + 1e-9).floor() as usize;
    let mut best = (step, f64::NEG_INFINITY);
    for k in 1..=count {
        let p = k as f64 * step;
        let v = f(p);
        if v > best.1 {
            best = (p, v);
        }
    }
    best
}

/// Two-stage search over the same grid as [`line_search`]: evaluate every
/// `coarse` units, then every grid point within one coarse step of the best
/// coarse point. Falls back to the exhaustive search when `coarse <= step`.
pub(crate) fn refined_search(step: f64, hi: f64, coarse: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let ratio = (coarse / step).round() as usize;
    if ratio <= 1 {
        return line_search(step, hi, f);
    }
    let count = (hi / step + 1e-9).floor() as usize;
    let mut best = (0usize, f64::NEG_INFINITY);
    for k in (ratio..=count).step_by(ratio).chain(std::iter::once(count)) {
        let v = f(k as f64 * step);
        if v > best.1 || (v == best.1 && k < best.0) {
            best = (k, v);
        }
    }
    let centre = best.0;
    let mut out = (centre as f64 * step, best.1);
    for k in centre.saturating_sub(ratio - 1).max(1)..=(centre + ratio - 1).min(count) {
        if k == centre {
            continue;
        }
        let v = f(k as f64 * step);
        if v > out.1 || (v == out.1 && (k as f64 * step) < out.0) {
            out = (k as f64 * step, v);
        }
    }
    out
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
