//! Generic simulated annealing with geometric cooling and best-state tracking.

use serde::{Deserialize, Serialize};

use crate::engine::{StepBudget, StrategyFault};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealSchedule {
    pub proposals: usize,
    /// Starting temperature as a fraction of the initial objective value.
    pub initial_temperature: f64,
    pub cooling: f64,
    /// Proposals between two cooling steps.
    pub cool_every: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self { proposals: 2000, initial_temperature: 0.1, cooling: 0.95, cool_every: 20 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnealOutcome<S> {
    pub best: S,
    pub best_value: f64,
    pub accepted: usize,
}

/// Minimise `objective` starting from `init`.
///
/// `propose` receives the current state and the fraction of the schedule
/// still ahead (1 at the start, towards 0 at the end) so step sizes can
/// shrink. Non-finite proposals are rejected. Each evaluation charges `cost`
/// budget units. Fails only if the initial state is non-finite or the budget
/// runs out.
pub fn anneal<S, F, P>(
    init: S,
    mut objective: F,
    mut propose: P,
    schedule: &AnnealSchedule,
    cost: u64,
    rng: &mut RngStream,
    budget: &mut StepBudget,
) -> Result<Option<AnnealOutcome<S>>, StrategyFault>
where
    S: Clone,
    F: FnMut(&S) -> f64,
    P: FnMut(&S, f64, &mut RngStream) -> S,
{
    budget.spend(cost)?;
    let start = objective(&init);
    if !start.is_finite() {
        return Ok(None);
    }
    let mut temperature = schedule.initial_temperature * start.abs().max(1e-12);
    let mut current = init.clone();
    let mut current_value = start;
    let mut best = init;
    let mut best_value = start;
    let mut accepted = 0;
    let total = schedule.proposals.max(1) as f64;

    for i in 0..schedule.proposals {
        budget.spend(cost)?;
        let candidate = propose(&current, 1.0 - i as f64 / total, rng);
        let value = objective(&candidate);
        if !value.is_finite() {
            continue;
        }
        let delta = value - current_value;
        if delta <= 0.0 || (temperature > 0.0 && rng.unit() < (-delta / temperature).exp()) {
            current = candidate;
            current_value = value;
            accepted += 1;
            if value < best_value {
                best_value = value;
                best = current.clone();
            }
        }
        if schedule.cool_every > 0 && (i + 1) % schedule.cool_every == 0 {
            temperature *= schedule.cooling;
        }
    }
    Ok(Some(AnnealOutcome { best, best_value, accepted }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimises_a_quadratic() {
        let mut rng = RngStream::from_seed(3).child("anneal");
        let out = anneal(
            [8.0f64, -6.0],
            |s| (s[0] - 1.5).powi(2) + 3.0 * (s[1] + 2.0).powi(2) + 1.0,
            |s, frac, r| [s[0] + r.uniform(-1.0, 1.0) * frac, s[1] + r.uniform(-1.0, 1.0) * frac],
            &AnnealSchedule::default(),
            1,
            &mut rng,
            &mut StepBudget::unlimited(),
        )
        .unwrap()
        .unwrap();
        assert!((out.best[0] - 1.5).abs() < 0.05 && (out.best[1] + 2.0).abs() < 0.05);
        assert!(out.best_value < 1.01);
    }

    #[test]
    fn non_finite_start_gives_none() {
        let mut rng = RngStream::from_seed(3);
        let out = anneal(0.0, |_| f64::NAN, |s, _, _| *s, &AnnealSchedule::default(), 1, &mut rng, &mut StepBudget::unlimited());
        assert_eq!(out, Ok(None));
    }

    #[test]
    fn respects_budget() {
        let mut rng = RngStream::from_seed(3);
        let out = anneal(0.0, |s: &f64| s * s, |s, _, _| s + 1.0, &AnnealSchedule::default(), 10, &mut rng, &mut StepBudget::new(100));
        assert!(matches!(out, Err(StrategyFault::BudgetExhausted(100))));
    }

    #[test]
    fn best_state_never_worse_than_start() {
        let mut rng = RngStream::from_seed(4);
        let out = anneal(
            0.0f64,
            |s| s.sin() + 2.0,
            |s, _, r| s + r.uniform(-3.0, 3.0),
            &AnnealSchedule { proposals: 50, ..Default::default() },
            1,
            &mut rng,
            &mut StepBudget::unlimited(),
        )
        .unwrap()
        .unwrap();
        assert!(out.best_value <= 2.0);
    }
}
