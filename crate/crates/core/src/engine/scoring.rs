//! Revenue-share scoring of one simulation.

use serde::{Deserialize, Serialize};

/// Oligopoly and duopoly revenue shares of one simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    /// Oligopoly revenue per roster slot.
    pub oligopoly_revenue: Vec<f64>,
    /// `duopoly_revenue[j][k]`: revenue of slot `j` in its duopoly against `k`.
    pub duopoly_revenue: Vec<Vec<f64>>,
    pub oligopoly_share: Vec<f64>,
    pub duopoly_share: Vec<f64>,
    /// Mean of the two shares.
    pub final_share: Vec<f64>,
    /// Set when total oligopoly revenue was zero and shares were split evenly.
    pub oligopoly_fallback: bool,
    pub duopoly_fallback: bool,
}

/// Score a simulation from raw revenues.
///
/// A zero denominator yields equal shares `1/m` for that component.
pub fn score_simulation(oligopoly_revenue: &[f64], duopoly_revenue: &[Vec<f64>]) -> Scorecard {
    let m = oligopoly_revenue.len();
    assert_eq!(duopoly_revenue.len(), m, "duopoly matrix must be m x m");

    let (oligopoly_share, oligopoly_fallback) = shares(oligopoly_revenue);
    let totals: Vec<f64> = duopoly_revenue
        .iter()
        .map(|row| {
            assert_eq!(row.len(), m, "duopoly matrix must be m x m");
            row.iter().sum()
        })
        .collect();
    let (duopoly_share, duopoly_fallback) = shares(&totals);
    if oligopoly_fallback {
        log::warn!("zero total oligopoly revenue; splitting oligopoly share evenly");
    }
    if duopoly_fallback {
        log::warn!("zero total duopoly revenue; splitting duopoly share evenly");
    }
    let final_share = oligopoly_share.iter().zip(&duopoly_share).map(|(x, y)| 0.5 * (x + y)).collect();

    Scorecard {
        oligopoly_revenue: oligopoly_revenue.to_vec(),
        duopoly_revenue: duopoly_revenue.to_vec(),
        oligopoly_share,
        duopoly_share,
        final_share,
        oligopoly_fallback,
        duopoly_fallback,
    }
}

fn shares(values: &[f64]) -> (Vec<f64>, bool) {
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        (values.iter().map(|v| v / total).collect(), false)
    } else {
        (vec![1.0 / values.len() as f64; values.len()], true)
    }
}
