//! The handful of standard distributions the simulator draws from.

use rand_distr::{Binomial, Distribution as _, Exp, Gamma, Poisson};

use super::StatsError;
use crate::rng::RngStream;

const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// A parameterised distribution that can be sampled from a stream.
#[derive(Clone, Debug, PartialEq)]
pub enum Distribution {
    Poisson { mean: f64 },
    Multinomial { trials: u64, probs: Vec<f64> },
    Exponential { mean: f64 },
    Uniform { lo: f64, hi: f64 },
    Dirichlet { alpha: Vec<f64> },
}

/// One draw from a [`Distribution`].
#[derive(Clone, Debug, PartialEq)]
pub enum Sample {
    Count(u64),
    Counts(Vec<u64>),
    Real(f64),
    Vector(Vec<f64>),
}

impl Distribution {
    pub fn validate(&self) -> Result<(), StatsError> {
        match self {
            Distribution::Poisson { mean } => check(mean.is_finite() && *mean >= 0.0, || {
                format!("poisson mean must be finite and >= 0, got {mean}")
            }),
            Distribution::Multinomial { probs, .. } => check_probs(probs),
            Distribution::Exponential { mean } => check(mean.is_finite() && *mean > 0.0, || {
                format!("exponential mean must be finite and > 0, got {mean}")
            }),
            Distribution::Uniform { lo, hi } => check(lo.is_finite() && hi.is_finite() && lo < hi, || {
                format!("uniform bounds must satisfy lo < hi, got ({lo}, {hi})")
            }),
            Distribution::Dirichlet { alpha } => check(
                alpha.len() >= 2 && alpha.iter().all(|a| a.is_finite() && *a > 0.0),
                || format!("dirichlet needs >= 2 positive concentrations, got {alpha:?}"),
            ),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<Sample, StatsError> {
        self.validate()?;
        Ok(match self {
            Distribution::Poisson { mean } => Sample::Count(poisson(rng, *mean)),
            Distribution::Multinomial { trials, probs } => Sample::Counts(multinomial(rng, *trials, probs)),
            Distribution::Exponential { mean } => Sample::Real(exponential(rng, *mean)),
            Distribution::Uniform { lo, hi } => Sample::Real(rng.uniform(*lo, *hi)),
            Distribution::Dirichlet { alpha } => Sample::Vector(dirichlet(rng, alpha)),
        })
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), StatsError> {
    if ok {
        Ok(())
    } else {
        Err(StatsError::InvalidParameter(msg()))
    }
}

fn check_probs(probs: &[f64]) -> Result<(), StatsError> {
    check(!probs.is_empty(), || "multinomial needs at least one category".into())?;
    check(probs.iter().all(|p| p.is_finite() && *p >= 0.0), || {
        format!("multinomial probabilities must be >= 0, got {probs:?}")
    })?;
    let total: f64 = probs.iter().sum();
    check((total - 1.0).abs() <= PROB_SUM_TOLERANCE, || {
        format!("multinomial probabilities sum to {total}, not 1")
    })
}

// The helpers below assume validated parameters; they sit on the hot path.

/// Poisson draw; a zero mean always yields zero.
pub fn poisson(rng: &mut RngStream, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("validated poisson mean");
    d.sample(rng) as u64
}

/// Binomial draw by the standard library of `rand_distr`.
pub fn binomial(rng: &mut RngStream, trials: u64, p: f64) -> u64 {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    Binomial::new(trials, p).expect("validated binomial").sample(rng)
}

/// Multinomial via a chain of conditional binomials.
pub fn multinomial(rng: &mut RngStream, trials: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut left = trials;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = left;
            break;
        }
        let cond = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = binomial(rng, left, cond);
        out[i] = k;
        left -= k;
        mass -= p;
    }
    out
}

/// Exponential draw with the given mean.
#[inline]
pub fn exponential(rng: &mut RngStream, mean: f64) -> f64 {
    Exp::new(1.0 / mean).expect("validated exponential mean").sample(rng)
}

/// Dirichlet draw through normalised gamma variates.
pub fn dirichlet(rng: &mut RngStream, alpha: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("validated concentration").sample(rng))
        .collect();
    let total: f64 = g.iter().sum();
    for x in &mut g {
        *x /= total;
    }
    // force the exact sum to 1 on the last coordinate
    let head: f64 = g[..g.len() - 1].iter().sum();
    let last = g.len() - 1;
    g[last] = (1.0 - head).max(0.0);
    g
}

/// Index drawn from a discrete distribution given by (possibly unnormalised)
/// nonnegative weights with positive total.
#[inline]
pub fn categorical(rng: &mut RngStream, weights: &[f64], total: f64) -> usize {
    let mut u = rng.unit() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream() -> RngStream {
        RngStream::from_seed(99).child("dist-tests")
    }

    #[test]
    fn degenerate_cases() {
        let mut rng = stream();
        for _ in 0..100 {
            assert_eq!(Distribution::Poisson { mean: 0.0 }.sample(&mut rng).unwrap(), Sample::Count(0));
            let m = Distribution::Multinomial { trials: 10, probs: vec![1.0, 0.0, 0.0] };
            assert_eq!(m.sample(&mut rng).unwrap(), Sample::Counts(vec![10, 0, 0]));
        }
    }

    #[test]
    fn exponential_mean_converges() {
        let mut rng = stream();
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| exponential(&mut rng, 10.0)).sum::<f64>() / n as f64;
        assert!((9.95..=10.05).contains(&mean), "mean = {mean}");
    }

    #[test]
    fn poisson_and_multinomial_moments() {
        let mut rng = stream();
        let n = 100_000;
        let mut total = 0u64;
        let mut cats = [0u64; 3];
        for _ in 0..n {
            total += poisson(&mut rng, 100.0);
            let c = multinomial(&mut rng, 30, &[0.2, 0.5, 0.3]);
            assert_eq!(c.iter().sum::<u64>(), 30);
            for (a, b) in cats.iter_mut().zip(c) {
                *a += b;
            }
        }
        let mean = total as f64 / n as f64;
        assert!((mean - 100.0).abs() < 0.1, "poisson mean {mean}");
        let expect = [6.0, 15.0, 9.0];
        for (c, e) in cats.iter().zip(expect) {
            assert!((*c as f64 / n as f64 - e).abs() < 0.05);
        }
    }

    #[test]
    fn uniform_and_dirichlet_support() {
        let mut rng = stream();
        let mut mean = [0.0; 3];
        let n = 20_000;
        for _ in 0..n {
            match (Distribution::Uniform { lo: 2.0, hi: 3.0 }).sample(&mut rng).unwrap() {
                Sample::Real(x) => assert!((2.0..3.0).contains(&x)),
                other => panic!("{other:?}"),
            }
            let d = dirichlet(&mut rng, &[1.0, 1.0, 1.0]);
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (m, x) in mean.iter_mut().zip(&d) {
                *m += x / n as f64;
            }
        }
        for m in mean {
            assert!((m - 1.0 / 3.0).abs() < 0.01);
        }
    }

    #[test]
    fn invalid_parameters() {
        let mut rng = stream();
        let bad = [
            Distribution::Poisson { mean: -1.0 },
            Distribution::Multinomial { trials: 3, probs: vec![0.5, 0.4] },
            Distribution::Exponential { mean: 0.0 },
            Distribution::Uniform { lo: 1.0, hi: 1.0 },
            Distribution::Dirichlet { alpha: vec![1.0, 0.0] },
        ];
        for d in bad {
            assert!(matches!(d.sample(&mut rng), Err(StatsError::InvalidParameter(_))), "{d:?}");
        }
    }

    #[test]
    fn categorical_respects_zero_weights() {
        let mut rng = stream();
        for _ in 0..10_000 {
            let k = categorical(&mut rng, &[0.0, 2.0, 0.0, 1.0], 3.0);
            assert!(k == 1 || k == 3);
        }
    }
}
