//! Principal branch of the Lambert W function on the nonnegative reals.

use super::StatsError;

const MAX_ITERATIONS: usize = 50;

/// Principal-branch Lambert W: the `w >= 0` with `w * exp(w) == x`.
///
/// Halley iteration started from a logarithmic guess. Arguments up to
/// `f64::MAX` are handled; the iteration works on `ln(w) + w = ln(x)` once
/// `exp(w)` would overflow.
pub fn lambert_w(x: f64) -> Result<f64, StatsError> {
    if x.is_nan() || x < 0.0 {
        return Err(StatsError::Domain(format!("lambert_w argument {x} is negative or NaN")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }

    let mut w = initial_guess(x);
    if w > 500.0 {
        return Ok(newton_log_form(x, w));
    }
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w.max(0.0))
}

fn initial_guess(x: f64) -> f64 {
    if x < 1.0 {
        // W(x) ~ x - x^2 near zero; ln(1+x) is a tighter uniform start.
        x.ln_1p() * (1.0 - 0.25 * x.ln_1p())
    } else if x < 3.0 {
        0.5 * x.ln_1p()
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

// For huge x, solve g(w) = w + ln(w) - ln(x) = 0 with Newton.
fn newton_log_form(x: f64, mut w: f64) -> f64 {
    let lx = x.ln();
    for _ in 0..MAX_ITERATIONS {
        let g = w + w.ln() - lx;
        let step = g / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    w
}
