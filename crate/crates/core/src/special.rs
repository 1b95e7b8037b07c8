//! Generalized binomial coefficients through a signed log-gamma.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x.fract() == 0.0
}

/// `(ln |Γ(x)|, sign Γ(x))` for `x` not a pole.
pub fn ln_gamma_signed(x: f64) -> (f64, f64) {
    if x > 0.0 {
        return (ln_gamma(x), 1.0);
    }
    // Γ(x) Γ(1 - x) = π / sin(πx)
    let s = (PI * x).sin();
    ((PI / s.abs()).ln() - ln_gamma(1.0 - x), s.signum())
}

/// `Γ(a+1) / (Γ(b+1) Γ(a-b+1))`.
///
/// A pole of the denominator gives 0; a pole of the numerator alone is an
/// [`Error::Infinity`].
pub fn binom_general(a: f64, b: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("binomial of non-finite arguments ({a}, {b})")));
    }
    // Finite products are exact for integers and avoid log-gamma rounding.
    if b >= 0.0 && b.fract() == 0.0 && b <= 200.0 {
        return Ok(falling_ratio(a, b as usize));
    }
    if (a - b) >= 0.0 && (a - b).fract() == 0.0 && (a - b) <= 200.0 {
        return Ok(falling_ratio(a, (a - b) as usize));
    }
    let num_pole = is_nonpositive_integer(a + 1.0);
    let den_pole = is_nonpositive_integer(b + 1.0) || is_nonpositive_integer(a - b + 1.0);
    if den_pole {
        return Ok(0.0);
    }
    if num_pole {
        return Err(Error::Infinity(a));
    }
    let (la, sa) = ln_gamma_signed(a + 1.0);
    let (lb, sb) = ln_gamma_signed(b + 1.0);
    let (lc, sc) = ln_gamma_signed(a - b + 1.0);
    Ok(sa * sb * sc * (la - lb - lc).exp())
}

/// `a (a-1) ... (a-k+1) / k!`.
fn falling_ratio(a: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (a - i as f64) / (i + 1) as f64)
}
