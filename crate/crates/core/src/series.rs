//! Summation of the positive hypergeometric-type series used throughout the
//! crate (₂F₁ normalizers, N± factors, Poisson and thermal
//! tails).
//!
//! Every series here has a term ratio `t[n+1]/t[n]` that is eventually
//! non-increasing and tends to a limit below one, so once the ratio drops
//! below one the remaining tail is bounded by `t[n+1] / (1 - r)`.

use crate::{Error, Result};

/// Stop once the bounded remaining tail is below this fraction of the sum.
pub const REL_INCREMENT: f64 = 1e-15;
/// Hard cap on the number of terms; reaching it is an error.
pub const MAX_TERMS: usize = 1_000_000;

/// Sums `first + first*ratio(0) + first*ratio(0)*ratio(1) + ...`.
///
/// `ratio(n)` must return `t[n+1]/t[n]`.
pub fn sum_ratio_series<F>(first: f64, ratio: F, what: &str) -> Result<f64>
where
    F: Fn(usize) -> f64,
{
    if first == 0.0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    let mut term = first;
    // Kahan compensation keeps the 1e-12 relative target for long sums.
    let mut comp = 0.0;
    for n in 0..MAX_TERMS {
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;

        let r = ratio(n);
        let next = term * r;
        if next == 0.0 {
            return Ok(sum);
        }
        if r < 1.0 && next / (1.0 - r) < REL_INCREMENT * sum {
            return Ok(sum);
        }
        if !next.is_finite() {
            return Err(Error::Convergence(format!("{what}: term overflow at n={n}")));
        }
        term = next;
    }
    Err(Error::Convergence(format!(
        "{what}: no convergence within {MAX_TERMS} terms"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_series() {
        let s = sum_ratio_series(1.0, |_| 0.5, "geo").unwrap();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_first_term() {
        assert_eq!(sum_ratio_series(0.0, |_| 0.9, "zero").unwrap(), 0.0);
    }

    #[test]
    fn exponential_series() {
        // e^3 = sum 3^n/n!
        let s = sum_ratio_series(1.0, |n| 3.0 / (n as f64 + 1.0), "exp").unwrap();
        assert!((s - 3f64.exp()).abs() / 3f64.exp() < 1e-14);
    }

    #[test]
    fn cap_is_an_error() {
        let err = sum_ratio_series(1.0, |_| 1.0 - 1e-9, "slow").unwrap_err();
        assert!(matches!(err, Error::Convergence(_)));
    }
}
