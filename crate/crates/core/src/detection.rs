//! Monte Carlo simulation of the M-copy threshold decision.
//!
//! The collective outcome `λ` is drawn from its central-limit Gaussian,
//! `N(Mμ_x, Mσ_x²)`, under each hypothesis. Trials are split into fixed-size
//! chunks; every (hypothesis, chunk) pair owns an independent ChaCha stream
//! derived from the seed, so results do not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::{self, MeasurementMoments};
use crate::{Error, Result};

/// Trials per independent random stream.
pub const CHUNK: u64 = 8192;
/// Slack allowed when ordering the three error-probability bounds.
pub const HIERARCHY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub moments: MeasurementMoments,
    #[serde(rename = "M")]
    pub m: u64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub empirical_false_alarm: f64,
    pub empirical_miss: f64,
    pub empirical_perr: f64,
    pub analytic_perr: f64,
    pub stderr: f64,
}

/// `λ_th = M(σ₀μ₁ + σ₁μ₀)/(σ₀ + σ₁)`.
pub fn threshold(moments: &MeasurementMoments, m: u64) -> Result<f64> {
    let (s0, s1) = (moments.sigma0(), moments.sigma1());
    if !(s0 + s1 > 0.0) {
        return Err(Error::DegenerateMeasurement("sigma0 + sigma1 must be positive".into()));
    }
    Ok(m as f64 * (s0 * moments.mu1 + s1 * moments.mu0) / (s0 + s1))
}

fn validate(spec: &CampaignSpec) -> Result<()> {
    if spec.m == 0 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    if spec.trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    if !(spec.moments.var0 > 0.0 && spec.moments.var1 > 0.0) {
        return Err(Error::DegenerateMeasurement("both variances must be positive".into()));
    }
    Ok(())
}

/// Counts decisions for `hypothesis` that land on the wrong side of `lambda_th`.
fn count_errors(spec: &CampaignSpec, hypothesis: u64, lambda_th: f64) -> u64 {
    let m = spec.m as f64;
    let (mu, sigma) = if hypothesis == 0 {
        (spec.moments.mu0, spec.moments.sigma0())
    } else {
        (spec.moments.mu1, spec.moments.sigma1())
    };
    let (mean, sd) = (m * mu, m.sqrt() * sigma);
    let chunks = spec.trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream((hypothesis << 32) | chunk);
            let n = CHUNK.min(spec.trials - chunk * CHUNK);
            let mut errors = 0u64;
            for _ in 0..n {
                let z: f64 = StandardNormal.sample(&mut rng);
                let lambda = mean + sd * z;
                let declared_h1 = lambda >= lambda_th;
                if declared_h1 != (hypothesis == 1) {
                    errors += 1;
                }
            }
            errors
        })
        .sum()
}

pub fn run_campaign(spec: &CampaignSpec) -> Result<CampaignResult> {
    validate(spec)?;
    let lambda_th = threshold(&spec.moments, spec.m)?;
    let trials = spec.trials as f64;
    let fa = count_errors(spec, 0, lambda_th) as f64 / trials;
    let miss = count_errors(spec, 1, lambda_th) as f64 / trials;
    let r = metrics::snr(&spec.moments)?;
    let analytic = 0.5 * metrics::erfc((spec.m as f64 / 2.0).sqrt() * r);
    let se = |p: f64| (p * (1.0 - p) / trials).sqrt();
    Ok(CampaignResult {
        empirical_false_alarm: fa,
        empirical_miss: miss,
        empirical_perr: 0.5 * (fa + miss),
        analytic_perr: analytic,
        stderr: 0.5 * (se(fa).powi(2) + se(miss).powi(2)).sqrt(),
    })
}

/// Moments with `√(M/2) R = x`, unit variances and `μ₀ = 0`.
pub fn moments_for_erfc_argument(x: f64, m: u64, eta: f64) -> MeasurementMoments {
    let r = x / (m as f64 / 2.0).sqrt();
    MeasurementMoments {
        mu0: 0.0,
        mu1: 2.0 * r,
        var0: 1.0,
        var1: 1.0,
        eta,
    }
}

/// `(P(𝓕), P(F), P(R))`, required to be nondecreasing.
pub fn bound_hierarchy_check(
    moments: &MeasurementMoments,
    qfi: f64,
    cfi: f64,
    eta: f64,
    m: u64,
) -> Result<(f64, f64, f64)> {
    let p_q = metrics::perr_from_fisher(qfi, eta, m)?;
    let p_c = metrics::perr_from_fisher(cfi, eta, m)?;
    let r = metrics::snr(moments)?.abs();
    let p_r = metrics::perr_snr_exp_bound(r, m)?;
    if p_q > p_c + HIERARCHY_SLACK {
        return Err(Error::HierarchyViolation(format!(
            "P(QFI) = {p_q} exceeds P(CFI) = {p_c}"
        )));
    }
    if p_c > p_r + HIERARCHY_SLACK {
        return Err(Error::HierarchyViolation(format!(
            "P(CFI) = {p_c} exceeds P(SNR) = {p_r}"
        )));
    }
    Ok((p_q, p_c, p_r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{moments_quadrature, qfi_ci};
    use num_complex::Complex64;

    fn unit(mu0: f64, mu1: f64, v0: f64, v1: f64) -> MeasurementMoments {
        MeasurementMoments { mu0, mu1, var0: v0, var1: v1, eta: 0.01 }
    }

    #[test]
    fn threshold_cases() {
        assert_eq!(threshold(&unit(1.0, 3.0, 2.0, 2.0), 10).unwrap(), 20.0);
        assert_eq!(threshold(&unit(1.5, 1.5, 1.0, 9.0), 4).unwrap(), 6.0);
        let t = threshold(&unit(0.0, 1.0, 1.0, 4.0), 1).unwrap();
        assert!((t - 1.0 / 3.0).abs() < 1e-15);
        assert!(threshold(&unit(0.0, 1.0, 0.0, 0.0), 1).is_err());
    }

    #[test]
    fn indistinguishable_hypotheses() {
        let spec = CampaignSpec { moments: unit(0.2, 0.2, 1.0, 1.0), m: 100, trials: 20_000, seed: 3 };
        let r = run_campaign(&spec).unwrap();
        assert_eq!(r.analytic_perr, 0.5);
        assert!((r.empirical_perr - 0.5).abs() < 3.0 * r.stderr);
    }

    #[test]
    fn erfc_one() {
        let m = 1000;
        let spec = CampaignSpec { moments: moments_for_erfc_argument(1.0, m, 0.01), m, trials: 100_000, seed: 11 };
        let r = run_campaign(&spec).unwrap();
        assert!((r.analytic_perr - 0.0786496035251426).abs() < 1e-12);
        assert!((r.empirical_perr - r.analytic_perr).abs() < 3.0 * r.stderr, "{r:?}");
    }

    #[test]
    fn unequal_variances_follow_erfc() {
        let m = 50;
        let spec = CampaignSpec { moments: unit(0.0, 0.3, 1.0, 2.5), m, trials: 100_000, seed: 5 };
        let r = run_campaign(&spec).unwrap();
        assert!((r.empirical_perr - r.analytic_perr).abs() < 4.0 * r.stderr, "{r:?}");
    }

    #[test]
    fn deterministic_and_chunk_exact() {
        let spec = CampaignSpec { moments: unit(0.0, 0.1, 1.0, 1.0), m: 100, trials: 3 * CHUNK + 17, seed: 42 };
        let a = run_campaign(&spec).unwrap();
        let b = run_campaign(&spec).unwrap();
        assert_eq!(a, b);
        let other = run_campaign(&CampaignSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, other);
        assert!((a.empirical_perr - 0.5 * (a.empirical_false_alarm + a.empirical_miss)).abs() < 1e-16);
    }

    #[test]
    fn same_result_on_one_thread() {
        let spec = CampaignSpec { moments: unit(0.0, 0.1, 1.0, 1.0), m: 100, trials: 5 * CHUNK, seed: 9 };
        let many = run_campaign(&spec).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let one = pool.install(|| run_campaign(&spec).unwrap());
        assert_eq!(many, one);
    }

    #[test]
    fn rejects_bad_specs() {
        let base = CampaignSpec { moments: unit(0.0, 0.1, 1.0, 1.0), m: 100, trials: 10, seed: 1 };
        assert!(run_campaign(&CampaignSpec { m: 0, ..base }).is_err());
        assert!(run_campaign(&CampaignSpec { trials: 0, ..base }).is_err());
        assert!(run_campaign(&CampaignSpec { moments: unit(0.0, 0.1, 0.0, 1.0), ..base }).is_err());
    }

    #[test]
    fn hierarchy_ties_when_saturated() {
        let (eta, m) = (0.01, 10_000);
        let a = Complex64::from_polar(1.0, 0.4);
        let q = qfi_ci(a, 10.0).unwrap();
        let mom = moments_quadrature(a, 0.4, 10.0, eta).unwrap();
        let (pq, pc, pr) = bound_hierarchy_check(&mom, q, q, eta, m).unwrap();
        assert!((pq - pc).abs() < 1e-15 && (pc - pr).abs() < 1e-9);
    }

    #[test]
    fn hierarchy_strict_for_mismatched_phase() {
        let (eta, m) = (0.01, 10_000);
        let a = Complex64::from_polar(1.0, 0.4);
        let q = qfi_ci(a, 10.0).unwrap();
        let mom = moments_quadrature(a, 0.4 + std::f64::consts::FRAC_PI_3, 10.0, eta).unwrap();
        let (pq, _, pr) = bound_hierarchy_check(&mom, q, q / 4.0, eta, m).unwrap();
        assert!(pq < pr);
    }

    #[test]
    fn hierarchy_violation_reported() {
        let mom = unit(0.0, 0.02, 1.0, 1.0);
        let err = bound_hierarchy_check(&mom, 1.0, 2.0, 0.01, 10_000).unwrap_err();
        assert!(matches!(err, Error::HierarchyViolation(_)));
    }
}
