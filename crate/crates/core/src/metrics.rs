//! Closed-form figures of merit at η → 0: quantum Fisher information for each
//! probe family, measurement moments and SNR, error-probability bounds,
//! optimality gaps, averaged QFI, quantum advantage and cross-correlations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::probe::{normalization_factor, DiagonalSchmidtState, Sign};
use crate::{Error, Result};

/// Relative gap below which an analytically solvable measurement is optimal.
pub const OPTIMAL_GAP_ANALYTIC: f64 = 1e-6;
/// Relative gap below which a numerically summed measurement is optimal.
pub const OPTIMAL_GAP_NUMERIC: f64 = 1e-2;
/// Largest reflectivity amplitude accepted by the small-η formulas.
pub const MAX_SMALL_ETA: f64 = 0.1;

/// Single-copy outcome statistics under H₀ (no target) and H₁ (target).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementMoments {
    pub mu0: f64,
    pub mu1: f64,
    pub var0: f64,
    pub var1: f64,
    pub eta: f64,
}

impl MeasurementMoments {
    pub fn difference(&self) -> f64 {
        self.mu1 - self.mu0
    }

    pub fn sigma0(&self) -> f64 {
        self.var0.sqrt()
    }

    pub fn sigma1(&self) -> f64 {
        self.var1.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherReport {
    pub qfi_analytic: f64,
    pub qfi_oracle: Option<f64>,
    pub cfi: Option<f64>,
    pub snr_over_eta: Option<f64>,
    pub config: serde_json::Value,
}

impl FisherReport {
    pub fn new(qfi_analytic: f64, config: serde_json::Value) -> Self {
        Self {
            qfi_analytic,
            qfi_oracle: None,
            cfi: None,
            snr_over_eta: None,
            config,
        }
    }

    /// `|analytic − oracle| / analytic`, or the absolute gap when the analytic value is zero.
    pub fn relative_discrepancy(&self) -> Option<f64> {
        self.qfi_oracle.map(|o| {
            let d = (self.qfi_analytic - o).abs();
            if self.qfi_analytic > 0.0 {
                d / self.qfi_analytic
            } else {
                d
            }
        })
    }

    /// Checks `4(snr/η)² ≤ cfi + tol` and `cfi ≤ qfi + tol` for whichever members are present.
    pub fn check_hierarchy(&self, tol: f64) -> Result<()> {
        let qfi = self.qfi_oracle.unwrap_or(self.qfi_analytic);
        if let (Some(s), Some(f)) = (self.snr_over_eta, self.cfi) {
            if 4.0 * s * s > f + tol {
                return Err(Error::HierarchyViolation(format!(
                    "4(snr/eta)^2 = {} exceeds cfi = {f}",
                    4.0 * s * s
                )));
            }
        }
        if let Some(f) = self.cfi {
            if f > qfi + tol {
                return Err(Error::HierarchyViolation(format!("cfi = {f} exceeds qfi = {qfi}")));
            }
        }
        if let (Some(s), None) = (self.snr_over_eta, self.cfi) {
            if 4.0 * s * s > qfi + tol {
                return Err(Error::HierarchyViolation(format!(
                    "4(snr/eta)^2 = {} exceeds qfi = {qfi}",
                    4.0 * s * s
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    #[serde(rename = "N_B")]
    pub n_b: f64,
    pub eta: f64,
    #[serde(rename = "M")]
    pub m: u64,
}

impl EnvironmentSpec {
    pub fn new(n_b: f64, eta: f64, m: u64) -> Result<Self> {
        let env = Self { n_b, eta, m };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        check_nb(self.n_b)?;
        if !(0.0..=MAX_SMALL_ETA).contains(&self.eta) {
            return Err(Error::Domain(format!(
                "eta = {} outside [0, {MAX_SMALL_ETA}]",
                self.eta
            )));
        }
        if self.m == 0 {
            return Err(Error::Domain("M must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_nb(n_b: f64) -> Result<()> {
    if !(n_b >= 0.0) || !n_b.is_finite() {
        return Err(Error::Domain(format!("N_B = {n_b} must be finite and nonnegative")));
    }
    Ok(())
}

fn check_ns(n_s: f64) -> Result<()> {
    if !(n_s >= 0.0) || !n_s.is_finite() {
        return Err(Error::Domain(format!("N_S = {n_s} must be finite and nonnegative")));
    }
    Ok(())
}

/// `4|⟨a⟩|²/(2N_B+1)`.
pub fn qfi_ci(a_expect: Complex64, n_b: f64) -> Result<f64> {
    check_nb(n_b)?;
    Ok(4.0 * a_expect.norm_sqr() / (2.0 * n_b + 1.0))
}

/// Coherent-state probe of mean photon number `N_S`.
pub fn qfi_coherent(n_s: f64, n_b: f64) -> Result<f64> {
    check_ns(n_s)?;
    check_nb(n_b)?;
    Ok(4.0 * n_s / (2.0 * n_b + 1.0))
}

pub fn qfi_tmsv(n_s: f64, n_b: f64) -> Result<f64> {
    check_ns(n_s)?;
    check_nb(n_b)?;
    let xs = n_s / (1.0 + n_s);
    let xb = n_b / (1.0 + n_b);
    Ok(4.0 * n_s / (1.0 + n_b) / (1.0 + xs * xb))
}

/// `4/(1+N_B) Σ_m [c_{m−1}c_m]² m / (c_{m−1}² + c_m² N_B/(1+N_B))`.
pub fn qfi_schmidt(state: &DiagonalSchmidtState, n_b: f64) -> Result<f64> {
    check_nb(n_b)?;
    let t = n_b / (1.0 + n_b);
    let c = &state.amplitudes;
    let mut sum = 0.0;
    for j in 1..c.len() {
        let (lo, hi) = (c[j - 1] * c[j - 1], c[j] * c[j]);
        let den = lo + hi * t;
        if den == 0.0 {
            continue;
        }
        sum += lo * hi * (state.m_min + j) as f64 / den;
    }
    Ok(4.0 * sum / (1.0 + n_b))
}

/// `F± = 4x±/(1+N_B) · p(1−p)/((1−p) + p N_B/(1+N_B))`, `x₋ = 1`, `x₊ = 2`.
pub fn qfi_psi(p: f64, sign: Sign, n_b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p = {p} outside [0,1]")));
    }
    check_nb(n_b)?;
    let x = match sign {
        Sign::Minus => 1.0,
        Sign::Plus => 2.0,
    };
    let t = n_b / (1.0 + n_b);
    let den = (1.0 - p) + p * t;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(4.0 * x / (1.0 + n_b) * p * (1.0 - p) / den)
}

/// Homodyne of the reflected mode at phase `φ`, `X = b e^{−iφ} + b† e^{iφ}`.
pub fn moments_quadrature(a_expect: Complex64, phi: f64, n_b: f64, eta: f64) -> Result<MeasurementMoments> {
    check_nb(n_b)?;
    let theta = a_expect.arg();
    let var = 1.0 + 2.0 * n_b;
    Ok(MeasurementMoments {
        mu0: 0.0,
        mu1: 2.0 * eta * a_expect.norm() * (phi - theta).cos(),
        var0: var,
        var1: var,
        eta,
    })
}

/// `O = a_R a_I + a_R† a_I†` on a diagonal-Schmidt probe.
pub fn moments_joint_photon(state: &DiagonalSchmidtState, n_b: f64, eta: f64) -> Result<MeasurementMoments> {
    check_nb(n_b)?;
    let c = &state.amplitudes;
    let cross: f64 = (1..c.len())
        .map(|j| c[j] * c[j - 1] * (state.m_min + j) as f64)
        .sum();
    let n_s = crate::probe::mean_photon(state);
    let var = n_s * n_b + (1.0 + n_s) * (1.0 + n_b);
    Ok(MeasurementMoments {
        mu0: 0.0,
        mu1: 2.0 * eta * cross,
        var0: var,
        var1: var,
        eta,
    })
}

/// `(μ₁ − μ₀)/(σ₁ + σ₀)`.
pub fn snr(moments: &MeasurementMoments) -> Result<f64> {
    let den = moments.sigma0() + moments.sigma1();
    if !(den > 0.0) {
        return Err(Error::DegenerateMeasurement(
            "sigma0 + sigma1 must be positive".into(),
        ));
    }
    Ok(moments.difference() / den)
}

/// Complementary error function.
///
/// Uses the musl/FreeBSD `erfc` (piecewise rational minimax approximations,
/// error below 1 ulp) through the `libm` crate.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

fn check_r_m(r: f64, m: u64) -> Result<()> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("SNR = {r} must be finite and nonnegative")));
    }
    if m == 0 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    Ok(())
}

/// `½ erfc(√(M/2) R)`.
pub fn perr_from_snr(r: f64, m: u64) -> Result<f64> {
    check_r_m(r, m)?;
    Ok(0.5 * erfc((m as f64 / 2.0).sqrt() * r))
}

/// `¼ exp(−M R²/2)`.
pub fn perr_snr_exp_bound(r: f64, m: u64) -> Result<f64> {
    check_r_m(r, m)?;
    Ok(0.25 * (-(m as f64) * r * r / 2.0).exp())
}

/// `¼ exp(−η² M F/8)`; valid for classical or quantum Fisher information.
pub fn perr_from_fisher(f: f64, eta: f64, m: u64) -> Result<f64> {
    if !(f >= 0.0) {
        return Err(Error::Domain(format!("Fisher information {f} must be nonnegative")));
    }
    if m == 0 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    Ok(0.25 * (-eta * eta * m as f64 * f / 8.0).exp())
}

/// `snr/η − √𝓕/2`.
pub fn optimality_gap(moments: &MeasurementMoments, qfi: f64) -> Result<f64> {
    if !(moments.eta > 0.0) {
        return Err(Error::Domain("optimality gap needs eta > 0".into()));
    }
    if !(qfi >= 0.0) {
        return Err(Error::Domain(format!("qfi = {qfi} must be nonnegative")));
    }
    Ok(snr(moments)? / moments.eta - qfi.sqrt() / 2.0)
}

/// Gap divided by `√𝓕/2`.
pub fn relative_optimality_gap(moments: &MeasurementMoments, qfi: f64) -> Result<f64> {
    let gap = optimality_gap(moments, qfi)?;
    if qfi == 0.0 {
        return Ok(gap);
    }
    Ok(gap / (qfi.sqrt() / 2.0))
}

pub fn is_optimal(relative_gap: f64, threshold: f64) -> bool {
    relative_gap.abs() < threshold
}

/// `2 + 1/N_S`.
pub fn g2_tmsv(n_s: f64) -> Result<f64> {
    if !(n_s > 0.0) || !n_s.is_finite() {
        return Err(Error::Domain(format!("g2 diverges at N_S = {n_s}")));
    }
    Ok(2.0 + 1.0 / n_s)
}

/// Cross-correlation from the `N±` factors, valid for every `κ ≥ 0`.
pub fn g2_normalization_factors(sign: Sign, kappa: usize, z: f64) -> Result<f64> {
    match sign {
        Sign::Plus => {
            let n11 = normalization_factor(Sign::Plus, kappa + 1, kappa + 1, z)?;
            let n00 = normalization_factor(Sign::Plus, kappa, kappa, z)?;
            let n10 = normalization_factor(Sign::Plus, kappa + 1, kappa, z)?;
            let d = n10 - n00;
            if d == 0.0 {
                return Err(Error::DegenerateMeasurement(
                    "N+_{k+1,k} = N+_{k,k}: zero signal photons".into(),
                ));
            }
            Ok(1.0 + (n11 * n00 - n10 * n10) / (d * d))
        }
        Sign::Minus => {
            let n11 = normalization_factor(Sign::Minus, kappa + 1, kappa + 1, z)?;
            let n00 = normalization_factor(Sign::Minus, kappa, kappa, z)?;
            let n10 = normalization_factor(Sign::Minus, kappa + 1, kappa, z)?;
            if n10 == 0.0 {
                return Err(Error::DegenerateMeasurement(
                    "N-_{k+1,k} = 0: zero signal photons".into(),
                ));
            }
            Ok(n11 * n00 / (n10 * n10))
        }
    }
}

/// `g²` of photon-added (plus) or photon-subtracted (minus) TMSV; `κ = 0` is TMSV.
pub fn g2_schmidt(sign: Sign, kappa: usize, z: f64) -> Result<f64> {
    if kappa == 0 {
        if !(0.0..1.0).contains(&z) {
            return Err(Error::Domain(format!("squeezing z = {z} outside [0,1)")));
        }
        return g2_tmsv(z * z / (1.0 - z * z));
    }
    g2_normalization_factors(sign, kappa, z)
}

/// `Σ c_m² m² / (Σ c_m² m)²` directly from the amplitudes.
pub fn g2_fock_sum(state: &DiagonalSchmidtState) -> Result<f64> {
    let n_s = crate::probe::mean_photon(state);
    if n_s == 0.0 {
        return Err(Error::Domain("g2 diverges at N_S = 0".into()));
    }
    Ok(crate::probe::joint_photon_moment(state) / (n_s * n_s))
}

/// QFI ratio against a coherent probe of equal signal energy.
pub fn quantum_advantage(qfi_probe: f64, n_s: f64, n_b: f64) -> Result<f64> {
    if !(n_s > 0.0) {
        return Err(Error::Domain(format!("advantage needs N_S > 0, got {n_s}")));
    }
    Ok(qfi_probe / qfi_coherent(n_s, n_b)?)
}

/// QFI per signal photon.
pub fn averaged_qfi(qfi: f64, n_s: f64) -> Result<f64> {
    if !(n_s > 0.0) {
        return Err(Error::Domain(format!("averaged QFI needs N_S > 0, got {n_s}")));
    }
    Ok(qfi / n_s)
}
