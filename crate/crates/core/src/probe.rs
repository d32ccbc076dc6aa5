//! Probe-state constructors: TMSV and photon-added/subtracted TMSV in a
//! unified diagonal-Schmidt form, generalized coherent states, and the two
//! two-term toy states.
//!
//! All Schmidt-diagonal probes are written as `Σ_m c_m |m,m⟩` over the joint
//! photon number `m`. Photon addition shifts the support to `m ≥ κ`; photon
//! subtraction keeps `m ≥ 0`. Both share the normalizer
//! `₂F₁(κ+1, κ+1; 1; z²)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fock::TruncationSpec;
use crate::series::sum_ratio_series;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchmidtVariant {
    Tmsv,
    PhotonAdded,
    PhotonSubtracted,
    Custom,
}

/// `Σ_m c_m |m,m⟩` with real amplitudes for `m = m_min ..= m_min + len - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalSchmidtState {
    pub m_min: usize,
    pub amplitudes: Vec<f64>,
    /// `tanh r`; zero for custom states.
    pub z: f64,
    pub kappa: usize,
    pub variant: SchmidtVariant,
    /// Probability mass of the untruncated state beyond the kept amplitudes.
    pub tail_mass: f64,
    /// `₂F₁(κ+1,κ+1;1;z²)` for the photon-added/subtracted families, 1 otherwise.
    pub series_normalizer: f64,
}

impl DiagonalSchmidtState {
    /// Wraps arbitrary real amplitudes, normalizing them.
    pub fn custom(m_min: usize, amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Domain("custom state needs at least one amplitude".into()));
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::Domain("non-finite amplitude".into()));
        }
        let norm: f64 = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Domain("all amplitudes are zero".into()));
        }
        Ok(Self {
            m_min,
            amplitudes: amplitudes.iter().map(|a| a / norm).collect(),
            z: 0.0,
            kappa: 0,
            variant: SchmidtVariant::Custom,
            tail_mass: 0.0,
            series_normalizer: 1.0,
        })
    }

    /// Largest joint photon number carried by the amplitude vector.
    pub fn m_max(&self) -> usize {
        self.m_min + self.amplitudes.len() - 1
    }

    /// Amplitude at joint photon number `m` (zero outside the support).
    pub fn amplitude(&self, m: usize) -> f64 {
        if m < self.m_min {
            return 0.0;
        }
        self.amplitudes.get(m - self.m_min).copied().unwrap_or(0.0)
    }

    /// `(m, c_m)` pairs over the stored support.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.amplitudes
            .iter()
            .enumerate()
            .map(move |(j, &c)| (self.m_min + j, c))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }
}

fn check_z(z: f64) -> Result<()> {
    if !(0.0..1.0).contains(&z) || !z.is_finite() {
        return Err(Error::Domain(format!("squeezing z = {z} outside [0,1)")));
    }
    Ok(())
}

/// `₂F₁(κ+1, κ+1; 1; x) = Σ_n binom(n+κ,κ)² xⁿ`.
pub fn gauss_2f1_diagonal(kappa: usize, x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) || !x.is_finite() {
        return Err(Error::Domain(format!("2F1 argument x = {x} outside [0,1)")));
    }
    let k = kappa as f64;
    sum_ratio_series(
        1.0,
        |n| {
            let q = (n as f64 + k + 1.0) / (n as f64 + 1.0);
            x * q * q
        },
        "2F1(k+1,k+1;1;x)",
    )
}

/// Unnormalized amplitudes `z^j binom(j+κ, κ)` for `j = 0..len`, by recurrence.
fn binomial_ladder(z: f64, kappa: usize, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut a = 1.0;
    for j in 0..len {
        out.push(a);
        a *= z * (j + 1 + kappa) as f64 / (j + 1) as f64;
    }
    out
}

/// Squared mass `Σ_{j≥start} (z^j binom(j+κ,κ))²` of the ladder beyond `start`.
fn binomial_ladder_tail(z: f64, kappa: usize, start: usize, first: f64) -> Result<f64> {
    let x = z * z;
    let k = kappa as f64;
    sum_ratio_series(
        first * first,
        |n| {
            let j = (start + n) as f64;
            let q = (j + 1.0 + k) / (j + 1.0);
            x * q * q
        },
        "amplitude tail",
    )
}

fn photon_family(
    z: f64,
    kappa: usize,
    trunc: &TruncationSpec,
    variant: SchmidtVariant,
) -> Result<DiagonalSchmidtState> {
    check_z(z)?;
    let m_min = match variant {
        SchmidtVariant::PhotonAdded => kappa,
        _ => 0,
    };
    let m_cap = trunc.joint_cutoff();
    if m_cap < m_min {
        return Err(Error::TruncationTooSmall(format!(
            "joint cutoff {m_cap} below the lowest populated level {m_min}"
        )));
    }
    let len = m_cap - m_min + 1;
    let normalizer = gauss_2f1_diagonal(kappa, z * z)?;
    let raw = binomial_ladder(z, kappa, len + 1);
    let tail_raw = binomial_ladder_tail(z, kappa, len, raw[len])?;
    let tail_mass = tail_raw / normalizer;
    trunc.check_tail(tail_mass, "probe amplitudes")?;

    let scale = normalizer.sqrt();
    let mut amplitudes: Vec<f64> = raw[..len].iter().map(|a| a / scale).collect();
    let kept: f64 = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
    for a in &mut amplitudes {
        *a /= kept;
    }
    Ok(DiagonalSchmidtState {
        m_min,
        amplitudes,
        z,
        kappa,
        variant,
        tail_mass,
        series_normalizer: normalizer,
    })
}

/// TMSV amplitudes `c_m = √(1−z²) z^m`.
pub fn tmsv_coefficients(z: f64, trunc: &TruncationSpec) -> Result<DiagonalSchmidtState> {
    check_z(z)?;
    let len = trunc.joint_cutoff() + 1;
    let x = z * z;
    let tail_mass = x.powi(len as i32);
    trunc.check_tail(tail_mass, "TMSV amplitudes")?;
    let c0 = (1.0 - x).sqrt();
    let mut amplitudes: Vec<f64> = (0..len).map(|m| c0 * z.powi(m as i32)).collect();
    let kept: f64 = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
    for a in &mut amplitudes {
        *a /= kept;
    }
    Ok(DiagonalSchmidtState {
        m_min: 0,
        amplitudes,
        z,
        kappa: 0,
        variant: SchmidtVariant::Tmsv,
        tail_mass,
        series_normalizer: 1.0,
    })
}

/// TMSV with `κ` photons added to each mode; support starts at `m = κ`.
pub fn mpa_coefficients(z: f64, kappa: usize, trunc: &TruncationSpec) -> Result<DiagonalSchmidtState> {
    if kappa == 0 {
        return Err(Error::Domain("photon addition needs kappa >= 1".into()));
    }
    photon_family(z, kappa, trunc, SchmidtVariant::PhotonAdded)
}

/// TMSV with `κ` photons subtracted from each mode; support starts at `m = 0`.
pub fn mps_coefficients(z: f64, kappa: usize, trunc: &TruncationSpec) -> Result<DiagonalSchmidtState> {
    if kappa == 0 {
        return Err(Error::Domain("photon subtraction needs kappa >= 1".into()));
    }
    photon_family(z, kappa, trunc, SchmidtVariant::PhotonSubtracted)
}

/// Family selector shared by the sweep, oracle and CLI layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchmidtFamily {
    /// κ = 0 means plain TMSV.
    Added,
    Subtracted,
}

/// TMSV for `κ = 0`, otherwise the photon-added or photon-subtracted state.
pub fn schmidt_state(family: SchmidtFamily, z: f64, kappa: usize, trunc: &TruncationSpec) -> Result<DiagonalSchmidtState> {
    match (family, kappa) {
        (_, 0) => tmsv_coefficients(z, trunc),
        (SchmidtFamily::Added, k) => mpa_coefficients(z, k, trunc),
        (SchmidtFamily::Subtracted, k) => mps_coefficients(z, k, trunc),
    }
}

/// Smallest joint cutoff (highest kept `m`) whose discarded mass is below `tol`.
pub fn joint_cutoff_for(family: SchmidtFamily, z: f64, kappa: usize, tol: f64) -> Result<usize> {
    check_z(z)?;
    let m_min = match family {
        SchmidtFamily::Added => kappa,
        SchmidtFamily::Subtracted => 0,
    };
    if z == 0.0 {
        return Ok(m_min.max(1));
    }
    let x = z * z;
    let normalizer = gauss_2f1_diagonal(kappa, x)?;
    let k = kappa as f64;
    let mut w = 1.0;
    for j in 0..crate::series::MAX_TERMS {
        let q = (j as f64 + 1.0 + k) / (j as f64 + 1.0);
        let r = x * q * q;
        // Ratios decrease in j, so the remainder is bounded geometrically.
        if r < 1.0 && w * r / (1.0 - r) / normalizer < tol {
            return Ok((m_min + j).max(1));
        }
        w *= r;
    }
    Err(Error::Convergence("joint cutoff search".into()))
}

/// Fits a truncation for a Schmidt probe and thermal bath at tolerance `tol`.
pub fn fit_truncation(family: SchmidtFamily, z: f64, kappa: usize, n_b: f64, tol: f64) -> Result<TruncationSpec> {
    let m = joint_cutoff_for(family, z, kappa, tol)?;
    let d = m + 2;
    TruncationSpec::new(d, d, crate::fock::thermal_cutoff(n_b, tol), tol)
}

/// Squeezing `z` giving mean photon number `n_s`, found by bisection.
pub fn z_for_mean_photon(family: SchmidtFamily, kappa: usize, n_s: f64, tol: f64) -> Result<f64> {
    let floor = match family {
        SchmidtFamily::Added => kappa as f64,
        SchmidtFamily::Subtracted => 0.0,
    };
    if !(n_s >= floor) || !n_s.is_finite() {
        return Err(Error::Domain(format!(
            "N_S = {n_s} unreachable: this family starts at N_S = {floor}"
        )));
    }
    if kappa == 0 {
        return Ok((n_s / (1.0 + n_s)).sqrt());
    }
    let eval = |z: f64| -> Result<f64> {
        let t = fit_truncation(family, z, kappa, 0.0, tol)?;
        Ok(mean_photon(&schmidt_state(family, z, kappa, &t)?))
    };
    let (mut lo, mut hi) = (0.0f64, 0.999f64);
    if eval(hi)? < n_s {
        return Err(Error::Domain(format!("N_S = {n_s} needs squeezing beyond z = {hi}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? < n_s {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `N±_{κ,ι}` normalization factors.
///
/// `N⁺_{κ,ι} = (1−z²) Σ_{n≥0} z^{2n} (n+κ)!(n+ι)!/(n!)²`,
/// `N⁻_{κ,ι} = (1−z²) Σ_{n≥κ} z^{2n} (n!)²/((n−κ)!(n−ι)!)` for `κ ≥ ι`.
pub fn normalization_factor(sign: Sign, kappa: usize, iota: usize, z: f64) -> Result<f64> {
    check_z(z)?;
    let x = z * z;
    let (k, i) = (kappa as f64, iota as f64);
    let sum = match sign {
        Sign::Plus => {
            let first = factorial(kappa) * factorial(iota);
            sum_ratio_series(
                first,
                |n| {
                    let m = n as f64 + 1.0;
                    x * (m + k) * (m + i) / (m * m)
                },
                "N+ factor",
            )?
        }
        Sign::Minus => {
            if kappa < iota {
                return Err(Error::ArgumentOrder(format!(
                    "N- requires kappa >= iota, got kappa={kappa}, iota={iota}"
                )));
            }
            if x == 0.0 {
                return Ok(if kappa == 0 { 1.0 } else { 0.0 });
            }
            let first = x.powi(kappa as i32) * factorial(kappa) * factorial(kappa) / factorial(kappa - iota);
            sum_ratio_series(
                first,
                |j| {
                    let n1 = (kappa + j) as f64 + 1.0;
                    x * n1 * n1 / ((n1 - k) * (n1 - i))
                },
                "N- factor",
            )?
        }
    };
    Ok((1.0 - x) * sum)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `N_S = Σ c_m² m`; identical for signal and idler.
pub fn mean_photon(state: &DiagonalSchmidtState) -> f64 {
    state.iter().map(|(m, c)| c * c * m as f64).sum()
}

/// `⟨N_S N_I⟩ = Σ c_m² m²`.
pub fn joint_photon_moment(state: &DiagonalSchmidtState) -> f64 {
    state.iter().map(|(m, c)| c * c * (m * m) as f64).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

/// `e^{−iχ N̂^ε} |α⟩` with Poisson photon statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedCoherent {
    pub alpha: Complex64,
    pub chi: f64,
    pub epsilon: f64,
    pub cutoff: usize,
    pub tail_tolerance: f64,
}

impl GeneralizedCoherent {
    pub fn new(alpha: Complex64, chi: f64, epsilon: f64, cutoff: usize) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon = {epsilon} must be positive")));
        }
        if cutoff < 1 {
            return Err(Error::InvalidDimension("cutoff must be positive".into()));
        }
        Ok(Self {
            alpha,
            chi,
            epsilon,
            cutoff,
            tail_tolerance: 1e-12,
        })
    }

    pub fn with_tail_tolerance(mut self, tol: f64) -> Self {
        self.tail_tolerance = tol;
        self
    }

    pub fn mean_photon(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// Poisson weights for `n < cutoff` (renormalized) and the discarded mass.
    pub fn poisson_weights(&self) -> Result<(Vec<f64>, f64)> {
        let mu = self.alpha.norm_sqr();
        if mu == 0.0 {
            let mut w = vec![0.0; self.cutoff];
            w[0] = 1.0;
            return Ok((w, 0.0));
        }
        let ln_mu = mu.ln();
        let mut lw = -mu;
        let mut w = Vec::with_capacity(self.cutoff);
        for n in 0..self.cutoff {
            w.push(lw.exp());
            lw += ln_mu - ((n + 1) as f64).ln();
        }
        let first_tail = lw.exp();
        let c = self.cutoff;
        let tail = sum_ratio_series(first_tail, |n| mu / (c + n + 1) as f64, "Poisson tail")?;
        let kept: f64 = w.iter().sum();
        for x in &mut w {
            *x /= kept;
        }
        Ok((w, tail))
    }
}

/// Smallest cutoff with Poisson tail below `tol`.
pub fn poisson_cutoff(mean: f64, tol: f64) -> usize {
    let mut d = 2usize;
    loop {
        let gc = GeneralizedCoherent {
            alpha: Complex64::new(mean.sqrt(), 0.0),
            chi: 0.0,
            epsilon: 1.0,
            cutoff: d,
            tail_tolerance: tol,
        };
        match gc.poisson_weights() {
            Ok((_, tail)) if tail < tol => return d,
            _ => d += (d / 8).max(1),
        }
    }
}

/// `⟨α_{χ,ε}| a |α_{χ,ε}⟩ = α Σ_n C_n² exp(iχ[n^ε − (n+1)^ε])`.
pub fn coherent_a_expectation(state: &GeneralizedCoherent) -> Result<Complex64> {
    let (w, tail) = state.poisson_weights()?;
    if tail >= state.tail_tolerance {
        return Err(Error::TruncationTooSmall(format!(
            "Poisson tail {tail:.3e} >= tolerance {:.3e} at cutoff {}",
            state.tail_tolerance, state.cutoff
        )));
    }
    let pow = |n: usize| {
        if n == 0 {
            0.0
        } else {
            (state.epsilon * (n as f64).ln()).exp()
        }
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for (n, wn) in w.iter().enumerate() {
        if *wn == 0.0 {
            continue;
        }
        let phase = state.chi * (pow(n) - pow(n + 1));
        acc += Complex64::from_polar(*wn, phase);
    }
    Ok(state.alpha * acc)
}

/// `√(1−p)|00⟩ + √p|11⟩` (minus) or `√(1−p)|11⟩ + √p|22⟩` (plus).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiToyState {
    pub p: f64,
    pub sign: Sign,
}

impl PsiToyState {
    pub fn mean_photon(&self) -> f64 {
        match self.sign {
            Sign::Minus => self.p,
            Sign::Plus => 1.0 + self.p,
        }
    }

    pub fn schmidt(&self) -> DiagonalSchmidtState {
        let m_min = match self.sign {
            Sign::Minus => 0,
            Sign::Plus => 1,
        };
        DiagonalSchmidtState {
            m_min,
            amplitudes: vec![(1.0 - self.p).sqrt(), self.p.sqrt()],
            z: 0.0,
            kappa: 0,
            variant: SchmidtVariant::Custom,
            tail_mass: 0.0,
            series_normalizer: 1.0,
        }
    }
}

pub fn psi_toy(p: f64, sign: Sign) -> Result<PsiToyState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p = {p} outside [0,1]")));
    }
    Ok(PsiToyState { p, sign })
}
