//! Numerical verification of the closed-form Fisher informations.
//!
//! The derivative `∂_η ρ_η` of the reflected (and idler) state is built at
//! `η = 0` from `Tr_S[G, ρ_SI ⊗ ρ_B]` in a truncated Fock basis, where `ρ_0`
//! is diagonal. The QFI then follows from the diagonal-SLD sum
//! `2 Σ |∂ρ_ij|² / (p_i + p_j)`.
//!
//! The derivative is stored sparsely: a thermal bath at `N_B = 10` needs a few
//! hundred levels, so the joint idler ⊗ reflected space is far too large for
//! dense matrices. Measurement statistics exploit the block structure of the
//! measured observable instead of diagonalizing the full space.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fock::{
    beamsplitter_generator, evolve_small_eta, partial_trace, thermal_cutoff, thermal_state_checked,
    DenseOperator, TruncationSpec,
};
use crate::metrics::{self, FisherReport, MeasurementMoments};
use crate::probe::{
    self, coherent_a_expectation, fit_truncation, DiagonalSchmidtState, GeneralizedCoherent,
    SchmidtFamily, Sign,
};
use crate::{Error, Result};

pub const SIGNAL: &str = "S";
pub const IDLER: &str = "I";
/// The bath mode becomes the reflected mode after the beam splitter.
pub const REFLECTED: &str = "B";

/// Probabilities below this are treated as exact zeros in Fisher sums.
pub const NULL_PROBABILITY: f64 = 1e-300;
/// Derivative entries below this may sit on a null probability.
pub const NULL_DERIVATIVE: f64 = 1e-14;
/// Default discarded-mass tolerance for fitted truncations.
pub const DEFAULT_TAIL: f64 = 1e-12;
/// Relative agreement required between oracle and closed form.
pub const AGREEMENT: f64 = 1e-6;
/// Step of the central-difference cross-check.
pub const FD_STEP: f64 = 1e-3;
/// Agreement required of the central-difference cross-check.
pub const FD_TOLERANCE: f64 = 1e-4;

/// Hermitian matrix stored as a map from `(row, col)` to value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseHermitian {
    pub dim: usize,
    pub entries: BTreeMap<(usize, usize), Complex64>,
}

impl SparseHermitian {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    /// Adds `v` at `(i, j)` and `v̄` at `(j, i)`.
    pub fn add_pair(&mut self, i: usize, j: usize, v: Complex64) {
        if v == Complex64::new(0.0, 0.0) {
            return;
        }
        *self.entries.entry((i, j)).or_default() += v;
        if i != j {
            *self.entries.entry((j, i)).or_default() += v.conj();
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries.get(&(i, j)).copied().unwrap_or_default()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries
            .iter()
            .filter(|((i, j), _)| i == j)
            .map(|(_, v)| *v)
            .sum()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.entries
            .iter()
            .map(|(&(i, j), v)| (v - self.get(j, i).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (&(i, j), v) in &self.entries {
            m[(i, j)] = *v;
        }
        m
    }
}

/// `∂_η ρ_η` at `η = 0` alongside the diagonal of `ρ_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeAtZero {
    pub mode_labels: Vec<String>,
    pub dims: Vec<usize>,
    pub rho0_diag: Vec<f64>,
    pub drho: SparseHermitian,
    /// Largest discarded mass among the truncated ingredients.
    pub tail_mass: f64,
}

impl DerivativeAtZero {
    pub fn dim(&self) -> usize {
        self.rho0_diag.len()
    }

    pub fn to_dense(&self) -> Result<DenseOperator> {
        DenseOperator::new(self.mode_labels.clone(), self.dims.clone(), self.drho.to_dense())
    }

    /// Checks that every entry moves each mode by exactly one photon.
    pub fn check_selection_rule(&self) -> Result<()> {
        for &(i, j) in self.drho.entries.keys() {
            let (a, b) = (split_index(i, &self.dims), split_index(j, &self.dims));
            let ok = a.iter().zip(&b).all(|(x, y)| x.abs_diff(*y) == 1);
            if !ok {
                return Err(Error::SupportMismatch(format!(
                    "entry {a:?} <- {b:?} breaks the one-photon selection rule"
                )));
            }
        }
        Ok(())
    }
}

fn split_index(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (k, d) in dims.iter().enumerate().rev() {
        out[k] = idx % d;
        idx /= d;
    }
    out
}

/// Single reflected mode for a probe entering only through `⟨a_S⟩`.
pub fn derivative_ci(a_expect: Complex64, n_b: f64, dim_bath: usize) -> Result<DerivativeAtZero> {
    let trunc = TruncationSpec::new(2, 2, dim_bath, DEFAULT_TAIL)?;
    derivative_ci_with(a_expect, n_b, &trunc)
}

/// [`derivative_ci`] with an explicit tail tolerance.
pub fn derivative_ci_with(a_expect: Complex64, n_b: f64, trunc: &TruncationSpec) -> Result<DerivativeAtZero> {
    let th = thermal_state_checked(n_b, trunc.dim_bath, trunc)?;
    let p = &th.probabilities;
    let d = trunc.dim_bath;
    let mut drho = SparseHermitian::new(d);
    for mu in 0..d - 1 {
        let w = ((mu + 1) as f64).sqrt() * (p[mu + 1] - p[mu]);
        drho.add_pair(mu, mu + 1, a_expect.conj() * w);
    }
    Ok(DerivativeAtZero {
        mode_labels: vec![REFLECTED.into()],
        dims: vec![d],
        rho0_diag: p.clone(),
        drho,
        tail_mass: th.raw_tail_mass,
    })
}

/// Idler ⊗ reflected modes for a diagonal-Schmidt probe.
pub fn derivative_schmidt(state: &DiagonalSchmidtState, n_b: f64, trunc: &TruncationSpec) -> Result<DerivativeAtZero> {
    let di = trunc.dim_idler;
    if di < state.m_max() + 1 {
        return Err(Error::TruncationTooSmall(format!(
            "idler cutoff {di} cannot hold joint photon number {}",
            state.m_max()
        )));
    }
    let th = thermal_state_checked(n_b, trunc.dim_bath, trunc)?;
    let p = &th.probabilities;
    let db = trunc.dim_bath;
    let idx = |m: usize, mu: usize| m * db + mu;

    let mut rho0_diag = vec![0.0; di * db];
    for m in 0..di {
        let c2 = state.amplitude(m).powi(2);
        for mu in 0..db {
            rho0_diag[idx(m, mu)] = c2 * p[mu];
        }
    }
    let mut drho = SparseHermitian::new(di * db);
    for m in 0..di - 1 {
        let cc = state.amplitude(m) * state.amplitude(m + 1) * ((m + 1) as f64).sqrt();
        if cc == 0.0 {
            continue;
        }
        for mu in 0..db - 1 {
            let w = cc * ((mu + 1) as f64).sqrt() * (p[mu + 1] - p[mu]);
            drho.add_pair(idx(m, mu), idx(m + 1, mu + 1), Complex64::new(w, 0.0));
        }
    }
    Ok(DerivativeAtZero {
        mode_labels: vec![IDLER.into(), REFLECTED.into()],
        dims: vec![di, db],
        rho0_diag,
        drho,
        tail_mass: th.raw_tail_mass.max(state.tail_mass),
    })
}

/// `Tr_S [G, ρ]` on a dense signal ⊗ … ⊗ bath state.
pub fn derivative_dense(rho: &DenseOperator, signal: &str, bath: &str) -> Result<DenseOperator> {
    let g = beamsplitter_generator(signal, bath, rho.mode_labels(), rho.dims())?;
    partial_trace(&g.commutator(rho)?, signal)
}

/// Central difference of the second-order evolution, traced over the signal.
pub fn derivative_finite_difference(rho: &DenseOperator, signal: &str, bath: &str, step: f64) -> Result<DenseOperator> {
    let g = beamsplitter_generator(signal, bath, rho.mode_labels(), rho.dims())?;
    let plus = evolve_small_eta(rho, &g, step, 2)?;
    let minus = evolve_small_eta(rho, &g, -step, 2)?;
    let diff = plus.sub(&minus)?.scale(Complex64::new(0.5 / step, 0.0));
    partial_trace(&diff, signal)
}

fn null_term(pq: f64, d: f64, what: &str, i: usize, j: usize) -> Result<bool> {
    if pq < NULL_PROBABILITY {
        if d < NULL_DERIVATIVE {
            return Ok(true);
        }
        return Err(Error::SupportMismatch(format!(
            "{what}: |d| = {d:.3e} at ({i},{j}) over zero probability"
        )));
    }
    Ok(false)
}

/// `2 Σ_{ij} |∂ρ_ij|² / (p_i + p_j)`.
pub fn qfi_numeric(d: &DerivativeAtZero) -> Result<f64> {
    let p = &d.rho0_diag;
    let mut sum = 0.0;
    for (&(i, j), v) in &d.drho.entries {
        let den = p[i] + p[j];
        let a = v.norm();
        if null_term(den, a, "qfi", i, j)? {
            continue;
        }
        sum += a * a / den;
    }
    Ok(2.0 * sum)
}

/// Classical Fisher information of photon counting in the Fock basis.
pub fn cfi_fock_counting(d: &DerivativeAtZero) -> Result<f64> {
    let mut sum = 0.0;
    for (i, &p) in d.rho0_diag.iter().enumerate() {
        let dp = d.drho.get(i, i).re;
        if null_term(p, dp.abs(), "cfi", i, i)? {
            continue;
        }
        sum += dp * dp / p;
    }
    Ok(sum)
}

fn check_orthonormal(basis: &DMatrix<Complex64>, dim: usize) -> Result<()> {
    if basis.nrows() != dim || basis.ncols() != dim {
        return Err(Error::InvalidBasis(format!(
            "basis is {}x{}, state space has dimension {dim}",
            basis.nrows(),
            basis.ncols()
        )));
    }
    let gram = basis.adjoint() * basis;
    let dev = (gram - DMatrix::<Complex64>::identity(dim, dim))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if dev > 1e-10 {
        return Err(Error::InvalidBasis(format!("|U†U − 1| = {dev:.3e}")));
    }
    Ok(())
}

/// Classical Fisher information of a projective measurement onto the columns of `basis`.
pub fn cfi_in_basis(d: &DerivativeAtZero, basis: &DMatrix<Complex64>) -> Result<f64> {
    check_orthonormal(basis, d.dim())?;
    let dr = d.drho.to_dense();
    let rotated = basis.adjoint() * &dr * basis;
    let mut sum = 0.0;
    for k in 0..d.dim() {
        let col = basis.column(k);
        let p: f64 = col
            .iter()
            .zip(&d.rho0_diag)
            .map(|(u, p)| p * u.norm_sqr())
            .sum();
        let dp = rotated[(k, k)].re;
        if null_term(p, dp.abs(), "cfi", k, k)? {
            continue;
        }
        sum += dp * dp / p;
    }
    Ok(sum)
}

/// Haar-like random unitary from the QR factor of a seeded complex Gaussian matrix.
pub fn random_orthonormal_basis(dim: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    g.qr().q()
}

/// Outcome statistics of measuring a Hermitian observable on `ρ_0 + η ∂ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementStatistics {
    pub mu0: f64,
    /// `∂_η ⟨O⟩` at `η = 0`.
    pub dmu: f64,
    pub var0: f64,
    /// CFI of the projective measurement onto the observable's eigenbasis.
    pub cfi: f64,
}

impl MeasurementStatistics {
    /// First-order moments at reflectivity `eta`, equal variances.
    pub fn moments(&self, eta: f64) -> MeasurementMoments {
        MeasurementMoments {
            mu0: self.mu0,
            mu1: self.mu0 + eta * self.dmu.abs(),
            var0: self.var0,
            var1: self.var0,
            eta,
        }
    }

    /// `|∂μ| / (2σ_0)`, the small-η limit of `snr/η`.
    pub fn snr_over_eta(&self) -> f64 {
        self.dmu.abs() / (2.0 * self.var0.sqrt())
    }
}

/// Statistics of `observable` computed block by block over its connected components.
pub fn measurement_statistics(d: &DerivativeAtZero, observable: &SparseHermitian) -> Result<MeasurementStatistics> {
    let n = d.dim();
    if observable.dim != n {
        return Err(Error::InvalidDimension(format!(
            "observable dimension {} vs state dimension {n}",
            observable.dim
        )));
    }
    let block_of = components(n, observable);
    let nblocks = block_of.iter().copied().max().map_or(0, |b| b + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nblocks];
    for (i, &b) in block_of.iter().enumerate() {
        members[b].push(i);
    }
    let mut obs_parts: Vec<Vec<(usize, usize, Complex64)>> = vec![Vec::new(); nblocks];
    for (&(i, j), v) in &observable.entries {
        obs_parts[block_of[i]].push((i, j, *v));
    }
    let mut der_parts: Vec<Vec<(usize, usize, Complex64)>> = vec![Vec::new(); nblocks];
    for (&(i, j), v) in &d.drho.entries {
        if block_of[i] == block_of[j] {
            der_parts[block_of[i]].push((i, j, *v));
        }
    }

    let per_block: Vec<Result<[f64; 4]>> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let idx = &members[b];
            let pos = |g: usize| idx.binary_search(&g).expect("member of block");
            let k = idx.len();
            let mut o = DMatrix::<Complex64>::zeros(k, k);
            for &(i, j, v) in &obs_parts[b] {
                o[(pos(i), pos(j))] = v;
            }
            let mut dr = DMatrix::<Complex64>::zeros(k, k);
            for &(i, j, v) in &der_parts[b] {
                dr[(pos(i), pos(j))] = v;
            }
            let eig = o.symmetric_eigen();
            let mut acc = [0.0; 4];
            for c in 0..k {
                let u = eig.eigenvectors.column(c);
                let lam = eig.eigenvalues[c];
                let p: f64 = u
                    .iter()
                    .zip(idx)
                    .map(|(x, &g)| x.norm_sqr() * d.rho0_diag[g])
                    .sum();
                let dp = (u.adjoint() * &dr * u)[(0, 0)].re;
                acc[0] += lam * p;
                acc[1] += lam * dp;
                acc[2] += lam * lam * p;
                if !null_term(p, dp.abs(), "cfi", c, c)? {
                    acc[3] += dp * dp / p;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut tot = [0.0; 4];
    for r in per_block {
        let a = r?;
        for k in 0..4 {
            tot[k] += a[k];
        }
    }
    let var0 = tot[2] - tot[0] * tot[0];
    if !(var0 > 0.0) {
        return Err(Error::DegenerateMeasurement(format!("observable variance {var0} on rho0")));
    }
    Ok(MeasurementStatistics {
        mu0: tot[0],
        dmu: tot[1],
        var0,
        cfi: tot[3],
    })
}

/// Connected components of the nonzero pattern; isolated indices get their own block.
fn components(n: usize, op: &SparseHermitian) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j) in op.entries.keys() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0; n];
    for (i, slot) in out.iter_mut().enumerate() {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        *slot = label[r];
    }
    out
}

/// `b e^{−iφ} + b† e^{iφ}` on the reflected mode.
pub fn quadrature_observable(dim: usize, phi: f64) -> SparseHermitian {
    let mut o = SparseHermitian::new(dim);
    for mu in 0..dim - 1 {
        o.add_pair(mu, mu + 1, Complex64::from_polar(((mu + 1) as f64).sqrt(), -phi));
    }
    o
}

/// `a_R a_I + a_R† a_I†` on idler ⊗ reflected.
pub fn joint_photon_observable(dim_idler: usize, dim_bath: usize) -> SparseHermitian {
    let mut o = SparseHermitian::new(dim_idler * dim_bath);
    for m in 0..dim_idler - 1 {
        for mu in 0..dim_bath - 1 {
            let w = (((m + 1) * (mu + 1)) as f64).sqrt();
            o.add_pair(m * dim_bath + mu, (m + 1) * dim_bath + mu + 1, Complex64::new(w, 0.0));
        }
    }
    o
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum ProbeFamily {
    Coherent,
    GeneralizedCoherent,
    Tmsv,
    Mpa,
    Mps,
    PsiPlus,
    PsiMinus,
}

impl ProbeFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ProbeFamily::Coherent => "coherent",
            ProbeFamily::GeneralizedCoherent => "generalized_coherent",
            ProbeFamily::Tmsv => "tmsv",
            ProbeFamily::Mpa => "mpa",
            ProbeFamily::Mps => "mps",
            ProbeFamily::PsiPlus => "psi_plus",
            ProbeFamily::PsiMinus => "psi_minus",
        }
    }

    pub fn schmidt_family(&self) -> Option<SchmidtFamily> {
        match self {
            ProbeFamily::Tmsv | ProbeFamily::Mpa => Some(SchmidtFamily::Added),
            ProbeFamily::Mps => Some(SchmidtFamily::Subtracted),
            _ => None,
        }
    }

    pub fn is_entangled(&self) -> bool {
        !matches!(self, ProbeFamily::Coherent | ProbeFamily::GeneralizedCoherent)
    }
}

/// One probe/environment point for verification and single queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub family: ProbeFamily,
    #[serde(default)]
    pub kappa: usize,
    /// Squeezing `tanh r` for TMSV/MPA/MPS.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    /// Target mean signal photon number (alternative to `z`; `|α|²` for coherent).
    #[serde(default, rename = "N_S", skip_serializing_if = "Option::is_none")]
    pub n_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[f64; 2]>,
    #[serde(default)]
    pub chi: f64,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(rename = "N_B")]
    pub n_b: f64,
    /// Per-mode signal/idler cutoff; fitted from the tail tolerance when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath_cutoff: Option<usize>,
    #[serde(default = "default_tail")]
    pub tail_tolerance: f64,
}

fn one() -> f64 {
    1.0
}

fn default_tail() -> f64 {
    DEFAULT_TAIL
}

impl ProbeConfig {
    pub fn new(family: ProbeFamily, n_b: f64) -> Self {
        Self {
            family,
            kappa: 0,
            z: None,
            n_s: None,
            alpha: None,
            chi: 0.0,
            epsilon: 1.0,
            p: None,
            n_b,
            cutoff: None,
            bath_cutoff: None,
            tail_tolerance: DEFAULT_TAIL,
        }
    }

    pub fn schmidt(family: ProbeFamily, kappa: usize, z: f64, n_b: f64) -> Self {
        Self {
            kappa,
            z: Some(z),
            ..Self::new(family, n_b)
        }
    }

    pub fn coherent(n_s: f64, n_b: f64) -> Self {
        Self {
            n_s: Some(n_s),
            ..Self::new(ProbeFamily::Coherent, n_b)
        }
    }

    pub fn psi(sign: Sign, p: f64, n_b: f64) -> Self {
        let family = match sign {
            Sign::Plus => ProbeFamily::PsiPlus,
            Sign::Minus => ProbeFamily::PsiMinus,
        };
        Self {
            p: Some(p),
            ..Self::new(family, n_b)
        }
    }

    fn bath_trunc(&self, dim_probe: usize) -> Result<TruncationSpec> {
        let db = self
            .bath_cutoff
            .unwrap_or_else(|| thermal_cutoff(self.n_b, self.tail_tolerance));
        TruncationSpec::new(dim_probe.max(2), dim_probe.max(2), db, self.tail_tolerance)
    }

    /// Builds the probe state and the truncation it lives in.
    pub fn resolve(&self) -> Result<ResolvedProbe> {
        if !(self.n_b >= 0.0) {
            return Err(Error::Domain(format!("N_B = {} must be nonnegative", self.n_b)));
        }
        match self.family {
            ProbeFamily::Coherent | ProbeFamily::GeneralizedCoherent => {
                let alpha = match (self.alpha, self.n_s) {
                    (Some([re, im]), _) => Complex64::new(re, im),
                    (None, Some(ns)) if ns >= 0.0 => Complex64::new(ns.sqrt(), 0.0),
                    (None, Some(ns)) => {
                        return Err(Error::Domain(format!("N_S = {ns} must be nonnegative")))
                    }
                    (None, None) => return Err(Error::Domain("coherent probe needs N_S or alpha".into())),
                };
                let (chi, eps) = match self.family {
                    ProbeFamily::Coherent => (0.0, 1.0),
                    _ => (self.chi, self.epsilon),
                };
                let cutoff = self
                    .cutoff
                    .unwrap_or_else(|| probe::poisson_cutoff(alpha.norm_sqr(), self.tail_tolerance));
                let gc = GeneralizedCoherent::new(alpha, chi, eps, cutoff)?.with_tail_tolerance(self.tail_tolerance);
                let a = coherent_a_expectation(&gc)?;
                Ok(ResolvedProbe::Ci {
                    a_expect: a,
                    n_s: alpha.norm_sqr(),
                    trunc: self.bath_trunc(2)?,
                })
            }
            ProbeFamily::PsiPlus | ProbeFamily::PsiMinus => {
                let sign = if self.family == ProbeFamily::PsiPlus { Sign::Plus } else { Sign::Minus };
                let p = self.p.ok_or_else(|| Error::Domain("psi probe needs p".into()))?;
                let toy = probe::psi_toy(p, sign)?;
                let state = toy.schmidt();
                let trunc = self.bath_trunc(self.cutoff.unwrap_or(state.m_max() + 1))?;
                Ok(ResolvedProbe::Schmidt { n_s: toy.mean_photon(), state, trunc })
            }
            ProbeFamily::Tmsv | ProbeFamily::Mpa | ProbeFamily::Mps => {
                let fam = self.family.schmidt_family().expect("schmidt family");
                let kappa = if self.family == ProbeFamily::Tmsv { 0 } else { self.kappa };
                if self.family != ProbeFamily::Tmsv && kappa == 0 {
                    return Err(Error::Domain("photon-added/subtracted probes need kappa >= 1".into()));
                }
                let z = match (self.z, self.n_s) {
                    (Some(z), _) => z,
                    (None, Some(ns)) => probe::z_for_mean_photon(fam, kappa, ns, self.tail_tolerance)?,
                    (None, None) => return Err(Error::Domain("squeezed probe needs z or N_S".into())),
                };
                let dim = match self.cutoff {
                    Some(d) => d,
                    None => fit_truncation(fam, z, kappa, 0.0, self.tail_tolerance)?.dim_idler,
                };
                let trunc = self.bath_trunc(dim)?;
                let state = probe::schmidt_state(fam, z, kappa, &trunc)?;
                let n_s = match (kappa, self.z, self.n_s) {
                    (0, None, Some(ns)) => ns,
                    (0, _, _) => z * z / (1.0 - z * z),
                    _ => probe::mean_photon(&state),
                };
                Ok(ResolvedProbe::Schmidt {
                    n_s,
                    state,
                    trunc,
                })
            }
        }
    }

    /// Closed-form QFI at `η → 0`.
    pub fn qfi_analytic(&self, resolved: &ResolvedProbe) -> Result<f64> {
        match (self.family, resolved) {
            (ProbeFamily::Coherent, ResolvedProbe::Ci { n_s, .. }) => metrics::qfi_coherent(*n_s, self.n_b),
            (_, ResolvedProbe::Ci { a_expect, .. }) => metrics::qfi_ci(*a_expect, self.n_b),
            (ProbeFamily::Tmsv, ResolvedProbe::Schmidt { n_s, .. }) => metrics::qfi_tmsv(*n_s, self.n_b),
            (ProbeFamily::PsiPlus, _) => metrics::qfi_psi(self.p.unwrap_or(0.0), Sign::Plus, self.n_b),
            (ProbeFamily::PsiMinus, _) => metrics::qfi_psi(self.p.unwrap_or(0.0), Sign::Minus, self.n_b),
            (_, ResolvedProbe::Schmidt { state, .. }) => metrics::qfi_schmidt(state, self.n_b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedProbe {
    Ci {
        a_expect: Complex64,
        n_s: f64,
        trunc: TruncationSpec,
    },
    Schmidt {
        state: DiagonalSchmidtState,
        n_s: f64,
        trunc: TruncationSpec,
    },
}

impl ResolvedProbe {
    pub fn mean_photon(&self) -> f64 {
        match self {
            ResolvedProbe::Ci { n_s, .. } | ResolvedProbe::Schmidt { n_s, .. } => *n_s,
        }
    }

    /// Analytic moments of the standard measurement: matched quadrature or joint photon.
    pub fn analytic_moments(&self, n_b: f64, eta: f64) -> Result<MeasurementMoments> {
        match self {
            ResolvedProbe::Ci { a_expect, .. } => metrics::moments_quadrature(*a_expect, a_expect.arg(), n_b, eta),
            ResolvedProbe::Schmidt { state, .. } => metrics::moments_joint_photon(state, n_b, eta),
        }
    }

    pub fn derivative(&self, n_b: f64) -> Result<DerivativeAtZero> {
        match self {
            ResolvedProbe::Ci { a_expect, trunc, .. } => derivative_ci_with(*a_expect, n_b, trunc),
            ResolvedProbe::Schmidt { state, trunc, .. } => derivative_schmidt(state, n_b, trunc),
        }
    }

    /// Observable of the standard measurement on the derivative's space.
    pub fn observable(&self, d: &DerivativeAtZero) -> SparseHermitian {
        match self {
            ResolvedProbe::Ci { a_expect, .. } => {
                // The reflected amplitude is −η⟨a⟩, so the matched quadrature sits at θ + π.
                quadrature_observable(d.dims[0], a_expect.arg() + std::f64::consts::PI)
            }
            ResolvedProbe::Schmidt { .. } => joint_photon_observable(d.dims[0], d.dims[1]),
        }
    }
}

/// Oracle evaluation of one configuration.
pub fn verify_one(config: &ProbeConfig) -> Result<FisherReport> {
    let resolved = config.resolve()?;
    let analytic = config.qfi_analytic(&resolved)?;
    let d = resolved.derivative(config.n_b)?;
    let oracle = qfi_numeric(&d)?;
    let stats = measurement_statistics(&d, &resolved.observable(&d))?;
    let (dims, tail) = (d.dims.clone(), d.tail_mass);
    let mut echo = serde_json::to_value(config).map_err(|e| Error::Domain(e.to_string()))?;
    if let serde_json::Value::Object(map) = &mut echo {
        map.insert("N_S".into(), resolved.mean_photon().into());
        if let ResolvedProbe::Schmidt { state, .. } = &resolved {
            map.insert("z".into(), state.z.into());
        }
        map.insert("dims".into(), dims.into());
        map.insert("tail_mass".into(), tail.into());
        map.insert("cfi_fock".into(), cfi_fock_counting(&d)?.into());
    }
    let mut report = FisherReport::new(analytic, echo);
    report.qfi_oracle = Some(oracle);
    report.cfi = Some(stats.cfi);
    report.snr_over_eta = Some(stats.snr_over_eta());
    Ok(report)
}

/// Runs [`verify_one`] over a grid in parallel; results keep grid order.
pub fn verify_closed_forms(grid: &[ProbeConfig]) -> Result<Vec<FisherReport>> {
    grid.par_iter()
        .enumerate()
        .map(|(index, c)| {
            verify_one(c).map_err(|e| Error::Configuration {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Like [`verify_closed_forms`] but keeps every outcome.
pub fn verify_each(grid: &[ProbeConfig]) -> Vec<Result<FisherReport>> {
    grid.par_iter().map(verify_one).collect()
}

/// κ ∈ {0..3} × z ∈ {0.1,0.3,0.5,0.7} × N_B ∈ {0.5,1,10}, both photon-added and -subtracted.
pub fn default_grid() -> Vec<ProbeConfig> {
    let mut grid = Vec::new();
    for &n_b in &[0.5, 1.0, 10.0] {
        for &z in &[0.1, 0.3, 0.5, 0.7] {
            grid.push(ProbeConfig::schmidt(ProbeFamily::Tmsv, 0, z, n_b));
            for kappa in 1..=3 {
                grid.push(ProbeConfig::schmidt(ProbeFamily::Mpa, kappa, z, n_b));
                grid.push(ProbeConfig::schmidt(ProbeFamily::Mps, kappa, z, n_b));
            }
        }
        for &n_s in &[0.1, 1.0, 4.0] {
            grid.push(ProbeConfig::coherent(n_s, n_b));
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{projector, tensor_product, thermal_state};
    use crate::probe::{mpa_coefficients, mps_coefficients, tmsv_coefficients};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn small_trunc(d: usize, db: usize) -> TruncationSpec {
        TruncationSpec::new(d, d, db, 0.5).unwrap()
    }

    /// Dense `ρ_SI ⊗ ρ_B` for a diagonal-Schmidt probe.
    fn dense_state(state: &DiagonalSchmidtState, d: usize, n_b: f64, db: usize) -> DenseOperator {
        let mut psi = vec![c(0.0); d * d];
        for (m, a) in state.iter() {
            psi[m * d + m] = c(a);
        }
        let si = projector(vec![SIGNAL.into(), IDLER.into()], vec![d, d], &psi).unwrap();
        let bath = thermal_state(n_b, db).unwrap().to_operator(REFLECTED).unwrap();
        tensor_product(&si, &bath).unwrap()
    }

    #[test]
    fn ci_zero_amplitude_vanishes() {
        let d = derivative_ci(c(0.0), 1.0, 60).unwrap();
        assert_eq!(d.drho.nnz(), 0);
        assert_eq!(qfi_numeric(&d).unwrap(), 0.0);
    }

    #[test]
    fn ci_structure_and_value() {
        let a = Complex64::from_polar(1.0, 0.7);
        let d = derivative_ci(a, 10.0, 320).unwrap();
        assert!(d.drho.hermiticity_deviation() < 1e-15);
        assert!(d.drho.trace().norm() < 1e-15);
        d.check_selection_rule().unwrap();
        let q = qfi_numeric(&d).unwrap();
        assert!(rel(q, 4.0 / 21.0) < 1e-8, "{q}");
        assert!(cfi_fock_counting(&d).unwrap() == 0.0);
    }

    #[test]
    fn ci_truncation_error() {
        assert!(matches!(
            derivative_ci(c(1.0), 10.0, 40),
            Err(Error::TruncationTooSmall(_))
        ));
    }

    #[test]
    fn tmsv_oracle_value() {
        let z = 0.5f64.sqrt();
        let t = fit_truncation(SchmidtFamily::Added, z, 0, 10.0, 1e-12).unwrap();
        let s = tmsv_coefficients(z, &t).unwrap();
        let d = derivative_schmidt(&s, 10.0, &t).unwrap();
        assert!(rel(qfi_numeric(&d).unwrap(), 0.25) < 1e-8);
    }

    #[test]
    fn tmsv_vacuum_single_block_pair() {
        let t = small_trunc(3, 8);
        let s = tmsv_coefficients(0.0, &t).unwrap();
        let d = derivative_schmidt(&s, 0.5, &t).unwrap();
        // Only c_0 survives, so nothing connects to m = 1.
        assert_eq!(d.drho.nnz(), 0);
    }

    #[test]
    fn mpa_oracle_matches_closed_form() {
        let t = fit_truncation(SchmidtFamily::Added, 0.5, 1, 1.0, 1e-12).unwrap();
        let s = mpa_coefficients(0.5, 1, &t).unwrap();
        let d = derivative_schmidt(&s, 1.0, &t).unwrap();
        let q = metrics::qfi_schmidt(&s, 1.0).unwrap();
        assert!(rel(qfi_numeric(&d).unwrap(), q) < 1e-8);
    }

    #[test]
    fn hermitian_traceless_kappa2() {
        let t = fit_truncation(SchmidtFamily::Added, 0.5, 2, 1.0, 1e-12).unwrap();
        for s in [mpa_coefficients(0.5, 2, &t).unwrap(), mps_coefficients(0.5, 2, &t).unwrap()] {
            let d = derivative_schmidt(&s, 1.0, &t).unwrap();
            assert!(d.drho.hermiticity_deviation() < 1e-12);
            assert!(d.drho.trace().norm() < 1e-12);
            d.check_selection_rule().unwrap();
            assert!((d.rho0_diag.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_commutator_construction() {
        for (k, fam) in [(0, SchmidtFamily::Added), (1, SchmidtFamily::Added), (2, SchmidtFamily::Subtracted)] {
            let (d, db, nb) = (5, 6, 0.4);
            let t = small_trunc(d, db);
            let s = probe::schmidt_state(fam, 0.3, k, &t).unwrap();
            let sparse = derivative_schmidt(&s, nb, &t).unwrap().to_dense().unwrap();
            let dense = derivative_dense(&dense_state(&s, d, nb, db), SIGNAL, REFLECTED).unwrap();
            assert_eq!(dense.mode_labels(), sparse.mode_labels());
            let dev = (dense.entries() - sparse.entries()).iter().map(|x| x.norm()).fold(0.0, f64::max);
            assert!(dev < 1e-14, "k={k}: {dev}");
        }
    }

    #[test]
    fn matches_finite_difference() {
        let (d, db, nb) = (4, 5, 0.8);
        let t = small_trunc(d, db);
        let s = mpa_coefficients(0.4, 1, &t).unwrap();
        let sparse = derivative_schmidt(&s, nb, &t).unwrap().to_dense().unwrap();
        let fd = derivative_finite_difference(&dense_state(&s, d, nb, db), SIGNAL, REFLECTED, FD_STEP).unwrap();
        let dev = (fd.entries() - sparse.entries()).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(dev < FD_TOLERANCE);
    }

    #[test]
    fn closed_form_entries_on_small_grid() {
        // ⟨m,μ|∂ρ|m+1,μ+1⟩ = c_m c_{m+1} √(m+1) √(μ+1) (ϱ_{μ+1} − ϱ_μ) on a 3×3 corner.
        let t = small_trunc(6, 8);
        let s = mps_coefficients(0.5, 1, &t).unwrap();
        let nb = 1.0;
        let d = derivative_schmidt(&s, nb, &t).unwrap();
        let p = thermal_state(nb, 8).unwrap().probabilities;
        for m in 0..3 {
            for mu in 0..3 {
                let expect = s.amplitude(m) * s.amplitude(m + 1) * ((m + 1) as f64).sqrt()
                    * ((mu + 1) as f64).sqrt() * (p[mu + 1] - p[mu]);
                let got = d.drho.get(m * 8 + mu, (m + 1) * 8 + mu + 1);
                assert!((got - c(expect)).norm() < 1e-15);
                assert_eq!(d.drho.get(m * 8 + mu, m * 8 + mu + 1), c(0.0));
            }
        }
    }

    #[test]
    fn support_mismatch_detected() {
        let mut d = derivative_ci(c(0.5), 0.0, 4).unwrap();
        d.drho.add_pair(2, 3, c(1.0));
        assert!(matches!(qfi_numeric(&d), Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn random_bases_never_beat_qfi() {
        let t = small_trunc(4, 6);
        let s = mps_coefficients(0.4, 1, &t).unwrap();
        let d = derivative_schmidt(&s, 0.3, &t).unwrap();
        let q = qfi_numeric(&d).unwrap();
        for seed in 0..20 {
            let u = random_orthonormal_basis(d.dim(), seed);
            let f = cfi_in_basis(&d, &u).unwrap();
            assert!(f <= q + 1e-9, "seed {seed}: {f} > {q}");
            assert!(f >= 0.0);
        }
        let id = DMatrix::<Complex64>::identity(d.dim(), d.dim());
        assert_eq!(cfi_in_basis(&d, &id).unwrap(), cfi_fock_counting(&d).unwrap());
    }

    #[test]
    fn invalid_basis_rejected() {
        let d = derivative_ci(c(0.5), 0.2, 20).unwrap();
        let bad = DMatrix::<Complex64>::from_element(20, 20, c(1.0));
        assert!(matches!(cfi_in_basis(&d, &bad), Err(Error::InvalidBasis(_))));
        let short = DMatrix::<Complex64>::identity(5, 5);
        assert!(matches!(cfi_in_basis(&d, &short), Err(Error::InvalidBasis(_))));
    }

    #[test]
    fn quadrature_basis_approaches_qfi() {
        let a = Complex64::from_polar(1.0, 0.3);
        let mut prev_gap = f64::INFINITY;
        for &db in &[40, 80, 160] {
            let d = derivative_ci(a, 0.5, db).unwrap();
            let q = qfi_numeric(&d).unwrap();
            let obs = quadrature_observable(db, a.arg() + std::f64::consts::PI);
            let dense = obs.to_dense();
            let basis = dense.symmetric_eigen().eigenvectors;
            let f = cfi_in_basis(&d, &basis).unwrap();
            let stats = measurement_statistics(&d, &obs).unwrap();
            assert!(rel(stats.cfi, f) < 1e-8);
            let gap = (q - f) / q;
            assert!(gap >= -1e-9 && gap <= prev_gap + 1e-12);
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-6);
    }

    #[test]
    fn statistics_obey_cauchy_schwarz() {
        let cfg = ProbeConfig::schmidt(ProbeFamily::Mpa, 1, 0.3, 10.0);
        let r = verify_one(&cfg).unwrap();
        let s = r.snr_over_eta.unwrap();
        assert!(4.0 * s * s <= r.cfi.unwrap() + 1e-12);
        assert!(r.cfi.unwrap() <= r.qfi_oracle.unwrap() + 1e-12);
    }

    #[test]
    fn tmsv_joint_photon_statistics_match_analytic() {
        let cfg = ProbeConfig::schmidt(ProbeFamily::Tmsv, 0, 0.5f64.sqrt(), 10.0);
        let resolved = cfg.resolve().unwrap();
        let d = resolved.derivative(10.0).unwrap();
        let st = measurement_statistics(&d, &resolved.observable(&d)).unwrap();
        let an = resolved.analytic_moments(10.0, 1.0).unwrap();
        assert!(rel(st.var0, an.var0) < 1e-9);
        assert!(rel(st.dmu.abs(), an.difference()) < 1e-9);
        assert!(rel(4.0 * st.snr_over_eta().powi(2), 0.25) < 1e-8);
    }

    #[test]
    fn doubling_cutoffs_moves_qfi_within_ten_tails() {
        let cfg = ProbeConfig::schmidt(ProbeFamily::Mps, 2, 0.5, 1.0);
        let base = verify_one(&cfg).unwrap();
        let tail = base.config["tail_mass"].as_f64().unwrap();
        let dims = base.config["dims"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap() as usize).collect::<Vec<_>>();
        let mut big = cfg.clone();
        big.cutoff = Some(2 * dims[0]);
        big.bath_cutoff = Some(2 * dims[1]);
        let doubled = verify_one(&big).unwrap();
        let change = (doubled.qfi_oracle.unwrap() - base.qfi_oracle.unwrap()).abs();
        assert!(change < 10.0 * tail, "change {change:e} vs tail {tail:e}");
    }

    #[test]
    fn verify_grid_order_and_errors() {
        assert!(verify_closed_forms(&[]).unwrap().is_empty());
        let mut bad = ProbeConfig::schmidt(ProbeFamily::Tmsv, 0, 0.99, 1.0);
        bad.cutoff = Some(20);
        let grid = vec![ProbeConfig::coherent(1.0, 10.0), bad];
        match verify_closed_forms(&grid) {
            Err(Error::Configuration { index, source }) => {
                assert_eq!(index, 1);
                assert!(matches!(*source, Error::TruncationTooSmall(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = ProbeConfig::schmidt(ProbeFamily::Mps, 2, 0.3, 10.0);
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains("\"family\":\"mps\""));
        let back: ProbeConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
        let parsed: ProbeConfig = serde_json::from_str(r#"{"family":"coherent","N_S":1,"N_B":10}"#).unwrap();
        assert_eq!(parsed, ProbeConfig::coherent(1.0, 10.0));
    }
}
