//! Truncated-Fock-space linear algebra over labeled multimode systems.
//!
//! Basis ordering is lexicographic in the multi-index with the first label
//! most significant: for labels `[A, B]` with dims `[dA, dB]` the basis state
//! `|i_A, i_B⟩` sits at row `i_A * dB + i_B`. Tests rely on this ordering.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fock cutoffs and the tail-mass tolerance that governs all numerical work.
///
/// A mode with cutoff `d` keeps the states `|0⟩..|d-1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub dim_signal: usize,
    pub dim_idler: usize,
    pub dim_bath: usize,
    pub tail_tolerance: f64,
}

impl TruncationSpec {
    pub fn new(
        dim_signal: usize,
        dim_idler: usize,
        dim_bath: usize,
        tail_tolerance: f64,
    ) -> Result<Self> {
        for (name, d) in [
            ("dim_signal", dim_signal),
            ("dim_idler", dim_idler),
            ("dim_bath", dim_bath),
        ] {
            if d < 2 {
                return Err(Error::InvalidDimension(format!("{name} = {d} < 2")));
            }
        }
        if !(tail_tolerance > 0.0 && tail_tolerance < 1.0) {
            return Err(Error::Domain(format!(
                "tail_tolerance {tail_tolerance} outside (0,1)"
            )));
        }
        Ok(Self {
            dim_signal,
            dim_idler,
            dim_bath,
            tail_tolerance,
        })
    }

    /// Largest joint photon number representable in both signal and idler.
    pub fn joint_cutoff(&self) -> usize {
        self.dim_signal.min(self.dim_idler) - 1
    }

    pub fn check_tail(&self, tail: f64, what: &str) -> Result<()> {
        if tail >= self.tail_tolerance {
            return Err(Error::TruncationTooSmall(format!(
                "{what}: discarded mass {tail:.3e} >= tolerance {:.3e}",
                self.tail_tolerance
            )));
        }
        Ok(())
    }
}

/// Complex matrix over a labeled tensor product of truncated modes.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    mode_labels: Vec<String>,
    dims: Vec<usize>,
    entries: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn new(mode_labels: Vec<String>, dims: Vec<usize>, entries: DMatrix<Complex64>) -> Result<Self> {
        if mode_labels.len() != dims.len() {
            return Err(Error::InvalidDimension(format!(
                "{} labels but {} dims",
                mode_labels.len(),
                dims.len()
            )));
        }
        for (i, l) in mode_labels.iter().enumerate() {
            if mode_labels[..i].contains(l) {
                return Err(Error::LabelCollision(l.clone()));
            }
        }
        let side: usize = dims.iter().product();
        if entries.nrows() != side || entries.ncols() != side {
            return Err(Error::InvalidDimension(format!(
                "matrix is {}x{}, expected {side}x{side}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self {
            mode_labels,
            dims,
            entries,
        })
    }

    /// Operator on a single mode.
    pub fn single_mode(label: &str, entries: DMatrix<Complex64>) -> Result<Self> {
        let d = entries.nrows();
        Self::new(vec![label.to_string()], vec![d], entries)
    }

    pub fn identity(label: &str, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Self::single_mode(label, DMatrix::identity(dim, dim))
    }

    pub fn zeros_like(&self) -> Self {
        let n = self.side();
        Self {
            mode_labels: self.mode_labels.clone(),
            dims: self.dims.clone(),
            entries: DMatrix::zeros(n, n),
        }
    }

    pub fn mode_labels(&self) -> &[String] {
        &self.mode_labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn side(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mode_labels: self.mode_labels.clone(),
            dims: self.dims.clone(),
            entries: self.entries.adjoint(),
        }
    }

    /// Largest entrywise deviation `|A_ij - conj(A_ji)|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.side();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.entries[(i, j)] - self.entries[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.mode_labels != other.mode_labels || self.dims != other.dims {
            return Err(Error::InvalidDimension(format!(
                "operands act on different spaces: {:?}{:?} vs {:?}{:?}",
                self.mode_labels, self.dims, other.mode_labels, other.dims
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(self.with_entries(&self.entries + &other.entries))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(self.with_entries(&self.entries - &other.entries))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(self.with_entries(&self.entries * &other.entries))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        self.with_entries(&self.entries * factor)
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(self.with_entries(&self.entries * &other.entries - &other.entries * &self.entries))
    }

    /// `Tr(self · state)`.
    pub fn expectation(&self, state: &Self) -> Result<Complex64> {
        self.check_same_space(state)?;
        let n = self.side();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += self.entries[(i, k)] * state.entries[(k, i)];
            }
        }
        Ok(acc)
    }

    /// Embeds a single-mode operator acting on `label` into this operator's space.
    pub fn embed_single(&self, label: &str, local: &DMatrix<Complex64>) -> Result<Self> {
        let pos = self.position(label)?;
        if local.nrows() != self.dims[pos] || local.ncols() != self.dims[pos] {
            return Err(Error::InvalidDimension(format!(
                "local operator is {}x{}, mode `{label}` has dim {}",
                local.nrows(),
                local.ncols(),
                self.dims[pos]
            )));
        }
        let left: usize = self.dims[..pos].iter().product();
        let right: usize = self.dims[pos + 1..].iter().product();
        let entries = DMatrix::<Complex64>::identity(left, left)
            .kronecker(local)
            .kronecker(&DMatrix::<Complex64>::identity(right, right));
        Ok(self.with_entries(entries))
    }

    fn position(&self, label: &str) -> Result<usize> {
        self.mode_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::LabelNotFound(label.to_string()))
    }

    fn with_entries(&self, entries: DMatrix<Complex64>) -> Self {
        Self {
            mode_labels: self.mode_labels.clone(),
            dims: self.dims.clone(),
            entries,
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("dim = {dim} < 2")));
    }
    Ok(())
}

/// Lowering operator with `⟨n-1|a|n⟩ = √n`.
pub fn annihilation_matrix(dim: usize) -> Result<DMatrix<Complex64>> {
    check_dim(dim)?;
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    Ok(m)
}

/// [`annihilation_matrix`] wrapped as a labeled single-mode operator.
pub fn annihilation(label: &str, dim: usize) -> Result<DenseOperator> {
    DenseOperator::single_mode(label, annihilation_matrix(dim)?)
}

/// Diagonal `a†a` on a truncated mode.
pub fn number_matrix(dim: usize) -> Result<DMatrix<Complex64>> {
    check_dim(dim)?;
    Ok(DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(i as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// Truncated thermal photon-number distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalSpectrum {
    pub mean_photons: f64,
    pub dim: usize,
    /// Geometric weights `N^n/(N+1)^(n+1)`, renormalized over the kept levels.
    pub probabilities: Vec<f64>,
    /// Mass `Σ_{n≥dim} ϱ_n` of the untruncated distribution.
    pub raw_tail_mass: f64,
}

impl ThermalSpectrum {
    /// Ratio `ϱ_{n+1}/ϱ_n = N/(N+1)`.
    pub fn ratio(&self) -> f64 {
        self.mean_photons / (self.mean_photons + 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn to_operator(&self, label: &str) -> Result<DenseOperator> {
        let d = self.dim;
        let m = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::new(self.probabilities[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        DenseOperator::single_mode(label, m)
    }
}

/// Thermal state with mean photon number `n_b`, truncated to `dim` levels.
pub fn thermal_state(n_b: f64, dim: usize) -> Result<ThermalSpectrum> {
    check_dim(dim)?;
    if !(n_b >= 0.0) || !n_b.is_finite() {
        return Err(Error::Domain(format!("thermal mean photon number {n_b} must be >= 0")));
    }
    let t = n_b / (n_b + 1.0);
    let raw_tail_mass = t.powi(dim as i32);
    let mut probabilities = Vec::with_capacity(dim);
    let mut w = 1.0 / (n_b + 1.0);
    for _ in 0..dim {
        probabilities.push(w);
        w *= t;
    }
    let kept: f64 = probabilities.iter().sum();
    for p in &mut probabilities {
        *p /= kept;
    }
    Ok(ThermalSpectrum {
        mean_photons: n_b,
        dim,
        probabilities,
        raw_tail_mass,
    })
}

/// [`thermal_state`] that rejects truncations whose tail exceeds the spec tolerance.
pub fn thermal_state_checked(n_b: f64, dim: usize, trunc: &TruncationSpec) -> Result<ThermalSpectrum> {
    let th = thermal_state(n_b, dim)?;
    trunc.check_tail(th.raw_tail_mass, "thermal bath")?;
    Ok(th)
}

/// Smallest cutoff whose thermal tail `(N/(N+1))^d` is below `tol`.
pub fn thermal_cutoff(n_b: f64, tol: f64) -> usize {
    if n_b <= 0.0 {
        return 2;
    }
    let t = n_b / (n_b + 1.0);
    let d = (tol.ln() / t.ln()).floor() as usize + 1;
    d.max(2)
}

/// Kronecker product; mode labels are concatenated.
pub fn tensor_product(a: &DenseOperator, b: &DenseOperator) -> Result<DenseOperator> {
    if let Some(l) = a.mode_labels.iter().find(|l| b.mode_labels.contains(l)) {
        return Err(Error::LabelCollision(l.clone()));
    }
    let mut labels = a.mode_labels.clone();
    labels.extend(b.mode_labels.iter().cloned());
    let mut dims = a.dims.clone();
    dims.extend(b.dims.iter().copied());
    DenseOperator::new(labels, dims, a.entries.kronecker(&b.entries))
}

/// Traces out the mode `traced_label`.
///
/// Tracing the last remaining mode yields a 1x1 operator with no labels.
pub fn partial_trace(op: &DenseOperator, traced_label: &str) -> Result<DenseOperator> {
    let pos = op.position(traced_label)?;
    let d = op.dims[pos];
    let left: usize = op.dims[..pos].iter().product();
    let right: usize = op.dims[pos + 1..].iter().product();
    let side = left * right;
    let mut out = DMatrix::<Complex64>::zeros(side, side);
    for l in 0..left {
        for r in 0..right {
            let row = l * right + r;
            for l2 in 0..left {
                for r2 in 0..right {
                    let col = l2 * right + r2;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for m in 0..d {
                        acc += op.entries[((l * d + m) * right + r, (l2 * d + m) * right + r2)];
                    }
                    out[(row, col)] = acc;
                }
            }
        }
    }
    let mut labels = op.mode_labels.clone();
    labels.remove(pos);
    let mut dims = op.dims.clone();
    dims.remove(pos);
    DenseOperator::new(labels, dims, out)
}

/// `G = a_S† b − a_S b†` on the full space described by `labels`/`dims`.
///
/// The reflectivity unitary is `exp(η G)`.
pub fn beamsplitter_generator(
    signal: &str,
    bath: &str,
    labels: &[String],
    dims: &[usize],
) -> Result<DenseOperator> {
    if labels.len() != dims.len() {
        return Err(Error::InvalidDimension(format!(
            "{} labels but {} dims",
            labels.len(),
            dims.len()
        )));
    }
    if signal == bath {
        return Err(Error::LabelCollision(signal.to_string()));
    }
    for &d in dims {
        check_dim(d)?;
    }
    let side: usize = dims.iter().product();
    let space = DenseOperator::new(labels.to_vec(), dims.to_vec(), DMatrix::zeros(side, side))?;
    let ds = dims[space.position(signal)?];
    let db = dims[space.position(bath)?];
    let a = space.embed_single(signal, &annihilation_matrix(ds)?)?;
    let b = space.embed_single(bath, &annihilation_matrix(db)?)?;
    let adag_b = a.adjoint().mul(&b)?;
    let a_bdag = a.mul(&b.adjoint())?;
    adag_b.sub(&a_bdag)
}

/// Perturbative `U(η) ρ U(η)†` with `U = exp(η G)`:
/// `ρ + η[G,ρ]` at order 1, plus `η²/2 [G,[G,ρ]]` at order 2.
pub fn evolve_small_eta(
    state: &DenseOperator,
    generator: &DenseOperator,
    eta: f64,
    order: u32,
) -> Result<DenseOperator> {
    if !(1..=2).contains(&order) {
        return Err(Error::Domain(format!("order {order} not in {{1,2}}")));
    }
    let c1 = generator.commutator(state)?;
    let mut out = state.add(&c1.scale(Complex64::new(eta, 0.0)))?;
    if order == 2 {
        let c2 = generator.commutator(&c1)?;
        out = out.add(&c2.scale(Complex64::new(0.5 * eta * eta, 0.0)))?;
    }
    Ok(out)
}

/// Dense projector `|ψ⟩⟨ψ|` on the given labeled space.
pub fn projector(labels: Vec<String>, dims: Vec<usize>, psi: &[Complex64]) -> Result<DenseOperator> {
    let side: usize = dims.iter().product();
    if psi.len() != side {
        return Err(Error::InvalidDimension(format!(
            "state vector has length {}, space has dim {side}",
            psi.len()
        )));
    }
    let m = DMatrix::from_fn(side, side, |i, j| psi[i] * psi[j].conj());
    DenseOperator::new(labels, dims, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn labels(ls: &[&str]) -> Vec<String> {
        ls.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn annihilation_dim2() {
        let a = annihilation_matrix(2).unwrap();
        assert_eq!(a[(0, 1)], c(1.0));
        assert_eq!(a[(0, 0)], c(0.0));
        assert_eq!(a[(1, 0)], c(0.0));
        assert_eq!(a[(1, 1)], c(0.0));
    }

    #[test]
    fn annihilation_dim3_entries() {
        let a = annihilation_matrix(3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = match (i, j) {
                    (0, 1) => 1.0,
                    (1, 2) => 2f64.sqrt(),
                    _ => 0.0,
                };
                assert_eq!(a[(i, j)], c(expect));
            }
        }
    }

    #[test]
    fn number_operator_from_ladder() {
        let a = annihilation_matrix(4).unwrap();
        let n = a.adjoint() * &a;
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { i as f64 } else { 0.0 };
                assert!((n[(i, j)] - c(expect)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn annihilation_rejects_small_dim() {
        assert!(matches!(annihilation_matrix(1), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn thermal_vacuum_limit() {
        let th = thermal_state(0.0, 4).unwrap();
        assert_eq!(th.probabilities, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(th.raw_tail_mass, 0.0);
    }

    #[test]
    fn thermal_one_photon_is_dyadic() {
        let th = thermal_state(1.0, 80).unwrap();
        for (n, p) in th.probabilities.iter().enumerate().take(20) {
            assert!((p - 0.5f64.powi(n as i32 + 1)).abs() < 1e-15);
        }
    }

    #[test]
    fn thermal_mean_approaches_nb() {
        let th = thermal_state(10.0, 600).unwrap();
        assert!((th.mean() - 10.0).abs() < 1e-9);
        assert!(th.raw_tail_mass < 1e-20);
    }

    #[test]
    fn thermal_strictly_decreasing() {
        let th = thermal_state(3.0, 30).unwrap();
        assert!(th.probabilities.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn thermal_tail_check() {
        let trunc = TruncationSpec::new(4, 4, 20, 1e-10).unwrap();
        let err = thermal_state_checked(10.0, 20, &trunc).unwrap_err();
        assert!(matches!(err, Error::TruncationTooSmall(_)));
        assert!(thermal_state_checked(0.1, 20, &trunc).is_ok());
    }

    #[test]
    fn thermal_cutoff_meets_tolerance() {
        for nb in [0.5, 1.0, 10.0] {
            let d = thermal_cutoff(nb, 1e-12);
            let th = thermal_state(nb, d).unwrap();
            assert!(th.raw_tail_mass < 1e-12);
            let th_short = thermal_state(nb, d - 1).unwrap();
            assert!(th_short.raw_tail_mass >= 1e-12);
        }
    }

    #[test]
    fn truncation_spec_validation() {
        assert!(TruncationSpec::new(1, 4, 4, 1e-3).is_err());
        assert!(TruncationSpec::new(4, 4, 4, 0.0).is_err());
        assert!(TruncationSpec::new(4, 4, 4, 1.0).is_err());
        assert_eq!(TruncationSpec::new(5, 7, 4, 1e-3).unwrap().joint_cutoff(), 4);
    }

    #[test]
    fn tensor_trace_is_multiplicative() {
        let a = thermal_state(0.7, 3).unwrap().to_operator("A").unwrap().scale(c(2.0));
        let b = thermal_state(1.3, 4).unwrap().to_operator("B").unwrap().scale(c(3.0));
        let ab = tensor_product(&a, &b).unwrap();
        assert!((ab.trace() - a.trace() * b.trace()).norm() < 1e-14);
        assert_eq!(ab.mode_labels(), &["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn identity_tensor_identity() {
        let i = tensor_product(
            &DenseOperator::identity("A", 3).unwrap(),
            &DenseOperator::identity("B", 2).unwrap(),
        )
        .unwrap();
        assert_eq!(i.entries(), &DMatrix::<Complex64>::identity(6, 6));
    }

    #[test]
    fn commuting_factors() {
        let a = annihilation("A", 3).unwrap();
        let b = annihilation("B", 4).unwrap();
        let a1 = tensor_product(&a, &DenseOperator::identity("B", 4).unwrap()).unwrap();
        let b1 = tensor_product(&DenseOperator::identity("A", 3).unwrap(), &b).unwrap();
        let prod = a1.mul(&b1).unwrap();
        assert_eq!(prod, tensor_product(&a, &b).unwrap());
    }

    #[test]
    fn tensor_label_collision() {
        let a = DenseOperator::identity("A", 2).unwrap();
        assert!(matches!(tensor_product(&a, &a), Err(Error::LabelCollision(_))));
    }

    #[test]
    fn partial_trace_product_state() {
        let ra = thermal_state(0.4, 3).unwrap().to_operator("A").unwrap();
        let rb = thermal_state(2.0, 5).unwrap().to_operator("B").unwrap();
        let rab = tensor_product(&ra, &rb).unwrap();
        let red = partial_trace(&rab, "B").unwrap();
        assert!((red.entries() - ra.entries()).norm() < 1e-14);
        let red_a = partial_trace(&rab, "A").unwrap();
        assert!((red_a.entries() - rb.entries()).norm() < 1e-14);
    }

    #[test]
    fn partial_trace_unknown_label() {
        let a = DenseOperator::identity("A", 2).unwrap();
        assert!(matches!(partial_trace(&a, "Z"), Err(Error::LabelNotFound(_))));
    }

    #[test]
    fn partial_trace_of_tmsv_projector_is_diagonal() {
        let z: f64 = 0.4;
        let d = 6;
        let mut psi = vec![c(0.0); d * d];
        let mut weights = Vec::new();
        for n in 0..d {
            let cn = (1.0 - z * z).sqrt() * z.powi(n as i32);
            psi[n * d + n] = c(cn);
            weights.push(cn * cn);
        }
        let proj = projector(labels(&["S", "I"]), vec![d, d], &psi).unwrap();
        let idler = partial_trace(&proj, "S").unwrap();
        for (i, w) in weights.iter().enumerate() {
            for j in 0..d {
                let expect = if i == j { *w } else { 0.0 };
                assert!((idler.get(i, j) - c(expect)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn beamsplitter_generator_properties() {
        let ls = labels(&["S", "I", "B"]);
        let dims = vec![3, 2, 4];
        let g = beamsplitter_generator("S", "B", &ls, &dims).unwrap();
        let sum = g.add(&g.adjoint()).unwrap();
        assert!(sum.max_abs() < 1e-12);
        assert_eq!(g.get(0, 0), c(0.0));

        let ns = g.embed_single("S", &number_matrix(3).unwrap()).unwrap();
        let nb = g.embed_single("B", &number_matrix(4).unwrap()).unwrap();
        let total = ns.add(&nb).unwrap();
        assert!(g.commutator(&total).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn beamsplitter_rejects_bad_input() {
        let ls = labels(&["S", "B"]);
        assert!(matches!(
            beamsplitter_generator("S", "B", &ls, &[3]),
            Err(Error::InvalidDimension(_))
        ));
        assert!(matches!(
            beamsplitter_generator("S", "X", &ls, &[3, 3]),
            Err(Error::LabelNotFound(_))
        ));
    }

    #[test]
    fn evolve_zero_eta_is_identity_map() {
        let ls = labels(&["S", "B"]);
        let g = beamsplitter_generator("S", "B", &ls, &[3, 3]).unwrap();
        let rho = tensor_product(
            &thermal_state(0.3, 3).unwrap().to_operator("S").unwrap(),
            &thermal_state(1.0, 3).unwrap().to_operator("B").unwrap(),
        )
        .unwrap();
        assert_eq!(evolve_small_eta(&rho, &g, 0.0, 2).unwrap(), rho);
        let eta = 0.01;
        let first = evolve_small_eta(&rho, &g, eta, 1).unwrap();
        let diff = first.sub(&rho).unwrap();
        let expect = g.commutator(&rho).unwrap().scale(c(eta));
        assert!(diff.sub(&expect).unwrap().max_abs() < 1e-16);
        assert!(evolve_small_eta(&rho, &g, eta, 3).is_err());
    }

    #[test]
    fn evolution_preserves_trace_and_hermiticity() {
        let ls = labels(&["S", "B"]);
        let g = beamsplitter_generator("S", "B", &ls, &[4, 5]).unwrap();
        let rho = tensor_product(
            &thermal_state(0.5, 4).unwrap().to_operator("S").unwrap(),
            &thermal_state(2.0, 5).unwrap().to_operator("B").unwrap(),
        )
        .unwrap();
        let out = evolve_small_eta(&rho, &g, 0.05, 2).unwrap();
        assert!((out.trace() - c(1.0)).norm() < 1e-12);
        assert!(out.hermiticity_deviation() < 1e-12);
    }

    #[test]
    fn first_order_quadrature_shift_for_coherent_probe() {
        // Coherent signal ⊗ thermal bath; reflected mode is the bath mode.
        let ds = 12;
        let db = 18;
        let alpha = Complex64::from_polar(0.8, 0.6);
        let mut psi = vec![c(0.0); ds];
        let mut w = (-alpha.norm_sqr() / 2.0).exp();
        let mut amp = c(1.0);
        for (n, slot) in psi.iter_mut().enumerate() {
            *slot = amp * w;
            amp *= alpha;
            w /= ((n + 1) as f64).sqrt();
        }
        let sig = projector(labels(&["S"]), vec![ds], &psi).unwrap();
        let bath = thermal_state(0.2, db).unwrap().to_operator("B").unwrap();
        let rho = tensor_product(&sig, &bath).unwrap();
        let g = beamsplitter_generator("S", "B", rho.mode_labels(), rho.dims()).unwrap();
        let eta = 1e-3;
        let evolved = evolve_small_eta(&rho, &g, eta, 1).unwrap();
        let reflected = partial_trace(&evolved, "S").unwrap();

        let phi: f64 = 0.25;
        let b = annihilation_matrix(db).unwrap();
        let quad = &b * Complex64::from_polar(1.0, -phi) + b.adjoint() * Complex64::from_polar(1.0, phi);
        let quad = DenseOperator::single_mode("B", quad).unwrap();
        let got = quad.expectation(&reflected).unwrap();

        let a_exp: Complex64 = (0..ds - 1)
            .map(|n| psi[n].conj() * psi[n + 1] * ((n + 1) as f64).sqrt())
            .sum();
        // ⟨b⟩ moves by −η⟨a⟩ under ρ + η[G,ρ].
        let expect = -eta
            * (a_exp * Complex64::from_polar(1.0, -phi) + a_exp.conj() * Complex64::from_polar(1.0, phi));
        assert!((got - expect).norm() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn full_partial_trace_equals_scalar_trace() {
        let a = thermal_state(0.4, 3).unwrap().to_operator("A").unwrap();
        let b = thermal_state(1.4, 2).unwrap().to_operator("B").unwrap();
        let ab = tensor_product(&a, &b).unwrap().scale(c(1.7));
        let once = partial_trace(&ab, "A").unwrap();
        let twice = partial_trace(&once, "B").unwrap();
        assert_eq!(twice.side(), 1);
        assert!((twice.get(0, 0) - ab.trace()).norm() < 1e-14);
    }
}
