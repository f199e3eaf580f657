//! Dense complex linear algebra and quantum-state utilities.
//!
//! Matrices are plain `nalgebra` dense matrices over `Complex<f64>`. The
//! types here add the invariants the rest of the crate leans on: normalized
//! bipartite pure states, weighted ensembles of them, and Hermitian
//! operators. Dimensions never exceed a few dozen, so everything is dense and
//! eigenvalues come from the cubic Hermitian eigensolver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Absolute tolerance for Hermiticity and state normalization checks.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues at or above `-PSD_TOL` count as nonnegative and are clipped to 0.
pub const PSD_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Builds a complex matrix from row-major real entries.
pub fn real_matrix(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(rows, cols, entries.iter().map(|&x| c(x, 0.0)))
}

pub fn pauli_x() -> CMatrix {
    real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn pauli_z() -> CMatrix {
    real_matrix(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let rows = a
        .nrows()
        .checked_mul(b.nrows())
        .ok_or(Error::DimensionOverflow(a.nrows(), b.nrows()))?;
    let cols = a
        .ncols()
        .checked_mul(b.ncols())
        .ok_or(Error::DimensionOverflow(a.ncols(), b.ncols()))?;
    // Element count must also be addressable.
    rows.checked_mul(cols)
        .ok_or(Error::DimensionOverflow(rows, cols))?;
    Ok(a.kronecker(b))
}

/// `Tr[m]`.
pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `Tr[a b]` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = c(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// A Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct HermOp(CMatrix);

impl HermOp {
    /// Wraps `m` after checking it is square and Hermitian within [`HERMITIAN_TOL`]
    /// (relative to the largest entry when that exceeds 1).
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("non-finite matrix entry".into()));
        }
        let scale = m.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
        let dev = hermitian_deviation(&m);
        if dev > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self(m))
    }

    /// Replaces `m` by `(m + m†)/2`. For products that are Hermitian in exact
    /// arithmetic but carry rounding noise.
    pub fn hermitize(m: &CMatrix) -> Self {
        Self((m + m.adjoint()) * c(0.5, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        trace(&self.0).re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Fails with [`Error::NotPsd`] if some eigenvalue is below `-PSD_TOL`.
    pub fn check_psd(&self) -> Result<()> {
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::NotPsd(min));
        }
        Ok(())
    }

    /// Trace norm `Σ|λ|`.
    pub fn trace_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|x| x.abs()).sum()
    }
}

impl std::ops::Sub for &HermOp {
    type Output = HermOp;
    fn sub(self, rhs: &HermOp) -> HermOp {
        HermOp(&self.0 - &rhs.0)
    }
}

/// Pure state on `C^dim_a ⊗ C^dim_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
    dim_a: usize,
    dim_b: usize,
}

impl PureState {
    pub fn new(amplitudes: CVector, dim_a: usize, dim_b: usize) -> Result<Self> {
        let expected = dim_a
            .checked_mul(dim_b)
            .ok_or(Error::DimensionOverflow(dim_a, dim_b))?;
        if amplitudes.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a {}x{} system",
                amplitudes.len(),
                dim_a,
                dim_b
            )));
        }
        let norm_sq = amplitudes.norm_squared();
        if (norm_sq - 1.0).abs() > HERMITIAN_TOL {
            return Err(Error::NotNormalized(norm_sq));
        }
        Ok(Self {
            amplitudes,
            dim_a,
            dim_b,
        })
    }

    /// Normalizes `amplitudes` before wrapping them.
    pub fn normalized(amplitudes: CVector, dim_a: usize, dim_b: usize) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm * norm));
        }
        Self::new(amplitudes.unscale(norm), dim_a, dim_b)
    }

    /// Computational basis state `|i⟩|j⟩`.
    pub fn basis(i: usize, j: usize, dim_a: usize, dim_b: usize) -> Result<Self> {
        if i >= dim_a || j >= dim_b {
            return Err(Error::OutOfRange(format!(
                "basis index ({i},{j}) outside {dim_a}x{dim_b}"
            )));
        }
        let mut v = CVector::zeros(dim_a * dim_b);
        v[i * dim_b + j] = c(1.0, 0.0);
        Self::new(v, dim_a, dim_b)
    }

    /// `(1/√d) Σ_k |k⟩|k⟩`.
    pub fn maximally_entangled(d: usize) -> Self {
        let mut v = CVector::zeros(d * d);
        let amp = 1.0 / (d as f64).sqrt();
        for k in 0..d {
            v[k * d + k] = c(amp, 0.0);
        }
        Self::normalized(v, d, d).expect("nonzero vector")
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn projector(&self) -> HermOp {
        HermOp::hermitize(&(&self.amplitudes * self.amplitudes.adjoint()))
    }
}

/// Finite ensemble `Σ_k w_k |ψ_k⟩⟨ψ_k|` of pure states on a common bipartite space.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedState {
    dim_a: usize,
    dim_b: usize,
    components: Vec<(f64, PureState)>,
}

impl MixedState {
    pub fn pure(state: PureState) -> Self {
        Self {
            dim_a: state.dim_a,
            dim_b: state.dim_b,
            components: vec![(1.0, state)],
        }
    }

    pub fn new(components: Vec<(f64, PureState)>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidStrategy("empty ensemble".into()))?;
        let (dim_a, dim_b) = (first.1.dim_a, first.1.dim_b);
        let mut total = 0.0;
        for (w, s) in &components {
            if !(*w >= 0.0) {
                return Err(Error::OutOfRange(format!("ensemble weight {w}")));
            }
            if s.dim_a != dim_a || s.dim_b != dim_b {
                return Err(Error::DimensionMismatch("ensemble members differ in shape".into()));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::OutOfRange(format!("ensemble weights sum to {total}")));
        }
        Ok(Self {
            dim_a,
            dim_b,
            components,
        })
    }

    /// `I/(dim_a·dim_b)` as a uniform mixture of product basis states.
    pub fn maximally_mixed(dim_a: usize, dim_b: usize) -> Self {
        let w = 1.0 / (dim_a * dim_b) as f64;
        let components = (0..dim_a)
            .flat_map(|i| (0..dim_b).map(move |j| (i, j)))
            .map(|(i, j)| (w, PureState::basis(i, j, dim_a, dim_b).expect("in range")))
            .collect();
        Self {
            dim_a,
            dim_b,
            components,
        }
    }

    /// Convex combination `(1-p)·self + p·other`.
    pub fn mix(&self, other: &MixedState, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange(format!("mixing weight {p}")));
        }
        if self.dim_a != other.dim_a || self.dim_b != other.dim_b {
            return Err(Error::DimensionMismatch("mixing states of different shape".into()));
        }
        let mut components: Vec<(f64, PureState)> = Vec::new();
        if p < 1.0 {
            components.extend(self.components.iter().map(|(w, s)| ((1.0 - p) * w, s.clone())));
        }
        if p > 0.0 {
            components.extend(other.components.iter().map(|(w, s)| (p * w, s.clone())));
        }
        Ok(Self {
            dim_a: self.dim_a,
            dim_b: self.dim_b,
            components,
        })
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn dim(&self) -> usize {
        self.dim_a * self.dim_b
    }

    pub fn components(&self) -> &[(f64, PureState)] {
        &self.components
    }

    /// The single pure component, if the ensemble has exactly one.
    pub fn as_pure(&self) -> Option<&PureState> {
        match self.components.as_slice() {
            [(_, s)] => Some(s),
            _ => None,
        }
    }

    pub fn density(&self) -> HermOp {
        let d = self.dim();
        let mut rho = CMatrix::zeros(d, d);
        for (w, s) in &self.components {
            let v = s.amplitudes();
            rho += (v * v.adjoint()) * c(*w, 0.0);
        }
        HermOp::hermitize(&rho)
    }

    /// `Tr[ρ M]` (real part).
    pub fn expect(&self, m: &CMatrix) -> f64 {
        self.components
            .iter()
            .map(|(w, s)| {
                let v = s.amplitudes();
                w * (v.adjoint() * m * v)[(0, 0)].re
            })
            .sum()
    }

    /// `√Tr[ρ M†M]`, the ensemble extension of `‖M|ψ⟩‖`.
    pub fn vector_norm(&self, m: &CMatrix) -> f64 {
        self.components
            .iter()
            .map(|(w, s)| w * (m * s.amplitudes()).norm_squared())
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }
}

/// `Tr_A[op]` for an operator on `C^dim_a ⊗ C^dim_b`.
pub fn partial_trace_a(op: &HermOp, dim_a: usize, dim_b: usize) -> Result<HermOp> {
    let total = dim_a
        .checked_mul(dim_b)
        .ok_or(Error::DimensionOverflow(dim_a, dim_b))?;
    if op.dim() != total {
        return Err(Error::DimensionMismatch(format!(
            "operator of dimension {} traced as {}x{}",
            op.dim(),
            dim_a,
            dim_b
        )));
    }
    let m = op.matrix();
    let mut out = CMatrix::zeros(dim_b, dim_b);
    for i in 0..dim_a {
        for j in 0..dim_b {
            for k in 0..dim_b {
                out[(j, k)] += m[(i * dim_b + j, i * dim_b + k)];
            }
        }
    }
    Ok(HermOp::hermitize(&out))
}

/// `(1/2) Σ|eig(ρ − σ)|`.
pub fn trace_distance(rho: &HermOp, sigma: &HermOp) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "trace distance between dimensions {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    // Both inputs went through HermOp construction; re-check the difference
    // so hand-built operators cannot slip through.
    let diff = HermOp::new(rho.matrix() - sigma.matrix())?;
    Ok(0.5 * diff.trace_norm())
}

/// Optimal probability of identifying which member of each pair was prepared,
/// when the pairs `(ρ_{0,z}, ρ_{1,z})` are subnormalized and jointly carry
/// total trace 1 and `z` is known to the guesser:
/// `Σ_z [(Tr ρ_{0,z} + Tr ρ_{1,z})/2 + D(ρ_{0,z}, ρ_{1,z})]`.
pub fn helstrom_guess(pairs: &[(HermOp, HermOp)]) -> Result<f64> {
    let mut total_trace = 0.0;
    let mut guess = 0.0;
    for (rho0, rho1) in pairs {
        for rho in [rho0, rho1] {
            rho.check_psd()?;
        }
        let (t0, t1) = (rho0.trace(), rho1.trace());
        total_trace += t0 + t1;
        guess += 0.5 * (t0 + t1) + trace_distance(rho0, rho1)?;
    }
    if (total_trace - 1.0).abs() > 1e-9 {
        return Err(Error::OutOfRange(format!(
            "ensemble total trace {total_trace}, expected 1"
        )));
    }
    Ok(guess.clamp(0.5, 1.0))
}

/// Projector onto the `+1` eigenspace of an involution `f`: `(I + f)/2`.
pub fn plus_projector(f: &CMatrix) -> CMatrix {
    (identity(f.nrows()) + f) * c(0.5, 0.0)
}

/// Projector onto the `-1` eigenspace of an involution `f`: `(I - f)/2`.
pub fn minus_projector(f: &CMatrix) -> CMatrix {
    (identity(f.nrows()) - f) * c(0.5, 0.0)
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Serializable form of a complex matrix: dimensions plus `[re, im]` pairs in
/// row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<[f64; 2]>,
}

impl From<&CMatrix> for MatrixRecord {
    fn from(m: &CMatrix) -> Self {
        let mut entries = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                entries.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            entries,
        }
    }
}

impl TryFrom<&MatrixRecord> for CMatrix {
    type Error = Error;
    fn try_from(r: &MatrixRecord) -> Result<CMatrix> {
        if r.entries.len() != r.rows * r.cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {}x{} matrix",
                r.entries.len(),
                r.rows,
                r.cols
            )));
        }
        Ok(CMatrix::from_row_iterator(
            r.rows,
            r.cols,
            r.entries.iter().map(|[re, im]| c(*re, *im)),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag(v: &[f64]) -> HermOp {
        HermOp::new(CMatrix::from_diagonal(&CVector::from_iterator(
            v.len(),
            v.iter().map(|&x| c(x, 0.0)),
        )))
        .unwrap()
    }

    #[test]
    fn tensor_of_identities_and_diagonals() {
        assert_eq!(tensor(&identity(2), &identity(2)).unwrap(), identity(4));
        let d = tensor(diag(&[1.0, 0.0]).matrix(), diag(&[0.0, 1.0]).matrix()).unwrap();
        assert_eq!(d, diag(&[0.0, 1.0, 0.0, 0.0]).into_matrix());
    }

    #[test]
    fn x_tensor_z_maps_bell_state_to_orthogonal_state() {
        // Hand computation: (X⊗Z)(|00⟩+|11⟩)/√2 = (|10⟩ - |01⟩)/√2.
        let phi = PureState::maximally_entangled(2);
        let out = tensor(&pauli_x(), &pauli_z()).unwrap() * phi.amplitudes();
        let s = 1.0 / 2f64.sqrt();
        let expected = CVector::from_vec(vec![c(0.0, 0.0), c(-s, 0.0), c(s, 0.0), c(0.0, 0.0)]);
        assert!((out.clone() - expected).norm() < 1e-15);
        assert!((phi.amplitudes().adjoint() * out)[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let rho = PureState::maximally_entangled(2).projector();
        let red = partial_trace_a(&rho, 2, 2).unwrap();
        assert!(max_abs_diff(red.matrix(), &(identity(2) * c(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn partial_trace_of_product() {
        let ra = diag(&[0.2, 0.3]);
        let rb = HermOp::new(real_matrix(2, 2, &[0.7, 0.1, 0.1, 0.3])).unwrap();
        let prod = HermOp::new(tensor(ra.matrix(), rb.matrix()).unwrap()).unwrap();
        let red = partial_trace_a(&prod, 2, 2).unwrap();
        assert!(max_abs_diff(red.matrix(), &(rb.matrix() * c(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn partial_trace_dimension_mismatch() {
        let rho = diag(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            partial_trace_a(&rho, 2, 2),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn trace_distance_examples() {
        let r = diag(&[0.3, 0.7]);
        assert_abs_diff_eq!(trace_distance(&r, &r).unwrap(), 0.0);
        assert_abs_diff_eq!(
            trace_distance(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0])).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            trace_distance(&diag(&[0.5, 0.5]), &diag(&[0.75, 0.25])).unwrap(),
            0.25,
            epsilon = 1e-15
        );
    }

    #[test]
    fn non_hermitian_input_rejected() {
        let m = real_matrix(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(HermOp::new(m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn helstrom_examples() {
        let half = diag(&[0.25, 0.25]);
        assert_abs_diff_eq!(
            helstrom_guess(&[(half.clone(), half)]).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let p0 = diag(&[0.5, 0.0]);
        let p1 = diag(&[0.0, 0.5]);
        assert_abs_diff_eq!(helstrom_guess(&[(p0, p1)]).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn helstrom_rejects_negative_operators() {
        let bad = diag(&[0.6, -0.1]);
        let ok = diag(&[0.25, 0.25]);
        assert!(matches!(helstrom_guess(&[(bad, ok)]), Err(Error::NotPsd(_))));
    }

    #[test]
    fn helstrom_matches_povm_search_on_qubits() {
        // Independent route: brute-force over projective two-outcome measurements
        // on the Bloch sphere (rank-one or trivial POVM elements suffice for qubits).
        let rho0 = HermOp::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.3, 0.0), c(0.1, 0.05), c(0.1, -0.05), c(0.1, 0.0)],
        ))
        .unwrap();
        let rho1 = HermOp::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.2, 0.0), c(-0.05, 0.1), c(-0.05, -0.1), c(0.4, 0.0)],
        ))
        .unwrap();
        let exact = helstrom_guess(&[(rho0.clone(), rho1.clone())]).unwrap();
        let mut best = rho0.trace().max(rho1.trace());
        let steps = 400;
        for i in 0..=steps {
            let theta = std::f64::consts::PI * i as f64 / steps as f64;
            for j in 0..(2 * steps) {
                let phi = std::f64::consts::PI * j as f64 / steps as f64;
                let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
                let obs = pauli_x() * c(n[0], 0.0) + pauli_y() * c(n[1], 0.0) + pauli_z() * c(n[2], 0.0);
                let m0 = plus_projector(&obs);
                let m1 = minus_projector(&obs);
                let p = trace_product(&m0, rho0.matrix()).re + trace_product(&m1, rho1.matrix()).re;
                best = best.max(p);
            }
        }
        assert!(best <= exact + 1e-12);
        assert!(exact - best < 1e-4, "exact {exact} vs search {best}");
    }

    #[test]
    fn pure_state_requires_normalization() {
        let v = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(PureState::new(v.clone(), 2, 2), Err(Error::NotNormalized(_))));
        assert!(PureState::normalized(v, 2, 2).is_ok());
    }

    #[test]
    fn matrix_record_round_trip() {
        let m = tensor(&pauli_y(), &pauli_x()).unwrap();
        let rec = MatrixRecord::from(&m);
        let back = CMatrix::try_from(&rec).unwrap();
        assert_eq!(m, back);
    }
}
