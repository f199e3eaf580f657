//! Semidefinite programming over real symmetric matrices.
//!
//! [`SdpProblem`] is the standard primal form
//!
//! ```text
//! maximize ⟨C, X⟩  subject to  ⟨A_i, X⟩ = b_i,  X ⪰ 0
//! ```
//!
//! solved by a Mehrotra predictor-corrector interior-point method with
//! Nesterov–Todd scaling. Its dual is `minimize bᵀy` subject to
//! `S = Σ y_i A_i − C ⪰ 0`.
//!
//! [`MomentProblem`] is the moment form used by the NPA hierarchy: the matrix
//! cells are partitioned into classes sharing one value, some classes fixed.
//! It can be lowered to an [`SdpProblem`] or solved directly by ADMM, which
//! scales to instances whose Schur complement would not fit in memory.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetry tolerance for dense input matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative pivot below which a constraint is treated as dependent.
pub const PIVOT_TOL: f64 = 1e-10;
/// Fraction-to-boundary step factor.
pub const STEP_FRACTION: f64 = 0.98;
/// Largest dual residual accepted by [`certify`].
pub const MAX_CERTIFIED_RESIDUAL: f64 = 1e-7;

/// Real symmetric matrix stored as lower-triangle triplets `(i, j, v)` with
/// `i ≥ j`; the entry `v` sits at both `(i, j)` and `(j, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymSparse {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymSparse {
    /// Builds from triplets in either triangle. Repeated positions are summed.
    pub fn new(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch(format!("entry ({i},{j}) outside {n}x{n}")));
            }
            if !v.is_finite() {
                return Err(Error::Numerical(format!("non-finite entry at ({i},{j})")));
            }
            entries.push((i.max(j), i.min(j), v));
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        Ok(Self { n, entries: merged })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", n, m.ncols())));
        }
        let scale = m.amax().max(1.0);
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..=i {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::NotHermitian((m[(i, j)] - m[(j, i)]).abs()));
                }
                trip.push((i, j, m[(i, j)]));
            }
        }
        Self::new(n, trip)
    }

    /// Lower triangle in row-major order: `(0,0), (1,0), (1,1), (2,0), …`.
    pub fn from_lower_triangle(n: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * (n + 1) / 2 {
            return Err(Error::DimensionMismatch(format!(
                "lower triangle of a {n}x{n} matrix needs {} values, got {}",
                n * (n + 1) / 2,
                values.len()
            )));
        }
        let mut k = 0;
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..=i {
                trip.push((i, j, values[k]));
                k += 1;
            }
        }
        Self::new(n, trip)
    }

    pub fn lower_triangle(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * (self.n + 1) / 2];
        for &(i, j, v) in &self.entries {
            out[i * (i + 1) / 2 + j] = v;
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        self.add_to(1.0, &mut m);
        m
    }

    /// `out += alpha · self`.
    pub fn add_to(&self, alpha: f64, out: &mut DMatrix<f64>) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += alpha * v;
            if i != j {
                out[(j, i)] += alpha * v;
            }
        }
    }

    /// Trace inner product `⟨self, x⟩` with a symmetric `x`.
    pub fn inner(&self, x: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * x[(i, i)] } else { 2.0 * v * x[(i, j)] })
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }

    /// `W · self · W` for symmetric `w`.
    fn congruence(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        if self.entries.len() > n {
            let a = self.to_dense();
            return w * a * w;
        }
        let mut out = DMatrix::zeros(n, n);
        for &(p, q, v) in &self.entries {
            for c in 0..n {
                let (wpc, wqc) = (w[(p, c)], w[(q, c)]);
                for r in 0..n {
                    if p == q {
                        out[(r, c)] += v * w[(r, p)] * wpc;
                    } else {
                        out[(r, c)] += v * (w[(r, p)] * wqc + w[(r, q)] * wpc);
                    }
                }
            }
        }
        out
    }
}

/// Standard-form SDP with equality constraints `⟨A_i, X⟩ = b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    n: usize,
    objective: SymSparse,
    constraints: Vec<(SymSparse, f64)>,
}

impl SdpProblem {
    pub fn new(n: usize, objective: SymSparse, constraints: Vec<(SymSparse, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::DimensionMismatch("matrix dimension must be positive".into()));
        }
        if objective.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "objective is {0}x{0}, problem is {n}x{n}",
                objective.dim()
            )));
        }
        for (k, (a, b)) in constraints.iter().enumerate() {
            if a.dim() != n {
                return Err(Error::DimensionMismatch(format!("constraint {k} is {0}x{0}", a.dim())));
            }
            if !b.is_finite() {
                return Err(Error::Numerical(format!("constraint {k} has non-finite rhs")));
            }
        }
        Ok(Self {
            n,
            objective,
            constraints,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn objective(&self) -> &SymSparse {
        &self.objective
    }

    pub fn constraints(&self) -> &[(SymSparse, f64)] {
        &self.constraints
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn rhs(&self) -> DVector<f64> {
        DVector::from_iterator(self.constraints.len(), self.constraints.iter().map(|c| c.1))
    }

    /// `A(X) = (⟨A_i, X⟩)_i`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.constraints.len(), self.constraints.iter().map(|(a, _)| a.inner(x)))
    }

    /// `A*(y) = Σ y_i A_i`.
    pub fn adjoint(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for ((a, _), &yi) in self.constraints.iter().zip(y.iter()) {
            if yi != 0.0 {
                a.add_to(yi, &mut m);
            }
        }
        m
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&SdpRecord::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: SdpRecord = serde_json::from_str(s)?;
        SdpProblem::try_from(&rec)
    }
}

/// JSON schema: every matrix is its lower triangle, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpRecord {
    pub n: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<ConstraintRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub a: Vec<f64>,
    pub b: f64,
}

impl From<&SdpProblem> for SdpRecord {
    fn from(p: &SdpProblem) -> Self {
        Self {
            n: p.n,
            objective: p.objective.lower_triangle(),
            constraints: p
                .constraints
                .iter()
                .map(|(a, b)| ConstraintRecord {
                    a: a.lower_triangle(),
                    b: *b,
                })
                .collect(),
        }
    }
}

impl TryFrom<&SdpRecord> for SdpProblem {
    type Error = Error;
    fn try_from(r: &SdpRecord) -> Result<Self> {
        let constraints = r
            .constraints
            .iter()
            .map(|c| Ok((SymSparse::from_lower_triangle(r.n, &c.a)?, c.b)))
            .collect::<Result<Vec<_>>>()?;
        SdpProblem::new(r.n, SymSparse::from_lower_triangle(r.n, &r.objective)?, constraints)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    InfeasibleSuspected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: DMatrix<f64>,
    /// Multipliers for every original constraint; dropped dependent rows get 0.
    pub y: DVector<f64>,
    pub s: DMatrix<f64>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl SdpSolution {
    pub fn gap(&self) -> f64 {
        (self.primal_obj - self.dual_obj).abs()
    }
}

/// Indices of a maximal independent subset of the constraints, chosen greedily
/// in order by Gram–Schmidt. Fails if a dependent row has an inconsistent rhs.
pub fn independent_constraints(p: &SdpProblem) -> Result<Vec<usize>> {
    let len = p.n * (p.n + 1) / 2;
    let svec_index = |i: usize, j: usize| i * (i + 1) / 2 + j;
    let sparse_svec = |a: &SymSparse| -> Vec<(usize, f64)> {
        a.entries()
            .iter()
            .map(|&(i, j, v)| (svec_index(i, j), if i == j { v } else { v * std::f64::consts::SQRT_2 }))
            .collect()
    };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut basis_rhs: Vec<f64> = Vec::new();
    let mut kept = Vec::new();
    for (k, (a, b)) in p.constraints.iter().enumerate() {
        let sv = sparse_svec(a);
        let norm = a.frobenius_norm();
        if norm == 0.0 {
            if b.abs() > 1e-8 {
                return Err(Error::Infeasible(format!("constraint {k} reads 0 = {b}")));
            }
            continue;
        }
        let mut r = vec![0.0; len];
        for &(idx, v) in &sv {
            r[idx] = v;
        }
        let mut beta = *b;
        for _pass in 0..2 {
            for (q, qb) in basis.iter().zip(&basis_rhs) {
                let coef: f64 = r.iter().zip(q).map(|(x, y)| x * y).sum();
                if coef != 0.0 {
                    for (ri, qi) in r.iter_mut().zip(q) {
                        *ri -= coef * qi;
                    }
                    beta -= coef * qb;
                }
            }
        }
        let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if rn <= PIVOT_TOL * norm {
            if beta.abs() > 1e-8 * (1.0 + b.abs()) {
                return Err(Error::Infeasible(format!(
                    "constraint {k} is a combination of earlier ones with inconsistent rhs (residual {beta:e})"
                )));
            }
            continue;
        }
        r.iter_mut().for_each(|x| *x /= rn);
        basis.push(r);
        basis_rhs.push(beta / rn);
        kept.push(k);
    }
    Ok(kept)
}

/// Largest `α` such that `M + αΔ ⪰ 0`, given the Cholesky factor's inverse of `M`.
fn max_step(l_inv: &DMatrix<f64>, delta: &DMatrix<f64>) -> f64 {
    let mut t = l_inv * delta * l_inv.transpose();
    t = (&t + t.transpose()) * 0.5;
    let lmin = SymmetricEigen::new(t).eigenvalues.min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn lower_inverse(l: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    l.solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix;
/// only the lower triangle is read.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let fm = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let eig = fm
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let (vals, vecs) = (eig.S(), eig.U());
    Ok((
        DVector::from_fn(n, |i, _| vals[i]),
        DMatrix::from_fn(n, n, |i, j| vecs[(i, j)]),
    ))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    match sym_eigen(&symmetrize(m)) {
        Ok((vals, _)) => vals.min(),
        Err(_) => SymmetricEigen::new(symmetrize(m)).eigenvalues.min(),
    }
}

/// `Σ_k f(λ_k) u_k u_kᵀ` over the eigenpairs with `f(λ_k) > 0`.
fn spectral_part(vals: &DVector<f64>, vecs: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = vecs.nrows();
    let keep: Vec<(usize, f64)> = vals.iter().enumerate().map(|(k, &l)| (k, f(l))).filter(|&(_, w)| w > 0.0).collect();
    let mut half = DMatrix::zeros(n, keep.len());
    for (c, &(k, w)) in keep.iter().enumerate() {
        let r = w.sqrt();
        for i in 0..n {
            half[(i, c)] = vecs[(i, k)] * r;
        }
    }
    &half * half.transpose()
}

/// Primal-dual interior-point solve.
pub fn solve(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    let kept = independent_constraints(p)?;
    let reduced = SdpProblem {
        n: p.n,
        objective: p.objective.clone(),
        constraints: kept.iter().map(|&k| p.constraints[k].clone()).collect(),
    };
    let sol = solve_reduced(&reduced, opts)?;
    let mut y = DVector::zeros(p.constraints.len());
    for (pos, &k) in kept.iter().enumerate() {
        y[k] = sol.y[pos];
    }
    Ok(SdpSolution { y, ..sol })
}

struct Residuals {
    rp: DVector<f64>,
    rd: DMatrix<f64>,
    pinf: f64,
    dinf: f64,
    pobj: f64,
    dobj: f64,
}

fn residuals(p: &SdpProblem, c: &DMatrix<f64>, b: &DVector<f64>, x: &DMatrix<f64>, y: &DVector<f64>, s: &DMatrix<f64>) -> Residuals {
    let rp = b - p.apply(x);
    let rd = p.adjoint(y) - s - c;
    Residuals {
        pinf: rp.norm() / (1.0 + b.norm()),
        dinf: rd.norm() / (1.0 + c.norm()),
        pobj: c.dot(x),
        dobj: b.dot(y),
        rp,
        rd,
    }
}

fn solve_reduced(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    let n = p.n;
    let m = p.constraints.len();
    let c = p.objective.to_dense();
    let b = p.rhs();
    let nf = n as f64;

    let max_a = p.constraints.iter().map(|(a, _)| a.frobenius_norm()).fold(0.0, f64::max);
    let mut xi = 10f64.max(nf.sqrt());
    for (a, bk) in &p.constraints {
        xi = xi.max(nf * (1.0 + bk.abs()) / (1.0 + a.frobenius_norm()));
    }
    let eta = 10f64.max(nf.sqrt()).max(c.norm()).max(max_a);
    let mut x = DMatrix::identity(n, n) * xi;
    let mut s = DMatrix::identity(n, n) * eta;
    let mut y = DVector::zeros(m);

    // Best iterate so far by max(primal infeasibility, dual infeasibility,
    // relative gap); returned when the run ends without converging.
    let mut best: Option<(f64, usize, DMatrix<f64>, DVector<f64>, DMatrix<f64>)> = None;
    let mut since_best = 0;
    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;
    let mut stalls = 0;
    let mut broke_down = false;
    for it in 0..=opts.max_iter {
        let r = residuals(p, &c, &b, &x, &y, &s);
        let rel_gap = (r.pobj - r.dobj).abs() / (1.0 + r.pobj.abs() + r.dobj.abs());
        iterations = it;
        let score = r.pinf.max(r.dinf).max(rel_gap);
        if score <= opts.tol {
            status = SolveStatus::Optimal;
            best = None;
            break;
        }
        if best.as_ref().is_none_or(|bst| score < bst.0) {
            best = Some((score, it, x.clone(), y.clone(), s.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 5 {
                break;
            }
        }
        if x.amax() > 1e12 || s.amax() > 1e12 || y.amax() > 1e12 {
            status = SolveStatus::InfeasibleSuspected;
            break;
        }
        if it == opts.max_iter {
            break;
        }

        let mu = x.dot(&s) / nf;
        let (Some(cx), Some(cs)) = (Cholesky::new(x.clone()), Cholesky::new(s.clone())) else {
            broke_down = true;
            break;
        };
        let l = cx.l();
        let rr = cs.l();
        let (Some(l_inv), Some(r_inv)) = (lower_inverse(&l), lower_inverse(&rr)) else {
            return Err(Error::Numerical("triangular inverse failed".into()));
        };
        let svd = (rr.transpose() * &l).svd(false, true);
        let Some(v_t) = svd.v_t else {
            return Err(Error::Numerical("SVD failed".into()));
        };
        let d = svd.singular_values;
        if d.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            broke_down = true;
            break;
        }
        let v_mat = v_t.transpose();
        let d_inv_sqrt = DMatrix::from_diagonal(&d.map(|v| 1.0 / v.sqrt()));
        let d_sqrt = DMatrix::from_diagonal(&d.map(f64::sqrt));
        let g = &l * &v_mat * d_inv_sqrt;
        let g_inv = d_sqrt * v_mat.transpose() * &l_inv;
        let w = symmetrize(&(&g * g.transpose()));

        let mut schur = DMatrix::zeros(m, m);
        for j in 0..m {
            let waw = p.constraints[j].0.congruence(&w);
            for k in j..m {
                let v = p.constraints[k].0.inner(&waw);
                schur[(k, j)] = v;
                schur[(j, k)] = v;
            }
        }
        let chol = match Cholesky::new(schur.clone()) {
            Some(ch) => ch,
            None => {
                let shift = 1e-14 * schur.trace().abs().max(1.0);
                match Cholesky::new(schur + DMatrix::identity(m, m) * shift) {
                    Some(ch) => ch,
                    None => {
                        broke_down = true;
                        break;
                    }
                }
            }
        };
        let wrdw = &w * &r.rd * &w;
        let a_wrdw = p.apply(&wrdw);
        let direction = |rc: &DMatrix<f64>| {
            let rhs = p.apply(rc) - &a_wrdw - &r.rp;
            let dy = chol.solve(&rhs);
            let ds = p.adjoint(&dy) + &r.rd;
            let dx = symmetrize(&(rc - &w * &ds * &w));
            (dx, dy, ds)
        };
        let scaled_rhs = |rmat: &DMatrix<f64>| {
            let mut rhat = rmat.clone();
            for i in 0..n {
                for j in 0..n {
                    rhat[(i, j)] *= 2.0 / (d[i] + d[j]);
                }
            }
            symmetrize(&(&g * rhat * g.transpose()))
        };

        let rc_pred = -x.clone();
        let (dx_p, _, ds_p) = direction(&rc_pred);
        let ap = (STEP_FRACTION * max_step(&l_inv, &dx_p)).min(1.0);
        let ad = (STEP_FRACTION * max_step(&r_inv, &ds_p)).min(1.0);
        let mu_aff = (&x + &dx_p * ap).dot(&(&s + &ds_p * ad)) / nf;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let dxt = &g_inv * &dx_p * g_inv.transpose();
        let dst = g.transpose() * &ds_p * &g;
        let mut rmat = -symmetrize(&(dxt * dst));
        for i in 0..n {
            rmat[(i, i)] += sigma * mu - d[i] * d[i];
        }
        let rc = scaled_rhs(&rmat);
        let (dx, dy, ds) = direction(&rc);
        let ap = (STEP_FRACTION * max_step(&l_inv, &dx)).min(1.0);
        let ad = (STEP_FRACTION * max_step(&r_inv, &ds)).min(1.0);
        if ap < 1e-8 && ad < 1e-8 {
            stalls += 1;
            if stalls >= 3 {
                broke_down = true;
                break;
            }
        } else {
            stalls = 0;
        }
        x = symmetrize(&(&x + dx * ap));
        y += dy * ad;
        s = symmetrize(&(&s + ds * ad));
    }
    if let Some((score, it, bx, by, bs)) = best {
        if broke_down && score > opts.tol.sqrt() {
            status = SolveStatus::InfeasibleSuspected;
        }
        iterations = it;
        x = bx;
        y = by;
        s = bs;
    }
    let r = residuals(p, &c, &b, &x, &y, &s);
    Ok(SdpSolution {
        x,
        y,
        s,
        primal_obj: r.pobj,
        dual_obj: r.dobj,
        status,
        iterations,
        primal_residual: r.pinf,
        dual_residual: r.dinf,
    })
}

/// Rigorous upper bound from a dual point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub bound: f64,
    pub dual_obj: f64,
    pub min_slack_eigenvalue: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

/// `bᵀy + n·max(0, −λ_min(Σ y_i A_i − C))`. For any feasible `X`,
/// `⟨C,X⟩ = bᵀy − ⟨S,X⟩ ≤ bᵀy + |λ_min(S)|·Tr X`, so the value bounds the
/// maximum whenever feasible points satisfy `Tr X ≤ n` (true for moment
/// matrices, whose diagonal entries are at most 1).
pub fn certify(p: &SdpProblem, sol: &SdpSolution) -> Result<Certificate> {
    if sol.status == SolveStatus::InfeasibleSuspected {
        return Err(Error::Uncertified("solver reported suspected infeasibility".into()));
    }
    if sol.dual_residual > MAX_CERTIFIED_RESIDUAL {
        return Err(Error::Uncertified(format!(
            "dual residual {:e} exceeds {MAX_CERTIFIED_RESIDUAL:e}",
            sol.dual_residual
        )));
    }
    let c = p.objective.to_dense();
    let slack = p.adjoint(&sol.y) - c;
    let lmin = min_eigenvalue(&slack);
    let dual_obj = p.rhs().dot(&sol.y);
    let bound = dual_obj + p.n as f64 * (-lmin).max(0.0);
    Ok(Certificate {
        bound,
        dual_obj,
        min_slack_eigenvalue: lmin,
        dual_residual: sol.dual_residual,
        gap: sol.gap(),
    })
}

pub fn certified_upper_bound(p: &SdpProblem, opts: &SolverOptions) -> Result<f64> {
    let sol = solve(p, opts)?;
    Ok(certify(p, &sol)?.bound)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PinMode {
    Equal,
    AtLeast,
}

/// Linear side constraint `Σ_w g_w y_w = rhs` (or `≥ rhs`) on class values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPin {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub mode: PinMode,
}

/// `maximize Σ_w c_w y_w` over class values `y` such that the matrix `Γ(y)`
/// with `Γ_ij = y_{class(i,j)}` is PSD, fixed classes hold their values and
/// the optional pin holds.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentProblem {
    n: usize,
    class_of: Vec<usize>,
    class_weight: Vec<f64>,
    representative: Vec<(usize, usize)>,
    fixed: Vec<Option<f64>>,
    objective: Vec<f64>,
    pin: Option<LinearPin>,
    entry_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    InteriorPoint,
    Admm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub sigma: f64,
    pub relaxation: f64,
    pub check_every: usize,
    /// Anderson acceleration memory; 0 runs plain ADMM.
    pub anderson: usize,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 20_000,
            sigma: 1.0,
            relaxation: 1.6,
            check_every: 25,
            anderson: 0,
        }
    }
}

/// Iterate of the ADMM solver, reusable as a warm start.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub s: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSolution {
    pub moments: Vec<f64>,
    pub objective: f64,
    /// Certified upper bound on the maximum.
    pub bound: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub method: Method,
    pub state: Option<AdmmState>,
}

impl MomentProblem {
    /// `classes[w]` lists the cells `(i, j)` of class `w`; together the classes
    /// must cover every cell of the upper triangle exactly once (either
    /// orientation accepted).
    pub fn new(
        n: usize,
        classes: &[Vec<(usize, usize)>],
        fixed: Vec<Option<f64>>,
        objective: Vec<f64>,
        pin: Option<LinearPin>,
    ) -> Result<Self> {
        let nc = classes.len();
        if fixed.len() != nc || objective.len() != nc {
            return Err(Error::DimensionMismatch(format!(
                "{nc} classes but {} fixed flags and {} objective coefficients",
                fixed.len(),
                objective.len()
            )));
        }
        if let Some(pin) = &pin {
            if pin.coeffs.len() != nc {
                return Err(Error::DimensionMismatch("pin length differs from class count".into()));
            }
        }
        let mut class_of = vec![usize::MAX; n * n];
        let mut class_weight = vec![0.0; nc];
        let mut representative = Vec::with_capacity(nc);
        for (w, cells) in classes.iter().enumerate() {
            let first = *cells
                .first()
                .ok_or_else(|| Error::DimensionMismatch(format!("class {w} is empty")))?;
            representative.push((first.0.min(first.1), first.0.max(first.1)));
            for &(i, j) in cells {
                if i >= n || j >= n {
                    return Err(Error::DimensionMismatch(format!("cell ({i},{j}) outside {n}x{n}")));
                }
                if class_of[i * n + j] != usize::MAX {
                    return Err(Error::DimensionMismatch(format!("cell ({i},{j}) assigned twice")));
                }
                class_of[i * n + j] = w;
                class_of[j * n + i] = w;
                class_weight[w] += if i == j { 1.0 } else { 2.0 };
            }
        }
        if class_of.contains(&usize::MAX) {
            return Err(Error::DimensionMismatch("classes do not cover the matrix".into()));
        }
        Ok(Self {
            n,
            class_of,
            class_weight,
            representative,
            fixed,
            objective,
            pin,
            entry_bound: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_classes(&self) -> usize {
        self.class_weight.len()
    }

    pub fn class_of(&self, i: usize, j: usize) -> usize {
        self.class_of[i * self.n + j]
    }

    pub fn pin(&self) -> Option<&LinearPin> {
        self.pin.as_ref()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    /// Bound `e` with `|Γ_ij| ≤ e` on the feasible set (1 for moment matrices
    /// of projector words), used by the certificates.
    pub fn entry_bound(&self) -> f64 {
        self.entry_bound
    }

    pub fn with_entry_bound(mut self, e: f64) -> Self {
        self.entry_bound = e;
        self
    }

    pub fn with_pin(&self, pin: Option<LinearPin>) -> Result<Self> {
        if let Some(p) = &pin {
            if p.coeffs.len() != self.num_classes() {
                return Err(Error::DimensionMismatch("pin length differs from class count".into()));
            }
        }
        Ok(Self { pin, ..self.clone() })
    }

    pub fn gamma(&self, y: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| y[self.class_of[i * self.n + j]])
    }

    /// `(⟨M, F_w⟩)_w` where `F_w` is the 0/1 indicator of class `w`.
    pub fn class_sums(&self, m: &DMatrix<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.num_classes()];
        for j in 0..self.n {
            for i in 0..self.n {
                out[self.class_of[i * self.n + j]] += m[(i, j)];
            }
        }
        out
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.iter().zip(y).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of the PSD, fixed-value and pin constraints.
    pub fn feasibility_residual(&self, y: &[f64]) -> f64 {
        let mut worst = (-min_eigenvalue(&self.gamma(y))).max(0.0);
        for (f, v) in self.fixed.iter().zip(y) {
            if let Some(f) = f {
                worst = worst.max((f - v).abs());
            }
        }
        if let Some(pin) = &self.pin {
            let lhs: f64 = pin.coeffs.iter().zip(y).map(|(g, v)| g * v).sum();
            let viol = match pin.mode {
                PinMode::Equal => (lhs - pin.rhs).abs(),
                PinMode::AtLeast => (pin.rhs - lhs).max(0.0),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Standard form with `X = Γ`: every non-representative cell equals its
    /// class representative, fixed representatives hold their values, and the
    /// pin becomes one more equality.
    pub fn to_sdp_problem(&self) -> Result<SdpProblem> {
        let n = self.n;
        let half = |i: usize, j: usize, v: f64| if i == j { (i, j, v) } else { (i, j, v / 2.0) };
        let mut constraints = Vec::new();
        for (w, &(ri, rj)) in self.representative.iter().enumerate() {
            if let Some(v) = self.fixed[w] {
                constraints.push((SymSparse::new(n, [half(ri, rj, 1.0)])?, v));
            }
        }
        for j in 0..n {
            for i in 0..=j {
                let w = self.class_of[i * n + j];
                let (ri, rj) = self.representative[w];
                if (ri, rj) != (i, j) {
                    constraints.push((SymSparse::new(n, [half(i, j, 1.0), half(ri, rj, -1.0)])?, 0.0));
                }
            }
        }
        if let Some(pin) = &self.pin {
            if pin.mode != PinMode::Equal {
                return Err(Error::Unsupported("inequality pin in standard form".into()));
            }
            let trip: Vec<_> = pin
                .coeffs
                .iter()
                .enumerate()
                .filter(|(_, g)| **g != 0.0)
                .map(|(w, &g)| half(self.representative[w].0, self.representative[w].1, g))
                .collect();
            constraints.push((SymSparse::new(n, trip)?, pin.rhs));
        }
        let obj: Vec<_> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(w, &c)| half(self.representative[w].0, self.representative[w].1, c))
            .collect();
        SdpProblem::new(n, SymSparse::new(n, obj)?, constraints)
    }

    /// Interior-point solve through [`to_sdp_problem`](Self::to_sdp_problem).
    pub fn solve_ipm(&self, opts: &SolverOptions) -> Result<MomentSolution> {
        let sdp = self.to_sdp_problem()?;
        let sol = solve(&sdp, opts)?;
        let cert = certify(&sdp, &sol)?;
        let moments: Vec<f64> = self
            .representative
            .iter()
            .map(|&(i, j)| sol.x[(i, j)])
            .collect();
        Ok(MomentSolution {
            objective: self.objective_value(&moments),
            moments,
            bound: cert.bound.max(sol.primal_obj),
            gap: sol.gap(),
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            iterations: sol.iterations,
            status: sol.status,
            method: Method::InteriorPoint,
            state: None,
        })
    }

    fn initial_state(&self, sigma: f64) -> AdmmState {
        let y: Vec<f64> = self.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
        AdmmState {
            s: symmetrize(&self.gamma(&y)),
            lambda: DMatrix::zeros(self.n, self.n),
            sigma,
        }
    }

    /// Closed-form minimizer of the augmented Lagrangian in `y`. Returns the
    /// class values and the pin multiplier.
    fn y_update(&self, s: &DMatrix<f64>, lambda: &DMatrix<f64>, sigma: f64) -> Result<(Vec<f64>, f64)> {
        let ssum = self.class_sums(s);
        let lsum = self.class_sums(lambda);
        let mut y: Vec<f64> = (0..self.num_classes())
            .map(|w| match self.fixed[w] {
                Some(v) => v,
                None => (self.objective[w] + sigma * ssum[w] - lsum[w]) / (sigma * self.class_weight[w]),
            })
            .collect();
        let mut mu = 0.0;
        if let Some(pin) = &self.pin {
            let mut lhs = 0.0;
            let mut denom = 0.0;
            for (w, &g) in pin.coeffs.iter().enumerate() {
                lhs += g * y[w];
                if self.fixed[w].is_none() {
                    denom += g * g / (sigma * self.class_weight[w]);
                }
            }
            let need = pin.rhs - lhs;
            if denom == 0.0 {
                let ok = match pin.mode {
                    PinMode::Equal => need.abs() <= 1e-12,
                    PinMode::AtLeast => need <= 1e-12,
                };
                if !ok {
                    return Err(Error::Infeasible("pin involves only fixed classes and is violated".into()));
                }
            } else {
                mu = need / denom;
                if pin.mode == PinMode::AtLeast {
                    mu = mu.max(0.0);
                }
                for (w, &g) in pin.coeffs.iter().enumerate() {
                    if self.fixed[w].is_none() {
                        y[w] += mu * g / (sigma * self.class_weight[w]);
                    }
                }
            }
        }
        Ok((y, mu))
    }

    /// Certified bound from a PSD multiplier estimate `z` and pin multiplier
    /// `nu`: `z` is shifted uniformly on each free class so that stationarity
    /// `c_w + ⟨Z, F_w⟩ − ν g_w = 0` holds exactly, and the remaining negative
    /// spectrum is charged against the trace bound. Returns `(bound, repair)`
    /// where `repair` is the relative size of the shift.
    pub fn certify_dual(&self, z: &DMatrix<f64>, nu: f64) -> (f64, f64) {
        let n = self.n;
        let zsum = self.class_sums(z);
        let g = |w: usize| self.pin.as_ref().map_or(0.0, |p| p.coeffs[w]);
        let shift: Vec<f64> = (0..self.num_classes())
            .map(|w| match self.fixed[w] {
                Some(_) => 0.0,
                None => (nu * g(w) - self.objective[w] - zsum[w]) / self.class_weight[w],
            })
            .collect();
        let mut zr = z.clone();
        let mut repair = 0.0;
        for j in 0..n {
            for i in 0..n {
                let d = shift[self.class_of[i * n + j]];
                zr[(i, j)] += d;
                repair += d * d;
            }
        }
        let zsum_r = self.class_sums(&zr);
        let mut bound = self.pin.as_ref().map_or(0.0, |p| nu * p.rhs);
        for (w, f) in self.fixed.iter().enumerate() {
            if let Some(v) = f {
                bound += (self.objective[w] + zsum_r[w] - nu * g(w)) * v;
            }
        }
        bound += self.negative_part_charge(&zr);
        (bound, repair.sqrt() / (1.0 + z.norm()))
    }

    /// Upper bound on `−⟨Z, Γ⟩` over feasible `Γ`: with `N` the negative part
    /// of `Z`, `⟨N, Γ⟩ ≤ min(λ_max(N)·Tr Γ, Σ_ij |N_ij|·max|Γ_ij|)`.
    fn negative_part_charge(&self, z: &DMatrix<f64>) -> f64 {
        let Ok((vals, vecs)) = sym_eigen(&symmetrize(z)) else {
            return f64::INFINITY;
        };
        let lmin = vals.min();
        if lmin >= 0.0 {
            return 0.0;
        }
        let nmat = spectral_part(&vals, &vecs, |l| -l);
        let spectral = -lmin * self.n as f64 * self.entry_bound;
        let entrywise = nmat.iter().map(|v| v.abs()).sum::<f64>() * self.entry_bound;
        spectral.min(entrywise)
    }

    /// One pass of relaxed ADMM written as a map on `V = S + Λ/σ`, from
    /// which `S = Π₊(V)` and `Λ = σ(V − S)`.
    fn admm_map(&self, v: &DMatrix<f64>, sigma: f64, alpha: f64) -> Result<AdmmEval> {
        let (vals, vecs) = sym_eigen(v)?;
        let s = symmetrize(&spectral_part(&vals, &vecs, |l| l));
        let lambda = (v - &s) * sigma;
        let (y, mu) = self.y_update(&s, &lambda, sigma)?;
        let gamma = self.gamma(&y);
        let next = symmetrize(&(&gamma * alpha + &s * (1.0 - alpha) + &lambda / sigma));
        Ok(AdmmEval { s, lambda, y, mu, gamma, next })
    }

    /// ADMM on the splitting `Γ(y) = S`, `S ⪰ 0`, with over-relaxation and
    /// optional Anderson acceleration of the fixed-point map. The bound is
    /// re-certified every `check_every` iterations; the run stops once the
    /// primal residual and the relative distance between bound and objective
    /// are both below `tol`.
    pub fn solve_admm(&self, opts: &AdmmOptions, warm: Option<&AdmmState>) -> Result<MomentSolution> {
        let n = self.n;
        let start = match warm {
            Some(w) if w.s.nrows() == n && w.lambda.nrows() == n => w.clone(),
            Some(_) => return Err(Error::DimensionMismatch("warm start has the wrong size".into())),
            None => self.initial_state(opts.sigma),
        };
        let sigma = start.sigma;
        let alpha = opts.relaxation;
        let mut x = symmetrize(&(&start.s + &start.lambda / sigma));
        let mut eval = self.admm_map(&x, sigma, alpha)?;
        let mut accel = Anderson::new(opts.anderson);
        // Last point whose map was accepted, with its residual norm.
        let mut anchor_next = eval.next.clone();
        let mut anchor_norm = (&eval.next - &x).norm();
        accel.push(x.as_slice(), (&eval.next - &x).as_slice());
        let mut best: Option<f64> = None;
        let mut pres = f64::INFINITY;
        let mut dres = f64::INFINITY;
        let mut status = SolveStatus::MaxIter;
        let mut iterations = opts.max_iter;
        for it in 1..=opts.max_iter {
            let proposal = accel.extrapolate(eval.next.as_slice());
            let accelerated = proposal.is_some();
            let x_new = match proposal {
                Some(v) => symmetrize(&DMatrix::from_vec(n, n, v)),
                None => eval.next.clone(),
            };
            let cand = self.admm_map(&x_new, sigma, alpha)?;
            let g = &cand.next - &x_new;
            let gnorm = g.norm();
            if accelerated && !(gnorm <= anchor_norm) {
                // Rejected: fall back to the plain step from the anchor.
                accel.clear();
                x = anchor_next.clone();
                eval = self.admm_map(&x, sigma, alpha)?;
            } else {
                x = x_new;
                eval = cand;
            }
            let g = &eval.next - &x;
            anchor_norm = g.norm();
            anchor_next = eval.next.clone();
            accel.push(x.as_slice(), g.as_slice());

            pres = (&eval.gamma - &eval.s).norm() / (1.0 + eval.gamma.norm().max(eval.s.norm()));
            dres = anchor_norm * sigma / (1.0 + eval.lambda.norm());
            if it % opts.check_every == 0 || it == opts.max_iter {
                let (bound, _) = self.certify_dual(&(-&eval.lambda), -eval.mu);
                let b = best.map_or(bound, |b| b.min(bound));
                best = Some(b);
                let obj = self.objective_value(&eval.y);
                if pres <= opts.tol && (b - obj).abs() / (1.0 + b.abs()) <= opts.tol {
                    status = SolveStatus::Optimal;
                    iterations = it;
                    break;
                }
            }
        }
        let (bound, repair) = self.certify_dual(&(-&eval.lambda), -eval.mu);
        let bound = best.map_or(bound, |b| b.min(bound));
        let objective = self.objective_value(&eval.y);
        Ok(MomentSolution {
            moments: eval.y,
            objective,
            bound,
            gap: (bound - objective).abs(),
            primal_residual: pres,
            dual_residual: repair.max(dres),
            iterations,
            status,
            method: Method::Admm,
            state: Some(AdmmState { s: eval.s, lambda: eval.lambda, sigma }),
        })
    }
}

struct AdmmEval {
    s: DMatrix<f64>,
    lambda: DMatrix<f64>,
    y: Vec<f64>,
    mu: f64,
    gamma: DMatrix<f64>,
    next: DMatrix<f64>,
}

/// Type-II Anderson acceleration over the last `memory` differences of a
/// fixed-point iteration `x ↦ T(x)` with residual `g = T(x) − x`.
struct Anderson {
    memory: usize,
    xs: std::collections::VecDeque<Vec<f64>>,
    gs: std::collections::VecDeque<Vec<f64>>,
}

impl Anderson {
    fn new(memory: usize) -> Self {
        Self {
            memory,
            xs: Default::default(),
            gs: Default::default(),
        }
    }

    fn clear(&mut self) {
        self.xs.clear();
        self.gs.clear();
    }

    fn push(&mut self, x: &[f64], g: &[f64]) {
        if self.memory == 0 {
            return;
        }
        self.xs.push_back(x.to_vec());
        self.gs.push_back(g.to_vec());
        if self.xs.len() > self.memory + 1 {
            self.xs.pop_front();
            self.gs.pop_front();
        }
    }

    /// `T(x_k) − Σ_j γ_j (Δx_j + Δg_j)` with `γ` the least-squares fit of
    /// `g_k` by the `Δg_j`.
    fn extrapolate(&self, tx: &[f64]) -> Option<Vec<f64>> {
        let k = self.xs.len().checked_sub(1).filter(|&k| k > 0)?;
        let diff = |v: &std::collections::VecDeque<Vec<f64>>, j: usize| -> Vec<f64> {
            v[j + 1].iter().zip(&v[j]).map(|(a, b)| a - b).collect()
        };
        let dg: Vec<Vec<f64>> = (0..k).map(|j| diff(&self.gs, j)).collect();
        let dx: Vec<Vec<f64>> = (0..k).map(|j| diff(&self.xs, j)).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        let last = self.gs.back()?;
        let mut gram = DMatrix::from_fn(k, k, |i, j| dot(&dg[i], &dg[j]));
        let scale = gram.trace() / k as f64;
        if !(scale > 0.0) {
            return None;
        }
        for i in 0..k {
            gram[(i, i)] += 1e-10 * scale;
        }
        let rhs = DVector::from_fn(k, |i, _| dot(&dg[i], last));
        let gamma = Cholesky::new(gram)?.solve(&rhs);
        let mut out = tx.to_vec();
        for j in 0..k {
            for (o, (a, b)) in out.iter_mut().zip(dx[j].iter().zip(&dg[j])) {
                *o -= gamma[j] * (a + b);
            }
        }
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dense(n: usize, v: &[f64]) -> SymSparse {
        SymSparse::from_dense(&DMatrix::from_row_slice(n, n, v)).unwrap()
    }

    fn trivial_problems() -> Vec<(SdpProblem, f64)> {
        vec![
            (
                SdpProblem::new(2, dense(2, &[1., 0., 0., 0.]), vec![(dense(2, &[1., 0., 0., 1.]), 1.0)]).unwrap(),
                1.0,
            ),
            (
                SdpProblem::new(2, dense(2, &[1., 0., 0., -1.]), vec![(dense(2, &[1., 0., 0., 1.]), 1.0)]).unwrap(),
                1.0,
            ),
            (
                SdpProblem::new(
                    2,
                    dense(2, &[0., 1., 1., 0.]),
                    vec![(dense(2, &[1., 0., 0., 0.]), 0.5), (dense(2, &[0., 0., 0., 1.]), 0.5)],
                )
                .unwrap(),
                1.0,
            ),
        ]
    }

    #[test]
    fn trivial_problems_solve_and_certify() {
        for (p, want) in trivial_problems() {
            let sol = solve(&p, &SolverOptions::default()).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal);
            assert_abs_diff_eq!(sol.primal_obj, want, epsilon = 1e-7);
            assert!(sol.dual_obj >= sol.primal_obj - 1e-8);
            assert!(min_eigenvalue(&sol.x) >= -1e-9);
            let cert = certify(&p, &sol).unwrap();
            assert!(cert.bound >= want - 1e-9);
            assert!(cert.bound - cert.dual_obj <= 1e-8);
            assert_abs_diff_eq!(cert.bound, want, epsilon = 1e-7);
        }
    }

    #[test]
    fn rank_one_optimum() {
        let (p, _) = trivial_problems().pop().unwrap();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        for v in sol.x.iter() {
            assert_abs_diff_eq!(*v, 0.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn inconsistent_constraints_error() {
        let p = SdpProblem::new(1, dense(1, &[1.]), vec![(dense(1, &[1.]), 2.0), (dense(1, &[1.]), 1.0)]).unwrap();
        assert!(matches!(certified_upper_bound(&p, &SolverOptions::default()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn dependent_constraints_dropped() {
        let p = SdpProblem::new(
            2,
            dense(2, &[1., 0., 0., 0.]),
            vec![
                (dense(2, &[1., 0., 0., 1.]), 1.0),
                (dense(2, &[2., 0., 0., 2.]), 2.0),
                (dense(2, &[0., 1., 1., 0.]), 0.0),
            ],
        )
        .unwrap();
        assert_eq!(independent_constraints(&p).unwrap(), vec![0, 2]);
        assert_abs_diff_eq!(certified_upper_bound(&p, &SolverOptions::default()).unwrap(), 1.0, epsilon = 1e-7);
    }

    #[test]
    fn shape_errors() {
        assert!(SdpProblem::new(2, dense(3, &[0.; 9]), vec![]).is_err());
        assert!(SymSparse::from_dense(&DMatrix::from_row_slice(2, 2, &[0., 1., 0., 0.])).is_err());
        assert!(SymSparse::from_lower_triangle(2, &[1., 2.]).is_err());
    }

    #[test]
    fn json_round_trip() {
        for (p, _) in trivial_problems() {
            let back = SdpProblem::from_json(&p.to_json().unwrap()).unwrap();
            assert_eq!(p, back);
        }
        let rec: SdpRecord = serde_json::from_str(&trivial_problems()[2].0.to_json().unwrap()).unwrap();
        assert_eq!(rec.objective, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn deterministic_iterates() {
        let (p, _) = trivial_problems().pop().unwrap();
        let a = solve(&p, &SolverOptions::default()).unwrap();
        let b = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    /// Correlation matrix of three ±1 variables with all pairwise correlations
    /// equal: max of −(x01 + x02 + x12) is 3/2, attained at the equiangular
    /// configuration.
    fn elliptope(pin: Option<LinearPin>) -> MomentProblem {
        let classes = vec![
            vec![(0, 0), (1, 1), (2, 2)],
            vec![(0, 1)],
            vec![(0, 2)],
            vec![(1, 2)],
        ];
        MomentProblem::new(3, &classes, vec![Some(1.0), None, None, None], vec![0.0, -1.0, -1.0, -1.0], pin).unwrap()
    }

    #[test]
    fn moment_problem_both_methods_agree() {
        let mp = elliptope(None);
        let ipm = mp.solve_ipm(&SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(ipm.bound, 1.5, epsilon = 1e-7);
        let admm = mp.solve_admm(&AdmmOptions { tol: 1e-7, ..Default::default() }, None).unwrap();
        assert_eq!(admm.status, SolveStatus::Optimal);
        assert!(admm.bound >= 1.5 - 1e-12);
        assert_abs_diff_eq!(admm.bound, 1.5, epsilon = 1e-5);
        for w in 1..4 {
            assert_abs_diff_eq!(admm.moments[w], -0.5, epsilon = 1e-4);
        }
    }

    #[test]
    fn pinned_moment_problem() {
        // x01 = 0 leaves max −(x02 + x12) over a 3x3 correlation matrix with a
        // zero entry: x02 = −x12 = t is unconstrained in sign, optimum √2.
        let pin = LinearPin {
            coeffs: vec![0.0, 1.0, 0.0, 0.0],
            rhs: 0.0,
            mode: PinMode::Equal,
        };
        let mp = elliptope(Some(pin));
        let ipm = mp.solve_ipm(&SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(ipm.bound, 2f64.sqrt(), epsilon = 1e-7);
        let admm = mp.solve_admm(&AdmmOptions { tol: 1e-7, ..Default::default() }, None).unwrap();
        assert!(admm.bound >= 2f64.sqrt() - 1e-12);
        assert_abs_diff_eq!(admm.bound, 2f64.sqrt(), epsilon = 1e-5);

        let ge = LinearPin {
            coeffs: vec![0.0, 1.0, 0.0, 0.0],
            rhs: -0.25,
            mode: PinMode::AtLeast,
        };
        let admm = elliptope(Some(ge))
            .solve_admm(&AdmmOptions { tol: 1e-7, ..Default::default() }, None)
            .unwrap();
        // The unpinned optimum has x01 = −1/2 < −1/4, so the pin is active.
        assert!(admm.bound < 1.5 - 1e-3);
        assert!(admm.bound >= admm.objective - 1e-9);
    }

    #[test]
    fn classes_must_partition() {
        let r = MomentProblem::new(2, &[vec![(0, 0), (1, 1)]], vec![Some(1.0)], vec![0.0], None);
        assert!(r.is_err());
        let r = MomentProblem::new(2, &[vec![(0, 0), (1, 1)], vec![(0, 1), (1, 0)]], vec![None, None], vec![0.0, 0.0], None);
        assert!(r.is_err());
    }
}
