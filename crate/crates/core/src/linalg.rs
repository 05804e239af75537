//! Dense kernels: reusable LU factorizations, block orthonormalization with
//! deflation, a sorted SVD, and a Bartels-Stewart Lyapunov solver.

use std::fmt;

use nalgebra::linalg::{Schur, SymmetricEigen, LU};
use nalgebra::{DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{MorError, Result};

/// Columns whose norm after orthogonalization falls below this fraction of
/// their original norm are treated as linearly dependent and dropped.
pub const DEFLATION_TOL: f64 = 1e-10;

/// Relative pivot threshold below which a factorization is declared singular.
pub const PIVOT_TOL: f64 = 1e-14;

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(MorError::validation(format!("{what} has non-finite entries")))
    }
}

/// Which system operator a factorization belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operator {
    G,
    C,
    GT,
    CT,
    Named(String),
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operator::G => f.write_str("G"),
            Operator::C => f.write_str("C"),
            Operator::GT => f.write_str("G^T"),
            Operator::CT => f.write_str("C^T"),
            Operator::Named(name) => f.write_str(name),
        }
    }
}

/// LU factorization with partial pivoting, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct Factorization {
    operator: Operator,
    lu: LU<f64, Dyn, Dyn>,
    dim: usize,
}

impl Factorization {
    pub fn new(operator: Operator, a: &DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(MorError::validation(format!(
                "cannot factorize non-square {}x{} operator {operator}",
                a.nrows(),
                a.ncols()
            )));
        }
        ensure_finite(a, "operator")?;
        let dim = a.nrows();
        let scale = a.amax();
        let threshold = PIVOT_TOL * scale;
        let lu = LU::new(a.clone());
        let min_pivot = lu
            .u()
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
        if dim > 0 && (scale == 0.0 || min_pivot <= threshold) {
            return Err(MorError::Singular {
                operator: operator.to_string(),
                pivot: if dim == 0 { 0.0 } else { min_pivot },
                threshold,
            });
        }
        Ok(Self { operator, lu, dim })
    }

    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `A Y = R` for a block right-hand side.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(rhs.nrows(), self.dim, "rhs row count mismatch");
        let mut y = rhs.clone();
        // Pivots were checked at construction, so this cannot fail.
        let ok = self.lu.solve_mut(&mut y);
        debug_assert!(ok);
        y
    }
}

/// Factorizes a generic square operator.
pub fn factorize(a: &DMatrix<f64>) -> Result<Factorization> {
    Factorization::new(Operator::Named("A".into()), a)
}

/// Returns the columns of `block` that survive two-pass Gram-Schmidt against
/// `basis` (assumed orthonormal) and against each other.
fn orthonormal_extension(basis: &DMatrix<f64>, block: &DMatrix<f64>) -> DMatrix<f64> {
    let n = block.nrows();
    let original_norms: Vec<f64> = block.column_iter().map(|c| c.norm()).collect();

    let mut work = block.clone();
    if basis.ncols() > 0 {
        for _ in 0..2 {
            let coeffs = basis.tr_mul(&work);
            work.gemm(-1.0, basis, &coeffs, 1.0);
        }
    }

    let mut kept: Vec<DVector<f64>> = Vec::with_capacity(block.ncols());
    for (c, &orig) in original_norms.iter().enumerate() {
        let mut v: DVector<f64> = work.column(c).into_owned();
        for _ in 0..2 {
            for q in &kept {
                let h = q.dot(&v);
                v.axpy(-h, q, 1.0);
            }
        }
        let norm = v.norm();
        if orig > 0.0 && norm > DEFLATION_TOL * orig && norm.is_finite() {
            v /= norm;
            kept.push(v);
        }
    }
    if kept.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&kept)
}

/// Orthonormal basis for the column span of `block`, with deflation of
/// dependent columns.
pub fn orth(block: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let empty = DMatrix::zeros(block.nrows(), 0);
    orth_against(block, &empty)
}

/// Orthonormalizes `block` against the orthonormal columns of `basis`, then
/// internally. Returns only the new columns.
pub fn orth_against(block: &DMatrix<f64>, basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ext = try_orth_against(block, basis);
    if ext.ncols() == 0 {
        Err(MorError::EmptyBasis)
    } else {
        Ok(ext)
    }
}

/// Like [`orth_against`] but returns an empty matrix on full deflation.
pub fn try_orth_against(block: &DMatrix<f64>, basis: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(block.nrows(), basis.nrows(), "row count mismatch");
    orthonormal_extension(basis, block)
}

/// Thin SVD with singular values sorted in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub fn svd(m: &DMatrix<f64>) -> Result<Svd> {
    ensure_finite(m, "svd input")?;
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Ok(Svd {
            u: DMatrix::zeros(m.nrows(), 0),
            sigma: DVector::zeros(0),
            v_t: DMatrix::zeros(0, m.ncols()),
        });
    }
    let dec = m.clone().svd(true, true);
    let u = dec.u.expect("u requested");
    let v_t = dec.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let sigma = DVector::from_iterator(k, order.iter().map(|&i| dec.singular_values[i]));
    let u = DMatrix::from_columns(&order.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let v_t = DMatrix::from_rows(&order.iter().map(|&i| v_t.row(i)).collect::<Vec<_>>());
    Ok(Svd { u, sigma, v_t })
}

/// Spectral norm (largest singular value) of a complex matrix.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    match (m.nrows(), m.ncols()) {
        (0, _) | (_, 0) => 0.0,
        (1, _) | (_, 1) => m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
        _ => m.clone().singular_values().max(),
    }
}

/// Square-root factor `Z` of a symmetric PSD matrix, `X ≈ Z Zᵀ`.
///
/// Eigenvalues that round to negative values are clipped to zero and their
/// columns omitted.
pub fn psd_factor(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let sym = (x + x.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let cols: Vec<DVector<f64>> = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > 0.0)
        .map(|&i| eig.eigenvectors.column(i) * eig.eigenvalues[i].sqrt())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Real Schur form `A = Q T Qᵀ`, with `T` upper quasi-triangular.
pub(crate) struct RealSchur {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
    /// (start, size) of each diagonal block, size 1 or 2.
    pub blocks: Vec<(usize, usize)>,
}

impl RealSchur {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let k = a.nrows();
        let schur =
            Schur::try_new(a.clone(), f64::EPSILON, 0).ok_or(MorError::NoConvergence)?;
        let (q, mut t) = schur.unpack();
        for j in 0..k {
            for i in (j + 2)..k {
                t[(i, j)] = 0.0;
            }
        }
        let mut blocks = Vec::with_capacity(k);
        let mut i = 0;
        while i < k {
            if i + 1 < k && t[(i + 1, i)] != 0.0 {
                if i + 2 < k && t[(i + 2, i + 1)] != 0.0 {
                    return Err(MorError::NoConvergence);
                }
                blocks.push((i, 2));
                i += 2;
            } else {
                blocks.push((i, 1));
                i += 1;
            }
        }
        Ok(Self { q, t, blocks })
    }

    /// Eigenvalues as (re, im) pairs, in block order.
    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.t.nrows());
        for &(s, size) in &self.blocks {
            if size == 1 {
                out.push((self.t[(s, s)], 0.0));
            } else {
                let a = self.t[(s, s)];
                let b = self.t[(s, s + 1)];
                let c = self.t[(s + 1, s)];
                let d = self.t[(s + 1, s + 1)];
                let mean = 0.5 * (a + d);
                let disc = 0.25 * (a - d) * (a - d) + b * c;
                if disc >= 0.0 {
                    let r = disc.sqrt();
                    out.push((mean + r, 0.0));
                    out.push((mean - r, 0.0));
                } else {
                    let r = (-disc).sqrt();
                    out.push((mean, r));
                    out.push((mean, -r));
                }
            }
        }
        out
    }
}

/// Eigenvalues of a real square matrix as (re, im) pairs.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    Ok(RealSchur::new(a)?.eigenvalues())
}

/// Solves a small dense system with complete pivoting; `None` if singular.
fn solve_small(mut a: Vec<f64>, mut b: Vec<f64>, n: usize, tol: f64) -> Option<Vec<f64>> {
    let mut col_perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut pr, mut pc, mut best) = (k, k, 0.0);
        for r in k..n {
            for c in k..n {
                let v = a[r * n + c].abs();
                if v > best {
                    best = v;
                    pr = r;
                    pc = c;
                }
            }
        }
        if best <= tol {
            return None;
        }
        if pr != k {
            for c in 0..n {
                a.swap(k * n + c, pr * n + c);
            }
            b.swap(k, pr);
        }
        if pc != k {
            for r in 0..n {
                a.swap(r * n + k, r * n + pc);
            }
            col_perm.swap(k, pc);
        }
        let piv = a[k * n + k];
        for r in (k + 1)..n {
            let f = a[r * n + k] / piv;
            if f != 0.0 {
                for c in k..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
                b[r] -= f * b[k];
            }
        }
    }
    let mut y = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for c in (k + 1)..n {
            s -= a[k * n + c] * y[c];
        }
        y[k] = s / a[k * n + k];
    }
    let mut x = vec![0.0; n];
    for (k, &p) in col_perm.iter().enumerate() {
        x[p] = y[k];
    }
    Some(x)
}

/// Solves `A X + X Aᵀ = −W` by the Bartels-Stewart method on the real Schur
/// form of `A`. The result is exactly symmetrized.
pub fn solve_lyapunov_dense(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = a.nrows();
    if !a.is_square() || w.shape() != (k, k) {
        return Err(MorError::validation(format!(
            "lyapunov shapes incompatible: A {:?}, W {:?}",
            a.shape(),
            w.shape()
        )));
    }
    ensure_finite(a, "lyapunov operator")?;
    ensure_finite(w, "lyapunov right-hand side")?;
    if k == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }

    let schur = RealSchur::new(a)?;
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let sum_tol = 1e3 * f64::EPSILON * scale;
    let eigs = schur.eigenvalues();
    let mut min_sum = f64::INFINITY;
    for (i, &(ri, ii)) in eigs.iter().enumerate() {
        for &(rj, ij) in &eigs[i..] {
            min_sum = min_sum.min(((ri + rj).powi(2) + (ii + ij).powi(2)).sqrt());
        }
    }
    if min_sum <= sum_tol {
        return Err(MorError::LyapunovSolvability { eig_sum: min_sum });
    }

    let q = &schur.q;
    let t = &schur.t;
    let f = q.tr_mul(w) * q;
    let mut y = DMatrix::<f64>::zeros(k, k);
    let small_tol = f64::EPSILON * scale * 1e-3;

    for &(cj, sj) in schur.blocks.iter().rev() {
        // Right-hand side for column block J with later columns eliminated.
        let mut rhs: DMatrix<f64> = -f.columns(cj, sj);
        let tail = cj + sj;
        if tail < k {
            let y_tail = y.columns(tail, k - tail);
            let t_row = t.view((cj, tail), (sj, k - tail));
            rhs.gemm(-1.0, &y_tail, &t_row.transpose(), 1.0);
        }
        let t_jj = t.view((cj, cj), (sj, sj)).into_owned();
        let mut y_j = DMatrix::<f64>::zeros(k, sj);

        for &(ci, si) in schur.blocks.iter().rev() {
            let mut r = rhs.rows(ci, si).into_owned();
            let below = ci + si;
            if below < k {
                let t_ik = t.view((ci, below), (si, k - below));
                let y_k = y_j.rows(below, k - below);
                r.gemm(-1.0, &t_ik, &y_k, 1.0);
            }
            // (I ⊗ T_ii + T_jj ⊗ I) vec(Y_ij) = vec(r), column-major vec.
            let n = si * sj;
            let mut mat = vec![0.0; n * n];
            for cc in 0..sj {
                for rr in 0..si {
                    let row = cc * si + rr;
                    for c2 in 0..sj {
                        for r2 in 0..si {
                            let col = c2 * si + r2;
                            let mut v = 0.0;
                            if cc == c2 {
                                v += t[(ci + rr, ci + r2)];
                            }
                            if rr == r2 {
                                v += t_jj[(cc, c2)];
                            }
                            mat[row * n + col] = v;
                        }
                    }
                }
            }
            let mut b = vec![0.0; n];
            for cc in 0..sj {
                for rr in 0..si {
                    b[cc * si + rr] = r[(rr, cc)];
                }
            }
            let sol = solve_small(mat, b, n, small_tol)
                .ok_or(MorError::LyapunovSolvability { eig_sum: min_sum })?;
            for cc in 0..sj {
                for rr in 0..si {
                    y_j[(ci + rr, cc)] = sol[cc * si + rr];
                }
            }
        }
        y.columns_mut(cj, sj).copy_from(&y_j);
    }

    let x = q * y * q.transpose();
    Ok((&x + x.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_fro(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let f = factorize(&DMatrix::identity(3, 3)).unwrap();
        let r = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(f.solve(&r), r);
    }

    #[test]
    fn diagonal_solve() {
        let f = factorize(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]))).unwrap();
        let y = f.solve(&DMatrix::from_column_slice(2, 1, &[1.0, 1.0]));
        assert_eq!(y, DMatrix::from_column_slice(2, 1, &[0.5, 0.25]));
    }

    #[test]
    fn singular_operator_is_named() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        match Factorization::new(Operator::C, &a) {
            Err(MorError::Singular { operator, .. }) => assert_eq!(operator, "C"),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn orth_normalizes_single_vector() {
        let k = orth(&DMatrix::from_column_slice(2, 1, &[3.0, 4.0])).unwrap();
        assert_eq!(k.ncols(), 1);
        let s = k[(0, 0)].signum();
        assert!((k[(0, 0)] - 0.6 * s).abs() < 1e-15);
        assert!((k[(1, 0)] - 0.8 * s).abs() < 1e-15);
    }

    #[test]
    fn orth_deflates_duplicate_columns() {
        let m = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        assert_eq!(orth(&m).unwrap().ncols(), 1);
    }

    #[test]
    fn orth_of_zero_block_is_empty_basis() {
        assert!(matches!(orth(&DMatrix::zeros(4, 2)), Err(MorError::EmptyBasis)));
    }

    #[test]
    fn orth_against_span_member_is_empty() {
        let k = orth(&DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])).unwrap();
        let m = DMatrix::from_column_slice(3, 1, &[2.0, -3.0, 0.0]);
        assert!(matches!(orth_against(&m, &k), Err(MorError::EmptyBasis)));
        assert_eq!(try_orth_against(&m, &k).ncols(), 0);
    }

    #[test]
    fn svd_diagonal_and_rank_one() {
        let s = svd(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0])).unwrap();
        assert!((s.sigma[0] - 3.0).abs() < 1e-14 && (s.sigma[1] - 1.0).abs() < 1e-14);

        let u = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let v = DVector::from_vec(vec![3.0, 4.0]);
        let s = svd(&(&u * v.transpose())).unwrap();
        assert!((s.sigma[0] - 15.0).abs() < 1e-12);
        assert!(s.sigma[1].abs() < 1e-12);
    }

    #[test]
    fn lyapunov_scalar_and_diagonal() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let x = solve_lyapunov_dense(&a, &DMatrix::identity(2, 2)).unwrap();
        assert!(rel_fro(&x, &(DMatrix::identity(2, 2) * 0.5)) < 1e-14);

        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let x = solve_lyapunov_dense(&a, &DMatrix::from_element(2, 2, 1.0)).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.5, 1.0 / 3.0, 1.0 / 3.0, 0.25]);
        assert!(rel_fro(&x, &expect) < 1e-14);
    }

    #[test]
    fn lyapunov_rejects_opposite_eigenvalues() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        match solve_lyapunov_dense(&a, &DMatrix::identity(2, 2)) {
            Err(MorError::LyapunovSolvability { eig_sum }) => assert!(eig_sum < 1e-12),
            other => panic!("expected solvability error, got {other:?}"),
        }
    }

    #[test]
    fn lyapunov_handles_complex_pairs() {
        // Rotation-dominated stable matrix has a 2x2 Schur block.
        let a = DMatrix::from_row_slice(3, 3, &[-0.1, 5.0, 0.0, -5.0, -0.1, 1.0, 0.0, 0.0, -2.0]);
        let w = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.5, 0.0, 0.5, 1.0]);
        let x = solve_lyapunov_dense(&a, &w).unwrap();
        let res = &a * &x + &x * a.transpose() + &w;
        assert!(res.norm() <= 1e-12 * w.norm());
    }

    #[test]
    fn psd_factor_reconstructs() {
        let z0 = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 1.0, 0.0, 3.0]);
        let x = &z0 * z0.transpose();
        let z = psd_factor(&x);
        assert!(rel_fro(&(&z * z.transpose()), &x) < 1e-12);
    }
}
