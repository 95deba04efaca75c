//! Thin dense helpers over faer.

use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Accum, Mat, MatRef, Par, Side};

use crate::error::{Error, Result};
use crate::C64;

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// `aᴴ b`.
pub fn adj_mul(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Mat<C64> {
    let mut out = Mat::zeros(a.ncols(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a.adjoint(), b, ONE, Par::Seq);
    out
}

/// `out += s · aᴴ b`.
pub fn adj_mul_add(out: faer::MatMut<'_, C64>, a: MatRef<'_, C64>, b: MatRef<'_, C64>, s: C64) {
    matmul(out, Accum::Add, a.adjoint(), b, s, Par::Seq);
}

/// `a b`.
pub fn mul(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Mat<C64> {
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, ONE, Par::Seq);
    out
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky(a: MatRef<'_, C64>) -> Result<Mat<C64>> {
    let llt = a.llt(Side::Lower).map_err(|e| Error::Numeric(format!("Cholesky failed: {e:?}")))?;
    Ok(llt.L().to_owned())
}

/// `L⁻¹ b` in place.
pub fn lower_solve(l: MatRef<'_, C64>, b: &mut Mat<C64>) {
    solve_lower_triangular_in_place(l, b.as_mut(), Par::Seq);
}

/// `(L Lᴴ)⁻¹ b` in place.
pub fn chol_solve(l: MatRef<'_, C64>, b: &mut Mat<C64>) {
    solve_lower_triangular_in_place(l, b.as_mut(), Par::Seq);
    solve_upper_triangular_in_place(l.adjoint(), b.as_mut(), Par::Seq);
}

/// Largest entry of `|a − aᴴ|` relative to the largest entry of `|a|`.
pub fn hermitian_defect(a: MatRef<'_, C64>) -> f64 {
    let n = a.nrows();
    let mut big = 0.0f64;
    let mut defect = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            big = big.max(a[(i, j)].norm());
            defect = defect.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    if big == 0.0 {
        0.0
    } else {
        defect / big
    }
}

/// Column vector stored as an `n × 1` matrix.
pub fn col(v: &[C64]) -> Mat<C64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn col_to_vec(m: &Mat<C64>) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

/// Extremal singular values of a dense matrix.
pub fn singular_value_range(a: MatRef<'_, C64>) -> Result<(f64, f64)> {
    let s = a.singular_values().map_err(|e| Error::Numeric(format!("SVD failed: {e:?}")))?;
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((min, max))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: MatRef<'_, C64>) -> Result<Vec<f64>> {
    let mut v = a.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Numeric(format!("eigensolver failed: {e:?}")))?;
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(v)
}
