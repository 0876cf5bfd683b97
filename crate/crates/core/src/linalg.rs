//! Thin helpers over `nalgebra` for the small Hermitian matrices used here.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `Re(v^H M v)`.
pub fn quad_form(v: &[Complex64], m: &CMatrix) -> f64 {
    let n = v.len();
    let data = m.as_slice();
    let mut acc = 0.0;
    for j in 0..n {
        let col = &data[j * n..(j + 1) * n];
        let mut s = ZERO;
        for i in 0..n {
            s += v[i].conj() * col[i];
        }
        acc += (s * v[j]).re;
    }
    acc
}

/// `out = M x` for a square column-major matrix.
#[inline]
pub fn matvec_into(m: &CMatrix, x: &[Complex64], out: &mut [Complex64]) {
    let n = x.len();
    let data = m.as_slice();
    out.iter_mut().for_each(|o| *o = ZERO);
    for j in 0..n {
        let xj = x[j];
        let col = &data[j * n..(j + 1) * n];
        for i in 0..n {
            out[i] += col[i] * xj;
        }
    }
}

/// `x^H y`.
#[inline]
pub fn dot_h(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
}

pub fn norm_sq(x: &[Complex64]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum()
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// Hermitian square root `R^{1/2}` of a PSD matrix. Eigenvalues down to
/// `−neg_tol · tr(R)/N` are clipped to zero; anything more negative fails.
pub fn hermitian_sqrt(r: &CMatrix, neg_tol: f64, what: &'static str) -> Result<CMatrix> {
    let n = r.nrows();
    if n == 0 {
        return Ok(r.clone());
    }
    let scale = r.trace().re / n as f64;
    if scale == 0.0 && r.iter().all(|c| *c == ZERO) {
        return Ok(r.clone());
    }
    let (values, vectors) = hermitian_eigen(r);
    if values[0] < -neg_tol * scale.abs() {
        return Err(Error::NotPositiveDefinite { what, min_eigenvalue: values[0] });
    }
    let mut scaled = vectors.clone();
    for (c, &lambda) in values.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        scaled.column_mut(c).scale_mut(s);
    }
    Ok(&scaled * vectors.adjoint())
}

/// Solves `A x = b` for Hermitian positive-definite `A`.
pub fn solve_hpd(a: &CMatrix, b: &CVector, what: &'static str) -> Result<CVector> {
    let chol = a.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite {
        what,
        min_eigenvalue: min_eigenvalue(a),
    })?;
    Ok(chol.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares_back() {
        let r = CMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(2.0, 0.0), Complex64::new(0.5, 0.5), Complex64::new(0.5, -0.5), Complex64::new(1.0, 0.0)],
        );
        let s = hermitian_sqrt(&r, 1e-9, "R").unwrap();
        assert!((&s * &s - &r).norm() < 1e-12);
        assert!((&s - s.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let r = CMatrix::from_diagonal(&CVector::from_vec(alloc::vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-0.1, 0.0)
        ]));
        assert!(hermitian_sqrt(&r, 1e-9, "R").is_err());
    }

    #[test]
    fn quad_form_matches_direct() {
        let m = CMatrix::from_fn(3, 3, |i, j| Complex64::new((i + 2 * j) as f64, i as f64 - j as f64));
        let v = [Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.1), Complex64::new(0.3, 0.0)];
        let vv = CVector::from_column_slice(&v);
        let direct = (vv.adjoint() * &m * &vv)[(0, 0)].re;
        assert!((quad_form(&v, &m) - direct).abs() < 1e-12);
    }
}
