//! Thin helpers over the dense linear-algebra backend.
//!
//! Everything in the crate goes through these wrappers so the backend stays a
//! single seam: complex Hermitian eigendecompositions, Cholesky solves and the
//! small dense products used by the verification routines.

use faer::prelude::*;
use faer::Side;

use crate::error::{Error, Result};

pub use faer::{Col, Mat};

/// Complex scalar used throughout (`num_complex::Complex<f64>`).
pub type C64 = c64;

pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub fn cplx(re: f64, im: f64) -> C64 {
    C64 { re, im }
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector of `values[i]`; orthonormal.
    pub vectors: Mat<C64>,
}

/// Dense Hermitian eigendecomposition. The input is symmetrized first so
/// rounding in the caller's assembly cannot leak into complex eigenvalues.
pub fn hermitian_eigen(m: &Mat<C64>) -> Result<HermitianEigen> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Shape(format!("eigen of non-square {}x{}", n, m.ncols())));
    }
    let h = Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("self-adjoint eigendecomposition failed: {e:?}")))?;
    let s = evd.S();
    let values = (0..n).map(|i| s[i].re).collect();
    Ok(HermitianEigen { values, vectors: evd.U().to_owned() })
}

/// Cholesky factorization handle for a Hermitian positive-definite matrix.
pub struct CholeskyFactor {
    llt: faer::linalg::solvers::Llt<C64>,
}

impl CholeskyFactor {
    pub fn new(m: &Mat<C64>) -> Result<Self> {
        let llt = m
            .llt(Side::Lower)
            .map_err(|_| Error::Numeric("Cholesky factorization failed (matrix not SPD)".into()))?;
        Ok(Self { llt })
    }

    pub fn solve(&self, rhs: &Mat<C64>) -> Mat<C64> {
        self.llt.solve(rhs)
    }

    pub fn lower(&self) -> Mat<C64> {
        self.llt.L().to_owned()
    }
}

/// Largest generalized eigenvalue of the pencil `(n_mat, r_mat)` with `r_mat`
/// Hermitian positive definite; used for inner suprema of Rayleigh quotients.
pub fn pencil_extremes(n_mat: &Mat<C64>, r_mat: &Mat<C64>) -> Result<(f64, f64)> {
    let r_eig = hermitian_eigen(r_mat)?;
    let k = r_mat.nrows();
    let tiny = r_eig.values.last().copied().unwrap_or(0.0).abs() * 1e-14;
    for &v in &r_eig.values {
        if v <= tiny {
            return Err(Error::Numeric("pencil denominator is not positive definite".into()));
        }
    }
    // R^{-1/2} through the eigendecomposition of R.
    let u = &r_eig.vectors;
    let mut r_inv_half: Mat<C64> = Mat::zeros(k, k);
    for a in 0..k {
        let scale = 1.0 / r_eig.values[a].sqrt();
        for i in 0..k {
            for j in 0..k {
                r_inv_half[(i, j)] += u[(i, a)] * u[(j, a)].conj() * scale;
            }
        }
    }
    let w = &r_inv_half * n_mat * &r_inv_half;
    let eig = hermitian_eigen(&w)?;
    Ok((eig.values[0], *eig.values.last().unwrap()))
}

/// Frobenius norm.
pub fn frob(m: &Mat<C64>) -> f64 {
    m.norm_l2()
}

/// `||m - m^H|| / ||m||` in the Frobenius norm; 0 for the zero matrix.
pub fn hermitian_residual(m: &Mat<C64>) -> f64 {
    let norm = frob(m);
    if norm == 0.0 {
        return 0.0;
    }
    let diff = m - m.adjoint().to_owned();
    frob(&diff) / norm
}

/// Euclidean inner product `<a, b> = a^H b` of two columns.
pub fn dot(a: &Col<C64>, b: &Col<C64>) -> C64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        acc += a[i].conj() * b[i];
    }
    acc
}

/// Thread-count hint for the dense kernels. `n = 1` forces sequential
/// execution; larger values cap the rayon pool faer uses.
pub fn set_parallelism(n: usize) {
    if n <= 1 {
        faer::set_global_parallelism(faer::Par::Seq);
    } else {
        faer::set_global_parallelism(faer::Par::rayon(n));
    }
}

/// Orthonormal basis of the Euclidean orthogonal complement of `span(cols)`
/// inside the coordinate space of dimension `dim`, via full QR.
pub fn euclidean_complement(cols: &Mat<C64>, dim: usize) -> Mat<C64> {
    assert_eq!(cols.nrows(), dim);
    let k = cols.ncols();
    let qr = cols.qr();
    let q = qr.compute_Q();
    // Columns k..dim of the full Q span the complement.
    Mat::from_fn(dim, dim - k, |i, j| q[(i, j + k)])
}
