//! Dense complex linear algebra kernels.
//!
//! The rest of the crate works in `ndarray` types; faer is used here for the
//! O(n^3) operations (matrix products, Hermitian eigendecomposition) and does
//! not leak into any public signature. `faer::c64` and `Complex64` are the
//! same `num_complex` type, so conversions are plain element copies.

use faer::{c64, Mat, Side};
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

fn to_faer(a: &Array2<Complex64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub(crate) fn matmul(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions must agree");
    let prod = to_faer(a) * to_faer(b);
    Array2::from_shape_fn((a.nrows(), b.ncols()), |(i, j)| prod[(i, j)])
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues ascending;
/// eigenvectors are the columns of the returned matrix. Hermiticity is the
/// caller's contract and is not re-checked here.
pub(crate) fn eigh(h: &Array2<Complex64>) -> Result<(Vec<f64>, Array2<Complex64>)> {
    let n = h.nrows();
    assert_eq!(n, h.ncols(), "eigh requires a square matrix");
    let eig = to_faer(h)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenFailure)?;
    let vals = eig.S().column_vector();
    let vecs = eig.U();
    let eigenvalues = (0..n).map(|k| vals[k].re).collect();
    let eigenvectors = Array2::from_shape_fn((n, n), |(i, j)| vecs[(i, j)]);
    Ok((eigenvalues, eigenvectors))
}

/// U f(Lambda) U^dagger for a spectral function given on the eigenvalues.
pub(crate) fn spectral_map(
    eigenvalues: &[f64],
    eigenvectors: &Array2<Complex64>,
    f: impl Fn(f64) -> Complex64,
) -> Array2<Complex64> {
    let mut scaled = eigenvectors.clone();
    for (j, &lambda) in eigenvalues.iter().enumerate() {
        let phase = f(lambda);
        scaled.column_mut(j).mapv_inplace(|z| z * phase);
    }
    matmul(&scaled, &adjoint(eigenvectors))
}

pub(crate) fn adjoint(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|z| z.conj())
}

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn max_abs(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
