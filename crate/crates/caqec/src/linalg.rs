//! Small dense complex linear algebra helpers shared across the crate.
//!
//! Everything here operates on `DMatrix<Complex64>`. Matrices stay small
//! (at most 64x64 for the five-qubit Choi problems), so dense algorithms
//! are always the right tool.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Complex zero.
pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Complex one.
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
/// The imaginary unit.
pub const C_I: Complex64 = Complex64::new(0.0, 1.0);

/// `i^k` for `k` taken mod 4.
pub fn i_pow(k: u8) -> Complex64 {
    match k % 4 {
        0 => C_ONE,
        1 => C_I,
        2 => -C_ONE,
        _ => -C_I,
    }
}

/// Identity matrix of size `dim`.
pub fn identity(dim: usize) -> DMatrix<Complex64> {
    DMatrix::identity(dim, dim)
}

/// Conjugate transpose.
pub fn dagger(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    m.adjoint()
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// Trace of a square matrix.
pub fn trace(m: &DMatrix<Complex64>) -> Complex64 {
    m.diagonal().sum()
}

/// Frobenius (Hilbert-Schmidt) norm.
pub fn frobenius_norm(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entrywise absolute difference between two matrices of equal shape.
pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// `(m + m^dagger) / 2`, the Hermitian part of `m`.
pub fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns real eigenvalues and the corresponding eigenvector columns.
/// The input is symmetrized first, so tiny anti-Hermitian noise from
/// accumulated arithmetic does not trip the decomposition.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (DVector<f64>, DMatrix<Complex64>) {
    let h = hermitian_part(m);
    let eig = h.symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

/// Deterministic column-stacking of a matrix in row-major order:
/// entry `(r, c)` of an `rows x cols` matrix lands at flat index `r * cols + c`.
///
/// This is the vectorization convention used for Choi matrices throughout
/// the crate (output index major, input index minor).
pub fn vec_row_major(m: &DMatrix<Complex64>) -> DVector<Complex64> {
    let (rows, cols) = m.shape();
    DVector::from_fn(rows * cols, |idx, _| m[(idx / cols, idx % cols)])
}

/// Inverse of [`vec_row_major`].
pub fn unvec_row_major(v: &DVector<Complex64>, rows: usize, cols: usize) -> DMatrix<Complex64> {
    assert_eq!(v.len(), rows * cols, "vector length must equal rows*cols");
    DMatrix::from_fn(rows, cols, |r, c| v[r * cols + c])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_eigen_recovers_matrix() {
        // A small non-trivial Hermitian matrix with complex off-diagonals.
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.5, -1.0),
                Complex64::new(0.0, 0.3),
                Complex64::new(0.5, 1.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.2, 0.0),
                Complex64::new(0.0, -0.3),
                Complex64::new(0.2, 0.0),
                Complex64::new(0.7, 0.0),
            ],
        );
        let (vals, vecs) = hermitian_eigen(&m);
        let lambda = DMatrix::from_diagonal(&vals.map(|v| Complex64::new(v, 0.0)));
        let rebuilt = &vecs * lambda * vecs.adjoint();
        assert!(max_abs_diff(&m, &rebuilt) < 1e-12);
        // Eigenvectors unitary.
        let gram = vecs.adjoint() * &vecs;
        assert!(max_abs_diff(&gram, &identity(3)) < 1e-12);
    }

    #[test]
    fn vec_round_trip() {
        let m = DMatrix::from_fn(2, 3, |r, c| Complex64::new(r as f64, c as f64));
        let v = vec_row_major(&m);
        assert_eq!(v[1], Complex64::new(0.0, 1.0)); // entry (0,1)
        assert_eq!(v[3], Complex64::new(1.0, 0.0)); // entry (1,0)
        let back = unvec_row_major(&v, 2, 3);
        assert_eq!(m, back);
    }

    #[test]
    fn kron_dimensions_and_values() {
        let a = DMatrix::from_row_slice(2, 2, &[C_ONE, C_ZERO, C_ZERO, -C_ONE]);
        let b = DMatrix::from_row_slice(2, 2, &[C_ZERO, C_ONE, C_ONE, C_ZERO]);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(0, 1)], C_ONE);
        assert_eq!(k[(2, 3)], -C_ONE);
    }
}
