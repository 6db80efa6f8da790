//! Small dense Hermitian solves used per time sample.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Solves `A x = b` for Hermitian `A` (row-major, `n x n`) in place.
///
/// Cholesky factorization written directly over the buffers. Returns `false`
/// when `A` is not numerically positive definite; both buffers are then
/// clobbered and the caller should fall back to [`solve_pinv`].
pub fn solve_hermitian(a: &mut [Complex64], b: &mut [Complex64], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = (0..n).map(|i| a[i * n + i].re.abs()).fold(0.0, f64::max);
    let tol = scale * 1e-13 + f64::MIN_POSITIVE;

    // Lower factor overwrites the lower triangle (row-major).
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if !(d > tol) {
            return false;
        }
        let ljj = d.sqrt();
        a[j * n + j] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / ljj;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i].re;
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[k * n + i].conj() * b[k];
        }
        b[i] = s / a[i * n + i].re;
    }
    true
}

/// Minimum-norm least-squares solve through the SVD, for singular systems.
pub fn solve_pinv(a: &DMatrix<Complex64>, b: &[Complex64]) -> Vec<Complex64> {
    let n = a.ncols();
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = smax * 1e-12 * n.max(1) as f64;
    svd.solve(&DVector::from_column_slice(b), eps)
        .map(|x| x.iter().copied().collect())
        .unwrap_or_else(|_| vec![Complex64::new(0.0, 0.0); n])
}
