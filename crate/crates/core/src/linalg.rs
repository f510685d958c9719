//! Dense helpers on top of nalgebra for the GP code.

use nalgebra::{DMatrix, DVector};

/// Lower Cholesky factor, or `None` if the matrix is not numerically SPD.
pub(crate) fn cholesky_lower(a: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = a.cholesky()?;
    let l = chol.unpack();
    if l.diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
        Some(l)
    } else {
        None
    }
}

/// Inverse of a lower-triangular matrix by column-wise forward substitution.
/// Exploits the zero structure, so the cost is about `n^3 / 3`.
pub(crate) fn lower_triangular_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::<f64>::zeros(n, n);
    let ls = l.as_slice();
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j..].iter_mut().for_each(|v| *v = 0.0);
        x[j] = 1.0;
        for k in j..n {
            let xk = x[k] / ls[k * n + k];
            x[k] = xk;
            if xk != 0.0 {
                let col = &ls[k * n + k + 1..(k + 1) * n];
                for (xi, lik) in x[k + 1..].iter_mut().zip(col) {
                    *xi -= xk * lik;
                }
            }
        }
        inv.column_mut(j).rows_mut(j, n - j).copy_from_slice(&x[j..]);
    }
    inv
}

/// `A^{-1}` from the lower Cholesky factor of `A`.
pub(crate) fn spd_inverse_from_lower(l: &DMatrix<f64>) -> DMatrix<f64> {
    let linv = lower_triangular_inverse(l);
    linv.transpose() * linv
}

/// Solves `L L^T x = b`.
pub(crate) fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let y = l.solve_lower_triangular(b).expect("positive diagonal");
    l.transpose().solve_upper_triangular(&y).expect("positive diagonal")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4);
        &a * a.transpose() + DMatrix::identity(n, n)
    }

    #[test]
    fn inverse_matches_identity() {
        let a = spd(17);
        let l = cholesky_lower(a.clone()).unwrap();
        let inv = spd_inverse_from_lower(&l);
        let prod = &a * &inv;
        assert!((prod - DMatrix::identity(17, 17)).amax() < 1e-12);
        let b = DVector::from_fn(17, |i, _| i as f64);
        let x = cholesky_solve(&l, &b);
        assert!((&a * x - b).amax() < 1e-12);
    }

    #[test]
    fn non_spd_rejected() {
        let mut a = DMatrix::identity(3, 3);
        a[(1, 1)] = -1.0;
        assert!(cholesky_lower(a).is_none());
    }
}
