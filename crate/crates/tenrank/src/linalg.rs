//! Small shared linear-algebra helpers.

use crate::tensor::Matrix;

/// Relative singular-value cutoff used by every pseudoinverse in the crate.
/// Overfactored runs make Gram and factor matrices rank-deficient by
/// construction, so truncation is the normal path, not an edge case.
pub const PINV_REL_TOL: f64 = 1e-12;

/// Moore-Penrose pseudoinverse with singular values below
/// `rel_tol * sigma_max` treated as zero.
pub fn pinv(m: &Matrix, rel_tol: f64) -> Matrix {
    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = if sigma_max > 0.0 {
        rel_tol * sigma_max
    } else {
        0.0
    };
    svd.pseudo_inverse(eps)
        .expect("pseudo_inverse only fails for negative epsilon")
}

/// Euclidean norm of column `c`.
pub fn column_norm(m: &Matrix, c: usize) -> f64 {
    m.column(c).norm()
}
