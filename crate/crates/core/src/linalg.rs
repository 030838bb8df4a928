//! Thin helpers over nalgebra's dynamic matrices.

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Spectral norm (largest singular value).
pub fn op_norm(m: &Matrix) -> f64 {
    m.singular_values().max()
}

/// Smallest singular value, `l(A) = inf_{|h|=1} |A h|`.
pub fn min_stretch(m: &Matrix) -> f64 {
    m.singular_values().min()
}

/// LU inverse with partial pivoting.
pub fn inverse(m: &Matrix) -> Option<Matrix> {
    m.clone().try_inverse()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `0.5 * ln(1 + exp(2r))` without overflow for large `r`.
pub fn half_log1p_exp2(r: f64) -> f64 {
    if r <= 0.0 {
        0.5 * (2.0 * r).exp().ln_1p()
    } else {
        r + 0.5 * (-2.0 * r).exp().ln_1p()
    }
}
