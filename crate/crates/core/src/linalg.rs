//! Dense complex LU helpers with a condition estimate.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, ZrpError};

/// Condition numbers above this are treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

pub type CMatrix = DMatrix<Complex64>;

fn norm1(a: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse by LU with partial pivoting; fails with the 1-norm condition
/// estimate when the matrix is (numerically) singular.
pub fn invert(a: &CMatrix, context: &str) -> Result<CMatrix> {
    let singular = |condition: f64| ZrpError::Singular {
        context: context.to_string(),
        condition,
    };
    let inv = a.clone().lu().try_inverse().ok_or_else(|| singular(f64::INFINITY))?;
    let condition = norm1(a) * norm1(&inv);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(singular(condition));
    }
    Ok(inv)
}

/// Solves `a x = b`, with the same singularity test as [`invert`].
pub fn solve(a: &CMatrix, b: &CMatrix, context: &str) -> Result<CMatrix> {
    let inv = invert(a, context)?;
    Ok(inv * b)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn diag(values: impl IntoIterator<Item = Complex64>) -> CMatrix {
    let v: Vec<Complex64> = values.into_iter().collect();
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(v))
}

/// `i^p` for integer `p`, exactly.
pub fn i_pow(p: i64) -> Complex64 {
    match p.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}
