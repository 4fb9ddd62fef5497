//! Direction-dependent matrix amplitudes `F(n, n₀)`.

use nalgebra::{Rotation3, Vector3};
use num_complex::Complex64;

use crate::error::Result;
use crate::linalg::CMatrix;

/// A complex channel matrix evaluated on pairs of unit directions (outgoing
/// `n`, incoming `n₀`). Evaluation is pure.
pub trait AmplitudeField {
    fn eval(&self, n: &Vector3<f64>, n0: &Vector3<f64>) -> Result<CMatrix>;

    /// Single entry `F_{out,inp}(n, n₀)`.
    fn entry(&self, out: usize, inp: usize, n: &Vector3<f64>, n0: &Vector3<f64>) -> Result<Complex64> {
        Ok(self.eval(n, n0)?[(out, inp)])
    }
}

impl<T: AmplitudeField + ?Sized> AmplitudeField for &T {
    fn eval(&self, n: &Vector3<f64>, n0: &Vector3<f64>) -> Result<CMatrix> {
        (**self).eval(n, n0)
    }
}

/// Amplitude of a body-frame field for a molecule whose axis has been turned
/// from `e_z` by `rotation`.
///
/// The body-frame amplitude depends on `n·R`, `n₀·R` and on harmonics
/// `Y_lm(n)` quantized along the molecular axis, so the lab-frame value is
/// the body-frame field evaluated at the back-rotated directions. This is the
/// `Y_lm(n) → Y_lm` referred to `R̂` substitution; no D-matrices are needed.
#[derive(Debug, Clone)]
pub struct Rotated<F> {
    inner: F,
    rotation: Rotation3<f64>,
}

impl<F: AmplitudeField> Rotated<F> {
    pub fn new(inner: F, rotation: Rotation3<f64>) -> Self {
        Self { inner, rotation }
    }

    /// Lab direction of the molecular axis.
    pub fn axis(&self) -> Vector3<f64> {
        self.rotation * Vector3::z()
    }
}

impl<F: AmplitudeField> AmplitudeField for Rotated<F> {
    fn eval(&self, n: &Vector3<f64>, n0: &Vector3<f64>) -> Result<CMatrix> {
        let back = self.rotation.inverse();
        self.inner.eval(&(back * n), &(back * n0))
    }
}

/// Convenience wrapper for [`Rotated::new`].
pub fn rotate_amplitude<F: AmplitudeField>(field: F, rotation: Rotation3<f64>) -> Rotated<F> {
    Rotated::new(field, rotation)
}
