//! One-center matrix zero-range potential.
//!
//! The interaction is fixed by a Hermitian matrix `W` relating the regular
//! and irregular parts of the matrix wavefunction at the center:
//!
//! ```text
//! y ~ A(n) [ (2L-1)!! r^{-L-1} - r^L W / (2L+1)!! ] A⁺(n₀),   r → 0
//! ```
//!
//! which yields `F(n, n₀) = 4π A(n) F A⁺(n₀)` with
//! `F = -(K^{-L} W₀ K^{-L} + iK)^{-1}` and `W₀ = (-i)^L W i^L`.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::channels::{kpow, ChannelSet, Momenta};
use crate::error::{invalid, Parity, Result, ZrpError};
use crate::field::AmplitudeField;
use crate::linalg::{self, diag, i_pow, CMatrix};
use crate::specfun::{spherical_bessel_j, spherical_bessel_y};

/// Hermitian coupling matrix `W` together with the channel orbital momenta.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionW {
    w: CMatrix,
    l: Vec<u32>,
}

impl InteractionW {
    pub fn new(w: CMatrix, l: Vec<u32>) -> Result<Self> {
        if !w.is_square() || w.nrows() != l.len() {
            return invalid(format!(
                "W is {}x{} but {} channel momenta were given",
                w.nrows(),
                w.ncols(),
                l.len()
            ));
        }
        let scale = linalg::max_abs(&w).max(1.0);
        let skew = linalg::max_abs(&(&w - w.adjoint()));
        if skew > 1e-13 * scale {
            return invalid(format!("W is not Hermitian (|W - W†| = {skew:.3e})"));
        }
        Ok(Self { w, l })
    }

    /// Real symmetric `W` from row-major entries.
    pub fn real(entries: &[f64], l: Vec<u32>) -> Result<Self> {
        let n = l.len();
        if entries.len() != n * n {
            return invalid(format!("expected {} entries for W, got {}", n * n, entries.len()));
        }
        let w = CMatrix::from_row_iterator(n, n, entries.iter().map(|&x| Complex64::new(x, 0.0)));
        Self::new(w, l)
    }

    /// Two-channel `W₀ = [[α₀, c], [c, α₁]]` for an `s` ground channel and an
    /// excited channel of orbital momentum `l`.
    pub fn two_state(alpha0: f64, alpha1: f64, c: f64, l: u32) -> Result<Self> {
        let w0 = CMatrix::from_row_slice(2, 2, &[
            Complex64::new(alpha0, 0.0),
            Complex64::new(c, 0.0),
            Complex64::new(c, 0.0),
            Complex64::new(alpha1, 0.0),
        ]);
        Self::from_w0(w0, vec![0, l])
    }

    /// Builds `W = i^L W₀ (-i)^L` from a given `W₀`.
    pub fn from_w0(w0: CMatrix, l: Vec<u32>) -> Result<Self> {
        let n = l.len();
        if w0.nrows() != n {
            return invalid("W0 dimension does not match the channel momenta");
        }
        let w = CMatrix::from_fn(n, n, |a, b| i_pow(l[a] as i64) * w0[(a, b)] * i_pow(-(l[b] as i64)));
        Self::new(w, l)
    }

    pub fn w(&self) -> &CMatrix {
        &self.w
    }

    pub fn orbital(&self) -> &[u32] {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.len()
    }

    /// `W₀ = (-i)^L W i^L`.
    pub fn w0(&self) -> CMatrix {
        let l = &self.l;
        CMatrix::from_fn(self.dim(), self.dim(), |a, b| {
            i_pow(-(l[a] as i64)) * self.w[(a, b)] * i_pow(l[b] as i64)
        })
    }
}

/// `-F^{-1} = K^{-L} W₀ K^{-L} + iK` at the given momenta.
pub fn inverse_f_kernel(w: &InteractionW, mom: &Momenta) -> Result<CMatrix> {
    if mom.len() != w.dim() {
        return invalid(format!("{} momenta for a {}-channel W", mom.len(), w.dim()));
    }
    let kl = diag(mom.k().iter().zip(w.orbital()).map(|(&k, &l)| kpow(k, -(l as f64))));
    Ok(&kl * w.w0() * &kl + mom.matrix_k() * Complex64::i())
}

/// Determinant of `K^{-L} W₀ K^{-L} + iK`; its zeros are the poles of `F`.
pub fn pole_determinant(w: &InteractionW, mom: &Momenta) -> Result<Complex64> {
    Ok(inverse_f_kernel(w, mom)?.determinant())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneCenterF {
    pub f: CMatrix,
    pub momenta: Momenta,
}

impl OneCenterF {
    /// `F^{-1}`.
    pub fn inverse(&self) -> Result<CMatrix> {
        linalg::invert(&self.f, "one-center amplitude")
    }
}

/// `F = -(K^{-L} W₀ K^{-L} + iK)^{-1}`.
pub fn build_one_center_f(w: &InteractionW, mom: &Momenta) -> Result<OneCenterF> {
    let kernel = inverse_f_kernel(w, mom)?;
    let f = -linalg::invert(&kernel, "one-center F^-1 (pole or bound state)")?;
    Ok(OneCenterF {
        f,
        momenta: mom.clone(),
    })
}

/// Single-channel generalized ZRP, `F = -k^{2l} / (α + i k^{2l+1})`.
pub fn one_channel_gzrp(alpha: f64, l: u32, k: Complex64) -> Result<Complex64> {
    let k2l = kpow(k, 2.0 * l as f64);
    let den = alpha + Complex64::i() * k2l * k;
    if den.norm() == 0.0 {
        return Err(ZrpError::Pole {
            parity: Parity::Gerade,
            magnitude: 0.0,
        });
    }
    Ok(-k2l / den)
}

/// Explicit two-state inverse amplitude
/// `F^{-1} = -[[α₀ + ik₀, c k₁^{-l}], [c k₁^{-l}, α₁ k₁^{-2l} + ik₁]]`.
pub fn two_state_inverse_f(alpha0: f64, alpha1: f64, c: f64, l: u32, mom: &Momenta) -> Result<CMatrix> {
    if mom.len() != 2 {
        return invalid(format!("two-state amplitude needs 2 channels, got {}", mom.len()));
    }
    let i = Complex64::i();
    let (k0, k1) = (mom.k()[0], mom.k()[1]);
    let kml = kpow(k1, -(l as f64));
    let off = c * kml;
    Ok(-CMatrix::from_row_slice(2, 2, &[
        alpha0 + i * k0,
        off,
        off,
        alpha1 * kml * kml + i * k1,
    ]))
}

/// Reactance matrix `-K^{L+1/2} W^{-1} K^{L+1/2}` (open channels only).
pub fn reactance_matrix(w: &InteractionW, mom: &Momenta) -> Result<CMatrix> {
    if mom.len() != w.dim() {
        return invalid(format!("{} momenta for a {}-channel W", mom.len(), w.dim()));
    }
    if let Some(n) = (0..mom.len()).find(|&n| !mom.is_open(n)) {
        return Err(ZrpError::ClosedChannel { channel: n });
    }
    let winv = linalg::invert(w.w(), "interaction W")?;
    let kh = diag(
        mom.k()
            .iter()
            .zip(w.orbital())
            .map(|(&k, &l)| kpow(k, l as f64 + 0.5)),
    );
    Ok(-(&kh * winv * &kh))
}

/// Cayley transform `S = (E + iK_r)(E - iK_r)^{-1}`.
pub fn s_matrix_from_reactance(reactance: &CMatrix) -> Result<CMatrix> {
    let n = reactance.nrows();
    let e = CMatrix::identity(n, n);
    let iq = reactance * Complex64::i();
    let inv = linalg::invert(&(&e - &iq), "E - iK")?;
    Ok((e + iq) * inv)
}

/// `F(n, n₀) = 4π A(n) F A⁺(n₀)`.
#[derive(Debug, Clone)]
pub struct OneCenterAmplitude {
    f: CMatrix,
    channels: ChannelSet,
}

pub fn angular_amplitude(f: &OneCenterF, cs: &ChannelSet) -> Result<OneCenterAmplitude> {
    if cs.len() != f.f.nrows() {
        return invalid("channel set and F have different sizes");
    }
    Ok(OneCenterAmplitude {
        f: f.f.clone(),
        channels: cs.clone(),
    })
}

impl AmplitudeField for OneCenterAmplitude {
    fn eval(&self, n: &Vector3<f64>, n0: &Vector3<f64>) -> Result<CMatrix> {
        let a = self.channels.harmonics(n)?;
        let b = self.channels.harmonics(n0)?;
        let dim = self.channels.len();
        Ok(CMatrix::from_fn(dim, dim, |p, q| {
            4.0 * PI * a[p] * self.f[(p, q)] * b[q].conj()
        }))
    }
}

/// Result of [`small_r_asymptotics_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct SmallRCheck {
    pub residual: f64,
    /// Set when `max_n k_n r` is too large for the leading-order expansion.
    pub warning: Option<String>,
}

fn double_factorial(n: i64) -> f64 {
    // (-1)!! = 0!! = 1
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Checks that the radial solution implied by `F` obeys the zero-range
/// boundary condition
///
/// ```text
/// [ (d/dr)^{2L+1} r^{L+1} φ ]_{r=0} = -2^L L! W [ r^{L+1} φ / (2L-1)!! ]_{r=0}
/// ```
///
/// where `φ(r) = i^L [ j_L(Kr) + K h_L(Kr) F ] (i^L K^{-L} F)^{-1}` is the
/// channel projection of the exterior solution, normalized so its irregular
/// part is `(2L-1)!! r^{-L-1}`. Row `n` is differentiated `2l_n+1` times by a
/// central difference of step `r`; the value at the origin is taken at
/// `r/2`. The residual is the largest entry of `LHS - RHS` relative to
/// `max(|W|, 1)` and vanishes like `r²`.
pub fn small_r_asymptotics_check(f: &OneCenterF, w: &InteractionW, r: f64) -> Result<SmallRCheck> {
    if !(r > 0.0 && r.is_finite()) {
        return invalid(format!("radius must be positive, got {r}"));
    }
    let mom = &f.momenta;
    if mom.len() != w.dim() {
        return invalid("F and W have different sizes");
    }
    if let Some(n) = (0..mom.len()).find(|&n| !mom.is_open(n)) {
        return Err(ZrpError::ClosedChannel { channel: n });
    }
    let dim = w.dim();
    let l = w.orbital();
    let k: Vec<f64> = mom.k().iter().map(|z| z.re).collect();
    let kmat = mom.matrix_k();
    let i = Complex64::i();

    let c = diag((0..dim).map(|n| i_pow(l[n] as i64) * k[n].powi(-(l[n] as i32)))) * &f.f;
    let cinv = linalg::invert(&c, "irregular-part normalization")?;
    let p = (CMatrix::identity(dim, dim) + &kmat * &f.f * i) * &cinv;
    let q = &f.f * &cinv;

    let odd_row = |n: usize, x: f64| -> Result<Vec<Complex64>> {
        let ln = l[n];
        let j = spherical_bessel_j(ln, k[n] * x)?;
        let pref = i_pow(ln as i64) * x.powi(ln as i32 + 1) * j;
        Ok((0..dim).map(|m| pref * p[(n, m)]).collect())
    };
    let even_row = |n: usize, x: f64| -> Result<Vec<Complex64>> {
        let ln = l[n];
        let y = spherical_bessel_y(ln, k[n] * x)?;
        let pref = -i_pow(ln as i64) * x.powi(ln as i32 + 1) * k[n] * y;
        Ok((0..dim).map(|m| pref * q[(n, m)]).collect())
    };

    let mut lhs = CMatrix::zeros(dim, dim);
    let mut origin = CMatrix::zeros(dim, dim);
    for n in 0..dim {
        let order = 2 * l[n] + 1;
        let mut acc = vec![Complex64::new(0.0, 0.0); dim];
        for jj in 0..=(order - 1) / 2 {
            let x = (order as f64 / 2.0 - jj as f64) * r;
            let coeff = binomial(order, jj) * if jj % 2 == 0 { 2.0 } else { -2.0 };
            for (a, v) in acc.iter_mut().zip(odd_row(n, x)?) {
                *a += coeff * v;
            }
        }
        let scale = r.powi(order as i32);
        for m in 0..dim {
            lhs[(n, m)] = acc[m] / scale;
        }
        let ev = even_row(n, 0.5 * r)?;
        for m in 0..dim {
            origin[(n, m)] = ev[m] / double_factorial(2 * l[n] as i64 - 1);
        }
    }
    let pref = diag((0..dim).map(|n| {
        let ln = l[n] as i64;
        Complex64::new(2f64.powi(ln as i32) * (1..=ln).map(|x| x as f64).product::<f64>(), 0.0)
    }));
    let rhs = -(pref * w.w() * origin);
    let residual = linalg::max_abs(&(lhs - rhs)) / linalg::max_abs(w.w()).max(1.0);
    let kr = k.iter().fold(0.0_f64, |a, &b| a.max(b)) * r;
    let warning = (kr > 0.2).then(|| format!("k r = {kr:.3} is outside the small-r regime"));
    Ok(SmallRCheck { residual, warning })
}
