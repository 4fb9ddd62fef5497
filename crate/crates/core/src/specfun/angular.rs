//! Legendre polynomials, spherical harmonics (Condon-Shortley phase), Wigner
//! 3-j symbols and the Gaunt-type angular integrals built from them.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::Vector3;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use once_cell::sync::Lazy;

use crate::error::{invalid, Result};

/// Largest angular momentum handled by the spherical harmonics.
pub const MAX_L: u32 = 60;

/// Orbital angular momentum `l` with projection `m`, `|m| ≤ l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AngularIndex {
    l: u32,
    m: i32,
}

impl AngularIndex {
    pub fn new(l: u32, m: i32) -> Result<Self> {
        if m.unsigned_abs() > l {
            return invalid(format!("|m| = {} exceeds l = {l}", m.abs()));
        }
        Ok(Self { l, m })
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn m(&self) -> i32 {
        self.m
    }
}

/// Legendre polynomial `P_λ(x)` by the three-term recurrence.
pub fn legendre_p(lambda: u32, x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return invalid(format!("legendre_p needs |x| <= 1, got {x}"));
    }
    Ok(legendre_unchecked(lambda, x))
}

pub(crate) fn legendre_unchecked(lambda: u32, x: f64) -> f64 {
    if x == 1.0 {
        return 1.0;
    }
    if x == -1.0 {
        return if lambda.is_multiple_of(2) { 1.0 } else { -1.0 };
    }
    let (mut p0, mut p1) = (1.0, x);
    if lambda == 0 {
        return p0;
    }
    for k in 2..=lambda {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Normalized associated Legendre function
/// `sqrt((2l+1)/4π (l-m)!/(l+m)!) P_l^m(cos θ)` for `m ≥ 0`, Condon-Shortley
/// phase included, evaluated from `cos θ` and `sin θ ≥ 0`.
fn normalized_plm(l: u32, m: u32, cos_t: f64, sin_t: f64) -> f64 {
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for i in 1..=m {
        pmm *= -sin_t * ((2 * i + 1) as f64 / (2 * i) as f64).sqrt();
    }
    if l == m {
        return pmm;
    }
    let mut p_prev = pmm;
    let mut p_cur = cos_t * ((2 * m + 3) as f64).sqrt() * pmm;
    for ll in (m + 2)..=l {
        let lf = ll as f64;
        let mf = m as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let lp = lf - 1.0;
        let b = ((lp * lp - mf * mf) / (4.0 * lp * lp - 1.0)).sqrt();
        let next = a * (cos_t * p_cur - b * p_prev);
        p_prev = p_cur;
        p_cur = next;
    }
    p_cur
}

fn check_unit(direction: &Vector3<f64>) -> Result<()> {
    let norm = direction.norm();
    if !((norm - 1.0).abs() <= 1e-12) {
        return invalid(format!("direction must be a unit vector, |n| = {norm}"));
    }
    Ok(())
}

/// Spherical harmonic `Y_lm(n)` with the Condon-Shortley phase.
pub fn sph_harm(idx: AngularIndex, direction: &Vector3<f64>) -> Result<Complex64> {
    check_unit(direction)?;
    if idx.l > MAX_L {
        return invalid(format!("l = {} exceeds {MAX_L}", idx.l));
    }
    Ok(sph_harm_unchecked(idx, direction))
}

pub(crate) fn sph_harm_unchecked(idx: AngularIndex, n: &Vector3<f64>) -> Complex64 {
    let rho = n.x.hypot(n.y);
    let r = rho.hypot(n.z);
    let (cos_t, sin_t) = (n.z / r, rho / r);
    let ma = idx.m.unsigned_abs();
    let p = normalized_plm(idx.l, ma, cos_t, sin_t);
    if ma == 0 {
        return Complex64::new(p, 0.0);
    }
    let phi = n.y.atan2(n.x);
    let y = Complex64::from_polar(p, ma as f64 * phi);
    if idx.m < 0 {
        if ma.is_multiple_of(2) {
            y.conj()
        } else {
            -y.conj()
        }
    } else {
        y
    }
}

/// `Y_λμ(v/|v|)`, with the zero vector mapped to `δ_λ0 δ_μ0 / sqrt(4π)`.
pub fn sph_harm_vec(idx: AngularIndex, v: &Vector3<f64>) -> Complex64 {
    if v.norm() == 0.0 {
        return if idx.l == 0 {
            Complex64::new((4.0 * PI).sqrt().recip(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    sph_harm_unchecked(idx, v)
}

const FACTORIAL_TABLE: usize = 400;

static FACTORIALS: Lazy<Vec<BigInt>> = Lazy::new(|| {
    let mut f = Vec::with_capacity(FACTORIAL_TABLE);
    f.push(BigInt::one());
    for i in 1..FACTORIAL_TABLE {
        let next = &f[i - 1] * BigInt::from(i);
        f.push(next);
    }
    f
});

fn fact(n: i64) -> &'static BigInt {
    &FACTORIALS[n as usize]
}

/// Largest `j` accepted by [`wigner3j`]; the exact factorial table covers
/// `j1 + j2 + j3 + 1 < 400`.
pub const MAX_3J: i32 = 130;

/// Wigner 3-j symbol for integer arguments.
///
/// The Racah sum is evaluated exactly in rational arithmetic and only the
/// final square root is taken in floating point. Returns 0 whenever a
/// selection rule fails.
pub fn wigner3j(j1: i32, j2: i32, j3: i32, m1: i32, m2: i32, m3: i32) -> f64 {
    let key = [j1, j2, j3, m1, m2, m3];
    if let Some(v) = THREE_J_CACHE.with(|c| c.borrow().get(&key).copied()) {
        return v;
    }
    let v = wigner3j_exact(j1, j2, j3, m1, m2, m3);
    THREE_J_CACHE.with(|c| {
        let mut c = c.borrow_mut();
        if c.len() >= THREE_J_CACHE_LIMIT {
            c.clear();
        }
        c.insert(key, v);
    });
    v
}

const THREE_J_CACHE_LIMIT: usize = 1 << 20;

thread_local! {
    static THREE_J_CACHE: RefCell<HashMap<[i32; 6], f64>> = RefCell::new(HashMap::new());
}

fn wigner3j_exact(j1: i32, j2: i32, j3: i32, m1: i32, m2: i32, m3: i32) -> f64 {
    if j1 < 0 || j2 < 0 || j3 < 0 || j1.max(j2).max(j3) > MAX_3J {
        return 0.0;
    }
    if m1 + m2 + m3 != 0 || m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
        return 0.0;
    }
    if j3 > j1 + j2 || j3 < (j1 - j2).abs() {
        return 0.0;
    }
    if m1 == 0 && m2 == 0 && m3 == 0 && (j1 + j2 + j3) % 2 == 1 {
        return 0.0;
    }
    let (j1, j2, j3, m1, m2, m3) = (
        j1 as i64, j2 as i64, j3 as i64, m1 as i64, m2 as i64, m3 as i64,
    );

    let kmin = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let kmax = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
    let mut sum = BigRational::zero();
    for k in kmin..=kmax {
        let den = fact(k)
            * fact(j3 - j2 + k + m1)
            * fact(j3 - j1 + k - m2)
            * fact(j1 + j2 - j3 - k)
            * fact(j1 - k - m1)
            * fact(j2 - k + m2);
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return 0.0;
    }
    let triangle = BigRational::new(
        fact(j1 + j2 - j3) * fact(j1 - j2 + j3) * fact(-j1 + j2 + j3),
        fact(j1 + j2 + j3 + 1).clone(),
    );
    let projections = fact(j1 + m1)
        * fact(j1 - m1)
        * fact(j2 + m2)
        * fact(j2 - m2)
        * fact(j3 + m3)
        * fact(j3 - m3);
    let square = triangle * BigRational::from_integer(projections) * &sum * &sum;
    let magnitude = square.to_f64().unwrap_or(f64::NAN).sqrt();
    let phase_odd = (j1 - j2 - m3).rem_euclid(2) == 1;
    let negative = sum.is_negative() ^ phase_odd;
    if negative {
        -magnitude
    } else {
        magnitude
    }
}

/// Clebsch-Gordan coefficient `<j1 m1 j2 m2 | J M>` for integer arguments.
pub fn clebsch_gordan(j1: i32, m1: i32, j2: i32, m2: i32, j: i32, m: i32) -> f64 {
    let phase = if (j1 - j2 + m).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    phase * ((2 * j + 1) as f64).sqrt() * wigner3j(j1, j2, j, m1, m2, -m)
}

/// `∫ |Y_lm(n)|² P_λ(n·e_z) dΩ`
/// `= (-1)^m (2l+1) (l l λ; 0 0 0) (l l λ; m -m 0)`.
///
/// Exactly zero for odd `λ` and for `λ > 2l`.
pub fn gaunt_yyp(idx: AngularIndex, lambda: u32) -> f64 {
    if lambda % 2 == 1 || lambda > 2 * idx.l {
        return 0.0;
    }
    let (l, m, lam) = (idx.l as i32, idx.m, lambda as i32);
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    sign * (2 * l + 1) as f64 * wigner3j(l, l, lam, 0, 0, 0) * wigner3j(l, l, lam, m, -m, 0)
}

/// `∫ conj(Y_{l1 m1}) Y_{l2 m2} Y_{l3 m3} dΩ`.
pub fn gaunt_conj(a: AngularIndex, b: AngularIndex, c: AngularIndex) -> f64 {
    let (l1, l2, l3) = (a.l as i32, b.l as i32, c.l as i32);
    let parity = wigner3j(l1, l2, l3, 0, 0, 0);
    if parity == 0.0 {
        return 0.0;
    }
    let sign = if a.m % 2 == 0 { 1.0 } else { -1.0 };
    let norm = (((2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1)) as f64 / (4.0 * PI)).sqrt();
    sign * norm * parity * wigner3j(l1, l2, l3, -a.m, b.m, c.m)
}

/// `∫ conj(Y_{l1 m1}) Y_{l2 m2} P_λ(n·u) dΩ_n` for an arbitrary unit axis
/// `u`, through the addition theorem
/// `P_λ(n·u) = 4π/(2λ+1) Σ_μ Y_λμ(n) conj(Y_λμ(u))`.
pub(crate) fn legendre_overlap(a: AngularIndex, b: AngularIndex, lambda: u32, axis: &Vector3<f64>) -> Complex64 {
    let mu = a.m - b.m;
    if mu.unsigned_abs() > lambda {
        return Complex64::new(0.0, 0.0);
    }
    let c = AngularIndex { l: lambda, m: mu };
    let g = gaunt_conj(a, b, c);
    if g == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    4.0 * PI / (2 * lambda + 1) as f64 * g * sph_harm_unchecked(c, axis).conj()
}
