//! Spherical Bessel functions and the outgoing-wave function `h_λ` used in
//! the Green-function expansion.
//!
//! `h_λ(x) = x^λ (-(1/x) d/dx)^λ (e^{ix}/x)`. In terms of the standard
//! spherical Hankel function this is `h_λ = i h_λ^{(1)} = i j_λ - y_λ`, so
//! `Im h_λ(x) = j_λ(x)` on the real axis.

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Largest order accepted by the public Bessel routines.
pub const MAX_ORDER: u32 = 60;

/// Regular spherical Bessel function `j_λ(x)` for real `x ≥ 0`.
///
/// Power series for `x < 1`, upward recurrence when `x > λ` and Miller's
/// downward recurrence in between.
pub fn spherical_bessel_j(lambda: u32, x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return invalid(format!("spherical_bessel_j needs finite x >= 0, got {x}"));
    }
    if lambda > MAX_ORDER {
        return invalid(format!("order {lambda} exceeds {MAX_ORDER}"));
    }
    Ok(bessel_j_unchecked(lambda, x))
}

pub(crate) fn bessel_j_unchecked(lambda: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if lambda == 0 { 1.0 } else { 0.0 };
    }
    if x < 1.0 {
        return series_j(lambda, x);
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    if lambda == 0 {
        return j0;
    }
    let j1 = s / (x * x) - c / x;
    if lambda == 1 {
        return j1;
    }
    if x > lambda as f64 {
        let (mut prev, mut cur) = (j0, j1);
        for n in 1..lambda {
            let next = (2 * n + 1) as f64 / x * cur - prev;
            prev = cur;
            cur = next;
        }
        cur
    } else {
        miller_j(lambda, x, j0, j1)
    }
}

/// `j_0(x) … j_lmax(x)` into `out` (length `lmax + 1`), `x ≥ 0`. Downward
/// recurrence over the whole range, normalized by `j_0` or `j_1`.
pub(crate) fn bessel_j_sequence(x: f64, out: &mut [f64]) {
    let lmax = out.len().saturating_sub(1) as u32;
    if out.is_empty() {
        return;
    }
    if x < 1.0 {
        for (l, o) in out.iter_mut().enumerate() {
            *o = if x == 0.0 {
                if l == 0 { 1.0 } else { 0.0 }
            } else {
                series_j(l as u32, x)
            };
        }
        return;
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    if lmax == 0 {
        out[0] = j0;
        return;
    }
    let j1 = s / (x * x) - c / x;
    let start = lmax.max(x as u32) + 20 + (x.sqrt() * 10.0) as u32;
    let mut next = 0.0_f64;
    let mut cur = 1e-30_f64;
    let mut n = start;
    while n > 0 {
        let prev = (2 * n + 1) as f64 / x * cur - next;
        next = cur;
        cur = prev;
        n -= 1;
        if n <= lmax {
            out[n as usize] = cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            for o in out[n.min(lmax) as usize..].iter_mut() {
                *o *= 1e-250;
            }
        }
    }
    let norm = if j0.abs() >= j1.abs() { j0 / out[0] } else { j1 / out[1] };
    for o in out.iter_mut() {
        *o *= norm;
    }
}

fn series_j(lambda: u32, x: f64) -> f64 {
    // x^λ / (2λ+1)!! without overflowing the double factorial.
    let mut lead = 1.0;
    for i in 1..=lambda {
        lead *= x / (2 * i + 1) as f64;
    }
    let z = -0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60u32 {
        term *= z / (k as f64 * (2 * lambda + 2 * k + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    lead * sum
}

fn miller_j(lambda: u32, x: f64, j0: f64, j1: f64) -> f64 {
    let start = lambda + 20 + (x.sqrt() * 10.0) as u32;
    let mut next = 0.0_f64;
    let mut cur = 1e-30_f64;
    let mut target = 0.0;
    let mut f1 = 0.0;
    let mut f0 = 0.0;
    let mut n = start;
    while n > 0 {
        // f_{n-1} = (2n+1)/x f_n - f_{n+1}
        let prev = (2 * n + 1) as f64 / x * cur - next;
        next = cur;
        cur = prev;
        n -= 1;
        if n == lambda {
            target = cur;
        }
        if n == 1 {
            f1 = cur;
        }
        if n == 0 {
            f0 = cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            target *= 1e-250;
            f1 *= 1e-250;
        }
    }
    if lambda == start {
        target = 1e-30;
    }
    // Normalize against whichever of j0, j1 is farther from a zero.
    if j0.abs() >= j1.abs() {
        target * (j0 / f0)
    } else {
        target * (j1 / f1)
    }
}

/// Irregular spherical Bessel function `y_λ(x)` for `x > 0` (upward
/// recurrence, stable for all orders).
pub fn spherical_bessel_y(lambda: u32, x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return invalid(format!("spherical_bessel_y needs finite x > 0, got {x}"));
    }
    if lambda > MAX_ORDER {
        return invalid(format!("order {lambda} exceeds {MAX_ORDER}"));
    }
    let (s, c) = x.sin_cos();
    let y0 = -c / x;
    if lambda == 0 {
        return Ok(y0);
    }
    let y1 = -c / (x * x) - s / x;
    let (mut prev, mut cur) = (y0, y1);
    for n in 1..lambda {
        let next = (2 * n + 1) as f64 / x * cur - prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Outgoing-wave function `h_λ(x) = x^λ (-(1/x) d/dx)^λ (e^{ix}/x)` for real
/// `x > 0`, assembled as `-y_λ(x) + i j_λ(x)`.
pub fn hankel_paper_h(lambda: u32, x: f64) -> Result<Complex64> {
    if !x.is_finite() || x <= 0.0 {
        return invalid(format!("h_lambda is singular at x <= 0, got {x}"));
    }
    let j = spherical_bessel_j(lambda, x)?;
    let y = spherical_bessel_y(lambda, x)?;
    Ok(Complex64::new(-y, j))
}

/// `h_λ(z)` continued to complex argument through the terminating series
///
/// `h_λ(z) = (-i)^λ e^{iz}/z Σ_{k=0}^{λ} (λ+k)! / (k! (λ-k)!) (i/(2z))^k`.
///
/// Used for closed channels and for pole searches in the complex momentum
/// plane. Intended for the low orders (`λ ≲ 20`) that appear in the angular
/// sums; the alternating series loses accuracy for `|z| ≪ λ`.
pub fn hankel_paper_h_complex(lambda: u32, z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) || z.norm() == 0.0 {
        return invalid(format!("h_lambda is singular at z = {z}"));
    }
    if lambda > MAX_ORDER {
        return invalid(format!("order {lambda} exceeds {MAX_ORDER}"));
    }
    Ok(hankel_complex_unchecked(lambda, z))
}

/// Real positive arguments take the accurate `-y + ij` path, everything else
/// the terminating series.
pub(crate) fn hankel_unchecked(lambda: u32, z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re > 0.0 {
        if let Ok(h) = hankel_paper_h(lambda, z.re) {
            return h;
        }
    }
    hankel_complex_unchecked(lambda, z)
}

pub(crate) fn hankel_complex_unchecked(lambda: u32, z: Complex64) -> Complex64 {
    let i = Complex64::i();
    let step = i / (2.0 * z);
    let mut coeff = 1.0_f64; // (λ+k)!/(k!(λ-k)!)
    let mut pow = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(1.0, 0.0);
    for k in 1..=lambda {
        coeff *= ((lambda + k) * (lambda - k + 1)) as f64 / k as f64;
        pow *= step;
        sum += pow * coeff;
    }
    (-i).powu(lambda) * (i * z).exp() / z * sum
}
