//! Gauss-Legendre and Gauss-Hermite rules.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use nalgebra::Vector3;
use once_cell::sync::Lazy;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    /// `∫_{-1}^{1} f(x) dx`
    GaussLegendre,
    /// `∫_{-∞}^{∞} e^{-x²} f(x) dx`
    GaussHermite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: QuadratureKind,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return invalid("quadrature needs at least one node");
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        kind: QuadratureKind::GaussLegendre,
    })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

static HERMITE_RULES: Lazy<Mutex<HashMap<usize, QuadratureRule>>> = Lazy::new(|| Mutex::new(HashMap::new()));

/// `n`-point Gauss-Hermite rule for the weight `e^{-x²}`.
pub fn gauss_hermite(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return invalid("quadrature needs at least one node");
    }
    if let Some(rule) = HERMITE_RULES.lock().expect("rule cache").get(&n) {
        return Ok(rule.clone());
    }
    let rule = hermite_rule(n);
    HERMITE_RULES.lock().expect("rule cache").insert(n, rule.clone());
    Ok(rule)
}

fn hermite_rule(n: usize) -> QuadratureRule {
    let nf = n as f64;
    let half = n.div_ceil(2);
    let mut roots = vec![0.0; half];
    let mut ws = vec![0.0; half];
    // initial guesses from the Jacobi matrix eigenvalues, polished by Newton
    let jacobi = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut guesses: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    guesses.sort_by(|a, b| b.total_cmp(a));
    for i in 0..half {
        let mut z = guesses[i];
        for _ in 0..200 {
            let (p, d, _) = hermite_scaled(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        roots[i] = z;
        // w = 1/(n H̃_{n-1}(x)²), assembled in logs to survive large |x|
        let (_, d, log_scale) = hermite_scaled(n, z);
        let prev = d.abs() / (2.0 * nf).sqrt();
        ws[i] = (-nf.ln() - 2.0 * (prev.ln() + log_scale)).exp();
    }
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..half {
        nodes.push(-roots[i]);
        weights.push(ws[i]);
    }
    let start = if n % 2 == 1 { half - 1 } else { half };
    for i in (0..start).rev() {
        nodes.push(roots[i]);
        weights.push(ws[i]);
    }
    if n % 2 == 1 {
        nodes[half - 1] = 0.0;
    }
    QuadratureRule {
        nodes,
        weights,
        kind: QuadratureKind::GaussHermite,
    }
}

/// Orthonormal Hermite polynomial `H̃_n(x)` and its derivative, normalized
/// so that `∫ H̃_n H̃_m e^{-x²} dx = δ_nm`, both divided by `e^{log_scale}`.
fn hermite_scaled(n: usize, x: f64) -> (f64, f64, f64) {
    let mut p1 = PI.powf(-0.25);
    let mut p2 = 0.0;
    let mut log_scale = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = x * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        if p1.abs() > 1e150 {
            p1 *= 1e-150;
            p2 *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
    }
    (p1, (2.0 * n as f64).sqrt() * p2, log_scale)
}

/// Product rule on the unit sphere: Gauss-Legendre in `cos θ` times a
/// uniform trapezoid in `φ` (exact for trigonometric polynomials of degree
/// below `n_phi`). Yields `(direction, weight)`, weights summing to `4π`.
pub fn sphere_product_rule(n_theta: usize, n_phi: usize) -> Result<Vec<(Vector3<f64>, f64)>> {
    if n_phi == 0 {
        return invalid("sphere rule needs at least one azimuthal node");
    }
    let gl = gauss_legendre(n_theta)?;
    let dphi = 2.0 * PI / n_phi as f64;
    let mut out = Vec::with_capacity(n_theta * n_phi);
    for (x, w) in gl.iter() {
        let s = (1.0 - x * x).max(0.0).sqrt();
        for j in 0..n_phi {
            let phi = (j as f64 + 0.5) * dphi;
            out.push((Vector3::new(s * phi.cos(), s * phi.sin(), x), w * dphi));
        }
    }
    Ok(out)
}
