//! Adiabatic electron-vibrational cross sections for the two-center,
//! two-state model.
//!
//! Vibrational states are harmonic-oscillator functions in the
//! half-separation `R`. The orientation-averaged DCS is
//!
//! ```text
//! dσ/dΩ(nv ← 0v₀) = (4π)² M_n k_n/k₀ Σ_{λλ'μ} Q_λμ Q*_λ'μ ∫|Y_{l_n m_n}|² Y*_λμ Y_λ'μ dΩ
//! ```
//!
//! with `Q_λμ` built from vibrational matrix elements of `Z^{(±)}_n j_λ(|q_±|R)`,
//! `q_± = k_n n ± k₀ n₀`, in the frame whose polar axis is `n`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use nalgebra::Vector3;
use num_complex::Complex64;
use once_cell::sync::Lazy;

use crate::channels::{kpow, Momenta};
use crate::error::{invalid, Result, ZrpError};
use crate::linalg::i_pow;
use crate::specfun::{
    bessel_j_sequence, bessel_j_unchecked, gauss_hermite, gauss_legendre, gaunt_yyp, sph_harm_unchecked, sph_harm_vec, AngularIndex,
};
use crate::twocenter::{theta0, theta1, TwoCenterModel};

/// Harmonic vibrational model in the half-separation coordinate. Lengths in
/// bohr, `omega` in hartree. `mu` is the nuclear reduced mass in electron
/// masses (918.076 for H₂), conjugate to the internuclear distance `2R`, so
/// the oscillator in `R` carries mass `4μ`. An optional final-state curve
/// `(R_e, ω)` replaces the initial one for `⟨nv|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibModel {
    pub r_e: f64,
    pub omega: f64,
    pub mu: f64,
    pub n_basis: usize,
    pub final_curve: Option<(f64, f64)>,
}

impl VibModel {
    pub fn new(r_e: f64, omega: f64, mu: f64, n_basis: usize) -> Result<Self> {
        for (name, x) in [("R_e", r_e), ("omega", omega), ("mu", mu)] {
            if !(x > 0.0 && x.is_finite()) {
                return invalid(format!("{name} must be positive, got {x}"));
            }
        }
        if n_basis == 0 {
            return invalid("n_basis must be at least 1");
        }
        Ok(Self {
            r_e,
            omega,
            mu,
            n_basis,
            final_curve: None,
        })
    }

    pub fn with_final_curve(self, r_e: f64, omega: f64) -> Result<Self> {
        if !(r_e > 0.0 && omega > 0.0 && r_e.is_finite() && omega.is_finite()) {
            return invalid("final curve needs positive R_e and omega");
        }
        Ok(Self {
            final_curve: Some((r_e, omega)),
            ..self
        })
    }

    /// Oscillator mass in the `R` coordinate.
    pub fn mass_r(&self) -> f64 {
        4.0 * self.mu
    }

    /// RMS width `sqrt(1/(2·4μω))` of `|χ₀|²` in `R`.
    pub fn width(&self) -> f64 {
        (0.5 / (self.mass_r() * self.omega)).sqrt()
    }

    pub fn validity_warning(&self) -> Option<String> {
        let w = self.width();
        (w > 0.25 * self.r_e).then(|| {
            format!(
                "vibrational ground-state width {w:.4} bohr is not small against R_e = {:.4}; the harmonic model reaches R <= 0",
                self.r_e
            )
        })
    }

    /// `ε_v = ω(v + 1/2)` on the initial curve, or the final one if `final_state`.
    pub fn level_energy(&self, v: usize, final_state: bool) -> f64 {
        let omega = match (final_state, self.final_curve) {
            (true, Some((_, w))) => w,
            _ => self.omega,
        };
        omega * (v as f64 + 0.5)
    }

    fn curve(&self, final_state: bool) -> (f64, f64) {
        match (final_state, self.final_curve) {
            (true, Some(c)) => c,
            _ => (self.r_e, self.omega),
        }
    }

    fn check_level(&self, v: usize) -> Result<()> {
        if v >= self.n_basis {
            return invalid(format!("vibrational level {v} outside the basis of {} levels", self.n_basis));
        }
        Ok(())
    }
}

/// Normalized Hermite functions without the Gaussian,
/// `h̃_v(x) = H_v(x) / sqrt(2^v v! √π)`, for `v ≤ vmax`.
fn hermite_normalized(vmax: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(vmax + 1);
    h.push(PI.powf(-0.25));
    if vmax >= 1 {
        h.push(2f64.sqrt() * x * h[0]);
    }
    for v in 1..vmax {
        let next = (2.0 / (v + 1) as f64).sqrt() * x * h[v] - (v as f64 / (v + 1) as f64).sqrt() * h[v - 1];
        h.push(next);
    }
    h
}

fn chi(mass: f64, r_e: f64, omega: f64, v: usize, r: f64) -> f64 {
    let s = (mass * omega).sqrt();
    let xi = s * (r - r_e);
    s.sqrt() * hermite_normalized(v, xi)[v] * (-0.5 * xi * xi).exp()
}

/// Normalized `χ_v(R)` on the initial curve.
pub fn vib_wavefunction(vm: &VibModel, v: usize, r: f64) -> Result<f64> {
    vm.check_level(v)?;
    Ok(chi(vm.mass_r(), vm.r_e, vm.omega, v, r))
}

/// Nodes `R_i` and weights `w_i` such that `Σ w_i g(R_i) ≈ ∫ χ^f_v g χ^i_v0 dR`.
fn pair_rule(vm: &VibModel, v: usize, v0: usize, final_state: bool, n_nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let gh = gauss_hermite(n_nodes)?;
    let (rf, wf) = vm.curve(final_state);
    let (ri, wi) = vm.curve(false);
    if rf == ri && wf == wi {
        let s = (vm.mass_r() * wi).sqrt();
        let mut nodes = Vec::with_capacity(gh.len());
        let mut weights = Vec::with_capacity(gh.len());
        for (x, w) in gh.iter() {
            let h = hermite_normalized(v.max(v0), x);
            nodes.push(ri + x / s);
            weights.push(w * h[v] * h[v0]);
        }
        return Ok((nodes, weights));
    }
    let rc = (wf * rf + wi * ri) / (wf + wi);
    let scale = (2.0 / (vm.mass_r() * (wf + wi))).sqrt();
    let mut nodes = Vec::with_capacity(gh.len());
    let mut weights = Vec::with_capacity(gh.len());
    for (x, w) in gh.iter() {
        let r = rc + scale * x;
        nodes.push(r);
        weights.push(w * scale * (x * x).exp() * chi(vm.mass_r(), rf, wf, v, r) * chi(vm.mass_r(), ri, wi, v0, r));
    }
    Ok((nodes, weights))
}

/// Interval outside which every `χ` involved is below roughly 1e-20.
fn support_window(vm: &VibModel, v: usize, v0: usize, final_state: bool) -> (f64, f64) {
    let reach = ((2 * v.max(v0) + 1) as f64).sqrt() + 10.0;
    let (rf, wf) = vm.curve(final_state);
    let (ri, wi) = vm.curve(false);
    let x = reach / (vm.mass_r() * wf.min(wi)).sqrt();
    (rf.min(ri) - x, rf.max(ri) + x)
}

const PANEL_ORDER: usize = 20;
const MAX_PANELS: usize = 1 << 14;

/// Adaptive composite Gauss-Legendre rule for `∫ χ^f_v f χ^i_v0 dR`, refined
/// by bisection until every component of `f` agrees between a panel and its
/// halves to `tol` relative to the largest `∫|χχ f|`.
fn composite_pair_rule<F>(vm: &VibModel, v: usize, v0: usize, final_state: bool, tol: f64, f: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(f64) -> Vec<Complex64>,
{
    let gl = gauss_legendre(PANEL_ORDER)?;
    let (rf, wf) = vm.curve(final_state);
    let (ri, wi) = vm.curve(false);
    let weight = |r: f64| chi(vm.mass_r(), rf, wf, v, r) * chi(vm.mass_r(), ri, wi, v0, r);
    let panel = |a: f64, b: f64| -> (Vec<Complex64>, Vec<f64>) {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let mut sum: Vec<Complex64> = Vec::new();
        let mut abs: Vec<f64> = Vec::new();
        for (x, w) in gl.iter() {
            let r = mid + half * x;
            let vals = f(r);
            let c = w * half * weight(r);
            if sum.is_empty() {
                sum = vec![Complex64::new(0.0, 0.0); vals.len()];
                abs = vec![0.0; vals.len()];
            }
            for (k, val) in vals.iter().enumerate() {
                sum[k] += c * val;
                abs[k] += (c * val).norm();
            }
        }
        (sum, abs)
    };
    let (a, b) = support_window(vm, v, v0, final_state);
    // coarse pass for the scale
    let coarse = 16;
    let h = (b - a) / coarse as f64;
    let mut scale = 0.0f64;
    for i in 0..coarse {
        let (_, abs) = panel(a + h * i as f64, a + h * (i + 1) as f64);
        scale = scale.max(abs.iter().sum());
    }
    let scale = scale.max(f64::MIN_POSITIVE);
    let mut stack: Vec<(f64, f64)> = (0..coarse).rev().map(|i| (a + h * i as f64, a + h * (i + 1) as f64)).collect();
    let mut leaves = Vec::new();
    while let Some((lo, hi)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let (whole, _) = panel(lo, hi);
        let (left, _) = panel(lo, mid);
        let (right, _) = panel(mid, hi);
        let err = whole.iter().zip(left.iter().zip(&right)).map(|(w, (l, r))| (w - l - r).norm()).fold(0.0, f64::max);
        if err <= tol * scale * (hi - lo) / (b - a) || hi - lo < 1e-9 * (b - a) {
            leaves.push((lo, mid));
            leaves.push((mid, hi));
        } else {
            stack.push((mid, hi));
            stack.push((lo, mid));
        }
        if leaves.len() + stack.len() > MAX_PANELS {
            return Err(ZrpError::NotConverged {
                quantity: "adaptive vibrational quadrature".into(),
                detail: format!("more than {MAX_PANELS} panels needed"),
            });
        }
    }
    leaves.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut nodes = Vec::with_capacity(leaves.len() * PANEL_ORDER);
    let mut weights = Vec::with_capacity(leaves.len() * PANEL_ORDER);
    for (lo, hi) in leaves {
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (x, w) in gl.iter() {
            let r = mid + half * x;
            nodes.push(r);
            weights.push(w * half * weight(r));
        }
    }
    Ok((nodes, weights))
}

/// Default number of Gauss-Hermite nodes for vibrational integrals.
pub const VIB_NODES: usize = 64;
/// Largest Gauss-Hermite order tried by the doubling sequence.
pub const VIB_NODES_MAX: usize = 512;
const VIB_CONVERGED: f64 = 1e-10;

/// `∫ χ_v(R) g(R) χ_v0(R) dR` (initial curve for both states). The
/// Gauss-Hermite order doubles from 64 until the relative change is below
/// 1e-10; past 512 nodes adaptive Gauss-Legendre panels take over, which is
/// what a complex singularity of `g` close to the real axis needs.
pub fn vib_matrix_element<G>(vm: &VibModel, v: usize, v0: usize, g: G) -> Result<Complex64>
where
    G: Fn(f64) -> Complex64,
{
    vm.check_level(v)?;
    vm.check_level(v0)?;
    let eval = |n| -> Result<(Complex64, f64)> {
        let (nodes, weights) = pair_rule(vm, v, v0, false, n)?;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut abs = 0.0;
        for (r, w) in nodes.iter().zip(&weights) {
            let t = *w * g(*r);
            sum += t;
            abs += t.norm();
        }
        Ok((sum, abs))
    };
    let mut n = VIB_NODES;
    let (mut last, _) = eval(n)?;
    while n < VIB_NODES_MAX {
        n *= 2;
        let (next, scale) = eval(n)?;
        let change = (next - last).norm() / next.norm().max(1e-3 * scale).max(f64::MIN_POSITIVE);
        last = next;
        if change < VIB_CONVERGED {
            return Ok(last);
        }
    }
    // slow Gauss-Hermite convergence: a complex singularity of g close to
    // the real axis. Resolve it with adaptive panels instead.
    let (nodes, weights) = composite_pair_rule(vm, v, v0, false, 1e-12, |r| vec![g(r)])?;
    Ok(nodes.iter().zip(&weights).map(|(r, w)| *w * g(*r)).sum())
}

/// `B_lm(x) = Σ_{λ even ≤ 2l} i^λ (2λ+1) j_λ(x) ∫|Y_lm|² P_λ dΩ`. Real, since
/// only even λ contribute; `x` may be negative (`B` is even).
pub fn b_lm(l: u32, m: i32, x: f64) -> Result<f64> {
    let idx = AngularIndex::new(l, m)?;
    Ok(b_lm_unchecked(idx, x))
}

fn b_lm_unchecked(idx: AngularIndex, x: f64) -> f64 {
    let ax = x.abs();
    (0..=2 * idx.l())
        .step_by(2)
        .map(|lam| {
            let sign = if lam % 4 == 0 { 1.0 } else { -1.0 };
            sign * (2 * lam + 1) as f64 * bessel_j_unchecked(lam, ax) * gaunt_yyp(idx, lam)
        })
        .sum()
}

/// How the final-channel momentum depends on the vibrational level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentumMode {
    /// `k_n` from the electronic excitation energy only.
    #[default]
    Literal,
    /// `k_nv² = k₀² - 2E_n - 2(ε_v - ε_v0)`.
    Resolved,
}

/// Electron-vibrational transition `(n, v) ← (0, v₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionSpec {
    pub n: usize,
    pub v: usize,
    pub v0: usize,
    /// Projection degeneracy factor `M_n = 2 - δ_{m_n 0}`.
    pub m_n: u32,
}

impl TransitionSpec {
    pub fn new(model: &TwoCenterModel, n: usize, v: usize, v0: usize) -> Result<Self> {
        let m = match n {
            0 => 0,
            1 => model.m,
            _ => return invalid(format!("the two-state model has channels 0 and 1, got {n}")),
        };
        Ok(Self {
            n,
            v,
            v0,
            m_n: if m == 0 { 1 } else { 2 },
        })
    }
}

const LAMBDA_CAP: u32 = 60;
const ANGULAR_NODES: usize = 72;

/// `I(λ, λ', μ) = ∫|Y_lm|² Y*_λμ Y_λ'μ dΩ` for `λ, λ' ≤ 60`, `|λ - λ'| ≤ 2l`.
#[derive(Debug)]
struct AngularTable {
    band: usize,
    data: Vec<f64>,
}

impl AngularTable {
    fn build(idx: AngularIndex) -> Self {
        let l = idx.l() as usize;
        let band = 4 * l + 1;
        let cap = LAMBDA_CAP as usize;
        let width = 2 * cap + 1;
        let gl = gauss_legendre(ANGULAR_NODES).expect("fixed order");
        // Θ_λμ(x) = Y_λμ(θ, φ = 0), real
        let dirs: Vec<Vector3<f64>> = gl.nodes.iter().map(|&x| Vector3::new((1.0 - x * x).sqrt(), 0.0, x)).collect();
        let yl: Vec<f64> = dirs.iter().map(|d| sph_harm_unchecked(idx, d).norm_sqr()).collect();
        let mut theta = vec![vec![vec![0.0; ANGULAR_NODES]; width]; cap + 1];
        for lam in 0..=cap {
            for mu in -(lam as i32)..=lam as i32 {
                let a = AngularIndex::new(lam as u32, mu).expect("valid");
                for (i, d) in dirs.iter().enumerate() {
                    theta[lam][(mu + cap as i32) as usize][i] = sph_harm_unchecked(a, d).re;
                }
            }
        }
        let mut data = vec![0.0; (cap + 1) * band * width];
        for lam in 0..=cap {
            for off in 0..band {
                let lp = lam as i64 + off as i64 - 2 * l as i64;
                if lp < 0 || lp > cap as i64 || (lam as i64 + lp) % 2 == 1 {
                    continue;
                }
                let lp = lp as usize;
                for mu in -(lam.min(lp) as i32)..=lam.min(lp) as i32 {
                    let col = (mu + cap as i32) as usize;
                    let (a, b) = (&theta[lam][col], &theta[lp][col]);
                    let s: f64 = (0..ANGULAR_NODES).map(|i| gl.weights[i] * yl[i] * a[i] * b[i]).sum();
                    data[(lam * band + off) * width + col] = 2.0 * PI * s;
                }
            }
        }
        Self { band, data }
    }

    fn get(&self, l: u32, lam: u32, lp: u32, mu: i32) -> f64 {
        let off = lp as i64 - lam as i64 + 2 * l as i64;
        if off < 0 || off as usize >= self.band {
            return 0.0;
        }
        let width = 2 * LAMBDA_CAP as usize + 1;
        self.data[(lam as usize * self.band + off as usize) * width + (mu + LAMBDA_CAP as i32) as usize]
    }
}

static TABLES: Lazy<Mutex<HashMap<(u32, i32), Arc<AngularTable>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

fn angular_table(idx: AngularIndex) -> Arc<AngularTable> {
    let key = (idx.l(), idx.m());
    if let Some(t) = TABLES.lock().expect("angular table lock").get(&key) {
        return t.clone();
    }
    let table = Arc::new(AngularTable::build(idx));
    TABLES.lock().expect("angular table lock").entry(key).or_insert(table).clone()
}

/// `∫|Y_lm|² Y*_λμ Y_λ'μ dΩ` (exact for `λ, λ' ≤ 60`).
pub fn angular_integral(idx: AngularIndex, lambda: u32, lambda_p: u32, mu: i32) -> Result<f64> {
    if lambda > LAMBDA_CAP || lambda_p > LAMBDA_CAP {
        return invalid(format!("angular integral limited to lambda <= {LAMBDA_CAP}"));
    }
    if mu.unsigned_abs() > lambda.min(lambda_p) {
        return Ok(0.0);
    }
    if idx.l() > 8 {
        return invalid("angular integral tables support l <= 8");
    }
    Ok(angular_table(idx).get(idx.l(), lambda, lambda_p, mu))
}

/// `Z^{(±)}_n` at half-separation `r` (any sign, `r ≠ 0`), momenta `(k₀, k₁)`.
fn z_pair(model: &TwoCenterModel, k0: Complex64, k1: Complex64, n: usize, r: f64) -> (Complex64, Complex64, f64) {
    let idx = model.excited_index();
    let (e0, e1) = (model.eta0 as f64, model.eta1 as f64);
    let c2 = model.c * model.c;
    let mut out = [Complex64::new(0.0, 0.0); 2];
    let mut dmin = f64::INFINITY;
    for (s, slot) in [(1.0, 0), (-1.0, 1)] {
        let t0 = theta0(s * e0, model.alpha0, k0, r);
        let t1 = theta1(s * e1, model.alpha1, k1, idx, r);
        let d = t0 * t1 - c2;
        dmin = dmin.min(d.norm());
        out[slot] = if n == 0 { -t1 / d } else { model.c * kpow(k1, model.l as f64) / d };
    }
    (out[0], out[1], dmin)
}

fn rp(x: f64) -> f64 {
    if x == 0.0 {
        f64::MIN_POSITIVE
    } else {
        x
    }
}

/// Cross-section evaluator at one collision energy.
#[derive(Debug)]
pub struct VibroCalc {
    model: TwoCenterModel,
    vm: VibModel,
    k0: f64,
    e1: f64,
    mode: MomentumMode,
    clamped: Arc<AtomicUsize>,
}

impl VibroCalc {
    /// `mom` supplies `k₀` and the electronic `k₁` (excitation energy
    /// `E₁ = (k₀² - k₁²)/2`); channel 0 must be open.
    pub fn new(model: &TwoCenterModel, vm: &VibModel, mom: &Momenta, mode: MomentumMode) -> Result<Self> {
        model.validate()?;
        if mom.len() != 2 || !mom.is_open(0) {
            return invalid("two open-entrance channel momenta required");
        }
        let k0 = mom.k0().re;
        let k1 = mom.k()[1];
        let e1 = 0.5 * (k0 * k0 - (k1 * k1).re);
        Ok(Self {
            model: *model,
            vm: *vm,
            k0,
            e1,
            mode,
            clamped: Arc::new(AtomicUsize::new(0)),
        })
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn mode(&self) -> MomentumMode {
        self.mode
    }

    /// Number of DCS values in `[-1e-12, 0)` clamped to zero so far.
    pub fn clamped_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Final-channel energy `k²/2` of a transition in the active mode.
    pub fn final_energy(&self, t: &TransitionSpec) -> f64 {
        let e_n = if t.n == 0 { 0.0 } else { self.e1 };
        let shift = match self.mode {
            MomentumMode::Literal => 0.0,
            MomentumMode::Resolved => self.vm.level_energy(t.v, t.n != 0) - self.vm.level_energy(t.v0, false),
        };
        0.5 * self.k0 * self.k0 - e_n - shift
    }

    fn electronic_k1(&self) -> Complex64 {
        crate::channels::branch_sqrt(Complex64::new(self.k0 * self.k0 - 2.0 * self.e1, 0.0))
    }

    /// Precomputes the vibrationally weighted `Z` combinations of a transition.
    pub fn transition(&self, t: &TransitionSpec) -> Result<TransitionData> {
        self.vm.check_level(t.v)?;
        self.vm.check_level(t.v0)?;
        if t.n > 1 {
            return invalid(format!("channel {} outside the two-state model", t.n));
        }
        let ef = self.final_energy(t);
        if !(ef > 0.0) {
            return Err(ZrpError::ClosedChannel { channel: t.n });
        }
        let k_n = (2.0 * ef).sqrt();
        let k1 = if t.n == 1 { Complex64::new(k_n, 0.0) } else { self.electronic_k1() };
        let k0c = Complex64::new(self.k0, 0.0);
        let (l_n, m_n, eta_n) = if t.n == 0 {
            (0, 0, self.model.eta0)
        } else {
            (self.model.l, self.model.m, self.model.eta1)
        };
        let idx = AngularIndex::new(l_n, m_n)?;
        let weighted = |nodes: Vec<f64>, weights: Vec<f64>| -> (WeightedRule, f64) {
            let mut zsum = Vec::with_capacity(nodes.len());
            let mut zdiff = Vec::with_capacity(nodes.len());
            let mut dmin = f64::INFINITY;
            for (&r, &w) in nodes.iter().zip(&weights) {
                let (zp, zm, d) = z_pair(&self.model, k0c, k1, t.n, rp(r));
                if w.abs() > 1e-300 {
                    dmin = dmin.min(d);
                }
                zsum.push(w * (zp + zm));
                zdiff.push(w * (zp - zm));
            }
            (WeightedRule { nodes, zsum, zdiff }, dmin)
        };
        let build = |n_nodes| -> Result<(WeightedRule, f64)> {
            let (nodes, weights) = pair_rule(&self.vm, t.v, t.v0, t.n != 0, n_nodes)?;
            Ok(weighted(nodes, weights))
        };
        // the radial moments at forward, perpendicular and backward scattering
        // decide the order
        let probe_l = 2 * idx.l() + 8;
        let moments = |rule: &WeightedRule| -> Vec<Complex64> {
            let mut out = Vec::new();
            for c in [1.0, 0.0, -1.0] {
                let (qp, qm) = q_norms(self.k0, k_n, c);
                let (a, b) = radial_moments(rule, qp, qm, probe_l);
                out.extend(a);
                out.extend(b);
            }
            out
        };
        let mut n_nodes = VIB_NODES;
        let (mut rule, dmin) = build(n_nodes)?;
        let mut warnings = Vec::new();
        if dmin < 1e-8 {
            warnings.push(format!("pole proximity: |denominator| = {dmin:.3e} on the vibrational grid"));
        }
        let mut last = moments(&rule);
        let mut change = f64::INFINITY;
        while n_nodes < VIB_NODES_MAX {
            n_nodes *= 2;
            let (next_rule, _) = build(n_nodes)?;
            let next = moments(&next_rule);
            let scale = next.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let diff = next.iter().zip(&last).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            change = if scale == 0.0 { 0.0 } else { diff / scale };
            rule = next_rule;
            last = next;
            if change < VIB_CONVERGED {
                break;
            }
        }
        if change >= VIB_CONVERGED {
            let qmax = self.k0 + k_n;
            let (nodes, weights) = composite_pair_rule(&self.vm, t.v, t.v0, t.n != 0, 1e-12, |r| {
                let (zp, zm, _) = z_pair(&self.model, k0c, k1, t.n, rp(r));
                let osc = Complex64::new(0.0, qmax * r).exp();
                vec![zp, zm, zp * osc, zm * osc]
            })?;
            let (adaptive, _) = weighted(nodes, weights);
            warnings.push(format!(
                "Gauss-Hermite order {VIB_NODES_MAX} changed by {change:.3e}; used adaptive panels ({} nodes)",
                adaptive.nodes.len()
            ));
            n_nodes = adaptive.nodes.len();
            rule = adaptive;
        }
        let s = if l_n % 2 == 0 { eta_n as f64 } else { -(eta_n as f64) };
        Ok(TransitionData {
            spec: *t,
            idx,
            sym: s * self.model.eta0 as f64,
            eta0: self.model.eta0 as f64,
            k0: self.k0,
            k_n,
            rule,
            quadrature_change: change,
            nodes_used: n_nodes,
            table: angular_table(idx),
            warnings,
            clamped: self.clamped.clone(),
        })
    }

    /// `σ(n ← 0v₀)` summed over final vibrational states by closure
    /// (literal `k_n`).
    pub fn ics_closure(&self, n: usize, v0: usize) -> Result<f64> {
        self.vm.check_level(v0)?;
        let t = TransitionSpec::new(&self.model, n, v0, v0)?;
        let k_n = if n == 0 {
            self.k0
        } else {
            let k1 = self.electronic_k1();
            if k1.im != 0.0 || k1.re == 0.0 {
                return Err(ZrpError::ClosedChannel { channel: n });
            }
            k1.re
        };
        let (l_n, m_n, eta_n) = if n == 0 {
            (0, 0, self.model.eta0)
        } else {
            (self.model.l, self.model.m, self.model.eta1)
        };
        let idx = AngularIndex::new(l_n, m_n)?;
        let s = if l_n % 2 == 0 { eta_n as f64 } else { -(eta_n as f64) };
        let eta0 = self.model.eta0 as f64;
        let k0c = Complex64::new(self.k0, 0.0);
        let k1 = self.electronic_k1();
        let integrand = |r: f64| {
            let r = rp(r);
            let (zp, zm, _) = z_pair(&self.model, k0c, k1, n, r);
            let x0 = 2.0 * self.k0 * r;
            let sinc = x0.sin() / x0;
            let b = b_lm_unchecked(idx, 2.0 * k_n * r);
            Complex64::new(
                zp.norm_sqr() * (1.0 + eta0 * sinc) * (1.0 + s * b) + zm.norm_sqr() * (1.0 - eta0 * sinc) * (1.0 - s * b),
                0.0,
            )
        };
        let avg = vib_matrix_element(&self.vm, v0, v0, integrand)?.re;
        Ok(4.0 * PI * t.m_n as f64 * k_n / self.k0 * avg)
    }
}

#[derive(Debug, Clone)]
struct WeightedRule {
    nodes: Vec<f64>,
    zsum: Vec<Complex64>,
    zdiff: Vec<Complex64>,
}

/// `|k_n n ± k₀ n₀|` for `n·n₀ = c`.
fn q_norms(k0: f64, k_n: f64, c: f64) -> (f64, f64) {
    let cross = 2.0 * k0 * k_n * c;
    let base = k0 * k0 + k_n * k_n;
    ((base + cross).max(0.0).sqrt(), (base - cross).max(0.0).sqrt())
}

/// `⟨v|(Z⁺ - Z⁻) j_λ(q₊R)|v₀⟩` and `⟨v|(Z⁺ + Z⁻) j_λ(q₋R)|v₀⟩` for `λ ≤ lmax`.
fn radial_moments(rule: &WeightedRule, qp: f64, qm: f64, lmax: u32) -> (Vec<Complex64>, Vec<Complex64>) {
    let len = lmax as usize + 1;
    let mut mp = vec![Complex64::new(0.0, 0.0); len];
    let mut mm = vec![Complex64::new(0.0, 0.0); len];
    let (mut jp, mut jm) = (vec![0.0; len], vec![0.0; len]);
    for (i, &r) in rule.nodes.iter().enumerate() {
        bessel_j_sequence(qp * r.abs(), &mut jp);
        bessel_j_sequence(qm * r.abs(), &mut jm);
        for lam in 0..len {
            // j_λ(-x) = (-1)^λ j_λ(x)
            let sign = if r < 0.0 && lam % 2 == 1 { -1.0 } else { 1.0 };
            mp[lam] += rule.zdiff[i] * (sign * jp[lam]);
            mm[lam] += rule.zsum[i] * (sign * jm[lam]);
        }
    }
    (mp, mm)
}

/// Angular expansion coefficients at one scattering geometry.
#[derive(Debug, Clone)]
pub struct QExpansion {
    pub lambda_max: u32,
    /// `q[λ][μ + λ]`
    pub q: Vec<Vec<Complex64>>,
}

impl QExpansion {
    pub fn get(&self, lambda: u32, mu: i32) -> Complex64 {
        if lambda > self.lambda_max || mu.unsigned_abs() > lambda {
            return Complex64::new(0.0, 0.0);
        }
        self.q[lambda as usize][(mu + lambda as i32) as usize]
    }
}

/// Vibrationally averaged data of one transition at one energy.
#[derive(Debug)]
pub struct TransitionData {
    spec: TransitionSpec,
    idx: AngularIndex,
    /// `(-1)^{l_n} η_n η₀`
    sym: f64,
    eta0: f64,
    k0: f64,
    k_n: f64,
    rule: WeightedRule,
    quadrature_change: f64,
    nodes_used: usize,
    table: Arc<AngularTable>,
    warnings: Vec<String>,
    clamped: Arc<AtomicUsize>,
}

/// Tail tolerance for the λ expansion.
const TAIL_TOL: f64 = 1e-12;

impl TransitionData {
    pub fn spec(&self) -> &TransitionSpec {
        &self.spec
    }

    pub fn k_n(&self) -> f64 {
        self.k_n
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `(i^λ (-1)^{l_n} η_n η₀ + (-i)^λ)/2`; zero for the suppressed parity.
    fn prefactor(&self, lambda: u32) -> Complex64 {
        (i_pow(lambda as i64) * self.sym + i_pow(-(lambda as i64))) * 0.5
    }

    /// `Q_λμ` for all `λ ≤ λ_max`, in the frame with `n = e_z` and `n₀` at
    /// polar angle `acos(cos_theta)`. `λ_max` grows from `2l + 8` until the
    /// radial tail drops below 1e-12.
    pub fn q_expansion(&self, cos_theta: f64) -> Result<QExpansion> {
        let c = cos_theta.clamp(-1.0, 1.0);
        let n0 = Vector3::new((1.0 - c * c).sqrt(), 0.0, c);
        let qpv = Vector3::z() * self.k_n + n0 * self.k0;
        let qmv = Vector3::z() * self.k_n - n0 * self.k0;
        let (qp, qm) = (qpv.norm(), qmv.norm());
        let rule = &self.rule;
        let mut lmax = 2 * self.idx.l() + 8;
        let (mp, mm) = loop {
            let (mp, mm) = radial_moments(rule, qp, qm, lmax);
            let scale = mp.iter().chain(&mm).map(|z| z.norm()).fold(0.0, f64::max);
            let tail = (lmax.saturating_sub(2)..=lmax)
                .map(|l| mp[l as usize].norm() + mm[l as usize].norm())
                .fold(0.0, f64::max);
            if tail <= TAIL_TOL * scale || scale == 0.0 {
                break (mp, mm);
            }
            if lmax >= LAMBDA_CAP {
                if tail > 1e-10 * scale {
                    return Err(ZrpError::NotConverged {
                        quantity: "lambda expansion".into(),
                        detail: format!("tail {:.3e} of total at lambda_max = {LAMBDA_CAP}", tail / scale),
                    });
                }
                break (mp, mm);
            }
            lmax = (lmax + 4).min(LAMBDA_CAP);
        };
        let mut q = Vec::with_capacity(lmax as usize + 1);
        for lam in 0..=lmax {
            let pre = self.prefactor(lam);
            let row: Vec<Complex64> = (-(lam as i32)..=lam as i32)
                .map(|mu| {
                    if pre.norm() == 0.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let a = AngularIndex::new(lam, mu).expect("valid");
                    pre * (self.eta0 * sph_harm_vec(a, &qpv) * mp[lam as usize] + sph_harm_vec(a, &qmv) * mm[lam as usize])
                })
                .collect();
            q.push(row);
        }
        Ok(QExpansion { lambda_max: lmax, q })
    }

    /// Relative change of the radial matrix elements at the last doubling
    /// of the vibrational quadrature order.
    pub fn quadrature_change(&self) -> f64 {
        self.quadrature_change
    }

    /// Gauss-Hermite order used.
    pub fn nodes_used(&self) -> usize {
        self.nodes_used
    }

    /// DCS (bohr²/sr) at scattering angle `acos(cos_theta)` between `n₀` and `n`.
    pub fn dcs(&self, cos_theta: f64) -> Result<f64> {
        let qe = self.q_expansion(cos_theta)?;
        let l = self.idx.l();
        let mut sum = 0.0;
        for lam in 0..=qe.lambda_max {
            let lo = lam.saturating_sub(2 * l);
            let hi = (lam + 2 * l).min(qe.lambda_max);
            for lp in lo..=hi {
                let mu_max = lam.min(lp) as i32;
                for mu in -mu_max..=mu_max {
                    let ang = self.table.get(l, lam, lp, mu);
                    if ang != 0.0 {
                        sum += ang * (qe.get(lam, mu) * qe.get(lp, mu).conj()).re;
                    }
                }
            }
        }
        let value = (4.0 * PI).powi(2) * self.spec.m_n as f64 * self.k_n / self.k0 * sum;
        if value < 0.0 {
            let scale = self.spec.m_n as f64 * self.k_n / self.k0;
            if value >= -1e-12 * scale.max(1.0) {
                self.clamped.fetch_add(1, Ordering::Relaxed);
                return Ok(0.0);
            }
        }
        Ok(value)
    }

    /// DCS for explicit directions.
    pub fn dcs_directions(&self, n: &Vector3<f64>, n0: &Vector3<f64>) -> Result<f64> {
        self.dcs(n.dot(n0) / (n.norm() * n0.norm()))
    }

    /// `∫ dcs dΩ_n`, Gauss-Legendre in `cos θ`, order doubled until the
    /// relative change is below 1e-10.
    pub fn ics(&self) -> Result<f64> {
        let mut order = 32;
        let mut last = self.ics_order(order)?;
        while order < 512 {
            order *= 2;
            let next = self.ics_order(order)?;
            let change = (next - last).abs() / next.abs().max(f64::MIN_POSITIVE);
            last = next;
            if change < 1e-10 {
                return Ok(last);
            }
        }
        Err(ZrpError::NotConverged {
            quantity: "angular integration of the DCS".into(),
            detail: "512-point rule still changing by more than 1e-10".into(),
        })
    }

    fn ics_order(&self, order: usize) -> Result<f64> {
        let gl = gauss_legendre(order)?;
        let mut s = 0.0;
        for (x, w) in gl.iter() {
            s += w * self.dcs(x)?;
        }
        Ok(2.0 * PI * s)
    }
}

/// `Q_λμ` for the directions `n`, `n₀` (only their relative angle matters
/// after orientation averaging; the frame is `n = e_z`).
pub fn q_lambda_mu(data: &TransitionData, lambda: u32, mu: i32, n: &Vector3<f64>, n0: &Vector3<f64>) -> Result<Complex64> {
    let qe = data.q_expansion(n.dot(n0) / (n.norm() * n0.norm()))?;
    Ok(qe.get(lambda, mu))
}

/// Orientation-averaged DCS of `t` at the angle between `n` and `n₀`.
pub fn dcs(calc: &VibroCalc, t: &TransitionSpec, n: &Vector3<f64>, n0: &Vector3<f64>) -> Result<f64> {
    calc.transition(t)?.dcs_directions(n, n0)
}

/// Integral cross section of `t`.
pub fn ics_vib(calc: &VibroCalc, t: &TransitionSpec) -> Result<f64> {
    calc.transition(t)?.ics()
}

/// Closure-summed electronic ICS `σ(n ← 0v₀)`.
pub fn ics_closure(calc: &VibroCalc, n: usize, v0: usize) -> Result<f64> {
    calc.ics_closure(n, v0)
}
