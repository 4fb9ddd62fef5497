//! Two matrix zero-range potentials at `±R` related by inversion symmetry.
//!
//! With `U₂ = Σ P U₁ P⁻¹ Σ` the amplitude splits into gerade and ungerade
//! parts,
//!
//! ```text
//! F(n,n₀)/2π = Σ_± (A(n)e^{-iKn·R} ± ΣA(-n)e^{iKn·R}) (F⁻¹ ∓ ΣH)⁻¹
//!                   (A⁺(n₀)e^{iKn₀·R} ± ΣA⁺(-n₀)e^{-iKn₀·R}),
//! ```
//!
//! where `H = 4π∫ A⁺(n) H(2R,n;K) A(-n) dΩ` and
//! `H(2R,n;K) = K/4π Σ_λ i^λ (2λ+1) h_λ(2KR) P_λ(R̂·n)`.
//!
//! For an `s` ground state coupled to one excited `(l, m)` state this gives
//! the closed forms built on `θ₀`, `θ₁` below.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::channels::{kpow, Channel, ChannelSet, Momenta};
use crate::error::{invalid, Parity, Result, ZrpError};
use crate::field::AmplitudeField;
use crate::linalg::{self, diag, i_pow, CMatrix};
use crate::one_center::{inverse_f_kernel, InteractionW};
use crate::specfun::{
    gaunt_yyp, hankel_unchecked, legendre_overlap, legendre_unchecked, sph_harm_unchecked,
    gauss_legendre, sphere_product_rule, AngularIndex,
};

/// Scalar parameters of the two-center, two-state model. `r` is half the
/// internuclear distance (centers at `±r ẑ`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoCenterModel {
    pub alpha0: f64,
    pub alpha1: f64,
    pub c: f64,
    pub l: u32,
    pub m: i32,
    pub eta0: i8,
    pub eta1: i8,
    pub r: f64,
}

impl TwoCenterModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return invalid(format!("R must be positive, got {}", self.r));
        }
        if self.m.unsigned_abs() > self.l {
            return invalid(format!("l = {} must be >= |m| = {}", self.l, self.m.abs()));
        }
        for (name, eta) in [("eta0", self.eta0), ("eta1", self.eta1)] {
            if eta != 1 && eta != -1 {
                return invalid(format!("{name} must be +1 or -1, got {eta}"));
            }
        }
        Ok(())
    }

    pub fn with_r(&self, r: f64) -> Self {
        Self { r, ..*self }
    }

    pub fn with_c(&self, c: f64) -> Self {
        Self { c, ..*self }
    }

    /// `W₀ = [[α₀, c], [c, α₁]]` with `L = diag(0, l)`.
    pub fn interaction(&self) -> Result<InteractionW> {
        InteractionW::two_state(self.alpha0, self.alpha1, self.c, self.l)
    }

    /// Ground `s` channel plus the excited `(l, m)` channel at energy `e1`.
    pub fn channel_set(&self, e1: f64) -> Result<ChannelSet> {
        ChannelSet::new(vec![
            Channel::new("ground", 0.0, AngularIndex::new(0, 0)?, self.eta0)?,
            Channel::new("excited", e1, AngularIndex::new(self.l, self.m)?, self.eta1)?,
        ])
    }

    pub fn excited_index(&self) -> AngularIndex {
        AngularIndex::new(self.l, self.m).expect("validated model")
    }

    /// `(-1)^l η₁`: +1 when the excited channel combines like the ground
    /// state under inversion.
    pub fn excited_symmetry(&self) -> i8 {
        if self.l.is_multiple_of(2) {
            self.eta1
        } else {
            -self.eta1
        }
    }
}

/// `θ₀(x) = α₀ + ik₀ + x e^{2ik₀R}/2R`.
pub fn theta0(x: f64, alpha0: f64, k0: Complex64, r: f64) -> Complex64 {
    let i = Complex64::i();
    alpha0 + i * k0 + x * (2.0 * i * k0 * r).exp() / (2.0 * r)
}

/// The inversion-coupling sum `Σ_{λ even ≤ 2l} i^{2l+λ} (2λ+1) k^{2l+1}
/// h_λ(2kR) ∫|Y_lm|² P_λ dΩ` that multiplies `x` in `θ₁`.
fn theta1_sum(k1: Complex64, idx: AngularIndex, r: f64) -> Complex64 {
    let l = idx.l();
    let k2l1 = kpow(k1, (2 * l + 1) as f64);
    if k1.norm() == 0.0 {
        return theta1_sum_at_threshold(idx, r);
    }
    let z = 2.0 * k1 * r;
    (0..=2 * l)
        .step_by(2)
        .map(|lam| {
            i_pow((2 * l + lam) as i64)
                * (2 * lam + 1) as f64
                * k2l1
                * hankel_unchecked(lam, z)
                * gaunt_yyp(idx, lam)
        })
        .sum()
}

/// `k → 0` limit of [`theta1_sum`]: only the `λ = 2l` term survives,
/// `k^{2l+1} h_{2l}(2kR) → (4l-1)!! / (2R)^{2l+1}`.
fn theta1_sum_at_threshold(idx: AngularIndex, r: f64) -> Complex64 {
    let l = idx.l();
    let lam = 2 * l;
    let mut dfact = 1.0;
    let mut k = 4 * l as i64 - 1;
    while k > 1 {
        dfact *= k as f64;
        k -= 2;
    }
    i_pow((2 * l + lam) as i64) * (2 * lam + 1) as f64 * dfact / (2.0 * r).powi(lam as i32 + 1)
        * gaunt_yyp(idx, lam)
}

/// `θ₁(x) = α₁ + ik₁^{2l+1} + x Σ_λ i^{2l+λ}(2λ+1) k₁^{2l+1} h_λ(2k₁R) ∫|Y_lm|²P_λ dΩ`.
pub fn theta1(x: f64, alpha1: f64, k1: Complex64, idx: AngularIndex, r: f64) -> Complex64 {
    let k2l1 = kpow(k1, (2 * idx.l() + 1) as f64);
    alpha1 + Complex64::i() * k2l1 + x * theta1_sum(k1, idx, r)
}

/// `θ₀(±η₀)`, `θ₁(±η₁)` and the two pole denominators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaValues {
    pub theta0_plus: Complex64,
    pub theta0_minus: Complex64,
    pub theta1_plus: Complex64,
    pub theta1_minus: Complex64,
    /// `θ₀(η₀)θ₁(η₁) - c²`
    pub denom_plus: Complex64,
    /// `θ₀(-η₀)θ₁(-η₁) - c²`
    pub denom_minus: Complex64,
}

impl ThetaValues {
    pub fn compute(model: &TwoCenterModel, mom: &Momenta) -> Result<Self> {
        model.validate()?;
        if mom.len() != 2 {
            return invalid(format!("two-state model needs 2 channel momenta, got {}", mom.len()));
        }
        let (k0, k1) = (mom.k()[0], mom.k()[1]);
        let (e0, e1) = (model.eta0 as f64, model.eta1 as f64);
        let idx = model.excited_index();
        let t0p = theta0(e0, model.alpha0, k0, model.r);
        let t0m = theta0(-e0, model.alpha0, k0, model.r);
        let t1p = theta1(e1, model.alpha1, k1, idx, model.r);
        let t1m = theta1(-e1, model.alpha1, k1, idx, model.r);
        let c2 = model.c * model.c;
        Ok(Self {
            theta0_plus: t0p,
            theta0_minus: t0m,
            theta1_plus: t1p,
            theta1_minus: t1m,
            denom_plus: t0p * t1p - c2,
            denom_minus: t0m * t1m - c2,
        })
    }

    pub fn denom(&self, parity: Parity) -> Complex64 {
        match parity {
            Parity::Gerade => self.denom_plus,
            Parity::Ungerade => self.denom_minus,
        }
    }

    /// Ground-state column of `(F⁻¹ ∓ ΣH)⁻¹`:
    /// `Z^{(±)} = (-θ₁(±η₁), c k₁^l) / (θ₀(±η₀)θ₁(±η₁) - c²)`.
    pub fn z(&self, parity: Parity, c: f64, k1: Complex64, l: u32) -> [Complex64; 2] {
        let (t1, d) = match parity {
            Parity::Gerade => (self.theta1_plus, self.denom_plus),
            Parity::Ungerade => (self.theta1_minus, self.denom_minus),
        };
        [-t1 / d, c * kpow(k1, l as f64) / d]
    }
}

/// Legendre coefficients `c_λ = k/4π i^λ (2λ+1) h_λ(kr)`, `λ ≤ lambda_max`, of
/// `H(r, u; k) = Σ_λ c_λ P_λ(r̂·u)`. For `r' < r`,
/// `∫ H(r,u;k) e^{-iku·r'} dΩ_u = e^{ik|r-r'|}/|r-r'|`.
pub fn green_coefficients(k: Complex64, r: f64, lambda_max: u32) -> Result<Vec<Complex64>> {
    if !(r > 0.0 && r.is_finite()) {
        return invalid(format!("radius must be positive, got {r}"));
    }
    if lambda_max > crate::specfun::MAX_ORDER {
        return invalid(format!("lambda_max {lambda_max} above {}", crate::specfun::MAX_ORDER));
    }
    Ok((0..=lambda_max)
        .map(|lam| k / (4.0 * PI) * i_pow(lam as i64) * (2 * lam + 1) as f64 * hankel_unchecked(lam, k * r))
        .collect())
}

/// Truncated `H(r, u; k)` at a single direction `u`.
pub fn green_kernel(k: Complex64, r_vec: &Vector3<f64>, u: &Vector3<f64>, lambda_max: u32) -> Result<Complex64> {
    let r = r_vec.norm();
    let mu = (r_vec.dot(u) / (r * u.norm())).clamp(-1.0, 1.0);
    Ok(green_coefficients(k, r, lambda_max)?
        .into_iter()
        .enumerate()
        .map(|(lam, c)| c * legendre_unchecked(lam as u32, mu))
        .sum())
}

/// `k Σ_λ i^λ (2λ+1) h_λ(k|d|) ∫ conj(Y_a) Y_b P_λ(d̂·n) dΩ`, the
/// translation coefficient `4π∫ conj(Y_a(n)) H_k(d, n) Y_b(n) dΩ` of one
/// channel between two centers separated by `d`.
pub fn translation_coefficient(k: Complex64, a: AngularIndex, b: AngularIndex, d: &Vector3<f64>) -> Result<Complex64> {
    let dist = d.norm();
    if dist == 0.0 {
        return invalid("translation between coincident centers");
    }
    if k.norm() == 0.0 {
        return invalid("translation coefficient at zero channel momentum");
    }
    let axis = d / dist;
    let lo = a.l().abs_diff(b.l());
    let hi = a.l() + b.l();
    let z = k * dist;
    Ok((lo..=hi)
        .map(|lam| {
            let ang = legendre_overlap(a, b, lam, &axis);
            if ang.norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            k * i_pow(lam as i64) * (2 * lam + 1) as f64 * hankel_unchecked(lam, z) * ang
        })
        .sum())
}

/// `H = 4π∫ A⁺(n) H(2R,n;K) A(-n) dΩ` for centers at `±r_vec`. `H` is
/// diagonal in the channels.
pub fn build_h_matrix(cs: &ChannelSet, mom: &Momenta, r_vec: &Vector3<f64>) -> Result<CMatrix> {
    if r_vec.norm() == 0.0 {
        return invalid("zero separation between the two centers");
    }
    if mom.len() != cs.len() {
        return invalid("momenta and channel set sizes differ");
    }
    let d = 2.0 * r_vec;
    let mut h = Vec::with_capacity(cs.len());
    for (n, ch) in cs.channels().iter().enumerate() {
        let sign = if ch.l() % 2 == 0 { 1.0 } else { -1.0 };
        let k = mom.k()[n];
        let t = if k.norm() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            translation_coefficient(k, ch.angular, ch.angular, &d)?
        };
        h.push(sign * t);
    }
    Ok(diag(h))
}

/// Same integral as [`build_h_matrix`] evaluated by a product quadrature of
/// the λ-expansion of `H(2R, n; K)` (truncated at `λ = 2 l_max + extra`).
pub fn build_h_matrix_quadrature(
    cs: &ChannelSet,
    mom: &Momenta,
    r_vec: &Vector3<f64>,
    n_theta: usize,
    n_phi: usize,
) -> Result<CMatrix> {
    let dist = 2.0 * r_vec.norm();
    if dist == 0.0 {
        return invalid("zero separation between the two centers");
    }
    let axis = r_vec.normalize();
    let rule = sphere_product_rule(n_theta, n_phi)?;
    let lmax = cs.orbital().into_iter().max().unwrap_or(0);
    let lam_max = 2 * lmax + 4;
    let mut h = Vec::with_capacity(cs.len());
    for (n, ch) in cs.channels().iter().enumerate() {
        let k = mom.k()[n];
        let hank: Vec<Complex64> = (0..=lam_max)
            .map(|lam| i_pow(lam as i64) * (2 * lam + 1) as f64 * hankel_unchecked(lam, k * dist))
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (dir, w) in &rule {
            let mu = axis.dot(dir).clamp(-1.0, 1.0);
            let green: Complex64 = hank
                .iter()
                .enumerate()
                .map(|(lam, &c)| c * legendre_unchecked(lam as u32, mu))
                .sum();
            let ya = sph_harm_unchecked(ch.angular, dir);
            let yb = sph_harm_unchecked(ch.angular, &(-dir));
            acc += *w * ya.conj() * green * yb;
        }
        h.push(k * acc);
    }
    Ok(diag(h))
}

/// General two-center amplitude for a matrix ZRP `W` at `+r_vec` and its
/// parity image at `-r_vec`.
#[derive(Debug, Clone)]
pub struct TwoCenterAmplitude {
    channels: ChannelSet,
    k: Vec<Complex64>,
    r_vec: Vector3<f64>,
    inv_f: CMatrix,
    sigma_h: CMatrix,
    gerade: CMatrix,
    ungerade: CMatrix,
}

fn block_inverse(m: &CMatrix, parity: Parity) -> Result<CMatrix> {
    linalg::invert(m, "two-center block").map_err(|e| match e {
        ZrpError::Singular { condition, .. } => ZrpError::Pole {
            parity,
            magnitude: 1.0 / condition,
        },
        other => other,
    })
}

pub fn general_two_center_amplitude(
    w: &InteractionW,
    cs: &ChannelSet,
    mom: &Momenta,
    r_vec: &Vector3<f64>,
) -> Result<TwoCenterAmplitude> {
    if cs.len() != w.dim() || mom.len() != w.dim() {
        return invalid("W, channel set and momenta must have the same size");
    }
    if cs.orbital() != w.orbital() {
        return invalid("channel orbital momenta differ from those of W");
    }
    let inv_f = -inverse_f_kernel(w, mom)?;
    let h = build_h_matrix(cs, mom, r_vec)?;
    let sigma_h = cs.parity_matrix() * h;
    let gerade = block_inverse(&(&inv_f - &sigma_h), Parity::Gerade)?;
    let ungerade = block_inverse(&(&inv_f + &sigma_h), Parity::Ungerade)?;
    Ok(TwoCenterAmplitude {
        channels: cs.clone(),
        k: mom.k().to_vec(),
        r_vec: *r_vec,
        inv_f,
        sigma_h,
        gerade,
        ungerade,
    })
}

impl TwoCenterAmplitude {
    pub fn h_matrix(&self) -> CMatrix {
        self.channels.parity_matrix() * &self.sigma_h
    }

    fn phases(&self, n: &Vector3<f64>) -> Vec<Complex64> {
        let x = n.dot(&self.r_vec);
        self.k.iter().map(|&k| (Complex64::i() * k * x).exp()).collect()
    }

    fn parity_signs(&self) -> Vec<f64> {
        self.channels
            .channels()
            .iter()
            .map(|c| {
                let inv = if c.l() % 2 == 0 { 1.0 } else { -1.0 };
                c.parity as f64 * inv
            })
            .collect()
    }

    /// Amplitude obtained by solving the coupled equations for `C₁(n₀)`,
    /// `C₂(n₀)` directly instead of using the gerade/ungerade split.
    pub fn eval_block_system(&self, n: &Vector3<f64>, n0: &Vector3<f64>) -> Result<CMatrix> {
        let dim = self.channels.len();
        let sigma: Vec<f64> = self.channels.channels().iter().map(|c| c.parity as f64).collect();
        let y_n = self.channels.harmonics(n)?;
        let y_n0 = self.channels.harmonics(n0)?;
        let inv_sign: Vec<f64> = self.channels.orbital().iter().map(|l| if l % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e_in = self.phases(n0);
        let e_out = self.phases(n);

        let mut m = CMatrix::zeros(2 * dim, 2 * dim);
        for a in 0..dim {
            for b in 0..dim {
                m[(a, b)] = self.inv_f[(a, b)];
                m[(dim + a, dim + b)] = self.inv_f[(a, b)];
                m[(a, dim + b)] = -self.sigma_h[(a, b)];
                m[(dim + a, b)] = -self.sigma_h[(a, b)];
            }
        }
        let s4 = (4.0 * PI).sqrt();
        let mut rhs = CMatrix::zeros(2 * dim, dim);
        for a in 0..dim {
            rhs[(a, a)] = s4 * y_n0[a].conj() * e_in[a];
            rhs[(dim + a, a)] = s4 * sigma[a] * inv_sign[a] * y_n0[a].conj() / e_in[a];
        }
        let sol = linalg::solve(&m, &rhs, "two-center C1/C2 system")?;
        Ok(CMatrix::from_fn(dim, dim, |a, b| {
            s4 * (y_n[a] / e_out[a] * sol[(a, b)] + e_out[a] * inv_sign[a] * y_n[a] * sigma[a] * sol[(dim + a, b)])
        }))
    }
}

impl AmplitudeField for TwoCenterAmplitude {
    fn eval(&self, n: &Vector3<f64>, n0: &Vector3<f64>) -> Result<CMatrix> {
        let dim = self.channels.len();
        let y_n = self.channels.harmonics(n)?;
        let y_n0 = self.channels.harmonics(n0)?;
        let s = self.parity_signs();
        let e_out = self.phases(n);
        let e_in = self.phases(n0);
        // A(n)e^{-iKn·R} ± ΣA(-n)e^{iKn·R} = Y(n)(e^{-i..} ± (-1)^l η e^{i..})
        let left = |sign: f64| diag((0..dim).map(|a| y_n[a] * (1.0 / e_out[a] + sign * s[a] * e_out[a])));
        let right = |sign: f64| diag((0..dim).map(|a| y_n0[a].conj() * (e_in[a] + sign * s[a] / e_in[a])));
        let g = left(1.0) * &self.gerade * right(1.0);
        let u = left(-1.0) * &self.ungerade * right(-1.0);
        Ok((g + u) * Complex64::new(2.0 * PI, 0.0))
    }
}

/// Closed-form two-state amplitudes in the body frame (`R ∥ e_z`), ground
/// state even (`η₀ = +1`).
#[derive(Debug, Clone)]
pub struct TwoStateClosedForm {
    model: TwoCenterModel,
    k0: Complex64,
    k1: Complex64,
    theta: ThetaValues,
}

/// Smallest denominator magnitude accepted before reporting a pole.
pub const POLE_TOLERANCE: f64 = 1e-14;

impl TwoStateClosedForm {
    pub fn new(model: &TwoCenterModel, mom: &Momenta) -> Result<Self> {
        let theta = ThetaValues::compute(model, mom)?;
        if model.eta0 != 1 {
            return invalid("closed-form amplitudes assume an even ground state (eta0 = +1)");
        }
        for parity in [Parity::Gerade, Parity::Ungerade] {
            let d = theta.denom(parity).norm();
            if !(d > POLE_TOLERANCE) {
                return Err(ZrpError::Pole { parity, magnitude: d });
            }
        }
        Ok(Self {
            model: *model,
            k0: mom.k()[0],
            k1: mom.k()[1],
            theta,
        })
    }

    pub fn theta(&self) -> &ThetaValues {
        &self.theta
    }

    /// Elastic amplitude
    /// `F₀₀ = -2θ₁(η₁) cos cos / D₊ - 2θ₁(-η₁) sin sin / D₋`.
    pub fn f00(&self, n: &Vector3<f64>, n0: &Vector3<f64>) -> Complex64 {
        let r = self.model.r;
        let a = self.k0 * n.z * r;
        let b = self.k0 * n0.z * r;
        let t = &self.theta;
        -2.0 * t.theta1_plus * a.cos() * b.cos() / t.denom_plus
            - 2.0 * t.theta1_minus * a.sin() * b.sin() / t.denom_minus
    }

    /// Excitation amplitude `0 → 1`. For `η₁ = (-1)^l` the excited channel
    /// has the ground-state inversion symmetry and
    /// `F₁₀ = 4√π c k₁^l Y_lm(n) (cos cos / D₊ + sin sin / D₋)`; otherwise
    /// `F₁₀ = -4i√π c k₁^l Y_lm(n) (sin cos / D₊ - cos sin / D₋)`.
    pub fn f10(&self, n: &Vector3<f64>, n0: &Vector3<f64>) -> Complex64 {
        let r = self.model.r;
        let a = self.k1 * n.z * r;
        let b = self.k0 * n0.z * r;
        let t = &self.theta;
        let y = sph_harm_unchecked(self.model.excited_index(), n);
        let pre = 4.0 * PI.sqrt() * self.model.c * kpow(self.k1, self.model.l as f64) * y;
        if self.model.excited_symmetry() == 1 {
            pre * (a.cos() * b.cos() / t.denom_plus + a.sin() * b.sin() / t.denom_minus)
        } else {
            -Complex64::i() * pre * (a.sin() * b.cos() / t.denom_plus - a.cos() * b.sin() / t.denom_minus)
        }
    }
}

/// Elastic closed-form amplitude; see [`TwoStateClosedForm::f00`].
pub fn amplitude_f00(model: &TwoCenterModel, mom: &Momenta) -> Result<TwoStateClosedForm> {
    TwoStateClosedForm::new(model, mom)
}

/// Excitation closed-form amplitude; see [`TwoStateClosedForm::f10`].
pub fn amplitude_f10(model: &TwoCenterModel, mom: &Momenta) -> Result<TwoStateClosedForm> {
    TwoStateClosedForm::new(model, mom)
}

impl AmplitudeField for TwoStateClosedForm {
    /// Only the ground-state column is populated.
    fn eval(&self, n: &Vector3<f64>, n0: &Vector3<f64>) -> Result<CMatrix> {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = self.f00(n, n0);
        m[(1, 0)] = self.f10(n, n0);
        Ok(m)
    }
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexRect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl ComplexRect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        if !(re_min < re_max && im_min < im_max) {
            return invalid("empty search rectangle");
        }
        Ok(Self {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (self.re_min..=self.re_max).contains(&z.re) && (self.im_min..=self.im_max).contains(&z.im)
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    fn size(&self) -> f64 {
        (self.re_max - self.re_min).max(self.im_max - self.im_min)
    }

    /// Four sub-rectangles, split slightly off-center so that roots on the
    /// symmetry axes of the parent do not land on a shared edge.
    fn split(&self) -> [ComplexRect; 4] {
        let xm = self.re_min + 0.5127 * (self.re_max - self.re_min);
        let ym = self.im_min + 0.4871 * (self.im_max - self.im_min);
        [
            ComplexRect { re_max: xm, im_max: ym, ..*self },
            ComplexRect { re_min: xm, im_max: ym, ..*self },
            ComplexRect { re_min: xm, im_min: ym, ..*self },
            ComplexRect { re_max: xm, im_min: ym, ..*self },
        ]
    }
}

/// `θ₀(±η₀)θ₁(±η₁) - c²` as a function of the (complex) entrance momentum.
pub fn pole_denominator(model: &TwoCenterModel, e1: f64, parity: Parity, k0: Complex64) -> Result<Complex64> {
    let mom = Momenta::from_energies(&[0.0, e1], k0);
    Ok(ThetaValues::compute(model, &mom)?.denom(parity))
}

/// Winding number of `f` around the rectangle boundary, with adaptive
/// refinement so consecutive samples differ in phase by at most `π/4`.
fn winding_number<F>(f: &F, rect: &ComplexRect) -> Result<i64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let corners = rect.corners();
    let mut total = 0.0;
    const SEGMENTS: usize = 16;
    for i in 0..4 {
        let (a, b) = (corners[i], corners[(i + 1) % 4]);
        let mut za = a;
        let mut fa = f(a)?;
        for s in 1..=SEGMENTS {
            let zb = a + (b - a) * (s as f64 / SEGMENTS as f64);
            let fb = f(zb)?;
            total += edge_phase(f, za, zb, fa, fb, 0)?;
            za = zb;
            fa = fb;
        }
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

fn edge_phase<F>(f: &F, a: Complex64, b: Complex64, fa: Complex64, fb: Complex64, depth: u32) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if fa.norm() == 0.0 || fb.norm() == 0.0 {
        return Err(ZrpError::NotConverged {
            quantity: "argument principle".into(),
            detail: "root on the contour".into(),
        });
    }
    let d = (fb / fa).arg();
    if d.abs() <= PI / 4.0 || depth >= 40 {
        return Ok(d);
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid)?;
    Ok(edge_phase(f, a, mid, fa, fm, depth + 1)? + edge_phase(f, mid, b, fm, fb, depth + 1)?)
}

fn newton<F>(f: &F, start: Complex64, rect: &ComplexRect) -> Option<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut z = start;
    let margin = 0.05 * rect.size();
    let loose = ComplexRect {
        re_min: rect.re_min - margin,
        re_max: rect.re_max + margin,
        im_min: rect.im_min - margin,
        im_max: rect.im_max + margin,
    };
    for _ in 0..100 {
        let fz = f(z).ok()?;
        let h = 1e-7 * z.norm().max(1e-3);
        let dfz = (f(z + h).ok()? - f(z - h).ok()?) / (2.0 * h);
        if dfz.norm() == 0.0 {
            return None;
        }
        let dz = fz / dfz;
        z -= dz;
        if !loose.contains(z) {
            return None;
        }
        if dz.norm() <= 1e-15 * z.norm().max(1e-3) {
            break;
        }
    }
    Some(z)
}

/// All zeros of an analytic function inside `rect`, located by the argument
/// principle with recursive subdivision and polished by Newton's method.
pub fn find_roots<F>(f: F, rect: &ComplexRect, tol: f64) -> Result<Vec<Complex64>>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let counted = winding_number(&f, rect)?;
    let mut roots = Vec::new();
    isolate(&f, rect, counted, tol, 0, &mut roots)?;
    if roots.len() as i64 != counted {
        return Err(ZrpError::RootCountMismatch {
            counted,
            converged: roots.len(),
        });
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

fn isolate<F>(f: &F, rect: &ComplexRect, count: i64, tol: f64, depth: u32, out: &mut Vec<Complex64>) -> Result<()>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if count <= 0 {
        return Ok(());
    }
    if count == 1 {
        if let Some(z) = newton(f, rect.center(), rect) {
            if rect.contains(z) && f(z)?.norm() < tol && !out.iter().any(|r| (r - z).norm() < 1e-9) {
                out.push(z);
                return Ok(());
            }
        }
    }
    if depth > 40 || rect.size() < 1e-12 {
        // a multiple root; report the center once per multiplicity
        for _ in 0..count {
            out.push(rect.center());
        }
        return Ok(());
    }
    for sub in rect.split() {
        let c = winding_number(f, &sub)?;
        isolate(f, &sub, c, tol, depth + 1, out)?;
    }
    Ok(())
}

/// Poles of the two-state amplitude in the complex `k₀` plane for one parity
/// block: the zeros of `θ₀(±η₀)θ₁(±η₁) - c²` inside `search`.
///
/// The excited-channel momentum follows the `Im k₁ ≥ 0` branch, whose cut
/// lies on the real `k₀` axis for `|k₀| ≥ sqrt(2E₁)`; the rectangle must not
/// cross it.
pub fn find_poles(model: &TwoCenterModel, e1: f64, parity: Parity, search: &ComplexRect) -> Result<Vec<Complex64>> {
    model.validate()?;
    let cut_start = (2.0 * e1).sqrt();
    let straddles = search.im_min < 0.0 && search.im_max > 0.0;
    if straddles && (search.re_max > cut_start || search.re_min < -cut_start) {
        return invalid(format!(
            "search rectangle crosses the branch cut |Re k0| >= {cut_start:.6} on the real axis"
        ));
    }
    find_roots(|k| pole_denominator(model, e1, parity, k), search, 1e-10)
}

/// One point of an adiabatic potential curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub r: f64,
    pub k0: Complex64,
    /// `E = k₀²/2`; `Re E` is the position, `Im E = -Γ/2`.
    pub energy: Complex64,
}

/// Tracks one pole across a monotone grid of half-separations, seeding each
/// Newton solve from the previous point.
pub fn potential_curves(
    model: &TwoCenterModel,
    e1: f64,
    r_grid: &[f64],
    parity: Parity,
    seed: Complex64,
) -> Result<Vec<CurvePoint>> {
    if r_grid.is_empty() {
        return invalid("empty R grid");
    }
    let increasing = r_grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = r_grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) || r_grid.iter().any(|&r| !(r > 0.0)) {
        return invalid("R grid must be positive and strictly monotone");
    }
    let mut out: Vec<CurvePoint> = Vec::with_capacity(r_grid.len());
    let mut guess = seed;
    let mut last_good = r_grid[0];
    for (i, &r) in r_grid.iter().enumerate() {
        let m = model.with_r(r);
        let f = |k: Complex64| pole_denominator(&m, e1, parity, k);
        let span = if i == 0 { 0.5 } else { out[i - 1].k0.norm().max(0.05) * 0.5 };
        let window = ComplexRect {
            re_min: guess.re - span,
            re_max: guess.re + span,
            im_min: guess.im - span,
            im_max: guess.im + span,
        };
        let k = newton(&f, guess, &window).ok_or(ZrpError::TrackLost { last_good_r: last_good })?;
        if f(k)?.norm() > 1e-10 {
            return Err(ZrpError::TrackLost { last_good_r: last_good });
        }
        out.push(CurvePoint {
            r,
            k0: k,
            energy: 0.5 * k * k,
        });
        guess = k;
        last_good = r;
    }
    Ok(out)
}

/// Fixed-nuclei cross sections `[σ₀₀, σ₁₀]` averaged over molecular
/// orientations. With an `s` entrance channel `|F|²` depends only on the
/// polar angles of `n` and `n₀` about the axis, so the average is
/// `σ_n = π (k_n/k₀) ∫∫ |F_n0|² dx dx₀`. A closed excited channel gives 0.
pub fn fixed_nuclei_ics(model: &TwoCenterModel, e1: f64, k0: f64) -> Result<[f64; 2]> {
    model.validate()?;
    let cs = model.channel_set(e1)?;
    let mom = Momenta::compute(&cs, k0)?;
    let amp = general_two_center_amplitude(&model.interaction()?, &cs, &mom, &Vector3::new(0.0, 0.0, model.r))?;
    let flux = [1.0, if mom.is_open(1) { mom.k()[1].re / k0 } else { 0.0 }];
    let dir = |x: f64| Vector3::new((1.0 - x * x).max(0.0).sqrt(), 0.0, x);
    let integrate = |order: usize| -> Result<[f64; 2]> {
        let rule = gauss_legendre(order)?;
        let mut acc = [0.0; 2];
        for (x0, w0) in rule.iter() {
            for (x, w) in rule.iter() {
                let f = amp.eval(&dir(x), &dir(x0))?;
                for (ch, a) in acc.iter_mut().enumerate() {
                    *a += w0 * w * f[(ch, 0)].norm_sqr();
                }
            }
        }
        Ok([PI * flux[0] * acc[0], PI * flux[1] * acc[1]])
    };
    let mut order = 16;
    let mut prev = integrate(order)?;
    while order < 512 {
        order *= 2;
        let next = integrate(order)?;
        let done = (0..2).all(|i| (next[i] - prev[i]).abs() <= 1e-13 * next[i].abs().max(f64::MIN_POSITIVE));
        prev = next;
        if done {
            return Ok(prev);
        }
    }
    Err(ZrpError::NotConverged {
        quantity: "fixed-nuclei cross section".into(),
        detail: format!("polar quadrature still changing at {order} nodes"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn model(c: f64, l: u32, m: i32, eta1: i8) -> TwoCenterModel {
        TwoCenterModel {
            alpha0: 0.4,
            alpha1: 0.9,
            c,
            l,
            m,
            eta0: 1,
            eta1,
            r: 0.8,
        }
    }

    #[test]
    fn theta0_direct_substitution() {
        let k = Complex64::new(1.0, 0.0);
        let t = theta0(1.0, 1.0, k, 1.0);
        let expect = Complex64::new(1.0, 1.0) + Complex64::new(0.0, 2.0).exp() / 2.0;
        assert!((t - expect).norm() < 1e-15);
        let mean = 0.5 * (theta0(1.0, 1.0, k, 1.0) + theta0(-1.0, 1.0, k, 1.0));
        assert!((mean - Complex64::new(1.0, 1.0)).norm() < 1e-15);
        let closed = theta0(-1.0, 0.3, Complex64::new(0.0, 0.5), 1.0);
        assert!((closed - Complex64::new(0.3 - 0.5 - (-1f64).exp() / 2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn theta1_s_state_equals_theta0_form() {
        let k = Complex64::new(0.7, 0.0);
        let idx = AngularIndex::new(0, 0).unwrap();
        for x in [1.0, -1.0] {
            assert!((theta1(x, 0.9, k, idx, 1.3) - theta0(x, 0.9, k, 1.3)).norm() < 1e-14);
        }
        let idx = AngularIndex::new(2, 1).unwrap();
        let s = theta1(1.0, 0.9, k, idx, 1.3) + theta1(-1.0, 0.9, k, idx, 1.3);
        assert!((s - 2.0 * (0.9 + Complex64::i() * k.powi(5))).norm() < 1e-13);
    }

    #[test]
    fn theta1_is_continuous_at_threshold() {
        let idx = AngularIndex::new(1, 0).unwrap();
        let at = theta1(1.0, 0.5, Complex64::new(0.0, 0.0), idx, 1.0);
        let near = theta1(1.0, 0.5, Complex64::new(1e-5, 0.0), idx, 1.0);
        assert!((at - near).norm() < 1e-6, "{at} {near}");
    }

    #[test]
    fn single_s_channel_h_matrix() {
        let cs = ChannelSet::new(vec![Channel::s_wave("X", 0.0).unwrap()]).unwrap();
        let mom = Momenta::compute(&cs, 0.9).unwrap();
        let r = 1.1;
        let h = build_h_matrix(&cs, &mom, &Vector3::new(0.0, 0.0, r)).unwrap();
        let expect = (Complex64::i() * 2.0 * 0.9 * r).exp() / (2.0 * r);
        assert!((h[(0, 0)] - expect).norm() < 1e-14);
        assert!(build_h_matrix(&cs, &mom, &Vector3::zeros()).is_err());
    }

    #[test]
    fn h_matrix_closed_form_matches_quadrature() {
        let m = model(0.3, 1, 0, -1);
        let cs = m.channel_set(0.2).unwrap();
        let mom = Momenta::compute(&cs, 1.1).unwrap();
        for axis in [Vector3::z(), Vector3::new(0.3, -0.4, 0.5).normalize()] {
            let rv = axis * 0.9;
            let a = build_h_matrix(&cs, &mom, &rv).unwrap();
            let b = build_h_matrix_quadrature(&cs, &mom, &rv, 64, 32).unwrap();
            assert!(linalg::max_abs(&(a - b)) < 1e-10);
        }
    }

    #[test]
    fn h_matrix_body_frame_matches_theta1_sum() {
        let m = model(0.3, 2, 1, 1);
        let cs = m.channel_set(0.1).unwrap();
        let mom = Momenta::compute(&cs, 0.9).unwrap();
        let h = build_h_matrix(&cs, &mom, &Vector3::new(0.0, 0.0, m.r)).unwrap();
        let k1 = mom.k()[1];
        let from_theta = (theta1(1.0, 0.0, k1, m.excited_index(), m.r) - Complex64::i() * k1.powi(5)) / k1.powi(4);
        assert!((h[(1, 1)] - from_theta).norm() < 1e-12 * from_theta.norm());
    }

    #[test]
    fn h_matrix_decays_at_large_separation() {
        let m = model(0.3, 1, 1, 1);
        let cs = m.channel_set(0.2).unwrap();
        let mom = Momenta::compute(&cs, 1.0).unwrap();
        let h = build_h_matrix(&cs, &mom, &Vector3::new(0.0, 0.0, 500.0)).unwrap();
        assert!(linalg::max_abs(&h) < 2e-3);
    }

    #[test]
    fn decoupled_elastic_is_two_zrp_formula() {
        let m = model(0.0, 1, 0, -1);
        let mom = Momenta::from_energies(&[0.0, 0.3], Complex64::new(1.2, 0.0));
        let cf = amplitude_f00(&m, &mom).unwrap();
        let n = Vector3::new(0.6, 0.0, 0.8);
        let n0 = Vector3::new(0.0, 0.28, 0.96);
        let k = 1.2;
        let g = (Complex64::i() * 2.0 * k * m.r).exp() / (2.0 * m.r);
        let base = Complex64::new(m.alpha0, k);
        let expect = -2.0 * (k * n.z * m.r).cos() * (k * n0.z * m.r).cos() / (base + g)
            - 2.0 * (k * n.z * m.r).sin() * (k * n0.z * m.r).sin() / (base - g);
        assert!((cf.f00(&n, &n0) - expect).norm() < 1e-12);
        assert_eq!(cf.f10(&n, &n0).norm(), 0.0);
    }

    #[test]
    fn perpendicular_geometry_keeps_gerade_term() {
        let m = model(0.4, 2, 0, 1);
        let mom = Momenta::from_energies(&[0.0, 0.1], Complex64::new(1.0, 0.0));
        let cf = amplitude_f00(&m, &mom).unwrap();
        let t = cf.theta();
        let v = cf.f00(&Vector3::x(), &Vector3::y());
        assert!((v + 2.0 * t.theta1_plus / t.denom_plus).norm() < 1e-14);
    }

    #[test]
    fn closed_forms_match_general_amplitude() {
        for (l, m_, eta1) in [(0, 0, 1), (0, 0, -1), (1, 0, -1), (1, 1, 1), (2, 1, 1), (2, 0, -1)] {
            let m = model(0.35, l, m_, eta1);
            let cs = m.channel_set(0.15).unwrap();
            let mom = Momenta::compute(&cs, 1.05).unwrap();
            let cf = TwoStateClosedForm::new(&m, &mom).unwrap();
            let gen = general_two_center_amplitude(&m.interaction().unwrap(), &cs, &mom, &Vector3::new(0.0, 0.0, m.r)).unwrap();
            let n = Vector3::new(0.48, -0.6, 0.64);
            let n0 = Vector3::new(-0.36, 0.0, 0.933_380_951_166_241).normalize();
            let full = gen.eval(&n, &n0.normalize()).unwrap();
            assert!((full[(0, 0)] - cf.f00(&n, &n0)).norm() < 1e-10, "F00 l={l} eta1={eta1}");
            assert!((full[(1, 0)] - cf.f10(&n, &n0)).norm() < 1e-10, "F10 l={l} eta1={eta1}");
        }
    }

    #[test]
    fn split_and_block_system_agree() {
        let m = model(0.5, 1, 1, 1);
        let cs = m.channel_set(0.2).unwrap();
        let mom = Momenta::compute(&cs, 0.95).unwrap();
        let axis = Vector3::new(0.2, 0.5, 0.6).normalize() * m.r;
        let gen = general_two_center_amplitude(&m.interaction().unwrap(), &cs, &mom, &axis).unwrap();
        let n = Vector3::new(0.0, 0.6, 0.8);
        let n0 = Vector3::new(1.0, 0.0, 0.0);
        let a = gen.eval(&n, &n0).unwrap();
        let b = gen.eval_block_system(&n, &n0).unwrap();
        assert!(linalg::max_abs(&(a - b)) < 1e-12);
    }

    #[test]
    fn rotation_about_axis_leaves_elastic_entry() {
        let m = model(0.5, 1, 1, 1);
        let mom = Momenta::from_energies(&[0.0, 0.2], Complex64::new(0.95, 0.0));
        let cf = TwoStateClosedForm::new(&m, &mom).unwrap();
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), 0.7);
        let rotated = crate::field::rotate_amplitude(&cf, rot);
        let n = Vector3::new(0.0, 0.6, 0.8);
        let n0 = Vector3::new(1.0, 0.0, 0.0);
        let a = rotated.eval(&n, &n0).unwrap()[(0, 0)];
        assert!((a - cf.f00(&n, &n0)).norm() < 1e-14);
        let same = crate::field::rotate_amplitude(&cf, Rotation3::identity());
        assert_eq!(same.eval(&n, &n0).unwrap(), cf.eval(&n, &n0).unwrap());
    }

    #[test]
    fn lab_axis_elastic_entry_equals_rotated_body_frame() {
        let m = model(0.5, 0, 0, -1);
        let cs = m.channel_set(0.2).unwrap();
        let mom = Momenta::compute(&cs, 0.95).unwrap();
        let rot = Rotation3::from_euler_angles(0.3, -0.8, 1.1);
        let cf = TwoStateClosedForm::new(&m, &mom).unwrap();
        let rotated = crate::field::rotate_amplitude(&cf, rot);
        let n = Vector3::new(0.0, 0.6, 0.8);
        let n0 = Vector3::new(1.0, 0.0, 0.0);
        // isotropic channels: the amplitude only sees R̂ through n·R̂, n₀·R̂
        let gen = general_two_center_amplitude(&m.interaction().unwrap(), &cs, &mom, &(rot * Vector3::z() * m.r));
        let lab = gen.unwrap().eval(&n, &n0).unwrap();
        let a = rotated.eval(&n, &n0).unwrap();
        assert!((a[(0, 0)] - lab[(0, 0)]).norm() < 1e-12);
        assert!((a[(1, 0)] - lab[(1, 0)]).norm() < 1e-12);
    }

    #[test]
    fn bound_state_pole_of_gerade_s_branch() {
        // α₀ - κ + e^{-2κR}/2R = 0 at κ = 0.5 with R = 1
        let m = TwoCenterModel {
            alpha0: 0.5 - (-1f64).exp() / 2.0,
            alpha1: 5.0,
            c: 0.0,
            l: 0,
            m: 0,
            eta0: 1,
            eta1: 1,
            r: 1.0,
        };
        let rect = ComplexRect::new(-0.3, 0.3, 0.2, 0.9).unwrap();
        let poles = find_poles(&m, 0.3, Parity::Gerade, &rect).unwrap();
        assert_eq!(poles.len(), 1);
        assert!((poles[0] - Complex64::new(0.0, 0.5)).norm() < 1e-10);
    }

    #[test]
    fn branch_cut_crossing_rejected() {
        let m = model(0.0, 0, 0, 1);
        let rect = ComplexRect::new(0.0, 2.0, -0.5, 0.5).unwrap();
        assert!(find_poles(&m, 0.3, Parity::Gerade, &rect).is_err());
    }

    #[test]
    fn pole_in_closed_form_is_reported() {
        let m = TwoCenterModel {
            alpha0: 0.5 - (-1f64).exp() / 2.0,
            alpha1: 5.0,
            c: 0.0,
            l: 0,
            m: 0,
            eta0: 1,
            eta1: 1,
            r: 1.0,
        };
        let mom = Momenta::from_energies(&[0.0, 0.3], Complex64::new(0.0, 0.5));
        let err = TwoStateClosedForm::new(&m, &mom).unwrap_err();
        assert!(matches!(err, ZrpError::Pole { parity: Parity::Gerade, .. }), "{err}");
    }
}
