//! Scattering channels and the diagonal channel matrices `K`, `L`, `A(n)`
//! and `Σ`.

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::specfun::{sph_harm, AngularIndex};

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub label: String,
    /// Excitation energy `E_n` in hartree.
    pub excitation_energy: f64,
    pub angular: AngularIndex,
    /// Inversion parity `η_n = ±1`.
    pub parity: i8,
}

impl Channel {
    pub fn new(label: impl Into<String>, excitation_energy: f64, angular: AngularIndex, parity: i8) -> Result<Self> {
        if parity != 1 && parity != -1 {
            return invalid(format!("parity must be +1 or -1, got {parity}"));
        }
        if !(excitation_energy.is_finite() && excitation_energy >= 0.0) {
            return invalid(format!("excitation energy must be finite and >= 0, got {excitation_energy}"));
        }
        Ok(Self {
            label: label.into(),
            excitation_energy,
            angular,
            parity,
        })
    }

    /// Ground-state style `s` channel with even parity.
    pub fn s_wave(label: impl Into<String>, excitation_energy: f64) -> Result<Self> {
        Self::new(label, excitation_energy, AngularIndex::new(0, 0)?, 1)
    }

    pub fn l(&self) -> u32 {
        self.angular.l()
    }
}

/// Ordered channel list; index 0 is the entrance channel and has `E_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    channels: Vec<Channel>,
}

impl ChannelSet {
    pub fn new(channels: Vec<Channel>) -> Result<Self> {
        match channels.first() {
            None => invalid("a channel set needs at least one channel"),
            Some(c) if c.excitation_energy != 0.0 => invalid(format!(
                "entrance channel must have zero excitation energy, got {}",
                c.excitation_energy
            )),
            Some(_) => Ok(Self { channels }),
        }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn get(&self, n: usize) -> Option<&Channel> {
        self.channels.get(n)
    }

    pub fn orbital(&self) -> Vec<u32> {
        self.channels.iter().map(Channel::l).collect()
    }

    /// `Σ = diag(η_n)`.
    pub fn parity_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.len(),
            self.channels.iter().map(|c| Complex64::new(c.parity as f64, 0.0)),
        ))
    }

    /// Diagonal entries `Y_{l_n m_n}(n)` of `A(n)`.
    pub fn harmonics(&self, direction: &Vector3<f64>) -> Result<Vec<Complex64>> {
        self.channels
            .iter()
            .map(|c| sph_harm(c.angular, direction))
            .collect()
    }

    /// `A(n) = diag(Y_{l_n m_n}(n))`.
    pub fn matrix_a(&self, direction: &Vector3<f64>) -> Result<DMatrix<Complex64>> {
        let y = self.harmonics(direction)?;
        Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(y)))
    }
}

/// Channel momenta `k_n = sqrt(k_0² - 2E_n)` on the branch `Im k_n ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Momenta {
    k0: Complex64,
    k: Vec<Complex64>,
}

impl Momenta {
    /// Momenta for a physical (real, positive) entrance momentum.
    pub fn compute(cs: &ChannelSet, k0: f64) -> Result<Self> {
        if !(k0.is_finite() && k0 > 0.0) {
            return invalid(format!("entrance momentum must be finite and > 0, got {k0}"));
        }
        Ok(Self::continued(cs, Complex64::new(k0, 0.0)))
    }

    /// Momenta for a complex entrance momentum (pole searches). Channel
    /// momenta keep `Im k_n ≥ 0`; the entrance momentum is taken as given.
    pub fn continued(cs: &ChannelSet, k0: Complex64) -> Self {
        let energies: Vec<f64> = cs.channels.iter().map(|c| c.excitation_energy).collect();
        Self::from_energies(&energies, k0)
    }

    pub(crate) fn from_energies(energies: &[f64], k0: Complex64) -> Self {
        let k = energies
            .iter()
            .enumerate()
            .map(|(n, &e)| if n == 0 && e == 0.0 { k0 } else { branch_sqrt(k0 * k0 - 2.0 * e) })
            .collect();
        Self { k0, k }
    }

    /// Momenta with explicitly supplied channel values (vibrationally resolved
    /// kinematics overrides individual channels).
    pub fn from_values(k: Vec<Complex64>) -> Result<Self> {
        match k.first() {
            None => invalid("momenta need at least one channel"),
            Some(&k0) => Ok(Self { k0, k }),
        }
    }

    pub fn k0(&self) -> Complex64 {
        self.k0
    }

    pub fn k(&self) -> &[Complex64] {
        &self.k
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    /// Open means real, strictly positive momentum. A channel exactly at
    /// threshold (`k_n = 0`) counts as closed.
    pub fn is_open(&self, n: usize) -> bool {
        let k = self.k[n];
        k.im == 0.0 && k.re > 0.0
    }

    pub fn all_open(&self) -> bool {
        (0..self.k.len()).all(|n| self.is_open(n))
    }

    /// `diag(k_n)`.
    pub fn matrix_k(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.k.clone()))
    }
}

/// Square root on the branch `Im ≥ 0` (`Re ≥ 0` on the real axis).
pub fn branch_sqrt(z: Complex64) -> Complex64 {
    let s = z.sqrt();
    if s.im < 0.0 || (s.im == 0.0 && s.re < 0.0) {
        -s
    } else {
        s
    }
}

/// `k^p` on the principal branch (`arg k ∈ [0, π)` for `Im k ≥ 0`).
pub fn kpow(k: Complex64, p: f64) -> Complex64 {
    if p == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    if p.fract() == 0.0 && p.abs() < 64.0 {
        return k.powi(p as i32);
    }
    k.powf(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn s_and_p0(e1: f64) -> ChannelSet {
        ChannelSet::new(vec![
            Channel::s_wave("X", 0.0).unwrap(),
            Channel::new("b", e1, AngularIndex::new(1, 0).unwrap(), -1).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn open_channel_momentum() {
        let m = Momenta::compute(&s_and_p0(0.375), 1.0).unwrap();
        assert_eq!(m.k()[0], Complex64::new(1.0, 0.0));
        assert!((m.k()[1] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!(m.is_open(1));
    }

    #[test]
    fn closed_channel_momentum() {
        let m = Momenta::compute(&s_and_p0(0.375), 0.5).unwrap();
        assert!((m.k()[1] - Complex64::new(0.0, 0.5f64.sqrt())).norm() < 1e-15);
        assert!(!m.is_open(1));
    }

    #[test]
    fn threshold_is_closed() {
        let m = Momenta::compute(&s_and_p0(0.5), 1.0).unwrap();
        assert_eq!(m.k()[1].norm(), 0.0);
        assert!(!m.is_open(1));
    }

    #[test]
    fn energy_conservation() {
        for &k0 in &[0.1, 0.7, 0.866, 1.3, 4.0] {
            let m = Momenta::compute(&s_and_p0(0.375), k0).unwrap();
            for (n, c) in s_and_p0(0.375).channels().iter().enumerate() {
                let k = m.k()[n];
                let lhs = k * k + 2.0 * c.excitation_energy;
                assert!((lhs - k0 * k0).norm() <= 1e-14 * k0 * k0);
                assert!(k.im >= 0.0);
                assert!((k.im == 0.0) ^ (k.re == 0.0) || k.norm() == 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Momenta::compute(&s_and_p0(0.1), 0.0).is_err());
        assert!(Momenta::compute(&s_and_p0(0.1), -1.0).is_err());
        assert!(ChannelSet::new(vec![]).is_err());
        assert!(ChannelSet::new(vec![Channel::s_wave("a", 0.2).unwrap()]).is_err());
        assert!(Channel::new("x", 0.0, AngularIndex::new(0, 0).unwrap(), 2).is_err());
    }

    #[test]
    fn a_matrix_axis_values() {
        let single = ChannelSet::new(vec![Channel::s_wave("X", 0.0).unwrap()]).unwrap();
        let a = single.matrix_a(&Vector3::new(0.6, 0.0, 0.8)).unwrap();
        assert!((a[(0, 0)].re - (4.0 * PI).sqrt().recip()).abs() < 1e-15);

        let cs = s_and_p0(0.2);
        let az = cs.matrix_a(&Vector3::z()).unwrap();
        assert!((az[(1, 1)].re - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert_eq!(az[(0, 1)].norm(), 0.0);
        let ax = cs.matrix_a(&Vector3::x()).unwrap();
        assert!(ax[(1, 1)].norm() < 1e-16);
    }

    #[test]
    fn negative_radicand_branch() {
        assert_eq!(branch_sqrt(Complex64::new(-4.0, 0.0)), Complex64::new(0.0, 2.0));
        assert_eq!(branch_sqrt(Complex64::new(-4.0, -0.0)).im, 2.0);
        let w = branch_sqrt(Complex64::new(1.0, -1.0));
        assert!(w.im > 0.0);
    }
}
