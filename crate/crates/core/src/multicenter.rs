//! `N` nonoverlapping matrix ZRPs.
//!
//! With `C_i(n, n₀) = √4π A_i(n) C_i` the coupled equations become the
//! finite block system
//!
//! ```text
//! F_i⁻¹ C_i - Σ_{j≠i} H_ij C_j = √4π A_i⁺(n₀) e^{iKn₀·R_i},
//! ```
//!
//! with translation blocks `H_ij = 4π∫ A_i⁺(n) H(R_i - R_j, n; K) A_j(n) dΩ`,
//! and `F(n, n₀) = Σ_i e^{-iKn·R_i} √4π A_i(n) C_i`.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::channels::{ChannelSet, Momenta};
use crate::error::{invalid, Result, ZrpError};
use crate::field::AmplitudeField;
use crate::linalg::{self, diag, max_abs, CMatrix};
use crate::one_center::{inverse_f_kernel, InteractionW};
use crate::twocenter::translation_coefficient;

/// One scattering center. `radius` bounds its interaction region (0 for a
/// point ZRP).
#[derive(Debug, Clone)]
pub struct CenterSpec {
    pub position: Vector3<f64>,
    pub radius: f64,
    pub channels: ChannelSet,
    pub interaction: InteractionW,
}

impl CenterSpec {
    pub fn new(position: Vector3<f64>, radius: f64, channels: ChannelSet, interaction: InteractionW) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return invalid(format!("center radius must be finite and >= 0, got {radius}"));
        }
        if !position.iter().all(|x| x.is_finite()) {
            return invalid("center position must be finite");
        }
        if channels.len() != interaction.dim() {
            return invalid(format!(
                "center has {} channels but a {}x{} interaction",
                channels.len(),
                interaction.dim(),
                interaction.dim()
            ));
        }
        if channels.orbital() != interaction.orbital() {
            return invalid("channel orbital momenta differ from those of the interaction");
        }
        Ok(Self {
            position,
            radius,
            channels,
            interaction,
        })
    }

    /// The inversion image: position `-R`, interaction `S W S` with
    /// `S = Σ(-1)^L`, so that its amplitude is `Σ F(-n, -n₀) Σ`.
    pub fn parity_image(&self) -> Result<Self> {
        let s = diag(self.channels.channels().iter().map(|c| {
            let inv = if c.l() % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(c.parity as f64 * inv, 0.0)
        }));
        let w = &s * self.interaction.w() * &s;
        Self::new(
            -self.position,
            self.radius,
            self.channels.clone(),
            InteractionW::new(w, self.interaction.orbital().to_vec())?,
        )
    }
}

/// Assembled block system for one incidence direction.
#[derive(Debug, Clone)]
pub struct MultiCenterSystem {
    matrix: CMatrix,
    rhs: CMatrix,
    block: usize,
}

impl MultiCenterSystem {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &CMatrix {
        &self.rhs
    }

    /// Channels per center.
    pub fn block(&self) -> usize {
        self.block
    }

    pub fn n_centers(&self) -> usize {
        self.matrix.nrows() / self.block
    }
}

fn check_centers(centers: &[CenterSpec], mom: &Momenta) -> Result<usize> {
    let Some(first) = centers.first() else {
        return invalid("at least one center is required");
    };
    let block = first.channels.len();
    let energies = |c: &CenterSpec| -> Vec<f64> { c.channels.channels().iter().map(|ch| ch.excitation_energy).collect() };
    let e0 = energies(first);
    for (i, c) in centers.iter().enumerate() {
        if c.channels.len() != block || energies(c) != e0 {
            return invalid(format!("center {i} does not share the channel energies of center 0"));
        }
    }
    if mom.len() != block {
        return invalid("momenta and channel set sizes differ");
    }
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let separation = (centers[i].position - centers[j].position).norm();
            let radii = centers[i].radius + centers[j].radius;
            if separation == 0.0 || radii > separation {
                return Err(ZrpError::Overlap {
                    first: i,
                    second: j,
                    radii,
                    separation,
                });
            }
        }
    }
    Ok(block)
}

/// `H_ij`, diagonal in the channels.
fn translation_block(ci: &CenterSpec, cj: &CenterSpec, mom: &Momenta) -> Result<CMatrix> {
    let d = ci.position - cj.position;
    let mut h = Vec::with_capacity(mom.len());
    for (a, k) in mom.k().iter().enumerate() {
        let ya = ci.channels.channels()[a].angular;
        let yb = cj.channels.channels()[a].angular;
        h.push(if k.norm() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            translation_coefficient(*k, ya, yb, &d)?
        });
    }
    Ok(diag(h))
}

fn system_matrix(centers: &[CenterSpec], mom: &Momenta, block: usize) -> Result<CMatrix> {
    let n = centers.len();
    let mut m = CMatrix::zeros(n * block, n * block);
    for (i, ci) in centers.iter().enumerate() {
        let inv_f = -inverse_f_kernel(&ci.interaction, mom)?;
        m.view_mut((i * block, i * block), (block, block)).copy_from(&inv_f);
        for (j, cj) in centers.iter().enumerate() {
            if i != j {
                let h = translation_block(ci, cj, mom)?;
                m.view_mut((i * block, j * block), (block, block)).copy_from(&(-h));
            }
        }
    }
    Ok(m)
}

fn incidence_rhs(centers: &[CenterSpec], mom: &Momenta, block: usize, n0: &Vector3<f64>) -> Result<CMatrix> {
    let s4 = (4.0 * PI).sqrt();
    let mut rhs = CMatrix::zeros(centers.len() * block, block);
    for (i, c) in centers.iter().enumerate() {
        let y = c.channels.harmonics(n0)?;
        let x = n0.dot(&c.position);
        for a in 0..block {
            rhs[(i * block + a, a)] = s4 * y[a].conj() * (Complex64::i() * mom.k()[a] * x).exp();
        }
    }
    Ok(rhs)
}

pub fn assemble_system(centers: &[CenterSpec], mom: &Momenta, n0: &Vector3<f64>) -> Result<MultiCenterSystem> {
    let block = check_centers(centers, mom)?;
    Ok(MultiCenterSystem {
        matrix: system_matrix(centers, mom, block)?,
        rhs: incidence_rhs(centers, mom, block, n0)?,
        block,
    })
}

const SYSTEM_CONTEXT: &str = "multicenter system (bound or quasibound state)";

/// Solution blocks `C_i`, each `N_ch × N_ch`.
pub fn solve_multicenter(sys: &MultiCenterSystem) -> Result<Vec<CMatrix>> {
    let x = linalg::solve(&sys.matrix, &sys.rhs, SYSTEM_CONTEXT)?;
    let residual = max_abs(&(&sys.matrix * &x - &sys.rhs));
    let scale = max_abs(&sys.rhs);
    if residual > 1e-11 * scale {
        return Err(ZrpError::NotConverged {
            quantity: "multicenter solve".into(),
            detail: format!("residual {residual:.3e} against |rhs| {scale:.3e}"),
        });
    }
    let b = sys.block;
    Ok((0..sys.n_centers()).map(|i| x.rows(i * b, b).into_owned()).collect())
}

/// Outgoing-direction dependence for one solved incidence direction.
#[derive(Debug, Clone)]
pub struct FixedIncidenceAmplitude {
    centers: Vec<CenterSpec>,
    k: Vec<Complex64>,
    blocks: Vec<CMatrix>,
}

impl FixedIncidenceAmplitude {
    /// `F(n, n₀) = Σ_i e^{-iKn·R_i} √4π A_i(n) C_i`.
    pub fn eval(&self, n: &Vector3<f64>) -> Result<CMatrix> {
        outgoing(&self.centers, &self.k, &self.blocks, n)
    }
}

fn outgoing(centers: &[CenterSpec], k: &[Complex64], blocks: &[CMatrix], n: &Vector3<f64>) -> Result<CMatrix> {
    let s4 = (4.0 * PI).sqrt();
    let dim = k.len();
    let mut f = CMatrix::zeros(dim, dim);
    for (c, blk) in centers.iter().zip(blocks) {
        let y = c.channels.harmonics(n)?;
        let x = n.dot(&c.position);
        for a in 0..dim {
            let pre = s4 * y[a] * (-Complex64::i() * k[a] * x).exp();
            for b in 0..dim {
                f[(a, b)] += pre * blk[(a, b)];
            }
        }
    }
    Ok(f)
}

pub fn multicenter_amplitude(centers: &[CenterSpec], blocks: &[CMatrix], mom: &Momenta) -> Result<FixedIncidenceAmplitude> {
    let block = check_centers(centers, mom)?;
    if blocks.len() != centers.len() || blocks.iter().any(|b| b.shape() != (block, block)) {
        return invalid("one N_ch x N_ch block per center is required");
    }
    Ok(FixedIncidenceAmplitude {
        centers: centers.to_vec(),
        k: mom.k().to_vec(),
        blocks: blocks.to_vec(),
    })
}

/// Full `F(n, n₀)` with the system matrix inverted once for all incidence
/// directions.
#[derive(Debug, Clone)]
pub struct MultiCenterField {
    centers: Vec<CenterSpec>,
    mom: Momenta,
    block: usize,
    inverse: CMatrix,
}

impl MultiCenterField {
    pub fn new(centers: &[CenterSpec], mom: &Momenta) -> Result<Self> {
        let block = check_centers(centers, mom)?;
        let m = system_matrix(centers, mom, block)?;
        Ok(Self {
            centers: centers.to_vec(),
            mom: mom.clone(),
            block,
            inverse: linalg::invert(&m, SYSTEM_CONTEXT)?,
        })
    }
}

impl AmplitudeField for MultiCenterField {
    fn eval(&self, n: &Vector3<f64>, n0: &Vector3<f64>) -> Result<CMatrix> {
        let rhs = incidence_rhs(&self.centers, &self.mom, self.block, n0)?;
        let x = &self.inverse * rhs;
        let b = self.block;
        let blocks: Vec<CMatrix> = (0..self.centers.len()).map(|i| x.rows(i * b, b).into_owned()).collect();
        outgoing(&self.centers, self.mom.k(), &blocks, n)
    }
}
