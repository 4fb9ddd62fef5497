//! Special functions and angular-momentum algebra shared by the scattering
//! modules. Everything here is a pure function; the exact factorial table is
//! built once on first use.

mod angular;
mod bessel;
mod quadrature;

pub use angular::{
    clebsch_gordan, gaunt_conj, gaunt_yyp, legendre_p, sph_harm, sph_harm_vec, wigner3j,
    AngularIndex, MAX_3J, MAX_L,
};
pub(crate) use angular::{legendre_overlap, legendre_unchecked, sph_harm_unchecked};
pub use bessel::{
    hankel_paper_h, hankel_paper_h_complex, spherical_bessel_j, spherical_bessel_y, MAX_ORDER,
};
pub(crate) use bessel::{bessel_j_sequence, bessel_j_unchecked, hankel_unchecked};
pub use quadrature::{
    gauss_hermite, gauss_legendre, sphere_product_rule, QuadratureKind, QuadratureRule,
};
