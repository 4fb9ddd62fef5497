use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use proptest::prelude::*;
use zrp::specfun::*;

/// Term-by-term power series of j_λ(x), summed independently of the library.
fn series_oracle_j(lambda: u32, x: f64) -> f64 {
    let mut dfact = 1.0;
    for i in 1..=lambda {
        dfact *= (2 * i + 1) as f64;
    }
    let mut sum = 0.0;
    let mut term = x.powi(lambda as i32) / dfact;
    for k in 0..80 {
        sum += term;
        term *= -0.5 * x * x / ((k + 1) as f64 * (2 * lambda + 2 * k + 3) as f64);
    }
    sum
}

/// Applies `(-1/x d/dx)` λ times to `e^{ix}/x` on the exact representation
/// `e^{ix} Σ_k c_k x^{-k}` with Gaussian-integer coefficients, then multiplies
/// by `x^λ`.
fn operator_oracle_h(lambda: u32, x: f64) -> Complex64 {
    // coefficients as (re, im) integer pairs, index = power of 1/x
    let mut c: Vec<(i64, i64)> = vec![(0, 0), (1, 0)];
    for _ in 0..lambda {
        let mut next = vec![(0i64, 0i64); c.len() + 2];
        for (k, &(re, im)) in c.iter().enumerate() {
            // -(1/x) d/dx [e^{ix} x^{-k}] = e^{ix} (-i x^{-k-1} + k x^{-k-2})
            next[k + 1].0 += im; // -i (re + i im) = im - i re
            next[k + 1].1 -= re;
            next[k + 2].0 += k as i64 * re;
            next[k + 2].1 += k as i64 * im;
        }
        c = next;
    }
    let mut poly = Complex64::new(0.0, 0.0);
    for (k, &(re, im)) in c.iter().enumerate() {
        poly += Complex64::new(re as f64, im as f64) * x.powi(-(k as i32));
    }
    Complex64::new(0.0, x).exp() * poly * x.powi(lambda as i32)
}

#[test]
fn bessel_matches_series_oracle() {
    let oracle = series_oracle_j(2, 1.0);
    assert!((oracle - 0.06203505201137386).abs() < 1e-16);
    let got = spherical_bessel_j(2, 1.0).unwrap();
    assert!((got - oracle).abs() < 1e-12 * oracle.abs());
    for lambda in 0..=15 {
        for &x in &[0.05, 0.5, 1.0, 2.0, 4.5, 7.0] {
            let o = series_oracle_j(lambda, x);
            let g = spherical_bessel_j(lambda, x).unwrap();
            assert!((g - o).abs() <= 1e-12 * o.abs() + 1e-14, "λ={lambda} x={x}: {g} vs {o}");
        }
    }
}

#[test]
fn hankel_matches_operator_definition() {
    let oracle = operator_oracle_h(5, 2.5);
    assert!((oracle - Complex64::new(5.599_100_154_806_325, 0.007_357_638_737_768_629)).norm() < 1e-12);
    let got = hankel_paper_h(5, 2.5).unwrap();
    assert!((got - oracle).norm() < 1e-12 * oracle.norm());
    let got_c = hankel_paper_h_complex(5, Complex64::new(2.5, 0.0)).unwrap();
    assert!((got_c - oracle).norm() < 1e-12 * oracle.norm());
}

#[test]
fn hankel_is_i_times_standard_first_kind() {
    // standard h^(1) = j + i y
    for lambda in 0..6 {
        let x = 1.7;
        let h1 = Complex64::new(
            spherical_bessel_j(lambda, x).unwrap(),
            spherical_bessel_y(lambda, x).unwrap(),
        );
        let h = hankel_paper_h(lambda, x).unwrap();
        assert!((h - Complex64::i() * h1).norm() < 1e-14 * h.norm());
    }
}

#[test]
fn bessel_is_imaginary_part_of_h() {
    for lambda in 0..=10 {
        for &x in &[0.1, 1.0, 5.0, 20.0] {
            let h = hankel_paper_h(lambda, x).unwrap();
            let from_h = ((h - h.conj()) / Complex64::new(0.0, 2.0)).re;
            let j = spherical_bessel_j(lambda, x).unwrap();
            assert!((from_h - j).abs() <= 1e-10 * j.abs().max(1.0), "λ={lambda} x={x}");
        }
    }
}

fn quadrature_gaunt(l: u32, m: i32, lambda: u32) -> f64 {
    let gl = gauss_legendre(64).unwrap();
    let idx = AngularIndex::new(l, m).unwrap();
    // |Y_lm|² is azimuth independent: 2π ∫ |Y_lm(θ,0)|² P_λ(cosθ) d cosθ
    2.0 * PI
        * gl.integrate(|x| {
            let s = (1.0 - x * x).sqrt();
            let y = sph_harm(idx, &Vector3::new(s, 0.0, x)).unwrap();
            y.norm_sqr() * legendre_p(lambda, x).unwrap()
        })
}

#[test]
fn gaunt_closed_form_matches_quadrature() {
    assert!((quadrature_gaunt(1, 0, 2) - 0.4).abs() < 1e-14);
    assert!((quadrature_gaunt(1, 1, 2) + 0.2).abs() < 1e-14);
    for l in 0..=6u32 {
        for m in -(l as i32)..=l as i32 {
            for lambda in (0..=2 * l).step_by(2) {
                let closed = gaunt_yyp(AngularIndex::new(l, m).unwrap(), lambda);
                let quad = quadrature_gaunt(l, m, lambda);
                assert!((closed - quad).abs() < 1e-12, "l={l} m={m} λ={lambda}: {closed} vs {quad}");
            }
        }
    }
}

#[test]
fn three_j_matches_frozen_exact_values() {
    // values from an independent exact-rational evaluation
    assert!((wigner3j(2, 2, 2, 1, -1, 0) - 0.119_522_860_933_439_36).abs() < 1e-15);
    assert!((wigner3j(1, 1, 0, 0, 0, 0) + 0.577_350_269_189_625_8).abs() < 1e-15);
}

#[test]
fn three_j_orthogonality() {
    for j1 in 0..=5i32 {
        for j2 in 0..=5 {
            for j3 in (j1 - j2).abs()..=(j1 + j2) {
                for j3p in (j1 - j2).abs()..=(j1 + j2) {
                    for m3 in -j3..=j3 {
                        for m3p in -j3p..=j3p {
                            let mut s = 0.0;
                            for m1 in -j1..=j1 {
                                for m2 in -j2..=j2 {
                                    s += wigner3j(j1, j2, j3, m1, m2, m3)
                                        * wigner3j(j1, j2, j3p, m1, m2, m3p);
                                }
                            }
                            s *= (2 * j3 + 1) as f64;
                            let expect = if j3 == j3p && m3 == m3p { 1.0 } else { 0.0 };
                            assert!((s - expect).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn harmonics_are_normalized_under_quadrature() {
    let rule = sphere_product_rule(40, 40).unwrap();
    for l in 0..=6u32 {
        for m in -(l as i32)..=l as i32 {
            let idx = AngularIndex::new(l, m).unwrap();
            let norm: f64 = rule
                .iter()
                .map(|(n, w)| w * sph_harm(idx, n).unwrap().norm_sqr())
                .sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn general_gaunt_matches_quadrature() {
    let rule = sphere_product_rule(24, 30).unwrap();
    let cases = [((1, 1), (2, 0), (1, 1)), ((2, -1), (1, 0), (3, -1)), ((2, 2), (2, 0), (2, 2))];
    for &((l1, m1), (l2, m2), (l3, m3)) in &cases {
        let a = AngularIndex::new(l1, m1).unwrap();
        let b = AngularIndex::new(l2, m2).unwrap();
        let c = AngularIndex::new(l3, m3).unwrap();
        let quad: Complex64 = rule
            .iter()
            .map(|(n, w)| {
                sph_harm(a, n).unwrap().conj() * sph_harm(b, n).unwrap() * sph_harm(c, n).unwrap() * *w
            })
            .sum();
        assert!((quad.re - gaunt_conj(a, b, c)).abs() < 1e-12 && quad.im.abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn addition_theorem(theta in 0.0..PI, phi in 0.0..(2.0 * PI), l in 0u32..=8) {
        let n = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        let s: f64 = (-(l as i32)..=l as i32)
            .map(|m| sph_harm(AngularIndex::new(l, m).unwrap(), &n).unwrap().norm_sqr())
            .sum();
        prop_assert!((s - (2 * l + 1) as f64 / (4.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn three_j_symmetric_under_column_swap(j1 in 0i32..6, j2 in 0i32..6, j3 in 0i32..6, m1 in -5i32..6, m2 in -5i32..6) {
        // swapping two columns multiplies by (-1)^{j1+j2+j3}
        let m3 = -m1 - m2;
        let a = wigner3j(j1, j2, j3, m1, m2, m3);
        let b = wigner3j(j2, j1, j3, m2, m1, m3);
        let sign = if (j1 + j2 + j3) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((a - sign * b).abs() < 1e-14);
    }
}
