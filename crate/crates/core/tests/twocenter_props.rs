use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zrp::channels::Momenta;
use zrp::field::AmplitudeField;
use zrp::linalg::max_abs;
use zrp::one_center::{angular_amplitude, build_one_center_f};
use zrp::specfun::sphere_product_rule;
use zrp::twocenter::*;
use zrp::Parity;

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n < 1.0 {
            return v / n;
        }
    }
}

fn random_model(rng: &mut ChaCha8Rng) -> TwoCenterModel {
    let l = rng.gen_range(0..=2u32);
    let m = rng.gen_range(-(l as i32)..=l as i32);
    TwoCenterModel {
        alpha0: rng.gen_range(-1.0..1.0),
        alpha1: rng.gen_range(-1.0..1.0),
        c: rng.gen_range(-0.8..0.8),
        l,
        m,
        eta0: 1,
        eta1: if rng.gen_bool(0.5) { 1 } else { -1 },
        r: rng.gen_range(0.5..2.0),
    }
}

/// Bisection on `α - κ + x e^{-2κR}/2R = 0` for the real bound-state `κ`.
fn bisect_kappa(alpha: f64, x: f64, r: f64) -> f64 {
    let f = |k: f64| alpha - k + x * (-2.0 * k * r).exp() / (2.0 * r);
    let (mut a, mut b) = (1e-9, 50.0);
    assert!(f(a) * f(b) < 0.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(a) * f(m) <= 0.0 {
            b = m
        } else {
            a = m
        }
    }
    0.5 * (a + b)
}

#[test]
fn split_and_linear_system_paths_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let model = random_model(&mut rng);
        let e1 = rng.gen_range(0.0..0.3);
        let cs = model.channel_set(e1).unwrap();
        let k0 = rng.gen_range(0.2..1.5);
        let mom = Momenta::compute(&cs, k0).unwrap();
        let axis = random_unit(&mut rng) * model.r;
        let Ok(amp) = general_two_center_amplitude(&model.interaction().unwrap(), &cs, &mom, &axis) else {
            continue;
        };
        let n = random_unit(&mut rng);
        let n0 = random_unit(&mut rng);
        let a = amp.eval(&n, &n0).unwrap();
        let b = amp.eval_block_system(&n, &n0).unwrap();
        assert!(max_abs(&(&a - &b)) <= 1e-10 * max_abs(&a).max(1.0));
    }
}

#[test]
fn flux_is_conserved_for_each_incidence() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rule = sphere_product_rule(40, 64).unwrap();
    for _ in 0..4 {
        let model = random_model(&mut rng);
        let cs = model.channel_set(0.1).unwrap();
        let k0 = rng.gen_range(0.6..1.2);
        let mom = Momenta::compute(&cs, k0).unwrap();
        let axis = random_unit(&mut rng) * model.r;
        let amp = general_two_center_amplitude(&model.interaction().unwrap(), &cs, &mom, &axis).unwrap();
        let n0 = random_unit(&mut rng);
        let mut sigma = 0.0;
        for (n, w) in &rule {
            let f = amp.eval(n, &n0).unwrap();
            for ch in 0..2 {
                sigma += w * mom.k()[ch].re / k0 * f[(ch, 0)].norm_sqr();
            }
        }
        let optical = 4.0 * std::f64::consts::PI / k0 * amp.eval(&n0, &n0).unwrap()[(0, 0)].im;
        assert!((sigma - optical).abs() <= 1e-8 * optical.abs().max(1e-3), "{sigma} {optical}");
    }
}

#[test]
fn reciprocity_for_axial_channels() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let model = TwoCenterModel { m: 0, ..random_model(&mut rng) };
        let cs = model.channel_set(0.05).unwrap();
        let mom = Momenta::compute(&cs, rng.gen_range(0.5..1.5)).unwrap();
        let axis = random_unit(&mut rng) * model.r;
        let amp = general_two_center_amplitude(&model.interaction().unwrap(), &cs, &mom, &axis).unwrap();
        let n = random_unit(&mut rng);
        let n0 = random_unit(&mut rng);
        let fwd = amp.eval(&n, &n0).unwrap();
        // F_ab(n, n₀) = (-1)^{l_a + l_b} F_ba(-n₀, -n)
        let rev = amp.eval(&-n0, &-n).unwrap();
        let sign = if model.l.is_multiple_of(2) { 1.0 } else { -1.0 };
        let expect = nalgebra::DMatrix::from_fn(2, 2, |a, b| if a == b { rev[(b, a)] } else { sign * rev[(b, a)] });
        assert!(max_abs(&(&fwd - expect)) <= 1e-10 * max_abs(&fwd).max(1.0));
    }
}

#[test]
fn decoupled_poles_are_union_of_single_channel_poles() {
    let model = TwoCenterModel {
        alpha0: 0.35,
        alpha1: 0.6,
        c: 0.0,
        l: 0,
        m: 0,
        eta0: 1,
        eta1: 1,
        r: 1.2,
    };
    let e1 = 0.2;
    let rect = ComplexRect::new(-0.4, 0.4, 0.05, 2.0).unwrap();
    for parity in [Parity::Gerade, Parity::Ungerade] {
        let x = parity.sign();
        let mut both = find_poles(&model, e1, parity, &rect).unwrap();
        let mut separate: Vec<Complex64> = Vec::new();
        separate.extend(find_roots(|k| Ok(theta0(x, model.alpha0, k, model.r)), &rect, 1e-12).unwrap());
        separate.extend(
            find_roots(
                |k| {
                    let k1 = zrp::channels::branch_sqrt(k * k - 2.0 * e1);
                    Ok(theta1(x, model.alpha1, k1, model.excited_index(), model.r))
                },
                &rect,
                1e-12,
            )
            .unwrap(),
        );
        let key = |z: &Complex64| (z.im * 1e9).round() as i64;
        both.sort_by_key(key);
        separate.sort_by_key(key);
        assert_eq!(both.len(), separate.len());
        for (a, b) in both.iter().zip(&separate) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}

#[test]
fn decoupled_poles_match_bisection() {
    let model = TwoCenterModel {
        alpha0: 0.6,
        alpha1: 5.0,
        c: 0.0,
        l: 1,
        m: 0,
        eta0: 1,
        eta1: -1,
        r: 1.5,
    };
    let rect = ComplexRect::new(-0.3, 0.3, 0.01, 1.5).unwrap();
    for parity in [Parity::Gerade, Parity::Ungerade] {
        let poles = find_poles(&model, 0.3, parity, &rect).unwrap();
        let kappa = bisect_kappa(model.alpha0, parity.sign(), model.r);
        assert!(poles.iter().any(|p| (p - Complex64::new(0.0, kappa)).norm() < 1e-10), "{parity}: {poles:?} vs {kappa}");
    }
}

#[test]
fn ungerade_pole_tends_to_isolated_center() {
    let model = TwoCenterModel {
        alpha0: 0.5,
        alpha1: 3.0,
        c: 0.0,
        l: 0,
        m: 0,
        eta0: 1,
        eta1: 1,
        r: 20.0,
    };
    let rect = ComplexRect::new(-0.2, 0.2, 0.3, 0.8).unwrap();
    let poles = find_poles(&model, 0.3, Parity::Ungerade, &rect).unwrap();
    assert_eq!(poles.len(), 1);
    assert!((poles[0] - Complex64::new(0.0, 0.5)).norm() < 1e-6);
}

#[test]
fn potential_curve_matches_bisection_pointwise() {
    let model = TwoCenterModel {
        alpha0: 0.2,
        alpha1: 4.0,
        c: 0.0,
        l: 0,
        m: 0,
        eta0: 1,
        eta1: 1,
        r: 1.0,
    };
    let grid: Vec<f64> = (0..49).map(|i| 0.8 + 0.4 * i as f64).collect();
    let seed = Complex64::new(0.0, bisect_kappa(model.alpha0, 1.0, grid[0]) + 0.01);
    let curve = potential_curves(&model, 0.3, &grid, Parity::Gerade, seed).unwrap();
    for p in &curve {
        let kappa = bisect_kappa(model.alpha0, 1.0, p.r);
        assert!((p.k0 - Complex64::new(0.0, kappa)).norm() < 1e-10);
        assert!((p.energy.re + 0.5 * kappa * kappa).abs() < 1e-10);
    }
    let last = curve.last().unwrap();
    assert!((last.energy.re + 0.5 * model.alpha0 * model.alpha0).abs() < 1e-4);
}

#[test]
fn sign_flip_swaps_gerade_and_ungerade_curves() {
    let model = TwoCenterModel {
        alpha0: 0.6,
        alpha1: 0.7,
        c: 0.3,
        l: 0,
        m: 0,
        eta0: 1,
        eta1: 1,
        r: 1.0,
    };
    let flipped = TwoCenterModel { eta0: -1, eta1: -1, ..model };
    let k = Complex64::new(0.3, 0.7);
    let g = pole_denominator(&model, 0.2, Parity::Gerade, k).unwrap();
    let u = pole_denominator(&flipped, 0.2, Parity::Ungerade, k).unwrap();
    assert!((g - u).norm() < 1e-15);
}

#[test]
fn far_separation_reduces_to_independent_centers() {
    let model = TwoCenterModel {
        alpha0: 0.4,
        alpha1: -0.3,
        c: 0.5,
        l: 1,
        m: 0,
        eta0: 1,
        eta1: -1,
        r: 1.0,
    };
    let cs = model.channel_set(0.1).unwrap();
    let k0 = 1.0;
    let mom = Momenta::compute(&cs, k0).unwrap();
    let w = model.interaction().unwrap();
    let single = angular_amplitude(&build_one_center_f(&w, &mom).unwrap(), &cs).unwrap();
    let n = Vector3::new(0.0, 0.6, 0.8);
    let n0 = Vector3::new(0.6, 0.0, 0.8);
    let mut errs = Vec::new();
    for r in [100.0, 400.0, 1600.0] {
        let axis = Vector3::new(0.0, 0.0, r);
        let amp = general_two_center_amplitude(&w, &cs, &mom, &axis).unwrap();
        let sigma = cs.parity_matrix();
        let f1 = single.eval(&n, &n0).unwrap();
        let f2 = &sigma * single.eval(&-n, &-n0).unwrap() * &sigma;
        let phase = |v: &Vector3<f64>, s: f64| {
            nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                2,
                mom.k().iter().map(|&k| (Complex64::i() * s * k * v.dot(&axis)).exp()),
            ))
        };
        let scale = max_abs(&f1).max(1.0).powi(2);
        let sum = phase(&n, -1.0) * f1 * phase(&n0, 1.0) + phase(&n, 1.0) * f2 * phase(&n0, -1.0);
        let err = max_abs(&(amp.eval(&n, &n0).unwrap() - sum));
        // interference is a single rescattering between the centers, O(|H|)
        assert!(err <= 10.0 * scale * max_abs(&amp.h_matrix()), "R = {r}: {err}");
        errs.push(err);
    }
    assert!(errs[2] < errs[0]);
}
