mod common;

use balanced_net::manifold::{classify, solve_balance};
use balanced_net::model::{FiringRate, MacroState, NetworkParams};
use balanced_net::quadrature::{jacobian_v, QuadratureRule};
use common::oracle_f;
use proptest::prelude::*;

const PANELS: usize = 4000;

fn bisect(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> Option<f64> {
    let (mut glo, ghi) = (g(lo), g(hi));
    if glo.signum() == ghi.signum() {
        return None;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// All balance points with `v_e` in `[-10, 10]`, by nested bisection on trapezoid
/// values of `F`. `F_i` is decreasing in `v_i`, so for each `v_e` its zero in `v_i`
/// is unique when it exists.
fn oracle_roots(k_e: f64, k_i: f64, p: &NetworkParams) -> Vec<(f64, f64)> {
    let f = |ve: f64, vi: f64| oracle_f(&MacroState::new(ve, vi, k_e, k_i), p, PANELS);
    let vi_of = |ve: f64| bisect(-40.0, 40.0, |vi| f(ve, vi).1);
    let h = |ve: f64| vi_of(ve).map(|vi| f(ve, vi).0);
    let grid: Vec<f64> = (0..=80).map(|i| -10.0 + 0.25 * i as f64).collect();
    let mut roots = Vec::new();
    for w in grid.windows(2) {
        if let (Some(a), Some(b)) = (h(w[0]), h(w[1])) {
            if a.signum() != b.signum() {
                let ve = bisect(w[0], w[1], |x| h(x).unwrap_or(f64::NAN)).unwrap();
                roots.push((ve, vi_of(ve).unwrap()));
            }
        }
    }
    roots
}

fn check_experiment(k_e: f64, k_i: f64) {
    let p = NetworkParams::reference_preset();
    let rule = QuadratureRule::standard();
    let (m_e, m_i) = solve_balance(k_e, k_i, &p, None, rule).unwrap();
    let r = classify(&MacroState::new(m_e, m_i, k_e, k_i), &p, rule);
    assert!(r.residual.0.abs() <= 1e-12 && r.residual.1.abs() <= 1e-12, "{:?}", r.residual);
    assert!(r.in_u && r.zeta > 0.0);
    let roots = oracle_roots(k_e, k_i, &p);
    assert!(!roots.is_empty());
    let nearest = roots
        .iter()
        .map(|&(a, b)| (a - m_e).abs().max((b - m_i).abs()))
        .fold(f64::INFINITY, f64::min);
    assert!(nearest < 1e-6, "solver root ({m_e}, {m_i}) vs oracle {roots:?}");
}

#[test]
fn first_experiment_balance_point() {
    check_experiment(1.0, 1.0);
}

#[test]
fn second_experiment_balance_point() {
    check_experiment(1.0, 0.5);
}

#[test]
fn symmetric_network_has_a_root() {
    let e = FiringRate::tanh_affine(0.5, 2.0, 1.0);
    let i = FiringRate::tanh_affine(1.0, 1.0, 1.0);
    let p = NetworkParams::new([1.0, 1.5, 1.0, 1.5], 1.0, 1.0, 100, [e.clone(), i.clone(), e, i]).unwrap();
    let rule = QuadratureRule::standard();
    let (m_e, m_i) = solve_balance(0.7, 0.7, &p, None, rule).unwrap();
    let r = classify(&MacroState::new(m_e, m_i, 0.7, 0.7), &p, rule);
    assert!(r.residual.0.abs() <= 1e-12 && r.residual.1.abs() <= 1e-12);
    assert_eq!(r.residual.0, r.residual.1);
}

#[test]
fn newton_basin_around_first_root() {
    let p = NetworkParams::reference_preset();
    let rule = QuadratureRule::standard();
    let root = solve_balance(1.0, 1.0, &p, None, rule).unwrap();
    for k in 0..16 {
        let a = k as f64 * std::f64::consts::PI / 8.0;
        for r in [0.25, 0.5, 1.0] {
            let guess = (root.0 + r * a.cos(), root.1 + r * a.sin());
            let got = solve_balance(1.0, 1.0, &p, Some(guess), rule).unwrap();
            assert!((got.0 - root.0).abs() < 1e-9 && (got.1 - root.1).abs() < 1e-9, "guess {guess:?} -> {got:?}");
        }
    }
}

fn random_params(c: [f64; 4], a: [f64; 4], b: [f64; 4], g: [f64; 4]) -> NetworkParams {
    let rates = std::array::from_fn(|k| FiringRate::tanh_affine(a[k], b[k], g[k]));
    NetworkParams::new(c, 1.0, 1.0, 100, rates).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigenvalues_solve_characteristic_equation(ve in -4.0..4.0f64, vi in -4.0..4.0f64, ke in 0.0..4.0f64, ki in 0.0..4.0f64,
                                                 c in prop::array::uniform4(0.0..2.0f64)) {
        let p = NetworkParams::reference_preset().with_coupling(c);
        let j = jacobian_v(&MacroState::new(ve, vi, ke, ki), &p, QuadratureRule::standard());
        let (tr, det) = (j.trace(), j.det());
        let scale = 1f64.max(tr.abs()).max(det.abs());
        for l in j.eigenvalues() {
            let re = l.re * l.re - l.im * l.im - tr * l.re + det;
            let im = 2.0 * l.re * l.im - tr * l.im;
            prop_assert!(re.hypot(im) <= 1e-10 * scale);
        }
    }

    #[test]
    fn zeta_sign_matches_membership(c in prop::array::uniform4(0.2..2.0f64), a in prop::array::uniform4(0.2..2.0f64),
                                    b in prop::array::uniform4(1.0..3.0f64), g in prop::array::uniform4(0.1..2.0f64),
                                    ke in 0.1..3.0f64, ki in 0.1..3.0f64) {
        let p = random_params(c, a, b, g);
        let rule = QuadratureRule::standard();
        if let Ok((m_e, m_i)) = solve_balance(ke, ki, &p, None, rule) {
            let r = classify(&MacroState::new(m_e, m_i, ke, ki), &p, rule);
            prop_assert!(r.residual.0.abs() <= 1e-12 && r.residual.1.abs() <= 1e-12);
            prop_assert_eq!(r.in_u, r.zeta > 0.0);
        }
    }
}
