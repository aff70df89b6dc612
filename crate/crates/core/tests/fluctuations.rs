mod common;

use balanced_net::fluctuations::{
    check_exp_square, check_moc_concentration, check_tail_bound, sample_sups, simulate_compensated, tail_bound,
    CompensatedPath,
};
use common::{mean_var, SplitMix};

/// Event times of a rate-`n` Poisson process on `(0, horizon]` from an independent generator.
fn oracle_events(n: f64, horizon: f64, rng: &mut SplitMix) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += -(1.0 - rng.uniform(0.0, 1.0)).ln() / n;
        if t > horizon {
            return out;
        }
        out.push(t);
    }
}

/// `w(t)` on a uniform grid of `m + 1` points.
fn grid_values(path: &CompensatedPath, m: usize) -> Vec<f64> {
    (0..=m).map(|k| path.value(path.horizon * k as f64 / m as f64)).collect()
}

#[test]
fn single_jump_by_hand() {
    let w = CompensatedPath::from_events(1.0, 1.0, vec![0.3]);
    assert!((w.value(0.2) + 0.2).abs() < 1e-15);
    assert!((w.value(0.3) - 0.7).abs() < 1e-15);
    assert!((w.sup_abs() - 0.7).abs() < 1e-15);
    assert!((w.modulus_of_continuity(0.0) - 1.0).abs() < 1e-15);
    assert!((w.modulus_of_continuity(0.1) - 1.0).abs() < 1e-15);
    // Without jumps only the drift is left.
    let flat = CompensatedPath::from_events(2.0, 1.0, vec![]);
    assert!((flat.sup_abs() - 2.0).abs() < 1e-15);
    assert!((flat.modulus_of_continuity(0.25) - 0.5).abs() < 1e-15);
}

#[test]
fn sup_matches_dense_grid() {
    let mut rng = SplitMix(17);
    for trial in 0..40 {
        let n = [1.0, 5.0, 30.0][trial % 3];
        let path = CompensatedPath::from_events(n, 1.5, oracle_events(n, 1.5, &mut rng));
        let m = 200_000;
        let grid_max = grid_values(&path, m).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let slack = n * path.horizon / m as f64 + 1e-12;
        let sup = path.sup_abs();
        assert!(sup >= grid_max - 1e-12 && sup <= grid_max + slack, "n={n}: {sup} vs grid {grid_max}");
    }
}

#[test]
fn modulus_matches_brute_force() {
    let mut rng = SplitMix(5);
    let m = 4_000;
    for trial in 0..12 {
        let n = [2.0, 8.0, 20.0][trial % 3];
        let path = CompensatedPath::from_events(n, 1.0, oracle_events(n, 1.0, &mut rng));
        let vals = grid_values(&path, m);
        let dx = 1.0 / m as f64;
        for eps in [0.0, 0.013, 0.05, 0.2] {
            let w = (eps / dx + 1e-9).floor() as usize;
            let mut brute: f64 = 0.0;
            for i in 0..=m {
                for j in i..=(i + w).min(m) {
                    brute = brute.max((vals[i] - vals[j]).abs());
                }
            }
            let exact = path.modulus_of_continuity(eps);
            let slack = 2.0 * n * dx + 1e-12;
            if eps == 0.0 {
                let jump = if path.events.is_empty() { 0.0 } else { 1.0 };
                assert_eq!(exact, jump);
            } else {
                assert!(exact >= brute - 1e-12 && exact <= brute + slack, "n={n} eps={eps}: {exact} vs {brute}");
            }
        }
    }
}

#[test]
fn modulus_grows_with_window() {
    let path = simulate_compensated(50, 2.0, 9).normalize();
    let eps = [0.0, 0.001, 0.01, 0.1, 0.5, 2.0];
    let vals: Vec<f64> = eps.iter().map(|&e| path.modulus_of_continuity(e)).collect();
    assert!(vals.windows(2).all(|w| w[0] <= w[1]), "{vals:?}");
    // A window covering the whole horizon sees the full oscillation.
    let grid = grid_values(&path, 100_000);
    let range = grid.iter().cloned().fold(f64::MIN, f64::max) - grid.iter().cloned().fold(f64::MAX, f64::min);
    assert!(vals[5] >= range - 1e-12);
}

#[test]
fn mean_sup_agrees_with_independent_sampler() {
    let trials = 20_000;
    let ours = sample_sups(1, 1.0, trials, 3);
    let mut rng = SplitMix(99);
    let theirs: Vec<f64> = (0..trials)
        .map(|_| CompensatedPath::from_events(1.0, 1.0, oracle_events(1.0, 1.0, &mut rng)).sup_abs())
        .collect();
    let ((ma, va), (mb, vb)) = (mean_var(&ours), mean_var(&theirs));
    let se = (va / trials as f64 + vb / trials as f64).sqrt();
    assert!((ma - mb).abs() <= 4.0 * se, "{ma} vs {mb} (se {se})");
}

#[test]
fn tail_bound_holds_across_sizes_and_horizons() {
    let x_grid = [0.5, 1.0, 2.0, 3.0];
    for n in [10, 100, 1000] {
        for horizon in [0.5, 1.0, 2.0] {
            let r = check_tail_bound(n, horizon, &x_grid, 10_000, 1234);
            assert!(r.holds(), "n={n} T={horizon}: {:?} vs {:?}", r.empirical_tail, r.bound);
            for (i, &x) in x_grid.iter().enumerate() {
                assert_eq!(r.bound[i], tail_bound(x, horizon));
            }
            assert!(r.empirical_tail.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}

#[test]
fn exp_square_shrinks_with_horizon() {
    let r = check_exp_square(100, 0.05, &[2.0, 1.0, 0.5], 10_000, 77);
    assert!(r.is_monotone(), "{r:?}");
    assert!(r.means.iter().all(|&m| m >= 1.0 && m.is_finite()));
}

#[test]
fn moc_frequency_vanishes_for_small_windows() {
    let r = check_moc_concentration(100, &[0.1, 0.01, 0.001], 0.5, 1.0, 1000, 8);
    assert!(r.is_non_increasing(), "{r:?}");
    assert_eq!(r.smallest_eps_frequency(), 0.0, "{r:?}");
    assert!(r.mean_modulus.windows(2).all(|w| w[0] >= w[1]), "{r:?}");
}

#[test]
fn seeded_sampling_is_reproducible() {
    assert_eq!(sample_sups(10, 1.0, 50, 4), sample_sups(10, 1.0, 50, 4));
    assert_ne!(sample_sups(10, 1.0, 50, 4), sample_sups(10, 1.0, 50, 5));
    assert_eq!(simulate_compensated(10, 1.0, 4), simulate_compensated(10, 1.0, 4));
}
