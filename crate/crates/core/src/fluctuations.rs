//! Monte Carlo checks of the concentration bounds for compensated Poisson
//! processes `w(t) = y(nt) − nt`, `y` a unit-rate counting process.
//!
//! Sup norms and moduli of continuity are computed exactly from the event times:
//! a compensated counting path is linear between jumps, so every extremum sits at
//! a jump (one side or the other), at an end point, or at distance `ε` from one.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::par;
use crate::rng::{stream, Domain};

/// One realization of `w` on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompensatedPath {
    /// Rate multiplier `n`.
    pub n: f64,
    pub horizon: f64,
    /// Jump times of `t ↦ y(nt)` in `(0, horizon]`, increasing.
    pub events: Vec<f64>,
    /// Report values of `n^{-1/2} w` instead of `w`.
    pub normalized: bool,
}

impl CompensatedPath {
    pub fn from_events(n: f64, horizon: f64, events: Vec<f64>) -> Self {
        debug_assert!(events.windows(2).all(|w| w[0] <= w[1]));
        CompensatedPath {
            n,
            horizon,
            events,
            normalized: false,
        }
    }

    pub fn sample(n: f64, horizon: f64, rng: &mut impl Rng) -> Self {
        let end = n * horizon;
        let mut events = Vec::with_capacity((end * 1.2) as usize + 8);
        let mut s = 0.0;
        loop {
            let gap: f64 = Exp1.sample(rng);
            s += gap;
            if s > end {
                break;
            }
            events.push(s / n);
        }
        CompensatedPath::from_events(n, horizon, events)
    }

    pub fn normalize(mut self) -> Self {
        self.normalized = true;
        self
    }

    fn scale(&self) -> f64 {
        if self.normalized {
            self.n.sqrt().recip()
        } else {
            1.0
        }
    }

    /// `w(t)` (right-continuous).
    pub fn value(&self, t: f64) -> f64 {
        let count = self.events.partition_point(|&e| e <= t);
        (count as f64 - self.n * t) * self.scale()
    }

    /// `sup_{t ≤ horizon} |w(t)|`.
    pub fn sup_abs(&self) -> f64 {
        let mut best = (self.events.len() as f64 - self.n * self.horizon).abs();
        for (k, &t) in self.events.iter().enumerate() {
            let before = k as f64 - self.n * t;
            best = best.max(before.abs()).max((before + 1.0).abs());
        }
        best * self.scale()
    }

    /// Breakpoints with the path's left and right values there.
    fn breakpoints(&self) -> Vec<(f64, f64, f64)> {
        let mut pts = Vec::with_capacity(self.events.len() + 2);
        pts.push((0.0, 0.0, 0.0));
        for (k, &t) in self.events.iter().enumerate() {
            let before = k as f64 - self.n * t;
            pts.push((t, before, before + 1.0));
        }
        let end = self.events.len() as f64 - self.n * self.horizon;
        pts.push((self.horizon, end, end));
        pts
    }

    /// Left and right values of `w` at an arbitrary time.
    fn sides_at(&self, x: f64) -> (f64, f64) {
        let left = self.events.partition_point(|&e| e < x) as f64;
        let right = self.events.partition_point(|&e| e <= x) as f64;
        (left - self.n * x, right - self.n * x)
    }

    /// `φ_ε(w) = sup_{|s − t| ≤ ε} |w(s) − w(t)|` over `[0, horizon]`, exact.
    /// At `ε = 0` this is the largest jump.
    pub fn modulus_of_continuity(&self, eps: f64) -> f64 {
        assert!(eps >= 0.0, "eps must be >= 0");
        let pts = self.breakpoints();
        let lo = |i: usize| pts[i].1.min(pts[i].2);
        let hi = |i: usize| pts[i].1.max(pts[i].2);
        let mut best: f64 = 0.0;

        // Pairs of breakpoints within eps: sliding window max/min, anchored at the earlier point.
        let mut max_q: VecDeque<usize> = VecDeque::new();
        let mut min_q: VecDeque<usize> = VecDeque::new();
        let mut end = 0;
        for start in 0..pts.len() {
            while end < pts.len() && pts[end].0 - pts[start].0 <= eps {
                while max_q.back().is_some_and(|&b| hi(b) <= hi(end)) {
                    max_q.pop_back();
                }
                max_q.push_back(end);
                while min_q.back().is_some_and(|&b| lo(b) >= lo(end)) {
                    min_q.pop_back();
                }
                min_q.push_back(end);
                end += 1;
            }
            while max_q.front().is_some_and(|&f| f < start) {
                max_q.pop_front();
            }
            while min_q.front().is_some_and(|&f| f < start) {
                min_q.pop_front();
            }
            let wmax = hi(*max_q.front().expect("window holds start"));
            let wmin = lo(*min_q.front().expect("window holds start"));
            best = best.max(wmax - lo(start)).max(hi(start) - wmin);
        }

        // Pairs with one end exactly eps away from a breakpoint.
        if eps > 0.0 {
            for &(t, l, r) in &pts {
                for x in [t + eps, t - eps] {
                    if (0.0..=self.horizon).contains(&x) {
                        let (xl, xr) = self.sides_at(x);
                        for a in [l, r] {
                            for b in [xl, xr] {
                                best = best.max((a - b).abs());
                            }
                        }
                    }
                }
            }
        }
        best * self.scale()
    }
}

/// A single path drawn from the seeded stream.
pub fn simulate_compensated(n: usize, horizon: f64, seed: u64) -> CompensatedPath {
    let mut rng = stream(seed, Domain::CompensatedTrial, 0);
    CompensatedPath::sample(n as f64, horizon, &mut rng)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailCheckResult {
    pub x_grid: Vec<f64>,
    /// Fraction of trials with `sup|w| ≥ x√n`.
    pub empirical_tail: Vec<f64>,
    /// `2·exp(−x²/(4T))`.
    pub bound: Vec<f64>,
    pub trials: usize,
}

impl TailCheckResult {
    /// Monte Carlo allowance `3·√(bound/trials)` at grid point `i`.
    pub fn slack(&self, i: usize) -> f64 {
        3.0 * (self.bound[i] / self.trials as f64).sqrt()
    }

    /// Grid indices where the empirical tail exceeds bound plus slack.
    pub fn violations(&self) -> Vec<usize> {
        (0..self.x_grid.len())
            .filter(|&i| self.empirical_tail[i] > self.bound[i] + self.slack(i))
            .collect()
    }

    pub fn holds(&self) -> bool {
        self.violations().is_empty()
    }
}

pub fn tail_bound(x: f64, horizon: f64) -> f64 {
    2.0 * (-x * x / (4.0 * horizon)).exp()
}

/// Sup statistics of independent paths; trial `i` uses stream `i` of `seed`.
pub fn sample_sups(n: usize, horizon: f64, trials: usize, seed: u64) -> Vec<f64> {
    par::map_range(trials, |i| {
        let mut rng = stream(seed, Domain::CompensatedTrial, i as u64);
        CompensatedPath::sample(n as f64, horizon, &mut rng).sup_abs()
    })
}

pub fn check_tail_bound(n: usize, horizon: f64, x_grid: &[f64], trials: usize, seed: u64) -> TailCheckResult {
    let sups = sample_sups(n, horizon, trials, seed);
    let root_n = (n as f64).sqrt();
    let empirical_tail = x_grid
        .iter()
        .map(|&x| sups.iter().filter(|&&s| s >= x * root_n).count() as f64 / trials as f64)
        .collect();
    TailCheckResult {
        x_grid: x_grid.to_vec(),
        empirical_tail,
        bound: x_grid.iter().map(|&x| tail_bound(x, horizon)).collect(),
        trials,
    }
}

/// Estimates of `E[exp(b·n^{-1}·sup_{t≤T}|w(t)|²)]` for several horizons.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpSquareReport {
    pub horizons: Vec<f64>,
    pub means: Vec<f64>,
    pub std_errs: Vec<f64>,
}

impl ExpSquareReport {
    /// With horizons listed in decreasing order, each estimate is no larger than the
    /// previous one up to two combined standard errors.
    pub fn is_monotone(&self) -> bool {
        (1..self.means.len()).all(|k| {
            let se = self.std_errs[k].hypot(self.std_errs[k - 1]);
            self.means[k] <= self.means[k - 1] + 2.0 * se
        })
    }
}

pub fn check_exp_square(n: usize, b: f64, horizons: &[f64], trials: usize, seed: u64) -> ExpSquareReport {
    let mut means = Vec::new();
    let mut std_errs = Vec::new();
    for (h_idx, &horizon) in horizons.iter().enumerate() {
        let sups = sample_sups(n, horizon, trials, seed.wrapping_add(h_idx as u64));
        let vals: Vec<f64> = sups.iter().map(|s| (b * s * s / n as f64).exp()).collect();
        let m = vals.iter().sum::<f64>() / trials as f64;
        let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (trials as f64 - 1.0).max(1.0);
        means.push(m);
        std_errs.push((var / trials as f64).sqrt());
    }
    ExpSquareReport {
        horizons: horizons.to_vec(),
        means,
        std_errs,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MocReport {
    pub eps_grid: Vec<f64>,
    /// Fraction of trials with `n^{-1} Σ_j φ_ε(w^j) ≥ δ`.
    pub frequencies: Vec<f64>,
    /// Mean of `n^{-1} Σ_j φ_ε(w^j)` over trials.
    pub mean_modulus: Vec<f64>,
    pub delta: f64,
    pub trials: usize,
}

impl MocReport {
    /// Frequencies do not increase as `ε` decreases (grid sorted by decreasing `ε`).
    pub fn is_non_increasing(&self) -> bool {
        let mut order: Vec<usize> = (0..self.eps_grid.len()).collect();
        order.sort_by(|&a, &b| self.eps_grid[b].total_cmp(&self.eps_grid[a]));
        order.windows(2).all(|w| self.frequencies[w[1]] <= self.frequencies[w[0]])
    }

    /// Observed frequency at the smallest `ε`.
    pub fn smallest_eps_frequency(&self) -> f64 {
        let idx = (0..self.eps_grid.len())
            .min_by(|&a, &b| self.eps_grid[a].total_cmp(&self.eps_grid[b]))
            .expect("non-empty eps grid");
        self.frequencies[idx]
    }
}

/// For each trial, draws `n_procs` independent normalized paths
/// `n^{-1/2} y(nt) − √n t` (with `n = n_procs`) on `[0, horizon]` and records whether
/// their average modulus of continuity reaches `delta`. All `ε` share the same draws.
pub fn check_moc_concentration(
    n_procs: usize,
    eps_grid: &[f64],
    delta: f64,
    horizon: f64,
    trials: usize,
    seed: u64,
) -> MocReport {
    let n = n_procs as f64;
    let per_trial: Vec<Vec<f64>> = par::map_range(trials, |i| {
        let mut rng = stream(seed, Domain::ModulusTrial, i as u64);
        let paths: Vec<CompensatedPath> = (0..n_procs)
            .map(|_| CompensatedPath::sample(n, horizon, &mut rng).normalize())
            .collect();
        eps_grid
            .iter()
            .map(|&eps| paths.iter().map(|w| w.modulus_of_continuity(eps)).sum::<f64>() / n)
            .collect()
    });
    let frequencies = (0..eps_grid.len())
        .map(|k| per_trial.iter().filter(|m| m[k] >= delta).count() as f64 / trials as f64)
        .collect();
    let mean_modulus = (0..eps_grid.len())
        .map(|k| per_trial.iter().map(|m| m[k]).sum::<f64>() / trials as f64)
        .collect();
    MocReport {
        eps_grid: eps_grid.to_vec(),
        frequencies,
        mean_modulus,
        delta,
        trials,
    }
}
