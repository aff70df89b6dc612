//! Gaussian expectations of the firing-rate functions, and the balance functions,
//! noise intensities and Jacobians built on them.
//!
//! Two rules are available for `∫ g(x) e^{-x²} dx`. Gauss–Hermite is exact for
//! polynomials but converges slowly for `tanh` integrands once the Gaussian is wide,
//! because `tanh` has poles at distance `π/(2c)` from the real axis. The default
//! rule is the trapezoid rule on the Gaussian weight, whose error decays like
//! `exp(-2π d / h)` with `d` the pole distance in the rescaled variable; with
//! `h = 0.05` it reaches machine precision for `c²K` up to about 20.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::{ChannelId, FiringRate, MacroState, NetworkParams, Population};

pub const DEFAULT_ORDER: usize = 64;
pub const STANDARD_STEP: f64 = 0.05;
/// `e^{-49} ≈ 5e-22`, far below double rounding of an O(1) integrand.
pub const STANDARD_HALF_WIDTH: f64 = 7.0;

/// Rule for `∫ g(x) e^{-x²} dx ≈ Σ w_m g(x_m)` (physicists' weight).
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
}

impl QuadratureRule {
    /// Builds an `order`-point rule by Golub–Welsch, then polishes each node with
    /// Newton steps on the orthonormal Hermite recurrence.
    pub fn gauss_hermite(order: usize) -> Self {
        assert!(order >= 2, "quadrature order must be >= 2");
        let off: Vec<f64> = (1..order).map(|k| (k as f64 / 2.0).sqrt()).collect();
        let (mut nodes, _) = symmetric_tridiagonal_eigen(&vec![0.0; order], &off);
        nodes.sort_by(|a, b| a.total_cmp(b));

        let mut weights = vec![0.0; order];
        for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
            for _ in 0..3 {
                let (p_n, p_nm1, _) = orthonormal_hermite(order, *x);
                let dp = (2.0 * order as f64).sqrt() * p_nm1;
                if dp != 0.0 {
                    *x -= p_n / dp;
                }
            }
            let (_, _, christoffel) = orthonormal_hermite(order, *x);
            *w = 1.0 / christoffel;
        }
        // Exact symmetry about the origin.
        for i in 0..order / 2 {
            let j = order - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            nodes[i] = -x;
            nodes[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        Self::from_parts(nodes, weights)
    }

    /// Equispaced nodes `m·step`, `|m·step| ≤ half_width`, weights `step·e^{-x²}`.
    pub fn trapezoid(step: f64, half_width: f64) -> Self {
        assert!(step > 0.0 && half_width > 0.0, "step and half width must be positive");
        let m = (half_width / step + 1e-9).floor() as i64;
        let nodes: Vec<f64> = (-m..=m).map(|k| k as f64 * step).collect();
        let weights = nodes.iter().map(|x| step * (-x * x).exp()).collect();
        Self::from_parts(nodes, weights)
    }

    fn from_parts(nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        let total = weights.iter().sum();
        QuadratureRule { nodes, weights, total }
    }

    /// Shared trapezoid rule with [`STANDARD_STEP`] and [`STANDARD_HALF_WIDTH`].
    pub fn standard() -> &'static QuadratureRule {
        static RULE: OnceLock<QuadratureRule> = OnceLock::new();
        RULE.get_or_init(|| QuadratureRule::trapezoid(STANDARD_STEP, STANDARD_HALF_WIDTH))
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[g(v + √K Z)]`, `Z ~ N(0,1)`. A zero variance is a point mass at `v`.
    pub fn expect(&self, g: impl Fn(f64) -> f64, v: f64, k: f64) -> f64 {
        if k == 0.0 {
            return g(v);
        }
        let s = (2.0 * k).sqrt();
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * g(v + s * x))
            .sum();
        // Normalizing by the weight total makes constants exact for either rule.
        sum / self.total
    }
}

/// Values of `p̃_n(x)`, `p̃_{n-1}(x)` and `Σ_{k<n} p̃_k(x)²` for the Hermite
/// polynomials orthonormal under `e^{-x²}`.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    let mut sum_sq = 0.0;
    for k in 0..n {
        sum_sq += cur * cur;
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev, sum_sq)
}

/// Eigenvalues and first eigenvector components of a symmetric tridiagonal
/// matrix (implicit QL with Wilkinson shifts).
fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 60, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    (d, z)
}

/// Centered Gaussian density with variance `k`.
pub fn rho(k: f64, x: f64) -> Result<f64> {
    if k.is_nan() || k <= 0.0 {
        return Err(Error::NonPositiveVariance(k));
    }
    Ok((-x * x / (2.0 * k)).exp() / (2.0 * PI * k).sqrt())
}

/// `E[f(v + √K Z)]`.
pub fn gauss_expect(f: &FiringRate, v: f64, k: f64, rule: &QuadratureRule) -> f64 {
    rule.expect(|x| f.eval(x), v, k)
}

/// Balance functions `(F_e, F_i)`.
pub fn balance_f(m: &MacroState, p: &NetworkParams, rule: &QuadratureRule) -> (f64, f64) {
    let row = |target| {
        ChannelId::ALL
            .iter()
            .filter(|ch| ch.target == target)
            .map(|&ch| {
                let src = ch.source;
                ch.sign() * p.coupling(ch) * gauss_expect(p.rate(ch), m.mean(src), m.variance(src), rule)
            })
            .sum::<f64>()
    };
    (row(Population::Excitatory), row(Population::Inhibitory))
}

/// Noise intensities `(Σ_e, Σ_i)` driving the variance equations.
pub fn noise_sigma(m: &MacroState, p: &NetworkParams, rule: &QuadratureRule) -> (f64, f64) {
    let row = |target| {
        ChannelId::ALL
            .iter()
            .filter(|ch| ch.target == target)
            .map(|&ch| {
                let c = p.coupling(ch);
                let src = ch.source;
                c * c * gauss_expect(p.rate(ch), m.mean(src), m.variance(src), rule)
            })
            .sum::<f64>()
    };
    (row(Population::Excitatory), row(Population::Inhibitory))
}

/// A real 2×2 matrix; rows are `(F_e, F_i)`, columns the differentiation variable
/// for the excitatory and inhibitory population.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jacobian2x2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Jacobian2x2 {
    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Jacobian2x2 { a11, a12, a21, a22 }
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    fn entry_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        match (row, col) {
            (0, 0) => &mut self.a11,
            (0, 1) => &mut self.a12,
            (1, 0) => &mut self.a21,
            _ => &mut self.a22,
        }
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * x[0] + self.a12 * x[1],
            self.a21 * x[0] + self.a22 * x[1],
        ]
    }

    /// `A^{-1} b` by the explicit inverse; `None` when `|det| < det_floor`.
    pub fn solve(&self, b: [f64; 2], det_floor: f64) -> Option<[f64; 2]> {
        let det = self.det();
        if det.is_nan() || det.abs() < det_floor {
            return None;
        }
        Some([
            (self.a22 * b[0] - self.a12 * b[1]) / det,
            (self.a11 * b[1] - self.a21 * b[0]) / det,
        ])
    }

    /// Both eigenvalues from the characteristic polynomial `λ² − tr·λ + det`.
    pub fn eigenvalues(&self) -> [Complex; 2] {
        let half_tr = 0.5 * self.trace();
        let det = self.det();
        // (a11 - a22)²/4 + a12·a21 avoids cancellation in half_tr² - det
        let half_diff = 0.5 * (self.a11 - self.a22);
        let disc = half_diff * half_diff + self.a12 * self.a21;
        if disc >= 0.0 {
            let root = disc.sqrt();
            let big = half_tr + root.copysign(half_tr);
            let small = if big != 0.0 { det / big } else { half_tr - root.copysign(half_tr) };
            let (hi, lo) = if big >= small { (big, small) } else { (small, big) };
            [Complex { re: hi, im: 0.0 }, Complex { re: lo, im: 0.0 }]
        } else {
            let im = (-disc).sqrt();
            [Complex { re: half_tr, im }, Complex { re: half_tr, im: -im }]
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.a11, self.a12, self.a21, self.a22].iter().all(|x| x.is_finite())
    }
}

/// `∂F/∂v`. Uses `f'` when the rate family provides it, otherwise central
/// differences with step `1e-6·max(1, |v|)`.
pub fn jacobian_v(m: &MacroState, p: &NetworkParams, rule: &QuadratureRule) -> Jacobian2x2 {
    let mut jac = Jacobian2x2::default();
    for ch in ChannelId::ALL {
        let f = p.rate(ch);
        let (v, k) = (m.mean(ch.source), m.variance(ch.source));
        let c = p.coupling(ch);
        let d = if c == 0.0 {
            0.0
        } else if f.has_derivative() {
            rule.expect(|x| f.derivative(x).unwrap_or(0.0), v, k)
        } else {
            let h = 1e-6 * v.abs().max(1.0);
            (gauss_expect(f, v + h, k, rule) - gauss_expect(f, v - h, k, rule)) / (2.0 * h)
        };
        *jac.entry_mut(ch.target.index(), ch.source.index()) = ch.sign() * c * d;
    }
    jac
}

/// `∂F/∂K` through `∂_K E[f(v + √K Z)] = ½ E[f''(v + √K Z)]`, or central
/// differences in `K` with step `1e-6·max(1, K)` when `f''` is unavailable.
pub fn jacobian_k(m: &MacroState, p: &NetworkParams, rule: &QuadratureRule) -> Result<Jacobian2x2> {
    for k in [m.k_e, m.k_i] {
        if k.is_nan() || k <= 0.0 {
            return Err(Error::NonPositiveVariance(k));
        }
    }
    let mut jac = Jacobian2x2::default();
    for ch in ChannelId::ALL {
        let f = p.rate(ch);
        let (v, k) = (m.mean(ch.source), m.variance(ch.source));
        let c = p.coupling(ch);
        let d = if c == 0.0 {
            0.0
        } else if f.has_second_derivative() {
            0.5 * rule.expect(|x| f.second_derivative(x).unwrap_or(0.0), v, k)
        } else {
            let h = 1e-6 * k.max(1.0);
            if k > h {
                (gauss_expect(f, v, k + h, rule) - gauss_expect(f, v, k - h, rule)) / (2.0 * h)
            } else {
                (gauss_expect(f, v, k + h, rule) - gauss_expect(f, v, k, rule)) / h
            }
        };
        *jac.entry_mut(ch.target.index(), ch.source.index()) = ch.sign() * c * d;
    }
    Ok(jac)
}
