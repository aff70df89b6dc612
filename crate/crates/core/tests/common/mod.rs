#![allow(dead_code)]

use balanced_net::model::{ChannelId, FiringRate, MacroState, NetworkParams};

/// Composite trapezoid for `E[f(v + √K Z)]` on `[v − 10√K, v + 10√K]`.
pub fn trapezoid_expect(f: impl Fn(f64) -> f64, v: f64, k: f64, panels: usize) -> f64 {
    if k == 0.0 {
        return f(v);
    }
    let sd = k.sqrt();
    let (a, b) = (-10.0 * sd, 10.0 * sd);
    let h = (b - a) / panels as f64;
    let dens = |x: f64| (-x * x / (2.0 * k)).exp() / (2.0 * std::f64::consts::PI * k).sqrt();
    let g = |x: f64| dens(x) * f(v + x);
    let mut s = 0.5 * (g(a) + g(b));
    for m in 1..panels {
        s += g(a + m as f64 * h);
    }
    s * h
}

pub fn oracle_f(m: &MacroState, p: &NetworkParams, panels: usize) -> (f64, f64) {
    let e = |ch: ChannelId, v: f64, k: f64| {
        let r = p.rate(ch);
        p.coupling(ch) * trapezoid_expect(|x| r.eval(x), v, k, panels)
    };
    (
        e(ChannelId::EE, m.v_e, m.k_e) - e(ChannelId::EI, m.v_i, m.k_i),
        e(ChannelId::IE, m.v_e, m.k_e) - e(ChannelId::II, m.v_i, m.k_i),
    )
}

pub fn oracle_sigma(m: &MacroState, p: &NetworkParams, panels: usize) -> (f64, f64) {
    let e = |ch: ChannelId, v: f64, k: f64| {
        let r = p.rate(ch);
        p.coupling(ch).powi(2) * trapezoid_expect(|x| r.eval(x), v, k, panels)
    };
    (
        e(ChannelId::EE, m.v_e, m.k_e) + e(ChannelId::EI, m.v_i, m.k_i),
        e(ChannelId::IE, m.v_e, m.k_e) + e(ChannelId::II, m.v_i, m.k_i),
    )
}

pub fn close_rel(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(floor)
}

/// Minimal deterministic generator for oracle inputs, independent of the crate's RNG.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
    }
}

pub fn constant_rates(c: f64) -> [FiringRate; 4] {
    std::array::from_fn(|_| FiringRate::Custom(balanced_net::CustomRate::constant(c)))
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Asymptotic Kolmogorov p-value for the two-sample statistic.
pub fn ks_two_sample_p(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / x.len() as f64 - j as f64 / y.len() as f64).abs());
    }
    let ne = (x.len() * y.len()) as f64 / (x.len() + y.len()) as f64;
    let lam = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powi(k as i32 - 1) * (-2.0 * k * k * lam * lam).exp();
    }
    p.clamp(0.0, 1.0)
}

/// Upper quantile of the chi-square law (Wilson–Hilferty).
pub fn chi2_upper_quantile(df: f64, z: f64) -> f64 {
    let a = 2.0 / (9.0 * df);
    df * (1.0 - a + z * a.sqrt()).powi(3)
}
