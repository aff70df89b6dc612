//! Parameter and state types shared by every other module.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Neuron class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Population {
    Excitatory,
    Inhibitory,
}

impl Population {
    pub const ALL: [Population; 2] = [Population::Excitatory, Population::Inhibitory];

    pub fn index(self) -> usize {
        match self {
            Population::Excitatory => 0,
            Population::Inhibitory => 1,
        }
    }

    pub fn label(self) -> char {
        match self {
            Population::Excitatory => 'e',
            Population::Inhibitory => 'i',
        }
    }
}

/// A synaptic channel `source -> target`, written `(target, source)` as in `C_ei`
/// (inhibitory source onto excitatory target).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ChannelId {
    pub target: Population,
    pub source: Population,
}

impl ChannelId {
    pub const EE: ChannelId = ChannelId::new(Population::Excitatory, Population::Excitatory);
    pub const EI: ChannelId = ChannelId::new(Population::Excitatory, Population::Inhibitory);
    pub const IE: ChannelId = ChannelId::new(Population::Inhibitory, Population::Excitatory);
    pub const II: ChannelId = ChannelId::new(Population::Inhibitory, Population::Inhibitory);

    /// The four channels in row-major `(target, source)` order.
    pub const ALL: [ChannelId; 4] = [Self::EE, Self::EI, Self::IE, Self::II];

    pub const fn new(target: Population, source: Population) -> Self {
        ChannelId { target, source }
    }

    pub fn index(self) -> usize {
        2 * self.target.index() + self.source.index()
    }

    pub fn name(self) -> &'static str {
        ["ee", "ei", "ie", "ii"][self.index()]
    }

    /// `+1` for excitatory sources, `-1` for inhibitory ones.
    pub fn sign(self) -> f64 {
        match self.source {
            Population::Excitatory => 1.0,
            Population::Inhibitory => -1.0,
        }
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user supplied intensity with declared bound and Lipschitz constant.
/// Derivatives are optional; consumers fall back to finite differences.
#[derive(Clone)]
pub struct CustomRate {
    pub bound: f64,
    pub lipschitz: f64,
    eval: ScalarFn,
    first: Option<ScalarFn>,
    second: Option<ScalarFn>,
}

impl CustomRate {
    pub fn new(bound: f64, lipschitz: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        CustomRate {
            bound,
            lipschitz,
            eval: Arc::new(f),
            first: None,
            second: None,
        }
    }

    /// `f ≡ value`, with both derivatives identically zero.
    pub fn constant(value: f64) -> Self {
        CustomRate::new(value, 0.0, move |_| value)
            .with_derivative(|_| 0.0)
            .with_second_derivative(|_| 0.0)
    }

    pub fn with_derivative(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.first = Some(Arc::new(d));
        self
    }

    pub fn with_second_derivative(mut self, d2: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.second = Some(Arc::new(d2));
        self
    }
}

impl fmt::Debug for CustomRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomRate")
            .field("bound", &self.bound)
            .field("lipschitz", &self.lipschitz)
            .field("has_derivative", &self.first.is_some())
            .field("has_second_derivative", &self.second.is_some())
            .finish()
    }
}

/// Spiking intensity of a source neuron as a function of its potential.
#[derive(Clone, Debug)]
pub enum FiringRate {
    /// `x ↦ scale · (tanh(gain · x) + offset)`.
    TanhAffine { scale: f64, offset: f64, gain: f64 },
    Custom(CustomRate),
}

impl FiringRate {
    pub fn tanh_affine(scale: f64, offset: f64, gain: f64) -> Self {
        FiringRate::TanhAffine { scale, offset, gain }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            FiringRate::TanhAffine { scale, offset, gain } => {
                // 1 + tanh(y) = 2 / (1 + e^{-2y}) keeps the lower tail strictly positive
                // where tanh(y) itself has already rounded to -1.
                let one_plus_tanh = 2.0 / (1.0 + (-2.0 * gain * x).exp());
                scale * ((offset - 1.0) + one_plus_tanh)
            }
            FiringRate::Custom(c) => (c.eval)(x),
        }
    }

    pub fn derivative(&self, x: f64) -> Option<f64> {
        match self {
            FiringRate::TanhAffine { scale, gain, .. } => Some(scale * gain * sech2(gain * x)),
            FiringRate::Custom(c) => c.first.as_ref().map(|d| d(x)),
        }
    }

    pub fn second_derivative(&self, x: f64) -> Option<f64> {
        match self {
            FiringRate::TanhAffine { scale, gain, .. } => {
                let y = gain * x;
                Some(-2.0 * scale * gain * gain * y.tanh() * sech2(y))
            }
            FiringRate::Custom(c) => c.second.as_ref().map(|d| d(x)),
        }
    }

    pub fn has_derivative(&self) -> bool {
        matches!(self, FiringRate::TanhAffine { .. })
            || matches!(self, FiringRate::Custom(c) if c.first.is_some())
    }

    pub fn has_second_derivative(&self) -> bool {
        matches!(self, FiringRate::TanhAffine { .. })
            || matches!(self, FiringRate::Custom(c) if c.second.is_some())
    }

    /// Upper bound `C_f` used for thinning.
    pub fn bound(&self) -> f64 {
        match self {
            FiringRate::TanhAffine { scale, offset, .. } => scale * (1.0 + offset),
            FiringRate::Custom(c) => c.bound,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            FiringRate::TanhAffine { scale, gain, .. } => scale * gain,
            FiringRate::Custom(c) => c.lipschitz,
        }
    }

    fn validate(&self, channel: ChannelId) -> Result<()> {
        match self {
            FiringRate::TanhAffine { scale, offset, gain } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::InvalidParameter(format!("f_{channel}.a must be > 0")));
                }
                // offset == 1 gives inf f = 0, but f(x) > 0 still holds pointwise
                if !(offset.is_finite() && *offset >= 1.0) {
                    return Err(Error::InvalidParameter(format!("f_{channel}.b must be >= 1")));
                }
                if !(gain.is_finite() && *gain >= 0.0) {
                    return Err(Error::InvalidParameter(format!("f_{channel}.c must be >= 0")));
                }
            }
            FiringRate::Custom(c) => {
                if !(c.bound.is_finite() && c.bound >= 0.0) {
                    return Err(Error::InvalidParameter(format!("f_{channel} bound must be finite")));
                }
            }
        }
        Ok(())
    }
}

fn sech2(y: f64) -> f64 {
    let e = (-2.0 * y.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// Network configuration: couplings `C_{αβ}`, time constants, per-population size
/// and one firing-rate function per channel.
#[derive(Clone, Debug)]
pub struct NetworkParams {
    /// Indexed by [`ChannelId::index`].
    pub coupling: [f64; 4],
    pub tau_e: f64,
    pub tau_i: f64,
    /// Neurons per population.
    pub n: usize,
    /// Indexed by [`ChannelId::index`].
    pub rates: [FiringRate; 4],
}

impl NetworkParams {
    pub fn new(
        coupling: [f64; 4],
        tau_e: f64,
        tau_i: f64,
        n: usize,
        rates: [FiringRate; 4],
    ) -> Result<Self> {
        let p = NetworkParams {
            coupling,
            tau_e,
            tau_i,
            n,
            rates,
        };
        p.validate()?;
        Ok(p)
    }

    /// Reference network shipped in `presets/`, `n = 5000` per population.
    pub fn reference_preset() -> Self {
        crate::config::Config::parse(crate::config::REFERENCE_PRESET)
            .expect("bundled preset parses")
            .params
    }

    pub fn validate(&self) -> Result<()> {
        for ch in ChannelId::ALL {
            let c = self.coupling(ch);
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidParameter(format!("C_{ch} must be finite and >= 0")));
            }
            self.rate(ch).validate(ch)?;
        }
        // tau = +inf is allowed: it switches the leak off.
        for (name, tau) in [("tau_e", self.tau_e), ("tau_i", self.tau_i)] {
            if tau.is_nan() || tau <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be > 0")));
            }
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        Ok(())
    }

    pub fn coupling(&self, ch: ChannelId) -> f64 {
        self.coupling[ch.index()]
    }

    pub fn rate(&self, ch: ChannelId) -> &FiringRate {
        &self.rates[ch.index()]
    }

    pub fn tau(&self, pop: Population) -> f64 {
        match pop {
            Population::Excitatory => self.tau_e,
            Population::Inhibitory => self.tau_i,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_coupling(mut self, coupling: [f64; 4]) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_rates(mut self, rates: [FiringRate; 4]) -> Self {
        self.rates = rates;
        self
    }
}

/// Population means and variances `(v_e, v_i, K_e, K_i)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MacroState {
    pub v_e: f64,
    pub v_i: f64,
    pub k_e: f64,
    pub k_i: f64,
}

impl MacroState {
    pub fn new(v_e: f64, v_i: f64, k_e: f64, k_i: f64) -> Self {
        MacroState { v_e, v_i, k_e, k_i }
    }

    pub fn mean(&self, pop: Population) -> f64 {
        match pop {
            Population::Excitatory => self.v_e,
            Population::Inhibitory => self.v_i,
        }
    }

    pub fn variance(&self, pop: Population) -> f64 {
        match pop {
            Population::Excitatory => self.k_e,
            Population::Inhibitory => self.k_i,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.v_e, self.v_i, self.k_e, self.k_i]
    }
}

/// Per-neuron synaptic potentials with lazy exponential decay.
///
/// `u[pop][j]` holds the potential at time `stamp[pop][j]`; the value at any later
/// time `t` is `u · exp(-(t - stamp) / tau)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MicroState {
    pub t: f64,
    pub u: [Vec<f64>; 2],
    pub stamp: [Vec<f64>; 2],
}

impl MicroState {
    pub fn new(u_e: Vec<f64>, u_i: Vec<f64>) -> Self {
        assert_eq!(u_e.len(), u_i.len(), "populations must have equal size");
        let n = u_e.len();
        MicroState {
            t: 0.0,
            u: [u_e, u_i],
            stamp: [vec![0.0; n], vec![0.0; n]],
        }
    }

    pub fn n(&self) -> usize {
        self.u[0].len()
    }

    pub fn u_e(&self) -> &[f64] {
        &self.u[0]
    }

    pub fn u_i(&self) -> &[f64] {
        &self.u[1]
    }

    /// Brings neuron `j` of `pop` forward to time `t` and returns its potential.
    #[inline]
    pub fn decay_neuron(&mut self, pop: Population, j: usize, t: f64, tau: f64) -> f64 {
        let p = pop.index();
        let dt = t - self.stamp[p][j];
        if dt > 0.0 {
            self.u[p][j] *= (-dt / tau).exp();
            self.stamp[p][j] = t;
        }
        self.u[p][j]
    }

    /// Decays every neuron to `t`, after which all stamps equal `t`.
    pub fn sync(&mut self, t: f64, tau_e: f64, tau_i: f64) {
        for (p, tau) in [(0, tau_e), (1, tau_i)] {
            for (u, s) in self.u[p].iter_mut().zip(self.stamp[p].iter_mut()) {
                let dt = t - *s;
                if dt > 0.0 {
                    *u *= (-dt / tau).exp();
                }
                *s = t;
            }
        }
        self.t = t;
    }

    pub fn is_synced(&self) -> bool {
        self.stamp.iter().flatten().all(|&s| s == self.t)
    }
}

/// Mean and population variance (divisor `n`).
pub fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Empirical means and variances of a synced micro state.
pub fn macro_of_micro(s: &MicroState) -> MacroState {
    debug_assert!(s.is_synced(), "macro_of_micro needs a synced state");
    let (v_e, k_e) = moments(&s.u[0]);
    let (v_i, k_i) = moments(&s.u[1]);
    MacroState { v_e, v_i, k_e, k_i }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn constant_vectors_have_zero_variance() {
        let s = MicroState::new(vec![1.0; 7], vec![0.0; 7]);
        assert_eq!(macro_of_micro(&s), MacroState::new(1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn two_point_symmetric() {
        let s = MicroState::new(vec![-1.0, 1.0], vec![0.0, 0.0]);
        let m = macro_of_micro(&s);
        assert_eq!((m.v_e, m.k_e), (0.0, 1.0));
    }

    #[test]
    fn gaussian_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dist = Normal::new(2.0, 0.5).unwrap();
        let u_e: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng)).collect();
        let m = macro_of_micro(&MicroState::new(u_e, vec![0.0; 10_000]));
        // 4 standard errors: sd(mean) = 0.005, sd(var) ≈ 0.25·√(2/N) = 0.0035
        assert!((m.v_e - 2.0).abs() <= 0.02, "{m:?}");
        assert!((m.k_e - 0.25).abs() <= 0.01, "{m:?}");
    }

    #[test]
    fn tanh_affine_values() {
        let ee = FiringRate::tanh_affine(0.5, 2.0, 1.0);
        assert_eq!(ee.eval(0.0), 1.0);
        assert_eq!(FiringRate::tanh_affine(1.0, 1.0, 0.5).eval(0.0), 1.0);
        assert_eq!(ee.eval(1e3), 1.5);
        assert_eq!(ee.bound(), 1.5);
        assert_eq!(ee.lipschitz(), 0.5);
    }

    #[test]
    fn tanh_affine_derivatives_match_differences() {
        let f = FiringRate::tanh_affine(0.7, 1.3, 0.9);
        for &x in &[-3.0, -0.4, 0.0, 0.25, 2.0] {
            let h = 1e-5;
            let d = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
            let d2 = (f.eval(x + h) - 2.0 * f.eval(x) + f.eval(x - h)) / (h * h);
            assert!((f.derivative(x).unwrap() - d).abs() < 1e-9);
            assert!((f.second_derivative(x).unwrap() - d2).abs() < 1e-5);
        }
    }

    #[test]
    fn preset_rates_are_positive_and_bounded() {
        let p = NetworkParams::reference_preset();
        for ch in ChannelId::ALL {
            let f = p.rate(ch);
            for k in 0..=20_000 {
                let x = -100.0 + k as f64 * 0.01;
                let y = f.eval(x);
                assert!(y > 0.0 && y <= f.bound(), "{ch} at {x}: {y}");
            }
        }
    }

    #[test]
    fn params_validation() {
        let p = NetworkParams::reference_preset();
        assert!(p.clone().with_n(0).validate().is_err());
        assert!(p.clone().with_coupling([1.0, -1.0, 0.0, 0.0]).validate().is_err());
        let mut q = p.clone();
        q.tau_i = 0.0;
        assert!(q.validate().is_err());
        q.tau_i = f64::INFINITY;
        assert!(q.validate().is_ok());
    }

    #[test]
    fn lazy_decay_and_sync() {
        let mut s = MicroState::new(vec![1.0, 2.0], vec![4.0, 8.0]);
        let u = s.decay_neuron(Population::Excitatory, 1, 0.5, 1.0);
        assert!((u - 2.0 * (-0.5f64).exp()).abs() < 1e-15);
        assert!(!s.is_synced());
        s.sync(1.0, 1.0, 2.0);
        assert!(s.is_synced());
        assert!((s.u_e()[1] - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((s.u_i()[0] - 4.0 * (-0.5f64).exp()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn moments_translation_equivariant(xs in prop::collection::vec(-10.0..10.0f64, 1..50), c in -5.0..5.0f64) {
            let (m, v) = moments(&xs);
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let (ms, vs) = moments(&shifted);
            prop_assert!((ms - (m + c)).abs() < 1e-10);
            prop_assert!((vs - v).abs() < 1e-9 * (1.0 + v));
        }

        #[test]
        fn moments_scale_equivariant(xs in prop::collection::vec(-10.0..10.0f64, 1..50), s in -3.0..3.0f64) {
            let (m, v) = moments(&xs);
            let scaled: Vec<f64> = xs.iter().map(|x| x * s).collect();
            let (ms, vs) = moments(&scaled);
            prop_assert!((ms - s * m).abs() < 1e-10);
            prop_assert!((vs - s * s * v).abs() < 1e-9 * (1.0 + v * s * s));
        }
    }
}
