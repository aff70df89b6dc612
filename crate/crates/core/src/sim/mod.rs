//! Finite-n network simulation.
//!
//! Two simulators share the lazy analytic leak `u(t) = u(t₀)·e^{-(t-t₀)/τ}`:
//! [`simulate_exact`] realizes the Poisson synapses by thinning and is exact in law;
//! [`simulate_fixed`] aggregates each target's input into two Poisson counts per
//! step and costs `O(n)` per step.

mod exact;
mod fixed;

pub use exact::{simulate_exact, simulate_exact_observed};
pub use fixed::simulate_fixed;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::limit::LimitTrajectory;
use crate::model::{macro_of_micro, ChannelId, MacroState, MicroState, NetworkParams};
use crate::rng::{stream, Domain};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Exact,
    FixedStep { dt: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub method: Method,
    pub horizon: f64,
    pub seed: u64,
    pub record_stride: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if !(self.record_stride > 0.0 && self.record_stride.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "record stride must be > 0, got {}",
                self.record_stride
            )));
        }
        if let Method::FixedStep { dt } = self.method {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
            }
        }
        Ok(())
    }

    /// Record times `k·stride ≤ T`.
    pub(crate) fn record_times(&self) -> Vec<f64> {
        let count = (self.horizon / self.record_stride * (1.0 + 1e-12)).floor() as usize;
        (0..=count).map(|k| k as f64 * self.record_stride).collect()
    }
}

/// A candidate synaptic event on `channel` delivered to `target`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikeEvent {
    pub t: f64,
    pub channel: ChannelId,
    pub target: usize,
    pub accepted: bool,
}

/// Empirical means and variances sampled on a time grid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MacroState>,
}

/// Result of one simulation run.
#[derive(Clone, Debug)]
pub struct SimOutput {
    pub trajectory: Trajectory,
    /// Synced to the horizon.
    pub final_state: MicroState,
}

/// Anything that carries macro states on a time grid.
pub trait MacroPath {
    fn times(&self) -> &[f64];
    fn states(&self) -> &[MacroState];
}

impl MacroPath for Trajectory {
    fn times(&self) -> &[f64] {
        &self.times
    }
    fn states(&self) -> &[MacroState] {
        &self.states
    }
}

impl MacroPath for LimitTrajectory {
    fn times(&self) -> &[f64] {
        &self.times
    }
    fn states(&self) -> &[MacroState] {
        &self.states
    }
}

impl From<&LimitTrajectory> for Trajectory {
    fn from(l: &LimitTrajectory) -> Self {
        Trajectory {
            times: l.times.clone(),
            states: l.states.clone(),
        }
    }
}

/// Column view `(t, v̂_e, v̂_i, K̂_e, K̂_i)` of a simulated trajectory, laid out for
/// comparison against a limit trajectory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MacroColumns {
    pub t: Vec<f64>,
    pub v_e: Vec<f64>,
    pub v_i: Vec<f64>,
    pub k_e: Vec<f64>,
    pub k_i: Vec<f64>,
}

pub fn empirical_trajectory(traj: &impl MacroPath) -> MacroColumns {
    let s = traj.states();
    MacroColumns {
        t: traj.times().to_vec(),
        v_e: s.iter().map(|m| m.v_e).collect(),
        v_i: s.iter().map(|m| m.v_i).collect(),
        k_e: s.iter().map(|m| m.k_e).collect(),
        k_i: s.iter().map(|m| m.k_i).collect(),
    }
}

/// `u_α[j] = m_α + √k_α · z`, `z` i.i.d. standard normal from a per-population stream.
pub fn init_micro(m_e: f64, m_i: f64, k_e: f64, k_i: f64, p: &NetworkParams, seed: u64) -> Result<MicroState> {
    if k_e.is_nan() || k_i.is_nan() || k_e < 0.0 || k_i < 0.0 {
        return Err(Error::InvalidParameter(format!("initial variances must be >= 0, got ({k_e}, {k_i})")));
    }
    let draw = |pop: u64, mean: f64, var: f64| -> Vec<f64> {
        let mut rng = stream(seed, Domain::InitialCondition, pop);
        let sd = var.sqrt();
        (0..p.n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mean + sd * z
            })
            .collect()
    };
    Ok(MicroState::new(draw(0, m_e, k_e), draw(1, m_i, k_i)))
}

pub fn simulate(init: &MicroState, p: &NetworkParams, cfg: &SimConfig) -> Result<SimOutput> {
    match cfg.method {
        Method::Exact => simulate_exact(init, p, cfg),
        Method::FixedStep { .. } => simulate_fixed(init, p, cfg),
    }
}

pub(crate) fn check_inputs(init: &MicroState, p: &NetworkParams, cfg: &SimConfig) -> Result<()> {
    cfg.validate()?;
    p.validate()?;
    if init.n() != p.n {
        return Err(Error::InvalidParameter(format!(
            "micro state has {} neurons per population, params say {}",
            init.n(),
            p.n
        )));
    }
    Ok(())
}

pub(crate) fn snapshot(state: &MicroState) -> MacroState {
    macro_of_micro(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_init_is_constant() {
        let p = NetworkParams::reference_preset().with_n(50);
        let s = init_micro(0.3, -1.0, 0.0, 0.0, &p, 1).unwrap();
        assert!(s.u_e().iter().all(|&u| u == 0.3));
        assert!(s.u_i().iter().all(|&u| u == -1.0));
    }

    #[test]
    fn init_moments_and_determinism() {
        let p = NetworkParams::reference_preset().with_n(10_000);
        let s = init_micro(2.0, 0.0, 1.0, 1.0, &p, 42).unwrap();
        let m = macro_of_micro(&s);
        assert!((m.v_e - 2.0).abs() <= 0.04, "{m:?}");
        assert!((m.k_e - 1.0).abs() <= 0.03, "{m:?}");
        assert_eq!(s, init_micro(2.0, 0.0, 1.0, 1.0, &p, 42).unwrap());
        assert_ne!(s, init_micro(2.0, 0.0, 1.0, 1.0, &p, 43).unwrap());
        assert!(init_micro(0.0, 0.0, -1.0, 1.0, &p, 1).is_err());
    }

    #[test]
    fn record_grid() {
        let cfg = SimConfig {
            method: Method::Exact,
            horizon: 1.0,
            seed: 0,
            record_stride: 0.1,
        };
        let times = cfg.record_times();
        assert_eq!(times.len(), 11);
        assert_eq!(times[10], 1.0);
    }
}
