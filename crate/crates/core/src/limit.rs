//! The hydrodynamic limit: variance ODEs driven by the noise intensities, with the
//! means held on the balance constraints `F_e = F_i = 0`.
//!
//! Each RK4 stage evaluates `dK/dt` at means re-solved by Newton projection, so
//! the scheme is a fourth-order method for the reduced ODE in `K` alone. The
//! mean ODE `dv/dt = -J_v^{-1} J_K dK/dt` only supplies warm starts.

use crate::error::{Error, Result};
use crate::manifold::{classify_with_tol, project};
use crate::model::{MacroState, NetworkParams};
use crate::quadrature::{jacobian_k, jacobian_v, noise_sigma, QuadratureRule};

/// Determinant floor below which `J_v` is treated as singular inside a step.
pub const STEP_DET_FLOOR: f64 = 1e-10;
/// Floors used when reporting the exit time.
pub const ETA_DET_FLOOR: f64 = 1e-6;
pub const ETA_ZETA_FLOOR: f64 = 1e-3;
/// Constraint tolerance for recorded states.
pub const PROJECTION_TOL: f64 = 1e-12;
pub const RECORD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitReason {
    /// Not balanced, or `J_v` not Hurwitz.
    OffManifold,
    SingularJacobian,
    /// Newton projection onto the constraints failed.
    ProjectionFailed,
}

#[derive(Clone, Debug, Default)]
pub struct LimitTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<MacroState>,
    pub residuals: Vec<(f64, f64)>,
    pub zetas: Vec<f64>,
    pub det_jvs: Vec<f64>,
    /// Largest `|v_projected - v_predicted|` seen in any step.
    pub max_predictor_gap: f64,
    pub eta_hit: Option<f64>,
    pub exit_reason: Option<ExitReason>,
}

impl LimitTrajectory {
    fn push(&mut self, t: f64, report: &crate::manifold::ManifoldReport) {
        self.times.push(t);
        self.states.push(report.state);
        self.residuals.push(report.residual);
        self.zetas.push(report.zeta);
        self.det_jvs.push(report.det_jv);
    }

    fn stop(&mut self, reason: ExitReason) {
        self.eta_hit = self.times.last().copied();
        self.exit_reason = Some(reason);
    }

    pub fn last_state(&self) -> Option<&MacroState> {
        self.states.last()
    }

    /// Largest `|F_e|, |F_i|` over recorded states.
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.0.abs().max(r.1.abs())).fold(0.0, f64::max)
    }
}

/// `(dv_e, dv_i, dK_e, dK_i)` on the balanced manifold.
pub fn limit_rhs(m: &MacroState, p: &NetworkParams, rule: &QuadratureRule) -> Result<[f64; 4]> {
    let dk = variance_rhs(m, p, rule);
    let drive = jacobian_k(m, p, rule)?.apply(dk);
    let dv = if drive == [0.0, 0.0] {
        [0.0, 0.0]
    } else {
        let jv = jacobian_v(m, p, rule);
        let x = jv
            .solve(drive, STEP_DET_FLOOR)
            .ok_or(Error::SingularJacobian { det: jv.det() })?;
        [-x[0], -x[1]]
    };
    Ok([dv[0], dv[1], dk[0], dk[1]])
}

fn variance_rhs(m: &MacroState, p: &NetworkParams, rule: &QuadratureRule) -> [f64; 2] {
    let (s_e, s_i) = noise_sigma(m, p, rule);
    [relax(m.k_e, p.tau_e) + s_e, relax(m.k_i, p.tau_i) + s_i]
}

fn relax(k: f64, tau: f64) -> f64 {
    if tau.is_infinite() {
        0.0
    } else {
        -2.0 * k / tau
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LimitOptions {
    pub horizon: f64,
    pub step: f64,
    /// Stop at the first state outside the balanced manifold. Turning this off
    /// only makes sense for degenerate test networks whose `F` vanishes identically.
    pub check_manifold: bool,
}

impl LimitOptions {
    pub fn new(horizon: f64, step: f64) -> Self {
        LimitOptions {
            horizon,
            step,
            check_manifold: true,
        }
    }
}

/// Integrates from `start` up to the horizon or the first exit from the manifold.
pub fn integrate(start: &MacroState, p: &NetworkParams, opts: LimitOptions, rule: &QuadratureRule) -> Result<LimitTrajectory> {
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {}", opts.step)));
    }
    if !(opts.horizon >= 0.0 && opts.horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon must be >= 0, got {}", opts.horizon)));
    }

    let mut traj = LimitTrajectory::default();
    let report = classify_with_tol(start, p, rule, RECORD_TOL);
    traj.push(0.0, &report);
    if opts.check_manifold && !report.in_u {
        traj.stop(ExitReason::OffManifold);
        return Ok(traj);
    }

    let n_steps = ((opts.horizon / opts.step) - 1e-9).ceil().max(0.0) as usize;
    let mut state = *start;
    for k in 0..n_steps {
        let t0 = k as f64 * opts.step;
        let t1 = if k + 1 == n_steps { opts.horizon } else { (k + 1) as f64 * opts.step };
        let h = t1 - t0;

        let rhs = match limit_rhs(&state, p, rule) {
            Ok(r) => r,
            Err(Error::SingularJacobian { .. }) => {
                traj.stop(ExitReason::SingularJacobian);
                return Ok(traj);
            }
            Err(e) => return Err(e),
        };
        let dv = [rhs[0], rhs[1]];
        match rk4_step(&state, dv, h, p, rule) {
            Ok((next, gap)) => {
                traj.max_predictor_gap = traj.max_predictor_gap.max(gap);
                state = next;
            }
            Err(_) => {
                traj.stop(ExitReason::ProjectionFailed);
                return Ok(traj);
            }
        }
        let report = classify_with_tol(&state, p, rule, RECORD_TOL);
        traj.push(t1, &report);
        if opts.check_manifold && !report.in_u {
            traj.stop(ExitReason::OffManifold);
            return Ok(traj);
        }
    }
    Ok(traj)
}

/// One RK4 step of the reduced variance ODE. Returns the projected state and the
/// gap between the projected means and the explicit-Euler mean predictor.
fn rk4_step(
    state: &MacroState,
    dv: [f64; 2],
    h: f64,
    p: &NetworkParams,
    rule: &QuadratureRule,
) -> Result<(MacroState, f64)> {
    let v0 = (state.v_e, state.v_i);
    let stage = |k: [f64; 2], frac: f64| -> Result<[f64; 2]> {
        let guess = (v0.0 + frac * h * dv[0], v0.1 + frac * h * dv[1]);
        let v = project(k[0], k[1], guess, p, rule, PROJECTION_TOL)?;
        Ok(variance_rhs(&MacroState::new(v.0, v.1, k[0], k[1]), p, rule))
    };
    let k0 = [state.k_e, state.k_i];
    let s1 = variance_rhs(state, p, rule);
    let s2 = stage([k0[0] + 0.5 * h * s1[0], k0[1] + 0.5 * h * s1[1]], 0.5)?;
    let s3 = stage([k0[0] + 0.5 * h * s2[0], k0[1] + 0.5 * h * s2[1]], 0.5)?;
    let s4 = stage([k0[0] + h * s3[0], k0[1] + h * s3[1]], 1.0)?;
    let k1 = [
        k0[0] + h / 6.0 * (s1[0] + 2.0 * s2[0] + 2.0 * s3[0] + s4[0]),
        k0[1] + h / 6.0 * (s1[1] + 2.0 * s2[1] + 2.0 * s3[1] + s4[1]),
    ];
    let predicted = (v0.0 + h * dv[0], v0.1 + h * dv[1]);
    let v1 = project(k1[0], k1[1], predicted, p, rule, PROJECTION_TOL)?;
    let gap = (v1.0 - predicted.0).abs().max((v1.1 - predicted.1).abs());
    Ok((MacroState::new(v1.0, v1.1, k1[0], k1[1]), gap))
}

/// First recorded time with `det J_v <= det_floor` or `ζ <= zeta_floor`.
pub fn detect_eta(traj: &LimitTrajectory, det_floor: f64, zeta_floor: f64) -> Option<f64> {
    traj.times
        .iter()
        .zip(traj.det_jvs.iter().zip(&traj.zetas))
        .find(|(_, (&det, &zeta))| det <= det_floor || zeta <= zeta_floor)
        .map(|(&t, _)| t)
}
