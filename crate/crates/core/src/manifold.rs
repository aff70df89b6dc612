//! Balance points `F_e = F_i = 0` and membership in the balanced manifold.

use crate::error::{Error, Result};
use crate::model::{MacroState, NetworkParams};
use crate::quadrature::{balance_f, jacobian_v, Complex, QuadratureRule};

/// Absolute tolerance on `|F_e|, |F_i|`.
pub const RESIDUAL_TOL: f64 = 1e-12;
pub const SINGULAR_DET: f64 = 1e-14;
const MAX_NEWTON_ITERS: usize = 100;
const MAX_HALVINGS: usize = 30;
const GRID_POINTS: usize = 41;
const GRID_HALF_WIDTH: f64 = 10.0;
/// Grid minimizers tried as Newton starts, best first.
const GRID_CANDIDATES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManifoldReport {
    pub state: MacroState,
    pub residual: (f64, f64),
    pub eig: [Complex; 2],
    pub det_jv: f64,
    /// `-max Re λ`; positive exactly when `J_v` is Hurwitz.
    pub zeta: f64,
    pub in_u: bool,
}

fn residual_norm(f: (f64, f64)) -> f64 {
    f.0.abs().max(f.1.abs())
}

/// Damped Newton on `(v_e, v_i) ↦ F(v_e, v_i, k_e, k_i)` from `start`.
pub fn project(
    k_e: f64,
    k_i: f64,
    start: (f64, f64),
    p: &NetworkParams,
    rule: &QuadratureRule,
    tol: f64,
) -> Result<(f64, f64)> {
    let eval = |v: (f64, f64)| balance_f(&MacroState::new(v.0, v.1, k_e, k_i), p, rule);
    let mut v = start;
    let mut f = eval(v);
    let mut norm = residual_norm(f);
    let mut polished = false;
    for _ in 0..MAX_NEWTON_ITERS {
        if norm <= tol {
            // One extra step pushes the residual well under tol when Newton still contracts.
            if polished || norm == 0.0 {
                return Ok(v);
            }
            polished = true;
        }
        let jac = jacobian_v(&MacroState::new(v.0, v.1, k_e, k_i), p, rule);
        let step = match jac.solve([-f.0, -f.1], SINGULAR_DET) {
            Some(s) => s,
            None => {
                // Rank-deficient J_v: minimum-norm step -J^T F / |J|_F².
                let frob = jac.a11 * jac.a11 + jac.a12 * jac.a12 + jac.a21 * jac.a21 + jac.a22 * jac.a22;
                if frob.is_nan() || frob <= SINGULAR_DET {
                    return Err(Error::SingularJacobian { det: jac.det() });
                }
                [
                    -(jac.a11 * f.0 + jac.a21 * f.1) / frob,
                    -(jac.a12 * f.0 + jac.a22 * f.1) / frob,
                ]
            }
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial = (v.0 + lambda * step[0], v.1 + lambda * step[1]);
            let ft = eval(trial);
            let nt = residual_norm(ft);
            if nt < norm {
                v = trial;
                f = ft;
                norm = nt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm <= tol {
        Ok(v)
    } else {
        Err(Error::NoRoot {
            residual: norm,
            m_e: v.0,
            m_i: v.1,
        })
    }
}

/// Grid points of `[-10, 10]²` ordered by increasing residual.
fn grid_starts(k_e: f64, k_i: f64, p: &NetworkParams, rule: &QuadratureRule) -> Vec<((f64, f64), f64)> {
    let step = 2.0 * GRID_HALF_WIDTH / (GRID_POINTS - 1) as f64;
    let mut pts = Vec::with_capacity(GRID_POINTS * GRID_POINTS);
    for a in 0..GRID_POINTS {
        for b in 0..GRID_POINTS {
            let v = (-GRID_HALF_WIDTH + a as f64 * step, -GRID_HALF_WIDTH + b as f64 * step);
            let r = residual_norm(balance_f(&MacroState::new(v.0, v.1, k_e, k_i), p, rule));
            pts.push((v, r));
        }
    }
    pts.sort_by(|x, y| x.1.total_cmp(&y.1));
    pts
}

/// Solves `F_e = F_i = 0` for the means given the variances.
///
/// Without a guess, Newton starts from the best points of a 41×41 residual scan
/// over `[-10, 10]²`; the root reached from the scan minimizer is preferred, so
/// when several balanced branches exist the one nearest that minimizer wins.
pub fn solve_balance(
    k_e: f64,
    k_i: f64,
    p: &NetworkParams,
    guess: Option<(f64, f64)>,
    rule: &QuadratureRule,
) -> Result<(f64, f64)> {
    if k_e.is_nan() || k_i.is_nan() || k_e < 0.0 || k_i < 0.0 {
        return Err(Error::InvalidParameter(format!("variances must be >= 0, got ({k_e}, {k_i})")));
    }
    if let Some(g) = guess {
        return project(k_e, k_i, g, p, rule, RESIDUAL_TOL);
    }
    let mut first_err = None;
    for (start, _) in grid_starts(k_e, k_i, p, rule).into_iter().take(GRID_CANDIDATES) {
        match project(k_e, k_i, start, p, rule, RESIDUAL_TOL) {
            Ok(v) => return Ok(v),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.expect("at least one candidate"))
}

pub fn classify(m: &MacroState, p: &NetworkParams, rule: &QuadratureRule) -> ManifoldReport {
    classify_with_tol(m, p, rule, RESIDUAL_TOL)
}

pub fn classify_with_tol(m: &MacroState, p: &NetworkParams, rule: &QuadratureRule, tol: f64) -> ManifoldReport {
    let residual = balance_f(m, p, rule);
    let jac = jacobian_v(m, p, rule);
    let eig = jac.eigenvalues();
    let zeta = -eig[0].re.max(eig[1].re);
    let balanced = residual.0.abs() <= tol && residual.1.abs() <= tol;
    let variances_ok = m.k_e >= 0.0 && m.k_i >= 0.0;
    ManifoldReport {
        state: *m,
        residual,
        eig,
        det_jv: jac.det(),
        zeta,
        in_u: balanced && variances_ok && zeta > 0.0,
    }
}
