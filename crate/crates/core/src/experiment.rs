//! Experiment descriptions and the empirical-vs-limit comparison run.

use std::path::{Path, PathBuf};

use crate::config::Config;
use crate::empirics::{interpolate, sup_error, SupErrors};
use crate::error::{Error, Result};
use crate::io::save_csv_columns;
use crate::limit::{integrate, LimitOptions, LimitTrajectory};
use crate::manifold::{classify, solve_balance, ManifoldReport};
use crate::model::{MacroState, NetworkParams};
use crate::quadrature::QuadratureRule;
use crate::sim::{init_micro, simulate, Method, SimConfig, Trajectory};
use crate::svg::{emit_svg_labeled, PlotLabels, Series};

pub const DEFAULT_HORIZON: f64 = 10.0;
pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_RECORD_STRIDE: f64 = 0.01;
pub const DEFAULT_SEED: u64 = 42;

pub const COMPARE_HEADER: [&str; 9] = ["t", "v_e_hat", "v_e_bar", "v_i_hat", "v_i_bar", "K_e_hat", "K_e", "K_i_hat", "K_i"];

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub params: NetworkParams,
    pub k_e: f64,
    pub k_i: f64,
    pub horizon: f64,
    /// RK4 step of the limit integrator.
    pub limit_step: f64,
    pub sim: SimConfig,
    /// Directory for the CSV and the four plots; nothing is written when `None`.
    pub outputs: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(params: NetworkParams, k_e: f64, k_i: f64) -> Self {
        ExperimentSpec {
            params,
            k_e,
            k_i,
            horizon: DEFAULT_HORIZON,
            limit_step: DEFAULT_STEP,
            sim: SimConfig {
                method: Method::FixedStep { dt: DEFAULT_STEP },
                horizon: DEFAULT_HORIZON,
                seed: DEFAULT_SEED,
                record_stride: DEFAULT_RECORD_STRIDE,
            },
            outputs: None,
        }
    }

    /// `k_e = k_i = 1` on the reference network.
    pub fn sec6_ke1_ki1() -> Self {
        Self::new(NetworkParams::reference_preset(), 1.0, 1.0)
    }

    /// `k_e = 1, k_i = 1/2` on the reference network.
    pub fn sec6_ke1_ki05() -> Self {
        Self::new(NetworkParams::reference_preset(), 1.0, 0.5)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "sec6_ke1_ki1" => Some(Self::sec6_ke1_ki1()),
            "sec6_ke1_ki05" => Some(Self::sec6_ke1_ki05()),
            _ => None,
        }
    }

    /// Network from the file; run settings fall back to the defaults above
    /// (`k_e = k_i = 1`).
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let r = &cfg.run;
        let mut spec = Self::new(cfg.params.clone(), r.k_e.unwrap_or(1.0), r.k_i.unwrap_or(1.0));
        if let Some(h) = r.limit_step {
            spec.limit_step = h;
        }
        if let Some(s) = r.seed {
            spec.sim.seed = s;
        }
        if let Some(s) = r.record_stride {
            spec.sim.record_stride = s;
        }
        let dt = r.dt.unwrap_or(DEFAULT_STEP);
        spec.sim.method = match r.method.as_deref() {
            None | Some("fixed") => Method::FixedStep { dt },
            Some("exact") => Method::Exact,
            Some(other) => return Err(Error::Config { line: 0, msg: format!("unknown method `{other}`") }),
        };
        spec.set_horizon(r.horizon.unwrap_or(DEFAULT_HORIZON));
        Ok(spec)
    }

    pub fn set_horizon(&mut self, t: f64) {
        self.horizon = t;
        self.sim.horizon = t;
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if !(self.limit_step > 0.0 && self.limit_step <= self.horizon) {
            return Err(Error::InvalidParameter(format!("limit step must be in (0, T], got {}", self.limit_step)));
        }
        if self.sim.horizon != self.horizon {
            return Err(Error::InvalidParameter("simulation and limit horizons differ".into()));
        }
        if !(self.k_e > 0.0 && self.k_i > 0.0) {
            return Err(Error::NonPositiveVariance(self.k_e.min(self.k_i)));
        }
        self.sim.validate()
    }
}

#[derive(Clone, Debug)]
pub struct CompareReport {
    pub initial: ManifoldReport,
    pub limit: LimitTrajectory,
    pub empirical: Trajectory,
    pub sup: SupErrors,
    pub files: Vec<PathBuf>,
}

/// Balanced initial point for the experiment, refusing anything outside the manifold.
pub fn balanced_start(spec: &ExperimentSpec, rule: &QuadratureRule) -> Result<ManifoldReport> {
    let (m_e, m_i) = solve_balance(spec.k_e, spec.k_i, &spec.params, None, rule).map_err(|e| match e {
        Error::NoRoot { .. } | Error::SingularJacobian { .. } => Error::OffManifold(e.to_string()),
        other => other,
    })?;
    let report = classify(&MacroState::new(m_e, m_i, spec.k_e, spec.k_i), &spec.params, rule);
    if !report.in_u {
        return Err(Error::OffManifold(format!(
            "residual ({:.3e}, {:.3e}), zeta {:.4}",
            report.residual.0, report.residual.1, report.zeta
        )));
    }
    Ok(report)
}

pub fn run_compare(spec: &ExperimentSpec) -> Result<CompareReport> {
    spec.validate()?;
    let rule = QuadratureRule::standard();
    let initial = balanced_start(spec, rule)?;
    let s0 = initial.state;
    log::info!("balanced start v = ({:.6}, {:.6}), zeta = {:.4}", s0.v_e, s0.v_i, initial.zeta);

    let limit = integrate(&s0, &spec.params, LimitOptions::new(spec.horizon, spec.limit_step), rule)?;
    if let Some(reason) = limit.exit_reason {
        log::warn!("limit trajectory stopped at t = {:?}: {reason:?}", limit.eta_hit);
    }
    let init = init_micro(s0.v_e, s0.v_i, spec.k_e, spec.k_i, &spec.params, spec.sim.seed)?;
    let empirical = simulate(&init, &spec.params, &spec.sim)?.trajectory;
    let sup = sup_error(&empirical, &limit)?;

    let mut files = Vec::new();
    if let Some(dir) = &spec.outputs {
        std::fs::create_dir_all(dir)?;
        files = write_compare_outputs(dir, &empirical, &limit)?;
    }
    Ok(CompareReport {
        initial,
        limit,
        empirical,
        sup,
        files,
    })
}

fn write_compare_outputs(dir: &Path, emp: &Trajectory, lim: &LimitTrajectory) -> Result<Vec<PathBuf>> {
    let bar: Vec<MacroState> = emp.times.iter().map(|&t| interpolate(lim, t)).collect::<Result<_>>()?;
    let hat = &emp.states;
    let col = |xs: &[MacroState], f: fn(&MacroState) -> f64| xs.iter().map(f).collect::<Vec<f64>>();
    let getters: [fn(&MacroState) -> f64; 4] = [|m| m.v_e, |m| m.v_i, |m| m.k_e, |m| m.k_i];
    let hats: Vec<Vec<f64>> = getters.iter().map(|&g| col(hat, g)).collect();
    let bars: Vec<Vec<f64>> = getters.iter().map(|&g| col(&bar, g)).collect();

    let csv = dir.join("compare.csv");
    save_csv_columns(
        &csv,
        &COMPARE_HEADER,
        &[&emp.times, &hats[0], &bars[0], &hats[1], &bars[1], &hats[2], &bars[2], &hats[3], &bars[3]],
    )?;
    let mut files = vec![csv];

    let names = ["v_e", "v_i", "K_e", "K_i"];
    let lim_cols: Vec<Vec<f64>> = getters.iter().map(|&g| col(&lim.states, g)).collect();
    for k in [3, 2, 1, 0] {
        let path = dir.join(format!("{}.svg", names[k]));
        let emp_label = format!("{} empirical", names[k]);
        let lim_label = format!("{} limit", names[k]);
        emit_svg_labeled(
            &[
                Series::new(&emp_label, &emp.times, &hats[k]),
                Series::new(&lim_label, &lim.times, &lim_cols[k]),
            ],
            &PlotLabels {
                title: format!("{} vs time", names[k]),
                x: "t".into(),
                y: names[k].into(),
            },
            &path,
        )?;
        files.push(path);
    }
    Ok(files)
}
