//! Convergence diagnostics: empirical-vs-limit sup errors, 1-D Wasserstein distance
//! to a Gaussian marginal, and the sweep over network sizes.

use crate::error::{Error, Result};
use crate::experiment::ExperimentSpec;
use crate::limit::{integrate, LimitOptions, LimitTrajectory};
use crate::manifold::solve_balance;
use crate::model::MacroState;
use crate::par;
use crate::quadrature::QuadratureRule;
use crate::sim::{init_micro, simulate, MacroPath};

/// Sup-norm differences of `(v_e, v_i, K_e, K_i)`, plus the sup of their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SupErrors {
    pub v_e: f64,
    pub v_i: f64,
    pub k_e: f64,
    pub k_i: f64,
    pub sum: f64,
}

impl SupErrors {
    pub fn as_array(&self) -> [f64; 4] {
        [self.v_e, self.v_i, self.k_e, self.k_i]
    }
}

/// Linear interpolation of a macro path at `t`.
pub fn interpolate(path: &impl MacroPath, t: f64) -> Result<MacroState> {
    let times = path.times();
    let states = path.states();
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return Err(Error::GridMismatch { t });
    };
    let slack = 1e-9 * last.abs().max(1.0);
    if t < first - slack || t > last + slack {
        return Err(Error::GridMismatch { t });
    }
    let idx = times.partition_point(|&s| s < t);
    if idx == 0 {
        return Ok(states[0]);
    }
    if idx >= times.len() {
        return Ok(states[times.len() - 1]);
    }
    let (t0, t1) = (times[idx - 1], times[idx]);
    if t1 == t {
        return Ok(states[idx]);
    }
    let w = (t - t0) / (t1 - t0);
    let (a, b) = (states[idx - 1].as_array(), states[idx].as_array());
    let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + w * (y - x)).collect();
    Ok(MacroState::new(m[0], m[1], m[2], m[3]))
}

/// Sup over the empirical grid of the four differences, with the limit
/// trajectory interpolated linearly onto that grid.
pub fn sup_error(emp: &impl MacroPath, lim: &LimitTrajectory) -> Result<SupErrors> {
    let mut out = SupErrors::default();
    for (&t, s) in emp.times().iter().zip(emp.states()) {
        let l = interpolate(lim, t)?;
        let d = [
            (s.v_e - l.v_e).abs(),
            (s.v_i - l.v_i).abs(),
            (s.k_e - l.k_e).abs(),
            (s.k_i - l.k_i).abs(),
        ];
        out.v_e = out.v_e.max(d[0]);
        out.v_i = out.v_i.max(d[1]);
        out.k_e = out.k_e.max(d[2]);
        out.k_i = out.k_i.max(d[3]);
        out.sum = out.sum.max(d.iter().sum());
    }
    Ok(out)
}

/// Standard normal quantile (Wichura's AS241, relative error about 1e-16).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level must be in (0, 1), got {p}");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn poly(coef: &[f64; 8], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

const A: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_546,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_7e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_8e-15,
];

/// `W₁` between the empirical law of `samples` and `N(mean, var)`, as the L¹
/// distance between the sorted samples and the Gaussian quantiles at `(j − ½)/N`.
pub fn wasserstein1_to_gaussian(samples: &[f64], mean: f64, var: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    if var.is_nan() || var < 0.0 {
        return Err(Error::InvalidParameter(format!("variance must be >= 0, got {var}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let sd = var.sqrt();
    let total: f64 = sorted
        .iter()
        .enumerate()
        .map(|(j, x)| (x - (mean + sd * normal_quantile((j as f64 + 0.5) / n))).abs())
        .sum();
    Ok(total / n)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub seed: u64,
    pub sup_err_v_e: f64,
    pub sup_err_v_i: f64,
    pub sup_err_k_e: f64,
    pub sup_err_k_i: f64,
    /// Sup over time of the sum of the four differences.
    pub sup_err_sum: f64,
    pub w1_e_final: f64,
    pub w1_i_final: f64,
}

impl ConvergenceRow {
    pub const CSV_HEADER: [&'static str; 9] = [
        "n",
        "seed",
        "sup_err_v_e",
        "sup_err_v_i",
        "sup_err_K_e",
        "sup_err_K_i",
        "sup_err_sum",
        "w1_e_final",
        "w1_i_final",
    ];
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SizeSummary {
    pub n: usize,
    pub median_sup_err_v_e: f64,
    pub median_sup_err_sum: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub failures: Vec<(usize, u64, String)>,
    /// One entry per requested `n`, in the order given.
    pub summary: Vec<SizeSummary>,
}

impl ConvergenceStudy {
    /// Median of the summed sup error is non-increasing along the requested sizes.
    pub fn is_monotone(&self) -> bool {
        self.summary
            .windows(2)
            .all(|w| w[1].median_sup_err_sum <= w[0].median_sup_err_sum)
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Runs the experiment for every `(n, seed)` pair against one shared limit
/// trajectory. Rows that fail are listed in `failures` and the sweep continues.
pub fn convergence_study(ns: &[usize], seeds: &[u64], spec: &ExperimentSpec) -> Result<ConvergenceStudy> {
    let rule = QuadratureRule::standard();
    let p = &spec.params;
    let (m_e, m_i) = solve_balance(spec.k_e, spec.k_i, p, None, rule)?;
    let start = MacroState::new(m_e, m_i, spec.k_e, spec.k_i);
    let limit = integrate(&start, p, LimitOptions::new(spec.horizon, spec.limit_step), rule)?;
    let target = *limit.last_state().expect("limit trajectory has a start point");

    let jobs: Vec<(usize, u64)> = ns.iter().flat_map(|&n| seeds.iter().map(move |&s| (n, s))).collect();
    let run = |&(n, seed): &(usize, u64)| -> Result<ConvergenceRow> {
        let params = p.clone().with_n(n);
        let init = init_micro(m_e, m_i, spec.k_e, spec.k_i, &params, seed)?;
        let mut cfg = spec.sim;
        cfg.seed = seed;
        let out = simulate(&init, &params, &cfg)?;
        let err = sup_error(&out.trajectory, &limit)?;
        Ok(ConvergenceRow {
            n,
            seed,
            sup_err_v_e: err.v_e,
            sup_err_v_i: err.v_i,
            sup_err_k_e: err.k_e,
            sup_err_k_i: err.k_i,
            sup_err_sum: err.sum,
            w1_e_final: wasserstein1_to_gaussian(out.final_state.u_e(), target.v_e, target.k_e)?,
            w1_i_final: wasserstein1_to_gaussian(out.final_state.u_i(), target.v_i, target.k_i)?,
        })
    };
    let results = par::map_range(jobs.len(), |i| run(&jobs[i]));

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (job, res) in jobs.iter().zip(results) {
        match res {
            Ok(r) => rows.push(r),
            Err(e) => failures.push((job.0, job.1, e.to_string())),
        }
    }
    let summary = ns
        .iter()
        .map(|&n| {
            let sel: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.n == n).collect();
            SizeSummary {
                n,
                median_sup_err_v_e: median(&sel.iter().map(|r| r.sup_err_v_e).collect::<Vec<_>>()),
                median_sup_err_sum: median(&sel.iter().map(|r| r.sup_err_sum).collect::<Vec<_>>()),
            }
        })
        .collect();
    Ok(ConvergenceStudy {
        rows,
        failures,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Trajectory;
    use proptest::prelude::*;

    fn limit_from(times: Vec<f64>, states: Vec<MacroState>) -> LimitTrajectory {
        LimitTrajectory {
            times,
            states,
            ..Default::default()
        }
    }

    #[test]
    fn quantile_reference_values() {
        assert_eq!(normal_quantile(0.5), 0.0);
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        assert!((normal_quantile(0.025) + 1.959_963_984_540_054).abs() < 1e-14);
        assert!((normal_quantile(1e-10) + 6.361_340_902_404_056).abs() < 1e-12);
        assert!((normal_quantile(0.8413447460685429) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sup_error_of_identical_and_shifted_paths() {
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let states: Vec<MacroState> = times
            .iter()
            .map(|t| MacroState::new(t.sin(), -t, 1.0 + t, 0.5))
            .collect();
        let lim = limit_from(times.clone(), states.clone());
        let emp = Trajectory::from(&lim);
        assert_eq!(sup_error(&emp, &lim).unwrap(), SupErrors::default());

        let shifted = Trajectory {
            times,
            states: states.iter().map(|s| MacroState { v_e: s.v_e + 0.25, ..*s }).collect(),
        };
        let e = sup_error(&shifted, &lim).unwrap();
        assert!((e.v_e - 0.25).abs() < 1e-15);
        assert_eq!((e.v_i, e.k_e, e.k_i), (0.0, 0.0, 0.0));
    }

    #[test]
    fn sup_error_interpolates_and_checks_grid() {
        let lim = limit_from(vec![0.0, 1.0], vec![MacroState::new(0.0, 0.0, 0.0, 0.0), MacroState::new(2.0, 0.0, 0.0, 0.0)]);
        let emp = Trajectory {
            times: vec![0.5],
            states: vec![MacroState::new(1.0, 0.0, 0.0, 0.0)],
        };
        assert_eq!(sup_error(&emp, &lim).unwrap().v_e, 0.0);
        let beyond = Trajectory {
            times: vec![1.5],
            states: vec![MacroState::default()],
        };
        assert!(matches!(sup_error(&beyond, &lim), Err(Error::GridMismatch { .. })));
    }

    fn quantile_grid(n: usize, mean: f64, sd: f64) -> Vec<f64> {
        (0..n)
            .map(|j| mean + sd * normal_quantile((j as f64 + 0.5) / n as f64))
            .collect()
    }

    #[test]
    fn w1_matched_and_translated() {
        let s = quantile_grid(1000, 0.0, 1.0);
        assert!(wasserstein1_to_gaussian(&s, 0.0, 1.0).unwrap() <= 1e-8);
        for c in [-1.5, 0.3, 2.0] {
            let w = wasserstein1_to_gaussian(&s, c, 1.0).unwrap();
            assert!((w - c.abs()).abs() <= 1e-8, "{c}: {w}");
        }
        assert!(wasserstein1_to_gaussian(&s, 0.0, -1.0).is_err());
        assert!(wasserstein1_to_gaussian(&[], 0.0, 1.0).is_err());
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    proptest! {
        #[test]
        fn w1_permutation_invariant(mut xs in prop::collection::vec(-5.0..5.0f64, 1..40), m in -1.0..1.0f64, v in 0.0..3.0f64) {
            let a = wasserstein1_to_gaussian(&xs, m, v).unwrap();
            xs.reverse();
            let b = wasserstein1_to_gaussian(&xs, m, v).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn w1_triangle_inequality(xs in prop::collection::vec(-5.0..5.0f64, 5..40),
                                  m1 in -2.0..2.0f64, v1 in 0.1..3.0f64,
                                  m2 in -2.0..2.0f64, v2 in 0.1..3.0f64) {
            // d(emp, G2) <= d(emp, G1) + d(G1, G2), with d(G1, G2) on the same quantile grid
            let n = xs.len();
            let g1 = quantile_grid(n, m1, v1.sqrt());
            let d_e2 = wasserstein1_to_gaussian(&xs, m2, v2).unwrap();
            let d_e1 = wasserstein1_to_gaussian(&xs, m1, v1).unwrap();
            let d_12 = wasserstein1_to_gaussian(&g1, m2, v2).unwrap();
            prop_assert!(d_e2 <= d_e1 + d_12 + 1e-12);
        }

        #[test]
        fn sup_error_nonnegative_and_zero_iff_equal(vals in prop::collection::vec(-3.0..3.0f64, 4..20), bump in 0usize..4) {
            let times: Vec<f64> = (0..vals.len()).map(|k| k as f64).collect();
            let states: Vec<MacroState> = vals.iter().map(|&v| MacroState::new(v, -v, v * v, 1.0)).collect();
            let lim = limit_from(times.clone(), states.clone());
            let same = Trajectory { times: times.clone(), states: states.clone() };
            prop_assert_eq!(sup_error(&same, &lim).unwrap().sum, 0.0);
            let mut other = states.clone();
            let mut arr = other[bump].as_array();
            arr[bump] += 0.5;
            other[bump] = MacroState::new(arr[0], arr[1], arr[2], arr[3]);
            let e = sup_error(&Trajectory { times, states: other }, &lim).unwrap();
            prop_assert!(e.sum > 0.0);
            prop_assert!(e.as_array().iter().all(|&x| x >= 0.0));
        }
    }
}
