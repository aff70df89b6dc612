use std::path::{Path, PathBuf};
use std::process::ExitCode;

use balanced_net::config::Config;
use balanced_net::empirics::{convergence_study, ConvergenceRow};
use balanced_net::experiment::{balanced_start, run_compare, ExperimentSpec};
use balanced_net::fluctuations::{check_exp_square, check_moc_concentration, check_tail_bound};
use balanced_net::io::{fmt_f64, save_csv_columns, save_csv_rows, save_micro, Cell};
use balanced_net::limit::{integrate, LimitOptions};
use balanced_net::manifold::{classify, ManifoldReport};
use balanced_net::model::MacroState;
use balanced_net::sim::{empirical_trajectory, init_micro, simulate, Method};
use balanced_net::{Error, NetworkParams, QuadratureRule};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

const EXIT_IO: u8 = 1;
const EXIT_OFF_MANIFOLD: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "balanced-net", version, about = "Balanced E/I network: finite-n simulation and limit equations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Solve the balance equations and classify the point.
    Manifold(ManifoldArgs),
    /// Integrate the limit equations from the balanced point.
    #[command(disable_help_flag = true)]
    Limit(LimitArgs),
    /// Simulate the finite network.
    Simulate(SimulateArgs),
    /// Simulate and integrate, then write a comparison CSV and plots.
    Compare(CompareArgs),
    /// Sup errors against the limit over network sizes and seeds.
    Convergence(ConvergenceArgs),
    /// Monte Carlo checks for compensated Poisson processes.
    #[command(subcommand)]
    Fluct(FluctCmd),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Config file, or a preset name (reference, sec6_ke1_ki1, sec6_ke1_ki05).
    #[arg(long, default_value = "reference")]
    config: String,
    #[arg(long)]
    ke: Option<f64>,
    #[arg(long)]
    ki: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Record,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Exact,
    Fixed,
}

#[derive(Args, Debug)]
struct ManifoldArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args, Debug)]
struct LimitArgs {
    #[command(flatten)]
    common: Common,
    #[arg(short = 'T', long = "horizon")]
    horizon: Option<f64>,
    /// RK4 step.
    #[arg(short = 'h', long = "step")]
    step: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, action = ArgAction::Help)]
    help: Option<bool>,
}

#[derive(Args, Debug, Clone)]
struct SimArgs {
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(short = 'T', long = "horizon")]
    horizon: Option<f64>,
    #[arg(short = 'n', long = "n")]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Spacing of recorded time points.
    #[arg(long)]
    record_stride: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dump_micro: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sim: SimArgs,
    /// Limit RK4 step.
    #[arg(long)]
    step: Option<f64>,
    /// Output directory for compare.csv and the four SVG panels.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, value_delimiter = ',', default_value = "250,1000,4000")]
    ns: Vec<usize>,
    /// Number of seeds per size; seeds are `seed, seed+1, ...`.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum FluctCmd {
    /// Tail of sup|w| against 2 exp(-x²/4T).
    Tail {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(short = 'T', long = "horizon", default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,3")]
        xs: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Frequency of a large average modulus of continuity.
    Moc {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(short = 'T', long = "horizon", default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.1,0.02,0.004")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// E[exp(b sup|w|²/n)] for several horizons.
    Expsq {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(short = 'b', long, default_value_t = 0.1)]
        b: f64,
        #[arg(long = "horizons", value_delimiter = ',', default_value = "1,0.1,0.01")]
        horizons: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Resolves `--config` and applies `--ke/--ki` on top of it.
fn load_spec(common: &Common) -> Result<ExperimentSpec, Error> {
    let mut spec = if Path::new(&common.config).is_file() {
        ExperimentSpec::from_config(&Config::load(&common.config)?)?
    } else if common.config == "reference" {
        ExperimentSpec::new(NetworkParams::reference_preset(), 1.0, 1.0)
    } else if let Some(spec) = ExperimentSpec::preset(&common.config) {
        spec
    } else {
        return Err(Error::Config {
            line: 0,
            msg: format!("`{}` is neither a readable file nor a preset name", common.config),
        });
    };
    if let Some(k) = common.ke {
        spec.k_e = k;
    }
    if let Some(k) = common.ki {
        spec.k_i = k;
    }
    Ok(spec)
}

fn apply_sim(spec: &mut ExperimentSpec, a: &SimArgs) {
    if let Some(t) = a.horizon {
        spec.set_horizon(t);
    }
    if let Some(n) = a.n {
        spec.params.n = n;
    }
    if let Some(s) = a.seed {
        spec.sim.seed = s;
    }
    if let Some(s) = a.record_stride {
        spec.sim.record_stride = s;
    }
    let dt = match (a.dt, spec.sim.method) {
        (Some(dt), _) => dt,
        (None, Method::FixedStep { dt }) => dt,
        (None, Method::Exact) => balanced_net::experiment::DEFAULT_STEP,
    };
    spec.sim.method = match a.method {
        Some(MethodArg::Exact) => Method::Exact,
        Some(MethodArg::Fixed) => Method::FixedStep { dt },
        None => match spec.sim.method {
            Method::Exact => Method::Exact,
            Method::FixedStep { .. } => Method::FixedStep { dt },
        },
    };
}

fn print_report(r: &ManifoldReport, format: Format) {
    let s = r.state;
    match format {
        Format::Text => {
            println!("v_e       {:>24}", fmt_f64(s.v_e));
            println!("v_i       {:>24}", fmt_f64(s.v_i));
            println!("K_e       {:>24}", fmt_f64(s.k_e));
            println!("K_i       {:>24}", fmt_f64(s.k_i));
            println!("F_e       {:>24}", fmt_f64(r.residual.0));
            println!("F_i       {:>24}", fmt_f64(r.residual.1));
            println!("lambda_1  {:>24} {:+.6e}i", fmt_f64(r.eig[0].re), r.eig[0].im);
            println!("lambda_2  {:>24} {:+.6e}i", fmt_f64(r.eig[1].re), r.eig[1].im);
            println!("det_Jv    {:>24}", fmt_f64(r.det_jv));
            println!("zeta      {:>24}", fmt_f64(r.zeta));
            println!("in_U      {:>24}", r.in_u);
        }
        Format::Record => println!(
            "{{v_e: {}, v_i: {}, K_e: {}, K_i: {}, F_e: {}, F_i: {}, eig: [({}, {}), ({}, {})], det_Jv: {}, zeta: {}, in_U: {}}}",
            fmt_f64(s.v_e),
            fmt_f64(s.v_i),
            fmt_f64(s.k_e),
            fmt_f64(s.k_i),
            fmt_f64(r.residual.0),
            fmt_f64(r.residual.1),
            fmt_f64(r.eig[0].re),
            fmt_f64(r.eig[0].im),
            fmt_f64(r.eig[1].re),
            fmt_f64(r.eig[1].im),
            fmt_f64(r.det_jv),
            fmt_f64(r.zeta),
            r.in_u
        ),
    }
}

fn cmd_manifold(a: ManifoldArgs) -> Result<(), Error> {
    let spec = load_spec(&a.common)?;
    let rule = QuadratureRule::standard();
    let report = match balanced_start(&spec, rule) {
        Ok(r) => r,
        Err(Error::OffManifold(msg)) => {
            // Still show where Newton ended up when a root exists.
            if let Ok((m_e, m_i)) = balanced_net::manifold::solve_balance(spec.k_e, spec.k_i, &spec.params, None, rule) {
                print_report(&classify(&MacroState::new(m_e, m_i, spec.k_e, spec.k_i), &spec.params, rule), a.format);
            }
            return Err(Error::OffManifold(msg));
        }
        Err(e) => return Err(e),
    };
    print_report(&report, a.format);
    Ok(())
}

fn cmd_limit(a: LimitArgs) -> Result<(), Error> {
    let mut spec = load_spec(&a.common)?;
    if let Some(t) = a.horizon {
        spec.set_horizon(t);
    }
    if let Some(h) = a.step {
        spec.limit_step = h;
    }
    spec.validate()?;
    let rule = QuadratureRule::standard();
    let start = balanced_start(&spec, rule)?;
    let traj = integrate(&start.state, &spec.params, LimitOptions::new(spec.horizon, spec.limit_step), rule)?;
    if let Some(reason) = traj.exit_reason {
        eprintln!("limit trajectory left the balanced manifold at t = {:?} ({reason:?})", traj.eta_hit);
    }
    let col = |f: fn(&MacroState) -> f64| traj.states.iter().map(f).collect::<Vec<f64>>();
    let f_e: Vec<f64> = traj.residuals.iter().map(|r| r.0).collect();
    let f_i: Vec<f64> = traj.residuals.iter().map(|r| r.1).collect();
    save_csv_columns(
        &a.out,
        &["t", "v_e", "v_i", "K_e", "K_i", "F_e", "F_i", "zeta", "det_Jv"],
        &[
            &traj.times,
            &col(|m| m.v_e),
            &col(|m| m.v_i),
            &col(|m| m.k_e),
            &col(|m| m.k_i),
            &f_e,
            &f_i,
            &traj.zetas,
            &traj.det_jvs,
        ],
    )?;
    eprintln!("max |F| along trajectory: {:.3e}", traj.max_residual());
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Error> {
    let mut spec = load_spec(&a.common)?;
    apply_sim(&mut spec, &a.sim);
    spec.validate()?;
    let start = balanced_start(&spec, QuadratureRule::standard())?.state;
    let init = init_micro(start.v_e, start.v_i, spec.k_e, spec.k_i, &spec.params, spec.sim.seed)?;
    let out = simulate(&init, &spec.params, &spec.sim)?;
    let c = empirical_trajectory(&out.trajectory);
    save_csv_columns(&a.out, &["t", "v_e", "v_i", "K_e", "K_i"], &[&c.t, &c.v_e, &c.v_i, &c.k_e, &c.k_i])?;
    if let Some(path) = &a.dump_micro {
        save_micro(path, &out.final_state, spec.params.tau_e, spec.params.tau_i)?;
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<(), Error> {
    let mut spec = load_spec(&a.common)?;
    apply_sim(&mut spec, &a.sim);
    if let Some(h) = a.step {
        spec.limit_step = h;
    }
    spec.outputs = Some(a.out_dir);
    let report = run_compare(&spec)?;
    let s = report.sup;
    println!("sup_err_v_e {}", fmt_f64(s.v_e));
    println!("sup_err_v_i {}", fmt_f64(s.v_i));
    println!("sup_err_K_e {}", fmt_f64(s.k_e));
    println!("sup_err_K_i {}", fmt_f64(s.k_i));
    for f in &report.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_convergence(a: ConvergenceArgs) -> Result<(), Error> {
    let mut spec = load_spec(&a.common)?;
    apply_sim(&mut spec, &a.sim);
    if a.sim.horizon.is_none() {
        spec.set_horizon(5.0);
    }
    if let Some(h) = a.step {
        spec.limit_step = h;
    }
    spec.validate()?;
    balanced_start(&spec, QuadratureRule::standard())?;
    let seeds: Vec<u64> = (0..a.seeds).map(|k| spec.sim.seed.wrapping_add(k)).collect();
    let study = convergence_study(&a.ns, &seeds, &spec)?;
    for (n, seed, msg) in &study.failures {
        eprintln!("n = {n}, seed = {seed} failed: {msg}");
    }
    let rows = study.rows.iter().map(|r| {
        vec![
            Cell::from(r.n),
            Cell::from(r.seed),
            Cell::from(r.sup_err_v_e),
            Cell::from(r.sup_err_v_i),
            Cell::from(r.sup_err_k_e),
            Cell::from(r.sup_err_k_i),
            Cell::from(r.sup_err_sum),
            Cell::from(r.w1_e_final),
            Cell::from(r.w1_i_final),
        ]
    });
    save_csv_rows(&a.out, &ConvergenceRow::CSV_HEADER, rows)?;
    for s in &study.summary {
        println!("n {:>7}  median sup_err_sum {}", s.n, fmt_f64(s.median_sup_err_sum));
    }
    println!("monotone {}", study.is_monotone());
    Ok(())
}

fn cmd_fluct(c: FluctCmd) -> Result<(), Error> {
    match c {
        FluctCmd::Tail { n, horizon, xs, trials, seed, out } => {
            let r = check_tail_bound(n, horizon, &xs, trials, seed);
            let slack: Vec<f64> = (0..xs.len()).map(|i| r.slack(i)).collect();
            save_csv_columns(&out, &["x", "empirical_tail", "bound", "slack"], &[&r.x_grid, &r.empirical_tail, &r.bound, &slack])?;
            println!("holds {}", r.holds());
        }
        FluctCmd::Moc { n, horizon, eps, delta, trials, seed, out } => {
            let r = check_moc_concentration(n, &eps, delta, horizon, trials, seed);
            save_csv_columns(&out, &["eps", "frequency", "mean_modulus"], &[&r.eps_grid, &r.frequencies, &r.mean_modulus])?;
            println!("non_increasing {}", r.is_non_increasing());
        }
        FluctCmd::Expsq { n, b, horizons, trials, seed, out } => {
            let r = check_exp_square(n, b, &horizons, trials, seed);
            save_csv_columns(&out, &["T", "mean", "std_err"], &[&r.horizons, &r.means, &r.std_errs])?;
            println!("monotone {}", r.is_monotone());
        }
    }
    Ok(())
}

fn init_threads() {
    if let Ok(v) = std::env::var("BALANCED_NET_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
                    log::warn!("could not size thread pool: {e}");
                }
            }
            _ => log::warn!("ignoring BALANCED_NET_THREADS={v:?}"),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::OffManifold(_) | Error::NoRoot { .. } => EXIT_OFF_MANIFOLD,
        Error::Config { .. } | Error::InvalidParameter(_) | Error::NonPositiveVariance(_) => EXIT_USAGE,
        _ => EXIT_IO,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_threads();
    let res = match cli.cmd {
        Cmd::Manifold(a) => cmd_manifold(a),
        Cmd::Limit(a) => cmd_limit(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Compare(a) => cmd_compare(a),
        Cmd::Convergence(a) => cmd_convergence(a),
        Cmd::Fluct(c) => cmd_fluct(c),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
