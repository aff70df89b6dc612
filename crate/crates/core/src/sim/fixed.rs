//! Fixed-step aggregated simulator.
//!
//! Per step of length `dt`: every potential decays exactly by `e^{-dt/τ}`, the
//! channel intensities `S_αβ = Σ_k f_αβ(u_βk)` are computed once and frozen for
//! the step, then each target draws `N_e ~ Poisson(S_αe·dt)` and
//! `N_i ~ Poisson(S_αi·dt)` and jumps by `n^{-1/2}(C_αe N_e − C_αi N_i)`.

use rand_distr::{Distribution, Poisson};

use super::{check_inputs, snapshot, Method, SimConfig, SimOutput, Trajectory};
use crate::error::{Error, Result};
use crate::model::{ChannelId, MicroState, NetworkParams, Population};
use crate::par;
use crate::rng::{neuron_index, stream, Domain, StreamRng};

/// Per-step Poisson means above this trigger a warning.
const LARGE_STEP_MEAN: f64 = 50.0;

pub fn simulate_fixed(init: &MicroState, p: &NetworkParams, cfg: &SimConfig) -> Result<SimOutput> {
    check_inputs(init, p, cfg)?;
    let Method::FixedStep { dt } = cfg.method else {
        return Err(Error::InvalidParameter("simulate_fixed needs a fixed-step method".into()));
    };
    let ratio = cfg.record_stride / dt;
    let record_every = ratio.round().max(1.0) as usize;
    if (ratio - record_every as f64).abs() > 1e-6 * ratio.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "record stride {} is not a multiple of dt {dt}",
            cfg.record_stride
        )));
    }
    let n_steps = ((cfg.horizon / dt) - 1e-9).ceil() as usize;

    let mut state = init.clone();
    let t0 = state.t;
    state.sync(t0, p.tau_e, p.tau_i);
    let scale = (p.n as f64).sqrt().recip();

    let mut rngs: [Vec<StreamRng>; 2] = [0, 1].map(|pop| {
        (0..p.n)
            .map(|j| stream(cfg.seed, Domain::FixedTarget, neuron_index(pop, j)))
            .collect()
    });

    let mut traj = Trajectory::default();
    traj.times.push(0.0);
    traj.states.push(snapshot(&state));
    let mut warned = false;

    for step in 0..n_steps {
        let t_start = step as f64 * dt;
        let h = if step + 1 == n_steps { cfg.horizon - t_start } else { dt };

        for pop in Population::ALL {
            let decay = (-h / p.tau(pop)).exp();
            par::for_each(&mut state.u[pop.index()], |u| *u *= decay);
        }

        let mut intensity = [0.0; 4];
        for ch in ChannelId::ALL {
            if p.coupling(ch) > 0.0 {
                let f = p.rate(ch);
                intensity[ch.index()] = par::sum_map(&state.u[ch.source.index()], |&u| f.eval(u));
            }
        }
        let largest = intensity.iter().fold(0.0f64, |a, &s| a.max(s * h));
        if largest > LARGE_STEP_MEAN && !warned {
            log::warn!("per-step Poisson mean {largest:.1} exceeds {LARGE_STEP_MEAN}; consider a smaller dt");
            warned = true;
        }

        for pop in Population::ALL {
            let exc = ChannelId::new(pop, Population::Excitatory);
            let inh = ChannelId::new(pop, Population::Inhibitory);
            let draws = [exc, inh].map(|ch| {
                let mean = intensity[ch.index()] * h;
                (mean > 0.0).then(|| Poisson::new(mean).expect("finite positive mean"))
            });
            let jump_e = p.coupling(exc) * scale;
            let jump_i = p.coupling(inh) * scale;
            let pi = pop.index();
            par::for_each_zip(&mut state.u[pi], &mut rngs[pi], |u, rng| {
                if let Some(d) = &draws[0] {
                    *u += jump_e * d.sample(rng);
                }
                if let Some(d) = &draws[1] {
                    *u -= jump_i * d.sample(rng);
                }
            });
        }

        let t_end = t0 + t_start + h;
        state.t = t_end;
        for s in state.stamp.iter_mut() {
            s.fill(t_end);
        }
        if (step + 1) % record_every == 0 {
            traj.times.push(((step + 1) / record_every) as f64 * cfg.record_stride);
            traj.states.push(snapshot(&state));
        }
    }

    Ok(SimOutput {
        trajectory: traj,
        final_state: state,
    })
}
