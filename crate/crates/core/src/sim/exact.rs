//! Thinning simulator: each channel proposes candidate spikes at the constant rate
//! `n²·C_f` and a candidate from source `k` is kept with probability
//! `f(u_k(t)) / C_f`, which reproduces a Poisson stream on every synapse `(j, k)`
//! with intensity `f(u_k(t))`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{check_inputs, snapshot, SimConfig, SimOutput, SpikeEvent, Trajectory};
use crate::error::Result;
use crate::model::{ChannelId, MicroState, NetworkParams};
use crate::rng::{stream, Domain, StreamRng};

struct ChannelClock {
    channel: ChannelId,
    rate: f64,
    bound: f64,
    jump: f64,
    next: f64,
    rng: StreamRng,
}

impl ChannelClock {
    fn advance(&mut self, from: f64) {
        let gap: f64 = Exp1.sample(&mut self.rng);
        self.next = from + gap / self.rate;
    }
}

pub fn simulate_exact(init: &MicroState, p: &NetworkParams, cfg: &SimConfig) -> Result<SimOutput> {
    simulate_exact_observed(init, p, cfg, |_| {})
}

/// As [`simulate_exact`], calling `observe` for every candidate event in time order.
/// Channels with zero coupling or zero rate bound propose nothing.
pub fn simulate_exact_observed(
    init: &MicroState,
    p: &NetworkParams,
    cfg: &SimConfig,
    mut observe: impl FnMut(&SpikeEvent),
) -> Result<SimOutput> {
    check_inputs(init, p, cfg)?;
    let n = p.n;
    let nf = n as f64;
    let scale = nf.sqrt().recip();

    let mut state = init.clone();
    let t0 = state.t;
    let mut clocks: Vec<ChannelClock> = ChannelId::ALL
        .iter()
        .filter(|&&ch| p.coupling(ch) > 0.0 && p.rate(ch).bound() > 0.0)
        .map(|&ch| {
            let bound = p.rate(ch).bound();
            let mut clock = ChannelClock {
                channel: ch,
                rate: nf * nf * bound,
                bound,
                jump: ch.sign() * p.coupling(ch) * scale,
                next: f64::INFINITY,
                rng: stream(cfg.seed, Domain::ExactChannel, ch.index() as u64),
            };
            clock.advance(t0);
            clock
        })
        .collect();

    let record_times = cfg.record_times();
    let mut traj = Trajectory::default();
    let mut next_record = 0;
    let end = t0 + cfg.horizon;

    while let Some(ci) = (0..clocks.len()).min_by(|&a, &b| clocks[a].next.total_cmp(&clocks[b].next)) {
        let t = clocks[ci].next;
        if t > end {
            break;
        }
        while next_record < record_times.len() && t0 + record_times[next_record] <= t {
            state.sync(t0 + record_times[next_record], p.tau_e, p.tau_i);
            traj.times.push(record_times[next_record]);
            traj.states.push(snapshot(&state));
            next_record += 1;
        }

        let clock = &mut clocks[ci];
        let ch = clock.channel;
        let target = clock.rng.random_range(0..n);
        let source = clock.rng.random_range(0..n);
        let coin: f64 = clock.rng.random();
        let u_src = state.decay_neuron(ch.source, source, t, p.tau(ch.source));
        let accepted = coin * clock.bound < p.rate(ch).eval(u_src);
        if accepted {
            state.decay_neuron(ch.target, target, t, p.tau(ch.target));
            state.u[ch.target.index()][target] += clock.jump;
        }
        observe(&SpikeEvent {
            t,
            channel: ch,
            target,
            accepted,
        });
        clock.advance(t);
    }

    for &r in &record_times[next_record..] {
        state.sync(t0 + r, p.tau_e, p.tau_i);
        traj.times.push(r);
        traj.states.push(snapshot(&state));
    }
    state.sync(end, p.tau_e, p.tau_i);
    Ok(SimOutput {
        trajectory: traj,
        final_state: state,
    })
}
