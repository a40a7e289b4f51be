//! Slot-level simulation of the switch under the frame-based randomized policy.
//!
//! Event order within a slot: service on the scheduled matching, independent
//! decoherence of the remaining entanglements, then entanglement and request
//! arrivals. At every frame boundary the policy re-solves the scheduling LP with
//! the request backlog as weights, decomposes the optimum and then draws one
//! matching per slot from the resulting lottery.

mod drift;
mod streams;

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomposition::{self, DecompositionError, MatchingMixture};
use crate::model::{ArrivalKind, Matching, SwitchInstance};
use crate::scheduler::{self, ScheduleError, Variant};

pub use drift::{
    drift_report, ConditionalDrift, DriftReport, GrowthTest, Verdict, MIN_DRIFT_SAMPLES,
};
pub use streams::{stream, SimStreams};

/// Poisson request arrivals are truncated at this many per slot.
pub const POISSON_CAP: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("frame LP failed at slot {slot}: {source}")]
    Schedule { slot: u64, source: ScheduleError },
    #[error("decomposition failed at slot {slot}: {source}")]
    Decomposition {
        slot: u64,
        source: DecompositionError,
    },
    #[error("need at least {need} post-warmup frames for a drift report, have {have}")]
    InsufficientSamples { need: usize, have: usize },
}

/// Scheduling policy driving a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Re-solve the LP of the given variant at every frame boundary.
    Lp(Variant),
    /// Ignore the queues and sample from a fixed lottery.
    Fixed(MatchingMixture),
}

/// `T_k = max(min_frame, ⌈coefficient · ln(1 + Σ_e R_e(t_k))⌉)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveFrame {
    pub min_frame: usize,
    pub coefficient: f64,
}

impl AdaptiveFrame {
    pub fn frame_length(&self, total_r: u64) -> usize {
        let t = (self.coefficient * (1.0 + total_r as f64).ln()).ceil();
        (t.max(0.0) as usize).max(self.min_frame)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub instance: SwitchInstance,
    pub frame_length: usize,
    pub horizon: u64,
    pub seed: u64,
    pub policy: Policy,
    /// Slots excluded from statistics.
    pub warmup: u64,
    pub adaptive: Option<AdaptiveFrame>,
    /// Starting state; all queues empty when `None`.
    pub initial: Option<SimState>,
    pub record_trace: bool,
}

impl SimConfig {
    pub fn new(
        instance: SwitchInstance,
        policy: Policy,
        frame_length: usize,
        horizon: u64,
        seed: u64,
    ) -> Self {
        SimConfig {
            instance,
            frame_length,
            horizon,
            seed,
            policy,
            warmup: 0,
            adaptive: None,
            initial: None,
            record_trace: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.frame_length < 1 {
            return Err(SimError::Config("frame length must be at least 1".into()));
        }
        if self.horizon < self.frame_length as u64 {
            return Err(SimError::Config(
                "horizon must be at least one frame".into(),
            ));
        }
        if self.warmup >= self.horizon {
            return Err(SimError::Config(
                "warmup must be shorter than the horizon".into(),
            ));
        }
        if let Some(a) = &self.adaptive {
            if a.min_frame < 1 || !(a.coefficient.is_finite() && a.coefficient >= 0.0) {
                return Err(SimError::Config(
                    "adaptive frame needs min_frame ≥ 1 and a finite coefficient ≥ 0".into(),
                ));
            }
        }
        if let Some(s) = &self.initial {
            let g = &self.instance;
            if s.l.len() != g.num_vertices() || s.r.len() != g.num_edges() {
                return Err(SimError::Config("initial state has the wrong shape".into()));
            }
            if s.l.iter().zip(g.nodes()).any(|(&l, n)| l > n.buffer) {
                return Err(SimError::Config(
                    "initial entanglement count exceeds a buffer".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Queue state at the start of slot `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimState {
    /// Stored entanglements per vertex, in `[0, B_v]`.
    pub l: Vec<u32>,
    /// Waiting requests per edge.
    pub r: Vec<u64>,
    pub t: u64,
}

impl SimState {
    pub fn empty(g: &SwitchInstance) -> Self {
        SimState {
            l: vec![0; g.num_vertices()],
            r: vec![0; g.num_edges()],
            t: 0,
        }
    }

    /// `½ Σ_e R_e²`.
    pub fn lyapunov(&self) -> f64 {
        0.5 * self.r.iter().map(|&r| (r as f64) * (r as f64)).sum::<f64>()
    }

    pub fn total_requests(&self) -> u64 {
        self.r.iter().sum()
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub served: Vec<bool>,
    /// Both endpoints nonempty for a scheduled edge, whether or not a request waited.
    pub potential: Vec<bool>,
    pub request_arrivals: Vec<u64>,
    pub entanglement_arrivals: Vec<bool>,
    pub decohered: Vec<u32>,
}

/// Advances `state` by one slot under `matching`.
pub fn step(
    state: &mut SimState,
    matching: &Matching,
    streams: &mut SimStreams,
    g: &SwitchInstance,
) -> SlotOutcome {
    let (nv, ne) = (g.num_vertices(), g.num_edges());
    let mut served = vec![false; ne];
    let mut potential = vec![false; ne];

    for &e in matching.edges() {
        let (u, v) = g.edge(e);
        if state.l[u] > 0 && state.l[v] > 0 {
            potential[e] = true;
            if state.r[e] > 0 {
                served[e] = true;
                state.r[e] -= 1;
                state.l[u] -= 1;
                state.l[v] -= 1;
            }
        }
    }

    let mut decohered = vec![0u32; nv];
    for v in 0..nv {
        let mu = g.node(v).mu;
        let rng = &mut streams.decoherence[v];
        let lost = (0..state.l[v]).filter(|_| rng.random::<f64>() < mu).count() as u32;
        state.l[v] -= lost;
        decohered[v] = lost;
    }

    let mut entanglement_arrivals = vec![false; nv];
    for v in 0..nv {
        let node = g.node(v);
        if streams.vertex_arrival[v].random::<f64>() < node.lambda {
            entanglement_arrivals[v] = true;
            state.l[v] = (state.l[v] + 1).min(node.buffer);
        }
    }

    let mut request_arrivals = vec![0u64; ne];
    for e in 0..ne {
        let d = g.demand(e);
        let rng = &mut streams.edge_arrival[e];
        let a = match d.arrival_kind {
            ArrivalKind::Bernoulli => u64::from(rng.random::<f64>() < d.nu),
            ArrivalKind::Poisson => {
                if d.nu > 0.0 {
                    let k: f64 = Poisson::new(d.nu).expect("nu validated").sample(rng);
                    (k as u64).min(POISSON_CAP)
                } else {
                    0
                }
            }
        };
        state.r[e] += a;
        request_arrivals[e] = a;
    }

    state.t += 1;
    SlotOutcome {
        served,
        potential,
        request_arrivals,
        entanglement_arrivals,
        decohered,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub start: u64,
    pub length: usize,
    pub lyapunov_start: f64,
    pub total_r_start: u64,
    /// `None` when the horizon cut the frame short.
    pub lyapunov_end: Option<f64>,
}

/// Trace row: state at the start of slot `t` and what the slot did.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub l: Vec<u32>,
    pub r: Vec<u64>,
    pub matching: Matching,
    pub served: Vec<bool>,
    pub potential: Vec<bool>,
}

/// Statistics over post-warmup slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub vertices: Vec<String>,
    pub edges: Vec<String>,
    pub warmup: u64,
    pub horizon: u64,
    pub slots: u64,
    pub served: Vec<u64>,
    pub potential: Vec<u64>,
    pub arrivals: Vec<u64>,
    pub scheduled: Vec<u64>,
    /// Request backlog when measurement started.
    pub r_at_warmup: Vec<u64>,
    pub mean_r: Vec<f64>,
    pub max_r: Vec<u64>,
    pub mean_total_r: f64,
    pub max_total_r_first_half: u64,
    pub max_total_r_second_half: u64,
    pub vertex_nonempty: Vec<u64>,
    pub vertex_empty_fraction: Vec<f64>,
    pub edge_both_nonempty: Vec<u64>,
    pub frames: Vec<FrameRecord>,
    pub lp_solves: u64,
    pub final_state: SimState,
}

impl SimStats {
    /// `V((k+1)T) − V(kT)` for complete frames starting after warmup.
    pub fn drift_samples(&self) -> Vec<f64> {
        self.measured_frames()
            .map(|f| f.lyapunov_end.unwrap() - f.lyapunov_start)
            .collect()
    }

    pub fn measured_frames(&self) -> impl Iterator<Item = &FrameRecord> {
        self.frames
            .iter()
            .filter(move |f| f.start >= self.warmup && f.lyapunov_end.is_some())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub stats: SimStats,
    pub trace: Option<Vec<TraceRow>>,
}

fn frame_mixture(config: &SimConfig, state: &SimState) -> Result<MatchingMixture, SimError> {
    match &config.policy {
        Policy::Fixed(mix) => Ok(mix.clone()),
        Policy::Lp(variant) => {
            let g = &config.instance;
            let weights: Vec<f64> = state.r.iter().map(|&r| r as f64).collect();
            let sol = scheduler::solve_variant(*variant, g, &weights).map_err(|source| {
                SimError::Schedule {
                    slot: state.t,
                    source,
                }
            })?;
            decomposition::decompose(g, &sol.x).map_err(|source| SimError::Decomposition {
                slot: state.t,
                source,
            })
        }
    }
}

/// Runs one replica. Identical configs give identical output.
pub fn run(config: &SimConfig) -> Result<SimOutput, SimError> {
    config.validate()?;
    let g = &config.instance;
    let (nv, ne) = (g.num_vertices(), g.num_edges());
    let mut streams = SimStreams::new(config.seed, g);
    let mut state = config.initial.clone().unwrap_or_else(|| SimState::empty(g));
    let start_t = state.t;
    let end_t = start_t + config.horizon;
    let warm_t = start_t + config.warmup;
    let mid_t = warm_t + (end_t - warm_t) / 2;

    let mut served = vec![0u64; ne];
    let mut potential = vec![0u64; ne];
    let mut arrivals = vec![0u64; ne];
    let mut scheduled = vec![0u64; ne];
    let mut sum_r = vec![0u128; ne];
    let mut max_r = vec![0u64; ne];
    let mut max_total = [0u64; 2];
    let mut vertex_nonempty = vec![0u64; nv];
    let mut both = vec![0u64; ne];
    let mut r_at_warmup = state.r.clone();
    let mut frames = Vec::new();
    let mut lp_solves = 0u64;
    let mut trace = config.record_trace.then(Vec::new);

    while state.t < end_t {
        let length = match &config.adaptive {
            Some(a) => a.frame_length(state.total_requests()),
            None => config.frame_length,
        };
        let mixture = frame_mixture(config, &state)?;
        if matches!(config.policy, Policy::Lp(_)) {
            lp_solves += 1;
        }
        let mut frame = FrameRecord {
            start: state.t - start_t,
            length,
            lyapunov_start: state.lyapunov(),
            total_r_start: state.total_requests(),
            lyapunov_end: None,
        };
        let mut done = 0;
        while done < length && state.t < end_t {
            if state.t == warm_t {
                r_at_warmup.clone_from(&state.r);
            }
            let measured = state.t >= warm_t;
            if measured {
                let total = state.total_requests();
                let half = usize::from(state.t >= mid_t);
                max_total[half] = max_total[half].max(total);
                for e in 0..ne {
                    sum_r[e] += u128::from(state.r[e]);
                    max_r[e] = max_r[e].max(state.r[e]);
                    let (u, v) = g.edge(e);
                    if state.l[u] > 0 && state.l[v] > 0 {
                        both[e] += 1;
                    }
                }
                for v in 0..nv {
                    if state.l[v] > 0 {
                        vertex_nonempty[v] += 1;
                    }
                }
            }
            let m = decomposition::sample_matching(&mixture, &mut streams.schedule).clone();
            let before = trace
                .as_ref()
                .map(|_| (state.t, state.l.clone(), state.r.clone()));
            let out = step(&mut state, &m, &mut streams, g);
            if measured {
                for &e in m.edges() {
                    scheduled[e] += 1;
                }
                for e in 0..ne {
                    served[e] += u64::from(out.served[e]);
                    potential[e] += u64::from(out.potential[e]);
                    arrivals[e] += out.request_arrivals[e];
                }
            }
            if let (Some(rows), Some((t, l, r))) = (trace.as_mut(), before) {
                rows.push(TraceRow {
                    t,
                    l,
                    r,
                    matching: m,
                    served: out.served,
                    potential: out.potential,
                });
            }
            done += 1;
        }
        if done == length {
            frame.lyapunov_end = Some(state.lyapunov());
        }
        frames.push(frame);
    }

    let slots = config.horizon - config.warmup;
    let sf = slots as f64;
    let stats = SimStats {
        vertices: g.vertex_ids().to_vec(),
        edges: (0..ne).map(|e| g.edge_label(e)).collect(),
        warmup: config.warmup,
        horizon: config.horizon,
        slots,
        served,
        potential,
        arrivals,
        scheduled,
        r_at_warmup,
        mean_r: sum_r.iter().map(|&s| s as f64 / sf).collect(),
        mean_total_r: sum_r.iter().sum::<u128>() as f64 / sf,
        max_r,
        max_total_r_first_half: max_total[0],
        max_total_r_second_half: max_total[1],
        vertex_empty_fraction: vertex_nonempty
            .iter()
            .map(|&c| 1.0 - c as f64 / sf)
            .collect(),
        vertex_nonempty,
        edge_both_nonempty: both,
        frames,
        lp_solves,
        final_state: state,
    };
    Ok(SimOutput { stats, trace })
}

/// Writes a trace as CSV: `t, L_<v>…, R_<e>…, matching, S_<e>…, Shat_<e>…`.
pub fn write_trace_csv<W: Write>(
    g: &SwitchInstance,
    rows: &[TraceRow],
    out: W,
) -> Result<(), crate::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(g.vertex_ids().iter().map(|v| format!("L_{v}")));
    let labels: Vec<String> = (0..g.num_edges()).map(|e| g.edge_label(e)).collect();
    header.extend(labels.iter().map(|e| format!("R_{e}")));
    header.push("matching".into());
    header.extend(labels.iter().map(|e| format!("S_{e}")));
    header.extend(labels.iter().map(|e| format!("Shat_{e}")));
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.t.to_string()];
        rec.extend(row.l.iter().map(u32::to_string));
        rec.extend(row.r.iter().map(u64::to_string));
        rec.push(
            row.matching
                .edges()
                .iter()
                .map(|&e| labels[e].as_str())
                .collect::<Vec<_>>()
                .join(";"),
        );
        rec.extend(row.served.iter().map(|&b| u8::from(b).to_string()));
        rec.extend(row.potential.iter().map(|&b| u8::from(b).to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
