//! Fixed-step simulation of the coupled agent/weight system.
//!
//! The integrator state stacks all agent states followed by all weight
//! matrices (column-major per agent), so states and weight estimates advance
//! through the same classical RK4 scheme. Disturbance amplitudes are
//! sample-and-hold: they refresh at step boundaries and stay constant across
//! the four stage evaluations of a step.
//!
//! Runs are deterministic for a fixed config and seed. Numeric blow-ups do
//! not panic or error; they terminate the run early with a recorded event
//! and an `aborted` summary flag.

pub mod log;
mod output;

pub use log::{
    chattering_metric, envelope_audit, AuditReport, ChannelAudit, LogMeta, LogRow, SimEvent,
    SimLog, Summary,
};
pub use output::write_outputs;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::controller::{AgentRuntime, AgentStep, ControlError, NeighborState};
use crate::graph::{gain_check, lemma1_pq, min_singular_value, GainReport, GraphError};
use crate::plants::{LeaderSpec, PlantError, PlantSuite, SampleHold};
use crate::scenario::{ScenarioConfig, ScenarioError};

/// Agent states larger than this abort the run as a numeric blow-up.
pub const STATE_ABORT_BOUND: f64 = 1e9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ScenarioError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },
}

/// One classical 4th-order Runge-Kutta step over the augmented state.
///
/// Every stage output is checked for finiteness; a non-finite stage aborts
/// the step with [`SimError::NonFinite`] so the caller can record the event.
pub fn rk4_step<F>(f: &mut F, z: &DVector<f64>, t: f64, h: f64) -> Result<DVector<f64>, SimError>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, SimError>,
{
    let check = |k: DVector<f64>, t: f64| {
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(SimError::NonFinite { t })
        }
    };
    let k1 = check(f(t, z)?, t)?;
    let k2 = check(f(t + 0.5 * h, &(z + &k1 * (0.5 * h)))?, t)?;
    let k3 = check(f(t + 0.5 * h, &(z + &k2 * (0.5 * h)))?, t)?;
    let k4 = check(f(t + h, &(z + &k3 * h))?, t)?;
    Ok(z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Scenario wired for integration: graph analysis done, per-agent runtimes
/// built, gain report computed.
pub(crate) struct BuiltScenario {
    agents: usize,
    dim: usize,
    neurons: usize,
    plant: PlantSuite,
    leader: LeaderSpec,
    runtimes: Vec<AgentRuntime>,
    neighbors: Vec<Vec<(usize, f64)>>,
    sigma_min_lb: f64,
    gain_report: GainReport,
}

impl BuiltScenario {
    pub(crate) fn build(cfg: &ScenarioConfig) -> Result<Self, SimError> {
        let agents = cfg.plant.node_count();
        let dim = cfg.plant.node_dim();
        let lemma = lemma1_pq(&cfg.graph, None)?;
        let gain_report = gain_check(
            &cfg.graph,
            cfg.gains.c,
            cfg.gains.k,
            cfg.basis.phi_bound(),
            None,
            cfg.bounds.as_ref(),
        )?;
        let sigma_min_lb = min_singular_value(&cfg.graph.coupling())?;
        let degrees = cfg.graph.in_degrees();
        let runtimes = (0..agents)
            .map(|i| {
                Ok(AgentRuntime {
                    index: i,
                    p: lemma.p[i],
                    d: degrees[i],
                    b: cfg.graph.pinning()[i],
                    c: cfg.gains.c,
                    funnels: cfg.funnels[i].clone(),
                    transforms: cfg.transforms[i].clone(),
                    net: crate::approximator::AdaptiveNetwork::zeroed(
                        cfg.basis.clone(),
                        dim,
                        cfg.gains.pi,
                        cfg.gains.k,
                    )?,
                })
            })
            .collect::<Result<Vec<_>, ControlError>>()?;
        let neighbors = (0..agents).map(|i| cfg.graph.neighbors(i)).collect();
        Ok(Self {
            agents,
            dim,
            neurons: cfg.basis.neuron_count(),
            plant: cfg.plant.clone(),
            leader: cfg.leader.clone(),
            runtimes,
            neighbors,
            sigma_min_lb,
            gain_report,
        })
    }

    fn state_len(&self) -> usize {
        self.agents * self.dim + self.agents * self.neurons * self.dim
    }

    fn weight_offset(&self, agent: usize) -> usize {
        self.agents * self.dim + agent * self.neurons * self.dim
    }

    fn initial_state(&self, cfg: &ScenarioConfig) -> DVector<f64> {
        let mut z = DVector::zeros(self.state_len());
        for (i, x) in cfg.initial.iter().enumerate() {
            for k in 0..self.dim {
                z[i * self.dim + k] = x[k];
            }
        }
        // weights start at zero, the neutral estimate
        z
    }

    fn unpack(&self, z: &DVector<f64>) -> (Vec<DVector<f64>>, Vec<DMatrix<f64>>) {
        let zs = z.as_slice();
        let states = (0..self.agents)
            .map(|i| DVector::from_column_slice(&zs[i * self.dim..(i + 1) * self.dim]))
            .collect();
        let weights = (0..self.agents)
            .map(|i| {
                let off = self.weight_offset(i);
                DMatrix::from_column_slice(
                    self.neurons,
                    self.dim,
                    &zs[off..off + self.neurons * self.dim],
                )
            })
            .collect();
        (states, weights)
    }

    /// Runs every agent's control step against a consistent snapshot of the
    /// augmented state.
    fn evaluate(&self, t: f64, z: &DVector<f64>) -> Result<Vec<AgentStep>, SimError> {
        let (states, weights) = self.unpack(z);
        let (x0, _) = self.leader.state(t);
        let mut out = Vec::with_capacity(self.agents);
        for i in 0..self.agents {
            let neighbors: Vec<NeighborState<'_>> = self.neighbors[i]
                .iter()
                .map(|&(j, w)| NeighborState { index: j, state: &states[j], weight: w })
                .collect();
            out.push(self.runtimes[i].step(&states[i], &weights[i], &neighbors, &x0, t)?);
        }
        Ok(out)
    }

    /// Time derivative of the augmented state under held disturbances.
    fn derivative(&self, t: f64, z: &DVector<f64>, noise: &[f64]) -> Result<DVector<f64>, SimError> {
        let steps = self.evaluate(t, z)?;
        let (states, _) = self.unpack(z);
        let mut dz = DVector::zeros(z.len());
        for i in 0..self.agents {
            let dx = self.plant.dynamics(i, &states[i], &steps[i].u, t, noise[i])?;
            for k in 0..self.dim {
                dz[i * self.dim + k] = dx[k];
            }
            let off = self.weight_offset(i);
            dz.as_mut_slice()[off..off + self.neurons * self.dim]
                .copy_from_slice(steps[i].weight_dot.as_slice());
        }
        Ok(dz)
    }
}

/// Integrates a validated scenario from 0 to the horizon.
///
/// Returns the full log; numeric blow-ups set `summary.aborted` instead of
/// erroring so partial results stay inspectable.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimLog, SimError> {
    cfg.validate()?;
    let bs = BuiltScenario::build(cfg)?;
    let h = cfg.sim.step;
    let steps = (cfg.sim.horizon / h).round().max(1.0) as usize;
    let channels = bs.agents * bs.dim;

    let mut sampler = SampleHold::new(cfg.sim.seed, bs.agents, cfg.sim.disturbance_hold);
    let mut z = bs.initial_state(cfg);
    let mut log = SimLog {
        meta: LogMeta {
            scenario: cfg.name.clone(),
            agents: bs.agents,
            node_dim: bs.dim,
            variant: cfg.transforms[0][0].variant,
            transforms: cfg.transforms.clone(),
            sigma_min_lb: bs.sigma_min_lb,
            step: h,
            decimate: cfg.sim.decimate,
            seed: cfg.sim.seed,
        },
        gain_report: bs.gain_report.clone(),
        rows: Vec::with_capacity(steps / cfg.sim.decimate + 2),
        events: Vec::new(),
        summary: Summary::new(channels, bs.agents),
    };
    let mut prev_u: Option<Vec<f64>> = None;
    let mut prev_inside = vec![true; channels];
    let mut prev_clamped = vec![false; channels];

    for k in 0..=steps {
        let t = k as f64 * h;
        sampler.advance_to(t);
        let noise = sampler.values().to_vec();
        let diag = bs.evaluate(t, &z)?;

        record_raw(&bs, &mut log, t, &z, &diag, &mut prev_u, &mut prev_inside, &mut prev_clamped);
        if k % cfg.sim.decimate == 0 || k == steps {
            log.rows.push(make_row(&bs, t, &z, &diag));
        }
        log.summary.final_time = t;
        log.summary.final_error_norm = stacked_norm(&diag, bs.dim, |s, c| s.error[c]);
        if k == steps {
            break;
        }

        match rk4_step(&mut |tt, zz| bs.derivative(tt, zz, &noise), &z, t, h) {
            Ok(next) => {
                if next.iter().any(|v| !v.is_finite()) {
                    log.events.push(SimEvent::NonFiniteState { t: t + h });
                    log.summary.aborted = true;
                    break;
                }
                let max_abs = (0..bs.agents * bs.dim)
                    .map(|i| next[i].abs())
                    .fold(0.0, f64::max);
                if max_abs > STATE_ABORT_BOUND {
                    log.events.push(SimEvent::StateBound { t: t + h, max_abs });
                    log.summary.aborted = true;
                    break;
                }
                z = next;
            }
            Err(SimError::NonFinite { t }) => {
                log.events.push(SimEvent::NonFiniteState { t });
                log.summary.aborted = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(log)
}

fn stacked_norm(diag: &[AgentStep], dim: usize, f: impl Fn(&AgentStep, usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for s in diag {
        for c in 0..dim {
            let v = f(s, c);
            acc += v * v;
        }
    }
    acc.sqrt()
}

fn make_row(bs: &BuiltScenario, t: f64, z: &DVector<f64>, diag: &[AgentStep]) -> LogRow {
    let dim = bs.dim;
    let flat = |f: &dyn Fn(&AgentStep, usize) -> f64| -> Vec<f64> {
        diag.iter().flat_map(|s| (0..dim).map(move |c| f(s, c))).collect()
    };
    let (_, weights) = bs.unpack(z);
    LogRow {
        t,
        states: z.as_slice()[..bs.agents * dim].to_vec(),
        controls: flat(&|s, c| s.u[c]),
        errors: flat(&|s, c| s.error[c]),
        eps: flat(&|s, c| s.eps[c]),
        rho: flat(&|s, c| s.rho[c]),
        weight_norms: weights.iter().map(|w| w.norm()).collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn record_raw(
    bs: &BuiltScenario,
    log: &mut SimLog,
    t: f64,
    z: &DVector<f64>,
    diag: &[AgentStep],
    prev_u: &mut Option<Vec<f64>>,
    prev_inside: &mut [bool],
    prev_clamped: &mut [bool],
) {
    let dim = bs.dim;
    for (i, step) in diag.iter().enumerate() {
        for k in 0..dim {
            let c = i * dim + k;
            let env = &step.envelope[k];
            if !env.inside {
                log.summary.envelope_violation_steps[c] += 1;
                log.summary.first_violation_time[c].get_or_insert(t);
                if prev_inside[c] {
                    log.events.push(SimEvent::EnvelopeViolation {
                        t,
                        agent: i + 1,
                        channel: k + 1,
                        ratio: env.ratio,
                    });
                }
            }
            if env.clamped {
                log.summary.clamp_steps[c] += 1;
                if !prev_clamped[c] {
                    log.events.push(SimEvent::Clamp {
                        t,
                        agent: i + 1,
                        channel: k + 1,
                        ratio: env.ratio,
                    });
                }
            }
            log.summary.min_margin[c] = log.summary.min_margin[c].min(env.margin);
            prev_inside[c] = env.inside;
            prev_clamped[c] = env.clamped;
        }
    }

    let u_now: Vec<f64> = diag
        .iter()
        .flat_map(|s| (0..dim).map(move |c| s.u[c]))
        .collect();
    if let Some(prev) = prev_u.as_ref() {
        for c in 0..u_now.len() {
            log.summary.control_total_variation[c] += (u_now[c] - prev[c]).abs();
        }
    }
    *prev_u = Some(u_now);

    let (states, weights) = bs.unpack(z);
    for (i, w) in weights.iter().enumerate() {
        let norm = w.norm();
        if norm > log.summary.max_weight_norms[i] {
            log.summary.max_weight_norms[i] = norm;
        }
    }

    // leader-distance bound ||1 (x) x0 - x|| <= ||e|| / sigma_min(L+B)
    let (x0, _) = bs.leader.state(t);
    let dist: f64 = states
        .iter()
        .map(|x| (x - &x0).norm_squared())
        .sum::<f64>()
        .sqrt();
    let e_norm = stacked_norm(diag, dim, |s, c| s.error[c]);
    if dist > e_norm / bs.sigma_min_lb + 1e-9 {
        log.summary.eq8_violations += 1;
    }
}
