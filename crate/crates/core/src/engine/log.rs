//! Simulation log: decimated time series, raw-rate audit counters and the
//! row-based reports derived from them.

use serde::Serialize;

use crate::graph::GainReport;
use crate::ppf::{self, TransformConfig, TransformVariant};

/// Immutable description of what the rows contain.
#[derive(Debug, Clone)]
pub struct LogMeta {
    pub scenario: String,
    pub agents: usize,
    pub node_dim: usize,
    pub variant: TransformVariant,
    /// Transform per agent per channel, for row-based auditing.
    pub transforms: Vec<Vec<TransformConfig>>,
    /// Smallest singular value of L+B, for the leader-distance bound.
    pub sigma_min_lb: f64,
    pub step: f64,
    pub decimate: usize,
    pub seed: u64,
}

/// One decimated sample. All per-channel vectors are stacked agent-major:
/// index `agent * node_dim + channel`.
#[derive(Debug, Clone)]
pub struct LogRow {
    pub t: f64,
    pub states: Vec<f64>,
    pub controls: Vec<f64>,
    pub errors: Vec<f64>,
    pub eps: Vec<f64>,
    pub rho: Vec<f64>,
    /// Frobenius norm of each agent's weight estimate.
    pub weight_norms: Vec<f64>,
}

/// Rising-edge events recorded at raw step rate. Agents and channels are
/// 1-indexed to match the CSV headers.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimEvent {
    Clamp { t: f64, agent: usize, channel: usize, ratio: f64 },
    EnvelopeViolation { t: f64, agent: usize, channel: usize, ratio: f64 },
    NonFiniteState { t: f64 },
    StateBound { t: f64, max_abs: f64 },
}

/// Raw-rate run summary. Counters are accumulated every integrator step,
/// independent of the logging decimation.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub final_time: f64,
    pub final_error_norm: f64,
    /// max_t of each agent's weight norm.
    pub max_weight_norms: Vec<f64>,
    /// Total variation of each control channel.
    pub control_total_variation: Vec<f64>,
    /// Steps on which each channel sat outside its envelope.
    pub envelope_violation_steps: Vec<usize>,
    /// Steps on which each channel's ratio was clamped.
    pub clamp_steps: Vec<usize>,
    pub first_violation_time: Vec<Option<f64>>,
    pub min_margin: Vec<f64>,
    /// Steps on which the leader-distance bound failed (expected 0).
    pub eq8_violations: usize,
    pub aborted: bool,
}

impl Summary {
    pub(crate) fn new(channels: usize, agents: usize) -> Self {
        Self {
            final_time: 0.0,
            final_error_norm: 0.0,
            max_weight_norms: vec![0.0; agents],
            control_total_variation: vec![0.0; channels],
            envelope_violation_steps: vec![0; channels],
            clamp_steps: vec![0; channels],
            first_violation_time: vec![None; channels],
            min_margin: vec![f64::INFINITY; channels],
            eq8_violations: 0,
            aborted: false,
        }
    }

    pub fn total_violations(&self) -> usize {
        self.envelope_violation_steps.iter().sum()
    }
}

/// Full record of one scenario run.
#[derive(Debug, Clone)]
pub struct SimLog {
    pub meta: LogMeta,
    pub gain_report: GainReport,
    pub rows: Vec<LogRow>,
    pub events: Vec<SimEvent>,
    pub summary: Summary,
}

impl SimLog {
    pub fn channels(&self) -> usize {
        self.meta.agents * self.meta.node_dim
    }

    fn transform_for(&self, channel: usize) -> &TransformConfig {
        &self.meta.transforms[channel / self.meta.node_dim][channel % self.meta.node_dim]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelAudit {
    pub agent: usize,
    pub channel: usize,
    pub violations: usize,
    pub clamps: usize,
    pub first_violation: Option<f64>,
    pub min_margin: f64,
}

/// Row-based envelope audit.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub channels: Vec<ChannelAudit>,
    pub total_violations: usize,
    pub total_clamps: usize,
}

/// Scans the logged rows for envelope violations and clamp engagements.
///
/// Works on any complete log, including synthetic ones; note that with
/// decimated logging this sees only the logged instants, while
/// [`Summary`] counts at raw step rate.
pub fn envelope_audit(log: &SimLog) -> AuditReport {
    let channels = log.channels();
    let dim = log.meta.node_dim;
    let mut audits: Vec<ChannelAudit> = (0..channels)
        .map(|c| ChannelAudit {
            agent: c / dim + 1,
            channel: c % dim + 1,
            violations: 0,
            clamps: 0,
            first_violation: None,
            min_margin: f64::INFINITY,
        })
        .collect();
    for row in &log.rows {
        for c in 0..channels {
            let tc = log.transform_for(c);
            let status = ppf::check_envelope(row.errors[c], row.rho[c], tc)
                .expect("logged rho values are positive");
            let audit = &mut audits[c];
            if !status.inside {
                audit.violations += 1;
                audit.first_violation.get_or_insert(row.t);
            }
            if status.clamped {
                audit.clamps += 1;
            }
            audit.min_margin = audit.min_margin.min(status.margin);
        }
    }
    AuditReport {
        total_violations: audits.iter().map(|a| a.violations).sum(),
        total_clamps: audits.iter().map(|a| a.clamps).sum(),
        channels: audits,
    }
}

/// Total variation of each logged control channel,
/// `TV(u) = sum_k |u(t_{k+1}) - u(t_k)|`.
pub fn chattering_metric(log: &SimLog) -> Vec<f64> {
    let channels = log.channels();
    let mut tv = vec![0.0; channels];
    for pair in log.rows.windows(2) {
        for c in 0..channels {
            tv[c] += (pair[1].controls[c] - pair[0].controls[c]).abs();
        }
    }
    tv
}
