//! Scenario configuration: the TOML schema, validation and shipped presets.
//!
//! Files are 1-indexed (nodes, agents) and human-editable; everything is
//! validated into typed structures at load, including the requirement that
//! every initial synchronization error already sits inside its envelope at
//! t = 0.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Deserialize;
use thiserror::Error;

use crate::approximator::{ApproxError, BasisKind, BasisSpec};
use crate::controller::{self, ControlError};
use crate::graph::{BoundInputs, Digraph, GraphError};
use crate::plants::{LeaderSpec, PlantSuite};
use crate::ppf::{
    self, PerformanceFunction, PpfError, TransformConfig, TransformVariant, DEFAULT_CLAMP_MARGIN,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read '{path}': {message}")]
    Read { path: String, message: String },
    #[error("'{input}' is neither a readable file nor a preset (presets: {known})")]
    UnknownScenario { input: String, known: String },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ppf(#[from] PpfError),
    #[error(transparent)]
    Basis(#[from] ApproxError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("initial.states: agent {agent} channel {channel}: error {error:.6} at t=0 violates the envelope (allowed ({lo:.6}, {hi:.6})·rho0)")]
    InitialEnvelope { agent: usize, channel: usize, error: f64, lo: f64, hi: f64 },
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), message: message.into() }
}

/// Control gains shared by all agents.
#[derive(Debug, Clone, Copy)]
pub struct Gains {
    pub c: f64,
    pub k: f64,
    pub pi: f64,
}

/// Integrator and logging parameters.
#[derive(Debug, Clone)]
pub struct SimParams {
    /// Fixed integrator step, seconds.
    pub step: f64,
    /// Simulation horizon, seconds.
    pub horizon: f64,
    pub seed: u64,
    /// Log every `decimate`-th step (1 = raw rate).
    pub decimate: usize,
    /// Disturbance sample-and-hold interval, seconds.
    pub disturbance_hold: f64,
    pub out_dir: Option<PathBuf>,
}

/// Fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub plant: PlantSuite,
    pub graph: Digraph,
    pub leader: LeaderSpec,
    /// Initial agent states, one vector per agent.
    pub initial: Vec<DVector<f64>>,
    /// Funnel per agent per output channel.
    pub funnels: Vec<Vec<PerformanceFunction>>,
    /// Transform per agent per output channel.
    pub transforms: Vec<Vec<TransformConfig>>,
    pub gains: Gains,
    pub basis: BasisSpec,
    pub sim: SimParams,
    pub bounds: Option<BoundInputs>,
}

impl ScenarioConfig {
    /// Structural validation for configs assembled programmatically; TOML
    /// loading runs this too. Checks dimensional coherence, gain and timing
    /// sanity, the graph preconditions and the t = 0 envelope requirement.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let agents = self.plant.node_count();
        let dim = self.plant.node_dim();
        if self.graph.node_count() != agents {
            return Err(invalid(
                "graph",
                format!(
                    "{} nodes but plant '{}' has {agents}",
                    self.graph.node_count(),
                    self.plant.name()
                ),
            ));
        }
        if self.leader.dim() != dim {
            return Err(invalid(
                "leader",
                format!("dimension {} but plant outputs have dimension {dim}", self.leader.dim()),
            ));
        }
        if self.initial.len() != agents || self.initial.iter().any(|x| x.len() != dim) {
            return Err(invalid("initial.states", format!("expected {agents} rows of {dim} values")));
        }
        if self.initial.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
            return Err(invalid("initial.states", "states must be finite"));
        }
        if self.funnels.len() != agents || self.funnels.iter().any(|r| r.len() != dim) {
            return Err(invalid("funnel", format!("expected {agents}x{dim} funnels")));
        }
        if self.transforms.len() != agents || self.transforms.iter().any(|r| r.len() != dim) {
            return Err(invalid("transform", format!("expected {agents}x{dim} transforms")));
        }
        for (name, v) in [("gains.c", self.gains.c), ("gains.k", self.gains.k), ("gains.pi", self.gains.pi)]
        {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.basis.input_dim() != dim {
            return Err(invalid(
                "basis",
                format!("input dimension {} but plant outputs have dimension {dim}", self.basis.input_dim()),
            ));
        }
        if !(self.sim.step > 0.0) || !self.sim.step.is_finite() {
            return Err(invalid("sim.step", format!("must be positive, got {}", self.sim.step)));
        }
        if !(self.sim.horizon > self.sim.step) {
            return Err(invalid(
                "sim.horizon",
                format!("must exceed the step ({}), got {}", self.sim.step, self.sim.horizon),
            ));
        }
        if self.sim.decimate == 0 {
            return Err(invalid("sim.decimate", "must be at least 1"));
        }
        if !(self.sim.disturbance_hold > 0.0) {
            return Err(invalid(
                "sim.disturbance_hold",
                format!("must be positive, got {}", self.sim.disturbance_hold),
            ));
        }
        if !self.graph.is_strongly_connected() {
            return Err(GraphError::NotStronglyConnected.into());
        }
        if !self.graph.has_pinned_node() {
            return Err(GraphError::NoPinnedNode.into());
        }
        if let Some(b) = &self.bounds {
            b.validate()
                .map_err(|_| invalid("bounds", "all bound constants must be positive"))?;
        }
        check_initial_envelope(self)
    }
}

/// Command-line style overrides applied before validation.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub transform: Option<TransformVariant>,
    pub decimate: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

// ---------------------------------------------------------------- raw schema

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScalarOrVec {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl ScalarOrVec {
    fn resolve(&self, dim: usize, field: &str) -> Result<Vec<f64>, ScenarioError> {
        match self {
            ScalarOrVec::Scalar(v) => Ok(vec![*v; dim]),
            ScalarOrVec::Vector(v) if v.len() == dim => Ok(v.clone()),
            ScalarOrVec::Vector(v) => {
                Err(invalid(field, format!("expected {dim} entries, got {}", v.len())))
            }
        }
    }
}

/// A parameter that may be uniform, per-agent, or per-agent-per-output.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PerChannelSpec {
    Uniform(f64),
    PerAgent(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl PerChannelSpec {
    fn resolve(
        &self,
        agents: usize,
        channels: usize,
        field: &str,
    ) -> Result<Vec<Vec<f64>>, ScenarioError> {
        match self {
            PerChannelSpec::Uniform(v) => Ok(vec![vec![*v; channels]; agents]),
            PerChannelSpec::PerAgent(v) => {
                if v.len() != agents {
                    return Err(invalid(
                        field,
                        format!("expected one value per agent ({agents}), got {}", v.len()),
                    ));
                }
                Ok(v.iter().map(|&x| vec![x; channels]).collect())
            }
            PerChannelSpec::Full(rows) => {
                if rows.len() != agents || rows.iter().any(|r| r.len() != channels) {
                    return Err(invalid(
                        field,
                        format!("expected a {agents}x{channels} table of values"),
                    ));
                }
                Ok(rows.clone())
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    plant: String,
    graph: RawGraph,
    leader: RawLeader,
    initial: RawInitial,
    funnel: RawFunnel,
    transform: RawTransform,
    gains: RawGains,
    basis: RawBasis,
    sim: RawSim,
    bounds: Option<RawBounds>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    nodes: Option<usize>,
    /// `[from, to, weight]` triples, 1-indexed, information flowing from -> to.
    edges: Vec<(usize, usize, f64)>,
    /// node (1-indexed, as a string key) -> leader edge gain
    pinning: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLeader {
    kind: String,
    value: Option<ScalarOrVec>,
    amplitude: Option<ScalarOrVec>,
    frequency: Option<ScalarOrVec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    states: StatesSpec,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum StatesSpec {
    Flat(Vec<f64>),
    Nested(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFunnel {
    rho0: PerChannelSpec,
    rho_inf: PerChannelSpec,
    ell: PerChannelSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransform {
    variant: TransformVariant,
    delta_bar: PerChannelSpec,
    delta_under: PerChannelSpec,
    xi: f64,
    clamp_margin: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    c: f64,
    k: f64,
    pi: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBasis {
    kind: BasisKind,
    neurons: usize,
    range: [f64; 2],
    width: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    step: f64,
    horizon: f64,
    seed: u64,
    decimate: Option<usize>,
    disturbance_hold: Option<f64>,
    out_dir: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    alpha_m: f64,
    w_m: f64,
    f_m: f64,
    w_ideal_m: f64,
    delta_bar: Option<f64>,
    sigma_max_lambda: f64,
}

// ------------------------------------------------------------------- presets

const PRESET_EXAMPLE1: &str = include_str!("../presets/example1.toml");
const PRESET_EXAMPLE1_CONSTANT: &str = include_str!("../presets/example1-constant.toml");
const PRESET_EXAMPLE2: &str = include_str!("../presets/example2.toml");

/// Shipped presets as `(name, description, toml)` triples.
pub fn presets() -> &'static [(&'static str, &'static str, &'static str)] {
    &[
        (
            "example1",
            "5 heterogeneous scalar nodes, sinusoid leader 2cos(0.8t), sign transform",
            PRESET_EXAMPLE1,
        ),
        (
            "example1-constant",
            "example1 topology with the constant leader x0 = 2",
            PRESET_EXAMPLE1_CONSTANT,
        ),
        (
            "example2",
            "5 MIMO nodes (3 outputs each), constant leader [1.5, 2.7, 3.5], erf transform",
            PRESET_EXAMPLE2,
        ),
    ]
}

pub fn preset_toml(name: &str) -> Option<&'static str> {
    presets().iter().find(|(n, _, _)| *n == name).map(|(_, _, t)| *t)
}

/// Loads a scenario from a file path or, failing that, a preset name.
pub fn load_scenario(input: &str, overrides: &Overrides) -> Result<ScenarioConfig, ScenarioError> {
    let path = Path::new(input);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Read {
            path: input.to_string(),
            message: e.to_string(),
        })?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        return load_scenario_str(&text, stem, overrides);
    }
    if let Some(toml) = preset_toml(input) {
        return load_scenario_str(toml, input, overrides);
    }
    Err(ScenarioError::UnknownScenario {
        input: input.to_string(),
        known: presets().iter().map(|(n, _, _)| *n).collect::<Vec<_>>().join(", "),
    })
}

/// Parses and validates a scenario from TOML text.
pub fn load_scenario_str(
    text: &str,
    default_name: &str,
    overrides: &Overrides,
) -> Result<ScenarioConfig, ScenarioError> {
    let raw: RawScenario =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    build(raw, default_name, overrides)
}

fn build(
    raw: RawScenario,
    default_name: &str,
    ov: &Overrides,
) -> Result<ScenarioConfig, ScenarioError> {
    let plant = PlantSuite::by_name(&raw.plant)
        .ok_or_else(|| invalid("plant", format!("unknown plant suite '{}'", raw.plant)))?;
    let agents = plant.node_count();
    let dim = plant.node_dim();

    if let Some(nodes) = raw.graph.nodes {
        if nodes != agents {
            return Err(invalid(
                "graph.nodes",
                format!("plant '{}' has {agents} nodes, config says {nodes}", plant.name()),
            ));
        }
    }

    let mut edges = Vec::with_capacity(raw.graph.edges.len());
    for &(from, to, w) in &raw.graph.edges {
        if from == 0 || to == 0 {
            return Err(invalid("graph.edges", "node indices are 1-based"));
        }
        if from > agents || to > agents {
            return Err(invalid(
                "graph.edges",
                format!("edge ({from}, {to}) references a node above {agents}"),
            ));
        }
        edges.push((from - 1, to - 1, w));
    }
    let mut pins = Vec::new();
    for (key, &gain) in &raw.graph.pinning {
        let node: usize = key
            .parse()
            .map_err(|_| invalid("graph.pinning", format!("node key '{key}' is not an integer")))?;
        if node == 0 || node > agents {
            return Err(invalid(
                "graph.pinning",
                format!("node {node} outside 1..={agents}"),
            ));
        }
        pins.push((node - 1, gain));
    }
    let graph = Digraph::from_edges(agents, &edges, &pins)?;
    if !graph.is_strongly_connected() {
        return Err(GraphError::NotStronglyConnected.into());
    }
    if !graph.has_pinned_node() {
        return Err(GraphError::NoPinnedNode.into());
    }

    let leader = match raw.leader.kind.as_str() {
        "constant" => {
            let v = raw
                .leader
                .value
                .as_ref()
                .ok_or_else(|| invalid("leader.value", "required for kind = \"constant\""))?
                .resolve(dim, "leader.value")?;
            LeaderSpec::Constant(DVector::from_vec(v))
        }
        "sinusoid" => {
            let amp = raw
                .leader
                .amplitude
                .as_ref()
                .ok_or_else(|| invalid("leader.amplitude", "required for kind = \"sinusoid\""))?
                .resolve(dim, "leader.amplitude")?;
            let freq = raw
                .leader
                .frequency
                .as_ref()
                .ok_or_else(|| invalid("leader.frequency", "required for kind = \"sinusoid\""))?
                .resolve(dim, "leader.frequency")?;
            LeaderSpec::Sinusoid {
                amplitude: DVector::from_vec(amp),
                frequency: DVector::from_vec(freq),
            }
        }
        other => {
            return Err(invalid(
                "leader.kind",
                format!("'{other}' is not one of: constant, sinusoid"),
            ))
        }
    };

    let initial: Vec<DVector<f64>> = match &raw.initial.states {
        StatesSpec::Flat(v) => {
            if dim != 1 {
                return Err(invalid(
                    "initial.states",
                    format!("plant outputs have dimension {dim}; use one row per agent"),
                ));
            }
            if v.len() != agents {
                return Err(invalid(
                    "initial.states",
                    format!("expected {agents} entries, got {}", v.len()),
                ));
            }
            v.iter().map(|&x| DVector::from_element(1, x)).collect()
        }
        StatesSpec::Nested(rows) => {
            if rows.len() != agents || rows.iter().any(|r| r.len() != dim) {
                return Err(invalid(
                    "initial.states",
                    format!("expected {agents} rows of {dim} values"),
                ));
            }
            rows.iter().map(|r| DVector::from_vec(r.clone())).collect()
        }
    };
    if initial.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(invalid("initial.states", "states must be finite"));
    }

    let rho0 = raw.funnel.rho0.resolve(agents, dim, "funnel.rho0")?;
    let rho_inf = raw.funnel.rho_inf.resolve(agents, dim, "funnel.rho_inf")?;
    let ell = raw.funnel.ell.resolve(agents, dim, "funnel.ell")?;
    let mut funnels = Vec::with_capacity(agents);
    for i in 0..agents {
        let mut row = Vec::with_capacity(dim);
        for k in 0..dim {
            row.push(PerformanceFunction::new(rho0[i][k], rho_inf[i][k], ell[i][k])?);
        }
        funnels.push(row);
    }

    let variant = ov.transform.unwrap_or(raw.transform.variant);
    let delta_bar = raw.transform.delta_bar.resolve(agents, dim, "transform.delta_bar")?;
    let delta_under = raw.transform.delta_under.resolve(agents, dim, "transform.delta_under")?;
    let margin = raw.transform.clamp_margin.unwrap_or(DEFAULT_CLAMP_MARGIN);
    let mut transforms = Vec::with_capacity(agents);
    for i in 0..agents {
        let mut row = Vec::with_capacity(dim);
        for k in 0..dim {
            row.push(TransformConfig::with_margin(
                delta_bar[i][k],
                delta_under[i][k],
                raw.transform.xi,
                variant,
                margin,
            )?);
        }
        transforms.push(row);
    }

    let gains = Gains { c: raw.gains.c, k: raw.gains.k, pi: raw.gains.pi };
    for (name, v) in [("gains.c", gains.c), ("gains.k", gains.k), ("gains.pi", gains.pi)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(name, format!("must be positive, got {v}")));
        }
    }

    let [lo, hi] = raw.basis.range;
    if !(hi > lo) {
        return Err(invalid("basis.range", format!("needs lo < hi, got [{lo}, {hi}]")));
    }
    let basis = BasisSpec::grid(raw.basis.kind, raw.basis.neurons, lo, hi, raw.basis.width, dim)?;

    let step = ov.step.unwrap_or(raw.sim.step);
    let horizon = ov.horizon.unwrap_or(raw.sim.horizon);
    if !(step > 0.0) || !step.is_finite() {
        return Err(invalid("sim.step", format!("must be positive, got {step}")));
    }
    if !(horizon > step) {
        return Err(invalid(
            "sim.horizon",
            format!("must exceed the step ({step}), got {horizon}"),
        ));
    }
    let decimate = ov.decimate.unwrap_or(raw.sim.decimate.unwrap_or(10));
    if decimate == 0 {
        return Err(invalid("sim.decimate", "must be at least 1"));
    }
    let disturbance_hold = raw.sim.disturbance_hold.unwrap_or(step);
    if !(disturbance_hold > 0.0) {
        return Err(invalid(
            "sim.disturbance_hold",
            format!("must be positive, got {disturbance_hold}"),
        ));
    }
    let sim = SimParams {
        step,
        horizon,
        seed: ov.seed.unwrap_or(raw.sim.seed),
        decimate,
        disturbance_hold,
        out_dir: ov
            .out_dir
            .clone()
            .or_else(|| raw.sim.out_dir.as_ref().map(PathBuf::from)),
    };

    let bounds = match &raw.bounds {
        Some(b) => {
            let max_delta_bar = delta_bar
                .iter()
                .flatten()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let inputs = BoundInputs {
                alpha_m: b.alpha_m,
                w_m: b.w_m,
                f_m: b.f_m,
                w_ideal_m: b.w_ideal_m,
                delta_bar: b.delta_bar.unwrap_or(max_delta_bar),
                sigma_max_lambda: b.sigma_max_lambda,
            };
            inputs
                .validate()
                .map_err(|_| invalid("bounds", "all bound constants must be positive"))?;
            Some(inputs)
        }
        None => None,
    };

    let cfg = ScenarioConfig {
        name: raw.name.unwrap_or_else(|| default_name.to_string()),
        plant,
        graph,
        leader,
        initial,
        funnels,
        transforms,
        gains,
        basis,
        sim,
        bounds,
    };
    cfg.validate()?;
    Ok(cfg)
}

// The dynamic constraints must hold from t = 0, so a start outside the
// envelope is a config error, not a runtime event.
fn check_initial_envelope(cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
    let n = cfg.plant.node_dim();
    let agents = cfg.plant.node_count();
    let mut stacked = DVector::zeros(agents * n);
    for (i, x) in cfg.initial.iter().enumerate() {
        for k in 0..n {
            stacked[i * n + k] = x[k];
        }
    }
    let (x0, _) = cfg.leader.state(0.0);
    let e = controller::global_error(&stacked, &x0, &cfg.graph)?;
    for i in 0..agents {
        for k in 0..n {
            let tc = &cfg.transforms[i][k];
            let rho0 = cfg.funnels[i][k].rho(0.0)?;
            let status = ppf::check_envelope(e[i * n + k], rho0, tc)?;
            if !status.inside {
                let (lo, hi) = if e[i * n + k] >= 0.0 {
                    (-tc.delta_under, tc.delta_bar)
                } else {
                    (-tc.delta_bar, tc.delta_under)
                };
                return Err(ScenarioError::InitialEnvelope {
                    agent: i + 1,
                    channel: k + 1,
                    error: e[i * n + k],
                    lo,
                    hi,
                });
            }
        }
    }
    Ok(())
}
