//! Leader–follower synchronization of unknown nonlinear multi-agent systems
//! under neuro-adaptive distributed control with prescribed performance
//! funnels.
//!
//! A fleet of agents with unknown nonlinear dynamics exchanges state over a
//! strongly connected digraph and tracks a leader that only some agents can
//! see. Each agent keeps its neighborhood synchronization error inside a
//! shrinking envelope by mapping the constrained error through a logarithmic
//! funnel transform and feeding the transformed error to a radial-basis
//! adaptive controller.
//!
//! - [`graph`] — digraph construction, Laplacian/pinning analysis, the
//!   M-matrix quantities (q, P, Q) and gain-condition reports.
//! - [`ppf`] — performance funnels, envelope checks, the sign/erf error
//!   transforms and their derivative.
//! - [`approximator`] — RBF/sigmoid basis evaluation, prediction and the
//!   adaptive weight tuning laws.
//! - [`plants`] — the two benchmark plant suites, leader trajectories and
//!   the sample-and-hold disturbance source.
//! - [`controller`] — local/global synchronization errors, the distributed
//!   control law and per-agent step assembly.
//! - [`scenario`] — scenario config schema, TOML loading, validation and the
//!   shipped presets.
//! - [`engine`] — fixed-step RK4 integration of the coupled agent/weight
//!   system, logging, envelope auditing and chattering metrics.

pub mod approximator;
pub mod controller;
pub mod engine;
pub mod graph;
pub mod plants;
pub mod ppf;
pub mod scenario;

pub use approximator::{AdaptiveNetwork, BasisKind, BasisSpec};
pub use controller::{AgentRuntime, AgentStep};
pub use engine::{run_scenario, SimLog};
pub use graph::{Digraph, GainReport, LemmaOneData};
pub use plants::{LeaderSpec, PlantSuite};
pub use ppf::{PerformanceFunction, TransformConfig, TransformVariant};
pub use scenario::ScenarioConfig;
