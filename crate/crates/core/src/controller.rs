//! Synchronization errors and the distributed control law.
//!
//! An agent only sees its in-neighbors and, if pinned, the leader. Each
//! control step therefore assembles, from purely local data: the
//! neighborhood error, the funnel value, the transform coefficient, the
//! transformed error, the control signal and the weight derivative.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::approximator::{self, AdaptiveNetwork, ApproxError};
use crate::graph::Digraph;
use crate::ppf::{self, EnvelopeStatus, PerformanceFunction, PpfError, TransformConfig};

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("controller: state dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("controller: runtime for agent {agent} needs one funnel and transform per output, got {funnels}/{transforms} for dim {dim}")]
    BadChannelSetup { agent: usize, funnels: usize, transforms: usize, dim: usize },
    #[error(transparent)]
    Transform(#[from] PpfError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
}

/// View of one in-neighbor: its index, current state and edge weight.
#[derive(Debug, Clone, Copy)]
pub struct NeighborState<'a> {
    pub index: usize,
    pub state: &'a DVector<f64>,
    pub weight: f64,
}

/// Local neighborhood synchronization error
/// `e_i = sum_j a_ij (x_i - x_j) + b_i (x_i - x0)`.
///
/// Built only from neighbor information; `x0` is ignored unless `b_i > 0`.
pub fn local_error(
    x_i: &DVector<f64>,
    neighbors: &[NeighborState<'_>],
    b_i: f64,
    x0: &DVector<f64>,
) -> Result<DVector<f64>, ControlError> {
    let n = x_i.len();
    if x0.len() != n {
        return Err(ControlError::DimensionMismatch { got: x0.len(), expected: n });
    }
    let mut e = DVector::zeros(n);
    for nb in neighbors {
        if nb.state.len() != n {
            return Err(ControlError::DimensionMismatch { got: nb.state.len(), expected: n });
        }
        e += (x_i - nb.state) * nb.weight;
    }
    if b_i != 0.0 {
        e += (x_i - x0) * b_i;
    }
    Ok(e)
}

/// Global error `e = ((L+B) ⊗ I_n)(x - 1 ⊗ x0)` for stacked states.
///
/// Must agree with the stacked [`local_error`] outputs; the two code paths
/// cross-validate each other.
pub fn global_error(
    x: &DVector<f64>,
    x0: &DVector<f64>,
    g: &Digraph,
) -> Result<DVector<f64>, ControlError> {
    let n = x0.len();
    let count = g.node_count();
    if x.len() != n * count {
        return Err(ControlError::DimensionMismatch { got: x.len(), expected: n * count });
    }
    let mut diff = DVector::zeros(n * count);
    for i in 0..count {
        for k in 0..n {
            diff[i * n + k] = x[i * n + k] - x0[k];
        }
    }
    let kron = g.coupling().kronecker(&DMatrix::identity(n, n));
    Ok(kron * diff)
}

/// Distributed control signal `u_i = -c eps_i - W^T phi`.
pub fn control_law(
    eps: &DVector<f64>,
    phi: &DVector<f64>,
    weights: &DMatrix<f64>,
    c: f64,
) -> Result<DVector<f64>, ControlError> {
    let feedforward = approximator::predict(weights, phi)?;
    if feedforward.len() != eps.len() {
        return Err(ControlError::DimensionMismatch { got: feedforward.len(), expected: eps.len() });
    }
    Ok(-eps * c - feedforward)
}

/// Immutable per-agent wiring: M-matrix gains cached from the graph
/// analysis, one funnel and transform per output channel, and the agent's
/// adaptive network.
#[derive(Debug, Clone)]
pub struct AgentRuntime {
    pub index: usize,
    /// p_i = 1/q_i from the M-matrix construction.
    pub p: f64,
    /// Weighted in-degree d_i.
    pub d: f64,
    /// Pinning gain b_i.
    pub b: f64,
    /// Control gain c.
    pub c: f64,
    pub funnels: Vec<PerformanceFunction>,
    pub transforms: Vec<TransformConfig>,
    pub net: AdaptiveNetwork,
}

/// Everything one control step produces, including the diagnostics the
/// engine logs.
#[derive(Debug, Clone)]
pub struct AgentStep {
    pub u: DVector<f64>,
    pub weight_dot: DMatrix<f64>,
    pub error: DVector<f64>,
    pub eps: DVector<f64>,
    pub r: DVector<f64>,
    pub rho: DVector<f64>,
    pub envelope: Vec<EnvelopeStatus>,
}

impl AgentRuntime {
    /// Runs one control step: local error, funnel, transform coefficient,
    /// transformed error, control signal and weight derivative, in that
    /// order. `weights` is the agent's current estimate (stage-dependent
    /// during integration).
    pub fn step(
        &self,
        x_i: &DVector<f64>,
        weights: &DMatrix<f64>,
        neighbors: &[NeighborState<'_>],
        x0: &DVector<f64>,
        t: f64,
    ) -> Result<AgentStep, ControlError> {
        let n = x_i.len();
        if self.funnels.len() != n || self.transforms.len() != n {
            return Err(ControlError::BadChannelSetup {
                agent: self.index,
                funnels: self.funnels.len(),
                transforms: self.transforms.len(),
                dim: n,
            });
        }
        let error = local_error(x_i, neighbors, self.b, x0)?;
        let mut eps = DVector::zeros(n);
        let mut r = DVector::zeros(n);
        let mut rho = DVector::zeros(n);
        let mut envelope = Vec::with_capacity(n);
        for k in 0..n {
            let tc = &self.transforms[k];
            let rho_k = self.funnels[k].rho(t)?;
            envelope.push(ppf::check_envelope(error[k], rho_k, tc)?);
            let (eps_k, _) = ppf::apply_transform(error[k], rho_k, tc)?;
            eps[k] = eps_k;
            r[k] = ppf::r_coeff(error[k], rho_k, tc)?;
            rho[k] = rho_k;
        }
        let phi = approximator::basis_eval(&self.net.basis, x_i)?;
        let u = control_law(&eps, &phi, weights, self.c)?;
        let weight_dot =
            approximator::weight_update_vector(&self.net, weights, &phi, &eps, &r, self.p, self.d, self.b)?;
        Ok(AgentStep { u, weight_dot, error, eps, r, rho, envelope })
    }
}
