//! Communication digraph construction and analysis.
//!
//! The topology is a weighted digraph where `a_ij > 0` means node `i`
//! receives information from node `j`, plus a diagonal of pinning gains
//! `b_i` for agents that see the leader directly. From it we derive the
//! Laplacian `L = D - A`, the coupling matrix `L + B`, and the M-matrix
//! quantities `q`, `P`, `Q` that underpin both the weight tuning law and
//! the gain sufficiency report.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph.edges: self-edge on node {0} is not allowed")]
    SelfEdge(usize),
    #[error("graph.edges: edge ({from}, {to}) references a node outside 0..{n}")]
    EdgeOutOfRange { from: usize, to: usize, n: usize },
    #[error("graph.edges: edge ({from}, {to}) repeats an existing edge")]
    DuplicateEdge { from: usize, to: usize },
    #[error("graph.edges: edge ({from}, {to}) has nonpositive weight {weight}")]
    NonPositiveWeight { from: usize, to: usize, weight: f64 },
    #[error("graph.pinning: node {node} is outside 0..{n}")]
    PinOutOfRange { node: usize, n: usize },
    #[error("graph.pinning: node {node} has negative gain {gain}")]
    NegativePinning { node: usize, gain: f64 },
    #[error("graph.pinning: node {node} is pinned twice")]
    DuplicatePinning { node: usize },
    #[error("graph: node count must be at least 1")]
    Empty,
    #[error("graph: not strongly connected")]
    NotStronglyConnected,
    #[error("graph.pinning: no pinned node; at least one b_i must be positive")]
    NoPinnedNode,
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("L+B solve failed: coupling matrix is numerically singular")]
    SingularCoupling,
    #[error("diagonal scaling r must have {expected} positive entries")]
    BadScaling { expected: usize },
}

/// Weighted directed communication topology with leader pinning gains.
///
/// Adjacency convention: `a_ij > 0` iff the edge from node `j` to node `i`
/// carries information, and `a_ii = 0` always.
#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    n: usize,
    weights: DMatrix<f64>,
    pinning: DVector<f64>,
}

impl Digraph {
    /// Builds a digraph from directed edges `(from, to, weight)` and a list
    /// of `(node, gain)` pinning entries. Indices are 0-based.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize, f64)],
        pinning: &[(usize, f64)],
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut weights = DMatrix::zeros(n, n);
        for &(from, to, w) in edges {
            if from >= n || to >= n {
                return Err(GraphError::EdgeOutOfRange { from, to, n });
            }
            if from == to {
                return Err(GraphError::SelfEdge(from));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(GraphError::NonPositiveWeight { from, to, weight: w });
            }
            if weights[(to, from)] != 0.0 {
                return Err(GraphError::DuplicateEdge { from, to });
            }
            weights[(to, from)] = w;
        }
        let mut pins = DVector::zeros(n);
        let mut seen = vec![false; n];
        for &(node, gain) in pinning {
            if node >= n {
                return Err(GraphError::PinOutOfRange { node, n });
            }
            if !(gain >= 0.0) || !gain.is_finite() {
                return Err(GraphError::NegativePinning { node, gain });
            }
            if seen[node] {
                return Err(GraphError::DuplicatePinning { node });
            }
            seen[node] = true;
            pins[node] = gain;
        }
        Ok(Self { n, weights, pinning: pins })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Adjacency matrix A.
    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Pinning gains b (the diagonal of B).
    pub fn pinning(&self) -> &DVector<f64> {
        &self.pinning
    }

    /// Weighted in-degrees `d_i = sum_j a_ij` (row sums of A).
    pub fn in_degrees(&self) -> DVector<f64> {
        DVector::from_iterator(self.n, self.weights.row_iter().map(|r| r.sum()))
    }

    /// Graph Laplacian `L = D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = -self.weights.clone();
        for i in 0..self.n {
            l[(i, i)] = self.weights.row(i).sum();
        }
        l
    }

    /// Coupling matrix `L + B`.
    pub fn coupling(&self) -> DMatrix<f64> {
        let mut m = self.laplacian();
        for i in 0..self.n {
            m[(i, i)] += self.pinning[i];
        }
        m
    }

    /// In-neighbors of node `i` as `(j, a_ij)` pairs with `a_ij > 0`.
    pub fn neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        (0..self.n)
            .filter_map(|j| {
                let w = self.weights[(i, j)];
                (w > 0.0).then_some((j, w))
            })
            .collect()
    }

    pub fn has_pinned_node(&self) -> bool {
        self.pinning.iter().any(|&b| b > 0.0)
    }

    /// True iff every ordered node pair is joined by a directed path.
    ///
    /// Double reachability sweep: node 0 must reach every node along edges
    /// and against them. A singleton graph counts as strongly connected.
    pub fn is_strongly_connected(&self) -> bool {
        if self.n == 1 {
            return true;
        }
        self.reaches_all(false) && self.reaches_all(true)
    }

    fn reaches_all(&self, transpose: bool) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for w in 0..self.n {
                // information flows j -> i when a_ij > 0, so the forward
                // edge v -> w exists when a_wv > 0
                let connected = if transpose {
                    self.weights[(v, w)] > 0.0
                } else {
                    self.weights[(w, v)] > 0.0
                };
                if connected && !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }
}

/// Quantities of the irreducible M-matrix construction.
///
/// `q` and `w` are the right and left positive solves `(L+B) q = 1` and
/// `(L+B)^T w = r` (`r` defaults to ones), and `P = diag(w_i / q_i)`. The
/// product `diag(w) (L+B) diag(q)` then has row sums `w_i` and column sums
/// `q_j r_j`, all positive, so its symmetrization is strictly diagonally
/// dominant and `Q = P (L+B) + (L+B)^T P`, congruent to it via `diag(q)`,
/// is positive definite.
#[derive(Debug, Clone)]
pub struct LemmaOneData {
    /// Right solve `(L+B) q = 1`.
    pub q: DVector<f64>,
    /// Left solve `(L+B)^T w = r`.
    pub w: DVector<f64>,
    /// Diagonal entries of P (`p_i = w_i / q_i`).
    pub p: DVector<f64>,
    /// The symmetric matrix `Q = P (L+B) + (L+B)^T P`.
    pub q_sym: DMatrix<f64>,
    pub min_eig_q: f64,
}

/// Computes `q`, `w`, `P` and `Q` for a strongly connected, pinned digraph.
///
/// Both directions come from LU solves rather than explicit inversion. The
/// optional positive `r` weights the left solve, which keeps `Q` positive
/// definite for every positive choice (the row sums of
/// `diag(w) (L+B) diag(q)` are `w_i` and its column sums are `q_j r_j`, so
/// the symmetrized product is strictly diagonally dominant; a plain
/// multiplicative scaling `P diag(r)` would not survive the symmetrization).
pub fn lemma1_pq(g: &Digraph, r: Option<&DVector<f64>>) -> Result<LemmaOneData, GraphError> {
    if !g.is_strongly_connected() {
        return Err(GraphError::NotStronglyConnected);
    }
    if !g.has_pinned_node() {
        return Err(GraphError::NoPinnedNode);
    }
    let n = g.node_count();
    if let Some(r) = r {
        if r.len() != n || r.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(GraphError::BadScaling { expected: n });
        }
    }
    let lb = g.coupling();
    let ones = DVector::from_element(n, 1.0);
    let q = lb
        .clone()
        .lu()
        .solve(&ones)
        .ok_or(GraphError::SingularCoupling)?;
    let rhs = r.cloned().unwrap_or(ones);
    let w = lb
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or(GraphError::SingularCoupling)?;
    if q.iter().chain(w.iter()).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(GraphError::SingularCoupling);
    }
    let p = DVector::from_fn(n, |i, _| w[i] / q[i]);
    let mut p_lb = lb;
    for i in 0..n {
        for j in 0..n {
            p_lb[(i, j)] *= p[i];
        }
    }
    let q_sym = &p_lb + p_lb.transpose();
    let min_eig_q = q_sym
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(LemmaOneData { q, w, p, q_sym, min_eig_q })
}

/// Smallest singular value of a dense matrix.
pub fn min_singular_value(m: &DMatrix<f64>) -> Result<f64, GraphError> {
    singular_values(m).map(|(lo, _)| lo)
}

/// Largest singular value of a dense matrix.
pub fn max_singular_value(m: &DMatrix<f64>) -> Result<f64, GraphError> {
    singular_values(m).map(|(_, hi)| hi)
}

fn singular_values(m: &DMatrix<f64>) -> Result<(f64, f64), GraphError> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GraphError::NonFinite);
    }
    let sv = m.clone().svd(false, false).singular_values;
    let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// User-supplied bound constants feeding the UUB threshold report. These are
/// unknowable in practice and are never estimated from data.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundInputs {
    /// Approximation error bound alpha_M.
    pub alpha_m: f64,
    /// Disturbance bound w_M.
    pub w_m: f64,
    /// Leader dynamics bound F_M.
    pub f_m: f64,
    /// Ideal-weight norm bound W_M.
    pub w_ideal_m: f64,
    /// Largest upper shape constant across channels.
    pub delta_bar: f64,
    /// Bound on the funnel-shrink diagonal Lambda.
    pub sigma_max_lambda: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<(), GraphError> {
        let all = [
            self.alpha_m,
            self.w_m,
            self.f_m,
            self.w_ideal_m,
            self.delta_bar,
            self.sigma_max_lambda,
        ];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(GraphError::NonFinite);
        }
        Ok(())
    }
}

/// UUB sufficiency thresholds, present only when [`BoundInputs`] were given.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundReport {
    /// Companion vector h of the quadratic bound.
    pub h_vector: [f64; 2],
    /// Threshold that `||eps||` must exceed for the Lyapunov bound to decrease.
    pub epsilon_bound: f64,
    /// Threshold for the Frobenius norm of the weight estimation error.
    pub weight_bound: f64,
}

/// Gain sufficiency report. The sufficiency condition circulates once with
/// `sigma_max(A)`, once (via the H matrix) with `sigma_max(L+B)` and once in
/// a squared form; the three do not agree, so all are reported side by side.
#[derive(Debug, Clone, Serialize)]
pub struct GainReport {
    pub c: f64,
    pub k: f64,
    pub phi_m: f64,
    pub sigma_min_q: f64,
    pub sigma_max_p: f64,
    pub sigma_max_p1: f64,
    pub sigma_max_a: f64,
    pub sigma_max_lb: f64,
    /// Coupling gain the tuning-law condition asks for: `c / (2 sigma_min(Q))`.
    pub k_required: f64,
    /// `c sigma_min(Q) > phi_M sigma_max(P) sigma_max(A) / 2`.
    pub cond_adjacency: bool,
    /// Same with `sigma_max(L+B)` in place of `sigma_max(A)`.
    pub cond_coupling: bool,
    /// Same with `sigma_max(A)^2` in place of `sigma_max(A)`.
    pub cond_adjacency_squared: bool,
    /// 2x2 quadratic-form matrix H (symmetric by construction).
    pub h_matrix: [[f64; 2]; 2],
    pub sigma_min_h: f64,
    pub h_positive_definite: bool,
    pub bounds: Option<BoundReport>,
}

/// Evaluates the gain conditions for gains `(c, k)` and basis bound `phi_m`.
///
/// Pure report: nothing in the scenario is mutated and failing conditions do
/// not raise errors.
pub fn gain_check(
    g: &Digraph,
    c: f64,
    k: f64,
    phi_m: f64,
    r: Option<&DVector<f64>>,
    bounds: Option<&BoundInputs>,
) -> Result<GainReport, GraphError> {
    if !(c > 0.0) || !(k > 0.0) || !(phi_m > 0.0) {
        return Err(GraphError::NonFinite);
    }
    let lemma = lemma1_pq(g, r)?;
    let plain = if r.is_some() { lemma1_pq(g, None)? } else { lemma.clone() };
    let sigma_min_q = lemma.min_eig_q;
    let sigma_max_p = plain.p.max();
    let sigma_max_p1 = lemma.p.max();
    let sigma_max_a = max_singular_value(g.adjacency())?;
    let sigma_max_lb = max_singular_value(&g.coupling())?;

    let k_required = c / (2.0 * sigma_min_q);
    let lhs = c * sigma_min_q;
    let cond_adjacency = lhs > 0.5 * phi_m * sigma_max_p * sigma_max_a;
    let cond_coupling = lhs > 0.5 * phi_m * sigma_max_p1 * sigma_max_lb;
    let cond_adjacency_squared = lhs > 0.5 * phi_m * sigma_max_p * sigma_max_a * sigma_max_a;

    let off = -0.5 * phi_m * sigma_max_p1 * sigma_max_lb;
    let h11 = 0.5 * c * sigma_min_q;
    let h = Matrix2::new(h11, off, off, k);
    let h_eigs = h.symmetric_eigen().eigenvalues;
    let h_positive_definite = h_eigs.iter().all(|&v| v > 0.0);
    let sigma_min_h = h_eigs
        .iter()
        .map(|v| v.abs())
        .fold(f64::INFINITY, f64::min);

    let bounds = match bounds {
        Some(b) => {
            b.validate()?;
            let b_m = b.alpha_m + b.w_m + b.f_m;
            let h1 = sigma_max_p1 * sigma_max_lb * b_m + b.delta_bar * b.sigma_max_lambda;
            let h2 = k * b.w_ideal_m;
            let threshold = (h1 + h2) / sigma_min_h;
            Some(BoundReport {
                h_vector: [h1, h2],
                epsilon_bound: threshold,
                weight_bound: threshold,
            })
        }
        None => None,
    };

    Ok(GainReport {
        c,
        k,
        phi_m,
        sigma_min_q,
        sigma_max_p,
        sigma_max_p1,
        sigma_max_a,
        sigma_max_lb,
        k_required,
        cond_adjacency,
        cond_coupling,
        cond_adjacency_squared,
        h_matrix: [[h11, off], [off, k]],
        sigma_min_h,
        h_positive_definite,
        bounds,
    })
}
