//! Per-agent neural function approximation.
//!
//! Each agent carries a linearly parameterized network `f_hat = W^T phi(x)`
//! whose weights are tuned online. The drive term of the tuning law scales
//! the basis outer product by the transformed error, the transform
//! coefficient and the agent's M-matrix gains; a leakage term keeps the
//! weights from drifting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ApproxError {
    #[error("basis: input has dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("basis: needs at least one neuron")]
    NoNeurons,
    #[error("basis: widths must be positive and match the neuron count")]
    BadWidths,
    #[error("basis: centers must be finite with dimension {0}")]
    BadCenters(usize),
    #[error("network: gains must be positive (pi={pi}, k={k})")]
    BadGains { pi: f64, k: f64 },
    #[error("network: non-finite input")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    #[serde(rename = "gaussian")]
    GaussianRbf,
    Sigmoid,
}

/// Basis definition: neuron centers plus per-neuron widths (RBF) or biases
/// (sigmoid).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    pub kind: BasisKind,
    centers: Vec<DVector<f64>>,
    widths: Vec<f64>,
    input_dim: usize,
}

impl BasisSpec {
    pub fn new(
        kind: BasisKind,
        centers: Vec<DVector<f64>>,
        widths: Vec<f64>,
        input_dim: usize,
    ) -> Result<Self, ApproxError> {
        if centers.is_empty() {
            return Err(ApproxError::NoNeurons);
        }
        if centers.iter().any(|c| c.len() != input_dim || c.iter().any(|v| !v.is_finite())) {
            return Err(ApproxError::BadCenters(input_dim));
        }
        if widths.len() != centers.len() || widths.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(ApproxError::BadWidths);
        }
        Ok(Self { kind, centers, widths, input_dim })
    }

    /// Uniform grid of `neurons` centers along the diagonal of
    /// `[lo, hi]^dim`, all with the same width. A single neuron sits at the
    /// midpoint.
    pub fn grid(
        kind: BasisKind,
        neurons: usize,
        lo: f64,
        hi: f64,
        width: f64,
        dim: usize,
    ) -> Result<Self, ApproxError> {
        if neurons == 0 {
            return Err(ApproxError::NoNeurons);
        }
        let centers = (0..neurons)
            .map(|m| {
                let s = if neurons == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * m as f64 / (neurons - 1) as f64
                };
                DVector::from_element(dim, s)
            })
            .collect();
        Self::new(kind, centers, vec![width; neurons], dim)
    }

    pub fn neuron_count(&self) -> usize {
        self.centers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn centers(&self) -> &[DVector<f64>] {
        &self.centers
    }

    /// Every basis entry lies in (0, 1], so `||phi|| <= sqrt(v)`; this is the
    /// concrete value fed to the gain report as phi_M.
    pub fn phi_bound(&self) -> f64 {
        (self.neuron_count() as f64).sqrt()
    }
}

/// Evaluates the basis vector at a state.
pub fn basis_eval(b: &BasisSpec, x: &DVector<f64>) -> Result<DVector<f64>, ApproxError> {
    if x.len() != b.input_dim {
        return Err(ApproxError::DimensionMismatch { got: x.len(), expected: b.input_dim });
    }
    let v = b.neuron_count();
    let mut phi = DVector::zeros(v);
    for m in 0..v {
        phi[m] = match b.kind {
            BasisKind::GaussianRbf => {
                let d2 = (x - &b.centers[m]).norm_squared();
                (-d2 / (2.0 * b.widths[m] * b.widths[m])).exp()
            }
            BasisKind::Sigmoid => {
                let z = b.centers[m].dot(x) + b.widths[m];
                1.0 / (1.0 + (-z).exp())
            }
        };
    }
    Ok(phi)
}

/// Basis plus estimated weights and tuning gains for one agent. `weights`
/// holds the canonical `v x n` estimate (column per output channel); during
/// integration the engine passes stage-specific weight matrices explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveNetwork {
    pub basis: BasisSpec,
    pub weights: DMatrix<f64>,
    /// Tuning gain Pi (so F = Pi * I).
    pub gain_pi: f64,
    /// Leakage gain k.
    pub leak_k: f64,
}

impl AdaptiveNetwork {
    /// Network with zero initial weights, the neutral estimate.
    pub fn zeroed(
        basis: BasisSpec,
        out_dim: usize,
        gain_pi: f64,
        leak_k: f64,
    ) -> Result<Self, ApproxError> {
        if !(gain_pi > 0.0) || !(leak_k > 0.0) {
            return Err(ApproxError::BadGains { pi: gain_pi, k: leak_k });
        }
        let weights = DMatrix::zeros(basis.neuron_count(), out_dim);
        Ok(Self { basis, weights, gain_pi, leak_k })
    }

    pub fn out_dim(&self) -> usize {
        self.weights.ncols()
    }

    /// Prediction `W^T phi` using the stored weights.
    pub fn predict(&self, phi: &DVector<f64>) -> Result<DVector<f64>, ApproxError> {
        predict(&self.weights, phi)
    }
}

/// Prediction `W^T phi` for an explicit weight matrix.
pub fn predict(w: &DMatrix<f64>, phi: &DVector<f64>) -> Result<DVector<f64>, ApproxError> {
    if phi.len() != w.nrows() {
        return Err(ApproxError::DimensionMismatch { got: phi.len(), expected: w.nrows() });
    }
    Ok(w.transpose() * phi)
}

/// Scalar tuning law: `W_dot = Pi phi eps r p (d + b) - k Pi W`.
///
/// Returns the weight derivative; integration is owned by the engine.
pub fn weight_update_scalar(
    net: &AdaptiveNetwork,
    w: &DMatrix<f64>,
    phi: &DVector<f64>,
    eps: f64,
    r: f64,
    p: f64,
    d: f64,
    b: f64,
) -> Result<DMatrix<f64>, ApproxError> {
    weight_update_vector(
        net,
        w,
        phi,
        &DVector::from_element(1, eps),
        &DVector::from_element(1, r),
        p,
        d,
        b,
    )
}

/// Vector tuning law: the Kronecker form reduced to an outer product per
/// output channel, `W_dot = Pi phi (eps ⊙ r)^T p (d + b) - k Pi W`, with the
/// transform coefficient applied channel-wise. The drive sign matches the
/// scalar law so the two agree exactly at n = 1.
pub fn weight_update_vector(
    net: &AdaptiveNetwork,
    w: &DMatrix<f64>,
    phi: &DVector<f64>,
    eps: &DVector<f64>,
    r: &DVector<f64>,
    p: f64,
    d: f64,
    b: f64,
) -> Result<DMatrix<f64>, ApproxError> {
    let v = net.basis.neuron_count();
    if phi.len() != v || w.nrows() != v {
        return Err(ApproxError::DimensionMismatch { got: phi.len(), expected: v });
    }
    if eps.len() != w.ncols() || r.len() != w.ncols() {
        return Err(ApproxError::DimensionMismatch { got: eps.len(), expected: w.ncols() });
    }
    let finite = phi.iter().chain(eps.iter()).chain(r.iter()).all(|x| x.is_finite())
        && [p, d, b].iter().all(|x| x.is_finite());
    if !finite {
        return Err(ApproxError::NonFinite);
    }
    let scale = net.gain_pi * p * (d + b);
    let drive = eps.component_mul(r);
    Ok(phi * drive.transpose() * scale - w * (net.leak_k * net.gain_pi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rbf3() -> BasisSpec {
        BasisSpec::grid(BasisKind::GaussianRbf, 3, -4.0, 4.0, 4.0, 1).unwrap()
    }

    #[test]
    fn grid_places_centers() {
        let b = rbf3();
        let c: Vec<f64> = b.centers().iter().map(|c| c[0]).collect();
        assert_eq!(c, vec![-4.0, 0.0, 4.0]);
        assert_relative_eq!(b.phi_bound(), 3f64.sqrt());
    }

    #[test]
    fn rbf_values() {
        let b = rbf3();
        let phi = basis_eval(&b, &DVector::from_element(1, 0.0)).unwrap();
        // at the center the response is exactly 1
        assert_relative_eq!(phi[1], 1.0);
        // at distance sigma it is exp(-1/2)
        let phi = basis_eval(&b, &DVector::from_element(1, 4.0)).unwrap();
        assert_relative_eq!(phi[1], 0.606_530_659_712_633_4, epsilon = 1e-15);
        assert!(phi.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn sigmoid_values_stay_in_unit_interval() {
        let b = BasisSpec::grid(BasisKind::Sigmoid, 4, -2.0, 2.0, 0.5, 2).unwrap();
        for s in [-30.0, -1.0, 0.0, 2.5, 30.0] {
            let phi = basis_eval(&b, &DVector::from_element(2, s)).unwrap();
            assert!(phi.iter().all(|&v| v > 0.0 && v <= 1.0));
            assert!(phi.norm() <= b.phi_bound() + 1e-12);
        }
    }

    #[test]
    fn basis_eval_rejects_dimension_mismatch() {
        let b = rbf3();
        assert!(matches!(
            basis_eval(&b, &DVector::from_element(2, 0.0)).unwrap_err(),
            ApproxError::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn predict_cases() {
        let phi = DVector::from_vec(vec![0.3, 0.9, 0.1]);
        let zero = DMatrix::zeros(3, 1);
        assert_eq!(predict(&zero, &phi).unwrap()[0], 0.0);
        let mut sel = DMatrix::zeros(3, 1);
        sel[(0, 0)] = 1.0;
        assert_relative_eq!(predict(&sel, &phi).unwrap()[0], 0.3);
    }

    #[test]
    fn predict_matches_manual_dot() {
        let w = DMatrix::from_row_slice(3, 2, &[0.1, -0.2, 0.3, 0.4, -0.5, 0.6]);
        let phi = DVector::from_vec(vec![0.7, 0.2, 0.9]);
        let out = predict(&w, &phi).unwrap();
        for col in 0..2 {
            let mut acc = 0.0;
            for m in 0..3 {
                acc += w[(m, col)] * phi[m];
            }
            assert_relative_eq!(out[col], acc, epsilon = 1e-12);
        }
    }

    #[test]
    fn scalar_update_hand_case() {
        let net = AdaptiveNetwork::zeroed(rbf3(), 1, 150.0, 0.8).unwrap();
        let phi = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let w = DMatrix::zeros(3, 1);
        let dw = weight_update_scalar(&net, &w, &phi, 0.1, 0.5, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(dw[(0, 0)], 15.0, epsilon = 1e-12);
        assert_eq!(dw[(1, 0)], 0.0);
        assert_eq!(dw[(2, 0)], 0.0);
    }

    #[test]
    fn update_is_pure_leakage_without_drive() {
        let net = AdaptiveNetwork::zeroed(rbf3(), 1, 150.0, 0.8).unwrap();
        let phi = DVector::from_vec(vec![0.5, 0.5, 0.5]);
        let w = DMatrix::from_element(3, 1, 2.0);
        let dw = weight_update_scalar(&net, &w, &phi, 0.0, 0.7, 1.0, 1.0, 1.0).unwrap();
        for m in 0..3 {
            assert_relative_eq!(dw[(m, 0)], -0.8 * 150.0 * 2.0, epsilon = 1e-12);
        }
        // zero weights and zero drive sit at the equilibrium
        let dw = weight_update_scalar(&net, &DMatrix::zeros(3, 1), &phi, 0.0, 0.7, 1.0, 1.0, 1.0)
            .unwrap();
        assert_eq!(dw, DMatrix::zeros(3, 1));
    }

    #[test]
    fn vector_update_reduces_to_scalar_at_n1() {
        let net = AdaptiveNetwork::zeroed(rbf3(), 1, 150.0, 0.8).unwrap();
        let phi = DVector::from_vec(vec![0.4, 0.8, 0.2]);
        let w = DMatrix::from_row_slice(3, 1, &[0.1, -0.3, 0.2]);
        let scalar = weight_update_scalar(&net, &w, &phi, 0.25, 0.6, 0.5, 1.0, 1.0).unwrap();
        let vector = weight_update_vector(
            &net,
            &w,
            &phi,
            &DVector::from_element(1, 0.25),
            &DVector::from_element(1, 0.6),
            0.5,
            1.0,
            1.0,
        )
        .unwrap();
        assert_eq!(scalar, vector);
    }

    #[test]
    fn vector_update_matches_elementwise_loop() {
        let basis = BasisSpec::grid(BasisKind::GaussianRbf, 4, -1.0, 1.0, 1.0, 3).unwrap();
        let net = AdaptiveNetwork::zeroed(basis, 3, 2.5, 0.3).unwrap();
        let phi = DVector::from_vec(vec![0.9, 0.2, 0.5, 0.7]);
        let w = DMatrix::from_fn(4, 3, |i, j| 0.1 * i as f64 - 0.2 * j as f64);
        let eps = DVector::from_vec(vec![0.3, -0.6, 0.1]);
        let r = DVector::from_vec(vec![1.1, 0.4, 2.0]);
        let (p, d, b) = (0.5, 2.0, 1.0);
        let dw = weight_update_vector(&net, &w, &phi, &eps, &r, p, d, b).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                let expect = 2.5 * phi[i] * eps[j] * r[j] * p * (d + b) - 0.3 * 2.5 * w[(i, j)];
                assert_relative_eq!(dw[(i, j)], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn leakage_decays_weight_norm() {
        let net = AdaptiveNetwork::zeroed(rbf3(), 1, 10.0, 0.5).unwrap();
        let phi = DVector::from_vec(vec![0.2, 0.2, 0.2]);
        let mut w = DMatrix::from_row_slice(3, 1, &[1.0, -2.0, 0.5]);
        let mut prev = w.norm();
        let h = 1e-3;
        for _ in 0..100 {
            let dw = weight_update_scalar(&net, &w, &phi, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
            w += dw * h;
            let norm = w.norm();
            assert!(norm < prev);
            prev = norm;
        }
    }
}
