//! Prescribed performance funnels and the error transformation.
//!
//! A funnel `rho(t) = (rho0 - rho_inf) exp(-ell t) + rho_inf` bounds each
//! synchronization error at every instant. Dividing by `rho` gives a ratio
//! that must stay inside the asymmetric band `(-delta_under, delta_bar)`
//! (mirrored for negative errors), and a logarithmic map sends that
//! constrained ratio to an unconstrained transformed error. Two variants of
//! the map are provided: the exact sign-switched form and an erf-gated form
//! that trades exactness near zero for a chatter-free control signal.
//!
//! The logarithm diverges as `|e|/rho` approaches `delta_bar`, so all maps
//! clamp the ratio at `delta_bar * (1 - clamp_margin)` and report when the
//! clamp engaged rather than faulting mid-simulation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PpfError {
    #[error("funnel: rho0 must satisfy rho0 >= rho_inf > 0, got rho0={rho0}, rho_inf={rho_inf}")]
    BadFunnelBounds { rho0: f64, rho_inf: f64 },
    #[error("funnel: decay rate ell must be positive, got {0}")]
    BadDecayRate(f64),
    #[error("funnel: time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("transform: shape constants must be positive and finite, got delta_bar={delta_bar}, delta_under={delta_under}")]
    BadShapeConstants { delta_bar: f64, delta_under: f64 },
    #[error("transform: erf sharpness xi must be positive, got {0}")]
    BadSharpness(f64),
    #[error("transform: clamp_margin must lie in (0, 1), got {0}")]
    BadClampMargin(f64),
    #[error("transform: rho must be positive, got {0}")]
    NonPositiveRho(f64),
    #[error("transform: non-finite input")]
    NonFinite,
}

/// Exponentially decaying performance envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceFunction {
    rho0: f64,
    rho_inf: f64,
    ell: f64,
}

impl PerformanceFunction {
    /// `rho0 >= rho_inf > 0` and `ell > 0`. Equality of the bounds gives a
    /// constant envelope, which is occasionally useful in tests.
    pub fn new(rho0: f64, rho_inf: f64, ell: f64) -> Result<Self, PpfError> {
        if !(rho_inf > 0.0) || !(rho0 >= rho_inf) || !rho0.is_finite() {
            return Err(PpfError::BadFunnelBounds { rho0, rho_inf });
        }
        if !(ell > 0.0) || !ell.is_finite() {
            return Err(PpfError::BadDecayRate(ell));
        }
        Ok(Self { rho0, rho_inf, ell })
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn rho_inf(&self) -> f64 {
        self.rho_inf
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Envelope value `(rho0 - rho_inf) exp(-ell t) + rho_inf`.
    pub fn rho(&self, t: f64) -> Result<f64, PpfError> {
        if t < 0.0 {
            return Err(PpfError::NegativeTime(t));
        }
        Ok((self.rho0 - self.rho_inf) * (-self.ell * t).exp() + self.rho_inf)
    }

    /// Envelope slope `-ell (rho0 - rho_inf) exp(-ell t)`; always <= 0.
    pub fn rho_dot(&self, t: f64) -> Result<f64, PpfError> {
        if t < 0.0 {
            return Err(PpfError::NegativeTime(t));
        }
        Ok(-self.ell * (self.rho0 - self.rho_inf) * (-self.ell * t).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformVariant {
    /// Exact sign-switched logarithmic map.
    #[serde(rename = "sign")]
    SignExact,
    /// erf-gated map that attenuates chattering near zero error.
    #[serde(rename = "erf")]
    ErfSmooth,
}

/// Shape of the error transformation.
///
/// `delta_bar` scales the envelope side of the band (the transform is
/// singular at `|e|/rho = delta_bar`), `delta_under` the off side. Both must
/// be positive; their ordering is free. The benchmark scenarios use
/// `delta_bar = 1` so the funnel is `|e| < rho(t)` itself, while the
/// op-level identities hold for any positive pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformConfig {
    pub delta_bar: f64,
    pub delta_under: f64,
    pub xi: f64,
    pub variant: TransformVariant,
    /// Relative singularity margin: ratios are clamped at
    /// `delta_bar * (1 - clamp_margin)`.
    pub clamp_margin: f64,
}

pub const DEFAULT_CLAMP_MARGIN: f64 = 1e-6;

impl TransformConfig {
    pub fn new(
        delta_bar: f64,
        delta_under: f64,
        xi: f64,
        variant: TransformVariant,
    ) -> Result<Self, PpfError> {
        Self::with_margin(delta_bar, delta_under, xi, variant, DEFAULT_CLAMP_MARGIN)
    }

    pub fn with_margin(
        delta_bar: f64,
        delta_under: f64,
        xi: f64,
        variant: TransformVariant,
        clamp_margin: f64,
    ) -> Result<Self, PpfError> {
        if !(delta_under > 0.0)
            || !(delta_bar > 0.0)
            || !delta_bar.is_finite()
            || !delta_under.is_finite()
        {
            return Err(PpfError::BadShapeConstants { delta_bar, delta_under });
        }
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(PpfError::BadSharpness(xi));
        }
        if !(clamp_margin > 0.0 && clamp_margin < 1.0) {
            return Err(PpfError::BadClampMargin(clamp_margin));
        }
        Ok(Self { delta_bar, delta_under, xi, variant, clamp_margin })
    }

    /// Largest ratio magnitude the transforms will accept before clamping.
    pub fn ratio_ceiling(&self) -> f64 {
        self.delta_bar * (1.0 - self.clamp_margin)
    }
}

/// Where an error sits relative to its envelope. A violation is a status,
/// not an error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeStatus {
    pub inside: bool,
    /// e / rho.
    pub ratio: f64,
    /// True when the transforms would clamp this ratio.
    pub clamped: bool,
    /// Distance from the ratio to the nearest bound of its band; negative
    /// once outside.
    pub margin: f64,
}

/// Applies the sign-switched envelope constraint: for `e >= 0` the ratio must
/// lie in `(-delta_under, delta_bar)`, for `e < 0` in `(-delta_bar,
/// delta_under)`.
pub fn check_envelope(e: f64, rho_val: f64, tc: &TransformConfig) -> Result<EnvelopeStatus, PpfError> {
    if !(rho_val > 0.0) {
        return Err(PpfError::NonPositiveRho(rho_val));
    }
    if !e.is_finite() {
        return Err(PpfError::NonFinite);
    }
    let ratio = e / rho_val;
    let (lo, hi) = if e >= 0.0 {
        (-tc.delta_under, tc.delta_bar)
    } else {
        (-tc.delta_bar, tc.delta_under)
    };
    let margin = (hi - ratio).min(ratio - lo);
    Ok(EnvelopeStatus {
        inside: ratio > lo && ratio < hi,
        ratio,
        clamped: ratio.abs() > tc.ratio_ceiling(),
        margin,
    })
}

// Clamped ratio magnitude used by both transforms and the r coefficient.
fn clamped_magnitude(e: f64, rho_val: f64, tc: &TransformConfig) -> Result<(f64, bool), PpfError> {
    if !(rho_val > 0.0) {
        return Err(PpfError::NonPositiveRho(rho_val));
    }
    if !e.is_finite() {
        return Err(PpfError::NonFinite);
    }
    let u = (e / rho_val).abs();
    let ceiling = tc.ratio_ceiling();
    if u > ceiling {
        Ok((ceiling, true))
    } else {
        Ok((u, false))
    }
}

/// The smooth map `S(eps) = (db e^eps - du e^-eps) / (e^eps + e^-eps)`,
/// saturating to `delta_bar` / `-delta_under` for |eps| > 350 where the
/// exponentials would overflow. The result is kept inside the closed
/// asymptote interval, which rounding near saturation could otherwise
/// overshoot by an ulp.
pub fn smooth_s(eps: f64, tc: &TransformConfig) -> f64 {
    if eps > 350.0 {
        return tc.delta_bar;
    }
    if eps < -350.0 {
        return -tc.delta_under;
    }
    let ep = eps.exp();
    let en = (-eps).exp();
    ((tc.delta_bar * ep - tc.delta_under * en) / (ep + en))
        .clamp(-tc.delta_under, tc.delta_bar)
}

/// Exact sign-switched transform
/// `eps = sign(e/rho)/2 * ln((du + |e|/rho) / (db - |e|/rho))` with
/// `sign(0) = 0`. Returns the transformed error and whether the singularity
/// clamp engaged.
pub fn transform_sign(e: f64, rho_val: f64, tc: &TransformConfig) -> Result<(f64, bool), PpfError> {
    let (u, clamped) = clamped_magnitude(e, rho_val, tc)?;
    let sign = if e > 0.0 {
        1.0
    } else if e < 0.0 {
        -1.0
    } else {
        0.0
    };
    let eps = 0.5 * sign * ((tc.delta_under + u) / (tc.delta_bar - u)).ln();
    Ok((eps, clamped))
}

/// Chatter-attenuating transform
/// `eps = erf(xi e/rho) / (2 sqrt(pi)) * ln((du + |e|/rho) / (db - |e|/rho))`.
pub fn transform_erf(e: f64, rho_val: f64, tc: &TransformConfig) -> Result<(f64, bool), PpfError> {
    let (u, clamped) = clamped_magnitude(e, rho_val, tc)?;
    let gate = libm::erf(tc.xi * e / rho_val);
    let eps = gate / (2.0 * std::f64::consts::PI.sqrt())
        * ((tc.delta_under + u) / (tc.delta_bar - u)).ln();
    Ok((eps, clamped))
}

/// Dispatches on the configured variant.
pub fn apply_transform(e: f64, rho_val: f64, tc: &TransformConfig) -> Result<(f64, bool), PpfError> {
    match tc.variant {
        TransformVariant::SignExact => transform_sign(e, rho_val, tc),
        TransformVariant::ErfSmooth => transform_erf(e, rho_val, tc),
    }
}

/// Transform coefficient
/// `r = 1/(2 rho) * (1/(du + |e|/rho) + 1/(db - |e|/rho))`; strictly positive
/// and finite thanks to the shared ratio clamp.
pub fn r_coeff(e: f64, rho_val: f64, tc: &TransformConfig) -> Result<f64, PpfError> {
    let (u, _) = clamped_magnitude(e, rho_val, tc)?;
    Ok(1.0 / (2.0 * rho_val) * (1.0 / (tc.delta_under + u) + 1.0 / (tc.delta_bar - u)))
}

/// Time derivative of the transformed error, `r * (e_dot - e rho_dot / rho)`.
///
/// This is the exact derivative of [`transform_sign`] away from `e = 0`; for
/// the erf variant it is an approximation that holds once the gate has
/// saturated, i.e. when [`erf_saturated`] is true. Verification/diagnostic
/// use only; the control path never differentiates the transform.
pub fn epsilon_dot(
    e: f64,
    e_dot: f64,
    pf: &PerformanceFunction,
    t: f64,
    tc: &TransformConfig,
) -> Result<f64, PpfError> {
    if !e_dot.is_finite() {
        return Err(PpfError::NonFinite);
    }
    let rho = pf.rho(t)?;
    let rho_dot = pf.rho_dot(t)?;
    let r = r_coeff(e, rho, tc)?;
    Ok(r * (e_dot - e * rho_dot / rho))
}

/// True when `|e|/rho >= 2/xi`, the regime where the erf gate is saturated
/// and the erf transform tracks the sign transform up to a constant factor.
pub fn erf_saturated(ratio: f64, xi: f64) -> bool {
    ratio.abs() >= 2.0 / xi
}
