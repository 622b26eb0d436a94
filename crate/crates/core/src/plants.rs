//! Node and leader dynamics for the two benchmark examples, plus the generic
//! plant interface `x_dot = f_i(x_i) + u_i + w_i`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DVector, Matrix3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    #[error("plant: node index {got} outside 0..{count}")]
    BadNode { got: usize, count: usize },
    #[error("plant: state/control dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("plant: disturbance amplitude {0} outside [0, 1]")]
    BadNoise(f64),
}

/// Heterogeneous scalar benchmark: five nodes with polynomial drifts
/// `{x^3, x^2, x^4, x, x^5}` and a sampled-amplitude `noise * cos(t)`
/// disturbance. `node` is 0-based.
pub fn example1_dynamics(
    node: usize,
    x: f64,
    u: f64,
    t: f64,
    noise: f64,
) -> Result<f64, PlantError> {
    if node >= 5 {
        return Err(PlantError::BadNode { got: node, count: 5 });
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(PlantError::BadNoise(noise));
    }
    let drift = match node {
        0 => x.powi(3),
        1 => x.powi(2),
        2 => x.powi(4),
        3 => x,
        _ => x.powi(5),
    };
    Ok(drift + u + noise * t.cos())
}

// Per-node constant tables of the MIMO benchmark; column j holds node j's
// constants.
const EX2_A: [[f64; 5]; 3] = [
    [1.5, 0.5, 0.7, 1.3, 0.7],
    [0.5, 1.4, 0.1, 1.3, 2.4],
    [2.8, 1.4, 0.6, 0.7, 0.6],
];
const EX2_B: [[f64; 5]; 3] = [
    [0.5, 1.5, 1.1, 1.6, 0.3],
    [0.7, 1.2, 1.3, 0.5, 0.3],
    [1.1, 1.4, 1.6, 0.6, 1.0],
];
const EX2_C: [[f64; 5]; 3] = [
    [1.5, 2.5, 0.5, 1.7, 0.7],
    [0.5, 1.7, 1.1, 0.3, 0.4],
    [0.8, 0.4, 2.2, 0.9, 1.4],
];

/// Linear drift matrix of the MIMO benchmark; open-loop unstable
/// (eigenvalues -20, 15, -3).
pub fn example2_drift_matrix() -> Matrix3<f64> {
    Matrix3::new(-20.0, 22.0, 0.0, 0.0, 15.0, 0.0, 0.0, 0.0, -3.0)
}

/// Node nonlinearity f_j(x, t) of the MIMO benchmark.
pub fn example2_nonlinearity(node: usize, x: &Vector3<f64>, t: f64) -> Result<Vector3<f64>, PlantError> {
    check_node5(node)?;
    let a1 = EX2_A[0][node];
    let a2 = EX2_A[1][node];
    let a3 = EX2_A[2][node];
    Ok(Vector3::new(
        a1 * x[2] * x[0] + 0.2 * (x[0] * a1).sin(),
        -a2 * x[0] * x[2] - 0.2 * a2 * (a2 * x[2] * t).cos() * x[0],
        a3 * x[0] * x[1],
    ))
}

/// Exogenous disturbance D_j(t) of the MIMO benchmark.
pub fn example2_disturbance(node: usize, t: f64) -> Result<Vector3<f64>, PlantError> {
    check_node5(node)?;
    let b1 = EX2_B[0][node];
    let b2 = EX2_B[1][node];
    let b3 = EX2_B[2][node];
    Ok(Vector3::new(
        1.0 + b1 * (b1 * t).sin(),
        1.2 * (b2 * t).cos(),
        (0.5 * b3 * t).sin() + (b3 * t).cos() - 1.0,
    ))
}

/// Time-varying parameter matrix theta_j(t), assembled column by column.
pub fn example2_parameter_matrix(node: usize, t: f64) -> Result<Matrix3<f64>, PlantError> {
    check_node5(node)?;
    let c1 = EX2_C[0][node];
    let c2 = EX2_C[1][node];
    let c3 = EX2_C[2][node];
    let col1 = Vector3::new(
        3.0 * c1 * (0.5 * t).sin(),
        0.9 * (0.2 * c2 * t).sin(),
        0.5 * (0.13 * c3 * t).sin(),
    );
    let col2 = Vector3::new(
        2.0 * c1 * (0.4 * c1 * t).sin() * (0.3 * t).cos(),
        2.5 * (0.3 * c2 * t).sin() + 0.3 * t.cos(),
        0.6 * c3 * (0.15 * t).cos(),
    );
    let col3 = Vector3::new(
        0.7 * (0.2 * c1 * t).sin(),
        1.0 * (0.1 * c2 * t).sin(),
        1.5 * (0.7 * c3 * t).cos() + 1.6 * c3 * (0.3 * t).sin(),
    );
    Ok(Matrix3::from_columns(&[col1, col2, col3]))
}

/// MIMO benchmark:
/// `x_dot = A x + u + theta_j(t) x + f_j(x, t) + D_j(t)` with unit input
/// gain. `node` is 0-based.
pub fn example2_dynamics(
    node: usize,
    x: &Vector3<f64>,
    u: &Vector3<f64>,
    t: f64,
) -> Result<Vector3<f64>, PlantError> {
    check_node5(node)?;
    Ok(example2_drift_matrix() * x
        + u
        + example2_parameter_matrix(node, t)? * x
        + example2_nonlinearity(node, x, t)?
        + example2_disturbance(node, t)?)
}

fn check_node5(node: usize) -> Result<(), PlantError> {
    if node >= 5 {
        return Err(PlantError::BadNode { got: node, count: 5 });
    }
    Ok(())
}

type LeaderFn = Arc<dyn Fn(f64) -> (DVector<f64>, DVector<f64>) + Send + Sync>;

/// Leader trajectory generator. Bounded by construction for the built-in
/// kinds; custom trajectories are the caller's responsibility.
#[derive(Clone)]
pub enum LeaderSpec {
    Constant(DVector<f64>),
    Sinusoid { amplitude: DVector<f64>, frequency: DVector<f64> },
    Custom { dim: usize, f: LeaderFn },
}

impl fmt::Debug for LeaderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LeaderSpec::Constant(v) => write!(f, "Constant({v:?})"),
            LeaderSpec::Sinusoid { amplitude, frequency } => {
                write!(f, "Sinusoid(amp={amplitude:?}, freq={frequency:?})")
            }
            LeaderSpec::Custom { dim, .. } => write!(f, "Custom(dim={dim})"),
        }
    }
}

impl LeaderSpec {
    pub fn constant_scalar(v: f64) -> Self {
        LeaderSpec::Constant(DVector::from_element(1, v))
    }

    pub fn sinusoid_scalar(amplitude: f64, frequency: f64) -> Self {
        LeaderSpec::Sinusoid {
            amplitude: DVector::from_element(1, amplitude),
            frequency: DVector::from_element(1, frequency),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LeaderSpec::Constant(v) => v.len(),
            LeaderSpec::Sinusoid { amplitude, .. } => amplitude.len(),
            LeaderSpec::Custom { dim, .. } => *dim,
        }
    }

    /// Leader state and its derivative at time `t`.
    pub fn state(&self, t: f64) -> (DVector<f64>, DVector<f64>) {
        match self {
            LeaderSpec::Constant(v) => (v.clone(), DVector::zeros(v.len())),
            LeaderSpec::Sinusoid { amplitude, frequency } => {
                let x0 = DVector::from_fn(amplitude.len(), |i, _| {
                    amplitude[i] * (frequency[i] * t).cos()
                });
                let x0_dot = DVector::from_fn(amplitude.len(), |i, _| {
                    -amplitude[i] * frequency[i] * (frequency[i] * t).sin()
                });
                (x0, x0_dot)
            }
            LeaderSpec::Custom { f, .. } => f(t),
        }
    }
}

type DynamicsFn =
    Arc<dyn Fn(usize, &DVector<f64>, &DVector<f64>, f64, f64) -> Result<DVector<f64>, PlantError> + Send + Sync>;

/// A family of node dynamics plus metadata the engine needs to wire a
/// scenario together.
#[derive(Clone)]
pub struct PlantSuite {
    name: String,
    node_count: usize,
    node_dim: usize,
    uses_disturbance: bool,
    dynamics: DynamicsFn,
}

impl fmt::Debug for PlantSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantSuite")
            .field("name", &self.name)
            .field("node_count", &self.node_count)
            .field("node_dim", &self.node_dim)
            .field("uses_disturbance", &self.uses_disturbance)
            .finish()
    }
}

impl PlantSuite {
    pub fn example1() -> Self {
        Self {
            name: "example1".into(),
            node_count: 5,
            node_dim: 1,
            uses_disturbance: true,
            dynamics: Arc::new(|i, x, u, t, noise| {
                Ok(DVector::from_element(1, example1_dynamics(i, x[0], u[0], t, noise)?))
            }),
        }
    }

    pub fn example2() -> Self {
        Self {
            name: "example2".into(),
            node_count: 5,
            node_dim: 3,
            uses_disturbance: false,
            dynamics: Arc::new(|i, x, u, t, _noise| {
                let xv = Vector3::new(x[0], x[1], x[2]);
                let uv = Vector3::new(u[0], u[1], u[2]);
                let dx = example2_dynamics(i, &xv, &uv, t)?;
                Ok(DVector::from_column_slice(dx.as_slice()))
            }),
        }
    }

    /// Registers a user-defined suite for programmatic scenarios.
    pub fn custom(
        name: impl Into<String>,
        node_count: usize,
        node_dim: usize,
        uses_disturbance: bool,
        dynamics: DynamicsFn,
    ) -> Self {
        Self { name: name.into(), node_count, node_dim, uses_disturbance, dynamics }
    }

    /// Built-in suite lookup used by scenario configs.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "example1" => Some(Self::example1()),
            "example2" => Some(Self::example2()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn node_dim(&self) -> usize {
        self.node_dim
    }

    pub fn uses_disturbance(&self) -> bool {
        self.uses_disturbance
    }

    pub fn dynamics(
        &self,
        node: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
        t: f64,
        noise: f64,
    ) -> Result<DVector<f64>, PlantError> {
        if node >= self.node_count {
            return Err(PlantError::BadNode { got: node, count: self.node_count });
        }
        if x.len() != self.node_dim {
            return Err(PlantError::DimensionMismatch { got: x.len(), expected: self.node_dim });
        }
        if u.len() != self.node_dim {
            return Err(PlantError::DimensionMismatch { got: u.len(), expected: self.node_dim });
        }
        (self.dynamics)(node, x, u, t, noise)
    }
}

/// One batch of uniform [0, 1] disturbance amplitudes, one per node.
pub fn sample_disturbance<R: Rng>(rng: &mut R, node_count: usize) -> Vec<f64> {
    (0..node_count).map(|_| rng.random::<f64>()).collect()
}

/// Sample-and-hold disturbance source: amplitudes are redrawn every
/// `hold_interval` and held constant in between, so the integrator sees a
/// piecewise-constant signal that is reproducible for a fixed seed.
#[derive(Debug, Clone)]
pub struct SampleHold {
    rng: ChaCha8Rng,
    hold: f64,
    interval: u64,
    values: Vec<f64>,
}

impl SampleHold {
    pub fn new(seed: u64, node_count: usize, hold_interval: f64) -> Self {
        assert!(hold_interval > 0.0, "hold interval must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = sample_disturbance(&mut rng, node_count);
        Self { rng, hold: hold_interval, interval: 0, values }
    }

    /// Advances the hold window to cover time `t` (monotone in `t`); redraws
    /// once per crossed interval boundary.
    pub fn advance_to(&mut self, t: f64) {
        let target = (t / self.hold + 1e-9).floor() as u64;
        while self.interval < target {
            self.values = sample_disturbance(&mut self.rng, self.values.len());
            self.interval += 1;
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}
