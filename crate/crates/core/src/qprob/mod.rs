//! Quantum-probability kernel.
//!
//! Pure states are unit vectors, events are subspaces (yes/no observables) and
//! uncertain states are factorized density operators: a list of weighted pure
//! states `rho = sum_i p_i |v_i><v_i|`. The dense `d x d` form of an operator is
//! only ever built through [`ToDense`], which exists for tests and diagnostics.
//!
//! Every value is immutable once built and every operation returns a new value.

mod dense;
mod ensemble;
mod orthonormal;
mod state;
mod subspace;

pub use dense::{DenseMatrix, ToDense, DEFAULT_DENSE_BOUND};
pub use ensemble::{Component, Ensemble};
pub use state::{superpose, StateVector};
pub use subspace::Subspace;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Tolerance on vector norms and weight sums.
pub const NORM_TOL: f64 = 1e-10;

/// Overlap above which two components are treated as the same direction when
/// merging is enabled.
pub const PARALLEL_OVERLAP: f64 = 1.0 - 1e-8;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("vector is not unit-norm (norm = {norm})")]
    Normalization { norm: f64 },
    #[error("mixture weights must be non-negative and sum to 1 (sum = {sum})")]
    WeightSum { sum: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("superposition is the zero vector")]
    DegenerateSuperposition,
    #[error("measurement has probability {probability}, which contradicts the current state")]
    ImpossibleMeasurement { probability: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dense form of dimension {dim} exceeds the bound {bound}")]
    DenseTooLarge { dim: usize, bound: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
}

/// Numerical thresholds shared by the kernel operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Components whose weight falls to this value or below are dropped.
    pub rank_eps: f64,
    /// Residual norm at or below which a vector is absorbed by an
    /// orthonormal basis instead of extending it.
    pub ortho_eps: f64,
    /// Measurement probabilities at or below this value count as zero.
    pub zero_prob_eps: f64,
    /// Merge near-parallel components (overlap above [`PARALLEL_OVERLAP`])
    /// by adding their weights.
    pub merge_parallel: bool,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_eps: 1e-6,
            ortho_eps: 1e-8,
            zero_prob_eps: 1e-10,
            merge_parallel: false,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("rank_eps", self.rank_eps),
            ("ortho_eps", self.ortho_eps),
            ("zero_prob_eps", self.zero_prob_eps),
        ] {
            if !(value > 0.0 && value < 1e-2) {
                return Err(Error::Parameter(format!(
                    "{name} must lie in (0, 1e-2), got {value}"
                )));
            }
        }
        Ok(())
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

/// `<a|b>`, conjugate-linear in the first argument.
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(b)
        .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

pub(crate) fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// `a -= c * b`
pub(crate) fn axpy_sub(a: &mut [Complex64], c: Complex64, b: &[Complex64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x -= c * y;
    }
}

pub(crate) fn scale(a: &mut [Complex64], s: f64) {
    for x in a.iter_mut() {
        *x *= s;
    }
}
