use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_dim, inner, norm_sqr, Error, Result, NORM_TOL};

/// Magnitude below which a linear combination is considered zero.
const DEGENERATE_NORM: f64 = 1e-12;

/// A pure information need: a unit vector in a complex space of dimension >= 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Wraps `amplitudes`, which must already have unit norm.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Empty("state vector needs at least one amplitude"));
        }
        let norm = norm_sqr(&amplitudes).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Normalization { norm });
        }
        Ok(Self { amplitudes })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Empty("state vector needs at least one amplitude"));
        }
        let norm = norm_sqr(&amplitudes).sqrt();
        if !norm.is_finite() || norm <= DEGENERATE_NORM {
            return Err(Error::Normalization { norm });
        }
        super::scale(&mut amplitudes, 1.0 / norm);
        Ok(Self { amplitudes })
    }

    pub fn normalized_real(values: &[f64]) -> Result<Self> {
        Self::normalized(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Standard basis vector `e_index`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Parameter(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    /// Caller guarantees the norm invariant.
    pub(crate) fn from_unit(amplitudes: Vec<Complex64>) -> Self {
        debug_assert!((norm_sqr(&amplitudes).sqrt() - 1.0).abs() < 1e-8);
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        check_dim(self.dim(), other.dim())?;
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }
}

impl TryFrom<Vec<Complex64>> for StateVector {
    type Error = Error;

    fn try_from(value: Vec<Complex64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<StateVector> for Vec<Complex64> {
    fn from(value: StateVector) -> Self {
        value.amplitudes
    }
}

/// Normalized linear combination `sum_j c_j |v_j>`.
pub fn superpose(coeffs: &[Complex64], vectors: &[StateVector]) -> Result<StateVector> {
    if coeffs.len() != vectors.len() {
        return Err(Error::Parameter(format!(
            "{} coefficients for {} vectors",
            coeffs.len(),
            vectors.len()
        )));
    }
    let first = vectors
        .first()
        .ok_or(Error::Empty("superposition of no vectors"))?;
    let mut out = vec![Complex64::new(0.0, 0.0); first.dim()];
    for (c, v) in coeffs.iter().zip(vectors) {
        check_dim(first.dim(), v.dim())?;
        for (o, a) in out.iter_mut().zip(v.amplitudes()) {
            *o += c * a;
        }
    }
    match StateVector::normalized(out) {
        Err(Error::Normalization { .. }) => Err(Error::DegenerateSuperposition),
        other => other,
    }
}
