use std::borrow::Cow;

use num_complex::Complex64;

use super::orthonormal;
use super::{check_dim, inner, norm_sqr, Error, Result, StateVector, Tolerances, NORM_TOL};

/// A yes/no observable, stored as an orthonormal basis of its subspace.
///
/// The orthogonal complement of a subspace is kept in implicit form (the
/// basis of the excluded part plus a flag) so that negating a small subspace
/// of a large term space does not allocate a `d x d` basis. Every operation
/// treats both forms identically; [`Subspace::basis`] materializes the
/// explicit basis on request.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    dim: usize,
    basis: Vec<StateVector>,
    /// When set, the subspace is the orthogonal complement of `span(basis)`.
    complemented: bool,
}

impl Subspace {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            basis: Vec::new(),
            complemented: false,
        }
    }

    pub fn full(dim: usize) -> Self {
        Self {
            dim,
            basis: Vec::new(),
            complemented: true,
        }
    }

    /// Wraps a basis that is already orthonormal (checked within `1e-10`).
    pub fn from_orthonormal(dim: usize, basis: Vec<StateVector>) -> Result<Self> {
        for (i, b) in basis.iter().enumerate() {
            check_dim(dim, b.dim())?;
            for c in &basis[..i] {
                let overlap = inner(c.amplitudes(), b.amplitudes()).norm();
                if overlap > NORM_TOL {
                    return Err(Error::Parameter(format!(
                        "basis vectors {i} and earlier overlap by {overlap}"
                    )));
                }
            }
        }
        if basis.len() > dim {
            return Err(Error::Parameter(
                "more basis vectors than dimensions".into(),
            ));
        }
        Ok(Self {
            dim,
            basis,
            complemented: false,
        })
    }

    /// Orthonormal basis of the span of `vectors` by modified Gram-Schmidt in
    /// input order. Residuals of norm `<= tol.ortho_eps` are absorbed.
    pub fn span(vectors: &[StateVector], tol: &Tolerances) -> Result<Self> {
        let first = vectors.first().ok_or(Error::Empty("span of no vectors"))?;
        Self::span_in(first.dim(), vectors.iter(), tol)
    }

    /// Like [`Subspace::span`], with an explicit dimension so that an empty
    /// iterator yields the zero subspace.
    pub fn span_in<'a, I>(dim: usize, vectors: I, tol: &Tolerances) -> Result<Self>
    where
        I: IntoIterator<Item = &'a StateVector>,
    {
        let mut raw = Vec::new();
        for v in vectors {
            check_dim(dim, v.dim())?;
            if raw.len() < dim {
                orthonormal::extend(&mut raw, v.amplitudes(), tol.ortho_eps);
            }
        }
        Ok(Self::from_raw(dim, raw))
    }

    fn from_raw(dim: usize, raw: Vec<Vec<Complex64>>) -> Self {
        Self {
            dim,
            basis: raw.into_iter().map(StateVector::from_unit).collect(),
            complemented: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        if self.complemented {
            self.dim - self.basis.len()
        } else {
            self.basis.len()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rank() == 0
    }

    pub fn is_full(&self) -> bool {
        self.rank() == self.dim
    }

    /// Whether the subspace is held as the complement of a stored basis.
    pub fn is_implicit_complement(&self) -> bool {
        self.complemented && !self.basis.is_empty()
    }

    /// Explicit orthonormal basis, materialized for implicit complements.
    pub fn basis(&self) -> Cow<'_, [StateVector]> {
        if !self.complemented {
            return Cow::Borrowed(&self.basis);
        }
        let raw: Vec<Vec<Complex64>> = self.basis.iter().map(|b| b.amplitudes().to_vec()).collect();
        let comp = orthonormal::complement(self.dim, &raw);
        Cow::Owned(comp.into_iter().map(StateVector::from_unit).collect())
    }

    /// `|| P v ||^2`
    pub fn projection_norm_sqr(&self, v: &[Complex64]) -> f64 {
        let inside: f64 = self
            .basis
            .iter()
            .map(|b| inner(b.amplitudes(), v).norm_sqr())
            .sum();
        if self.complemented {
            (norm_sqr(v) - inside).max(0.0)
        } else {
            inside
        }
    }

    /// `P v`
    pub fn project(&self, v: &[Complex64]) -> Vec<Complex64> {
        if self.complemented {
            let mut r = v.to_vec();
            for b in &self.basis {
                let c = inner(b.amplitudes(), &r);
                super::axpy_sub(&mut r, c, b.amplitudes());
            }
            r
        } else {
            let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
            for b in &self.basis {
                let c = inner(b.amplitudes(), v);
                for (o, x) in out.iter_mut().zip(b.amplitudes()) {
                    *o += c * x;
                }
            }
            out
        }
    }

    /// Smallest subspace containing both `self` and `other`.
    pub fn join(&self, other: &Subspace, tol: &Tolerances) -> Result<Subspace> {
        check_dim(self.dim, other.dim)?;
        if self.is_full() || other.is_zero() {
            return Ok(self.clone());
        }
        if other.is_full() || self.is_zero() {
            return Ok(other.clone());
        }
        let own = self.basis();
        let theirs = other.basis();
        let mut raw: Vec<Vec<Complex64>> = own.iter().map(|b| b.amplitudes().to_vec()).collect();
        for v in theirs.iter() {
            if raw.len() == self.dim {
                break;
            }
            orthonormal::extend(&mut raw, v.amplitudes(), tol.ortho_eps);
        }
        Ok(Self::from_raw(self.dim, raw))
    }

    /// Orthogonal complement.
    pub fn complement(&self) -> Subspace {
        Self {
            dim: self.dim,
            basis: self.basis.clone(),
            complemented: !self.complemented,
        }
    }

    /// Whether `self` and `other` induce the same projector, checked by
    /// mutual containment of basis vectors.
    pub fn approx_eq(&self, other: &Subspace, eps: f64) -> bool {
        if self.dim != other.dim || self.rank() != other.rank() {
            return false;
        }
        other
            .basis()
            .iter()
            .all(|b| (self.projection_norm_sqr(b.amplitudes()) - 1.0).abs() <= eps)
    }
}
