use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Ensemble, Error, Result, Subspace};

/// Largest dimension [`ToDense::to_dense`] will expand.
pub const DEFAULT_DENSE_BOUND: usize = 64;

/// Square complex matrix, row-major. Serializes as an array of rows, each an
/// array of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks(self.dim.max(1))
    }

    /// Adds `weight |v><v|`.
    fn add_outer(&mut self, weight: f64, v: &[Complex64]) {
        for (i, vi) in v.iter().enumerate() {
            if *vi == Complex64::new(0.0, 0.0) {
                continue;
            }
            let row = &mut self.data[i * self.dim..(i + 1) * self.dim];
            for (x, vj) in row.iter_mut().zip(v) {
                *x += vi * vj.conj() * weight;
            }
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "dense dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "dense dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl Serialize for DenseMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = self
            .rows()
            .take(self.dim)
            .map(|r| r.iter().map(|c| [c.re, c.im]).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DenseMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(serde::de::Error::custom("dense matrix must be square"));
            }
            data.extend(row.into_iter().map(|[re, im]| Complex64::new(re, im)));
        }
        Ok(Self { dim, data })
    }
}

/// Expansion into an explicit `d x d` operator, for tests and diagnostics.
pub trait ToDense {
    fn to_dense_bounded(&self, bound: usize) -> Result<DenseMatrix>;

    fn to_dense(&self) -> Result<DenseMatrix> {
        self.to_dense_bounded(DEFAULT_DENSE_BOUND)
    }
}

fn check_bound(dim: usize, bound: usize) -> Result<()> {
    if dim > bound {
        Err(Error::DenseTooLarge { dim, bound })
    } else {
        Ok(())
    }
}

impl ToDense for Ensemble {
    fn to_dense_bounded(&self, bound: usize) -> Result<DenseMatrix> {
        check_bound(self.dim(), bound)?;
        let mut m = DenseMatrix::zeros(self.dim());
        for c in self.components() {
            m.add_outer(c.weight, c.state.amplitudes());
        }
        Ok(m)
    }
}

impl ToDense for Subspace {
    fn to_dense_bounded(&self, bound: usize) -> Result<DenseMatrix> {
        check_bound(self.dim(), bound)?;
        let mut m = DenseMatrix::zeros(self.dim());
        for b in self.basis().iter() {
            m.add_outer(1.0, b.amplitudes());
        }
        Ok(m)
    }
}
