//! Rank-revealing modified Gram-Schmidt.

use num_complex::Complex64;

use super::{axpy_sub, inner, norm_sqr, scale};

/// One modified Gram-Schmidt sweep of `r` against `basis`.
fn sweep(basis: &[Vec<Complex64>], r: &mut [Complex64]) {
    for q in basis {
        let c = inner(q, r);
        axpy_sub(r, c, q);
    }
}

/// Orthogonalizes `candidate` against `basis` (two sweeps) and appends the
/// normalized residual if its norm, relative to the candidate's, exceeds
/// `eps`. Returns whether the basis grew.
pub(crate) fn extend(basis: &mut Vec<Vec<Complex64>>, candidate: &[Complex64], eps: f64) -> bool {
    let scale_ref = norm_sqr(candidate).sqrt();
    if scale_ref == 0.0 || !scale_ref.is_finite() {
        return false;
    }
    let mut r = candidate.to_vec();
    sweep(basis, &mut r);
    let first = norm_sqr(&r).sqrt();
    if first <= eps * scale_ref {
        return false;
    }
    sweep(basis, &mut r);
    let norm = norm_sqr(&r).sqrt();
    if norm <= eps * scale_ref {
        return false;
    }
    scale(&mut r, 1.0 / norm);
    basis.push(r);
    true
}

/// Orthonormal basis of the span of `vectors`, processed in input order.
pub(crate) fn orthonormalize<'a, I>(dim: usize, vectors: I, eps: f64) -> Vec<Vec<Complex64>>
where
    I: IntoIterator<Item = &'a [Complex64]>,
{
    let mut basis = Vec::new();
    for v in vectors {
        if basis.len() == dim {
            break;
        }
        extend(&mut basis, v, eps);
    }
    basis
}

/// Orthonormal basis of the orthogonal complement of `basis` (which must be
/// orthonormal). Standard basis vectors are pivoted by largest residual, ties
/// going to the lower index.
pub(crate) fn complement(dim: usize, basis: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let target = dim.saturating_sub(basis.len());
    let mut full: Vec<Vec<Complex64>> = basis.to_vec();
    let mut out = Vec::with_capacity(target);
    // residual[i] = || (I - Q Q^dagger) e_i ||^2
    let mut residual: Vec<f64> = (0..dim)
        .map(|i| 1.0 - full.iter().map(|q| q[i].norm_sqr()).sum::<f64>())
        .collect();
    while out.len() < target {
        let (pivot, best) =
            residual
                .iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, r)| if r > acc.1 { (i, r) } else { acc },
                );
        if best <= 1e-12 {
            break;
        }
        let mut e = vec![Complex64::new(0.0, 0.0); dim];
        e[pivot] = Complex64::new(1.0, 0.0);
        if !extend(&mut full, &e, 1e-12) {
            residual[pivot] = 0.0;
            continue;
        }
        let q = full.last().expect("basis just grew").clone();
        for (r, x) in residual.iter_mut().zip(&q) {
            *r -= x.norm_sqr();
        }
        out.push(q);
    }
    out
}
