//! Dense reference computations, independent of the factorized kernel.
//!
//! Operators are built as explicit `nalgebra` matrices from raw input
//! vectors; projectors onto spans come from an SVD rather than Gram-Schmidt.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qir_core::qprob::{DenseMatrix, Ensemble, StateVector, Subspace, Tolerances};
use rand::Rng;

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn outer(v: &[Complex64]) -> CMat {
    let n = v.len();
    CMat::from_fn(n, n, |i, j| v[i] * v[j].conj())
}

/// `sum_i w_i |v_i><v_i|` from explicit pairs.
pub fn mixture(pairs: &[(f64, Vec<Complex64>)], dim: usize) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    for (w, v) in pairs {
        m += outer(v) * c(*w);
    }
    m
}

/// Dense operator of an ensemble, summed straight from its components.
pub fn rho_of(rho: &Ensemble) -> CMat {
    let pairs: Vec<(f64, Vec<Complex64>)> = rho
        .components()
        .iter()
        .map(|comp| (comp.weight, comp.state.amplitudes().to_vec()))
        .collect();
    mixture(&pairs, rho.dim())
}

/// Projector onto the span of `vectors` via SVD; singular values below
/// `1e-8` (relative to the largest) are treated as zero.
pub fn span_projector(vectors: &[Vec<Complex64>], dim: usize) -> CMat {
    if vectors.is_empty() {
        return CMat::zeros(dim, dim);
    }
    let a = CMat::from_fn(dim, vectors.len(), |i, j| vectors[j][i]);
    let svd = a.svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut p = CMat::zeros(dim, dim);
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > 1e-8 * top.max(1e-300) {
            let col: Vec<Complex64> = u.column(k).iter().cloned().collect();
            p += outer(&col);
        }
    }
    p
}

pub fn rank_of(p: &CMat) -> usize {
    p.trace().re.round() as usize
}

/// Projector from a subspace's own basis.
pub fn projector_of(s: &Subspace) -> CMat {
    let basis: Vec<Vec<Complex64>> = s.basis().iter().map(|b| b.amplitudes().to_vec()).collect();
    let mut p = CMat::zeros(s.dim(), s.dim());
    for b in &basis {
        p += outer(b);
    }
    p
}

/// `tr(AB)` as the elementwise sum of `A_ik B_ki`.
pub fn trace_of_product(a: &CMat, b: &CMat) -> f64 {
    a.component_mul(&b.transpose()).sum().re
}

/// `P rho P / tr(rho P)`
pub fn condition(rho: &CMat, p: &CMat) -> CMat {
    let num = p * rho * p;
    let tr = num.trace();
    num / tr
}

pub fn max_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Spectral-norm distance between two Hermitian operators.
pub fn operator_distance(a: &CMat, b: &CMat) -> f64 {
    let d = a - b;
    d.singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn from_dense(m: &DenseMatrix) -> CMat {
    CMat::from_fn(m.dim(), m.dim(), |i, j| m.get(i, j))
}

pub fn real(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| c(x)).collect()
}

pub fn random_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let n: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn random_state<R: Rng>(rng: &mut R, dim: usize) -> StateVector {
    StateVector::new(random_vector(rng, dim)).unwrap()
}

/// Random ensemble with 1..=max_components components, plus its raw pairs.
pub fn random_ensemble<R: Rng>(
    rng: &mut R,
    dim: usize,
    max_components: usize,
) -> (Ensemble, Vec<(f64, Vec<Complex64>)>) {
    let n = rng.random_range(1..=max_components);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let pairs: Vec<(f64, Vec<Complex64>)> = raw
        .iter()
        .map(|w| (w / total, random_vector(rng, dim)))
        .collect();
    let ens = Ensemble::from_components(
        pairs
            .iter()
            .map(|(w, v)| (*w, StateVector::new(v.clone()).unwrap()))
            .collect(),
    )
    .unwrap();
    (ens, pairs)
}

/// Span of 1..=max_rank random vectors, plus the raw spanning vectors.
pub fn random_subspace<R: Rng>(
    rng: &mut R,
    dim: usize,
    max_rank: usize,
) -> (Subspace, Vec<Vec<Complex64>>) {
    let k = rng.random_range(1..=max_rank.min(dim));
    let raw: Vec<Vec<Complex64>> = (0..k).map(|_| random_vector(rng, dim)).collect();
    let states: Vec<StateVector> = raw
        .iter()
        .map(|v| StateVector::new(v.clone()).unwrap())
        .collect();
    (
        Subspace::span(&states, &Tolerances::default()).unwrap(),
        raw,
    )
}
