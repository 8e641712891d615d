use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::orthonormal;
use super::{
    check_dim, inner, norm_sqr, Error, Result, StateVector, Subspace, Tolerances, NORM_TOL,
    PARALLEL_OVERLAP,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub state: StateVector,
}

/// Factorized density operator `rho = sum_i p_i |v_i><v_i|`.
///
/// Weights are strictly positive and sum to one; all states share `dim`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    dim: usize,
    components: Vec<Component>,
}

impl Ensemble {
    /// The pure state `|v><v|`.
    pub fn pure(v: StateVector) -> Self {
        Self {
            dim: v.dim(),
            components: vec![Component {
                weight: 1.0,
                state: v,
            }],
        }
    }

    /// Builds an ensemble from explicit weights, which must be non-negative
    /// and sum to one within `1e-10`. Zero-weight entries are skipped.
    pub fn from_components(pairs: Vec<(f64, StateVector)>) -> Result<Self> {
        let dim = pairs
            .first()
            .map(|(_, v)| v.dim())
            .ok_or(Error::Empty("ensemble without components"))?;
        let sum: f64 = pairs.iter().map(|(w, _)| *w).sum();
        if pairs.iter().any(|(w, _)| w.is_nan() || *w < 0.0) || (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::WeightSum { sum });
        }
        let mut components = Vec::with_capacity(pairs.len());
        for (weight, state) in pairs {
            check_dim(dim, state.dim())?;
            if weight > 0.0 {
                components.push(Component {
                    weight: weight / sum,
                    state,
                });
            }
        }
        Ok(Self { dim, components })
    }

    /// Equal-weight mixture of `states`.
    pub fn uniform(states: Vec<StateVector>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::Empty("ensemble without components"));
        }
        let w = 1.0 / n as f64;
        Self::from_components(states.into_iter().map(|s| (w, s)).collect())
    }

    /// Mixture with state weights proportional to `weights` (any positive
    /// scale).
    pub fn weighted(pairs: Vec<(f64, StateVector)>) -> Result<Self> {
        let total: f64 = pairs.iter().map(|(w, _)| *w).sum();
        if !total.is_finite() || total <= 0.0 || pairs.iter().any(|(w, _)| w.is_nan() || *w < 0.0) {
            return Err(Error::WeightSum { sum: total });
        }
        Self::from_components(pairs.into_iter().map(|(w, s)| (w / total, s)).collect())
    }

    /// Convex combination `sum_k q_k rho_k`.
    pub fn mixture(pairs: &[(f64, &Ensemble)]) -> Result<Self> {
        let (_, first) = pairs
            .first()
            .ok_or(Error::Empty("mixture of no ensembles"))?;
        let sum: f64 = pairs.iter().map(|(w, _)| *w).sum();
        if pairs.iter().any(|(w, _)| w.is_nan() || *w < 0.0) || (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::WeightSum { sum });
        }
        let mut components = Vec::new();
        for (q, rho) in pairs {
            check_dim(first.dim, rho.dim)?;
            if *q == 0.0 {
                continue;
            }
            components.extend(rho.components.iter().map(|c| Component {
                weight: q * c.weight / sum,
                state: c.state.clone(),
            }));
        }
        Ok(Self {
            dim: first.dim,
            components,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Number of stored components (an upper bound on the operator rank).
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Trace rule `tr(rho P_A) = sum_i p_i ||P_A v_i||^2`.
    pub fn probability(&self, event: &Subspace) -> Result<f64> {
        check_dim(self.dim, event.dim())?;
        if event.is_full() {
            return Ok(1.0);
        }
        if event.is_zero() {
            return Ok(0.0);
        }
        let p: f64 = self
            .components
            .iter()
            .map(|c| c.weight * event.projection_norm_sqr(c.state.amplitudes()))
            .sum();
        Ok(p.clamp(0.0, 1.0))
    }

    /// `P_A rho P_A / tr(rho P_A)`.
    pub fn condition(&self, event: &Subspace, tol: &Tolerances) -> Result<Ensemble> {
        self.condition_with_probability(event, tol)
            .map(|(rho, _)| rho)
    }

    /// Conditions on `event` and also returns the probability the event had
    /// before the update.
    pub fn condition_with_probability(
        &self,
        event: &Subspace,
        tol: &Tolerances,
    ) -> Result<(Ensemble, f64)> {
        check_dim(self.dim, event.dim())?;
        if event.is_full() {
            return Ok((self.clone(), 1.0));
        }
        let mut projected = Vec::with_capacity(self.components.len());
        let mut total = 0.0;
        for c in &self.components {
            let mut w = event.project(c.state.amplitudes());
            let n = norm_sqr(&w);
            if n <= 0.0 {
                continue;
            }
            total += c.weight * n;
            super::scale(&mut w, 1.0 / n.sqrt());
            projected.push((c.weight * n, w));
        }
        if total.is_nan() || total <= tol.zero_prob_eps {
            return Err(Error::ImpossibleMeasurement { probability: total });
        }
        let components = projected
            .into_iter()
            .map(|(w, v)| Component {
                weight: w / total,
                state: StateVector::from_unit(v),
            })
            .collect();
        let out = Self {
            dim: self.dim,
            components,
        };
        Ok((out.tidy(tol), total.min(1.0)))
    }

    /// Soft measurement `alpha (rho |> A) + (1 - alpha) rho`.
    pub fn alpha_update(&self, event: &Subspace, alpha: f64, tol: &Tolerances) -> Result<Ensemble> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Parameter(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )));
        }
        check_dim(self.dim, event.dim())?;
        if alpha == 0.0 {
            return Ok(self.clone());
        }
        let conditioned = self.condition(event, tol)?;
        if alpha == 1.0 {
            return Ok(conditioned);
        }
        Ok(Self::mixture(&[(alpha, &conditioned), (1.0 - alpha, self)])?.tidy(tol))
    }

    /// Drops components with weight `<= rank_eps`, optionally merges
    /// near-parallel ones, and renormalizes.
    pub(crate) fn tidy(self, tol: &Tolerances) -> Ensemble {
        let kept: Vec<Component> = self
            .components
            .iter()
            .filter(|c| c.weight > tol.rank_eps)
            .cloned()
            .collect();
        if kept.is_empty() {
            return self;
        }
        let mut merged: Vec<Component> = Vec::with_capacity(kept.len());
        if tol.merge_parallel {
            'outer: for c in kept {
                for m in merged.iter_mut() {
                    if inner(m.state.amplitudes(), c.state.amplitudes()).norm() > PARALLEL_OVERLAP {
                        m.weight += c.weight;
                        continue 'outer;
                    }
                }
                merged.push(c);
            }
        } else {
            merged = kept;
        }
        let sum: f64 = merged.iter().map(|c| c.weight).sum();
        for c in merged.iter_mut() {
            c.weight /= sum;
        }
        Self {
            dim: self.dim,
            components: merged,
        }
    }

    /// Exact re-factorization onto the eigenvectors of `rho`.
    ///
    /// The operator is expressed in an orthonormal basis of the span of the
    /// components, diagonalized there, and eigenvalues `<= rank_eps` are
    /// dropped. The result has at most `rank(rho)` components.
    pub fn compact(&self, tol: &Tolerances) -> Ensemble {
        let basis = orthonormal::orthonormalize(
            self.dim,
            self.components.iter().map(|c| c.state.amplitudes()),
            tol.ortho_eps,
        );
        let r = basis.len();
        if r == 0 || r >= self.components.len() {
            return self.clone();
        }
        let mut m = DMatrix::<Complex64>::zeros(r, r);
        for c in &self.components {
            let coords: Vec<Complex64> = basis
                .iter()
                .map(|q| inner(q, c.state.amplitudes()))
                .collect();
            for i in 0..r {
                for j in 0..r {
                    m[(i, j)] += coords[i] * coords[j].conj() * c.weight;
                }
            }
        }
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let mut components = Vec::with_capacity(r);
        for k in order {
            let lambda = eig.eigenvalues[k];
            if lambda <= tol.rank_eps {
                continue;
            }
            let mut v = vec![Complex64::new(0.0, 0.0); self.dim];
            for (i, q) in basis.iter().enumerate() {
                let u = eig.eigenvectors[(i, k)];
                for (o, x) in v.iter_mut().zip(q) {
                    *o += u * x;
                }
            }
            let Ok(state) = StateVector::normalized(v) else {
                continue;
            };
            components.push(Component {
                weight: lambda,
                state,
            });
        }
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        if components.is_empty() || sum.is_nan() || sum <= 0.0 {
            return self.clone();
        }
        for c in components.iter_mut() {
            c.weight /= sum;
        }
        Self {
            dim: self.dim,
            components,
        }
    }
}

impl<'de> Deserialize<'de> for Ensemble {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            components: Vec<Component>,
        }
        let raw = Raw::deserialize(d)?;
        Ensemble::from_components(
            raw.components
                .into_iter()
                .map(|c| (c.weight, c.state))
                .collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}
