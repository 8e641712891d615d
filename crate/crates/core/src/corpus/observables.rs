//! Observables built from the corpus: documents, queries, and the initial
//! density operator.

use std::collections::{BTreeMap, HashMap};

use crate::qprob::{Ensemble, Subspace, Tolerances};

use super::{Corpus, CorpusError, Document, Result};

impl Corpus {
    /// Span of the document's paragraph vectors.
    pub fn document_observable(&self, doc: &Document, tol: &Tolerances) -> Result<Subspace> {
        let states: Vec<_> = doc
            .usable_paragraphs()
            .filter_map(|p| p.vector.as_ref())
            .map(|v| v.to_state(self.dim()))
            .collect();
        if states.is_empty() {
            return Err(CorpusError::EmptyDocument(doc.doc_id.clone()));
        }
        Ok(Subspace::span(&states, tol)?)
    }

    /// Observables of every document, in corpus order.
    pub fn document_observables(&self, tol: &Tolerances) -> Result<Vec<Subspace>> {
        self.documents
            .iter()
            .map(|d| self.document_observable(d, tol))
            .collect()
    }

    fn query_weights(&self, query_terms: &[String]) -> BTreeMap<usize, f64> {
        let mut q: BTreeMap<usize, f64> = BTreeMap::new();
        for term in query_terms {
            if let Some(i) = self.term_index(&term.to_lowercase()) {
                *q.entry(i).or_default() += self.idf[i];
            }
        }
        q
    }

    /// Cosine between the query's tf-idf vector and each document's mean
    /// paragraph vector. Documents with zero similarity are left out; ties go
    /// to the smaller doc_id.
    pub fn baseline_scores(&self, query_terms: &[String]) -> Vec<(String, f64)> {
        let q = self.query_weights(query_terms);
        let q_norm = q.values().map(|x| x * x).sum::<f64>().sqrt();
        if q.is_empty() || q_norm == 0.0 {
            return Vec::new();
        }
        let mut scored: Vec<(String, f64)> = self
            .documents
            .iter()
            .zip(&self.doc_means)
            .filter_map(|(doc, (mean, norm))| {
                let dot: f64 = mean
                    .iter()
                    .filter_map(|(i, x)| q.get(i).map(|w| w * x))
                    .sum();
                (dot > 0.0 && *norm > 0.0).then(|| (doc.doc_id.clone(), dot / (q_norm * norm)))
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored
    }

    /// Top `k` doc_ids of the baseline ranker.
    pub fn baseline_rank(&self, query_terms: &[String], k: usize) -> Vec<String> {
        let mut ranked = self.baseline_scores(query_terms);
        ranked.truncate(k);
        ranked.into_iter().map(|(id, _)| id).collect()
    }

    /// Query observable by pseudo-relevance feedback: the join of the
    /// observables of the top `k` baseline documents.
    pub fn query_observable_prf(
        &self,
        query_terms: &[String],
        k: usize,
        tol: &Tolerances,
    ) -> Result<Subspace> {
        let top = self.baseline_rank(query_terms, k.max(1));
        if top.is_empty() {
            return Err(CorpusError::Unanchorable(query_terms.join(" ")));
        }
        let mut joined = Subspace::zero(self.dim());
        for id in &top {
            let doc = self.document(id).expect("baseline ranks corpus documents");
            joined = joined.join(&self.document_observable(doc, tol)?, tol)?;
        }
        Ok(joined)
    }

    /// Query observable as the span of every paragraph containing at least
    /// one query term.
    pub fn query_observable_terms(
        &self,
        query_terms: &[String],
        tol: &Tolerances,
    ) -> Result<Subspace> {
        let terms: Vec<String> = query_terms
            .iter()
            .map(|t| t.to_lowercase())
            .filter(|t| self.term_index(t).is_some())
            .collect();
        if terms.is_empty() {
            return Err(CorpusError::Unanchorable(query_terms.join(" ")));
        }
        let states: Vec<_> = self
            .documents
            .iter()
            .flat_map(|d| d.usable_paragraphs())
            .filter(|p| terms.iter().any(|t| p.term_counts.contains_key(t)))
            .filter_map(|p| p.vector.as_ref())
            .map(|v| v.to_state(self.dim()))
            .collect();
        Ok(Subspace::span_in(self.dim(), states.iter(), tol)?)
    }

    /// Uniform mixture over all usable paragraph vectors.
    pub fn initial_density(&self) -> Result<Ensemble> {
        let states: Vec<_> = self
            .paragraph_states()
            .into_iter()
            .map(|(_, s)| s)
            .collect();
        if states.is_empty() {
            return Err(CorpusError::Ingestion {
                message: "corpus has no usable paragraph".into(),
                report: None,
            });
        }
        Ok(Ensemble::uniform(states)?)
    }

    /// Mixture over paragraph vectors where each paragraph's weight is
    /// proportional to its document's prior. Documents missing from `priors`
    /// get prior 0.
    pub fn initial_density_with_priors(&self, priors: &HashMap<String, f64>) -> Result<Ensemble> {
        let pairs: Vec<_> = self
            .paragraph_states()
            .into_iter()
            .map(|(d, s)| {
                let prior = priors
                    .get(&self.documents[d].doc_id)
                    .copied()
                    .unwrap_or(0.0);
                (prior, s)
            })
            .collect();
        Ok(Ensemble::weighted(pairs)?)
    }
}
