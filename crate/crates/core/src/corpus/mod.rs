//! Corpus ingestion and the term space.
//!
//! Dimensions of the space are vocabulary terms (lexicographic order). Each
//! usable paragraph becomes one pure state: its tf-idf vector, normalized.

mod index;
mod observables;
mod tokenize;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::qprob::{self, StateVector};

pub use index::{IndexFile, INDEX_VERSION};
pub use tokenize::{default_stopwords, tokenize};

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("ingestion failed: {message}")]
    Ingestion {
        message: String,
        report: Option<Box<IngestReport>>,
    },
    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),
    #[error("paragraph {0:?} has no in-vocabulary term")]
    EmptyVector(String),
    #[error("document {0:?} has no usable paragraph")]
    EmptyDocument(String),
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("query {0:?} cannot be anchored in the corpus")]
    Unanchorable(String),
    #[error("invalid index: {0}")]
    Index(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Qprob(#[from] qprob::Error),
}

/// One input record of the JSON Lines corpus format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDocument {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    pub paragraphs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Minimum number of documents a term must occur in.
    pub min_df: usize,
    pub stopwords: BTreeSet<String>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            min_df: 1,
            stopwords: default_stopwords(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub documents_in: usize,
    pub documents_indexed: usize,
    pub documents_excluded: Vec<String>,
    pub paragraphs_total: usize,
    pub paragraphs_excluded: usize,
    pub excluded_paragraphs: Vec<String>,
    pub vocabulary_size: usize,
}

/// Unit-norm sparse vector over the vocabulary, sorted by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseVector(pub Vec<(usize, f64)>);

impl SparseVector {
    pub fn to_state(&self, dim: usize) -> StateVector {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        for &(i, x) in &self.0 {
            amps[i] = Complex64::new(x, 0.0);
        }
        StateVector::normalized(amps).expect("sparse paragraph vectors are non-zero")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub para_id: String,
    pub text: String,
    /// Counts of in-vocabulary terms.
    pub term_counts: BTreeMap<String, u32>,
    /// Normalized tf-idf vector; `None` when the paragraph has no
    /// in-vocabulary term.
    pub vector: Option<SparseVector>,
}

impl Paragraph {
    pub fn is_usable(&self) -> bool {
        self.vector.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub paragraphs: Vec<Paragraph>,
}

impl Document {
    pub fn usable_paragraphs(&self) -> impl Iterator<Item = &Paragraph> {
        self.paragraphs.iter().filter(|p| p.is_usable())
    }
}

/// An ingested, immutable corpus.
#[derive(Debug, Clone)]
pub struct Corpus {
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    documents: Vec<Document>,
    stopwords: BTreeSet<String>,
    min_df: usize,
    report: IngestReport,
    term_index: HashMap<String, usize>,
    doc_index: HashMap<String, usize>,
    /// Mean of each document's paragraph vectors, with its Euclidean norm.
    doc_means: Vec<(Vec<(usize, f64)>, f64)>,
}

/// `ln(1 + N / df)`
pub fn idf(num_docs: usize, df: usize) -> f64 {
    (1.0 + num_docs as f64 / df as f64).ln()
}

impl Corpus {
    /// Tokenizes, builds the vocabulary and computes paragraph vectors.
    pub fn ingest(raw: &[RawDocument], config: &IngestConfig) -> Result<Corpus> {
        let mut report = IngestReport {
            documents_in: raw.len(),
            ..IngestReport::default()
        };
        if raw.is_empty() {
            return Err(CorpusError::Ingestion {
                message: "empty input".into(),
                report: Some(Box::new(report)),
            });
        }
        let mut seen = BTreeSet::new();
        for doc in raw {
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(CorpusError::DuplicateDocId(doc.doc_id.clone()));
            }
        }

        let tokenized: Vec<Vec<Vec<String>>> = raw
            .iter()
            .map(|d| {
                d.paragraphs
                    .iter()
                    .map(|p| tokenize(p, &config.stopwords))
                    .collect()
            })
            .collect();

        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in &tokenized {
            let terms: BTreeSet<&str> = doc.iter().flatten().map(String::as_str).collect();
            for t in terms {
                *df.entry(t).or_default() += 1;
            }
        }
        let min_df = config.min_df.max(1);
        let vocabulary: Vec<String> = df
            .iter()
            .filter(|(_, &n)| n >= min_df)
            .map(|(t, _)| t.to_string())
            .collect();
        let vocab_set: BTreeSet<&str> = vocabulary.iter().map(String::as_str).collect();

        let mut documents = Vec::new();
        for (doc, tokens) in raw.iter().zip(&tokenized) {
            let mut paragraphs = Vec::with_capacity(doc.paragraphs.len());
            for (i, (text, toks)) in doc.paragraphs.iter().zip(tokens).enumerate() {
                let para_id = format!("{}#{}", doc.doc_id, i);
                let mut term_counts = BTreeMap::new();
                for t in toks.iter().filter(|t| vocab_set.contains(t.as_str())) {
                    *term_counts.entry(t.clone()).or_insert(0u32) += 1;
                }
                report.paragraphs_total += 1;
                if term_counts.is_empty() {
                    tracing::debug!(%para_id, "paragraph has no vocabulary term, excluded");
                    report.paragraphs_excluded += 1;
                    report.excluded_paragraphs.push(para_id.clone());
                }
                paragraphs.push(Paragraph {
                    para_id,
                    text: text.clone(),
                    term_counts,
                    vector: None,
                });
            }
            if paragraphs.iter().all(|p| p.term_counts.is_empty()) {
                tracing::debug!(doc_id = %doc.doc_id, "document has no usable paragraph, excluded");
                report.documents_excluded.push(doc.doc_id.clone());
                continue;
            }
            documents.push(Document {
                doc_id: doc.doc_id.clone(),
                title: doc.title.clone(),
                paragraphs,
            });
        }
        report.documents_indexed = documents.len();
        report.vocabulary_size = vocabulary.len();
        if documents.is_empty() || vocabulary.is_empty() {
            return Err(CorpusError::Ingestion {
                message: "no document survives tokenization and filtering".into(),
                report: Some(Box::new(report)),
            });
        }

        let n = documents.len();
        let idf: Vec<f64> = vocabulary.iter().map(|t| idf(n, df[t.as_str()])).collect();
        let mut corpus = Corpus::assemble(vocabulary, idf, documents, config, report);
        let vectors: Vec<Vec<Option<SparseVector>>> = corpus
            .documents
            .iter()
            .map(|d| {
                d.paragraphs
                    .iter()
                    .map(|p| corpus.sparse_tfidf(&p.term_counts))
                    .collect()
            })
            .collect();
        for (doc, vs) in corpus.documents.iter_mut().zip(vectors) {
            for (p, v) in doc.paragraphs.iter_mut().zip(vs) {
                p.vector = v;
            }
        }
        corpus.doc_means = compute_doc_means(&corpus.documents);
        Ok(corpus)
    }

    fn assemble(
        vocabulary: Vec<String>,
        idf: Vec<f64>,
        documents: Vec<Document>,
        config: &IngestConfig,
        report: IngestReport,
    ) -> Corpus {
        let term_index = vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let doc_index = documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.clone(), i))
            .collect();
        let doc_means = compute_doc_means(&documents);
        Corpus {
            vocabulary,
            idf,
            documents,
            stopwords: config.stopwords.clone(),
            min_df: config.min_df,
            report,
            term_index,
            doc_index,
            doc_means,
        }
    }

    /// Parses the JSON Lines corpus format. Errors name the 1-based line.
    pub fn parse_jsonl(input: &str) -> Result<Vec<RawDocument>> {
        let mut docs = Vec::new();
        for (i, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let doc: RawDocument =
                serde_json::from_str(line).map_err(|e| CorpusError::Ingestion {
                    message: format!("line {}: {e}", i + 1),
                    report: None,
                })?;
            docs.push(doc);
        }
        Ok(docs)
    }

    fn sparse_tfidf(&self, counts: &BTreeMap<String, u32>) -> Option<SparseVector> {
        let mut entries: Vec<(usize, f64)> = counts
            .iter()
            .filter_map(|(t, &c)| self.term_index.get(t).map(|&i| (i, c as f64 * self.idf[i])))
            .filter(|&(_, x)| x > 0.0)
            .collect();
        if entries.is_empty() {
            return None;
        }
        entries.sort_by_key(|&(i, _)| i);
        let norm = entries.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
        for e in entries.iter_mut() {
            e.1 /= norm;
        }
        Some(SparseVector(entries))
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.term_index.get(term).copied()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.doc_index.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn document_position(&self, doc_id: &str) -> Option<usize> {
        self.doc_index.get(doc_id).copied()
    }

    pub fn report(&self) -> &IngestReport {
        &self.report
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    /// Tokenizes free text with the corpus' own stopword list.
    pub fn query_terms(&self, text: &str) -> Vec<String> {
        tokenize(text, &self.stopwords)
    }

    /// Normalized tf-idf vector of a paragraph, computed from its term counts.
    pub fn paragraph_vector(&self, p: &Paragraph) -> Result<StateVector> {
        self.sparse_tfidf(&p.term_counts)
            .map(|v| v.to_state(self.dim()))
            .ok_or_else(|| CorpusError::EmptyVector(p.para_id.clone()))
    }

    /// Every usable paragraph vector, in corpus order, with its document
    /// position.
    pub fn paragraph_states(&self) -> Vec<(usize, StateVector)> {
        self.documents
            .iter()
            .enumerate()
            .flat_map(|(d, doc)| {
                doc.usable_paragraphs()
                    .filter_map(move |p| p.vector.as_ref().map(|v| (d, v)))
            })
            .map(|(d, v)| (d, v.to_state(self.dim())))
            .collect()
    }
}

fn compute_doc_means(documents: &[Document]) -> Vec<(Vec<(usize, f64)>, f64)> {
    documents
        .iter()
        .map(|d| {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            let mut n = 0usize;
            for v in d.paragraphs.iter().filter_map(|p| p.vector.as_ref()) {
                n += 1;
                for &(i, x) in &v.0 {
                    *acc.entry(i).or_default() += x;
                }
            }
            let mean: Vec<(usize, f64)> = acc
                .into_iter()
                .map(|(i, x)| (i, x / n.max(1) as f64))
                .collect();
            let norm = mean.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
            (mean, norm)
        })
        .collect()
}
