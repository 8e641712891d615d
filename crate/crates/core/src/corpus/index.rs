use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Document, IngestConfig, IngestReport, Result};

pub const INDEX_VERSION: &str = "qir-index-v1";

/// On-disk index layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexFile {
    pub version: String,
    pub min_df: usize,
    pub stopwords: BTreeSet<String>,
    pub vocabulary: Vec<String>,
    pub idf: Vec<f64>,
    pub documents: Vec<Document>,
    pub report: IngestReport,
}

impl Corpus {
    pub fn to_index(&self) -> IndexFile {
        IndexFile {
            version: INDEX_VERSION.to_string(),
            min_df: self.min_df,
            stopwords: self.stopwords.clone(),
            vocabulary: self.vocabulary.clone(),
            idf: self.idf.clone(),
            documents: self.documents.clone(),
            report: self.report.clone(),
        }
    }

    pub fn from_index(index: IndexFile) -> Result<Corpus> {
        if index.version != INDEX_VERSION {
            return Err(CorpusError::Index(format!(
                "unsupported version {:?}, expected {INDEX_VERSION:?}",
                index.version
            )));
        }
        let dim = index.vocabulary.len();
        if index.idf.len() != dim {
            return Err(CorpusError::Index(format!(
                "{} idf weights for {dim} terms",
                index.idf.len()
            )));
        }
        let unique: BTreeSet<&String> = index.vocabulary.iter().collect();
        if unique.len() != dim {
            return Err(CorpusError::Index("duplicate vocabulary term".into()));
        }
        if index.documents.is_empty() {
            return Err(CorpusError::Index("no documents".into()));
        }
        let mut ids = BTreeSet::new();
        for doc in &index.documents {
            if !ids.insert(&doc.doc_id) {
                return Err(CorpusError::DuplicateDocId(doc.doc_id.clone()));
            }
            if doc.usable_paragraphs().next().is_none() {
                return Err(CorpusError::EmptyDocument(doc.doc_id.clone()));
            }
            for v in doc.paragraphs.iter().filter_map(|p| p.vector.as_ref()) {
                let norm: f64 = v.0.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
                if v.0.iter().any(|&(i, _)| i >= dim) || (norm - 1.0).abs() > 1e-9 {
                    return Err(CorpusError::Index(format!(
                        "malformed paragraph vector in document {:?}",
                        doc.doc_id
                    )));
                }
            }
        }
        let config = IngestConfig {
            min_df: index.min_df,
            stopwords: index.stopwords,
        };
        Ok(Corpus::assemble(
            index.vocabulary,
            index.idf,
            index.documents,
            &config,
            index.report,
        ))
    }

    /// Serialized index bytes; identical corpora give identical bytes.
    pub fn index_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec(&self.to_index())?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.index_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Corpus> {
        let bytes = std::fs::read(path)?;
        let index: IndexFile = serde_json::from_slice(&bytes)?;
        Corpus::from_index(index)
    }
}
