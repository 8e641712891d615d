//! Session engine: the user model `rho_t` driven by interaction events.
//!
//! Queries are hard measurements of their query observable; clicks and
//! judgments are soft (alpha) updates toward a document observable, or toward
//! its complement for negative judgments. A query whose probability under the
//! current state falls below the drift threshold is read as a new information
//! need: the state is rebuilt from the initial density conditioned on the
//! query.

mod log;

use std::borrow::Cow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusError};
use crate::qprob::{self, Ensemble, Subspace, Tolerances};

pub use log::{parse_log, render_log, replay, LogLine, ReplayError};

pub type Result<T> = std::result::Result<T, SessionError>;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("invalid session config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Qprob(#[from] qprob::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    /// Join of the observables of the top baseline documents.
    #[default]
    Prf,
    /// Span of every paragraph containing a query term.
    TermUnion,
}

impl std::str::FromStr for QueryMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "prf" => Ok(QueryMode::Prf),
            "term_union" => Ok(QueryMode::TermUnion),
            other => Err(format!(
                "unknown query mode {other:?} (expected prf or term_union)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub alpha_click: f64,
    pub alpha_judgment: f64,
    /// `None` conditions hard on queries. `Some(a)` turns queries into alpha
    /// updates, and a drift rebase into the mixture
    /// `a (rho_0 |> O_q) + (1 - a) rho_t`.
    pub alpha_query: Option<f64>,
    pub query_mode: QueryMode,
    pub prf_k: usize,
    pub drift_threshold: f64,
    pub tolerances: Tolerances,
    /// Above this many components the state is re-factorized onto its
    /// eigenvectors.
    pub max_components: usize,
    /// User context observable, measured once when the session starts.
    #[serde(skip)]
    pub context: Option<Subspace>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            alpha_click: 0.3,
            alpha_judgment: 0.6,
            alpha_query: None,
            query_mode: QueryMode::Prf,
            prf_k: 5,
            drift_threshold: 0.1,
            tolerances: Tolerances::default(),
            max_components: 512,
            context: None,
        }
    }
}

fn check_alpha(name: &str, alpha: f64) -> std::result::Result<(), String> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(format!("{name} must lie in [0, 1], got {alpha}"))
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        let check = || -> std::result::Result<(), String> {
            check_alpha("alpha_click", self.alpha_click)?;
            check_alpha("alpha_judgment", self.alpha_judgment)?;
            if let Some(a) = self.alpha_query {
                check_alpha("alpha_query", a)?;
            }
            if !(self.drift_threshold > 0.0 && self.drift_threshold < 1.0) {
                return Err(format!(
                    "drift threshold must lie in (0, 1), got {}",
                    self.drift_threshold
                ));
            }
            if self.prf_k == 0 {
                return Err("prf_k must be at least 1".into());
            }
            if self.max_components == 0 {
                return Err("max_components must be at least 1".into());
            }
            self.tolerances.validate().map_err(|e| e.to_string())
        };
        check().map_err(SessionError::Config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InteractionEvent {
    Query {
        text: String,
    },
    Click {
        doc_id: String,
        /// Per-event override of `alpha_click`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    },
    Judgment {
        doc_id: String,
        positive: bool,
        /// Per-event override of `alpha_judgment`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    },
    Reset,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionDiagnostics {
    /// Probability of the event's observable under the state before the
    /// update.
    #[serde(rename = "p")]
    pub event_probability: f64,
    #[serde(rename = "drift")]
    pub drift_flagged: bool,
    /// Number of components of the updated state.
    #[serde(rename = "rank")]
    pub ensemble_rank: usize,
    /// The kernel reported an impossible measurement and the state was
    /// rebased instead.
    #[serde(default, skip_serializing_if = "is_false")]
    pub recovered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub t: u64,
    pub event: InteractionEvent,
    pub diag: SessionDiagnostics,
}

#[derive(Debug, Clone)]
pub struct SessionState {
    pub session_id: String,
    pub rho: Ensemble,
    /// State after context conditioning; `Reset` returns here.
    pub base: Ensemble,
    pub history: Vec<HistoryEntry>,
    pub config: SessionConfig,
}

impl SessionState {
    pub fn last_diagnostics(&self) -> Option<&SessionDiagnostics> {
        self.history.last().map(|h| &h.diag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDoc {
    pub doc_id: String,
    pub probability: f64,
}

/// Shared, read-only machinery for every session over one corpus.
#[derive(Debug, Clone)]
pub struct Engine {
    corpus: Arc<Corpus>,
    tolerances: Tolerances,
    doc_observables: Vec<Subspace>,
    rho0: Ensemble,
}

impl Engine {
    pub fn new(corpus: Arc<Corpus>) -> Result<Self> {
        Self::with_tolerances(corpus, Tolerances::default())
    }

    pub fn with_tolerances(corpus: Arc<Corpus>, tolerances: Tolerances) -> Result<Self> {
        tolerances.validate()?;
        let doc_observables = corpus.document_observables(&tolerances)?;
        let rho0 = corpus.initial_density()?;
        Ok(Self {
            corpus,
            tolerances,
            doc_observables,
            rho0,
        })
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn initial_density(&self) -> &Ensemble {
        &self.rho0
    }

    pub fn document_observable(&self, doc_id: &str, tol: &Tolerances) -> Result<Cow<'_, Subspace>> {
        let pos = self
            .corpus
            .document_position(doc_id)
            .ok_or_else(|| SessionError::UnknownDocument(doc_id.to_string()))?;
        Ok(self.observable_at(pos, tol)?)
    }

    fn observable_at(
        &self,
        pos: usize,
        tol: &Tolerances,
    ) -> std::result::Result<Cow<'_, Subspace>, CorpusError> {
        if tol.ortho_eps == self.tolerances.ortho_eps {
            Ok(Cow::Borrowed(&self.doc_observables[pos]))
        } else {
            let doc = &self.corpus.documents()[pos];
            self.corpus.document_observable(doc, tol).map(Cow::Owned)
        }
    }

    pub fn query_observable(
        &self,
        query_terms: &[String],
        config: &SessionConfig,
    ) -> Result<Subspace> {
        let tol = &config.tolerances;
        Ok(match config.query_mode {
            QueryMode::Prf => self
                .corpus
                .query_observable_prf(query_terms, config.prf_k, tol)?,
            QueryMode::TermUnion => self.corpus.query_observable_terms(query_terms, tol)?,
        })
    }

    /// Context observable from free text (paragraphs containing its terms).
    pub fn context_from_text(&self, text: &str, tol: &Tolerances) -> Result<Subspace> {
        let terms = self.corpus.query_terms(text);
        Ok(self.corpus.query_observable_terms(&terms, tol)?)
    }

    /// `rho_0`, conditioned on the context observable when one is configured.
    pub fn new_session(
        &self,
        session_id: impl Into<String>,
        config: SessionConfig,
    ) -> Result<SessionState> {
        config.validate()?;
        let rho = match &config.context {
            Some(ctx) => self.rho0.condition(ctx, &config.tolerances)?,
            None => self.rho0.clone(),
        };
        Ok(SessionState {
            session_id: session_id.into(),
            base: rho.clone(),
            rho,
            history: Vec::new(),
            config,
        })
    }

    /// Checks an event against the corpus without applying it.
    pub fn validate_event(&self, event: &InteractionEvent) -> Result<()> {
        match event {
            InteractionEvent::Query { text } => {
                if self.corpus.query_terms(text).is_empty() {
                    return Err(SessionError::InvalidEvent(format!(
                        "query {text:?} has no searchable term"
                    )));
                }
            }
            InteractionEvent::Click { doc_id, alpha }
            | InteractionEvent::Judgment { doc_id, alpha, .. } => {
                if self.corpus.document(doc_id).is_none() {
                    return Err(SessionError::UnknownDocument(doc_id.clone()));
                }
                if let Some(a) = alpha {
                    check_alpha("alpha", *a).map_err(SessionError::InvalidEvent)?;
                }
            }
            InteractionEvent::Reset => {}
        }
        Ok(())
    }

    /// Applies `event`, returning the next state and the diagnostics that
    /// were appended to its history.
    pub fn handle_event(
        &self,
        state: &SessionState,
        event: &InteractionEvent,
    ) -> Result<(SessionState, SessionDiagnostics)> {
        let mut next = state.clone();
        let diag = self.apply(&mut next, event)?;
        Ok((next, diag))
    }

    /// In-place form of [`Engine::handle_event`]. On error the state is left
    /// untouched.
    pub fn apply(
        &self,
        state: &mut SessionState,
        event: &InteractionEvent,
    ) -> Result<SessionDiagnostics> {
        self.validate_event(event)?;
        let config = &state.config;
        let tol = &config.tolerances;
        let (rho, mut diag) = match event {
            InteractionEvent::Query { text } => {
                let terms = self.corpus.query_terms(text);
                let obs = self.query_observable(&terms, config)?;
                self.measure_query(&state.rho, &obs, config)?
            }
            InteractionEvent::Click { doc_id, alpha } => {
                let obs = self.document_observable(doc_id, tol)?;
                let alpha = alpha.unwrap_or(config.alpha_click);
                self.soft_measure(&state.rho, &obs, alpha, tol)?
            }
            InteractionEvent::Judgment {
                doc_id,
                positive,
                alpha,
            } => {
                let obs = self.document_observable(doc_id, tol)?;
                let obs = if *positive {
                    obs
                } else {
                    Cow::Owned(obs.complement())
                };
                let alpha = alpha.unwrap_or(config.alpha_judgment);
                self.soft_measure(&state.rho, &obs, alpha, tol)?
            }
            InteractionEvent::Reset => (state.base.clone(), diagnostics(1.0, false, false)),
        };
        let rho = if rho.len() > config.max_components {
            rho.compact(tol)
        } else {
            rho
        };
        diag.ensemble_rank = rho.len();
        state.rho = rho;
        let t = state.history.len() as u64;
        state.history.push(HistoryEntry {
            t,
            event: event.clone(),
            diag,
        });
        Ok(diag)
    }

    fn measure_query(
        &self,
        rho: &Ensemble,
        obs: &Subspace,
        config: &SessionConfig,
    ) -> Result<(Ensemble, SessionDiagnostics)> {
        let tol = &config.tolerances;
        let p = rho.probability(obs)?;
        let alpha = config.alpha_query.unwrap_or(1.0);
        if p < config.drift_threshold {
            tracing::debug!(p, "query below drift threshold, rebasing");
            return Ok((
                self.rebase(rho, obs, alpha, tol)?,
                diagnostics(p, true, false),
            ));
        }
        match rho.alpha_update(obs, alpha, tol) {
            Ok(next) => Ok((next, diagnostics(p, false, false))),
            Err(qprob::Error::ImpossibleMeasurement { .. }) => Ok((
                self.rebase(rho, obs, alpha, tol)?,
                diagnostics(p, true, true),
            )),
            Err(e) => Err(e.into()),
        }
    }

    fn soft_measure(
        &self,
        rho: &Ensemble,
        obs: &Subspace,
        alpha: f64,
        tol: &Tolerances,
    ) -> Result<(Ensemble, SessionDiagnostics)> {
        let p = rho.probability(obs)?;
        match rho.alpha_update(obs, alpha, tol) {
            Ok(next) => Ok((next, diagnostics(p, false, false))),
            Err(qprob::Error::ImpossibleMeasurement { .. }) => {
                tracing::debug!(p, "impossible measurement, rebasing");
                Ok((self.rho0.condition(obs, tol)?, diagnostics(p, true, true)))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// `alpha (rho_0 |> obs) + (1 - alpha) rho`
    fn rebase(
        &self,
        rho: &Ensemble,
        obs: &Subspace,
        alpha: f64,
        tol: &Tolerances,
    ) -> Result<Ensemble> {
        let fresh = self.rho0.condition(obs, tol)?;
        if alpha >= 1.0 {
            return Ok(fresh);
        }
        if alpha <= 0.0 {
            return Ok(rho.clone());
        }
        Ok(Ensemble::mixture(&[(alpha, &fresh), (1.0 - alpha, rho)])?)
    }

    /// Every document's relevance probability, best first; ties by doc_id.
    pub fn rank_all(&self, state: &SessionState) -> Vec<RankedDoc> {
        let tol = &state.config.tolerances;
        let mut ranked: Vec<RankedDoc> = self
            .corpus
            .documents()
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let probability = self
                    .observable_at(i, tol)
                    .ok()
                    .and_then(|obs| state.rho.probability(&obs).ok())
                    .unwrap_or(0.0);
                RankedDoc {
                    doc_id: d.doc_id.clone(),
                    probability,
                }
            })
            .collect();
        ranked.sort_by(|a, b| {
            b.probability
                .total_cmp(&a.probability)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        ranked
    }

    /// Top `n` documents by relevance probability.
    pub fn rank(&self, state: &SessionState, n: usize) -> Vec<RankedDoc> {
        let mut ranked = self.rank_all(state);
        ranked.truncate(n.max(1));
        ranked
    }

    /// Probability of a prospective query under the current state, without
    /// updating it.
    pub fn drift_probability(&self, state: &SessionState, query_terms: &[String]) -> Result<f64> {
        let obs = self.query_observable(query_terms, &state.config)?;
        Ok(state.rho.probability(&obs)?)
    }

    /// [`Engine::drift_probability`] for free text.
    pub fn drift_probability_text(&self, state: &SessionState, text: &str) -> Result<f64> {
        self.drift_probability(state, &self.corpus.query_terms(text))
    }
}

fn diagnostics(p: f64, drift: bool, recovered: bool) -> SessionDiagnostics {
    SessionDiagnostics {
        event_probability: p.clamp(0.0, 1.0),
        drift_flagged: drift,
        ensemble_rank: 0,
        recovered,
    }
}
