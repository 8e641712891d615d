//! Interactive retrieval with a density-operator user model.
//!
//! - [`qprob`]: pure states, subspaces, factorized density operators, the
//!   trace rule, conditioning and the soft (alpha) update.
//! - [`corpus`]: tokenization, tf-idf paragraph vectors, document and query
//!   observables, the initial density operator and index persistence.
//! - [`session`]: per-session state driven by interaction events.

pub mod corpus;
pub mod qprob;
pub mod session;

pub use corpus::{Corpus, IngestConfig, RawDocument};
pub use qprob::{Ensemble, StateVector, Subspace, Tolerances};
pub use session::{Engine, InteractionEvent, SessionConfig, SessionDiagnostics, SessionState};

/// The bundled two-topic fixture corpus (15 tiger, 15 lion documents), as
/// JSON Lines.
pub const TWO_TOPIC_FIXTURE: &str = include_str!("../fixtures/two_topic.jsonl");
