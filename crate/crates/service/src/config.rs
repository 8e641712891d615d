//! Session settings shared by the CLI flags and the `POST /sessions` body.

use qir_core::session::{QueryMode, SessionError};
use qir_core::{Engine, SessionConfig};
use serde::{Deserialize, Serialize};

/// Optional overrides of the service's session defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_click: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_judgment: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_query: Option<f64>,
    /// Drift threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_mode: Option<QueryMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prf_k: Option<usize>,
    /// Free-text user context; the session starts conditioned on the span of
    /// the paragraphs that contain its terms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

impl SessionOverrides {
    /// `base` with these overrides applied, validated.
    pub fn resolve(
        &self,
        engine: &Engine,
        base: &SessionConfig,
    ) -> Result<SessionConfig, SessionError> {
        let mut config = base.clone();
        if let Some(a) = self.alpha_click {
            config.alpha_click = a;
        }
        if let Some(a) = self.alpha_judgment {
            config.alpha_judgment = a;
        }
        if self.alpha_query.is_some() {
            config.alpha_query = self.alpha_query;
        }
        if let Some(t) = self.tau {
            config.drift_threshold = t;
        }
        if let Some(m) = self.query_mode {
            config.query_mode = m;
        }
        if let Some(k) = self.prf_k {
            config.prf_k = k;
        }
        if let Some(text) = &self.context {
            config.context = Some(engine.context_from_text(text, &config.tolerances)?);
        }
        config.validate()?;
        Ok(config)
    }
}
