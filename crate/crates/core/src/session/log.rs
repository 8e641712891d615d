//! Session logs (JSON Lines) and batch replay.

use serde::{Deserialize, Serialize};

use super::{
    Engine, InteractionEvent, SessionConfig, SessionDiagnostics, SessionError, SessionState,
};

/// `{"t": .., "event": {..}, "diag": {..}}`; `diag` is optional on input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub t: u64,
    pub event: InteractionEvent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag: Option<SessionDiagnostics>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("log line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("event t={t} ({event})")]
    Event {
        t: u64,
        event: String,
        #[source]
        source: SessionError,
    },
    #[error(transparent)]
    Session(#[from] SessionError),
}

pub fn parse_log(input: &str) -> Result<Vec<LogLine>, ReplayError> {
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ReplayError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn render_log(lines: &[LogLine]) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(&serde_json::to_string(l).expect("log lines serialize"));
        out.push('\n');
    }
    out
}

/// Replays `lines` in order on a fresh session, returning the final state and
/// the log enriched with fresh diagnostics. Recorded diagnostics are ignored.
pub fn replay(
    engine: &Engine,
    session_id: &str,
    config: SessionConfig,
    lines: &[LogLine],
) -> Result<(SessionState, Vec<LogLine>), ReplayError> {
    let mut state = engine.new_session(session_id, config)?;
    let mut out = Vec::with_capacity(lines.len());
    for line in lines {
        let diag = engine
            .apply(&mut state, &line.event)
            .map_err(|source| ReplayError::Event {
                t: line.t,
                event: serde_json::to_string(&line.event).unwrap_or_default(),
                source,
            })?;
        out.push(LogLine {
            t: line.t,
            event: line.event.clone(),
            diag: Some(diag),
        });
    }
    Ok((state, out))
}
