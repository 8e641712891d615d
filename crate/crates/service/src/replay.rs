//! Batch replay of session logs, and the alpha comparison.

use qir_core::session::{replay, LogLine, RankedDoc, ReplayError};
use qir_core::{Engine, InteractionEvent, SessionConfig, SessionState};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub rank: usize,
    pub doc_id: String,
    pub probability: f64,
}

/// Final ranking written by `qir replay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub events: usize,
    pub results: Vec<RankingEntry>,
}

fn entries(ranked: Vec<RankedDoc>) -> Vec<RankingEntry> {
    ranked
        .into_iter()
        .enumerate()
        .map(|(i, r)| RankingEntry {
            rank: i + 1,
            doc_id: r.doc_id,
            probability: r.probability,
        })
        .collect()
}

pub struct ReplayOutput {
    pub state: SessionState,
    pub enriched: Vec<LogLine>,
    pub ranking: RankingReport,
}

pub fn run(
    engine: &Engine,
    config: SessionConfig,
    lines: &[LogLine],
    top: usize,
) -> Result<ReplayOutput, ReplayError> {
    let (state, enriched) = replay(engine, "replay", config, lines)?;
    let ranking = RankingReport {
        events: enriched.len(),
        results: entries(engine.rank(&state, top)),
    };
    Ok(ReplayOutput {
        state,
        enriched,
        ranking,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub t: u64,
    pub p: f64,
    pub drift: bool,
    pub results: Vec<RankingEntry>,
}

/// Ranking after each event under one alpha setting. `initial` is the ranking
/// before the first event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub label: String,
    /// `None` for the configured run, which keeps separate click, judgment
    /// and query alphas and any per-event overrides.
    pub alpha: Option<f64>,
    pub initial: Vec<RankingEntry>,
    pub steps: Vec<TrajectoryStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub top: usize,
    pub trajectories: Vec<Trajectory>,
}

/// `config` with every update (click, judgment and query) using `alpha`.
pub fn uniform_alpha(config: &SessionConfig, alpha: f64) -> SessionConfig {
    SessionConfig {
        alpha_click: alpha,
        alpha_judgment: alpha,
        alpha_query: Some(alpha),
        ..config.clone()
    }
}

fn strip_alpha(event: &InteractionEvent) -> InteractionEvent {
    match event {
        InteractionEvent::Click { doc_id, .. } => InteractionEvent::Click {
            doc_id: doc_id.clone(),
            alpha: None,
        },
        InteractionEvent::Judgment {
            doc_id, positive, ..
        } => InteractionEvent::Judgment {
            doc_id: doc_id.clone(),
            positive: *positive,
            alpha: None,
        },
        other => other.clone(),
    }
}

fn trajectory(
    engine: &Engine,
    label: &str,
    alpha: Option<f64>,
    config: SessionConfig,
    lines: &[LogLine],
    top: usize,
) -> Result<Trajectory, ReplayError> {
    let mut state = engine.new_session(label, config)?;
    let initial = entries(engine.rank(&state, top));
    let mut steps = Vec::with_capacity(lines.len());
    for line in lines {
        let event = if alpha.is_some() {
            strip_alpha(&line.event)
        } else {
            line.event.clone()
        };
        let diag = engine
            .apply(&mut state, &event)
            .map_err(|source| ReplayError::Event {
                t: line.t,
                event: serde_json::to_string(&line.event).unwrap_or_default(),
                source,
            })?;
        steps.push(TrajectoryStep {
            t: line.t,
            p: diag.event_probability,
            drift: diag.drift_flagged,
            results: entries(engine.rank(&state, top)),
        });
    }
    Ok(Trajectory {
        label: label.to_string(),
        alpha,
        initial,
        steps,
    })
}

/// Rank trajectories with no update (alpha 0), the configured alphas, and
/// hard conditioning (alpha 1).
pub fn compare(
    engine: &Engine,
    config: &SessionConfig,
    lines: &[LogLine],
    top: usize,
) -> Result<Comparison, ReplayError> {
    let trajectories = vec![
        trajectory(
            engine,
            "none",
            Some(0.0),
            uniform_alpha(config, 0.0),
            lines,
            top,
        )?,
        trajectory(engine, "configured", None, config.clone(), lines, top)?,
        trajectory(
            engine,
            "hard",
            Some(1.0),
            uniform_alpha(config, 1.0),
            lines,
            top,
        )?,
    ];
    Ok(Comparison { top, trajectories })
}
