//! In-memory session registry with idle eviction and an optional JSONL
//! journal per session.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use qir_core::session::{parse_log, LogLine};
use qir_core::SessionState;

use crate::config::SessionOverrides;

pub struct SessionHandle {
    pub session_id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub overrides: SessionOverrides,
    last_access: Mutex<Instant>,
    /// Event application is serialized through this lock; waiters are served
    /// in arrival order.
    pub state: tokio::sync::Mutex<SessionState>,
}

impl SessionHandle {
    pub fn new(state: SessionState, overrides: SessionOverrides) -> Self {
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            session_id: state.session_id.clone(),
            created_at,
            overrides,
            last_access: Mutex::new(Instant::now()),
            state: tokio::sync::Mutex::new(state),
        }
    }

    fn touch(&self) {
        *self.last_access.lock().unwrap() = Instant::now();
    }

    fn idle_for(&self, now: Instant) -> Duration {
        now.saturating_duration_since(*self.last_access.lock().unwrap())
    }
}

#[derive(Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `handle` unless its id is taken, returning whichever handle
    /// ends up registered.
    pub fn insert(&self, handle: SessionHandle) -> Arc<SessionHandle> {
        let mut map = self.sessions.write().unwrap();
        map.entry(handle.session_id.clone())
            .or_insert_with(|| Arc::new(handle))
            .clone()
    }

    pub fn get(&self, session_id: &str) -> Option<Arc<SessionHandle>> {
        let handle = self.sessions.read().unwrap().get(session_id).cloned();
        if let Some(h) = &handle {
            h.touch();
        }
        handle
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops sessions idle for longer than `timeout`; returns how many.
    pub fn evict_idle(&self, timeout: Duration) -> usize {
        let now = Instant::now();
        let mut map = self.sessions.write().unwrap();
        let before = map.len();
        map.retain(|id, h| {
            let keep = h.idle_for(now) <= timeout;
            if !keep {
                tracing::info!(session_id = %id, "evicting idle session");
            }
            keep
        });
        before - map.len()
    }
}

/// Per-session files in one directory: `<id>.config.json` holds the
/// overrides the session was created with, `<id>.jsonl` its event log.
#[derive(Debug, Clone)]
pub struct Journal {
    dir: PathBuf,
}

impl Journal {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Journal files are only addressed for ids this service could have
    /// issued.
    fn paths(&self, session_id: &str) -> Option<(PathBuf, PathBuf)> {
        uuid::Uuid::parse_str(session_id).ok()?;
        Some((
            self.dir.join(format!("{session_id}.config.json")),
            self.dir.join(format!("{session_id}.jsonl")),
        ))
    }

    pub fn create(&self, session_id: &str, overrides: &SessionOverrides) -> io::Result<()> {
        let (config, log) = self.paths(session_id).ok_or_else(|| {
            io::Error::new(io::ErrorKind::InvalidInput, "session id is not a uuid")
        })?;
        fs::write(config, serde_json::to_vec(overrides)?)?;
        File::create(log)?;
        Ok(())
    }

    pub fn append(&self, session_id: &str, line: &LogLine) -> io::Result<()> {
        let (_, log) = self.paths(session_id).ok_or_else(|| {
            io::Error::new(io::ErrorKind::InvalidInput, "session id is not a uuid")
        })?;
        let mut f = OpenOptions::new().append(true).create(true).open(log)?;
        let mut bytes = serde_json::to_vec(line)?;
        bytes.push(b'\n');
        f.write_all(&bytes)
    }

    /// Overrides and events of a journaled session, if present.
    pub fn load(&self, session_id: &str) -> io::Result<Option<(SessionOverrides, Vec<LogLine>)>> {
        let Some((config, log)) = self.paths(session_id) else {
            return Ok(None);
        };
        if !config.exists() {
            return Ok(None);
        }
        let overrides: SessionOverrides = serde_json::from_slice(&fs::read(config)?)?;
        let text = fs::read_to_string(log).or_else(|e| match e.kind() {
            io::ErrorKind::NotFound => Ok(String::new()),
            _ => Err(e),
        })?;
        let lines = parse_log(&text)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        Ok(Some((overrides, lines)))
    }
}
