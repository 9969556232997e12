//! In-memory sessions with idle expiry.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use chromaflow::pipeline::PrepareKey;
use chromaflow::{CorrespondenceSet, PreparedSource, RgbImage};
use serde_json::Value;

use crate::error::ApiError;

/// Landmarks and graphs depend on the settings and on the solved image
/// size (previews are solved on a downscaled copy).
pub type CacheKey = (PrepareKey, (usize, usize));

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Full,
    Preview,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::Preview => "preview",
        }
    }
}

#[derive(Debug, Clone)]
pub enum JobState {
    Running { mode: Mode },
    Done { mode: Mode, png: Arc<Vec<u8>>, report: Value },
    Failed { mode: Mode, error: ApiError },
}

impl JobState {
    pub fn summary(&self) -> Value {
        match self {
            JobState::Running { mode } => serde_json::json!({"state": "running", "mode": mode.as_str()}),
            JobState::Done { mode, report, .. } => {
                serde_json::json!({"state": "done", "mode": mode.as_str(), "report": report})
            }
            JobState::Failed { mode, error } => {
                serde_json::json!({"state": "failed", "mode": mode.as_str(), "error": error.body()})
            }
        }
    }
}

#[derive(Debug)]
pub struct Session {
    pub source: Arc<RgbImage>,
    pub targets: BTreeMap<String, Arc<RgbImage>>,
    pub set: CorrespondenceSet,
    pub cache: HashMap<CacheKey, Arc<PreparedSource>>,
    /// Last solution (landmark offsets) per cache entry, for warm starts.
    pub warm: HashMap<CacheKey, [Vec<f64>; 3]>,
    pub jobs: HashMap<String, JobState>,
    pub running: Option<String>,
    last_access: Instant,
}

impl Session {
    pub fn new(source: RgbImage) -> Self {
        Self {
            source: Arc::new(source),
            targets: BTreeMap::new(),
            set: CorrespondenceSet::default(),
            cache: HashMap::new(),
            warm: HashMap::new(),
            jobs: HashMap::new(),
            running: None,
            last_access: Instant::now(),
        }
    }

    pub fn touch(&mut self) {
        self.last_access = Instant::now();
    }

    /// Stores a prepared source, dropping entries for other settings at
    /// the same size.
    pub fn remember(&mut self, key: CacheKey, prepared: Arc<PreparedSource>, solution: [Vec<f64>; 3]) {
        self.cache.retain(|k, _| k.1 != key.1 || *k == key);
        self.warm.retain(|k, _| k.1 != key.1 || *k == key);
        self.cache.insert(key, prepared);
        self.warm.insert(key, solution);
    }
}

/// Locks a session, recovering from a poisoned lock (a panicking solve
/// must not take the whole session down).
pub fn lock(session: &Mutex<Session>) -> MutexGuard<'_, Session> {
    session.lock().unwrap_or_else(|p| p.into_inner())
}

#[derive(Debug, Default)]
struct Inner {
    live: HashMap<String, Arc<Mutex<Session>>>,
    expired: HashSet<String>,
}

#[derive(Debug)]
pub struct SessionStore {
    inner: Mutex<Inner>,
    ttl: Duration,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self {
            inner: Mutex::new(Inner::default()),
            ttl,
        }
    }

    fn inner(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn sweep(&self, inner: &mut Inner) {
        let now = Instant::now();
        let stale: Vec<String> = inner
            .live
            .iter()
            .filter(|(_, s)| {
                let s = lock(s);
                s.running.is_none() && now.duration_since(s.last_access) > self.ttl
            })
            .map(|(id, _)| id.clone())
            .collect();
        for id in stale {
            inner.live.remove(&id);
            inner.expired.insert(id);
        }
    }

    pub fn insert(&self, session: Session) -> String {
        let id = uuid::Uuid::new_v4().to_string();
        let mut inner = self.inner();
        self.sweep(&mut inner);
        inner.live.insert(id.clone(), Arc::new(Mutex::new(session)));
        id
    }

    /// Looks up a live session and refreshes its idle timer. Expired
    /// sessions answer 410, never-seen ids 404.
    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let mut inner = self.inner();
        self.sweep(&mut inner);
        if let Some(s) = inner.live.get(id) {
            lock(s).touch();
            return Ok(s.clone());
        }
        if inner.expired.contains(id) {
            return Err(ApiError::new(StatusCode::GONE, "session expired"));
        }
        Err(ApiError::not_found("session"))
    }

    pub fn len(&self) -> usize {
        let mut inner = self.inner();
        self.sweep(&mut inner);
        inner.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
