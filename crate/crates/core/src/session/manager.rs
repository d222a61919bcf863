use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, TryLockError};

use serde::Serialize;

use super::{advance, classify_turn, replay_events, Session, SessionEvent, SessionState, TurnFailure};
use crate::clock::Clock;
use crate::generate::{valid_persona_id, PersonaCard, PersonaEngine, PersonaStore};
use crate::text::sha256_hex;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("session {0} already has a turn in flight")]
    Busy(String),
    #[error("turn text is empty")]
    EmptyTurn,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    CorruptLog { path: PathBuf, line: usize, message: String },
}

/// Collaborators every advance needs.
#[derive(Clone)]
pub struct SessionDeps {
    pub engine: PersonaEngine,
    pub store: PersonaStore,
    pub clock: Arc<dyn Clock>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TurnOutcome {
    pub reply: String,
    pub state: SessionState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub persona_card: Option<PersonaCard>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<TurnFailure>,
}

/// Live sessions backed by `events-{session_id}.jsonl` logs.
///
/// Turns on one session are serialized with a try-lock: a second concurrent
/// turn fails fast with [`SessionError::Busy`]. Distinct sessions proceed in
/// parallel.
pub struct SessionManager {
    deps: SessionDeps,
    dir: PathBuf,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    counter: AtomicU64,
}

impl SessionManager {
    pub fn new(deps: SessionDeps, dir: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|source| SessionError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(Self {
            deps,
            dir,
            sessions: Mutex::new(HashMap::new()),
            counter: AtomicU64::new(0),
        })
    }

    pub fn deps(&self) -> &SessionDeps {
        &self.deps
    }

    pub fn log_path(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("events-{session_id}.jsonl"))
    }

    pub fn create(&self) -> Result<String, SessionError> {
        let now = self.deps.clock.now();
        let mut sessions = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        let id = loop {
            let n = self.counter.fetch_add(1, Ordering::Relaxed);
            let seed = format!("{}:{n}:{}", now.to_rfc3339(), std::process::id());
            let id = format!("s-{}", &sha256_hex(seed)[..16]);
            if !sessions.contains_key(&id) && !self.log_path(&id).exists() {
                break id;
            }
        };
        append_event(
            &self.log_path(&id),
            &SessionEvent::Created {
                session_id: id.clone(),
                at: now,
            },
        )?;
        sessions.insert(id.clone(), Arc::new(Mutex::new(Session::new(id.clone()))));
        Ok(id)
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        let mut sessions = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(h) = sessions.get(id) {
            return Ok(h.clone());
        }
        if !valid_persona_id(id) {
            return Err(SessionError::NotFound(id.to_string()));
        }
        let path = self.log_path(id);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(SessionError::NotFound(id.to_string())),
            Err(source) => return Err(SessionError::Io { path, source }),
        };
        let session = replay_events(&text).map_err(|(line, message)| SessionError::CorruptLog {
            path: path.clone(),
            line,
            message,
        })?;
        if session.session_id != id {
            return Err(SessionError::CorruptLog {
                path,
                line: 1,
                message: format!("log belongs to session {}", session.session_id),
            });
        }
        let h = Arc::new(Mutex::new(session));
        sessions.insert(id.to_string(), h.clone());
        Ok(h)
    }

    /// Current session contents; waits for an in-flight turn to finish.
    pub fn session(&self, id: &str) -> Result<Session, SessionError> {
        let h = self.handle(id)?;
        let s = h.lock().unwrap_or_else(|p| p.into_inner());
        Ok(s.clone())
    }

    pub fn turn(&self, id: &str, text: &str) -> Result<TurnOutcome, SessionError> {
        if text.trim().is_empty() {
            return Err(SessionError::EmptyTurn);
        }
        let h = self.handle(id)?;
        let mut session = match h.try_lock() {
            Ok(s) => s,
            Err(TryLockError::WouldBlock) => return Err(SessionError::Busy(id.to_string())),
            Err(TryLockError::Poisoned(p)) => p.into_inner(),
        };
        let turn = classify_turn(text);
        let mut next = session.clone();
        let deps = &self.deps;
        let result = advance(&mut next, &turn, &deps.engine, &deps.store, deps.clock.as_ref());
        let n = next.transcript.len();
        let event = SessionEvent::Advanced {
            intent: turn.intent(),
            student: next.transcript[n - 2].clone(),
            system: next.transcript[n - 1].clone(),
            state: next.state,
            ctx: next.ctx.clone(),
            persona_id: result.persona.as_ref().map(|p| p.persona_id.clone()),
        };
        append_event(&self.log_path(id), &event)?;
        *session = next;
        Ok(TurnOutcome {
            reply: result.reply,
            state: session.state,
            persona_card: result.persona.map(|p| p.card()),
            failure: result.failure,
        })
    }
}

fn append_event(path: &Path, event: &SessionEvent) -> Result<(), SessionError> {
    let io = |source| SessionError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut line = serde_json::to_string(event).expect("session events serialize");
    line.push('\n');
    let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    file.write_all(line.as_bytes()).map_err(io)
}
