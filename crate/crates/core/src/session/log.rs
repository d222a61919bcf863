//! Event-sourced session persistence: one JSON object per line.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Intent, Session, SessionState, TranscriptEntry};
use crate::generate::ProjectContext;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        at: DateTime<Utc>,
    },
    Advanced {
        intent: Intent,
        student: TranscriptEntry,
        system: TranscriptEntry,
        state: SessionState,
        ctx: Option<ProjectContext>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        persona_id: Option<String>,
    },
}

/// Rebuilds a session from its log. The first event must be `created`, and
/// every `advanced` event must leave the session consistent.
pub fn replay_events(text: &str) -> Result<Session, (usize, String)> {
    let mut session: Option<Session> = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let event: SessionEvent = serde_json::from_str(line).map_err(|e| (line_no, e.to_string()))?;
        match (event, session.as_mut()) {
            (SessionEvent::Created { session_id, .. }, None) => session = Some(Session::new(session_id)),
            (SessionEvent::Created { .. }, Some(_)) => return Err((line_no, "duplicate created event".into())),
            (SessionEvent::Advanced { .. }, None) => return Err((line_no, "advanced before created".into())),
            (
                SessionEvent::Advanced {
                    student,
                    system,
                    state,
                    ctx,
                    persona_id,
                    ..
                },
                Some(s),
            ) => {
                s.transcript.push(student);
                s.transcript.push(system);
                s.state = state;
                s.ctx = ctx;
                s.personas.extend(persona_id);
                if !s.is_consistent() {
                    return Err((line_no, format!("state {state:?} disagrees with project context")));
                }
            }
        }
    }
    session.ok_or((0, "empty event log".into()))
}
