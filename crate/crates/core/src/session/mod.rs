//! Conversational state machine binding a student's project to persona
//! generation and recommendation turns.
//!
//! | state            | describe | persona    | requirements | related    | unknown |
//! |------------------|----------|------------|--------------|------------|---------|
//! | awaiting_project | ready    | illegal    | illegal      | illegal    | help    |
//! | ready            | ready    | generate   | answer       | generate   | help    |
//! | generating       | ready    | illegal    | illegal      | illegal    | help    |
//! | failed           | ready    | illegal    | illegal      | illegal    | help    |
//!
//! A generation ends in `ready` (persona appended, or no evidence found) or
//! `failed` on a hard provider or grounding error. Illegal turns leave the
//! state unchanged and reply with guidance. A description without a
//! recognisable category gets a clarification prompt and changes nothing.

mod classify;
mod log;
mod manager;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use classify::{classify_turn, classify_turn_with, detect_category, Intent, Turn, TurnKind};
pub use log::{replay_events, SessionEvent};
pub use manager::{SessionDeps, SessionError, SessionManager, TurnOutcome};

use crate::clock::Clock;
use crate::curation::VrCategory;
use crate::generate::{
    GenerateError, Persona, PersonaEngine, PersonaStore, ProjectContext, RelatedMode, MAX_DESCRIPTION_CHARS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    AwaitingProject,
    Ready,
    Generating,
    Failed,
}

impl SessionState {
    pub const ALL: [SessionState; 4] = [
        SessionState::AwaitingProject,
        SessionState::Ready,
        SessionState::Generating,
        SessionState::Failed,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Student,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub role: Role,
    pub text: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub ctx: Option<ProjectContext>,
    pub personas: Vec<String>,
    pub transcript: Vec<TranscriptEntry>,
    pub state: SessionState,
}

impl Session {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            ctx: None,
            personas: Vec::new(),
            transcript: Vec::new(),
            state: SessionState::AwaitingProject,
        }
    }

    /// `ctx` is present exactly when the state is not `awaiting_project`.
    pub fn is_consistent(&self) -> bool {
        self.ctx.is_some() == (self.state != SessionState::AwaitingProject)
    }
}

/// A turn the current state does not accept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("{intent:?} is not accepted in state {state:?}")]
pub struct IllegalTransition {
    pub state: SessionState,
    pub intent: Intent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    NoEvidence,
    ProviderDown,
    Grounding,
    Internal,
}

/// Why a generation turn produced no persona.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnFailure {
    pub kind: FailureKind,
    pub message: String,
}

impl From<&GenerateError> for TurnFailure {
    fn from(e: &GenerateError) -> Self {
        let kind = match e {
            GenerateError::NoEvidence(_) => FailureKind::NoEvidence,
            GenerateError::ProviderUnavailable(_) => FailureKind::ProviderDown,
            GenerateError::Grounding { .. } | GenerateError::ExtractionParse(_) => FailureKind::Grounding,
            _ => FailureKind::Internal,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Advance {
    pub reply: String,
    pub persona: Option<Persona>,
    pub illegal: Option<IllegalTransition>,
    pub failure: Option<TurnFailure>,
}

/// What the engine does for a (state, intent) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    SetProject,
    GeneratePersona,
    AnswerRequirements,
    GenerateRelated,
    Help,
    Illegal,
}

pub fn action_for(state: SessionState, intent: Intent) -> Action {
    use Intent as I;
    use SessionState as S;
    match (state, intent) {
        (_, I::DescribeProject) => Action::SetProject,
        (_, I::Unknown) => Action::Help,
        (S::Ready, I::RequestPersona) => Action::GeneratePersona,
        (S::Ready, I::AskRequirements) => Action::AnswerRequirements,
        (S::Ready, I::RequestRelated) => Action::GenerateRelated,
        (S::AwaitingProject | S::Generating | S::Failed, _) => Action::Illegal,
    }
}

pub const HELP_TEXT: &str = "I can help you explore accessibility needs for your VR project. \
Describe your project (for example \"my project is a horror escape game\"), ask me to generate a persona \
(optionally naming a need such as motion sickness or hearing), ask what a persona requires, \
or ask for related personas from other apps.";

fn clarification() -> String {
    let names: Vec<&str> = VrCategory::ALL.iter().map(|c| c.as_str()).collect();
    format!(
        "Which kind of VR application is your project? Please mention one of: {}.",
        names.join(", ")
    )
}

fn illegal_reply(state: SessionState) -> String {
    match state {
        SessionState::AwaitingProject => {
            "Tell me about your project first, for example \"my project is an action climbing game\".".into()
        }
        SessionState::Generating => "A persona is still being generated for this session; please wait.".into(),
        SessionState::Failed | SessionState::Ready => {
            "The last generation failed. Describe your project again to start over.".into()
        }
    }
}

fn with_article(word: &str) -> String {
    let article = if word.starts_with(['a', 'e', 'i', 'o', 'u']) { "an" } else { "a" };
    format!("{article} {word}")
}

fn persona_reply(persona: &Persona, intro: &str) -> String {
    let card = persona.card();
    format!(
        "{intro} {name}, {category} player with {dimension} accessibility needs. \"{quote}\" (review {source})",
        name = card.display_name,
        category = with_article(card.vr_category.as_str()),
        dimension = card.dimension,
        quote = card.quote.text,
        source = card.quote.source_chunk_id,
    )
}

fn requirements_reply(persona: &Persona) -> String {
    let mut out = format!("{} needs:", persona.display_name);
    for r in &persona.requirements {
        out.push_str("\n- ");
        out.push_str(r);
    }
    out
}

/// Persona named in the turn (by display name or id), else the most recent.
fn referenced_persona(session: &Session, text: &str, store: &PersonaStore) -> Result<Option<Persona>, GenerateError> {
    let lowered = text.to_lowercase();
    let mut latest = None;
    for id in session.personas.iter().rev() {
        let Some(p) = store.load(id)? else { continue };
        if lowered.contains(&p.persona_id) || crate::text::lexical_tokens(text).contains(&p.display_name.to_lowercase())
        {
            return Ok(Some(p));
        }
        if latest.is_none() {
            latest = Some(p);
        }
    }
    Ok(latest)
}

fn generation_failed(session: &mut Session, e: &GenerateError) -> String {
    if let GenerateError::NoEvidence(msg) = e {
        session.state = SessionState::Ready;
        format!("I could not find matching review evidence ({msg}). Try another accessibility need or describe the project differently.")
    } else {
        session.state = SessionState::Failed;
        ::log::warn!("session {}: generation failed: {e}", session.session_id);
        format!("Persona generation failed: {e}. Describe your project again to retry.")
    }
}

fn finish_generation(
    session: &mut Session,
    result: Result<Persona, GenerateError>,
    store: &PersonaStore,
    intro: &str,
) -> (String, Option<Persona>, Option<TurnFailure>) {
    match result.and_then(|p| store.save(&p).map(|_| p)) {
        Ok(persona) => {
            session.state = SessionState::Ready;
            session.personas.push(persona.persona_id.clone());
            (persona_reply(&persona, intro), Some(persona), None)
        }
        Err(e) => (generation_failed(session, &e), None, Some(TurnFailure::from(&e))),
    }
}

/// Applies one turn. The transcript always grows by the student turn and the
/// system reply; the state follows [`action_for`].
pub fn advance(session: &mut Session, turn: &Turn, engine: &PersonaEngine, store: &PersonaStore, clock: &dyn Clock) -> Advance {
    session.transcript.push(TranscriptEntry {
        role: Role::Student,
        text: turn.text.clone(),
        at: clock.now(),
    });
    let action = action_for(session.state, turn.intent());
    let mut persona = None;
    let mut illegal = None;
    let mut failure = None;
    let reply = match (action, &turn.kind) {
        (Action::SetProject, TurnKind::DescribeProject { category, description }) => match category {
            None => clarification(),
            Some(category) => {
                let requested = session.ctx.as_ref().and_then(|c| c.requested_dimension);
                let trimmed: String = description.chars().take(MAX_DESCRIPTION_CHARS).collect();
                match ProjectContext::new(*category, trimmed, requested) {
                    Ok(ctx) => {
                        session.ctx = Some(ctx);
                        session.state = SessionState::Ready;
                        format!(
                            "Got it: {} VR project. Ask me to generate a persona when you are ready.",
                            with_article(category.as_str())
                        )
                    }
                    Err(e) => e.to_string(),
                }
            }
        },
        (Action::GeneratePersona, TurnKind::RequestPersona { dimension }) => {
            let mut ctx = session.ctx.clone().expect("ready sessions carry a project context");
            ctx.requested_dimension = *dimension;
            session.state = SessionState::Generating;
            let (reply, p, f) = finish_generation(session, engine.generate(&ctx), store, "Meet");
            (persona, failure) = (p, f);
            reply
        }
        (Action::AnswerRequirements, _) => match referenced_persona(session, &turn.text, store) {
            Ok(Some(p)) => requirements_reply(&p),
            Ok(None) => "There is no persona in this session yet. Ask me to generate one first.".into(),
            Err(e) => format!("Could not load the persona: {e}"),
        },
        (Action::GenerateRelated, _) => match referenced_persona(session, &turn.text, store) {
            Ok(Some(source)) => {
                session.state = SessionState::Generating;
                let result = engine
                    .related(&source, &RelatedMode::SameDimensionOtherApps, 1)
                    .and_then(|bundles| engine.generate_from_bundle(&bundles[0]));
                let (reply, p, f) = finish_generation(session, result, store, "From other apps, meet");
                (persona, failure) = (p, f);
                reply
            }
            Ok(None) => "There is no persona in this session yet. Ask me to generate one first.".into(),
            Err(e) => format!("Could not load the persona: {e}"),
        },
        (Action::Illegal, _) => {
            illegal = Some(IllegalTransition {
                state: session.state,
                intent: turn.intent(),
            });
            illegal_reply(session.state)
        }
        _ => HELP_TEXT.to_string(),
    };
    session.transcript.push(TranscriptEntry {
        role: Role::System,
        text: reply.clone(),
        at: clock.now(),
    });
    debug_assert!(session.is_consistent());
    Advance {
        reply,
        persona,
        illegal,
        failure,
    }
}
