//! Per-document annotation sessions.
//!
//! Each mention runs through a small state machine:
//!
//! ```text
//! Unlinked/Linked --select_type--> CoarseSelected --select_type--> ...
//!        |                              |
//!        +--accept/revise--> Revised <--+
//!        +--set_label------> Labeled
//! ```
//!
//! Selecting a coarse type filters the working candidates down to the
//! entities carrying that type; picking an entity narrows the offered types
//! to that entity's type set. Every mutation is recorded as a [`Command`]
//! holding full before/after snapshots of the mentions it touched, so undo
//! and redo are exact.
//!
//! Acting on a mention that is already labeled restarts its episode: the
//! mention is reset to its opening state and the action is applied on top,
//! all recorded as one [`CommandKind::ModifyLabel`] command.

mod export;
mod log;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusDocument};
use crate::kb::{KbError, KnowledgeBase, TypeId};
use crate::linker::{constrained_types, filter_by_type, CandidateSet, Linker, DEFAULT_K_MAX};

pub use export::{
    escape_txt, import_json, render_txt, ExportAnnotation, ExportDocument, ExportFormat,
    UNRESOLVED_LABEL,
};
pub use log::{LogEntry, SessionHeader, PERSISTED_HISTORY};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("unknown document `{0}`")]
    UnknownDoc(String),
    #[error("unknown mention `{0}`")]
    UnknownMention(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("`{requested}` is not a descendant of the previous selection `{previous}`")]
    NotInChain { previous: TypeId, requested: TypeId },
    #[error("type `{0}` is not offered for this mention")]
    NotOffered(TypeId),
    #[error("entity `{0}` is not among the current candidates")]
    NotACandidate(String),
    #[error("mention `{0}` has no predicted entity")]
    NoPrediction(String),
    #[error("nothing to undo or redo")]
    EmptyHistory,
    #[error("unknown export format `{0}`")]
    UnknownFormat(String),
    #[error("malformed export: {0}")]
    Import(String),
    #[error("session log: {0}")]
    Log(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SessionError {
    /// Short machine-readable name, used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownDoc(_) => "UnknownDoc",
            SessionError::UnknownMention(_) => "UnknownMention",
            SessionError::UnknownType(_) => "UnknownType",
            SessionError::NotInChain { .. } => "NotInChain",
            SessionError::NotOffered(_) => "NotOffered",
            SessionError::NotACandidate(_) => "NotACandidate",
            SessionError::NoPrediction(_) => "NoPrediction",
            SessionError::EmptyHistory => "EmptyHistory",
            SessionError::UnknownFormat(_) => "UnknownFormat",
            SessionError::Import(_) => "ImportError",
            SessionError::Log(_) => "LogError",
            SessionError::Io(_) => "IoError",
        }
    }
}

impl From<KbError> for SessionError {
    fn from(e: KbError) -> Self {
        match e {
            KbError::UnknownType(t) => SessionError::UnknownType(t),
            other => SessionError::Log(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub k_max: usize,
    /// When a mention is labeled without an entity having been chosen, take
    /// the top-ranked working candidate carrying the label as the entity.
    pub auto_accept_on_direct_label: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            k_max: DEFAULT_K_MAX,
            auto_accept_on_direct_label: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Unlinked,
    Linked,
    CoarseSelected,
    Revised,
    Labeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionState {
    pub mention_id: String,
    pub phase: Phase,
    pub working_candidates: CandidateSet,
    /// Coarse-to-fine selection path; each element is an ancestor of the next.
    pub selected_types: Vec<TypeId>,
    pub final_label: Option<TypeId>,
    pub final_entity: Option<String>,
}

impl MentionState {
    fn opening(candidates: CandidateSet) -> Self {
        MentionState {
            mention_id: candidates.mention_id.clone(),
            phase: if candidates.is_empty() {
                Phase::Unlinked
            } else {
                Phase::Linked
            },
            working_candidates: candidates,
            selected_types: Vec::new(),
            final_label: None,
            final_entity: None,
        }
    }

    /// False when neither an entity nor any candidate constrains the types.
    pub fn is_constrained(&self) -> bool {
        self.final_entity.is_some() || !self.working_candidates.is_empty()
    }

    /// Types the annotator may pick next: the chosen entity's types, else the
    /// union over working candidates, else the whole hierarchy.
    pub fn offered_types(&self, kb: &KnowledgeBase) -> BTreeSet<TypeId> {
        match self.final_entity.as_deref().and_then(|e| kb.entity(e)) {
            Some(entity) => entity.types.clone(),
            None => constrained_types(kb, &self.working_candidates),
        }
    }

    fn offers(&self, kb: &KnowledgeBase, t: &TypeId) -> bool {
        match self.final_entity.as_deref().and_then(|e| kb.entity(e)) {
            Some(entity) => entity.has_type(t),
            None if self.working_candidates.is_empty() => true,
            None => self
                .working_candidates
                .entity_ids()
                .filter_map(|id| kb.entity(id))
                .any(|e| e.has_type(t)),
        }
    }
}

/// A user action. This is what the session log records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    SelectType {
        mention_id: String,
        type_id: TypeId,
    },
    AcceptEntity {
        mention_id: String,
    },
    ReviseEntity {
        mention_id: String,
        entity_id: String,
    },
    SetLabel {
        mention_id: String,
        type_id: TypeId,
    },
    ResetMention {
        mention_id: String,
    },
    ResetAll,
}

impl Action {
    pub fn mention_id(&self) -> Option<&str> {
        match self {
            Action::SelectType { mention_id, .. }
            | Action::AcceptEntity { mention_id }
            | Action::ReviseEntity { mention_id, .. }
            | Action::SetLabel { mention_id, .. }
            | Action::ResetMention { mention_id } => Some(mention_id),
            Action::ResetAll => None,
        }
    }

    fn kind(&self) -> CommandKind {
        match self {
            Action::SelectType { .. } => CommandKind::SelectType,
            Action::AcceptEntity { .. } => CommandKind::AcceptEntity,
            Action::ReviseEntity { .. } => CommandKind::ReviseEntity,
            Action::SetLabel { .. } => CommandKind::SetLabel,
            Action::ResetMention { .. } => CommandKind::ResetMention,
            Action::ResetAll => CommandKind::ResetAll,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommandKind {
    SelectType,
    AcceptEntity,
    ReviseEntity,
    SetLabel,
    ModifyLabel,
    ResetMention,
    ResetAll,
}

/// An applied action with snapshots of every mention it touched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub kind: CommandKind,
    pub action: Action,
    /// Inverse: restoring these undoes the command.
    pub before: Vec<MentionState>,
    pub after: Vec<MentionState>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub annotator_id: String,
    pub doc_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSession {
    meta: SessionMeta,
    config: SessionConfig,
    /// Mention ids in document order.
    order: Vec<String>,
    initial: BTreeMap<String, MentionState>,
    /// State the undo stack replays from; differs from `initial` only after
    /// persisted history was truncated.
    base: BTreeMap<String, MentionState>,
    states: BTreeMap<String, MentionState>,
    undo_stack: Vec<Command>,
    redo_stack: Vec<Command>,
}

impl AnnotationSession {
    /// Opens a session on `meta.doc_id`, linking every mention.
    pub fn open(
        kb: &KnowledgeBase,
        corpus: &Corpus,
        meta: SessionMeta,
        linker: &dyn Linker,
        config: SessionConfig,
    ) -> Result<Self, SessionError> {
        let doc = corpus
            .doc(&meta.doc_id)
            .ok_or_else(|| SessionError::UnknownDoc(meta.doc_id.clone()))?;
        Ok(Self::open_doc(kb, doc, meta, linker, config))
    }

    pub fn open_doc(
        kb: &KnowledgeBase,
        doc: &CorpusDocument,
        meta: SessionMeta,
        linker: &dyn Linker,
        config: SessionConfig,
    ) -> Self {
        let initial: Vec<MentionState> = doc
            .mentions
            .iter()
            .map(|m| MentionState::opening(linker.link(kb, m, config.k_max)))
            .collect();
        Self::from_initial(meta, config, initial)
    }

    fn from_initial(meta: SessionMeta, config: SessionConfig, initial: Vec<MentionState>) -> Self {
        let order = initial.iter().map(|s| s.mention_id.clone()).collect();
        let initial: BTreeMap<_, _> = initial
            .into_iter()
            .map(|s| (s.mention_id.clone(), s))
            .collect();
        AnnotationSession {
            meta,
            config,
            order,
            base: initial.clone(),
            states: initial.clone(),
            initial,
            undo_stack: Vec::new(),
            redo_stack: Vec::new(),
        }
    }

    pub fn meta(&self) -> &SessionMeta {
        &self.meta
    }

    pub fn session_id(&self) -> &str {
        &self.meta.session_id
    }

    pub fn annotator_id(&self) -> &str {
        &self.meta.annotator_id
    }

    pub fn doc_id(&self) -> &str {
        &self.meta.doc_id
    }

    pub fn config(&self) -> SessionConfig {
        self.config
    }

    pub fn state(&self, mention_id: &str) -> Option<&MentionState> {
        self.states.get(mention_id)
    }

    /// Mention states in document order.
    pub fn states(&self) -> impl Iterator<Item = &MentionState> {
        self.order.iter().map(|id| &self.states[id])
    }

    pub fn initial_state(&self, mention_id: &str) -> Option<&MentionState> {
        self.initial.get(mention_id)
    }

    pub fn undo_stack(&self) -> &[Command] {
        &self.undo_stack
    }

    pub fn redo_stack(&self) -> &[Command] {
        &self.redo_stack
    }

    pub fn can_undo(&self) -> bool {
        !self.undo_stack.is_empty()
    }

    pub fn can_redo(&self) -> bool {
        !self.redo_stack.is_empty()
    }

    /// True when both sessions hold the same mention states.
    pub fn same_states(&self, other: &AnnotationSession) -> bool {
        self.states == other.states
    }

    pub fn offered_types(
        &self,
        kb: &KnowledgeBase,
        mention_id: &str,
    ) -> Result<BTreeSet<TypeId>, SessionError> {
        Ok(self.mention(mention_id)?.offered_types(kb))
    }

    pub fn select_type(
        &mut self,
        kb: &KnowledgeBase,
        mention_id: &str,
        t: &TypeId,
    ) -> Result<&Command, SessionError> {
        self.apply(
            kb,
            Action::SelectType {
                mention_id: mention_id.into(),
                type_id: t.clone(),
            },
        )
    }

    pub fn accept_entity(
        &mut self,
        kb: &KnowledgeBase,
        mention_id: &str,
    ) -> Result<&Command, SessionError> {
        self.apply(
            kb,
            Action::AcceptEntity {
                mention_id: mention_id.into(),
            },
        )
    }

    pub fn revise_entity(
        &mut self,
        kb: &KnowledgeBase,
        mention_id: &str,
        entity_id: &str,
    ) -> Result<&Command, SessionError> {
        self.apply(
            kb,
            Action::ReviseEntity {
                mention_id: mention_id.into(),
                entity_id: entity_id.into(),
            },
        )
    }

    pub fn set_label(
        &mut self,
        kb: &KnowledgeBase,
        mention_id: &str,
        t: &TypeId,
    ) -> Result<&Command, SessionError> {
        self.apply(
            kb,
            Action::SetLabel {
                mention_id: mention_id.into(),
                type_id: t.clone(),
            },
        )
    }

    /// Resets one mention, or every mention when `mention_id` is `None`.
    pub fn reset(
        &mut self,
        kb: &KnowledgeBase,
        mention_id: Option<&str>,
    ) -> Result<&Command, SessionError> {
        let action = match mention_id {
            Some(id) => Action::ResetMention {
                mention_id: id.into(),
            },
            None => Action::ResetAll,
        };
        self.apply(kb, action)
    }

    /// Applies `action` as one undoable command. On error the session is
    /// left untouched.
    pub fn apply(&mut self, kb: &KnowledgeBase, action: Action) -> Result<&Command, SessionError> {
        let (kind, before, after) = match &action {
            Action::ResetAll => (
                CommandKind::ResetAll,
                self.states().cloned().collect(),
                self.order
                    .iter()
                    .map(|id| self.initial[id].clone())
                    .collect(),
            ),
            Action::ResetMention { mention_id } => {
                let current = self.mention(mention_id)?.clone();
                let opening = self.initial[mention_id].clone();
                (CommandKind::ResetMention, vec![current], vec![opening])
            }
            step => {
                let mention_id = step.mention_id().expect("episode actions name a mention");
                let current = self.mention(mention_id)?;
                let relabel = current.phase == Phase::Labeled;
                let mut next = if relabel {
                    self.initial[mention_id].clone()
                } else {
                    current.clone()
                };
                apply_step(kb, &self.config, &mut next, step)?;
                let kind = if relabel {
                    CommandKind::ModifyLabel
                } else {
                    step.kind()
                };
                (kind, vec![current.clone()], vec![next])
            }
        };
        self.restore(&after);
        self.redo_stack.clear();
        self.undo_stack.push(Command {
            kind,
            action,
            before,
            after,
        });
        Ok(self.undo_stack.last().expect("just pushed"))
    }

    pub fn undo(&mut self) -> Result<&Command, SessionError> {
        let cmd = self.undo_stack.pop().ok_or(SessionError::EmptyHistory)?;
        self.restore(&cmd.before);
        self.redo_stack.push(cmd);
        Ok(self.redo_stack.last().expect("just pushed"))
    }

    pub fn redo(&mut self) -> Result<&Command, SessionError> {
        let cmd = self.redo_stack.pop().ok_or(SessionError::EmptyHistory)?;
        self.restore(&cmd.after);
        self.undo_stack.push(cmd);
        Ok(self.undo_stack.last().expect("just pushed"))
    }

    fn restore(&mut self, snapshots: &[MentionState]) {
        for s in snapshots {
            self.states.insert(s.mention_id.clone(), s.clone());
        }
    }

    fn mention(&self, mention_id: &str) -> Result<&MentionState, SessionError> {
        self.states
            .get(mention_id)
            .ok_or_else(|| SessionError::UnknownMention(mention_id.to_string()))
    }
}

fn apply_step(
    kb: &KnowledgeBase,
    config: &SessionConfig,
    state: &mut MentionState,
    action: &Action,
) -> Result<(), SessionError> {
    let known = |t: &TypeId| {
        if kb.hierarchy().contains(t) {
            Ok(())
        } else {
            Err(SessionError::UnknownType(t.to_string()))
        }
    };
    match action {
        Action::SelectType { type_id, .. } => {
            known(type_id)?;
            if let Some(previous) = state.selected_types.last() {
                if !kb.hierarchy().is_ancestor(previous, type_id) {
                    return Err(SessionError::NotInChain {
                        previous: previous.clone(),
                        requested: type_id.clone(),
                    });
                }
            }
            if !state.offers(kb, type_id) {
                return Err(SessionError::NotOffered(type_id.clone()));
            }
            state.working_candidates = filter_by_type(kb, &state.working_candidates, type_id)?;
            state.selected_types.push(type_id.clone());
            state.phase = Phase::CoarseSelected;
        }
        Action::AcceptEntity { mention_id } => {
            let predicted = state
                .working_candidates
                .predicted()
                .ok_or_else(|| SessionError::NoPrediction(mention_id.clone()))?;
            state.final_entity = Some(predicted.to_string());
            state.phase = Phase::Revised;
        }
        Action::ReviseEntity { entity_id, .. } => {
            if !state.working_candidates.contains(entity_id) {
                return Err(SessionError::NotACandidate(entity_id.clone()));
            }
            state.final_entity = Some(entity_id.clone());
            state.phase = Phase::Revised;
        }
        Action::SetLabel { type_id, .. } => {
            known(type_id)?;
            if !state.offers(kb, type_id) {
                return Err(SessionError::NotOffered(type_id.clone()));
            }
            if config.auto_accept_on_direct_label && state.final_entity.is_none() {
                let consistent = filter_by_type(kb, &state.working_candidates, type_id)?;
                state.final_entity = consistent.predicted().map(str::to_string);
            }
            state.final_label = Some(type_id.clone());
            state.phase = Phase::Labeled;
        }
        Action::ResetMention { .. } | Action::ResetAll => {
            unreachable!("resets are handled by the session")
        }
    }
    Ok(())
}
