//! Append-only session log: a header line followed by one JSON entry per
//! mutation. Replaying the entries against the same knowledge base rebuilds
//! the session, undo and redo stacks included.

use serde::{Deserialize, Serialize};

use super::{Action, AnnotationSession, MentionState, SessionConfig, SessionError, SessionMeta};
use crate::kb::KnowledgeBase;

/// Undo history kept when a log is compacted.
pub const PERSISTED_HISTORY: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    #[serde(flatten)]
    pub meta: SessionMeta,
    pub config: SessionConfig,
    /// Opening states in document order.
    pub initial: Vec<MentionState>,
    /// Replay starting point when older history was dropped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Vec<MentionState>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LogEntry {
    Open(SessionHeader),
    Apply { action: Action },
    Undo,
    Redo,
}

impl AnnotationSession {
    /// Header describing this session's opening state.
    pub fn header(&self) -> SessionHeader {
        SessionHeader {
            meta: self.meta.clone(),
            config: self.config,
            initial: self
                .order
                .iter()
                .map(|id| self.initial[id].clone())
                .collect(),
            base: (self.base != self.initial)
                .then(|| self.order.iter().map(|id| self.base[id].clone()).collect()),
        }
    }

    /// Rebuilds a session from its log. The first entry must be the header.
    pub fn replay<I>(kb: &KnowledgeBase, entries: I) -> Result<Self, SessionError>
    where
        I: IntoIterator<Item = LogEntry>,
    {
        let mut entries = entries.into_iter();
        let Some(LogEntry::Open(header)) = entries.next() else {
            return Err(SessionError::Log("log does not start with a header".into()));
        };
        let mut session =
            AnnotationSession::from_initial(header.meta, header.config, header.initial);
        if let Some(base) = header.base {
            for s in base {
                if !session.initial.contains_key(&s.mention_id) {
                    return Err(SessionError::Log(format!(
                        "base state for unknown mention `{}`",
                        s.mention_id
                    )));
                }
                session.base.insert(s.mention_id.clone(), s.clone());
                session.states.insert(s.mention_id.clone(), s);
            }
        }
        for (i, entry) in entries.enumerate() {
            let line = i + 2;
            let result = match entry {
                LogEntry::Open(_) => Err(SessionError::Log("repeated header".into())),
                LogEntry::Apply { action } => session.apply(kb, action).map(drop),
                LogEntry::Undo => session.undo().map(drop),
                LogEntry::Redo => session.redo().map(drop),
            };
            result.map_err(|e| SessionError::Log(format!("entry {line}: {e}")))?;
        }
        Ok(session)
    }

    /// A log equivalent to this session that keeps at most `max_history`
    /// undoable commands; older commands are folded into the header's base.
    pub fn compacted_log(&self, max_history: usize) -> Vec<LogEntry> {
        let drop = self.undo_stack.len().saturating_sub(max_history);
        let kept = &self.undo_stack[drop..];

        let mut base = self.states.clone();
        for cmd in kept.iter().rev() {
            for s in &cmd.before {
                base.insert(s.mention_id.clone(), s.clone());
            }
        }

        let mut header = self.header();
        header.base =
            (base != self.initial).then(|| self.order.iter().map(|id| base[id].clone()).collect());

        let mut out = Vec::with_capacity(1 + kept.len() + 2 * self.redo_stack.len());
        out.push(LogEntry::Open(header));
        out.extend(kept.iter().map(|c| LogEntry::Apply {
            action: c.action.clone(),
        }));
        out.extend(self.redo_stack.iter().rev().map(|c| LogEntry::Apply {
            action: c.action.clone(),
        }));
        out.extend(std::iter::repeat_n(LogEntry::Undo, self.redo_stack.len()));
        out
    }
}
