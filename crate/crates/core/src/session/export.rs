//! Session export.
//!
//! `txt` rewrites every mention span inline as `[@surface#type/path*]`,
//! using `/UNRESOLVED` for mentions without a label. A backslash escapes
//! the next character; literal `\`, `#`, `[@` and `*]` in text, surfaces
//! and type paths are escaped so the markup always parses back.
//!
//! `json` is `{"doc_id", "annotator", "annotations": [...]}` with one entry
//! per mention in document order.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AnnotationSession, SessionError};
use crate::corpus::{char_boundaries, Corpus, CorpusDocument};
use crate::kb::{KnowledgeBase, TypeId};

pub const UNRESOLVED_LABEL: &str = "/UNRESOLVED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Txt,
    Json,
}

impl FromStr for ExportFormat {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "txt" => Ok(ExportFormat::Txt),
            "json" => Ok(ExportFormat::Json),
            other => Err(SessionError::UnknownFormat(other.to_string())),
        }
    }
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Txt => "txt",
            ExportFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportDocument {
    pub doc_id: String,
    pub annotator: String,
    pub annotations: Vec<ExportAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportAnnotation {
    pub mention_id: String,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub entity: Option<String>,
    pub label: Option<TypeId>,
}

impl ExportDocument {
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("export document serializes");
        out.push(b'\n');
        out
    }

    /// Checks an export against the corpus and knowledge base: one entry per
    /// mention in document order with matching spans, known entities and
    /// types, and labels carried by the chosen entity.
    pub fn validate(&self, kb: &KnowledgeBase, corpus: &Corpus) -> Result<(), SessionError> {
        let bad = |msg: String| Err(SessionError::Import(msg));
        let Some(doc) = corpus.doc(&self.doc_id) else {
            return Err(SessionError::UnknownDoc(self.doc_id.clone()));
        };
        if self.annotator.trim().is_empty() {
            return bad("empty annotator".into());
        }
        if self.annotations.len() != doc.mentions.len() {
            return bad(format!(
                "{} annotations for {} mentions in `{}`",
                self.annotations.len(),
                doc.mentions.len(),
                doc.doc_id
            ));
        }
        for (a, m) in self.annotations.iter().zip(&doc.mentions) {
            if a.mention_id != m.mention_id
                || a.start != m.start
                || a.end != m.end
                || a.surface != m.surface
            {
                return bad(format!(
                    "annotation `{}` does not match mention `{}`",
                    a.mention_id, m.mention_id
                ));
            }
            if let Some(label) = &a.label {
                if !kb.hierarchy().contains(label) {
                    return Err(SessionError::UnknownType(label.to_string()));
                }
            }
            if let Some(e) = &a.entity {
                let Some(entity) = kb.entity(e) else {
                    return bad(format!("unknown entity `{e}` on `{}`", a.mention_id));
                };
                if let Some(label) = a.label.as_ref().filter(|l| !entity.has_type(l)) {
                    return bad(format!(
                        "entity `{e}` does not carry `{label}` on `{}`",
                        a.mention_id
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn import_json(bytes: &[u8]) -> Result<ExportDocument, SessionError> {
    serde_json::from_slice(bytes).map_err(|e| SessionError::Import(e.to_string()))
}

impl AnnotationSession {
    pub fn export_document(&self, doc: &CorpusDocument) -> Result<ExportDocument, SessionError> {
        if doc.doc_id != self.doc_id() {
            return Err(SessionError::UnknownDoc(doc.doc_id.clone()));
        }
        let annotations = doc
            .mentions
            .iter()
            .map(|m| {
                let state = self.state(&m.mention_id);
                ExportAnnotation {
                    mention_id: m.mention_id.clone(),
                    start: m.start,
                    end: m.end,
                    surface: m.surface.clone(),
                    entity: state.and_then(|s| s.final_entity.clone()),
                    label: state.and_then(|s| s.final_label.clone()),
                }
            })
            .collect();
        Ok(ExportDocument {
            doc_id: doc.doc_id.clone(),
            annotator: self.annotator_id().to_string(),
            annotations,
        })
    }

    pub fn export(
        &self,
        doc: &CorpusDocument,
        format: ExportFormat,
    ) -> Result<Vec<u8>, SessionError> {
        let exported = self.export_document(doc)?;
        Ok(match format {
            ExportFormat::Json => exported.to_json_bytes(),
            ExportFormat::Txt => render_txt(doc, &exported).into_bytes(),
        })
    }

    pub fn export_to(
        &self,
        doc: &CorpusDocument,
        format: ExportFormat,
        dest: impl AsRef<Path>,
    ) -> Result<(), SessionError> {
        fs::write(dest, self.export(doc, format)?)?;
        Ok(())
    }
}

/// Inline markup for `doc` using the labels in `exported`.
pub fn render_txt(doc: &CorpusDocument, exported: &ExportDocument) -> String {
    let bounds = char_boundaries(&doc.text);
    let mut out = String::with_capacity(doc.text.len() + 32 * doc.mentions.len());
    let mut cursor = 0;
    for m in &doc.mentions {
        let label = exported
            .annotations
            .iter()
            .find(|a| a.mention_id == m.mention_id)
            .and_then(|a| a.label.as_ref())
            .map_or(UNRESOLVED_LABEL, TypeId::as_str);
        out.push_str(&escape_txt(&doc.text[bounds[cursor]..bounds[m.start]]));
        out.push_str("[@");
        out.push_str(&escape_txt(&m.surface));
        out.push('#');
        out.push_str(&escape_txt(label));
        out.push_str("*]");
        cursor = m.end;
    }
    out.push_str(&escape_txt(&doc.text[bounds[cursor]..]));
    out
}

pub fn escape_txt(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        let next = chars.peek().copied();
        match (c, next) {
            ('\\', _) | ('#', _) | ('[', Some('@')) | ('*', Some(']')) => {
                out.push('\\');
                out.push(c);
            }
            _ => out.push(c),
        }
    }
    out
}
