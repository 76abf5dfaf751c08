//! Documents with pre-annotated mention spans.
//!
//! Corpus file layout:
//!
//! ```json
//! {"documents":[{"id":"d1","text":"Kobe scored 60 points.",
//!   "mentions":[{"id":"d1-m1","start":0,"end":4,"gold_entity":"Q123"}]}]}
//! ```
//!
//! Offsets count Unicode scalar values, end exclusive. `surface` may be given
//! per mention; when present it must equal the text slice.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed corpus: {0}")]
    Parse(String),
    #[error("mention `{mention_id}`: {message}")]
    Span { mention_id: String, message: String },
    #[error("mentions `{first}` and `{second}` overlap in document `{doc_id}`")]
    Overlap {
        doc_id: String,
        first: String,
        second: String,
    },
    #[error("duplicate {kind} id `{id}`")]
    Duplicate { kind: &'static str, id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub mention_id: String,
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_entity: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusDocument {
    pub doc_id: String,
    pub text: String,
    /// Sorted by start offset; spans never overlap.
    pub mentions: Vec<Mention>,
}

impl CorpusDocument {
    /// Validates spans and fills in surfaces from the text.
    pub fn new(
        doc_id: impl Into<String>,
        text: impl Into<String>,
        spans: Vec<MentionEntry>,
    ) -> Result<Self, CorpusError> {
        let doc_id = doc_id.into();
        let text = text.into();
        let bounds = char_boundaries(&text);
        let char_len = bounds.len() - 1;

        let mut mentions = Vec::with_capacity(spans.len());
        for span in spans {
            let err = |message: String| CorpusError::Span {
                mention_id: span.id.clone(),
                message,
            };
            if span.start >= span.end || span.end > char_len {
                return Err(err(format!(
                    "span [{}, {}) outside document of {} characters",
                    span.start, span.end, char_len
                )));
            }
            let slice = &text[bounds[span.start]..bounds[span.end]];
            if let Some(given) = &span.surface {
                if given != slice {
                    return Err(err(format!(
                        "surface `{given}` differs from text `{slice}`"
                    )));
                }
            }
            mentions.push(Mention {
                mention_id: span.id,
                doc_id: doc_id.clone(),
                start: span.start,
                end: span.end,
                surface: slice.to_string(),
                gold_entity: span.gold_entity,
            });
        }
        mentions.sort_by_key(|a| (a.start, a.end));
        for pair in mentions.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(CorpusError::Overlap {
                    doc_id,
                    first: pair[0].mention_id.clone(),
                    second: pair[1].mention_id.clone(),
                });
            }
        }
        Ok(CorpusDocument {
            doc_id,
            text,
            mentions,
        })
    }

    pub fn mention(&self, mention_id: &str) -> Option<&Mention> {
        self.mentions.iter().find(|m| m.mention_id == mention_id)
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// Byte offset of every char boundary, including the end of the string.
pub(crate) fn char_boundaries(text: &str) -> Vec<usize> {
    text.char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<CorpusDocument>,
    by_id: HashMap<String, usize>,
    mention_docs: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new(docs: Vec<CorpusDocument>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::new();
        let mut mention_docs = BTreeMap::new();
        for (i, doc) in docs.iter().enumerate() {
            if by_id.insert(doc.doc_id.clone(), i).is_some() {
                return Err(CorpusError::Duplicate {
                    kind: "document",
                    id: doc.doc_id.clone(),
                });
            }
            for m in &doc.mentions {
                if mention_docs.insert(m.mention_id.clone(), i).is_some() {
                    return Err(CorpusError::Duplicate {
                        kind: "mention",
                        id: m.mention_id.clone(),
                    });
                }
            }
        }
        Ok(Corpus {
            docs,
            by_id,
            mention_docs,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, CorpusError> {
        let file: CorpusFile =
            serde_json::from_str(text).map_err(|e| CorpusError::Parse(e.to_string()))?;
        let docs = file
            .documents
            .into_iter()
            .map(|d| CorpusDocument::new(d.id, d.text, d.mentions))
            .collect::<Result<Vec<_>, _>>()?;
        Corpus::new(docs)
    }

    pub fn doc(&self, doc_id: &str) -> Option<&CorpusDocument> {
        self.by_id.get(doc_id).map(|&i| &self.docs[i])
    }

    pub fn docs(&self) -> &[CorpusDocument] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn mention(&self, mention_id: &str) -> Option<&Mention> {
        let doc = &self.docs[*self.mention_docs.get(mention_id)?];
        doc.mention(mention_id)
    }

    pub fn mentions(&self) -> impl Iterator<Item = &Mention> {
        self.docs.iter().flat_map(|d| d.mentions.iter())
    }

    pub fn mention_count(&self) -> usize {
        self.mention_docs.len()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CorpusFile {
    pub documents: Vec<DocumentEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocumentEntry {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub mentions: Vec<MentionEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MentionEntry {
    pub id: String,
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_entity: Option<String>,
}

impl MentionEntry {
    pub fn new(id: &str, start: usize, end: usize) -> Self {
        MentionEntry {
            id: id.to_string(),
            start,
            end,
            surface: None,
            gold_entity: None,
        }
    }
}
