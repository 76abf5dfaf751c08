//! Crowdsourcing analysis over exported annotation files: agreement
//! between annotators, error classification against a reference, and
//! label integration by voting.

mod agreement;
mod taxonomy;
mod vote;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::kb::{KbError, TypeHierarchy, TypeId};
use crate::session::ExportDocument;

pub use agreement::{accuracy_matrix, pairwise_accuracy, AccuracyMatrix};
pub use taxonomy::{
    classify_error, error_report, ErrorEntry, ErrorPattern, ErrorReport, PatternCounts,
};
pub use vote::{integrate, IntegrationResult};

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("annotators `{0}` and `{1}` share no labeled mentions")]
    NoOverlap(String, String),
    #[error("at least two annotation files are required, got {0}")]
    TooFewAnnotators(usize),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("mention `{0}` is not in the corpus")]
    UnknownMention(String),
    #[error("files for annotator `{annotator}` both label mention `{mention_id}`")]
    Conflict {
        annotator: String,
        mention_id: String,
    },
    #[error("cannot merge files of different annotators `{0}` and `{1}`")]
    MixedAnnotators(String, String),
}

impl From<KbError> for AnalyticsError {
    fn from(e: KbError) -> Self {
        match e {
            KbError::UnknownType(t) => AnalyticsError::UnknownType(t),
            other => AnalyticsError::UnknownType(other.to_string()),
        }
    }
}

/// The labels one annotator assigned. Unlabeled mentions are absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub annotator_id: String,
    pub doc_ids: BTreeSet<String>,
    pub labels: BTreeMap<String, TypeId>,
}

impl AnnotationFile {
    pub fn new(annotator_id: impl Into<String>) -> Self {
        AnnotationFile {
            annotator_id: annotator_id.into(),
            doc_ids: BTreeSet::new(),
            labels: BTreeMap::new(),
        }
    }

    pub fn with_labels<I, M>(annotator_id: impl Into<String>, labels: I) -> Self
    where
        I: IntoIterator<Item = (M, TypeId)>,
        M: Into<String>,
    {
        let mut f = Self::new(annotator_id);
        f.labels = labels.into_iter().map(|(m, t)| (m.into(), t)).collect();
        f
    }

    /// Labels from a session's json export, checked against the hierarchy.
    pub fn from_export(
        export: &ExportDocument,
        hierarchy: &TypeHierarchy,
    ) -> Result<Self, AnalyticsError> {
        let mut f = Self::new(export.annotator.clone());
        f.doc_ids.insert(export.doc_id.clone());
        for a in &export.annotations {
            if let Some(label) = &a.label {
                if !hierarchy.contains(label) {
                    return Err(AnalyticsError::UnknownType(label.to_string()));
                }
                f.labels.insert(a.mention_id.clone(), label.clone());
            }
        }
        Ok(f)
    }

    /// Every labeled mention must exist in `corpus`.
    pub fn check_corpus(&self, corpus: &Corpus) -> Result<(), AnalyticsError> {
        match self.labels.keys().find(|m| corpus.mention(m).is_none()) {
            Some(m) => Err(AnalyticsError::UnknownMention(m.clone())),
            None => Ok(()),
        }
    }

    /// Merges another file of the same annotator (typically another document).
    pub fn merge(&mut self, other: AnnotationFile) -> Result<(), AnalyticsError> {
        if other.annotator_id != self.annotator_id {
            return Err(AnalyticsError::MixedAnnotators(
                self.annotator_id.clone(),
                other.annotator_id,
            ));
        }
        for (m, t) in other.labels {
            if let Some(existing) = self.labels.get(&m) {
                if *existing != t {
                    return Err(AnalyticsError::Conflict {
                        annotator: self.annotator_id.clone(),
                        mention_id: m,
                    });
                }
            }
            self.labels.insert(m, t);
        }
        self.doc_ids.extend(other.doc_ids);
        Ok(())
    }

    /// Mentions labeled in both files.
    pub fn common_mentions<'a>(
        &'a self,
        other: &'a AnnotationFile,
    ) -> impl Iterator<Item = &'a str> {
        self.labels
            .keys()
            .filter(|m| other.labels.contains_key(*m))
            .map(String::as_str)
    }
}

/// Groups files by annotator, merging each annotator's documents. Output
/// is ordered by first appearance.
pub fn group_by_annotator(
    files: Vec<AnnotationFile>,
) -> Result<Vec<AnnotationFile>, AnalyticsError> {
    let mut out: Vec<AnnotationFile> = Vec::new();
    for f in files {
        match out.iter_mut().find(|g| g.annotator_id == f.annotator_id) {
            Some(g) => g.merge(f)?,
            None => out.push(f),
        }
    }
    Ok(out)
}
