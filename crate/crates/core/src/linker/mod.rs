//! Candidate generation, ranking and knowledge-constrained type filtering.
//!
//! The baseline linker scores candidates by the alias-count prior
//! `count(e, surface) / Σ count(·, surface)`. Any other linker can be plugged
//! in through [`Linker`], and externally computed predictions are ingested
//! with [`import_predictions`].

mod predictions;
mod stats;

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Mention;
use crate::kb::{KbError, KnowledgeBase, TypeId};

pub use predictions::{export_predictions, import_predictions, parse_predictions, Predictions};
pub use stats::{reduction_for_corpus, reduction_stats, ReductionReport};

/// Number of revision choices kept per mention unless configured otherwise.
pub const DEFAULT_K_MAX: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum LinkError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed predictions at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("entity `{entity}` referenced by mention `{mention_id}` is not in the knowledge base")]
    DanglingRef { mention_id: String, entity: String },
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("no candidate sets given")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub entity_id: String,
    pub score: f64,
}

impl Candidate {
    pub fn new(entity_id: impl Into<String>, score: f64) -> Self {
        Candidate {
            entity_id: entity_id.into(),
            score,
        }
    }
}

/// Score descending, then entity id ascending.
pub fn candidate_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.entity_id.cmp(&b.entity_id))
}

/// Ranked candidates for one mention. `predicted` is always the first
/// candidate's entity, or `None` when there are no candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub mention_id: String,
    candidates: Vec<Candidate>,
    predicted: Option<String>,
}

impl CandidateSet {
    pub fn empty(mention_id: impl Into<String>) -> Self {
        CandidateSet {
            mention_id: mention_id.into(),
            candidates: Vec::new(),
            predicted: None,
        }
    }

    /// Builds a set from candidates in any order; the result is ranked.
    pub fn from_candidates(mention_id: impl Into<String>, mut candidates: Vec<Candidate>) -> Self {
        candidates.sort_by(candidate_order);
        Self::from_ranked(mention_id.into(), candidates)
    }

    fn from_ranked(mention_id: String, candidates: Vec<Candidate>) -> Self {
        let predicted = candidates.first().map(|c| c.entity_id.clone());
        CandidateSet {
            mention_id,
            candidates,
            predicted,
        }
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn predicted(&self) -> Option<&str> {
        self.predicted.as_deref()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn contains(&self, entity_id: &str) -> bool {
        self.candidates.iter().any(|c| c.entity_id == entity_id)
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.entity_id.as_str())
    }

    pub fn truncate(&mut self, k_max: usize) {
        self.candidates.truncate(k_max);
        self.predicted = self.candidates.first().map(|c| c.entity_id.clone());
    }

    /// Keeps the candidates matching `keep`, preserving order.
    pub fn retain(&self, mut keep: impl FnMut(&Candidate) -> bool) -> CandidateSet {
        let kept = self
            .candidates
            .iter()
            .filter(|c| keep(c))
            .cloned()
            .collect();
        Self::from_ranked(self.mention_id.clone(), kept)
    }
}

/// Produces a ranked candidate set for a mention.
pub trait Linker: Send + Sync {
    fn link(&self, kb: &KnowledgeBase, mention: &Mention, k_max: usize) -> CandidateSet;
}

/// Baseline linker: alias-count prior over the normalized surface form.
#[derive(Debug, Clone, Copy, Default)]
pub struct AliasPriorLinker;

impl Linker for AliasPriorLinker {
    fn link(&self, kb: &KnowledgeBase, mention: &Mention, k_max: usize) -> CandidateSet {
        generate_candidates(kb, mention, k_max)
    }
}

/// Uses imported predictions where available and falls back to another
/// linker for uncovered mentions.
pub struct PredictionLinker<'a, L = AliasPriorLinker> {
    predictions: &'a Predictions,
    fallback: L,
}

impl<'a> PredictionLinker<'a> {
    pub fn new(predictions: &'a Predictions) -> Self {
        PredictionLinker {
            predictions,
            fallback: AliasPriorLinker,
        }
    }
}

impl<'a, L: Linker> PredictionLinker<'a, L> {
    pub fn with_fallback(predictions: &'a Predictions, fallback: L) -> Self {
        PredictionLinker {
            predictions,
            fallback,
        }
    }
}

impl<L: Linker> Linker for PredictionLinker<'_, L> {
    fn link(&self, kb: &KnowledgeBase, mention: &Mention, k_max: usize) -> CandidateSet {
        match self.predictions.get(&mention.mention_id) {
            Some(cs) => {
                let mut cs = cs.clone();
                cs.truncate(k_max);
                cs
            }
            None => self.fallback.link(kb, mention, k_max),
        }
    }
}

/// Alias-prior candidates for `mention`, truncated to `k_max`.
///
/// Scores are normalized over the whole alias entry before truncation.
/// Zero-count aliases carry no evidence and are skipped.
pub fn generate_candidates(kb: &KnowledgeBase, mention: &Mention, k_max: usize) -> CandidateSet {
    let entries = kb.aliases().lookup(&mention.surface);
    let total: u64 = entries.iter().map(|e| e.count).sum();
    if total == 0 {
        return CandidateSet::empty(mention.mention_id.clone());
    }
    let candidates = entries
        .iter()
        .filter(|e| e.count > 0)
        .map(|e| Candidate::new(e.entity_id.clone(), e.count as f64 / total as f64))
        .collect();
    let mut cs = CandidateSet::from_candidates(mention.mention_id.clone(), candidates);
    cs.truncate(k_max.max(1));
    cs
}

/// Stable re-sort by score descending then entity id. Idempotent.
pub fn rank_candidates(cs: CandidateSet) -> CandidateSet {
    CandidateSet::from_candidates(cs.mention_id, cs.candidates)
}

/// Union of the (ancestor-closed) type sets of all candidates. With no
/// candidates there is no constraint and the whole type set is returned.
pub fn constrained_types(kb: &KnowledgeBase, cs: &CandidateSet) -> BTreeSet<TypeId> {
    if cs.is_empty() {
        return kb.hierarchy().all_types();
    }
    cs.entity_ids()
        .filter_map(|id| kb.entity(id))
        .flat_map(|e| e.types.iter().cloned())
        .collect()
}

/// Candidates whose type set contains `t`, in their original order.
pub fn filter_by_type(
    kb: &KnowledgeBase,
    cs: &CandidateSet,
    t: &TypeId,
) -> Result<CandidateSet, KbError> {
    if !kb.hierarchy().contains(t) {
        return Err(KbError::UnknownType(t.to_string()));
    }
    Ok(cs.retain(|c| kb.entity(&c.entity_id).is_some_and(|e| e.has_type(t))))
}
