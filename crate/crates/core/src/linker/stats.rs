use serde::{Deserialize, Serialize};

use super::{constrained_types, CandidateSet, LinkError, Linker};
use crate::corpus::Corpus;
use crate::kb::KnowledgeBase;

/// How far knowledge constraints shrink the candidate type set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    /// Size of the whole type set.
    pub total_types: usize,
    pub mentions: usize,
    /// Mean size of the constrained type set per mention.
    pub mean_kc_types: f64,
    /// `mean_kc_types / total_types`.
    pub ratio: f64,
}

pub fn reduction_stats(
    kb: &KnowledgeBase,
    css: &[CandidateSet],
) -> Result<ReductionReport, LinkError> {
    if css.is_empty() {
        return Err(LinkError::EmptyInput);
    }
    let total_types = kb.hierarchy().len();
    let summed: usize = css.iter().map(|cs| constrained_types(kb, cs).len()).sum();
    let mean_kc_types = summed as f64 / css.len() as f64;
    Ok(ReductionReport {
        total_types,
        mentions: css.len(),
        mean_kc_types,
        ratio: mean_kc_types / total_types as f64,
    })
}

/// Links every mention of the corpus and reports the reduction.
pub fn reduction_for_corpus(
    kb: &KnowledgeBase,
    corpus: &Corpus,
    linker: &dyn Linker,
    k_max: usize,
) -> Result<ReductionReport, LinkError> {
    let css: Vec<CandidateSet> = corpus
        .mentions()
        .map(|m| linker.link(kb, m, k_max))
        .collect();
    reduction_stats(kb, &css)
}
