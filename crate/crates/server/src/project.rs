use std::path::Path;

use kcat_core::corpus::CorpusError;
use kcat_core::linker::{
    import_predictions, reduction_for_corpus, LinkError, PredictionLinker, Predictions,
    ReductionReport,
};
use kcat_core::{Corpus, KbError, KnowledgeBase};

use crate::config::ProjectConfig;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("knowledge base: {0}")]
    Kb(#[from] KbError),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("predictions: {0}")]
    Predictions(#[from] LinkError),
}

/// Everything read-only the service works from.
#[derive(Debug)]
pub struct Project {
    pub kb: KnowledgeBase,
    pub corpus: Corpus,
    pub predictions: Predictions,
    pub k_max: usize,
}

impl Project {
    pub fn load(
        kb_dir: &Path,
        corpus_file: &Path,
        predictions_file: Option<&Path>,
        k_max: usize,
    ) -> Result<Self, LoadError> {
        let kb = KnowledgeBase::load_dir(kb_dir)?;
        let corpus = Corpus::load(corpus_file)?;
        let predictions = match predictions_file {
            Some(p) => import_predictions(&kb, p, k_max)?,
            None => Predictions::new(),
        };
        Ok(Project {
            kb,
            corpus,
            predictions,
            k_max,
        })
    }

    pub fn from_config(config: &ProjectConfig) -> Result<Self, LoadError> {
        Self::load(
            &config.kb_dir,
            &config.corpus_file,
            config.predictions_file.as_deref(),
            config.k_max,
        )
    }

    /// Imported predictions first, alias prior for everything else.
    pub fn linker(&self) -> PredictionLinker<'_> {
        PredictionLinker::new(&self.predictions)
    }

    pub fn reduction(&self) -> Result<ReductionReport, LinkError> {
        reduction_for_corpus(&self.kb, &self.corpus, &self.linker(), self.k_max)
    }
}

/// The reduction report as printed by the CLI and served over HTTP.
pub fn report_json(report: &ReductionReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}
