//! Precomputed linker output in JSON Lines form:
//! `{"mention_id":"d1-m3","candidates":[{"entity":"Q123","score":0.93}]}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Candidate, CandidateSet, LinkError};
use crate::kb::KnowledgeBase;

/// Candidate sets keyed by mention id.
pub type Predictions = BTreeMap<String, CandidateSet>;

#[derive(Debug, Serialize, Deserialize)]
struct PredictionRow {
    mention_id: String,
    candidates: Vec<ScoredEntity>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoredEntity {
    entity: String,
    score: f64,
}

pub fn import_predictions(
    kb: &KnowledgeBase,
    path: impl AsRef<Path>,
    k_max: usize,
) -> Result<Predictions, LinkError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LinkError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_predictions(kb, &text, k_max)
}

/// Parses prediction rows, re-ranks each set and truncates it to `k_max`.
/// Blank lines are skipped.
pub fn parse_predictions(
    kb: &KnowledgeBase,
    text: &str,
    k_max: usize,
) -> Result<Predictions, LinkError> {
    let mut out = Predictions::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| LinkError::Parse {
            line: line_no,
            message,
        };
        let row: PredictionRow =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let mut seen = BTreeSet::new();
        let mut candidates = Vec::with_capacity(row.candidates.len());
        for c in row.candidates {
            if !(0.0..=1.0).contains(&c.score) {
                return Err(parse_err(format!(
                    "score {} for `{}` is outside [0, 1]",
                    c.score, c.entity
                )));
            }
            if kb.entity(&c.entity).is_none() {
                return Err(LinkError::DanglingRef {
                    mention_id: row.mention_id,
                    entity: c.entity,
                });
            }
            if !seen.insert(c.entity.clone()) {
                return Err(parse_err(format!("entity `{}` listed twice", c.entity)));
            }
            candidates.push(Candidate::new(c.entity, c.score));
        }
        let mut cs = CandidateSet::from_candidates(row.mention_id.clone(), candidates);
        cs.truncate(k_max.max(1));
        if out.insert(row.mention_id.clone(), cs).is_some() {
            return Err(parse_err(format!(
                "mention `{}` appears twice",
                row.mention_id
            )));
        }
    }
    Ok(out)
}

/// Writes predictions as JSON Lines, one mention per line in id order.
pub fn export_predictions(predictions: &Predictions, mut out: impl Write) -> io::Result<()> {
    for cs in predictions.values() {
        let row = PredictionRow {
            mention_id: cs.mention_id.clone(),
            candidates: cs
                .candidates()
                .iter()
                .map(|c| ScoredEntity {
                    entity: c.entity_id.clone(),
                    score: c.score,
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
