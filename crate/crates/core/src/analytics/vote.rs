use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AnalyticsError, AnnotationFile};
use crate::kb::{KbError, TypeHierarchy, TypeId};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrationResult {
    pub labels: BTreeMap<String, TypeId>,
    pub unresolved: BTreeSet<String>,
    /// Votes behind each integrated label; for a tie this is the sum of the
    /// tied labels' votes.
    pub support: BTreeMap<String, usize>,
}

/// Integrates labels by voting.
///
/// A label with strictly more votes than any other wins outright. When
/// several labels share the top count, the result is the deepest type that
/// is an ancestor-or-self of every tied label; if the tied labels share no
/// type below the virtual root the mention is left unresolved. Incomparable
/// deepest candidates (possible only in a DAG) are broken by path depth,
/// then path order, so the outcome never depends on file order.
pub fn integrate(
    h: &TypeHierarchy,
    files: &[AnnotationFile],
) -> Result<IntegrationResult, AnalyticsError> {
    if files.len() < 2 {
        return Err(AnalyticsError::TooFewAnnotators(files.len()));
    }
    let mut tallies: BTreeMap<&str, BTreeMap<&TypeId, usize>> = BTreeMap::new();
    for f in files {
        for (m, t) in &f.labels {
            if !h.contains(t) {
                return Err(KbError::UnknownType(t.to_string()).into());
            }
            *tallies.entry(m.as_str()).or_default().entry(t).or_default() += 1;
        }
    }

    let mut result = IntegrationResult::default();
    for (mention, tally) in tallies {
        let top = *tally.values().max().expect("tallies are non-empty");
        let tied: Vec<&TypeId> = tally
            .iter()
            .filter(|(_, &n)| n == top)
            .map(|(t, _)| *t)
            .collect();
        let winner = match tied.as_slice() {
            [single] => Some((*single).clone()),
            _ => deepest_common_ancestor(h, &tied)?,
        };
        match winner {
            Some(label) => {
                result.labels.insert(mention.to_string(), label);
                result.support.insert(mention.to_string(), top * tied.len());
            }
            None => {
                result.unresolved.insert(mention.to_string());
            }
        }
    }
    Ok(result)
}

fn deepest_common_ancestor(
    h: &TypeHierarchy,
    tied: &[&TypeId],
) -> Result<Option<TypeId>, AnalyticsError> {
    let mut common: Option<BTreeSet<TypeId>> = None;
    for t in tied {
        let mut up = h.ancestors(t)?;
        up.insert((*t).clone());
        common = Some(match common {
            None => up,
            Some(c) => c.intersection(&up).cloned().collect(),
        });
    }
    let common = common.unwrap_or_default();
    let lowest = common
        .iter()
        .filter(|c| !common.iter().any(|d| h.is_ancestor(c, d)));
    Ok(lowest
        .min_by(|a, b| b.depth().cmp(&a.depth()).then_with(|| a.cmp(b)))
        .cloned())
}
