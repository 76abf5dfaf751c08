use serde::{Deserialize, Serialize};

use super::{AnalyticsError, AnnotationFile};

/// Fraction of commonly labeled mentions on which `a` and `b` chose the
/// exact same type.
pub fn pairwise_accuracy(a: &AnnotationFile, b: &AnnotationFile) -> Result<f64, AnalyticsError> {
    let mut common = 0usize;
    let mut agree = 0usize;
    for m in a.common_mentions(b) {
        common += 1;
        if a.labels[m] == b.labels[m] {
            agree += 1;
        }
    }
    if common == 0 {
        return Err(AnalyticsError::NoOverlap(
            a.annotator_id.clone(),
            b.annotator_id.clone(),
        ));
    }
    Ok(agree as f64 / common as f64)
}

/// Symmetric pairwise-accuracy matrix. Cells are `None` where two
/// annotators share no labeled mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    pub annotators: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl AccuracyMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i][j]
    }

    pub fn len(&self) -> usize {
        self.annotators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotators.is_empty()
    }
}

pub fn accuracy_matrix(files: &[AnnotationFile]) -> Result<AccuracyMatrix, AnalyticsError> {
    if files.len() < 2 {
        return Err(AnalyticsError::TooFewAnnotators(files.len()));
    }
    let n = files.len();
    let mut cells = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = pairwise_accuracy(&files[i], &files[j]).ok();
            cells[i][j] = v;
            cells[j][i] = v;
        }
    }
    Ok(AccuracyMatrix {
        annotators: files.iter().map(|f| f.annotator_id.clone()).collect(),
        cells,
    })
}
