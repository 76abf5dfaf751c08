use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AnalyticsError, AnnotationFile};
use crate::corpus::{char_boundaries, Corpus};
use crate::kb::{KbError, TypeHierarchy, TypeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorPattern {
    Correct,
    /// The label is a descendant of the reference type.
    OverSpecific,
    /// The label is an ancestor of the reference type.
    NotSpecific,
    /// Neither contains the other.
    IncorrectPath,
}

impl ErrorPattern {
    pub fn color(self) -> Option<&'static str> {
        match self {
            ErrorPattern::Correct => None,
            ErrorPattern::OverSpecific => Some("orange"),
            ErrorPattern::NotSpecific => Some("blue"),
            ErrorPattern::IncorrectPath => Some("red"),
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ErrorPattern::Correct => "Correct",
            ErrorPattern::OverSpecific => "Over Specific",
            ErrorPattern::NotSpecific => "Not Specific",
            ErrorPattern::IncorrectPath => "Incorrect Path",
        }
    }

    pub const ALL: [ErrorPattern; 4] = [
        ErrorPattern::Correct,
        ErrorPattern::OverSpecific,
        ErrorPattern::NotSpecific,
        ErrorPattern::IncorrectPath,
    ];
}

/// Classifies `predicted` against the reference `gold` by edge reachability,
/// so multi-parent types are handled regardless of their path strings.
pub fn classify_error(
    h: &TypeHierarchy,
    gold: &TypeId,
    predicted: &TypeId,
) -> Result<ErrorPattern, AnalyticsError> {
    for t in [gold, predicted] {
        if !h.contains(t) {
            return Err(KbError::UnknownType(t.to_string()).into());
        }
    }
    Ok(if gold == predicted {
        ErrorPattern::Correct
    } else if h.is_ancestor(gold, predicted) {
        ErrorPattern::OverSpecific
    } else if h.is_ancestor(predicted, gold) {
        ErrorPattern::NotSpecific
    } else {
        ErrorPattern::IncorrectPath
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternCounts {
    pub correct: usize,
    pub over_specific: usize,
    pub not_specific: usize,
    pub incorrect_path: usize,
}

impl PatternCounts {
    pub fn get(&self, p: ErrorPattern) -> usize {
        match p {
            ErrorPattern::Correct => self.correct,
            ErrorPattern::OverSpecific => self.over_specific,
            ErrorPattern::NotSpecific => self.not_specific,
            ErrorPattern::IncorrectPath => self.incorrect_path,
        }
    }

    fn bump(&mut self, p: ErrorPattern) {
        *match p {
            ErrorPattern::Correct => &mut self.correct,
            ErrorPattern::OverSpecific => &mut self.over_specific,
            ErrorPattern::NotSpecific => &mut self.not_specific,
            ErrorPattern::IncorrectPath => &mut self.incorrect_path,
        } += 1;
    }

    pub fn total(&self) -> usize {
        self.correct + self.over_specific + self.not_specific + self.incorrect_path
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub mention_id: String,
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub gold: TypeId,
    pub predicted: TypeId,
    pub pattern: ErrorPattern,
}

/// Classification of every mention labeled in both files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub gold_annotator: String,
    pub pred_annotator: String,
    pub counts: PatternCounts,
    /// Ordered by document, then position.
    pub entries: Vec<ErrorEntry>,
}

pub fn error_report(
    h: &TypeHierarchy,
    gold: &AnnotationFile,
    pred: &AnnotationFile,
    corpus: &Corpus,
) -> Result<ErrorReport, AnalyticsError> {
    let mut entries = Vec::new();
    let mut counts = PatternCounts::default();
    for m in gold.common_mentions(pred) {
        let mention = corpus
            .mention(m)
            .ok_or_else(|| AnalyticsError::UnknownMention(m.to_string()))?;
        let (g, p) = (&gold.labels[m], &pred.labels[m]);
        let pattern = classify_error(h, g, p)?;
        counts.bump(pattern);
        entries.push(ErrorEntry {
            mention_id: m.to_string(),
            doc_id: mention.doc_id.clone(),
            start: mention.start,
            end: mention.end,
            gold: g.clone(),
            predicted: p.clone(),
            pattern,
        });
    }
    if entries.is_empty() {
        return Err(AnalyticsError::NoOverlap(
            gold.annotator_id.clone(),
            pred.annotator_id.clone(),
        ));
    }
    let doc_rank = |d: &str| corpus.docs().iter().position(|x| x.doc_id == d);
    entries.sort_by_key(|e| (doc_rank(&e.doc_id), e.start));
    Ok(ErrorReport {
        gold_annotator: gold.annotator_id.clone(),
        pred_annotator: pred.annotator_id.clone(),
        counts,
        entries,
    })
}

impl ErrorReport {
    /// A standalone LaTeX document. Mis-labeled spans are wrapped in
    /// `\textcolor{<color>}{...}`; the legend uses colour boxes so that span
    /// markup is the only `\textcolor` in the file.
    pub fn to_tex(&self, corpus: &Corpus) -> String {
        let mut out = String::new();
        out.push_str(
            "\\documentclass{article}\n\
             \\usepackage[T1]{fontenc}\n\
             \\usepackage[utf8]{inputenc}\n\
             \\usepackage{xcolor}\n\
             \\usepackage{booktabs}\n\
             \\begin{document}\n",
        );
        let _ = writeln!(
            out,
            "\\section*{{Error analysis: {} against {}}}\n",
            tex_escape(&self.pred_annotator),
            tex_escape(&self.gold_annotator)
        );

        out.push_str("\\paragraph{Legend}\n");
        for p in &ErrorPattern::ALL[1..] {
            let _ = writeln!(
                out,
                "\\colorbox{{{}}}{{\\strut\\ }}~{}\\quad",
                p.color().unwrap_or("black"),
                p.title()
            );
        }
        out.push('\n');

        out.push_str("\\begin{tabular}{lr}\n\\toprule\nPattern & Count \\\\\n\\midrule\n");
        for p in ErrorPattern::ALL {
            let _ = writeln!(out, "{} & {} \\\\", p.title(), self.counts.get(p));
        }
        let _ = writeln!(out, "\\midrule\nTotal & {} \\\\", self.counts.total());
        out.push_str("\\bottomrule\n\\end{tabular}\n\n");

        for doc in corpus.docs() {
            let spans: Vec<&ErrorEntry> = self
                .entries
                .iter()
                .filter(|e| e.doc_id == doc.doc_id)
                .collect();
            if spans.is_empty() {
                continue;
            }
            let _ = writeln!(out, "\\subsection*{{{}}}", tex_escape(&doc.doc_id));
            let bounds = char_boundaries(&doc.text);
            let mut cursor = 0;
            for e in spans {
                out.push_str(&tex_escape(&doc.text[bounds[cursor]..bounds[e.start]]));
                let surface = tex_escape(&doc.text[bounds[e.start]..bounds[e.end]]);
                match e.pattern.color() {
                    None => out.push_str(&surface),
                    Some(color) => {
                        let _ = write!(
                            out,
                            "\\textcolor{{{color}}}{{{surface}}}\\textsuperscript{{\\texttt{{{}}} $\\to$ \\texttt{{{}}}}}",
                            tex_escape(e.predicted.as_str()),
                            tex_escape(e.gold.as_str())
                        );
                    }
                }
                cursor = e.end;
            }
            out.push_str(&tex_escape(&doc.text[bounds[cursor]..]));
            out.push_str("\n\n");
        }
        out.push_str("\\end{document}\n");
        out
    }
}

fn tex_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\textbackslash{}"),
            '&' | '%' | '$' | '#' | '_' | '{' | '}' => {
                out.push('\\');
                out.push(c);
            }
            '~' => out.push_str("\\textasciitilde{}"),
            '^' => out.push_str("\\textasciicircum{}"),
            _ => out.push(c),
        }
    }
    out
}
