//! Serializable analysis results and their aligned-column text rendering.

use serde::{Deserialize, Serialize};

use crate::corpus::VocabularyOverlapReport;
use crate::intrinsic::{AgreementReport, CorrelationReport, Projection2D, SimilarityReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalysisReport {
    Overlap(VocabularyOverlapReport),
    Similarity(SimilarityReport),
    Agreement(AgreementReport),
    Correlation(CorrelationReport),
    Projection(Projection2D),
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        match self {
            AnalysisReport::Overlap(r) => r.to_text(),
            AnalysisReport::Similarity(r) => r.to_text(),
            AnalysisReport::Agreement(r) => r.to_text(),
            AnalysisReport::Correlation(r) => r.to_text(),
            AnalysisReport::Projection(p) => p.to_tsv(),
        }
    }
}

/// Renders a labelled square matrix.
pub fn text_matrix(names: &[String], cells: &[Vec<String>]) -> String {
    let mut headers = vec![String::new()];
    headers.extend(names.iter().cloned());
    let rows: Vec<Vec<String>> = names
        .iter()
        .zip(cells)
        .map(|(n, r)| std::iter::once(n.clone()).chain(r.iter().cloned()).collect())
        .collect();
    text_columns(&headers, &rows)
}

/// Left-aligned columns separated by two spaces, trailing spaces trimmed.
pub fn text_columns(headers: &[String], rows: &[Vec<String>]) -> String {
    let ncol = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let mut l = String::new();
        for (i, c) in cells.iter().enumerate().take(ncol) {
            l.push_str(c);
            if i + 1 < ncol {
                let pad = widths[i] - c.chars().count() + 2;
                l.extend(std::iter::repeat_n(' ', pad));
            }
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(headers);
    for r in rows {
        line(r);
    }
    out
}
