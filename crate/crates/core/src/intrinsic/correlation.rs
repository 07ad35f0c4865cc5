//! Cross-embedding correlation by representational similarity: each table is
//! summarized by its cosine-similarity matrix over a shared vocabulary, and
//! tables are compared by the Pearson correlation of those matrices' strict
//! upper triangles. The comparison is independent of each table's basis and
//! dimension.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::embed_store::EmbeddingTable;
use crate::error::{Error, Result};
use crate::matrix::dot;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub names: Vec<String>,
    pub pearson: Vec<Vec<f64>>,
    pub shared_vocab_size: usize,
}

impl CorrelationReport {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.pearson[i][j])
    }

    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .pearson
            .iter()
            .map(|r| r.iter().map(|v| format!("{v:.4}")).collect())
            .collect();
        format!(
            "shared vocabulary: {} words\n{}",
            self.shared_vocab_size,
            crate::report::text_matrix(&self.names, &cells)
        )
    }
}

/// Words present in every table, sorted.
pub fn shared_vocabulary(tables: &[&EmbeddingTable]) -> BTreeSet<String> {
    let Some((first, rest)) = tables.split_first() else {
        return BTreeSet::new();
    };
    first
        .vocab()
        .iter()
        .filter(|w| rest.iter().all(|t| t.contains(w)))
        .cloned()
        .collect()
}

/// Strict upper triangle (row-major) of the cosine matrix of `words` in `table`.
pub fn cosine_upper_triangle(table: &EmbeddingTable, words: &[&str]) -> Result<Vec<f64>> {
    let mut units = Vec::with_capacity(words.len());
    for w in words {
        let v = table
            .get(w)
            .ok_or_else(|| Error::NotFound((*w).to_owned()))?;
        let n = dot(v, v).sqrt();
        if n == 0.0 {
            return Err(Error::Domain(format!(
                "{w:?} has a zero vector in {:?}",
                table.name()
            )));
        }
        units.push(v.iter().map(|x| x / n).collect::<Vec<_>>());
    }
    let m = units.len();
    let mut out = Vec::with_capacity(m * (m.saturating_sub(1)) / 2);
    for i in 0..m {
        for j in i + 1..m {
            out.push(dot(&units[i], &units[j]));
        }
    }
    Ok(out)
}

/// Pearson correlation with two-pass centering. `None` if either input has
/// zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Similarity vectors whose values span less than this are treated as constant.
const ZERO_SPREAD: f64 = 1e-12;

pub fn correlation_matrix(tables: &[&EmbeddingTable]) -> Result<CorrelationReport> {
    if tables.len() < 2 {
        return Err(Error::arg(format!(
            "correlation needs at least 2 tables, got {}",
            tables.len()
        )));
    }
    let shared = shared_vocabulary(tables);
    if shared.len() < 3 {
        return Err(Error::Empty(format!(
            "shared vocabulary has {} words, at least 3 required",
            shared.len()
        )));
    }
    let words: Vec<&str> = shared.iter().map(String::as_str).collect();
    let sims = tables
        .iter()
        .map(|t| cosine_upper_triangle(t, &words))
        .collect::<Result<Vec<_>>>()?;
    for (t, s) in tables.iter().zip(&sims) {
        let (lo, hi) = s
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if hi - lo <= ZERO_SPREAD {
            return Err(Error::UndefinedCorrelation {
                table: t.name().to_owned(),
            });
        }
    }
    let n = tables.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 1.0;
        for j in i + 1..n {
            let r = pearson(&sims[i], &sims[j]).ok_or_else(|| Error::UndefinedCorrelation {
                table: tables[i].name().to_owned(),
            })?;
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(CorrelationReport {
        names: tables.iter().map(|t| t.name().to_owned()).collect(),
        pearson: m,
        shared_vocab_size: shared.len(),
    })
}
