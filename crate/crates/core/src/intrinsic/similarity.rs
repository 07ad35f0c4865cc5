//! Per-embedding nearest-neighbour lists for a single query word.

use serde::{Deserialize, Serialize};

use crate::embed_store::{top_k, EmbeddingTable, NeighborList};
use crate::error::{Error, Result};

/// Number of neighbours listed per embedding unless configured otherwise.
pub const DEFAULT_K: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub query: String,
    pub k: usize,
    /// `(embedding name, neighbours)` for every table containing the query.
    pub lists: Vec<(String, NeighborList)>,
    /// Names of tables that do not contain the query.
    pub missing: Vec<String>,
}

impl SimilarityReport {
    pub fn list(&self, name: &str) -> Option<&NeighborList> {
        self.lists.iter().find(|(n, _)| n == name).map(|(_, l)| l)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("query: {}  k: {}\n", self.query, self.k);
        let headers: Vec<String> = self.lists.iter().map(|(n, _)| n.clone()).collect();
        let rows = (0..self.lists.iter().map(|(_, l)| l.neighbors.len()).max().unwrap_or(0))
            .map(|r| {
                self.lists
                    .iter()
                    .map(|(_, l)| {
                        l.neighbors
                            .get(r)
                            .map(|n| format!("{} ({:.4})", n.word, n.similarity))
                            .unwrap_or_default()
                    })
                    .collect()
            })
            .collect::<Vec<Vec<String>>>();
        out.push_str(&crate::report::text_columns(&headers, &rows));
        for m in &self.missing {
            out.push_str(&format!("not in {m}\n"));
        }
        out
    }
}

pub fn similarity_query_report(
    tables: &[&EmbeddingTable],
    query: &str,
    k: usize,
) -> Result<SimilarityReport> {
    let mut lists = Vec::new();
    let mut missing = Vec::new();
    for t in tables {
        if t.contains(query) {
            lists.push((t.name().to_owned(), top_k(t, query, k)?));
        } else {
            missing.push(t.name().to_owned());
        }
    }
    if lists.is_empty() {
        return Err(Error::NotFound(query.to_owned()));
    }
    Ok(SimilarityReport {
        query: query.to_owned(),
        k,
        lists,
        missing,
    })
}
