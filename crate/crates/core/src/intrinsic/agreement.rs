//! Identifier-normalized agreement between neighbour lists.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maps lowercased surface terms to chemical identifiers (e.g. InChI strings).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NormalizationDictionary {
    entries: HashMap<String, String>,
}

impl NormalizationDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rejects empty identifiers and repeated (case-insensitive) terms.
    pub fn insert(&mut self, term: &str, identifier: &str) -> Result<()> {
        let term = term.trim().to_lowercase();
        let identifier = identifier.trim();
        if term.is_empty() || identifier.is_empty() {
            return Err(Error::arg("dictionary term and identifier must be non-empty"));
        }
        if self.entries.contains_key(&term) {
            return Err(Error::arg(format!("duplicate dictionary term {term:?}")));
        }
        self.entries.insert(term, identifier.to_owned());
        Ok(())
    }

    pub fn lookup(&self, term: &str) -> Option<&str> {
        self.entries.get(&term.to_lowercase()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<'a> FromIterator<(&'a str, &'a str)> for NormalizationDictionary {
    /// Panics on invalid or duplicate entries; use [`NormalizationDictionary::insert`]
    /// for fallible construction.
    fn from_iter<I: IntoIterator<Item = (&'a str, &'a str)>>(iter: I) -> Self {
        let mut d = NormalizationDictionary::new();
        for (t, i) in iter {
            d.insert(t, i).expect("valid dictionary entry");
        }
        d
    }
}

/// Reads `term<TAB>identifier` lines. Blank lines are skipped.
pub fn read_dictionary<R: BufRead>(source: R) -> Result<NormalizationDictionary> {
    let mut dict = NormalizationDictionary::new();
    for (i, line) in source.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::parse(lineno, "invalid UTF-8"),
            _ => Error::Io(e),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let Some((term, id)) = line.split_once('\t') else {
            return Err(Error::parse(lineno, "expected term<TAB>identifier"));
        };
        dict.insert(term, id).map_err(|e| match e {
            Error::Argument(m) => Error::parse(lineno, m),
            e => e,
        })?;
    }
    Ok(dict)
}

/// What to do with terms the dictionary does not cover.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FallbackPolicy {
    Drop,
    /// Keep the term as a `surface:<lowercased term>` pseudo-identifier.
    #[default]
    SurfaceFallback,
}

impl std::str::FromStr for FallbackPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop" => Ok(FallbackPolicy::Drop),
            "surface-fallback" | "surface" => Ok(FallbackPolicy::SurfaceFallback),
            _ => Err(Error::arg(format!(
                "unknown fallback policy {s:?} (expected drop or surface-fallback)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedList {
    pub identifiers: BTreeSet<String>,
    pub unmatched: Vec<String>,
}

pub fn normalize_list<S: AsRef<str>>(
    terms: &[S],
    dict: &NormalizationDictionary,
    policy: FallbackPolicy,
) -> NormalizedList {
    let mut out = NormalizedList::default();
    for t in terms {
        let t = t.as_ref();
        match dict.lookup(t) {
            Some(id) => {
                out.identifiers.insert(id.to_owned());
            }
            None => {
                out.unmatched.push(t.to_owned());
                if policy == FallbackPolicy::SurfaceFallback {
                    out.identifiers.insert(format!("surface:{}", t.to_lowercase()));
                }
            }
        }
    }
    out
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets counted as identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        warn!("jaccard of two empty sets defined as 1.0");
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub names: Vec<String>,
    pub policy: FallbackPolicy,
    pub jaccard: Vec<Vec<f64>>,
    pub normalized_lists: BTreeMap<String, NormalizedList>,
}

impl AgreementReport {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.jaccard[i][j])
    }

    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .jaccard
            .iter()
            .map(|r| r.iter().map(|v| format!("{v:.4}")).collect())
            .collect();
        crate::report::text_matrix(&self.names, &cells)
    }
}

/// Pairwise Jaccard agreement of normalized word lists.
pub fn agreement_matrix(
    lists: &[(String, Vec<String>)],
    dict: &NormalizationDictionary,
    policy: FallbackPolicy,
) -> Result<AgreementReport> {
    if lists.len() < 2 {
        return Err(Error::arg(format!(
            "agreement needs at least 2 lists, got {}",
            lists.len()
        )));
    }
    let normalized: Vec<NormalizedList> = lists
        .iter()
        .map(|(_, words)| normalize_list(words, dict, policy))
        .collect();
    let n = lists.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = jaccard(&normalized[i].identifiers, &normalized[j].identifiers);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(AgreementReport {
        names: lists.iter().map(|(n, _)| n.clone()).collect(),
        policy,
        jaccard: m,
        normalized_lists: lists
            .iter()
            .map(|(n, _)| n.clone())
            .zip(normalized)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn jaccard_cases() {
        assert_eq!(jaccard(&set(&["x", "y"]), &set(&["y", "z"])), 1.0 / 3.0);
        assert_eq!(jaccard(&set(&["x"]), &set(&["x"])), 1.0);
        assert_eq!(jaccard(&set(&[]), &set(&[])), 1.0);
        assert_eq!(jaccard(&set(&["a"]), &set(&[])), 0.0);
    }

    #[test]
    fn normalize_policies() {
        let d: NormalizationDictionary = [("aspirin", "I1")].into_iter().collect();
        assert_eq!(normalize_list(&["Aspirin"], &d, FallbackPolicy::Drop).identifiers, set(&["I1"]));
        let r = normalize_list(&["unknownword"], &d, FallbackPolicy::Drop);
        assert!(r.identifiers.is_empty());
        assert_eq!(r.unmatched, ["unknownword"]);
        let r = normalize_list(&["UnknownWord"], &d, FallbackPolicy::SurfaceFallback);
        assert_eq!(r.identifiers, set(&["surface:unknownword"]));
    }

    #[test]
    fn synonyms_collapse() {
        let d: NormalizationDictionary = [
            ("paracetamol", "ID-APAP"),
            ("acetaminophen", "ID-APAP"),
            ("aspirin", "ID-ASA"),
        ]
        .into_iter()
        .collect();
        let r = normalize_list(&["paracetamol", "acetaminophen", "aspirin"], &d, FallbackPolicy::Drop);
        assert_eq!(r.identifiers.len(), 2);
    }

    #[test]
    fn seven_of_thirteen_agreement() {
        // 7 shared identifiers out of a 13-identifier union.
        let a: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let b: Vec<String> = (3..13).map(|i| format!("w{i}")).collect();
        let r = agreement_matrix(
            &[("A".into(), a), ("B".into(), b)],
            &NormalizationDictionary::new(),
            FallbackPolicy::SurfaceFallback,
        )
        .unwrap();
        assert!((r.get("A", "B").unwrap() - 7.0 / 13.0).abs() < 1e-15);
        assert!((r.get("A", "B").unwrap() - 0.54).abs() < 0.005);
        assert_eq!(r.get("A", "A"), Some(1.0));
    }

    #[test]
    fn agreement_needs_two_lists() {
        assert!(agreement_matrix(&[("A".into(), vec![])], &NormalizationDictionary::new(), FallbackPolicy::Drop).is_err());
    }

    #[test]
    fn dictionary_file() {
        let d = read_dictionary(Cursor::new("Aspirin\tI1\n\nibuprofen\tI2\n")).unwrap();
        assert_eq!(d.lookup("ASPIRIN"), Some("I1"));
        assert!(matches!(
            read_dictionary(Cursor::new("a\tI1\nA\tI2\n")),
            Err(Error::Parse { line: Some(2), .. })
        ));
        assert!(read_dictionary(Cursor::new("a\t\n")).is_err());
        assert!(read_dictionary(Cursor::new("no-tab\n")).is_err());
    }
}
