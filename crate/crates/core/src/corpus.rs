//! CoNLL-style corpus ingestion, content vocabularies and vocabulary overlap.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A BIO label split into its parts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BioTag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> BioTag<'a> {
    pub fn parse(tag: &'a str) -> Option<Self> {
        if tag == "O" {
            return Some(BioTag::Outside);
        }
        let (prefix, ty) = tag.split_once('-')?;
        if ty.is_empty() || ty.chars().any(char::is_whitespace) {
            return None;
        }
        match prefix {
            "B" => Some(BioTag::Begin(ty)),
            "I" => Some(BioTag::Inside(ty)),
            _ => None,
        }
    }

    pub fn entity_type(&self) -> Option<&'a str> {
        match *self {
            BioTag::Outside => None,
            BioTag::Begin(t) | BioTag::Inside(t) => Some(t),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    surface: String,
    tag: String,
}

impl Token {
    pub fn new(surface: impl Into<String>, tag: impl Into<String>) -> Result<Self> {
        let surface = surface.into();
        let tag = tag.into();
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(Error::arg(format!(
                "token surface must be non-empty without whitespace: {surface:?}"
            )));
        }
        if BioTag::parse(&tag).is_none() {
            return Err(Error::arg(format!("invalid BIO tag {tag:?}")));
        }
        Ok(Token { surface, tag })
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn bio(&self) -> BioTag<'_> {
        BioTag::parse(&self.tag).expect("validated on construction")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::arg("sentence must contain at least one token"));
        }
        Ok(Sentence { tokens })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(Token::surface)
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(Token::tag)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedCorpus {
    name: String,
    sentences: Vec<Sentence>,
}

impl AnnotatedCorpus {
    pub fn new(name: impl Into<String>, sentences: Vec<Sentence>) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(AnnotatedCorpus {
            name: name.into(),
            sentences,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Distinct tags in sorted order.
    pub fn tag_set(&self) -> BTreeSet<String> {
        self.sentences
            .iter()
            .flat_map(|s| s.tags().map(str::to_owned))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConllOptions {
    /// Zero-based column holding the tag. `None` means the strict two-column
    /// `surface<TAB>tag` layout; `Some(c)` accepts any line with more than `c`
    /// columns and takes the surface from column 0.
    pub tag_column: Option<usize>,
}

pub fn read_conll<R: BufRead>(source: R, name: &str) -> Result<AnnotatedCorpus> {
    read_conll_with(source, name, ConllOptions::default())
}

pub fn read_conll_with<R: BufRead>(
    source: R,
    name: &str,
    options: ConllOptions,
) -> Result<AnnotatedCorpus> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::parse(lineno, "invalid UTF-8"),
            _ => Error::Io(e),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(Sentence {
                    tokens: std::mem::take(&mut current),
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let (surface, tag) = match options.tag_column {
            None if fields.len() == 2 => (fields[0], fields[1]),
            None => {
                return Err(Error::parse(
                    lineno,
                    format!("expected 2 tab-separated fields, found {}", fields.len()),
                ))
            }
            Some(c) if fields.len() > c && c > 0 => (fields[0], fields[c]),
            Some(c) => {
                return Err(Error::parse(
                    lineno,
                    format!(
                        "tag column {c} not available in line with {} fields",
                        fields.len()
                    ),
                ))
            }
        };
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(Error::parse(
                lineno,
                format!("invalid token surface {surface:?}"),
            ));
        }
        if BioTag::parse(tag).is_none() {
            return Err(Error::parse(lineno, format!("invalid BIO tag {tag:?}")));
        }
        current.push(Token {
            surface: surface.to_owned(),
            tag: tag.to_owned(),
        });
    }
    if !current.is_empty() {
        sentences.push(Sentence { tokens: current });
    }
    AnnotatedCorpus::new(name, sentences)
}

pub fn write_conll<W: Write>(corpus: &AnnotatedCorpus, mut out: W) -> Result<()> {
    if corpus.sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for sentence in &corpus.sentences {
        for token in &sentence.tokens {
            writeln!(out, "{}\t{}", token.surface, token.tag)?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BioViolation {
    pub sentence: usize,
    pub token: usize,
    pub tag: String,
    pub previous: Option<String>,
}

impl fmt::Display for BioViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sentence {} token {}: {} after {}",
            self.sentence,
            self.token,
            self.tag,
            self.previous.as_deref().unwrap_or("<start>")
        )
    }
}

/// Lists every `I-X` whose predecessor is neither `B-X` nor `I-X`.
/// Violations are reported, never repaired.
pub fn validate_bio(corpus: &AnnotatedCorpus) -> Vec<BioViolation> {
    let mut out = Vec::new();
    for (si, sentence) in corpus.sentences.iter().enumerate() {
        let mut prev: Option<&Token> = None;
        for (ti, token) in sentence.tokens.iter().enumerate() {
            if let BioTag::Inside(ty) = token.bio() {
                let ok = prev
                    .map(|p| p.bio().entity_type() == Some(ty))
                    .unwrap_or(false);
                if !ok {
                    out.push(BioViolation {
                        sentence: si,
                        token: ti,
                        tag: token.tag.clone(),
                        previous: prev.map(|p| p.tag.clone()),
                    });
                }
            }
            prev = Some(token);
        }
    }
    out
}

/// One word per line; blank lines are skipped and entries are lowercased.
pub fn read_stopwords<R: BufRead>(source: R) -> Result<HashSet<String>> {
    let mut set = HashSet::new();
    for line in source.lines() {
        let line = line?;
        let word = line.trim();
        if !word.is_empty() {
            set.insert(word.to_lowercase());
        }
    }
    Ok(set)
}

/// True for tokens carrying at least one letter; pure punctuation and
/// numbers are not content words.
pub fn is_content_token(surface: &str) -> bool {
    surface.chars().any(char::is_alphabetic)
}

/// Lowercased content word types of the corpus minus `stopwords`.
pub fn content_vocabulary(
    corpus: &AnnotatedCorpus,
    stopwords: &HashSet<String>,
) -> BTreeSet<String> {
    corpus
        .sentences
        .iter()
        .flat_map(|s| s.surfaces())
        .filter(|w| is_content_token(w))
        .map(str::to_lowercase)
        .filter(|w| !stopwords.contains(w))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularyOverlapReport {
    pub names: Vec<String>,
    pub sizes: Vec<usize>,
    pub pairwise_counts: Vec<Vec<usize>>,
}

impl VocabularyOverlapReport {
    pub fn overlap(&self, a: &str, b: &str) -> Option<usize> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.pairwise_counts[i][j])
    }

    pub fn to_text(&self) -> String {
        crate::report::text_matrix(
            &self.names,
            &self
                .pairwise_counts
                .iter()
                .map(|r| r.iter().map(|c| c.to_string()).collect())
                .collect::<Vec<_>>(),
        )
    }
}

pub fn overlap_report(vocabs: &[(String, BTreeSet<String>)]) -> Result<VocabularyOverlapReport> {
    if vocabs.len() < 2 {
        return Err(Error::arg(format!(
            "overlap needs at least 2 vocabularies, got {}",
            vocabs.len()
        )));
    }
    let n = vocabs.len();
    let mut counts = vec![vec![0usize; n]; n];
    for i in 0..n {
        counts[i][i] = vocabs[i].1.len();
        for j in i + 1..n {
            let (small, large) = if vocabs[i].1.len() <= vocabs[j].1.len() {
                (&vocabs[i].1, &vocabs[j].1)
            } else {
                (&vocabs[j].1, &vocabs[i].1)
            };
            let c = small.iter().filter(|w| large.contains(*w)).count();
            counts[i][j] = c;
            counts[j][i] = c;
        }
    }
    Ok(VocabularyOverlapReport {
        names: vocabs.iter().map(|(n, _)| n.clone()).collect(),
        sizes: vocabs.iter().map(|(_, v)| v.len()).collect(),
        pairwise_counts: counts,
    })
}

/// Number of entity mentions per type.
pub fn entity_type_counts(corpus: &AnnotatedCorpus) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for s in &corpus.sentences {
        for t in &s.tokens {
            if let BioTag::Begin(ty) = t.bio() {
                *counts.entry(ty.to_owned()).or_insert(0) += 1;
            }
        }
    }
    counts
}
