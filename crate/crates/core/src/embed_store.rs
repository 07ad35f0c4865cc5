//! Static word-embedding tables: word2vec text/binary I/O, vocabulary
//! restriction and exact cosine nearest-neighbour search.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// A vocabulary with one dense `f64` vector per word.
///
/// Words are unique, non-empty and whitespace-free; every vector has the same
/// dimension and only finite components.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    name: String,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Matrix,
}

impl EmbeddingTable {
    pub fn new(name: impl Into<String>, vocab: Vec<String>, vectors: Matrix) -> Result<Self> {
        if vectors.rows() != vocab.len() {
            return Err(Error::arg(format!(
                "{} words but {} vectors",
                vocab.len(),
                vectors.rows()
            )));
        }
        if vectors.cols() == 0 {
            return Err(Error::arg("embedding dimension must be at least 1"));
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, w) in vocab.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::arg(format!("invalid word {w:?}")));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::DuplicateWord(w.clone()));
            }
        }
        for i in 0..vectors.rows() {
            if let Some(j) = vectors.row(i).iter().position(|v| !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "non-finite component {j} in vector of {:?}",
                    vocab[i]
                )));
            }
        }
        Ok(EmbeddingTable {
            name: name.into(),
            vocab,
            index,
            vectors,
        })
    }

    /// Builds a table from `(word, vector)` rows.
    pub fn from_rows<I, S>(name: impl Into<String>, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut vocab = Vec::new();
        let mut data = Vec::new();
        let mut dim = None;
        for (w, v) in rows {
            let w = w.into();
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::arg(format!(
                        "vector of {w:?} has dimension {}, expected {d}",
                        v.len()
                    )))
                }
                _ => {}
            }
            vocab.push(w);
            data.extend(v);
        }
        let dim = dim.ok_or_else(|| Error::Empty("no rows".into()))?;
        let n = vocab.len();
        EmbeddingTable::new(name, vocab, Matrix::from_vec(n, dim, data))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.vectors.row(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vocab
            .iter()
            .enumerate()
            .map(move |(i, w)| (w.as_str(), self.vectors.row(i)))
    }

    /// Applies `f` to every vector, keeping vocabulary and name.
    pub fn map_vectors(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        EmbeddingTable::from_rows(
            self.name.clone(),
            self.iter().map(|(w, v)| (w.to_owned(), f(v))),
        )
    }
}

/// File encodings understood by [`read_table`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFormat {
    Text,
    Binary,
}

impl EmbeddingFormat {
    /// `.bin` selects the binary format; anything else is text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("bin") => EmbeddingFormat::Binary,
            _ => EmbeddingFormat::Text,
        }
    }
}

pub fn read_table<R: BufRead>(
    source: R,
    format: EmbeddingFormat,
    name: &str,
) -> Result<EmbeddingTable> {
    match format {
        EmbeddingFormat::Text => read_w2v_text(source, name),
        EmbeddingFormat::Binary => read_w2v_binary(source, name),
    }
}

/// Largest vector dimension accepted by the readers.
pub const MAX_DIM: usize = 1 << 20;

fn parse_header(line: &str, lineno: usize) -> Result<(usize, usize)> {
    let mut parts = line.split_whitespace();
    let (Some(n), Some(d), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(Error::parse(
            lineno,
            format!("expected header \"vocab_size dimension\", found {line:?}"),
        ));
    };
    let n: usize = n
        .parse()
        .map_err(|_| Error::parse(lineno, format!("invalid vocabulary size {n:?}")))?;
    let d: usize = d
        .parse()
        .map_err(|_| Error::parse(lineno, format!("invalid dimension {d:?}")))?;
    if d == 0 || d > MAX_DIM {
        return Err(Error::parse(
            lineno,
            format!("dimension must be in 1..={MAX_DIM}, found {d}"),
        ));
    }
    Ok((n, d))
}

fn checked_table(name: &str, vocab: Vec<String>, matrix: Matrix) -> Result<EmbeddingTable> {
    EmbeddingTable::new(name, vocab, matrix).map_err(|e| match e {
        Error::Argument(m) | Error::Domain(m) => Error::Parse {
            line: None,
            message: m,
        },
        e => e,
    })
}

pub fn read_w2v_text<R: BufRead>(source: R, name: &str) -> Result<EmbeddingTable> {
    let mut lines = source.lines().enumerate();
    let (n, d) = loop {
        match lines.next() {
            None => return Err(Error::parse(1, "missing header")),
            Some((i, line)) => {
                let line = line.map_err(|e| io_or_utf8(e, i + 1))?;
                break parse_header(&line, i + 1)?;
            }
        }
    };
    let mut vocab: Vec<String> = Vec::with_capacity(n.min(1 << 20));
    let mut seen: HashMap<String, usize> = HashMap::with_capacity(n.min(1 << 20));
    let mut data = Vec::with_capacity(n.saturating_mul(d).min(1 << 24));
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| io_or_utf8(e, lineno))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        if vocab.len() == n {
            return Err(Error::parse(
                lineno,
                format!("header declares {n} words but more data lines follow"),
            ));
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let word = fields.next().expect("non-blank line has a field");
        if seen.insert(word.to_owned(), lineno).is_some() {
            return Err(Error::DuplicateWord(word.to_owned()));
        }
        let start = data.len();
        for (pos, f) in fields.enumerate() {
            if pos >= d {
                return Err(Error::parse(
                    lineno,
                    format!("{word:?} has more than {d} components"),
                ));
            }
            let v: f64 = f.parse().map_err(|_| {
                Error::parse(
                    lineno,
                    format!("non-numeric component {f:?} at position {pos} of {word:?}"),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    lineno,
                    format!("non-finite component at position {pos} of {word:?}"),
                ));
            }
            data.push(v);
        }
        if data.len() - start != d {
            return Err(Error::parse(
                lineno,
                format!("{word:?} has {} components, expected {d}", data.len() - start),
            ));
        }
        vocab.push(word.to_owned());
    }
    if vocab.len() != n {
        return Err(Error::Parse {
            line: None,
            message: format!("header declares {n} words but {} were read", vocab.len()),
        });
    }
    checked_table(name, vocab, Matrix::from_vec(n, d, data))
}

fn io_or_utf8(e: std::io::Error, line: usize) -> Error {
    match e.kind() {
        std::io::ErrorKind::InvalidData => Error::parse(line, "invalid UTF-8"),
        _ => Error::Io(e),
    }
}

/// Writes the text format. Components use the shortest decimal that
/// round-trips to the same `f64`.
pub fn write_w2v_text<W: Write>(table: &EmbeddingTable, mut out: W) -> Result<()> {
    writeln!(out, "{} {}", table.len(), table.dim())?;
    for (w, v) in table.iter() {
        out.write_all(w.as_bytes())?;
        for x in v {
            write!(out, " {x}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Byte reader that tracks its offset for diagnostics.
struct CountingReader<R> {
    inner: R,
    offset: u64,
}

impl<R: BufRead> CountingReader<R> {
    fn peek(&mut self) -> Result<Option<u8>> {
        Ok(self.inner.fill_buf()?.first().copied())
    }

    fn bump(&mut self) {
        self.inner.consume(1);
        self.offset += 1;
    }

    fn read_until(&mut self, delim: u8, buf: &mut Vec<u8>) -> Result<bool> {
        let n = self.inner.read_until(delim, buf)?;
        self.offset += n as u64;
        if buf.last() == Some(&delim) {
            buf.pop();
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn read_exact_or_truncated(&mut self, buf: &mut [u8]) -> Result<()> {
        let mut got = 0;
        while got < buf.len() {
            let n = self.inner.read(&mut buf[got..])?;
            if n == 0 {
                return Err(Error::Truncated {
                    offset: self.offset,
                    expected: buf.len(),
                    available: got,
                });
            }
            got += n;
        }
        self.offset += got as u64;
        Ok(())
    }
}

pub fn read_w2v_binary<R: BufRead>(source: R, name: &str) -> Result<EmbeddingTable> {
    let mut r = CountingReader {
        inner: source,
        offset: 0,
    };
    let mut header = Vec::new();
    if !r.read_until(b'\n', &mut header)? {
        return Err(Error::parse(1, "missing header line"));
    }
    let header =
        std::str::from_utf8(&header).map_err(|_| Error::parse(1, "header is not ASCII"))?;
    let (n, d) = parse_header(header.trim_end_matches('\r'), 1)?;

    let mut vocab = Vec::with_capacity(n.min(1 << 20));
    let mut seen = HashMap::with_capacity(n.min(1 << 20));
    let mut data = Vec::with_capacity(n.saturating_mul(d).min(1 << 24));
    let mut raw = vec![0u8; d * 4];
    let mut word = Vec::new();
    for _ in 0..n {
        // Records may or may not be separated by a newline.
        while r.peek()? == Some(b'\n') {
            r.bump();
        }
        let word_offset = r.offset;
        word.clear();
        if !r.read_until(b' ', &mut word)? {
            return Err(Error::Truncated {
                offset: word_offset,
                expected: word.len() + 1,
                available: word.len(),
            });
        }
        let w = std::str::from_utf8(&word)
            .map_err(|_| Error::InvalidUtf8 {
                offset: word_offset,
            })?
            .to_owned();
        if w.is_empty() || w.chars().any(char::is_whitespace) {
            return Err(Error::Parse {
                line: None,
                message: format!("invalid word {w:?} at byte offset {word_offset}"),
            });
        }
        r.read_exact_or_truncated(&mut raw)?;
        for (pos, chunk) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: None,
                    message: format!("non-finite component at position {pos} of {w:?}"),
                });
            }
            data.push(v as f64);
        }
        if seen.insert(w.clone(), ()).is_some() {
            return Err(Error::DuplicateWord(w));
        }
        vocab.push(w);
    }
    checked_table(name, vocab, Matrix::from_vec(n, d, data))
}

/// Writes the binary format: little-endian `f32` components, a space after
/// each word and a newline after each record.
pub fn write_w2v_binary<W: Write>(table: &EmbeddingTable, mut out: W) -> Result<()> {
    writeln!(out, "{} {}", table.len(), table.dim())?;
    for (w, v) in table.iter() {
        out.write_all(w.as_bytes())?;
        out.write_all(b" ")?;
        for &x in v {
            out.write_f32::<LittleEndian>(x as f32)?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Result of [`restrict`]: the sub-table and requested words it lacks.
#[derive(Clone, Debug)]
pub struct Restricted {
    pub table: EmbeddingTable,
    pub missing: BTreeSet<String>,
}

/// Keeps only words in `vocab`, preserving the table's row order.
pub fn restrict(table: &EmbeddingTable, vocab: &BTreeSet<String>) -> Result<Restricted> {
    let kept: Vec<(String, Vec<f64>)> = table
        .iter()
        .filter(|(w, _)| vocab.contains(*w))
        .map(|(w, v)| (w.to_owned(), v.to_vec()))
        .collect();
    if kept.is_empty() {
        return Err(Error::Empty(format!(
            "no overlap between {:?} and the requested vocabulary",
            table.name()
        )));
    }
    let missing = vocab
        .iter()
        .filter(|w| !table.contains(w))
        .cloned()
        .collect();
    let dim = table.dim();
    let n = kept.len();
    let mut words = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * dim);
    for (w, v) in kept {
        words.push(w);
        data.extend(v);
    }
    Ok(Restricted {
        table: EmbeddingTable::new(table.name(), words, Matrix::from_vec(n, dim, data))?,
        missing,
    })
}

/// Cosine similarity `u·v / (‖u‖‖v‖)`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::arg(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Domain("cosine of a zero-norm vector".into()));
    }
    Ok(dot(u, v) / (nu * nv))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub word: String,
    pub similarity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    pub query: String,
    pub neighbors: Vec<Neighbor>,
}

impl NeighborList {
    pub fn words(&self) -> Vec<&str> {
        self.neighbors.iter().map(|n| n.word.as_str()).collect()
    }
}

/// Exact `k` nearest neighbours of `query` by cosine, query excluded.
///
/// Equal scores are ordered lexicographically by word. Zero vectors in the
/// table have no defined cosine and are skipped.
pub fn top_k(table: &EmbeddingTable, query: &str, k: usize) -> Result<NeighborList> {
    if k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    let qi = table
        .index_of(query)
        .ok_or_else(|| Error::NotFound(query.to_owned()))?;
    let q = table.vectors.row(qi);
    let qn = dot(q, q).sqrt();
    if qn == 0.0 {
        return Err(Error::Domain(format!("query {query:?} has a zero vector")));
    }
    let mut scored: Vec<(f64, &str)> = Vec::with_capacity(table.len());
    for (i, (w, v)) in table.iter().enumerate() {
        if i == qi {
            continue;
        }
        let vn = dot(v, v).sqrt();
        if vn == 0.0 {
            continue;
        }
        scored.push((dot(q, v) / (qn * vn), w));
    }
    let order = |a: &(f64, &str), b: &(f64, &str)| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.1.cmp(b.1))
    };
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_by(order);
    Ok(NeighborList {
        query: query.to_owned(),
        neighbors: scored
            .into_iter()
            .map(|(s, w)| Neighbor {
                word: w.to_owned(),
                similarity: s,
            })
            .collect(),
    })
}
