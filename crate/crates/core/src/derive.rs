//! Type-level tables from per-occurrence vectors, and dimensionality
//! standardization by truncated SVD.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embed_store::EmbeddingTable;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Neumaier-compensated running sum of a vector.
#[derive(Clone, Debug)]
struct CompensatedSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
    count: usize,
}

impl CompensatedSum {
    fn new(dim: usize) -> Self {
        CompensatedSum {
            sum: vec![0.0; dim],
            comp: vec![0.0; dim],
            count: 0,
        }
    }

    fn add(&mut self, v: &[f64]) {
        for ((s, c), &x) in self.sum.iter_mut().zip(&mut self.comp).zip(v) {
            let t = *s + x;
            if s.abs() >= x.abs() {
                *c += (*s - t) + x;
            } else {
                *c += (x - t) + *s;
            }
            *s = t;
        }
        self.count += 1;
    }

    fn mean(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.sum
            .iter()
            .zip(&self.comp)
            .map(|(s, c)| (s + c) / n)
            .collect()
    }
}

/// Streaming fold of `(word, vector)` occurrences into per-type means.
///
/// Words are lowercased before filtering and grouping.
#[derive(Debug)]
pub struct OccurrenceAccumulator {
    filter: Option<BTreeSet<String>>,
    dim: Option<usize>,
    sums: BTreeMap<String, CompensatedSum>,
    seen: usize,
}

impl OccurrenceAccumulator {
    /// `filter` holds lowercased words; `None` keeps everything.
    pub fn new(filter: Option<BTreeSet<String>>) -> Self {
        OccurrenceAccumulator {
            filter,
            dim: None,
            sums: BTreeMap::new(),
            seen: 0,
        }
    }

    pub fn push(&mut self, word: &str, vector: &[f64]) -> Result<()> {
        self.seen += 1;
        match self.dim {
            None => {
                if vector.is_empty() {
                    return Err(Error::arg("occurrence vector is empty"));
                }
                self.dim = Some(vector.len());
            }
            Some(d) if d != vector.len() => {
                return Err(Error::arg(format!(
                    "occurrence of {word:?} has dimension {}, expected {d}",
                    vector.len()
                )))
            }
            _ => {}
        }
        if let Some(v) = vector.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite component {v} in occurrence of {word:?}"
            )));
        }
        let key = word.to_lowercase();
        if let Some(f) = &self.filter {
            if !f.contains(&key) {
                return Ok(());
            }
        }
        let dim = vector.len();
        self.sums
            .entry(key)
            .or_insert_with(|| CompensatedSum::new(dim))
            .add(vector);
        Ok(())
    }

    pub fn finish(self, name: &str) -> Result<AveragedTable> {
        if self.sums.is_empty() {
            return Err(Error::Empty(format!(
                "no occurrences left after filtering ({} read)",
                self.seen
            )));
        }
        let counts = self.sums.iter().map(|(w, s)| (w.clone(), s.count)).collect();
        let table = EmbeddingTable::from_rows(name, self.sums.iter().map(|(w, s)| (w.clone(), s.mean())))?;
        Ok(AveragedTable { table, counts })
    }
}

/// Averaged table plus the number of occurrences behind each word.
#[derive(Clone, Debug)]
pub struct AveragedTable {
    pub table: EmbeddingTable,
    pub counts: BTreeMap<String, usize>,
}

/// Reads `word<TAB>v1<TAB>…<TAB>vd` records and averages them per word type.
/// The output vocabulary is sorted.
pub fn average_occurrences<R: BufRead>(
    source: R,
    vocab_filter: Option<&BTreeSet<String>>,
    name: &str,
) -> Result<AveragedTable> {
    let filter = vocab_filter.map(|f| f.iter().map(|w| w.to_lowercase()).collect());
    let mut acc = OccurrenceAccumulator::new(filter);
    let mut buf = Vec::new();
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
        let mut fields = line.split('\t');
        let word = fields.next().unwrap_or_default();
        if word.is_empty() || word.chars().any(char::is_whitespace) {
            return Err(Error::parse(lineno, format!("invalid word {word:?}")));
        }
        buf.clear();
        for (pos, f) in fields.enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| {
                Error::parse(
                    lineno,
                    format!("non-numeric component {f:?} at position {pos} of {word:?}"),
                )
            })?;
            buf.push(v);
        }
        acc.push(word, &buf).map_err(|e| match e {
            Error::Argument(m) | Error::Domain(m) => Error::parse(lineno, m),
            e => e,
        })?;
    }
    acc.finish(name)
}

/// A fitted truncated-SVD projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvdReduction {
    /// Subtracted before projecting; all zeros when fitted without centering.
    pub mean: Vec<f64>,
    /// `d × r`, orthonormal columns.
    pub components: Matrix,
    /// Non-increasing, length `r`.
    pub singular_values: Vec<f64>,
}

impl SvdReduction {
    pub fn input_dim(&self) -> usize {
        self.components.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.components.cols()
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim() {
            return Err(Error::arg(format!(
                "vector has dimension {}, reduction expects {}",
                v.len(),
                self.input_dim()
            )));
        }
        let centered: Vec<f64> = v.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        let mut out = vec![0.0; self.output_dim()];
        self.components.matvec_t_acc(&centered, &mut out);
        Ok(out)
    }

    /// Maps a reduced vector back to the input space.
    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        self.components.matvec_acc(z, &mut out);
        out
    }

    /// `‖X_c − X_c V Vᵀ‖_F` over the rows of `table`.
    pub fn reconstruction_error(&self, table: &EmbeddingTable) -> Result<f64> {
        let mut sq = 0.0;
        for (_, v) in table.iter() {
            let back = self.reconstruct(&self.project(v)?);
            sq += v.iter().zip(&back).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(sq.sqrt())
    }
}

/// Fits a rank-`target_dim` reduction to the (optionally mean-centered) rows
/// of `table`. Components are the top right singular vectors, sign-fixed so
/// that each column's largest-magnitude entry is positive.
pub fn fit_svd(table: &EmbeddingTable, target_dim: usize, center: bool) -> Result<SvdReduction> {
    let n = table.len();
    let d = table.dim();
    if n < 2 {
        return Err(Error::arg("SVD needs at least 2 words"));
    }
    if target_dim == 0 || target_dim > n.min(d) {
        return Err(Error::arg(format!(
            "target dimension {target_dim} must be in 1..={}",
            n.min(d)
        )));
    }
    let mut mean = vec![0.0; d];
    if center {
        for (_, v) in table.iter() {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
    }
    let x = DMatrix::from_fn(n, d, |i, j| table.vectors().get(i, j) - mean[j]);
    let svd = x.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut components = Matrix::zeros(d, target_dim);
    let mut singular_values = Vec::with_capacity(target_dim);
    for (c, &k) in order.iter().take(target_dim).enumerate() {
        let row = v_t.row(k);
        let pivot = (0..d)
            .max_by(|&a, &b| row[a].abs().partial_cmp(&row[b].abs()).unwrap())
            .unwrap_or(0);
        let sign = if row[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            components.set(j, c, sign * row[j]);
        }
        singular_values.push(svd.singular_values[k].max(0.0));
    }
    let top = singular_values[0];
    let tol = top * (n.max(d) as f64) * f64::EPSILON;
    let rank = singular_values.iter().filter(|&&s| s > tol).count();
    if rank < target_dim {
        warn!(
            "{:?}: data rank {rank} is below target dimension {target_dim}; trailing singular values are zero",
            table.name()
        );
    }
    Ok(SvdReduction {
        mean,
        components,
        singular_values,
    })
}

/// Projects every vector of `table` through `red`.
pub fn apply_svd(red: &SvdReduction, table: &EmbeddingTable) -> Result<EmbeddingTable> {
    if table.dim() != red.input_dim() {
        return Err(Error::arg(format!(
            "table {:?} has dimension {}, reduction expects {}",
            table.name(),
            table.dim(),
            red.input_dim()
        )));
    }
    table.map_vectors(|v| red.project(v).expect("dimension checked"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn two_point_mean() {
        let a = average_occurrences(Cursor::new("x\t1\t0\nX\t0\t1\n"), None, "occ").unwrap();
        assert_eq!(a.table.get("x").unwrap(), &[0.5, 0.5]);
        assert_eq!(a.counts["x"], 2);
    }

    #[test]
    fn single_occurrence_is_identity() {
        let a = average_occurrences(Cursor::new("y\t0.25\t-3\n"), None, "occ").unwrap();
        assert_eq!(a.table.get("y").unwrap(), &[0.25, -3.0]);
    }

    #[test]
    fn filter_and_errors() {
        let f: BTreeSet<String> = ["keep".to_string()].into();
        let a = average_occurrences(Cursor::new("Keep\t1\ndrop\t2\n"), Some(&f), "o").unwrap();
        assert_eq!(a.table.vocab(), ["keep"]);

        let none: BTreeSet<String> = ["zzz".to_string()].into();
        assert!(matches!(
            average_occurrences(Cursor::new("a\t1\n"), Some(&none), "o"),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            average_occurrences(Cursor::new("a\t1\t2\nb\t1\n"), None, "o"),
            Err(Error::Parse { line: Some(2), .. })
        ));
        assert!(matches!(
            average_occurrences(Cursor::new("a\tx\n"), None, "o"),
            Err(Error::Parse { line: Some(1), .. })
        ));
    }

    #[test]
    fn mean_vector_maps_to_zero() {
        let t = EmbeddingTable::from_rows(
            "t",
            vec![
                ("a", vec![1.0, 2.0, 0.0]),
                ("b", vec![3.0, 0.0, 1.0]),
                ("c", vec![-1.0, 1.0, 2.0]),
            ],
        )
        .unwrap();
        let red = fit_svd(&t, 2, true).unwrap();
        let z = red.project(&red.mean).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
        assert!(red.singular_values[0] >= red.singular_values[1]);
    }

    #[test]
    fn argument_checks() {
        let t = EmbeddingTable::from_rows("t", vec![("a", vec![1.0, 2.0]), ("b", vec![0.0, 1.0])])
            .unwrap();
        assert!(fit_svd(&t, 3, true).is_err());
        assert!(fit_svd(&t, 0, true).is_err());
        let one = EmbeddingTable::from_rows("t", vec![("a", vec![1.0, 2.0])]).unwrap();
        assert!(fit_svd(&one, 1, true).is_err());
        let red = fit_svd(&t, 1, true).unwrap();
        let wide = EmbeddingTable::from_rows("w", vec![("a", vec![1.0, 2.0, 3.0])]).unwrap();
        assert!(apply_svd(&red, &wide).is_err());
    }

    #[test]
    fn rank_deficiency_keeps_zero_tail() {
        // Two points: centered rank is 1.
        let t = EmbeddingTable::from_rows("t", vec![("a", vec![1.0, 2.0]), ("b", vec![3.0, 5.0])])
            .unwrap();
        let red = fit_svd(&t, 2, true).unwrap();
        assert!(red.singular_values[1].abs() < 1e-12);
    }
}
