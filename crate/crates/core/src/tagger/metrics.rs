//! Exact-match span precision, recall and F1.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedCorpus, BioTag};
use crate::error::{Error, Result};

/// An entity mention covering tokens `start..end` of one sentence.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub entity_type: String,
}

/// Decodes BIO tags into spans. An `I-X` that does not continue an `X` span
/// opens a new one; unparseable tags act as `O`.
pub fn extract_spans<S: AsRef<str>>(sentence: usize, tags: &[S]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, String)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let bio = BioTag::parse(tag.as_ref()).unwrap_or(BioTag::Outside);
        let continues = matches!((&bio, &open), (BioTag::Inside(t), Some((_, o))) if t == o);
        if continues {
            continue;
        }
        if let Some((start, ty)) = open.take() {
            spans.push(Span { sentence, start, end: i, entity_type: ty });
        }
        if let Some(t) = bio.entity_type() {
            open = Some((i, t.to_owned()));
        }
    }
    if let Some((start, ty)) = open {
        spans.push(Span { sentence, start, end: tags.len(), entity_type: ty });
    }
    spans
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub micro: Prf,
    pub per_type: BTreeMap<String, Prf>,
}

pub fn evaluate_f1<S: AsRef<str>>(gold: &AnnotatedCorpus, predicted: &[Vec<S>]) -> Result<F1Report> {
    if gold.len() != predicted.len() {
        return Err(Error::arg(format!(
            "{} gold sentences but {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    let mut gold_spans = BTreeSet::new();
    let mut pred_spans = BTreeSet::new();
    for (i, (g, p)) in gold.sentences().iter().zip(predicted).enumerate() {
        if g.len() != p.len() {
            return Err(Error::arg(format!(
                "sentence {i}: {} gold tokens but {} predicted tags",
                g.len(),
                p.len()
            )));
        }
        let gt: Vec<&str> = g.tags().collect();
        gold_spans.extend(extract_spans(i, &gt));
        pred_spans.extend(extract_spans(i, p));
    }
    let types: BTreeSet<&str> = gold_spans
        .iter()
        .chain(&pred_spans)
        .map(|s| s.entity_type.as_str())
        .collect();
    let count = |ty: Option<&str>| {
        let keep = |s: &&Span| ty.is_none_or(|t| s.entity_type == t);
        let tp = pred_spans.iter().filter(keep).filter(|s| gold_spans.contains(*s)).count();
        let np = pred_spans.iter().filter(keep).count();
        let ng = gold_spans.iter().filter(keep).count();
        Prf::from_counts(tp, np - tp, ng - tp)
    };
    Ok(F1Report {
        micro: count(None),
        per_type: types.into_iter().map(|t| (t.to_owned(), count(Some(t)))).collect(),
    })
}
