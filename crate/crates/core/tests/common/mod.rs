//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use embeval::corpus::{AnnotatedCorpus, Sentence, Token};
use embeval::embed_store::EmbeddingTable;
use embeval::matrix::Matrix;
use embeval::tagger::{EncodedSentence, Mode, TaggerConfig, TaggerModel, TaggerParameters, PARAMETER_GROUPS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

// ---------------------------------------------------------------- CRF

/// Every tag sequence of `len` over `tags` labels, in lexicographic order.
pub fn all_paths(len: usize, tags: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..tags).map(move |t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    out
}

/// Direct path score; start state is `T`, stop state is `T + 1`.
pub fn oracle_score(e: &Matrix, tr: &Matrix, path: &[usize]) -> f64 {
    let t = e.cols();
    let mut s = 0.0;
    let mut prev = t;
    for (i, &y) in path.iter().enumerate() {
        s += tr.get(prev, y) + e.get(i, y);
        prev = y;
    }
    s + tr.get(prev, t + 1)
}

pub fn oracle_log_partition(e: &Matrix, tr: &Matrix) -> f64 {
    let scores: Vec<f64> = all_paths(e.rows(), e.cols())
        .iter()
        .map(|p| oracle_score(e, tr, p))
        .collect();
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
}

/// First maximum in lexicographic order.
pub fn oracle_argmax(e: &Matrix, tr: &Matrix) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for p in all_paths(e.rows(), e.cols()) {
        let s = oracle_score(e, tr, &p);
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, p));
        }
    }
    best.unwrap().1
}

// ---------------------------------------------------------------- gradients

/// `‖a − n‖ / max(‖a‖, ‖n‖, 1e-8)`
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(analytic).max(norm(numeric)).max(1e-8)
}

/// Central differences of `f` with respect to every entry of `x`.
pub fn numeric_gradient(x: &mut [f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + eps;
            let up = f(x);
            x[i] = orig - eps;
            let down = f(x);
            x[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// A small tagger with every parameter randomized, plus a matching
/// embedding table and a labelled sentence with OOV words and characters.
pub struct GradInstance {
    pub model: TaggerModel,
    pub embeddings: EmbeddingTable,
    pub sentence: EncodedSentence,
}

pub fn small_config(seed: u64) -> TaggerConfig {
    TaggerConfig {
        char_embedding_dim: 3,
        char_hidden: 2,
        token_hidden: 3,
        char_dropout: 0.0,
        token_dropout: 0.0,
        seed,
        ..TaggerConfig::default()
    }
}

pub fn grad_instance(seed: u64, config: TaggerConfig, max_len: usize) -> GradInstance {
    let mut r = rng(seed);
    let tags: Vec<String> = ["B-X", "I-X", "O"].iter().map(|s| s.to_string()).collect();
    let alphabet = vec!['a', 'b', 'c', 'd'];
    let word_dim = 4;
    let vocab = ["ab", "cab", "d", "bad"];
    let embeddings = EmbeddingTable::from_rows(
        "grad",
        vocab
            .iter()
            .map(|w| (w.to_string(), (0..word_dim).map(|_| r.random_range(-1.0..1.0)).collect::<Vec<f64>>())),
    )
    .unwrap();
    let mut model = TaggerModel::new(config, tags, alphabet, word_dim).unwrap();
    for m in model.params.matrices_mut() {
        for v in m.as_mut_slice() {
            *v = r.random_range(-0.6..0.6);
        }
    }
    // Surface forms include OOV words ("zz", "abz") and an unknown char.
    let pool = ["ab", "cab", "d", "bad", "zz", "abz", "c"];
    let len = r.random_range(1..=max_len);
    let tokens: Vec<Token> = (0..len)
        .map(|_| {
            let w = pool[r.random_range(0..pool.len())];
            let t = ["B-X", "I-X", "O"][r.random_range(0..3)];
            Token::new(w, t).unwrap()
        })
        .collect();
    let sentence = Sentence::new(tokens).unwrap();
    let encoded = model.encode(&sentence, &embeddings, true).unwrap();
    GradInstance {
        model,
        embeddings,
        sentence: encoded,
    }
}

/// Worst per-group relative error between the analytic gradient and central
/// differences of the sentence loss.
pub fn tagger_gradient_errors(inst: &mut GradInstance, mode: Mode, eps: f64) -> Vec<(&'static str, f64)> {
    let mut grads = inst.model.params.zeros_like();
    inst.model
        .loss_and_gradient(&inst.sentence, &inst.embeddings, mode, &mut grads);
    let analytic: Vec<Vec<f64>> = grads.matrices().iter().map(|m| m.as_slice().to_vec()).collect();
    let mut out = Vec::new();
    for (g, name) in PARAMETER_GROUPS.iter().enumerate() {
        let n = analytic[g].len();
        let mut numeric = vec![0.0; n];
        for i in 0..n {
            let orig = param(&inst.model.params, g, i);
            set_param(&mut inst.model.params, g, i, orig + eps);
            let up = inst.model.loss(&inst.sentence, &inst.embeddings, mode);
            set_param(&mut inst.model.params, g, i, orig - eps);
            let down = inst.model.loss(&inst.sentence, &inst.embeddings, mode);
            set_param(&mut inst.model.params, g, i, orig);
            numeric[i] = (up - down) / (2.0 * eps);
        }
        out.push((*name, relative_error(&analytic[g], &numeric)));
    }
    out
}

fn param(p: &TaggerParameters, g: usize, i: usize) -> f64 {
    p.matrices()[g].as_slice()[i]
}

fn set_param(p: &mut TaggerParameters, g: usize, i: usize, v: f64) {
    p.matrices_mut()[g].as_mut_slice()[i] = v;
}

// ---------------------------------------------------------------- linear algebra

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

/// Singular values of `rows` (optionally column-centered), descending.
pub fn oracle_singular_values(rows: &[Vec<f64>], center: bool) -> Vec<f64> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| if center { rows.iter().map(|r| r[j]).sum::<f64>() / n as f64 } else { 0.0 })
        .collect();
    let gram: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            (0..d)
                .map(|b| rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum())
                .collect()
        })
        .collect();
    jacobi_eigenvalues(&gram)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect()
}

/// Random orthogonal matrix by Gram–Schmidt on Gaussian-ish columns.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for u in &q {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            q.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    q
}

pub fn naive_cosine(u: &[f64], v: &[f64]) -> f64 {
    let mut uv = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for i in 0..u.len() {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    uv / (uu.sqrt() * vv.sqrt())
}

/// Textbook single-formula Pearson correlation.
pub fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Pearson correlation of the upper-triangle cosine similarities of two
/// tables over their sorted shared vocabulary.
pub fn oracle_rsa(a: &EmbeddingTable, b: &EmbeddingTable) -> f64 {
    let mut shared: Vec<&str> = a.vocab().iter().map(String::as_str).filter(|w| b.contains(w)).collect();
    shared.sort();
    let sims = |t: &EmbeddingTable| {
        let mut out = Vec::new();
        for i in 0..shared.len() {
            for j in i + 1..shared.len() {
                out.push(naive_cosine(t.get(shared[i]).unwrap(), t.get(shared[j]).unwrap()));
            }
        }
        out
    };
    naive_pearson(&sims(a), &sims(b))
}

pub fn table_from(name: &str, rows: &[Vec<f64>]) -> EmbeddingTable {
    EmbeddingTable::from_rows(
        name,
        rows.iter().enumerate().map(|(i, r)| (format!("w{i:03}"), r.clone())),
    )
    .unwrap()
}

pub fn corpus_from(name: &str, sentences: &[Vec<(&str, &str)>]) -> AnnotatedCorpus {
    AnnotatedCorpus::new(
        name,
        sentences
            .iter()
            .map(|s| Sentence::new(s.iter().map(|(w, t)| Token::new(*w, *t).unwrap()).collect()).unwrap())
            .collect(),
    )
    .unwrap()
}
