//! Linear-chain CRF over emission scores.
//!
//! `transitions` is `(T + 2) × (T + 2)` for `T` tags; index `T` is the start
//! state and `T + 1` the stop state. A path `y` scores
//! `trans[start, y₀] + Σ emit[t, yₜ] + Σ trans[yₜ₋₁, yₜ] + trans[yₙ₋₁, stop]`.

use crate::matrix::Matrix;

#[inline]
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn check_shapes(emissions: &Matrix, transitions: &Matrix) -> (usize, usize) {
    let t = emissions.cols();
    assert_eq!(
        transitions.shape(),
        (t + 2, t + 2),
        "transition matrix must be (tags + 2)²"
    );
    (emissions.rows(), t)
}

/// Unnormalized log score of one tag path.
pub fn path_score(emissions: &Matrix, tags: &[usize], transitions: &Matrix) -> f64 {
    let (len, t) = check_shapes(emissions, transitions);
    assert_eq!(tags.len(), len, "tag sequence length must match emissions");
    let (start, stop) = (t, t + 1);
    let mut s = transitions.get(start, tags[0]) + transitions.get(tags[len - 1], stop);
    for (i, &y) in tags.iter().enumerate() {
        s += emissions.get(i, y);
        if i > 0 {
            s += transitions.get(tags[i - 1], y);
        }
    }
    s
}

/// Forward log-messages `α[t][j]` (not including the stop transition).
fn forward_messages(emissions: &Matrix, transitions: &Matrix) -> Vec<Vec<f64>> {
    let (len, t) = check_shapes(emissions, transitions);
    let mut alpha = Vec::with_capacity(len);
    alpha.push((0..t).map(|j| transitions.get(t, j) + emissions.get(0, j)).collect::<Vec<_>>());
    let mut buf = vec![0.0; t];
    for i in 1..len {
        let prev: &Vec<f64> = &alpha[i - 1];
        let row = (0..t)
            .map(|j| {
                for (k, b) in buf.iter_mut().enumerate() {
                    *b = prev[k] + transitions.get(k, j);
                }
                emissions.get(i, j) + log_sum_exp(&buf)
            })
            .collect();
        alpha.push(row);
    }
    alpha
}

fn backward_messages(emissions: &Matrix, transitions: &Matrix) -> Vec<Vec<f64>> {
    let (len, t) = check_shapes(emissions, transitions);
    let stop = t + 1;
    let mut beta = vec![vec![0.0; t]; len];
    beta[len - 1] = (0..t).map(|k| transitions.get(k, stop)).collect();
    let mut buf = vec![0.0; t];
    for i in (0..len - 1).rev() {
        for k in 0..t {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = transitions.get(k, j) + emissions.get(i + 1, j) + beta[i + 1][j];
            }
            beta[i][k] = log_sum_exp(&buf);
        }
    }
    beta
}

/// `log Σ_y exp(score(y))` by the forward algorithm.
pub fn log_partition(emissions: &Matrix, transitions: &Matrix) -> f64 {
    let (len, t) = check_shapes(emissions, transitions);
    assert!(len >= 1, "empty sequence");
    let alpha = forward_messages(emissions, transitions);
    let last: Vec<f64> = (0..t)
        .map(|j| alpha[len - 1][j] + transitions.get(j, t + 1))
        .collect();
    log_sum_exp(&last)
}

/// Negative log-likelihood `log Z − score(gold)`.
pub fn crf_log_likelihood(emissions: &Matrix, gold: &[usize], transitions: &Matrix) -> f64 {
    log_partition(emissions, transitions) - path_score(emissions, gold, transitions)
}

/// Negative log-likelihood with its gradients with respect to the emissions
/// and the transition matrix.
pub fn crf_nll_and_grad(
    emissions: &Matrix,
    gold: &[usize],
    transitions: &Matrix,
) -> (f64, Matrix, Matrix) {
    let (len, t) = check_shapes(emissions, transitions);
    let (start, stop) = (t, t + 1);
    let alpha = forward_messages(emissions, transitions);
    let beta = backward_messages(emissions, transitions);
    let last: Vec<f64> = (0..t).map(|j| alpha[len - 1][j] + transitions.get(j, stop)).collect();
    let log_z = log_sum_exp(&last);
    let nll = log_z - path_score(emissions, gold, transitions);

    let mut d_emit = Matrix::zeros(len, t);
    let mut d_trans = Matrix::zeros(t + 2, t + 2);
    for i in 0..len {
        for j in 0..t {
            let m = (alpha[i][j] + beta[i][j] - log_z).exp();
            d_emit.set(i, j, m);
            if i == 0 {
                d_trans.add_at(start, j, m);
            }
            if i == len - 1 {
                d_trans.add_at(j, stop, m);
            }
        }
        if i + 1 < len {
            for k in 0..t {
                for j in 0..t {
                    let m = (alpha[i][k]
                        + transitions.get(k, j)
                        + emissions.get(i + 1, j)
                        + beta[i + 1][j]
                        - log_z)
                        .exp();
                    d_trans.add_at(k, j, m);
                }
            }
        }
    }
    for (i, &y) in gold.iter().enumerate() {
        d_emit.add_at(i, y, -1.0);
        if i > 0 {
            d_trans.add_at(gold[i - 1], y, -1.0);
        }
    }
    d_trans.add_at(start, gold[0], -1.0);
    d_trans.add_at(gold[len - 1], stop, -1.0);
    (nll, d_emit, d_trans)
}

/// Highest-scoring path. Ties prefer the lower tag index.
pub fn viterbi_decode(emissions: &Matrix, transitions: &Matrix) -> Vec<usize> {
    let (len, t) = check_shapes(emissions, transitions);
    assert!(len >= 1, "empty sequence");
    let (start, stop) = (t, t + 1);
    let mut score: Vec<f64> = (0..t).map(|j| transitions.get(start, j) + emissions.get(0, j)).collect();
    let mut back = vec![vec![0usize; t]; len];
    for i in 1..len {
        let mut next = vec![0.0; t];
        for j in 0..t {
            let mut best = 0;
            let mut best_v = score[0] + transitions.get(0, j);
            for k in 1..t {
                let v = score[k] + transitions.get(k, j);
                if v > best_v {
                    best_v = v;
                    best = k;
                }
            }
            next[j] = best_v + emissions.get(i, j);
            back[i][j] = best;
        }
        score = next;
    }
    let mut best = 0;
    let mut best_v = score[0] + transitions.get(0, stop);
    for j in 1..t {
        let v = score[j] + transitions.get(j, stop);
        if v > best_v {
            best_v = v;
            best = j;
        }
    }
    let mut path = vec![0; len];
    path[len - 1] = best;
    for i in (1..len).rev() {
        path[i - 1] = back[i][path[i]];
    }
    path
}

/// Independent per-token softmax cross-entropy and its emission gradient.
pub fn softmax_nll_and_grad(emissions: &Matrix, gold: &[usize]) -> (f64, Matrix) {
    let (len, t) = emissions.shape();
    let mut grad = Matrix::zeros(len, t);
    let mut nll = 0.0;
    for (i, &y) in gold.iter().enumerate() {
        let row = emissions.row(i);
        let lse = log_sum_exp(row);
        nll += lse - row[y];
        for j in 0..t {
            grad.set(i, j, (row[j] - lse).exp());
        }
        grad.add_at(i, y, -1.0);
    }
    (nll, grad)
}

/// Per-token argmax, lowest index on ties.
pub fn argmax_decode(emissions: &Matrix) -> Vec<usize> {
    (0..emissions.rows())
        .map(|i| {
            let row = emissions.row(i);
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
