//! Exact t-SNE projection to two dimensions.
//!
//! Input affinities are Gaussian conditionals whose precision is bisected per
//! point to match the requested perplexity, then symmetrized and normalized.
//! Output affinities use a Student-t kernel with one degree of freedom. The
//! optimizer is gradient descent with momentum and per-coordinate gains, with
//! early exaggeration of the input affinities during the first phase.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::embed_store::EmbeddingTable;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const ENTROPY_TOLERANCE: f64 = 1e-5;
pub const MAX_BISECTION_STEPS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub early_exaggeration: f64,
    /// Iterations run with exaggerated affinities and the initial momentum.
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 15.0,
            iterations: 1000,
            learning_rate: 100.0,
            seed: 0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub words: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    pub final_kl: f64,
    /// KL divergence right after the exaggeration phase, if it was reached.
    pub kl_after_exaggeration: Option<f64>,
    pub perplexity: f64,
}

impl Projection2D {
    /// `word<TAB>x<TAB>y` lines with a header.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("word\tx\ty\n");
        for (w, c) in self.words.iter().zip(&self.coords) {
            s.push_str(&format!("{w}\t{}\t{}\n", c[0], c[1]));
        }
        s
    }
}

/// Symmetric joint input affinities plus the per-point bisection results.
#[derive(Clone, Debug)]
pub struct InputAffinities {
    pub joint: Matrix,
    pub betas: Vec<f64>,
    /// Achieved perplexity `exp(H)` of each point's conditional distribution.
    pub perplexities: Vec<f64>,
}

fn squared_distances(data: &Matrix) -> Matrix {
    let n = data.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = data
                .row(i)
                .iter()
                .zip(data.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d.set(i, j, s);
            d.set(j, i, s);
        }
    }
    d
}

/// Fills `row` with the conditional distribution for precision `beta` and
/// returns its entropy in nats.
fn conditional_row(dist: &[f64], i: usize, beta: f64, dmin: f64, row: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for (j, (p, &d)) in row.iter_mut().zip(dist).enumerate() {
        *p = if j == i { 0.0 } else { (-beta * (d - dmin)).exp() };
        sum += *p;
    }
    let mut weighted = 0.0;
    for (j, (p, &d)) in row.iter_mut().zip(dist).enumerate() {
        *p /= sum;
        if j != i {
            weighted += *p * (d - dmin);
        }
    }
    sum.ln() + beta * weighted
}

/// Gaussian input affinities for the rows of `data`.
pub fn input_affinities(data: &Matrix, perplexity: f64) -> Result<InputAffinities> {
    let n = data.rows();
    if n < 2 {
        return Err(Error::arg("t-SNE needs at least 2 points"));
    }
    if !(perplexity > 1.0 && perplexity < n as f64) {
        return Err(Error::arg(format!(
            "perplexity {perplexity} must lie in (1, {n})"
        )));
    }
    let dist = squared_distances(data);
    let target = perplexity.ln();
    let mut cond = Matrix::zeros(n, n);
    let mut betas = vec![0.0; n];
    let mut perplexities = vec![0.0; n];
    for i in 0..n {
        let drow = dist.row(i);
        let others = drow.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &d)| d);
        let dmin = others.clone().fold(f64::INFINITY, f64::min);
        let mean = others.map(|d| d - dmin).sum::<f64>() / (n - 1) as f64;
        let mut beta = if mean > 0.0 { 1.0 / mean } else { 1.0 };
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut row = vec![0.0; n];
        let mut h = conditional_row(drow, i, beta, dmin, &mut row);
        for _ in 0..MAX_BISECTION_STEPS {
            if (h - target).abs() < ENTROPY_TOLERANCE {
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
            h = conditional_row(drow, i, beta, dmin, &mut row);
        }
        cond.row_mut(i).copy_from_slice(&row);
        betas[i] = beta;
        perplexities[i] = h.exp();
    }
    let mut joint = Matrix::zeros(n, n);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = (cond.get(i, j) + cond.get(j, i)) / (2.0 * n as f64);
            joint.set(i, j, v);
            total += v;
        }
    }
    joint.scale(1.0 / total);
    Ok(InputAffinities {
        joint,
        betas,
        perplexities,
    })
}

/// Student-t kernel values `1 / (1 + ‖y_i − y_j‖²)` (zero diagonal) and their sum.
fn output_kernel(y: &[[f64; 2]]) -> (Matrix, f64) {
    let n = y.len();
    let mut w = Matrix::zeros(n, n);
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            w.set(i, j, v);
            w.set(j, i, v);
            sum += 2.0 * v;
        }
    }
    (w, sum)
}

/// `KL(P ‖ Q)` for the layout `y`.
pub fn kl_divergence(p: &Matrix, y: &[[f64; 2]]) -> f64 {
    let (w, sum) = output_kernel(y);
    let n = y.len();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p.get(i, j);
            if i != j && pij > 0.0 {
                kl += pij * (pij / (w.get(i, j) / sum)).ln();
            }
        }
    }
    kl
}

/// Gradient of `KL(P ‖ Q)` with respect to each output coordinate.
pub fn kl_gradient(p: &Matrix, y: &[[f64; 2]]) -> Vec<[f64; 2]> {
    gradient_scaled(p, 1.0, y)
}

fn gradient_scaled(p: &Matrix, p_scale: f64, y: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let (w, sum) = output_kernel(y);
    let n = y.len();
    let mut grad = vec![[0.0; 2]; n];
    for i in 0..n {
        let mut g = [0.0; 2];
        for j in 0..n {
            if i == j {
                continue;
            }
            let wij = w.get(i, j);
            let m = (p_scale * p.get(i, j) - wij / sum) * wij;
            g[0] += m * (y[i][0] - y[j][0]);
            g[1] += m * (y[i][1] - y[j][1]);
        }
        grad[i] = [4.0 * g[0], 4.0 * g[1]];
    }
    grad
}

/// Checks `5 ≤ perplexity ≤ (n − 1) / 3` and `n ≥ 10`.
pub fn validate_perplexity(n: usize, perplexity: f64) -> Result<()> {
    if n < 10 {
        return Err(Error::arg(format!("t-SNE needs at least 10 words, got {n}")));
    }
    let max = (n as f64 - 1.0) / 3.0;
    if !(5.0..=max).contains(&perplexity) {
        return Err(Error::arg(format!(
            "perplexity {perplexity} outside [5, {max:.3}] for {n} words"
        )));
    }
    Ok(())
}

pub fn tsne(table: &EmbeddingTable, perplexity: f64, iterations: usize, seed: u64) -> Result<Projection2D> {
    tsne_with(
        table,
        &TsneConfig {
            perplexity,
            iterations,
            seed,
            ..TsneConfig::default()
        },
    )
}

pub fn tsne_with(table: &EmbeddingTable, config: &TsneConfig) -> Result<Projection2D> {
    let n = table.len();
    validate_perplexity(n, config.perplexity)?;
    if config.learning_rate <= 0.0 {
        return Err(Error::arg("learning rate must be positive"));
    }
    let p = input_affinities(table.vectors(), config.perplexity)?.joint;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_after_exaggeration = None;

    for iter in 0..config.iterations {
        let exaggerating = iter < config.exaggeration_iterations;
        let (scale, momentum) = if exaggerating {
            (config.early_exaggeration, config.initial_momentum)
        } else {
            (1.0, config.final_momentum)
        };
        let grad = gradient_scaled(&p, scale, &y);
        for i in 0..n {
            for c in 0..2 {
                let g = grad[i][c];
                gains[i][c] = if (g > 0.0) != (update[i][c] > 0.0) {
                    gains[i][c] + 0.2
                } else {
                    (gains[i][c] * 0.8).max(0.01)
                };
                update[i][c] = momentum * update[i][c] - config.learning_rate * gains[i][c] * g;
                y[i][c] += update[i][c];
            }
        }
        let mean = y.iter().fold([0.0; 2], |m, v| [m[0] + v[0], m[1] + v[1]]);
        for v in &mut y {
            v[0] -= mean[0] / n as f64;
            v[1] -= mean[1] / n as f64;
        }
        if iter + 1 == config.exaggeration_iterations {
            kl_after_exaggeration = Some(kl_divergence(&p, &y));
        }
    }
    let final_kl = kl_divergence(&p, &y);
    if y.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
        return Err(Error::Domain("t-SNE diverged to non-finite coordinates".into()));
    }
    Ok(Projection2D {
        words: table.vocab().to_vec(),
        coords: y,
        final_kl,
        kl_after_exaggeration,
        perplexity: config.perplexity,
    })
}
