//! Correlation of embeddings through their cosine-similarity structure: a
//! rotated copy correlates perfectly, a noisy copy less, an unrelated table
//! hardly at all.
//!
//! `cargo run --example correlation`

use embeval::embed_store::EmbeddingTable;
use embeval::intrinsic::correlation_matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn table(name: &str, rows: &[Vec<f64>]) -> embeval::Result<EmbeddingTable> {
    EmbeddingTable::from_rows(name, rows.iter().enumerate().map(|(i, r)| (format!("word{i:02}"), r.clone())))
}

fn main() -> embeval::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 30;
    let base: Vec<Vec<f64>> = (0..n).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    // Rotation in the plane of the first two axes, plus a per-word scale.
    let (c, s) = (0.6f64, 0.8f64);
    let rotated: Vec<Vec<f64>> = base
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut r = v.clone();
            r[0] = c * v[0] - s * v[1];
            r[1] = s * v[0] + c * v[1];
            r.iter().map(|x| x * (1.0 + i as f64)).collect()
        })
        .collect();
    let noisy: Vec<Vec<f64>> = base
        .iter()
        .map(|v| v.iter().map(|x| x + rng.random_range(-0.5..0.5)).collect())
        .collect();
    // A table of different dimension can still be compared.
    let unrelated: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let tables = [
        table("base", &base)?,
        table("rotated", &rotated)?,
        table("noisy", &noisy)?,
        table("unrelated", &unrelated)?,
    ];
    let refs: Vec<&EmbeddingTable> = tables.iter().collect();
    print!("{}", correlation_matrix(&refs)?.to_text());
    Ok(())
}
