//! Averages per-occurrence vectors into one vector per word, then reduces the
//! table with truncated SVD and reports how much is lost.
//!
//! `cargo run --example derive_occurrences`

use embeval::derive::{apply_svd, average_occurrences, fit_svd};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> embeval::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let words = ["ibuprofen", "naproxen", "aspirin", "ethanol", "methanol", "acetone", "benzene", "toluene"];
    let dim = 12;
    // Each word gets a latent vector; its occurrences are noisy copies.
    let mut occurrences = String::new();
    for w in words {
        let centre: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..rng.random_range(2..6) {
            let v: Vec<String> = centre.iter().map(|c| format!("{:.6}", c + rng.random_range(-0.1..0.1))).collect();
            occurrences.push_str(&format!("{w}\t{}\n", v.join("\t")));
        }
    }
    let averaged = average_occurrences(occurrences.as_bytes(), None, "averaged")?;
    for (w, n) in &averaged.counts {
        println!("{w:<10} {n} occurrences");
    }
    let table = averaged.table;
    for target in [1, 2, 4, 7] {
        let red = fit_svd(&table, target, true)?;
        let reduced = apply_svd(&red, &table)?;
        println!(
            "dim {:>2} -> {:>2}: reconstruction error {:.4}, leading singular value {:.4}",
            table.dim(),
            reduced.dim(),
            red.reconstruction_error(&table)?,
            red.singular_values[0]
        );
    }
    Ok(())
}
