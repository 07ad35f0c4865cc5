//! Projects three clusters of 20-dimensional vectors to 2-D with t-SNE and
//! writes the coordinates and an SVG scatter plot.
//!
//! `cargo run --release --example tsne_projection -- [out_dir]`

use std::path::PathBuf;

use embeval::embed_store::EmbeddingTable;
use embeval::intrinsic::{scatter_svg, tsne_with, TsneConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> embeval::Result<()> {
    let out_dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "tsne-example".into()));
    std::fs::create_dir_all(&out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let groups = ["drug", "solvent", "metal"];
    let mut rows = Vec::new();
    for (g, name) in groups.iter().enumerate() {
        for i in 0..15 {
            let v: Vec<f64> = (0..20)
                .map(|k| if k % 3 == g { 2.0 } else { 0.0 } + noise.sample(&mut rng))
                .collect();
            rows.push((format!("{name}{i}"), v));
        }
    }
    let table = EmbeddingTable::from_rows("clusters", rows)?;
    let config = TsneConfig {
        perplexity: 10.0,
        ..TsneConfig::default()
    };
    let p = tsne_with(&table, &config)?;
    println!(
        "{} points, KL after exaggeration {:.4}, final KL {:.4}",
        p.words.len(),
        p.kl_after_exaggeration.unwrap_or(f64::NAN),
        p.final_kl
    );
    std::fs::write(out_dir.join("clusters.tsv"), p.to_tsv())?;
    std::fs::write(out_dir.join("clusters.svg"), scatter_svg(&p, "three clusters"))?;
    println!("wrote {}", out_dir.join("clusters.svg").display());
    Ok(())
}
