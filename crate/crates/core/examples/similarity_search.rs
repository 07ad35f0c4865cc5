//! Loads a word2vec table and prints the nearest neighbours of a word.
//!
//! `cargo run --example similarity_search -- <table.txt|table.bin> [word] [k]`
//!
//! Without arguments a small built-in table is used.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use embeval::embed_store::{read_table, top_k, EmbeddingFormat, EmbeddingTable};

const BUILT_IN: &str = "6 3
ibuprofen 0.9 0.1 0.0
naproxen 0.8 0.2 0.1
aspirin 0.7 0.3 0.0
ethanol 0.1 0.9 0.2
methanol 0.0 0.8 0.3
benzene -0.2 0.1 0.9
";

fn main() -> embeval::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let table: EmbeddingTable = match args.first() {
        Some(path) => {
            let path = Path::new(path);
            let reader = BufReader::new(File::open(path)?);
            read_table(reader, EmbeddingFormat::from_path(path), "input")?
        }
        None => embeval::embed_store::read_w2v_text(BUILT_IN.as_bytes(), "built-in")?,
    };
    let word = args.get(1).map(String::as_str).unwrap_or("ibuprofen");
    let k = args.get(2).map(|k| k.parse().expect("k must be a number")).unwrap_or(10);
    println!("{} words, dimension {}", table.len(), table.dim());
    for n in top_k(&table, word, k)?.neighbors {
        println!("{:<16} {:.4}", n.word, n.similarity);
    }
    Ok(())
}
