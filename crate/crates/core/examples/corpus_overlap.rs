//! Content vocabularies of two small corpora and an embedding table, and
//! their pairwise overlap.
//!
//! `cargo run --example corpus_overlap`

use std::collections::{BTreeSet, HashSet};

use embeval::corpus::{content_vocabulary, is_content_token, overlap_report, read_conll, validate_bio};
use embeval::embed_store::read_w2v_text;
use embeval::report::AnalysisReport;

const PATENTS: &str = "The\tO\nibuprofen\tB-CHEM\nsalt\tO\nof\tO\nsodium\tB-CHEM\nchloride\tI-CHEM\n.\tO\n
Heat\tO\nthe\tO\nethanol\tB-CHEM\nto\tO\n80\tO\n°C\tO\n.\tO\n";

const ABSTRACTS: &str = "Naproxen\tB-CHEM\nand\tO\nibuprofen\tB-CHEM\nreduce\tO\npain\tO\n.\tO\n
Aqueous\tO\nethanol\tI-CHEM\nwas\tO\nused\tO\n.\tO\n";

const TABLE: &str = "4 2\nibuprofen 1 0\nnaproxen 0.9 0.1\nethanol 0 1\nthe 0.5 0.5\n";

fn main() -> embeval::Result<()> {
    let stopwords: HashSet<String> = ["the", "of", "and", "to", "was"].iter().map(|s| s.to_string()).collect();
    let patents = read_conll(PATENTS.as_bytes(), "patents")?;
    let abstracts = read_conll(ABSTRACTS.as_bytes(), "abstracts")?;
    for v in validate_bio(&abstracts) {
        println!("BIO warning in abstracts: {v}");
    }
    let table = read_w2v_text(TABLE.as_bytes(), "w2v")?;
    let table_vocab: BTreeSet<String> = table
        .vocab()
        .iter()
        .filter(|w| is_content_token(w))
        .map(|w| w.to_lowercase())
        .filter(|w| !stopwords.contains(w))
        .collect();
    let vocabs = vec![
        ("patents".to_string(), content_vocabulary(&patents, &stopwords)),
        ("abstracts".to_string(), content_vocabulary(&abstracts, &stopwords)),
        ("w2v".to_string(), table_vocab),
    ];
    for (name, v) in &vocabs {
        println!("{name}: {v:?}");
    }
    let report = overlap_report(&vocabs)?;
    print!("{}", AnalysisReport::Overlap(report).to_text());
    Ok(())
}
