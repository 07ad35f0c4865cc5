//! Agreement between the top-10 lists of two embeddings after mapping
//! synonyms to shared identifiers.
//!
//! `cargo run --example agreement`

use embeval::intrinsic::{agreement_matrix, jaccard, read_dictionary, FallbackPolicy};

const DICTIONARY: &str = "acetaminophen\tCID:1983
paracetamol\tCID:1983
aspirin\tCID:2244
acetylsalicylic\tCID:2244
ibuprofen\tCID:3672
naproxen\tCID:156391
";

fn list(words: &str) -> Vec<String> {
    words.split_whitespace().map(String::from).collect()
}

fn main() -> embeval::Result<()> {
    let dict = read_dictionary(DICTIONARY.as_bytes())?;
    let lists = vec![
        ("patent-w2v".to_string(), list("naproxen acetaminophen aspirin ketoprofen diclofenac")),
        ("pubmed-w2v".to_string(), list("naproxen paracetamol acetylsalicylic ketoprofen ethanol")),
    ];
    let raw_a = lists[0].1.iter().cloned().collect();
    let raw_b = lists[1].1.iter().cloned().collect();
    println!("surface Jaccard: {:.3}", jaccard(&raw_a, &raw_b));
    for policy in [FallbackPolicy::SurfaceFallback, FallbackPolicy::Drop] {
        let report = agreement_matrix(&lists, &dict, policy)?;
        println!("{policy:?}: {:.3}", report.get("patent-w2v", "pubmed-w2v").unwrap());
    }
    print!("{}", agreement_matrix(&lists, &dict, FallbackPolicy::default())?.to_text());
    Ok(())
}
