//! Scores, normalizes and decodes tag sequences with a linear-chain CRF, and
//! checks the forward algorithm against explicit enumeration.
//!
//! `cargo run --example crf_decoding`

use embeval::matrix::Matrix;
use embeval::tagger::crf::{log_partition, log_sum_exp, path_score, viterbi_decode};

fn main() {
    let tags = ["B-CHEM", "I-CHEM", "O"];
    let tokens = ["sodium", "chloride", "dissolves"];
    // Emission scores per token (rows) and tag (columns).
    let emissions = Matrix::from_vec(3, 3, vec![1.5, 0.2, 1.0, 0.3, 1.2, 1.4, 0.0, 0.1, 2.0]);
    // Rows/columns 0..3 are tags, 3 is the start state and 4 the stop state.
    let mut transitions = Matrix::zeros(5, 5);
    transitions.set(2, 1, -4.0); // O -> I-CHEM is implausible
    transitions.set(3, 1, -4.0); // start -> I-CHEM as well
    transitions.set(0, 1, 1.0); // B-CHEM -> I-CHEM is encouraged

    let z = log_partition(&emissions, &transitions);
    let mut scores = Vec::new();
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                scores.push(path_score(&emissions, &[a, b, c], &transitions));
            }
        }
    }
    println!("log Z forward {z:.6}, by enumeration {:.6}", log_sum_exp(&scores));

    let best = viterbi_decode(&emissions, &transitions);
    let p = (path_score(&emissions, &best, &transitions) - z).exp();
    for (tok, t) in tokens.iter().zip(&best) {
        println!("{tok:<10} {}", tags[*t]);
    }
    println!("probability of the best path {p:.4}");
}
