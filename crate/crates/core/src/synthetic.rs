//! Generated tagging benchmark: chemical-looking names inside templated
//! laboratory sentences, plus matching word vectors.
//!
//! Names are built from a stem and a suffix (`ethanol`, `propylamine`, ...);
//! every fifth name is preceded by a counter-ion word and spans two tokens.
//! Entity words get vectors near a shared centre, every other word gets an
//! independent random vector.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{AnnotatedCorpus, Sentence, Token};
use crate::embed_store::EmbeddingTable;
use crate::error::Result;
use crate::matrix::Matrix;

pub const ENTITY_TYPE: &str = "CHEM";

const STEMS: [&str; 10] = [
    "meth", "eth", "prop", "but", "pent", "hex", "hept", "oct", "non", "dec",
];
const SUFFIXES: [&str; 5] = ["anol", "ylamine", "azole", "anoate", "ylene"];
const COUNTER_IONS: [&str; 2] = ["sodium", "potassium"];

/// `{}` marks an entity slot.
const TEMPLATES: [&str; 16] = [
    "The mixture was treated with {} at room temperature .",
    "A solution of {} in water was stirred for two hours .",
    "{} was added dropwise to the reaction vessel .",
    "The residue was washed with {} and dried under vacuum .",
    "After cooling , {} was filtered and collected .",
    "The product was purified using {} as eluent .",
    "To the flask was added {} followed by {} .",
    "The crude material contained traces of {} .",
    "Yield of {} was determined by weighing the solid .",
    "The layers were separated and {} was removed by evaporation .",
    "The catalyst was suspended in {} under nitrogen .",
    "A sample of {} was heated to reflux overnight .",
    "The filtrate was concentrated to give {} as a white powder .",
    "Both {} and {} were dissolved in the same solvent .",
    "The organic phase was extracted with {} three times .",
    "This example describes the preparation of {} on a large scale .",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub train_sentences: usize,
    pub dev_sentences: usize,
    pub test_sentences: usize,
    pub dim: usize,
    /// Standard deviation of entity vectors around their shared centre.
    pub entity_spread: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            train_sentences: 500,
            dev_sentences: 100,
            test_sentences: 100,
            dim: 50,
            entity_spread: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub gazetteer: Vec<Vec<String>>,
    pub train: AnnotatedCorpus,
    pub dev: AnnotatedCorpus,
    pub test: AnnotatedCorpus,
    /// Lowercased vocabulary of all three splits.
    pub embeddings: EmbeddingTable,
}

/// The 50 gazetteer names, each as its token sequence.
pub fn gazetteer() -> Vec<Vec<String>> {
    let mut names = Vec::with_capacity(STEMS.len() * SUFFIXES.len());
    for (i, stem) in STEMS.iter().enumerate() {
        for (j, suffix) in SUFFIXES.iter().enumerate() {
            let word = format!("{stem}{suffix}");
            let k = i * SUFFIXES.len() + j;
            if k % 5 == 4 {
                names.push(vec![COUNTER_IONS[k / 5 % 2].to_owned(), word]);
            } else {
                names.push(vec![word]);
            }
        }
    }
    names
}

fn sentence(rng: &mut ChaCha8Rng, names: &[Vec<String>]) -> Result<Sentence> {
    let template = TEMPLATES.choose(rng).expect("templates");
    let mut tokens = Vec::new();
    for word in template.split(' ') {
        if word == "{}" {
            let name = names.choose(rng).expect("gazetteer");
            for (i, part) in name.iter().enumerate() {
                let prefix = if i == 0 { "B" } else { "I" };
                tokens.push(Token::new(part.as_str(), format!("{prefix}-{ENTITY_TYPE}"))?);
            }
        } else {
            tokens.push(Token::new(word, "O")?);
        }
    }
    if tokens[0].tag() != "O" {
        // Sentence-initial names are capitalized like any other first word.
        let first = tokens[0].surface();
        let mut cap: String = first.chars().take(1).flat_map(char::to_uppercase).collect();
        cap.push_str(&first[first.chars().next().map_or(0, char::len_utf8)..]);
        tokens[0] = Token::new(cap, tokens[0].tag())?;
    }
    Sentence::new(tokens)
}

fn split(rng: &mut ChaCha8Rng, names: &[Vec<String>], name: &str, n: usize) -> Result<AnnotatedCorpus> {
    let sentences = (0..n).map(|_| sentence(rng, names)).collect::<Result<_>>()?;
    AnnotatedCorpus::new(name, sentences)
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticData> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let names = gazetteer();
    let train = split(&mut rng, &names, "train", config.train_sentences)?;
    let dev = split(&mut rng, &names, "dev", config.dev_sentences)?;
    let test = split(&mut rng, &names, "test", config.test_sentences)?;

    let entity_words: std::collections::BTreeSet<String> = names.iter().flatten().cloned().collect();
    let mut vocab: std::collections::BTreeSet<String> = entity_words.clone();
    for c in [&train, &dev, &test] {
        for s in c.sentences() {
            vocab.extend(s.surfaces().map(str::to_lowercase));
        }
    }
    let dim = config.dim;
    let scale = 1.0 / (dim as f64).sqrt();
    let unit = Normal::new(0.0, scale).expect("valid normal");
    let spread = Normal::new(0.0, config.entity_spread * scale).expect("valid normal");
    let centre: Vec<f64> = (0..dim).map(|_| unit.sample(&mut rng)).collect();
    let vocab: Vec<String> = vocab.into_iter().collect();
    let mut vectors = Matrix::zeros(vocab.len(), dim);
    for (i, w) in vocab.iter().enumerate() {
        let row = vectors.row_mut(i);
        if entity_words.contains(w) {
            for (r, c) in row.iter_mut().zip(&centre) {
                *r = c + spread.sample(&mut rng);
            }
        } else {
            for r in row.iter_mut() {
                *r = unit.sample(&mut rng);
            }
        }
        // Guard against the (unlikely) all-zero draw.
        if row.iter().all(|&v| v == 0.0) {
            row[0] = rng.random_range(0.5..1.0);
        }
    }
    let embeddings = EmbeddingTable::new("synthetic", vocab, vectors)?;
    Ok(SyntheticData {
        gazetteer: names,
        train,
        dev,
        test,
        embeddings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate_bio;

    #[test]
    fn gazetteer_has_fifty_names_with_some_multiword() {
        let g = gazetteer();
        assert_eq!(g.len(), 50);
        assert_eq!(g.iter().filter(|n| n.len() == 2).count(), 10);
    }

    #[test]
    fn splits_are_sized_and_well_formed() {
        let d = generate(&SyntheticConfig::default()).unwrap();
        assert_eq!((d.train.len(), d.dev.len(), d.test.len()), (500, 100, 100));
        assert_eq!(d.embeddings.dim(), 50);
        for c in [&d.train, &d.dev, &d.test] {
            assert!(validate_bio(c).is_empty());
            for s in c.sentences() {
                assert!(s.surfaces().all(|w| d.embeddings.contains(&w.to_lowercase())));
            }
        }
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate(&SyntheticConfig::default()).unwrap();
        let b = generate(&SyntheticConfig::default()).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.embeddings, b.embeddings);
    }
}
