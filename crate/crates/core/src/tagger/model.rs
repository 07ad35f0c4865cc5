//! Character-GRU + token-BiGRU + CRF tagger: parameters, forward pass and
//! hand-derived gradients.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::crf;
use super::gru::{GruTrace, GruWeights};
use crate::corpus::{AnnotatedCorpus, Sentence};
use crate::embed_store::EmbeddingTable;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Output layer used for training and decoding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    #[default]
    Crf,
    /// Independent per-token softmax; transitions are unused.
    Softmax,
}

impl std::str::FromStr for Decoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crf" => Ok(Decoder::Crf),
            "softmax" => Ok(Decoder::Softmax),
            _ => Err(Error::arg(format!("unknown decoder {s:?} (expected crf or softmax)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaggerConfig {
    pub char_embedding_dim: usize,
    /// Per direction; the character encoding has twice this size.
    pub char_hidden: usize,
    /// Per direction.
    pub token_hidden: usize,
    /// Applied to the character encoding of each token.
    pub char_dropout: f64,
    /// Applied to the token BiGRU outputs before the emission projection.
    pub token_dropout: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    /// Coefficient of the `Σ θ²` penalty over all trainable parameters.
    pub l2_strength: f64,
    pub seed: u64,
    pub decoder: Decoder,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            char_embedding_dim: 25,
            char_hidden: 80,
            token_hidden: 300,
            char_dropout: 0.25,
            token_dropout: 0.5,
            batch_size: 16,
            max_epochs: 50,
            patience: 5,
            learning_rate: 0.01,
            l2_strength: 1e-6,
            seed: 0,
            decoder: Decoder::Crf,
        }
    }
}

impl TaggerConfig {
    /// `max_epochs` may be 0 (no training); every other count must be ≥ 1.
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("char_embedding_dim", self.char_embedding_dim),
            ("char_hidden", self.char_hidden),
            ("token_hidden", self.token_hidden),
            ("batch_size", self.batch_size),
            ("patience", self.patience),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::arg(format!("{name} must be at least 1")));
            }
        }
        for (name, p) in [("char_dropout", self.char_dropout), ("token_dropout", self.token_dropout)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::arg(format!("{name} must lie in [0, 1), got {p}")));
            }
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::arg("learning_rate must be finite and non-negative"));
        }
        if !(self.l2_strength >= 0.0 && self.l2_strength.is_finite()) {
            return Err(Error::arg("l2_strength must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Every trainable weight of the tagger. Pre-trained word vectors are not
/// part of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggerParameters {
    /// Row 0 is the unknown-character embedding.
    pub char_embeddings: Matrix,
    pub char_forward: GruWeights,
    pub char_backward: GruWeights,
    pub token_forward: GruWeights,
    pub token_backward: GruWeights,
    /// `tags × 2·token_hidden`
    pub emission_weights: Matrix,
    /// `tags × 1`
    pub emission_bias: Matrix,
    /// `(tags + 2)²` including start and stop states.
    pub transitions: Matrix,
}

pub const PARAMETER_GROUPS: [&str; 16] = [
    "char_embeddings",
    "char_forward.input",
    "char_forward.recurrent",
    "char_forward.bias",
    "char_backward.input",
    "char_backward.recurrent",
    "char_backward.bias",
    "token_forward.input",
    "token_forward.recurrent",
    "token_forward.bias",
    "token_backward.input",
    "token_backward.recurrent",
    "token_backward.bias",
    "emission_weights",
    "emission_bias",
    "transitions",
];

impl TaggerParameters {
    /// All parameter matrices in [`PARAMETER_GROUPS`] order.
    pub fn matrices(&self) -> Vec<&Matrix> {
        let mut v = vec![&self.char_embeddings];
        for g in [&self.char_forward, &self.char_backward, &self.token_forward, &self.token_backward] {
            v.extend(g.matrices());
        }
        v.extend([&self.emission_weights, &self.emission_bias, &self.transitions]);
        v
    }

    pub fn matrices_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = vec![&mut self.char_embeddings];
        for g in [
            &mut self.char_forward,
            &mut self.char_backward,
            &mut self.token_forward,
            &mut self.token_backward,
        ] {
            v.extend(g.matrices_mut());
        }
        v.extend([&mut self.emission_weights, &mut self.emission_bias, &mut self.transitions]);
        v
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for m in z.matrices_mut() {
            m.fill(0.0);
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().iter().all(|m| m.is_finite())
    }

    pub fn sum_squares(&self) -> f64 {
        self.matrices().iter().map(|m| m.sum_squares()).sum()
    }

    pub fn num_parameters(&self) -> usize {
        self.matrices().iter().map(|m| m.as_slice().len()).sum()
    }

    /// `self += alpha · other`
    pub fn add_scaled(&mut self, alpha: f64, other: &TaggerParameters) {
        for (a, b) in self.matrices_mut().into_iter().zip(other.matrices()) {
            a.add_scaled(alpha, b);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for m in self.matrices_mut() {
            m.scale(alpha);
        }
    }
}

/// Whether dropout is active. Training masks are drawn from a generator
/// seeded with `seed`, so a given seed always produces the same masks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Inference,
    Train { seed: u64 },
}

/// A sentence mapped to model indices.
#[derive(Clone, Debug)]
pub struct EncodedSentence {
    pub word_rows: Vec<Option<usize>>,
    pub chars: Vec<Vec<usize>>,
    pub tags: Option<Vec<usize>>,
}

/// Trained (or freshly initialized) tagger with its vocabularies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggerModel {
    pub config: TaggerConfig,
    pub tags: Vec<String>,
    /// Known characters; index `i` maps to embedding row `i + 1`.
    pub alphabet: Vec<char>,
    pub word_dim: usize,
    pub params: TaggerParameters,
    #[serde(skip)]
    char_index: HashMap<char, usize>,
    #[serde(skip)]
    tag_index: HashMap<String, usize>,
}

struct TokenTrace {
    char_traces: Vec<(GruTrace, GruTrace)>,
    char_masks: Vec<Option<Vec<f64>>>,
    forward: GruTrace,
    backward: GruTrace,
    token_masks: Vec<Option<Vec<f64>>>,
    /// Dropped-out BiGRU outputs fed to the projection.
    features: Vec<Vec<f64>>,
}

fn dropout_mask<R: Rng>(len: usize, rate: f64, rng: &mut R) -> Option<Vec<f64>> {
    if rate == 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    Some(
        (0..len)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect(),
    )
}

fn apply_mask(v: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        v.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
    }
}

impl TaggerModel {
    /// Randomly initialized model. `tags` and `alphabet` are used as given.
    pub fn new(
        config: TaggerConfig,
        tags: Vec<String>,
        alphabet: Vec<char>,
        word_dim: usize,
    ) -> Result<Self> {
        config.validate()?;
        if tags.is_empty() {
            return Err(Error::arg("tag set is empty"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let c = &config;
        let n_chars = alphabet.len() + 1;
        let token_in = word_dim + 2 * c.char_hidden;
        let ce_bound = (3.0 / c.char_embedding_dim as f64).sqrt();
        let char_embeddings = Matrix::from_fn(n_chars, c.char_embedding_dim, |_, _| {
            rng.random_range(-ce_bound..ce_bound)
        });
        let char_forward = GruWeights::random(c.char_embedding_dim, c.char_hidden, &mut rng);
        let char_backward = GruWeights::random(c.char_embedding_dim, c.char_hidden, &mut rng);
        let token_forward = GruWeights::random(token_in, c.token_hidden, &mut rng);
        let token_backward = GruWeights::random(token_in, c.token_hidden, &mut rng);
        let t = tags.len();
        let xavier = (6.0 / (t + 2 * c.token_hidden) as f64).sqrt();
        let emission_weights =
            Matrix::from_fn(t, 2 * c.token_hidden, |_, _| rng.random_range(-xavier..xavier));
        let params = TaggerParameters {
            char_embeddings,
            char_forward,
            char_backward,
            token_forward,
            token_backward,
            emission_weights,
            emission_bias: Matrix::zeros(t, 1),
            transitions: Matrix::zeros(t + 2, t + 2),
        };
        Ok(TaggerModel::from_parts(config, tags, alphabet, word_dim, params))
    }

    /// Model whose tag set and alphabet come from `corpus` (both sorted).
    pub fn for_corpus(config: TaggerConfig, corpus: &AnnotatedCorpus, word_dim: usize) -> Result<Self> {
        let tags: Vec<String> = corpus.tag_set().into_iter().collect();
        let mut alphabet: Vec<char> = corpus
            .sentences()
            .iter()
            .flat_map(|s| s.surfaces().flat_map(str::chars).collect::<Vec<_>>())
            .collect();
        alphabet.sort_unstable();
        alphabet.dedup();
        TaggerModel::new(config, tags, alphabet, word_dim)
    }

    /// Assembles a model from stored parts, rebuilding lookup tables.
    pub fn from_parts(
        config: TaggerConfig,
        tags: Vec<String>,
        alphabet: Vec<char>,
        word_dim: usize,
        params: TaggerParameters,
    ) -> Self {
        let char_index = alphabet.iter().enumerate().map(|(i, &c)| (c, i + 1)).collect();
        let tag_index = tags.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TaggerModel {
            config,
            tags,
            alphabet,
            word_dim,
            params,
            char_index,
            tag_index,
        }
    }

    pub fn tag_index(&self, tag: &str) -> Option<usize> {
        self.tag_index.get(tag).copied()
    }

    pub fn char_id(&self, c: char) -> usize {
        self.char_index.get(&c).copied().unwrap_or(0)
    }

    /// Checks that parameter shapes agree with the config, tags and alphabet.
    pub fn check_shapes(&self) -> Result<()> {
        let c = &self.config;
        let t = self.tags.len();
        let token_in = self.word_dim + 2 * c.char_hidden;
        let expect = [
            (self.alphabet.len() + 1, c.char_embedding_dim),
            (3 * c.char_hidden, c.char_embedding_dim),
            (3 * c.char_hidden, c.char_hidden),
            (3 * c.char_hidden, 1),
            (3 * c.char_hidden, c.char_embedding_dim),
            (3 * c.char_hidden, c.char_hidden),
            (3 * c.char_hidden, 1),
            (3 * c.token_hidden, token_in),
            (3 * c.token_hidden, c.token_hidden),
            (3 * c.token_hidden, 1),
            (3 * c.token_hidden, token_in),
            (3 * c.token_hidden, c.token_hidden),
            (3 * c.token_hidden, 1),
            (t, 2 * c.token_hidden),
            (t, 1),
            (t + 2, t + 2),
        ];
        for ((name, m), shape) in PARAMETER_GROUPS.iter().zip(self.params.matrices()).zip(expect) {
            if m.shape() != shape {
                return Err(Error::arg(format!(
                    "parameter {name} has shape {:?}, expected {shape:?}",
                    m.shape()
                )));
            }
        }
        Ok(())
    }

    /// Looks up a word exactly, then lowercased.
    fn word_row(&self, embeddings: &EmbeddingTable, word: &str) -> Option<usize> {
        embeddings
            .index_of(word)
            .or_else(|| embeddings.index_of(&word.to_lowercase()))
    }

    pub fn encode(&self, sentence: &Sentence, embeddings: &EmbeddingTable, with_tags: bool) -> Result<EncodedSentence> {
        if embeddings.dim() != self.word_dim {
            return Err(Error::arg(format!(
                "embeddings have dimension {}, model expects {}",
                embeddings.dim(),
                self.word_dim
            )));
        }
        let tags = if with_tags {
            Some(
                sentence
                    .tags()
                    .map(|t| {
                        self.tag_index(t)
                            .ok_or_else(|| Error::UnseenTags {
                                split: "input".into(),
                                tags: vec![t.to_owned()],
                            })
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        Ok(EncodedSentence {
            word_rows: sentence.surfaces().map(|w| self.word_row(embeddings, w)).collect(),
            chars: sentence
                .surfaces()
                .map(|w| w.chars().map(|c| self.char_id(c)).collect())
                .collect(),
            tags,
        })
    }

    fn char_traces(&self, chars: &[usize]) -> (GruTrace, GruTrace) {
        let emb = |&c: &usize| self.params.char_embeddings.row(c).to_vec();
        let fwd = self.params.char_forward.run(chars.iter().map(emb).collect());
        let bwd = self.params.char_backward.run(chars.iter().rev().map(emb).collect());
        (fwd, bwd)
    }

    /// Final forward and final backward character-GRU states, concatenated.
    pub fn encode_word_chars(&self, word: &str) -> Vec<f64> {
        let ids: Vec<usize> = word.chars().map(|c| self.char_id(c)).collect();
        let (f, b) = self.char_traces(&ids);
        let mut out = f.outputs.last().cloned().unwrap_or_else(|| vec![0.0; self.config.char_hidden]);
        out.extend(b.outputs.last().cloned().unwrap_or_else(|| vec![0.0; self.config.char_hidden]));
        out
    }

    fn run(&self, s: &EncodedSentence, embeddings: &EmbeddingTable, mode: Mode) -> (Matrix, TokenTrace) {
        let mut rng = match mode {
            Mode::Train { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            Mode::Inference => None,
        };
        let ch = self.config.char_hidden;
        let th = self.config.token_hidden;
        let len = s.word_rows.len();
        let mut char_traces = Vec::with_capacity(len);
        let mut char_masks = Vec::with_capacity(len);
        let mut inputs = Vec::with_capacity(len);
        for (row, chars) in s.word_rows.iter().zip(&s.chars) {
            let mut x = match row {
                Some(r) => embeddings.vectors().row(*r).to_vec(),
                None => vec![0.0; self.word_dim],
            };
            let (f, b) = self.char_traces(chars);
            let mut enc = Vec::with_capacity(2 * ch);
            enc.extend_from_slice(f.outputs.last().expect("non-empty word"));
            enc.extend_from_slice(b.outputs.last().expect("non-empty word"));
            let mask = rng
                .as_mut()
                .and_then(|r| dropout_mask(2 * ch, self.config.char_dropout, r));
            apply_mask(&mut enc, &mask);
            x.extend(enc);
            inputs.push(x);
            char_traces.push((f, b));
            char_masks.push(mask);
        }
        let forward = self.params.token_forward.run(inputs.clone());
        let backward = self.params.token_backward.run(inputs.into_iter().rev().collect());
        let t = self.tags.len();
        let mut emissions = Matrix::zeros(len, t);
        let mut features = Vec::with_capacity(len);
        let mut token_masks = Vec::with_capacity(len);
        for i in 0..len {
            let mut o = Vec::with_capacity(2 * th);
            o.extend_from_slice(&forward.outputs[i]);
            o.extend_from_slice(&backward.outputs[len - 1 - i]);
            let mask = rng
                .as_mut()
                .and_then(|r| dropout_mask(2 * th, self.config.token_dropout, r));
            apply_mask(&mut o, &mask);
            let e = emissions.row_mut(i);
            e.copy_from_slice(self.params.emission_bias.as_slice());
            self.params.emission_weights.matvec_acc(&o, e);
            features.push(o);
            token_masks.push(mask);
        }
        (
            emissions,
            TokenTrace {
                char_traces,
                char_masks,
                forward,
                backward,
                token_masks,
                features,
            },
        )
    }

    /// Emission scores (`tokens × tags`) for an encoded sentence.
    pub fn emissions(&self, s: &EncodedSentence, embeddings: &EmbeddingTable, mode: Mode) -> Matrix {
        self.run(s, embeddings, mode).0
    }

    pub fn forward_scores(&self, sentence: &Sentence, embeddings: &EmbeddingTable, mode: Mode) -> Result<Matrix> {
        let s = self.encode(sentence, embeddings, false)?;
        Ok(self.emissions(&s, embeddings, mode))
    }

    fn data_loss_from_emissions(&self, emissions: &Matrix, gold: &[usize]) -> f64 {
        match self.config.decoder {
            Decoder::Crf => crf::crf_log_likelihood(emissions, gold, &self.params.transitions),
            Decoder::Softmax => crf::softmax_nll_and_grad(emissions, gold).0,
        }
    }

    /// Sentence negative log-likelihood (no regularization).
    pub fn loss(&self, s: &EncodedSentence, embeddings: &EmbeddingTable, mode: Mode) -> f64 {
        let gold = s.tags.as_ref().expect("gold tags required");
        let e = self.emissions(s, embeddings, mode);
        self.data_loss_from_emissions(&e, gold)
    }

    /// Sentence negative log-likelihood and its gradient, accumulated into `grads`.
    pub fn loss_and_gradient(
        &self,
        s: &EncodedSentence,
        embeddings: &EmbeddingTable,
        mode: Mode,
        grads: &mut TaggerParameters,
    ) -> f64 {
        let gold = s.tags.as_ref().expect("gold tags required");
        let (emissions, trace) = self.run(s, embeddings, mode);
        let (loss, d_emit) = match self.config.decoder {
            Decoder::Crf => {
                let (l, de, dt) = crf::crf_nll_and_grad(&emissions, gold, &self.params.transitions);
                grads.transitions.add_scaled(1.0, &dt);
                (l, de)
            }
            Decoder::Softmax => crf::softmax_nll_and_grad(&emissions, gold),
        };
        self.backward(s, &trace, &d_emit, grads);
        loss
    }

    fn backward(&self, s: &EncodedSentence, trace: &TokenTrace, d_emit: &Matrix, grads: &mut TaggerParameters) {
        let len = s.word_rows.len();
        let th = self.config.token_hidden;
        let ch = self.config.char_hidden;
        let mut d_fwd = Vec::with_capacity(len);
        let mut d_bwd = vec![None; len];
        for i in 0..len {
            let de = d_emit.row(i);
            grads.emission_weights.outer_acc(de, &trace.features[i]);
            for (b, g) in grads.emission_bias.as_mut_slice().iter_mut().zip(de) {
                *b += g;
            }
            let mut d_o = vec![0.0; 2 * th];
            self.params.emission_weights.matvec_t_acc(de, &mut d_o);
            apply_mask(&mut d_o, &trace.token_masks[i]);
            d_bwd[len - 1 - i] = Some(d_o.split_off(th));
            d_fwd.push(Some(d_o));
        }
        let dx_f = self
            .params
            .token_forward
            .backward(&trace.forward, &d_fwd, &mut grads.token_forward);
        let dx_b = self
            .params
            .token_backward
            .backward(&trace.backward, &d_bwd, &mut grads.token_backward);
        for i in 0..len {
            let mut d_enc: Vec<f64> = dx_f[i][self.word_dim..]
                .iter()
                .zip(&dx_b[len - 1 - i][self.word_dim..])
                .map(|(a, b)| a + b)
                .collect();
            apply_mask(&mut d_enc, &trace.char_masks[i]);
            let (f, b) = &trace.char_traces[i];
            let n = f.outputs.len();
            let mut df = vec![None; n];
            let mut db = vec![None; n];
            db[n - 1] = Some(d_enc.split_off(ch));
            df[n - 1] = Some(d_enc);
            let dcf = self.params.char_forward.backward(f, &df, &mut grads.char_forward);
            let dcb = self.params.char_backward.backward(b, &db, &mut grads.char_backward);
            let chars = &s.chars[i];
            for (k, &c) in chars.iter().enumerate() {
                let row = grads.char_embeddings.row_mut(c);
                for (r, (a, b)) in row.iter_mut().zip(dcf[k].iter().zip(&dcb[n - 1 - k])) {
                    *r += a + b;
                }
            }
        }
    }

    /// Best tag indices under the configured decoder.
    pub fn decode(&self, s: &EncodedSentence, embeddings: &EmbeddingTable) -> Vec<usize> {
        let e = self.emissions(s, embeddings, Mode::Inference);
        match self.config.decoder {
            Decoder::Crf => crf::viterbi_decode(&e, &self.params.transitions),
            Decoder::Softmax => crf::argmax_decode(&e),
        }
    }

    pub fn predict(&self, sentence: &Sentence, embeddings: &EmbeddingTable) -> Result<Vec<String>> {
        let s = self.encode(sentence, embeddings, false)?;
        Ok(self
            .decode(&s, embeddings)
            .into_iter()
            .map(|i| self.tags[i].clone())
            .collect())
    }

    pub fn predict_corpus(&self, corpus: &AnnotatedCorpus, embeddings: &EmbeddingTable) -> Result<Vec<Vec<String>>> {
        corpus
            .sentences()
            .iter()
            .map(|s| self.predict(s, embeddings))
            .collect()
    }
}
