//! Mini-batch training with Adam, L2 penalty, dropout and early stopping on
//! development-set span F1.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::metrics::{evaluate_f1, Prf};
use super::model::{EncodedSentence, Mode, TaggerConfig, TaggerModel};
use crate::corpus::AnnotatedCorpus;
use crate::embed_store::EmbeddingTable;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_precision: f64,
    pub dev_recall: f64,
    pub dev_f1: f64,
    pub elapsed_seconds: f64,
}

impl EpochRecord {
    /// One JSON object per line. Wall-clock time is only included on request
    /// so that logs of identical runs stay byte-identical.
    pub fn to_json_line(&self, include_timing: bool) -> String {
        let mut v = serde_json::json!({
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "dev_precision": self.dev_precision,
            "dev_recall": self.dev_recall,
            "dev_f1": self.dev_f1,
        });
        if include_timing {
            v["elapsed_seconds"] = serde_json::json!(self.elapsed_seconds);
        }
        v.to_string()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the best development epoch (initial ones if no epoch ran).
    pub model: TaggerModel,
    pub log: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_dev: Option<Prf>,
    pub stopped_early: bool,
}

/// Tags of `split` that the training corpus never uses.
pub fn unseen_tags(train: &AnnotatedCorpus, split: &AnnotatedCorpus) -> Vec<String> {
    let known = train.tag_set();
    split.tag_set().into_iter().filter(|t| !known.contains(t)).collect()
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub(crate) fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b)
}

/// Length-grouped batches in a seeded random order.
fn batches(lengths: &[usize], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| lengths[i]);
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    out.shuffle(rng);
    out
}

pub fn train(
    train: &AnnotatedCorpus,
    dev: &AnnotatedCorpus,
    embeddings: &EmbeddingTable,
    config: &TaggerConfig,
) -> Result<TrainOutcome> {
    train_with(train, dev, embeddings, config, |_| {})
}

pub fn train_with(
    train: &AnnotatedCorpus,
    dev: &AnnotatedCorpus,
    embeddings: &EmbeddingTable,
    config: &TaggerConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    let unseen = unseen_tags(train, dev);
    if !unseen.is_empty() {
        return Err(Error::UnseenTags {
            split: "dev".into(),
            tags: unseen,
        });
    }
    let mut model = TaggerModel::for_corpus(config.clone(), train, embeddings.dim())?;
    let encoded: Vec<EncodedSentence> = train
        .sentences()
        .iter()
        .map(|s| model.encode(s, embeddings, true))
        .collect::<Result<_>>()?;
    let dev_encoded: Vec<EncodedSentence> = dev
        .sentences()
        .iter()
        .map(|s| model.encode(s, embeddings, false))
        .collect::<Result<_>>()?;
    let lengths: Vec<usize> = encoded.iter().map(|s| s.word_rows.len()).collect();
    let use_dropout = config.char_dropout > 0.0 || config.token_dropout > 0.0;

    let mut adam = Adam::new(&model.params, config.learning_rate);
    let mut grads = model.params.zeros_like();
    let mut log = Vec::new();
    let mut best: Option<(usize, Prf, TaggerModel)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    let started = Instant::now();

    for epoch in 1..=config.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, epoch as u64, 0));
        let mut total_loss = 0.0;
        for batch in batches(&lengths, config.batch_size, &mut rng) {
            for m in grads.matrices_mut() {
                m.fill(0.0);
            }
            for &i in &batch {
                let mode = if use_dropout {
                    Mode::Train {
                        seed: derive_seed(config.seed, epoch as u64, i as u64 + 1),
                    }
                } else {
                    Mode::Inference
                };
                total_loss += model.loss_and_gradient(&encoded[i], embeddings, mode, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            if config.l2_strength > 0.0 {
                grads.add_scaled(2.0 * config.l2_strength, &model.params);
            }
            adam.step(&mut model.params, &grads);
        }
        if !model.params.is_finite() {
            return Err(Error::Domain(format!("parameters became non-finite in epoch {epoch}")));
        }

        let predicted: Vec<Vec<String>> = dev_encoded
            .iter()
            .map(|s| {
                model
                    .decode(s, embeddings)
                    .into_iter()
                    .map(|t| model.tags[t].clone())
                    .collect()
            })
            .collect();
        let dev_prf = evaluate_f1(dev, &predicted)?.micro;
        let record = EpochRecord {
            epoch,
            train_loss: total_loss / encoded.len() as f64,
            dev_precision: dev_prf.precision,
            dev_recall: dev_prf.recall,
            dev_f1: dev_prf.f1,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        log.push(record);

        let improved = best.as_ref().is_none_or(|(_, b, _)| dev_prf.f1 > b.f1);
        if improved {
            best = Some((epoch, dev_prf, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }

    let (best_epoch, best_dev, model) = match best {
        Some((e, p, m)) => (Some(e), Some(p), m),
        None => (None, None, model),
    };
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        best_dev,
        stopped_early,
    })
}
