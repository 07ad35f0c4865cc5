//! Extrinsic evaluation: a character-GRU and token-BiGRU sequence labeller
//! with a CRF output layer, trained with Adam and early stopping.

pub mod adam;
pub mod checkpoint;
pub mod crf;
pub mod gru;
pub mod metrics;
pub mod model;
pub mod train;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use crf::{crf_log_likelihood, viterbi_decode};
pub use gru::{gru_cell, GruWeights};
pub use metrics::{evaluate_f1, extract_spans, F1Report, Prf, Span};
pub use model::{Decoder, EncodedSentence, Mode, TaggerConfig, TaggerModel, TaggerParameters, PARAMETER_GROUPS};
pub use train::{train, train_with, unseen_tags, EpochRecord, TrainOutcome};
