//! Trains the tagger on the generated chemical-name corpus and reports test
//! span F1.
//!
//! `cargo run --release --example train_tagger -- [max_epochs]`

use std::time::Instant;

use embeval::synthetic::{generate, SyntheticConfig};
use embeval::tagger::{evaluate_f1, train_with, TaggerConfig};

fn main() -> embeval::Result<()> {
    let max_epochs = std::env::args()
        .nth(1)
        .map(|a| a.parse().expect("max_epochs must be a number"))
        .unwrap_or(TaggerConfig::default().max_epochs);
    let data = generate(&SyntheticConfig::default())?;
    println!(
        "train/dev/test sentences: {}/{}/{}, vocabulary {}",
        data.train.len(),
        data.dev.len(),
        data.test.len(),
        data.embeddings.len()
    );
    let config = TaggerConfig {
        max_epochs,
        ..TaggerConfig::default()
    };
    let start = Instant::now();
    let outcome = train_with(&data.train, &data.dev, &data.embeddings, &config, |r| {
        println!(
            "epoch {:>2}  loss {:.4}  dev F1 {:.4}  {:.1}s",
            r.epoch, r.train_loss, r.dev_f1, r.elapsed_seconds
        )
    })?;
    let predicted = outcome.model.predict_corpus(&data.test, &data.embeddings)?;
    let report = evaluate_f1(&data.test, &predicted)?;
    println!(
        "best epoch {:?}, test P {:.4} R {:.4} F1 {:.4}, {:.1}s total",
        outcome.best_epoch,
        report.micro.precision,
        report.micro.recall,
        report.micro.f1,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
