use std::collections::{BTreeSet, HashSet};
use std::fmt::Display;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::config::{parse_config, ConfigFile, Settings};
use super::run::Run;
use super::{
    Cli, CliError, Command, DeriveArgs, EvalArgs, IntrinsicArgs, OverlapArgs, QueryArgs,
    TaggerFlags, TrainArgs,
};
use crate::corpus::{
    content_vocabulary, is_content_token, overlap_report, read_conll, read_stopwords, write_conll,
    AnnotatedCorpus, Sentence, Token,
};
use crate::derive::{apply_svd, average_occurrences, fit_svd};
use crate::embed_store::{read_table, restrict, top_k, write_w2v_binary, write_w2v_text, EmbeddingFormat, EmbeddingTable};
use crate::intrinsic::{
    agreement_matrix, correlation_matrix, read_dictionary, scatter_svg, shared_vocabulary,
    similarity_query_report, tsne_with, FallbackPolicy, NormalizationDictionary, TsneConfig,
    DEFAULT_K,
};
use crate::report::AnalysisReport;
use crate::tagger::{
    evaluate_f1, load_checkpoint, save_checkpoint, train_with, unseen_tags, Decoder, TaggerConfig,
};
use crate::Error;

pub const DEFAULT_QUERY: &str = "ibuprofen";
pub const DEFAULT_TSNE_SAMPLE: usize = 500;

fn lib(path: &Path) -> impl FnOnce(Error) -> CliError + '_ {
    move |e| CliError::library(path.display(), e)
}

fn parse_flag<T>(flag: &Option<String>, name: &str) -> Result<Option<T>, CliError>
where
    T: std::str::FromStr,
    T::Err: Display,
{
    flag.as_deref()
        .map(|v| v.parse().map_err(|e| CliError::usage(format!("--{name}: {e}"))))
        .transpose()
}

/// Table and corpus names come from file stems, made unique with a suffix.
fn unique_name(path: &Path, taken: &mut BTreeSet<String>) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into());
    let mut name = stem.clone();
    let mut i = 2;
    while taken.contains(&name) {
        name = format!("{stem}-{i}");
        i += 1;
    }
    taken.insert(name.clone());
    name
}

fn load_table(run: &mut Run, path: &Path, taken: &mut BTreeSet<String>) -> Result<EmbeddingTable, CliError> {
    let name = unique_name(path, taken);
    let reader = run.open(path)?;
    read_table(reader, EmbeddingFormat::from_path(path), &name).map_err(lib(path))
}

fn load_corpus(run: &mut Run, path: &Path, taken: &mut BTreeSet<String>) -> Result<AnnotatedCorpus, CliError> {
    let name = unique_name(path, taken);
    let reader = run.open(path)?;
    read_conll(reader, &name).map_err(lib(path))
}

fn read_word_list(reader: Box<dyn BufRead>, path: &Path) -> Result<BTreeSet<String>, CliError> {
    let mut words = BTreeSet::new();
    for line in reader.lines() {
        let line = line.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let w = line.trim();
        if !w.is_empty() {
            words.insert(w.to_owned());
        }
    }
    Ok(words)
}

fn write_report(run: &mut Run, stem: &str, report: AnalysisReport) -> Result<(), CliError> {
    run.write(&format!("{stem}.json"), report.to_json().as_bytes())?;
    run.write(&format!("{stem}.txt"), report.to_text().as_bytes())
}

fn json_bytes(v: &impl serde::Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", p.display())))?;
            parse_config(&text).map_err(|m| CliError::usage(format!("{}: {m}", p.display())))?
        }
        None => ConfigFile::default(),
    };
    let settings = Settings::new(file);
    let seed = settings.get("seed", cli.seed, 0u64)?;
    let mut run = Run::new(cli.out_dir.clone());
    let name = match &cli.command {
        Command::Overlap(a) => {
            overlap(a, &settings, &mut run)?;
            "overlap"
        }
        Command::Derive(a) => {
            derive(a, &settings, &mut run)?;
            "derive"
        }
        Command::Intrinsic(a) => {
            intrinsic(a, seed, &settings, &mut run)?;
            "intrinsic"
        }
        Command::Train(a) => {
            train(a, seed, &settings, &mut run)?;
            "train"
        }
        Command::Eval(a) => {
            eval(a, &settings, &mut run)?;
            "eval"
        }
        Command::Query(a) => {
            query(a, &settings, &mut run)?;
            "query"
        }
    };
    run.finish(name, seed, &settings)?;
    Ok(())
}

fn overlap(a: &OverlapArgs, s: &Settings, run: &mut Run) -> Result<(), CliError> {
    s.check_unused()?;
    if a.embeddings.len() + a.corpora.len() < 2 {
        return Err(CliError::usage(
            "overlap needs at least two inputs (--embedding and/or --corpus)",
        ));
    }
    let stopwords = match &a.stopwords {
        Some(p) => read_stopwords(run.open(p)?).map_err(lib(p))?,
        None => HashSet::new(),
    };
    let mut taken = BTreeSet::new();
    let mut vocabs = Vec::new();
    for p in &a.embeddings {
        let t = load_table(run, p, &mut taken)?;
        let v: BTreeSet<String> = t
            .vocab()
            .iter()
            .filter(|w| is_content_token(w))
            .map(|w| w.to_lowercase())
            .filter(|w| !stopwords.contains(w))
            .collect();
        vocabs.push((t.name().to_owned(), v));
    }
    for p in &a.corpora {
        let c = load_corpus(run, p, &mut taken)?;
        vocabs.push((c.name().to_owned(), content_vocabulary(&c, &stopwords)));
    }
    let report = overlap_report(&vocabs).map_err(|e| CliError::library("overlap", e))?;
    write_report(run, "overlap", AnalysisReport::Overlap(report))
}

fn derive(a: &DeriveArgs, s: &Settings, run: &mut Run) -> Result<(), CliError> {
    let target = s.get_opt::<usize>("target_dim", a.target_dim)?;
    let center = !s.switch("no_center", a.no_center, false)?;
    let name = s.get("name", a.name.clone(), "derived".to_owned())?;
    s.check_unused()?;
    if target == Some(0) {
        return Err(CliError::usage("--target-dim must be at least 1"));
    }
    if a.embedding.is_some() && target.is_none() && a.vocab.is_none() {
        return Err(CliError::usage(
            "--embedding input needs --target-dim and/or --vocab",
        ));
    }
    let filter = match &a.vocab {
        Some(p) => Some(read_word_list(run.open(p)?, p)?),
        None => None,
    };
    let mut summary = serde_json::Map::new();
    let mut table = if let Some(p) = &a.occurrences {
        let averaged = average_occurrences(run.open(p)?, filter.as_ref(), &name).map_err(lib(p))?;
        summary.insert(
            "occurrences".into(),
            json!(averaged.counts.values().sum::<usize>()),
        );
        averaged.table
    } else {
        let p = a.embedding.as_ref().expect("clap requires one input");
        let t = load_table(run, p, &mut BTreeSet::new())?.with_name(name.clone());
        match &filter {
            Some(f) => {
                let r = restrict(&t, f).map_err(lib(p))?;
                if !r.missing.is_empty() {
                    run.note(format!("{} requested words are not in {}", r.missing.len(), p.display()));
                }
                r.table
            }
            None => t,
        }
    };
    summary.insert("input_dim".into(), json!(table.dim()));
    if let Some(d) = target {
        if d > table.dim() {
            return Err(CliError::usage(format!(
                "--target-dim {d} exceeds the input dimension {}",
                table.dim()
            )));
        }
        let red = fit_svd(&table, d, center).map_err(|e| CliError::library("svd", e))?;
        summary.insert("reconstruction_error".into(), json!(red.reconstruction_error(&table).map_err(|e| CliError::library("svd", e))?));
        summary.insert("singular_values".into(), json!(red.singular_values));
        summary.insert("centered".into(), json!(center));
        table = apply_svd(&red, &table).map_err(|e| CliError::library("svd", e))?;
    }
    summary.insert("words".into(), json!(table.len()));
    summary.insert("output_dim".into(), json!(table.dim()));

    let mut bytes = Vec::new();
    let out = a.output.clone().unwrap_or_else(|| run.out_dir.join("derived.txt"));
    match EmbeddingFormat::from_path(&out) {
        EmbeddingFormat::Text => write_w2v_text(&table, &mut bytes),
        EmbeddingFormat::Binary => write_w2v_binary(&table, &mut bytes),
    }
    .map_err(|e| CliError::library("encoding output", e))?;
    run.write_path(&out, &bytes)?;
    run.write("derive_summary.json", &json_bytes(&summary))
}

fn intrinsic(a: &IntrinsicArgs, seed: u64, s: &Settings, run: &mut Run) -> Result<(), CliError> {
    let query = s.get("query", a.query.clone(), DEFAULT_QUERY.to_owned())?;
    let k = s.get("k", a.k, DEFAULT_K)?;
    let policy = s.get("fallback", parse_flag(&a.fallback, "fallback")?, FallbackPolicy::default())?;
    let perplexity = s.get("perplexity", a.perplexity, TsneConfig::default().perplexity)?;
    let iterations = s.get("iterations", a.iterations, TsneConfig::default().iterations)?;
    let sample = s.get("tsne_sample", a.tsne_sample, DEFAULT_TSNE_SAMPLE)?;
    let do_tsne = !s.switch("no_tsne", a.no_tsne, false)?;
    s.check_unused()?;
    if k == 0 {
        return Err(CliError::usage("-k must be at least 1"));
    }

    let mut taken = BTreeSet::new();
    let tables = a
        .embeddings
        .iter()
        .map(|p| load_table(run, p, &mut taken))
        .collect::<Result<Vec<_>, _>>()?;
    let dict = match &a.dictionary {
        Some(p) => read_dictionary(run.open(p)?).map_err(lib(p))?,
        None => NormalizationDictionary::new(),
    };
    let refs: Vec<&EmbeddingTable> = tables.iter().collect();

    let similarity = similarity_query_report(&refs, &query, k).map_err(|e| match e {
        Error::NotFound(_) => CliError::data(format!("query {query:?} is not in any embedding")),
        e => CliError::library("similarity", e),
    })?;
    let lists: Vec<(String, Vec<String>)> = similarity
        .lists
        .iter()
        .map(|(n, l)| (n.clone(), l.words().into_iter().map(str::to_owned).collect()))
        .collect();
    write_report(run, "similarity", AnalysisReport::Similarity(similarity))?;

    if lists.len() >= 2 {
        let agreement = agreement_matrix(&lists, &dict, policy).map_err(|e| CliError::library("agreement", e))?;
        write_report(run, "agreement", AnalysisReport::Agreement(agreement))?;
    } else {
        run.note("agreement skipped: fewer than two embeddings contain the query");
    }
    if tables.len() >= 2 {
        let correlation = correlation_matrix(&refs).map_err(|e| CliError::library("correlation", e))?;
        write_report(run, "correlation", AnalysisReport::Correlation(correlation))?;
    } else {
        run.note("correlation skipped: only one embedding given");
    }
    if do_tsne {
        project(&tables, perplexity, iterations, sample, seed, run)?;
    }
    Ok(())
}

/// t-SNE of every table over one sample of their shared vocabulary.
fn project(
    tables: &[EmbeddingTable],
    perplexity: f64,
    iterations: usize,
    sample: usize,
    seed: u64,
    run: &mut Run,
) -> Result<(), CliError> {
    let refs: Vec<&EmbeddingTable> = tables.iter().collect();
    let shared: Vec<String> = shared_vocabulary(&refs).into_iter().collect();
    let words: BTreeSet<String> = if shared.len() > sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        shared.choose_multiple(&mut rng, sample).cloned().collect()
    } else {
        shared.into_iter().collect()
    };
    let n = words.len();
    let ceiling = n.saturating_sub(1) as f64 / 3.0;
    if n < 10 || ceiling < 5.0 {
        run.note(format!("t-SNE skipped: {n} shared words are too few for perplexity ≥ 5"));
        return Ok(());
    }
    let perp = if perplexity > ceiling {
        run.note(format!(
            "t-SNE perplexity lowered from {perplexity} to {ceiling} for {n} words"
        ));
        ceiling
    } else {
        perplexity
    };
    let config = TsneConfig {
        perplexity: perp,
        iterations,
        seed,
        ..TsneConfig::default()
    };
    for t in tables {
        let sub = restrict(t, &words).map_err(|e| CliError::library("t-SNE", e))?.table;
        let p = tsne_with(&sub, &config).map_err(|e| CliError::library(format!("t-SNE of {}", t.name()), e))?;
        let title = format!("{} (perplexity {perp:.2}, {n} words)", t.name());
        run.write(&format!("tsne_{}.tsv", t.name()), p.to_tsv().as_bytes())?;
        run.write(&format!("tsne_{}.svg", t.name()), scatter_svg(&p, &title).as_bytes())?;
    }
    Ok(())
}

fn tagger_config(f: &TaggerFlags, seed: u64, s: &Settings) -> Result<TaggerConfig, CliError> {
    let d = TaggerConfig::default();
    let c = TaggerConfig {
        char_embedding_dim: s.get("char_embedding_dim", f.char_embedding_dim, d.char_embedding_dim)?,
        char_hidden: s.get("char_hidden", f.char_hidden, d.char_hidden)?,
        token_hidden: s.get("token_hidden", f.token_hidden, d.token_hidden)?,
        char_dropout: s.get("char_dropout", f.char_dropout, d.char_dropout)?,
        token_dropout: s.get("token_dropout", f.token_dropout, d.token_dropout)?,
        batch_size: s.get("batch_size", f.batch_size, d.batch_size)?,
        max_epochs: s.get("max_epochs", f.max_epochs, d.max_epochs)?,
        patience: s.get("patience", f.patience, d.patience)?,
        learning_rate: s.get("learning_rate", f.learning_rate, d.learning_rate)?,
        l2_strength: s.get("l2_strength", f.l2_strength, d.l2_strength)?,
        seed,
        decoder: s.get("decoder", parse_flag::<Decoder>(&f.decoder, "decoder")?, d.decoder)?,
    };
    c.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(c)
}

fn tag_list(tags: &BTreeSet<String>) -> String {
    tags.iter().cloned().collect::<Vec<_>>().join(", ")
}

fn train(a: &TrainArgs, seed: u64, s: &Settings, run: &mut Run) -> Result<(), CliError> {
    let config = tagger_config(&a.tagger, seed, s)?;
    let log_timing = s.switch("log_timing", a.log_timing, false)?;
    s.check_unused()?;
    let mut taken = BTreeSet::new();
    let train = load_corpus(run, &a.train, &mut taken)?;
    let dev = load_corpus(run, &a.dev, &mut taken)?;
    let test = load_corpus(run, &a.test, &mut taken)?;
    let embeddings = load_table(run, &a.embedding, &mut taken)?;
    for (split, c) in [("dev", &dev), ("test", &test)] {
        let unseen = unseen_tags(&train, c);
        if !unseen.is_empty() {
            return Err(CliError::data(format!(
                "tag-set mismatch: {split} has tags absent from train: {}\n  train: {}\n  {split}: {}",
                unseen.join(", "),
                tag_list(&train.tag_set()),
                tag_list(&c.tag_set()),
            )));
        }
    }
    let outcome = train_with(&train, &dev, &embeddings, &config, |r| {
        log::info!(
            "epoch {}: loss {:.4}, dev F1 {:.4} ({:.1}s)",
            r.epoch,
            r.train_loss,
            r.dev_f1,
            r.elapsed_seconds
        )
    })
    .map_err(|e| CliError::library("training", e))?;

    let log: String = outcome
        .log
        .iter()
        .map(|r| r.to_json_line(log_timing) + "\n")
        .collect();
    run.write("train_log.jsonl", log.as_bytes())?;
    let mut ckpt = Vec::new();
    save_checkpoint(&outcome.model, &mut ckpt).map_err(|e| CliError::library("checkpoint", e))?;
    run.write("checkpoint.bin", &ckpt)?;

    let predicted = outcome
        .model
        .predict_corpus(&test, &embeddings)
        .map_err(lib(&a.test))?;
    let report = evaluate_f1(&test, &predicted).map_err(lib(&a.test))?;
    let metrics = json!({
        "epochs_run": outcome.log.len(),
        "best_epoch": outcome.best_epoch,
        "stopped_early": outcome.stopped_early,
        "dev": outcome.best_dev,
        "test": report,
    });
    run.write("test_metrics.json", &json_bytes(&metrics))
}

fn eval(a: &EvalArgs, s: &Settings, run: &mut Run) -> Result<(), CliError> {
    s.check_unused()?;
    let model = load_checkpoint(run.open(&a.checkpoint)?).map_err(lib(&a.checkpoint))?;
    let mut taken = BTreeSet::new();
    let test = load_corpus(run, &a.test, &mut taken)?;
    let embeddings = load_table(run, &a.embedding, &mut taken)?;
    let known: BTreeSet<String> = model.tags.iter().cloned().collect();
    let unseen: BTreeSet<String> = test.tag_set().difference(&known).cloned().collect();
    if !unseen.is_empty() {
        return Err(CliError::data(format!(
            "tag-set mismatch: test has tags unknown to the model: {}\n  model: {}\n  test: {}",
            tag_list(&unseen),
            tag_list(&known),
            tag_list(&test.tag_set()),
        )));
    }
    if embeddings.dim() != model.word_dim {
        return Err(CliError::data(format!(
            "{} has dimension {}, the checkpoint expects {}",
            a.embedding.display(),
            embeddings.dim(),
            model.word_dim
        )));
    }
    let predicted = model.predict_corpus(&test, &embeddings).map_err(lib(&a.test))?;
    let report = evaluate_f1(&test, &predicted).map_err(lib(&a.test))?;
    run.write("test_metrics.json", &json_bytes(&json!({ "test": report })))?;

    let sentences = test
        .sentences()
        .iter()
        .zip(&predicted)
        .map(|(s, tags)| {
            Sentence::new(
                s.surfaces()
                    .zip(tags)
                    .map(|(w, t)| Token::new(w, t.as_str()))
                    .collect::<crate::Result<_>>()?,
            )
        })
        .collect::<crate::Result<Vec<_>>>()
        .and_then(|s| AnnotatedCorpus::new("predictions", s))
        .map_err(|e| CliError::library("predictions", e))?;
    let mut conll = Vec::new();
    write_conll(&sentences, &mut conll).map_err(|e| CliError::library("predictions", e))?;
    run.write("predictions.conll", &conll)
}

fn query(a: &QueryArgs, s: &Settings, run: &mut Run) -> Result<(), CliError> {
    let k = s.get("k", a.k, DEFAULT_K)?;
    s.check_unused()?;
    let table = load_table(run, &a.embedding, &mut BTreeSet::new())?;
    let list = top_k(&table, &a.word, k).map_err(|e| match e {
        Error::NotFound(w) => CliError::data(format!("{w:?} is not in {}", a.embedding.display())),
        e => CliError::library(a.embedding.display(), e),
    })?;
    for n in &list.neighbors {
        println!("{}\t{:.6}", n.word, n.similarity);
    }
    run.write("query.json", &json_bytes(&list))
}
