mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use embeval::corpus::write_conll;
use embeval::embed_store::{read_w2v_text, write_w2v_binary, write_w2v_text, EmbeddingTable};
use embeval::report::AnalysisReport;
use embeval::synthetic::{generate, SyntheticConfig};
use rand::Rng;
use serde_json::Value;
use tempfile::TempDir;

fn embeval(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embeval"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_table(dir: &Path, file: &str, t: &EmbeddingTable) -> PathBuf {
    let p = dir.join(file);
    let mut buf = Vec::new();
    if file.ends_with(".bin") {
        write_w2v_binary(t, &mut buf).unwrap();
    } else {
        write_w2v_text(t, &mut buf).unwrap();
    }
    fs::write(&p, buf).unwrap();
    p
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn words_table(name: &str, words: &[&str], seed: u64) -> EmbeddingTable {
    let mut r = rng(seed);
    EmbeddingTable::from_rows(
        name,
        words.iter().map(|w| (w.to_string(), (0..4).map(|_| r.random_range(-1.0..1.0)).collect::<Vec<f64>>())),
    )
    .unwrap()
}

const DRUGS: [&str; 14] = [
    "ibuprofen", "naproxen", "aspirin", "caffeine", "ethanol", "methanol", "acetone", "morphine", "codeine",
    "heroin", "toluene", "benzene", "phenol", "xylene",
];

#[test]
fn missing_file_is_a_usage_error_naming_the_path() {
    let dir = TempDir::new().unwrap();
    let o = embeval(dir.path(), &["query", "--embedding", "nope.txt", "--word", "x"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nope.txt"), "{}", stderr(&o));
    assert_eq!(code(&embeval(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&embeval(dir.path(), &["--help"])), 0);
}

#[test]
fn malformed_input_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.txt"), "2 3\na 1 2 x\n").unwrap();
    let o = embeval(dir.path(), &["query", "--embedding", "bad.txt", "--word", "a"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    fs::write(dir.path().join("bad.bin"), b"\xff\xff\xff").unwrap();
    let o = embeval(dir.path(), &["query", "--embedding", "bad.bin", "--word", "a"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn query_prints_neighbours_and_writes_manifest() {
    let dir = TempDir::new().unwrap();
    let t = words_table("t", &DRUGS, 1);
    write_table(dir.path(), "t.bin", &t);
    let o = embeval(dir.path(), &["--out-dir", "out", "query", "--embedding", "t.bin", "--word", "ibuprofen", "-k", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 3);
    let m = json(&dir.path().join("out/manifest.json"));
    assert_eq!(m["subcommand"], "query");
    assert_eq!(m["seed"], 0);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let o = embeval(dir.path(), &["--out-dir", "out", "query", "--embedding", "t.bin", "--word", "zzz"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn overlap_counts_match_library() {
    let dir = TempDir::new().unwrap();
    write_table(dir.path(), "a.txt", &words_table("a", &DRUGS[..8], 1));
    write_table(dir.path(), "b.txt", &words_table("b", &DRUGS[4..], 2));
    fs::write(dir.path().join("c.conll"), "Aspirin\tB-CHEM\nand\tO\nbenzene\tB-CHEM\n.\tO\n\n").unwrap();
    fs::write(dir.path().join("stop.txt"), "and\n").unwrap();
    let o = embeval(
        dir.path(),
        &["--out-dir", "out", "overlap", "--embedding", "a.txt", "--embedding", "b.txt", "--corpus", "c.conll", "--stopwords", "stop.txt"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let AnalysisReport::Overlap(r) = serde_json::from_value(json(&dir.path().join("out/overlap.json"))).unwrap() else {
        panic!("wrong report kind");
    };
    assert_eq!(r.names, ["a", "b", "c"]);
    assert_eq!(r.sizes, [8, 10, 2]);
    assert_eq!(r.overlap("a", "b"), Some(4));
    assert_eq!(r.overlap("a", "c"), Some(1));
    assert_eq!(r.overlap("b", "c"), Some(1));
    assert!(dir.path().join("out/overlap.txt").exists());
    let o = embeval(dir.path(), &["overlap", "--embedding", "a.txt"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn derive_reduces_420_to_200_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let mut r = rng(3);
    let rows: Vec<Vec<f64>> = (0..250).map(|_| (0..420).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    write_table(dir.path(), "big.txt", &table_from("big", &rows));
    let o = embeval(dir.path(), &["--out-dir", "out", "derive", "--embedding", "big.txt", "--target-dim", "200"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = read_w2v_text(fs::read(dir.path().join("out/derived.txt")).unwrap().as_slice(), "d").unwrap();
    assert_eq!((out.len(), out.dim()), (250, 200));
    let lib = embeval::derive::apply_svd(
        &embeval::derive::fit_svd(&table_from("big", &rows), 200, true).unwrap(),
        &table_from("big", &rows),
    )
    .unwrap();
    for (a, b) in out.vectors().as_slice().iter().zip(lib.vectors().as_slice()) {
        assert_eq!(a, b);
    }
    let summary = json(&dir.path().join("out/derive_summary.json"));
    assert!(summary["reconstruction_error"].as_f64().unwrap() > 0.0);

    let o = embeval(dir.path(), &["derive", "--embedding", "big.txt", "--target-dim", "500"]);
    assert_eq!(code(&o), 2);
    let o = embeval(dir.path(), &["derive", "--embedding", "big.txt", "--occurrences", "x.tsv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn derive_averages_occurrences() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("occ.tsv"), "X\t1\t0\nx\t0\t1\n").unwrap();
    let o = embeval(dir.path(), &["--out-dir", "out", "derive", "--occurrences", "occ.tsv", "--output", "avg.bin"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = embeval::embed_store::read_w2v_binary(fs::read(dir.path().join("avg.bin")).unwrap().as_slice(), "a").unwrap();
    assert_eq!(t.len(), 1);
    assert_eq!(t.vectors().row(0), [0.5, 0.5]);
}

#[test]
fn intrinsic_identical_tables_agree_fully_and_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let mut words: Vec<String> = DRUGS.iter().map(|w| w.to_string()).collect();
    words.extend((0..20).map(|i| format!("extra{i}")));
    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
    let t = words_table("t", &refs, 4);
    write_table(dir.path(), "one.txt", &t);
    write_table(dir.path(), "two.txt", &t);
    let args = |out: &'static str| {
        vec!["--seed", "5", "--out-dir", out, "intrinsic", "--embedding", "one.txt", "--embedding", "two.txt", "-k", "4", "--iterations", "300"]
    };
    let o = embeval(dir.path(), &args("r1"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&embeval(dir.path(), &args("r2"))), 0);
    let agreement = json(&dir.path().join("r1/agreement.json"));
    assert_eq!(agreement["jaccard"][0][1], 1.0);
    let corr = json(&dir.path().join("r1/correlation.json"));
    assert!((corr["pearson"][0][1].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let mut files: Vec<String> = fs::read_dir(dir.path().join("r1"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert!(files.contains(&"tsne_one.svg".to_string()) && files.contains(&"tsne_two.tsv".to_string()));
    for f in &files {
        assert_eq!(
            fs::read(dir.path().join("r1").join(f)).unwrap(),
            fs::read(dir.path().join("r2").join(f)).unwrap(),
            "{f} differs"
        );
    }
    let o = embeval(dir.path(), &["--out-dir", "r3", "intrinsic", "--embedding", "one.txt", "--query", "absent"]);
    assert_eq!(code(&o), 3);
}

struct TrainFiles {
    dir: TempDir,
}

fn train_files() -> TrainFiles {
    let dir = TempDir::new().unwrap();
    let data = generate(&SyntheticConfig { train_sentences: 20, dev_sentences: 5, test_sentences: 5, dim: 6, ..SyntheticConfig::default() })
        .unwrap();
    for (name, c) in [("train.conll", &data.train), ("dev.conll", &data.dev), ("test.conll", &data.test)] {
        let mut buf = Vec::new();
        write_conll(c, &mut buf).unwrap();
        fs::write(dir.path().join(name), buf).unwrap();
    }
    write_table(dir.path(), "emb.txt", &data.embeddings);
    fs::write(
        dir.path().join("tiny.conf"),
        "# small network\nchar-embedding-dim = 3\nchar_hidden = 3\ntoken-hidden = 4\nbatch_size = 4\nmax_epochs = 2\n",
    )
    .unwrap();
    TrainFiles { dir }
}

const TRAIN: [&str; 8] = ["--train", "train.conll", "--dev", "dev.conll", "--test", "test.conll", "--embedding", "emb.txt"];

#[test]
fn train_then_eval() {
    let f = train_files();
    let d = f.dir.path();
    let mut args = vec!["--config", "tiny.conf", "--out-dir", "a", "train"];
    args.extend(TRAIN);
    let o = embeval(d, &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    args[3] = "b";
    assert_eq!(code(&embeval(d, &args)), 0);
    let log = fs::read(d.join("a/train_log.jsonl")).unwrap();
    assert_eq!(log, fs::read(d.join("b/train_log.jsonl")).unwrap());
    assert_eq!(String::from_utf8(log).unwrap().lines().count(), 2);
    let metrics = json(&d.join("a/test_metrics.json"));
    assert_eq!(metrics["epochs_run"], 2);
    let m = json(&d.join("a/manifest.json"));
    assert_eq!(m["config"]["token_hidden"], 4);

    let o = embeval(d, &["--out-dir", "e", "eval", "--checkpoint", "a/checkpoint.bin", "--test", "test.conll", "--embedding", "emb.txt"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let eval = json(&d.join("e/test_metrics.json"));
    assert_eq!(eval["test"], metrics["test"]);
    assert!(d.join("e/predictions.conll").exists());
}

#[test]
fn flags_override_the_config_file() {
    let f = train_files();
    let d = f.dir.path();
    let mut args = vec!["--config", "tiny.conf", "--out-dir", "z", "train", "--max-epochs", "0", "--token-hidden", "5"];
    args.extend(TRAIN);
    let o = embeval(d, &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read_to_string(d.join("z/train_log.jsonl")).unwrap(), "");
    assert!(d.join("z/checkpoint.bin").exists());
    let m = json(&d.join("z/manifest.json"));
    assert_eq!(m["config"]["max_epochs"], 0);
    assert_eq!(m["config"]["token_hidden"], 5);
    assert_eq!(m["config"]["char_hidden"], 3);
    assert_eq!(m["config"]["patience"], 5);
}

#[test]
fn bad_config_and_tag_mismatch() {
    let f = train_files();
    let d = f.dir.path();
    fs::write(d.join("typo.conf"), "max_epoch = 3\n").unwrap();
    let mut args = vec!["--config", "typo.conf", "train"];
    args.extend(TRAIN);
    assert_eq!(code(&embeval(d, &args)), 2);

    fs::write(d.join("dev2.conll"), "aspirin\tB-DRUG\n\n").unwrap();
    let o = embeval(
        d,
        &["--config", "tiny.conf", "train", "--train", "train.conll", "--dev", "dev2.conll", "--test", "test.conll", "--embedding", "emb.txt"],
    );
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("B-DRUG"), "{}", stderr(&o));
}
