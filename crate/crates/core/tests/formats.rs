mod common;

use std::collections::{BTreeSet, HashSet};

use common::*;
use embeval::corpus::{
    content_vocabulary, overlap_report, read_conll, validate_bio, write_conll, AnnotatedCorpus, Sentence, Token,
};
use embeval::embed_store::{
    cosine, read_w2v_binary, read_w2v_text, restrict, top_k, write_w2v_binary, write_w2v_text, EmbeddingTable,
};
use proptest::prelude::*;
use rand::Rng;

fn word() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9_\\-.,éλ水]{1,8}"
}

fn tag() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("O".to_string()),
        "[BI]-[A-Z]{1,5}".prop_map(|s| s),
    ]
}

fn corpus() -> impl Strategy<Value = AnnotatedCorpus> {
    prop::collection::vec(prop::collection::vec((word(), tag()), 1..8), 1..6).prop_map(|ss| {
        AnnotatedCorpus::new(
            "c",
            ss.into_iter()
                .map(|s| Sentence::new(s.into_iter().map(|(w, t)| Token::new(w, t).unwrap()).collect()).unwrap())
                .collect(),
        )
        .unwrap()
    })
}

fn table(f32_exact: bool) -> impl Strategy<Value = EmbeddingTable> {
    (1usize..6).prop_flat_map(move |d| {
        prop::collection::btree_map(word(), prop::collection::vec(-1e6f64..1e6, d), 1..12).prop_map(move |m| {
            EmbeddingTable::from_rows(
                "t",
                m.into_iter().map(|(w, v)| {
                    let v: Vec<f64> = if f32_exact { v.iter().map(|x| *x as f32 as f64).collect() } else { v };
                    (w, v)
                }),
            )
            .unwrap()
        })
    })
}

proptest! {
    #[test]
    fn conll_round_trip(c in corpus()) {
        let mut buf = Vec::new();
        write_conll(&c, &mut buf).unwrap();
        prop_assert_eq!(read_conll(&buf[..], "c").unwrap(), c);
    }

    #[test]
    fn conll_reader_accepts_crlf(c in corpus()) {
        let mut buf = Vec::new();
        write_conll(&c, &mut buf).unwrap();
        let crlf = String::from_utf8(buf).unwrap().replace('\n', "\r\n");
        prop_assert_eq!(read_conll(crlf.as_bytes(), "c").unwrap(), c);
    }

    #[test]
    fn text_round_trip(t in table(false)) {
        let mut buf = Vec::new();
        write_w2v_text(&t, &mut buf).unwrap();
        prop_assert_eq!(read_w2v_text(&buf[..], "t").unwrap(), t);
    }

    #[test]
    fn binary_round_trip(t in table(true)) {
        let mut buf = Vec::new();
        write_w2v_binary(&t, &mut buf).unwrap();
        prop_assert_eq!(read_w2v_binary(&buf[..], "t").unwrap(), t);
    }

    #[test]
    fn binary_agrees_with_text_within_f32(t in table(false)) {
        let mut bin = Vec::new();
        write_w2v_binary(&t, &mut bin).unwrap();
        let b = read_w2v_binary(&bin[..], "t").unwrap();
        prop_assert_eq!(b.vocab(), t.vocab());
        for (x, y) in t.vectors().as_slice().iter().zip(b.vectors().as_slice()) {
            prop_assert!((x - y).abs() <= x.abs() * f32::EPSILON as f64);
        }
    }

    #[test]
    fn content_vocabulary_avoids_stopwords(c in corpus(), stops in prop::collection::hash_set("[a-z]{1,3}", 0..10)) {
        let v = content_vocabulary(&c, &stops);
        prop_assert!(v.iter().all(|w| !stops.contains(w)));
        let oracle: BTreeSet<String> = c
            .sentences()
            .iter()
            .flat_map(|s| s.surfaces())
            .filter(|w| w.chars().any(char::is_alphabetic))
            .map(str::to_lowercase)
            .filter(|w| !stops.contains(w))
            .collect();
        prop_assert_eq!(v, oracle);
    }

    #[test]
    fn overlap_matrix_is_symmetric_with_sizes_on_diagonal(
        sets in prop::collection::vec(prop::collection::btree_set("[a-f]{1,2}", 0..20), 2..5)
    ) {
        let named: Vec<(String, BTreeSet<String>)> =
            sets.iter().enumerate().map(|(i, s)| (format!("v{i}"), s.clone())).collect();
        let r = overlap_report(&named).unwrap();
        for i in 0..sets.len() {
            prop_assert_eq!(r.pairwise_counts[i][i], sets[i].len());
            prop_assert_eq!(r.sizes[i], sets[i].len());
            for j in 0..sets.len() {
                let brute = sets[i].iter().filter(|w| sets[j].contains(*w)).count();
                prop_assert_eq!(r.pairwise_counts[i][j], brute);
                prop_assert_eq!(r.pairwise_counts[i][j], r.pairwise_counts[j][i]);
            }
        }
    }

    #[test]
    fn cosine_is_symmetric_scale_invariant_and_bounded(
        u in prop::collection::vec(-100.0f64..100.0, 4),
        v in prop::collection::vec(-100.0f64..100.0, 4),
        alpha in 1e-3f64..1e3,
    ) {
        prop_assume!(u.iter().any(|x| x.abs() > 1e-3) && v.iter().any(|x| x.abs() > 1e-3));
        let c = cosine(&u, &v).unwrap();
        prop_assert!((c - cosine(&v, &u).unwrap()).abs() <= 1e-15);
        prop_assert!((cosine(&u, &u).unwrap() - 1.0).abs() <= 1e-12);
        let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
        prop_assert!((cosine(&scaled, &v).unwrap() - c).abs() <= 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
        prop_assert!((c - naive_cosine(&u, &v)).abs() <= 1e-12);
    }
}

#[test]
fn cosine_hand_computed() {
    let expect = 32.0 / (14f64.sqrt() * 77f64.sqrt());
    assert!((cosine(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap() - expect).abs() < 1e-12);
    assert!(cosine(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
}

fn brute_top_k(t: &EmbeddingTable, q: &str, k: usize) -> Vec<(String, f64)> {
    let qv = t.get(q).unwrap();
    let mut all: Vec<(String, f64)> = t
        .iter()
        .filter(|(w, _)| *w != q)
        .map(|(w, v)| (w.to_string(), naive_cosine(qv, v)))
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

#[test]
fn top_k_matches_exhaustive_sort_and_ignores_global_scale() {
    let mut r = rng(20);
    for round in 0..20 {
        let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..6).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let t = table_from("t", &rows);
        let q = format!("w{:03}", round);
        let got = top_k(&t, &q, 10).unwrap();
        let want = brute_top_k(&t, &q, 10);
        assert_eq!(got.words(), want.iter().map(|p| p.0.as_str()).collect::<Vec<_>>());
        for (n, (_, s)) in got.neighbors.iter().zip(&want) {
            assert!((n.similarity - s).abs() < 1e-12);
        }
        let scaled = t.map_vectors(|v| v.iter().map(|x| x * 7.5).collect()).unwrap();
        assert_eq!(top_k(&scaled, &q, 10).unwrap().words(), got.words());
    }
}

#[test]
fn top_k_ties_and_degenerate_k() {
    let t = EmbeddingTable::from_rows(
        "t",
        [("c", vec![0.0, 0.0, 1.0]), ("a", vec![1.0, 0.0, 0.0]), ("b", vec![0.0, 1.0, 0.0])],
    )
    .unwrap();
    let l = top_k(&t, "a", 2).unwrap();
    assert_eq!(l.words(), ["b", "c"]);
    assert!(l.neighbors.iter().all(|n| n.similarity == 0.0));
    assert_eq!(top_k(&t, "a", 50).unwrap().neighbors.len(), 2);
    assert!(top_k(&t, "zzz", 2).is_err());
}

#[test]
fn restrict_matches_set_intersection() {
    let mut r = rng(21);
    for _ in 0..30 {
        let rows: Vec<Vec<f64>> = (0..20).map(|_| vec![r.random_range(-1.0..1.0)]).collect();
        let t = table_from("t", &rows);
        let want: BTreeSet<String> = (0..30).filter(|_| r.random_bool(0.4)).map(|i| format!("w{i:03}")).collect();
        let inter: BTreeSet<String> = want.iter().filter(|w| t.contains(w)).cloned().collect();
        match restrict(&t, &want) {
            Ok(res) => {
                assert_eq!(res.table.vocab().iter().cloned().collect::<BTreeSet<_>>(), inter);
                for w in &inter {
                    assert_eq!(res.table.get(w), t.get(w));
                }
                let missing: BTreeSet<String> = want.difference(&inter).cloned().collect();
                assert_eq!(res.missing, missing);
            }
            Err(_) => assert!(inter.is_empty()),
        }
    }
    let t = table_from("t", &[vec![1.0], vec![2.0]]);
    let own: BTreeSet<String> = t.vocab().iter().cloned().collect();
    assert_eq!(restrict(&t, &own).unwrap().table, t);
}

#[test]
fn text_reader_diagnostics() {
    assert!(read_w2v_text(&b"5 3\na 1 0 0\nb 0 1 0\n"[..], "t").is_err());
    let err = read_w2v_text(&b"2 2\na 1 0\na 0 1\n"[..], "t").unwrap_err();
    assert!(err.to_string().contains('a'), "{err}");
    let err = read_w2v_text(&b"1 2\nfoo 1 bar\n"[..], "t").unwrap_err();
    assert!(err.to_string().contains("foo"), "{err}");
    let t = read_w2v_text(&b"2 3\na 1 0 0\nb 0 1 0\n"[..], "t").unwrap();
    let mut bin = Vec::new();
    write_w2v_binary(&t, &mut bin).unwrap();
    assert_eq!(read_w2v_binary(&bin[..], "t").unwrap(), t);
    let cut = &bin[..bin.len() - 5];
    let err = read_w2v_binary(cut, "t").unwrap_err();
    assert!(err.to_string().contains("bytes"), "{err}");
}

#[test]
fn conll_reader_diagnostics() {
    let c = read_conll(&b"aspirin\tB-CHEM\n.\tO\n\n"[..], "c").unwrap();
    assert_eq!((c.len(), c.token_count()), (1, 2));
    let err = read_conll(&b"a\tO\nfoo  bar baz\n"[..], "c").unwrap_err();
    assert!(err.to_string().contains('2'), "{err}");
    assert!(read_conll(&b"a\tX-CHEM\n"[..], "c").is_err());
    assert!(read_conll(&b""[..], "c").is_err());
    let no_trailing = read_conll(&b"a\tO\n\nb\tO"[..], "c").unwrap();
    assert_eq!(no_trailing.len(), 2);
}

#[test]
fn bio_violations_are_reported_not_repaired() {
    let c = corpus_from("c", &[vec![("a", "O"), ("b", "I-CHEM"), ("c", "B-X"), ("d", "I-Y")]]);
    assert_eq!(validate_bio(&c).len(), 2);
    let mut buf = Vec::new();
    write_conll(&c, &mut buf).unwrap();
    assert_eq!(read_conll(&buf[..], "c").unwrap(), c);
}

#[test]
fn content_vocabulary_example() {
    let c = corpus_from("c", &[vec![("The", "O"), ("ibuprofen", "B-CHEM"), (".", "O"), ("42", "O")]]);
    let stops: HashSet<String> = ["the".to_string()].into();
    assert_eq!(content_vocabulary(&c, &stops), BTreeSet::from(["ibuprofen".to_string()]));
    assert_eq!(content_vocabulary(&c, &HashSet::new()).len(), 2);
}
