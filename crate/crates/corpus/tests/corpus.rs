use jnrf_corpus::*;
use proptest::prelude::*;

fn corpus(seed: u64, n_docs: usize, range: (usize, usize)) -> SynthCorpus {
    synth_corpus(&SynthConfig {
        seed,
        n_docs,
        length_range: range,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    corpus(11, 4, (100, 600)).write(a.path()).unwrap();
    corpus(11, 4, (100, 600)).write(b.path()).unwrap();
    assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()));
    let c = tempfile::tempdir().unwrap();
    corpus(12, 4, (100, 600)).write(c.path()).unwrap();
    assert_ne!(dir_bytes(a.path()), dir_bytes(c.path()));
}

#[test]
fn wide_length_range_parses_back() {
    let generated = corpus(5, 3, (224, 13990));
    let dir = tempfile::tempdir().unwrap();
    generated.write(dir.path()).unwrap();
    let vocab = Vocab::load(dir.path().join("vocab.txt")).unwrap();
    let loaded = load_corpus(dir.path(), &vocab).unwrap();
    assert_eq!(loaded.len(), 3);
    for (doc, original) in loaded.iter().zip(&generated.documents) {
        assert!((224..=13990).contains(&doc.len()), "{}", doc.len());
        assert_eq!(doc, original);
    }
}

#[test]
fn concentrated_profile_stays_in_sentence() {
    let generated = synth_corpus(&SynthConfig {
        seed: 2,
        n_docs: 6,
        length_range: (300, 900),
        relation_profile: vec![(0, 1.0)],
        ..SynthConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    generated.write(dir.path()).unwrap();
    let loaded = load_corpus(dir.path(), &generated.vocab).unwrap();
    let (mut same, mut total) = (0, 0);
    for d in &loaded {
        for r in &d.relations {
            total += 1;
            if d.sentence_of_entity(r.arg1) == d.sentence_of_entity(r.arg2) {
                same += 1;
            }
        }
    }
    assert!(total > 50);
    assert!(same as f64 >= 0.95 * total as f64, "{same}/{total}");
}

#[test]
fn profile_distances_are_realised() {
    let generated = synth_corpus(&SynthConfig {
        seed: 4,
        n_docs: 6,
        length_range: (400, 800),
        relation_profile: vec![(0, 0.5), (-1, 0.25), (2, 0.25)],
        ..SynthConfig::default()
    })
    .unwrap();
    let mut seen = std::collections::BTreeMap::new();
    for d in &generated.documents {
        for r in &d.relations {
            let dist = d.sentence_of_entity(r.arg2) as i64 - d.sentence_of_entity(r.arg1) as i64;
            *seen.entry(dist).or_insert(0) += 1;
        }
    }
    assert_eq!(seen.keys().copied().collect::<Vec<_>>(), [-1, 0, 2]);
}

#[test]
fn generated_structures_respect_schema_and_grammar() {
    for d in &corpus(9, 5, (200, 1500)).documents {
        for r in &d.relations {
            let (a, drug) = d.relation_args(r);
            assert_eq!(a.etype, r.rtype.attribute());
            assert_eq!(drug.etype, EntityType::Drug);
        }
        let mut prev = Label::O;
        for &l in &d.bio_labels {
            let l = Label::from_id(l).unwrap();
            if let Label::I(t) = l {
                assert!(matches!(prev, Label::B(p) | Label::I(p) if p == t));
            }
            prev = l;
        }
        for w in d.tokens.windows(2) {
            assert!(w[0].end <= w[1].start);
        }
        assert_eq!(d.sentence_starts[0], 0);
        assert!(d.entity_tokens.iter().all(Option::is_some));
    }
}

#[test]
fn stats_match_generated_density() {
    let c = synth_corpus(&SynthConfig {
        seed: 1,
        n_docs: 10,
        length_range: (500, 1500),
        entity_density: 0.2,
        ..SynthConfig::default()
    })
    .unwrap();
    let inside: usize = c.documents.iter().map(|d| d.bio_labels.iter().filter(|&&l| l > 0).count()).sum();
    let total: usize = c.documents.iter().map(Document::len).sum();
    let density = inside as f64 / total as f64;
    assert!((density - 0.2).abs() < 0.02, "{density}");
    let stats = corpus_stats(&c.documents).unwrap();
    let entities: usize = c.documents.iter().map(|d| d.entities.len()).sum();
    assert_eq!(stats.entities.iter().map(|e| e.1).sum::<usize>(), entities);
}

fn vocab_strategy() -> impl Strategy<Value = Vocab> {
    prop::collection::btree_set("(##)?[a-c]{1,3}", 0..12).prop_map(|set| {
        let mut v = vec![UNK.to_string()];
        v.extend(set);
        Vocab::new(v).unwrap()
    })
}

proptest! {
    #[test]
    fn tokens_cover_non_whitespace(text in "[a-c .,\n\t]{0,60}", vocab in vocab_strategy()) {
        let chars: Vec<char> = text.chars().collect();
        let toks = wordpiece_tokenize(&text, &vocab);
        let mut covered = vec![false; chars.len()];
        let mut last_end = 0;
        let mut rebuilt = String::new();
        for t in &toks {
            prop_assert!(t.start < t.end && t.start >= last_end);
            last_end = t.end;
            for c in &mut covered[t.start..t.end] {
                *c = true;
            }
            let slice: String = chars[t.start..t.end].iter().collect();
            if t.surface == UNK {
                prop_assert_eq!(t.id, vocab.unk_id());
            } else {
                prop_assert_eq!(t.surface.trim_start_matches("##"), slice.as_str());
                prop_assert_eq!(vocab.id(&t.surface), Some(t.id));
            }
            rebuilt.push_str(&slice);
        }
        for (c, cov) in chars.iter().zip(&covered) {
            prop_assert_eq!(!c.is_whitespace(), *cov);
        }
        let expected: String = chars.iter().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(rebuilt, expected);
    }

    #[test]
    fn brat_round_trip(seed in 0u64..1000) {
        let c = corpus(seed, 1, (16, 400));
        let d = &c.documents[0];
        let mut parsed = parse_brat(&d.doc_id, &d.text, &to_ann(d)).unwrap();
        parsed.prepare(&c.vocab).unwrap();
        prop_assert_eq!(&parsed, d);
    }
}
