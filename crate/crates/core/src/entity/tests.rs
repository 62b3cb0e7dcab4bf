use std::collections::HashSet;

use rand::Rng;

use super::*;
use crate::corpus::{generate_corpus, CorpusSpec, DuplicationDirective, PoolPartition, PoolSizes, Record};
use crate::rng::seeded_rng;

fn record(id: u64, date: &str, sender: &str, recipient: &str, content: &str) -> Record {
    Record::new(
        id,
        vec![
            ("Date".into(), date.into()),
            ("Sender".into(), sender.into()),
            ("Recipient".into(), recipient.into()),
            ("Content".into(), content.into()),
        ],
    )
    .unwrap()
}

/// Brute-force oracle: checks every C(m, n) subset against every record by
/// direct scan, with no index.
fn brute_force_sets(corpus: &[Record], record: &Record, n: usize) -> Vec<Vec<(String, String)>> {
    let mut attrs: Vec<(String, String)> = record.attrs.clone();
    attrs.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = Vec::new();
    let m = attrs.len();
    for bits in 0u32..(1 << m) {
        if bits.count_ones() as usize != n {
            continue;
        }
        let members: Vec<(String, String)> = (0..m)
            .filter(|i| bits & (1 << i) != 0)
            .map(|i| attrs[i].clone())
            .collect();
        let matches = corpus
            .iter()
            .filter(|r| members.iter().all(|(a, e)| r.get(a) == Some(e.as_str())))
            .count();
        if matches == 1 {
            out.push(members);
        }
    }
    out.sort();
    out
}

#[test]
fn two_disjoint_records_make_every_singleton_identifying() {
    let corpus = vec![
        record(0, "2001-01-01", "a@x.com", "b@y.com", "alpha"),
        record(1, "2001-01-02", "c@x.com", "d@y.com", "beta"),
    ];
    let sets = find_identifying_sets(&corpus, &corpus[0], 1).unwrap();
    assert_eq!(sets.len(), 4);
    for s in &sets {
        assert!(s.verify(&corpus));
    }
}

#[test]
fn shared_attributes_are_not_identifying() {
    // Identical except Content: only the Content singleton identifies.
    let corpus = vec![
        record(0, "2001-01-01", "a@x.com", "b@y.com", "alpha"),
        record(1, "2001-01-01", "a@x.com", "b@y.com", "beta"),
    ];
    let sets = find_identifying_sets(&corpus, &corpus[0], 1).unwrap();
    assert_eq!(sets.len(), 1);
    assert_eq!(sets[0].members[0].0, "Content");
}

#[test]
fn n_out_of_range_is_an_error() {
    let corpus = vec![record(0, "d", "s", "r", "c")];
    assert!(find_identifying_sets(&corpus, &corpus[0], 0).is_err());
    assert!(find_identifying_sets(&corpus, &corpus[0], 5).is_err());
}

#[test]
fn search_matches_brute_force_on_random_corpora() {
    let mut rng = seeded_rng(2024);
    for trial in 0..50 {
        let n_records = rng.random_range(2..=200);
        let m = rng.random_range(2..=6usize);
        // Small value pools force plenty of collisions.
        let pool = rng.random_range(2..=6u32);
        let corpus: Vec<Record> = (0..n_records)
            .map(|id| {
                Record::new(
                    id,
                    (0..m)
                        .map(|a| {
                            (
                                format!("attr{a}"),
                                format!("v{}", rng.random_range(0..pool)),
                            )
                        })
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let n = rng.random_range(1..=m);
        for record in corpus.iter().take(10) {
            let found: Vec<Vec<(String, String)>> = find_identifying_sets(&corpus, record, n)
                .unwrap()
                .into_iter()
                .map(|s| s.members)
                .collect();
            let mut found_sorted = found.clone();
            found_sorted.sort();
            let expected = brute_force_sets(&corpus, record, n);
            assert_eq!(found_sorted, expected, "trial {trial}, record {}", record.id);
        }
    }
}

#[test]
fn sets_come_out_in_lexicographic_attribute_order() {
    let corpus = vec![
        record(0, "2001-01-01", "a@x.com", "b@y.com", "alpha"),
        record(1, "2001-01-02", "c@x.com", "d@y.com", "beta"),
    ];
    let sets = find_identifying_sets(&corpus, &corpus[0], 2).unwrap();
    let names: Vec<Vec<&str>> = sets
        .iter()
        .map(|s| s.members.iter().map(|(a, _)| a.as_str()).collect())
        .collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert_eq!(names[0], vec!["Content", "Date"]);
}

#[test]
fn eval_example_renders_members_in_schema_order_with_cue() {
    let r = record(3, "2001-05-01", "a@x.com", "b@y.com", "some words");
    let ident = IdentifyingSet {
        record_id: 3,
        members: vec![
            ("Date".into(), "2001-05-01".into()),
            ("Sender".into(), "a@x.com".into()),
        ],
    };
    let ex = make_eval_example(&r, &ident, "Recipient").unwrap().unwrap();
    assert_eq!(ex.prompt_text, "Date: 2001-05-01\nSender: a@x.com\nRecipient:");
    assert_eq!(ex.expected_entity, "b@y.com");
    assert_eq!(ex.train_entity, "b@y.com");
    assert_eq!(ex.provenance, Provenance::Real);
}

#[test]
fn target_inside_ident_is_a_contract_error() {
    let r = record(0, "d1", "s1", "r1", "c1");
    let ident = IdentifyingSet {
        record_id: 0,
        members: vec![("Recipient".into(), "r1".into())],
    };
    assert!(make_eval_example(&r, &ident, "Recipient").is_err());
}

#[test]
fn exclusion_rule_fires_when_prompt_contains_target() {
    // Content quotes the recipient, so a Content-bearing ident must skip.
    let r = record(0, "2001-01-01", "a@x.com", "b@y.com", "forward to b@y.com please");
    let ident = IdentifyingSet {
        record_id: 0,
        members: vec![("Content".into(), "forward to b@y.com please".into())],
    };
    assert_eq!(make_eval_example(&r, &ident, "Recipient").unwrap(), None);
}

#[test]
fn skip_count_matches_direct_scan() {
    // Mix of clean records and records whose content leaks the recipient.
    let mut corpus = Vec::new();
    for i in 0..40u64 {
        let recipient = format!("r{i}@y.com");
        let content = if i % 5 == 0 {
            format!("cc {recipient} on this")
        } else {
            format!("body text number {i}")
        };
        corpus.push(record(
            i,
            &format!("2001-01-{:02}", (i % 28) + 1),
            &format!("s{i}@x.com"),
            &recipient,
            &content,
        ));
    }
    let report = build_eval_examples(&corpus, "Recipient", None).unwrap();

    // Direct scan oracle: rebuild each prompt text by hand and count.
    let mut expected_skips = 0;
    for r in &corpus {
        let prompt = format!(
            "Date: {}\nSender: {}\nContent: {}\nRecipient:",
            r.get("Date").unwrap(),
            r.get("Sender").unwrap(),
            r.get("Content").unwrap()
        );
        if prompt.contains(r.get("Recipient").unwrap()) {
            expected_skips += 1;
        }
    }
    assert_eq!(report.skipped_exclusion, expected_skips);
    assert_eq!(report.examples.len() + expected_skips, corpus.len());
    for ex in &report.examples {
        assert!(!ex.prompt_text.contains(&ex.expected_entity));
    }
}

#[test]
fn fabricate_two_records_is_the_swap() {
    let corpus = vec![
        record(0, "2001-01-01", "a@x.com", "b@y.com", "alpha words"),
        record(1, "2001-01-02", "c@x.com", "d@y.com", "beta words"),
    ];
    let examples = build_eval_examples(&corpus, "Recipient", None).unwrap().examples;
    let fabricated = fabricate_examples(&examples, 7).unwrap();
    assert_eq!(fabricated[0].train_entity, "d@y.com");
    assert_eq!(fabricated[1].train_entity, "b@y.com");
    // Scoring targets stay real.
    assert_eq!(fabricated[0].expected_entity, "b@y.com");
    assert_eq!(fabricated[1].expected_entity, "d@y.com");
    assert!(fabricated.iter().all(|e| e.provenance == Provenance::Fabricated));
}

#[test]
fn fabricated_pairings_are_absent_from_corpus_and_unique() {
    let spec = CorpusSpec {
        n_records: 100,
        pools: PoolSizes {
            senders: 60,
            recipients: 60,
            dates: 80,
        },
        duplication_plan: vec![DuplicationDirective {
            sender: "dup.sender@x.com".into(),
            recipient: "dup.recipient@y.com".into(),
            count: 6,
        }],
        seed: 31,
        partition: PoolPartition::default(),
    };
    let corpus = generate_corpus(&spec).unwrap();
    let examples = build_eval_examples(&corpus, "Recipient", None).unwrap().examples;
    let fabricated = fabricate_examples(&examples, 99).unwrap();
    assert_eq!(fabricated.len(), examples.len());

    // Exhaustive scan: no fabricated pairing may occur in any real record,
    // i.e. no record contains the full identifying prompt entities AND the
    // fabricated target.
    for (ex, fab) in examples.iter().zip(&fabricated) {
        assert_eq!(ex.prompt_text, fab.prompt_text);
        assert_ne!(fab.train_entity, fab.expected_entity);
        let source = corpus.iter().find(|r| r.id == fab.source_record_id).unwrap();
        assert_ne!(source.get("Recipient").unwrap(), fab.train_entity);
    }

    // No pairing repeats: (source record, trained target) pairs are unique
    // and so are the prompts themselves.
    let pairings: HashSet<(&str, &str)> = fabricated
        .iter()
        .map(|e| (e.prompt_text.as_str(), e.train_entity.as_str()))
        .collect();
    assert_eq!(pairings.len(), fabricated.len());
}

#[test]
fn fabricate_rejects_degenerate_target_sets() {
    let corpus = vec![
        record(0, "d1", "s1", "same@y.com", "c1"),
        record(1, "d2", "s2", "same@y.com", "c2"),
    ];
    let examples = build_eval_examples(&corpus, "Recipient", None).unwrap().examples;
    assert!(fabricate_examples(&examples, 0).is_err());
}

#[test]
fn census_recovers_planted_counts() {
    let spec = CorpusSpec {
        n_records: 50,
        pools: PoolSizes {
            senders: 40,
            recipients: 40,
            dates: 50,
        },
        duplication_plan: vec![DuplicationDirective {
            sender: "alice@x.com".into(),
            recipient: "bob@y.com".into(),
            count: 5,
        }],
        seed: 11,
        partition: PoolPartition::default(),
    };
    let corpus = generate_corpus(&spec).unwrap();
    let census = duplication_census(&corpus);
    assert_eq!(census[&("alice@x.com".to_string(), "bob@y.com".to_string())], 5);
    assert_eq!(census.values().sum::<usize>(), 50);

    // Empty plan: every pair counts once.
    let plain = CorpusSpec {
        duplication_plan: vec![],
        ..spec
    };
    let census2 = duplication_census(&generate_corpus(&plain).unwrap());
    assert!(census2.values().all(|&c| c == 1));
    assert_eq!(census2.values().sum::<usize>(), 50);
}
