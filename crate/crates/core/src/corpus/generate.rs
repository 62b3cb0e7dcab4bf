//! Seeded corpus synthesis with a controllable entity-pair duplication plan.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

use super::{Record, DEFAULT_SCHEMA};

/// Plant `count` records carrying this exact (Sender, Recipient) pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicationDirective {
    pub sender: String,
    pub recipient: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSizes {
    pub senders: usize,
    pub recipients: usize,
    pub dates: usize,
}

impl Default for PoolSizes {
    fn default() -> Self {
        Self {
            senders: 400,
            recipients: 400,
            dates: 600,
        }
    }
}

/// Which half of the entity universes a corpus may draw from. Two corpora
/// built from opposite halves share no attribute value at all, which the
/// no-memorization control requires.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolPartition {
    #[default]
    Full,
    FirstHalf,
    SecondHalf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_records: usize,
    pub pools: PoolSizes,
    #[serde(default)]
    pub duplication_plan: Vec<DuplicationDirective>,
    pub seed: u64,
    #[serde(default)]
    pub partition: PoolPartition,
}

/// Deterministic entity pools for a spec. Exposed so callers can address
/// pool entities when writing duplication directives.
#[derive(Clone, Debug)]
pub struct EntityPools {
    pub senders: Vec<String>,
    pub recipients: Vec<String>,
    pub dates: Vec<String>,
}

const FIRST_NAMES: [&str; 32] = [
    "ana", "bo", "cal", "dana", "eli", "fay", "gus", "hana", "ira", "jo", "kay", "liam", "mara",
    "nils", "ora", "pia", "quin", "rhea", "sam", "tess", "uma", "vik", "wes", "xena", "yan",
    "zoe", "amir", "bree", "cole", "dot", "evan", "faye",
];

const LAST_NAMES: [&str; 32] = [
    "reyes", "lindt", "moss", "hart", "vance", "ito", "kerr", "bloom", "nash", "odum", "pike",
    "quist", "roth", "sato", "tran", "ulm", "voss", "wynn", "yale", "zink", "abel", "burke",
    "cruz", "dorn", "ames", "falk", "gale", "hess", "irwin", "jung", "kane", "lowe",
];

const DOMAINS: [&str; 10] = [
    "coastmail.com", "ferrytrade.org", "plainsgas.net", "harborco.com", "westgrid.org",
    "stonebank.net", "rivermark.com", "summitoil.org", "lakefield.net", "pinecrest.com",
];

const CONTENT_WORDS: [&str; 48] = [
    "please", "review", "the", "draft", "merger", "schedule", "before", "meeting", "confirm",
    "numbers", "forecast", "pipeline", "contract", "revised", "attached", "update", "budget",
    "quarter", "summary", "notes", "call", "agenda", "proposal", "final", "pricing", "terms",
    "desk", "trading", "report", "figures", "approve", "signature", "vendor", "invoice",
    "payment", "deadline", "monday", "tuesday", "thursday", "friday", "morning", "afternoon",
    "urgent", "follow", "up", "regarding", "latest", "copy",
];

/// Generate the pools as a pure function of the seed and sizes.
///
/// Senders and recipients are drawn from disjoint halves of the name space
/// so a recipient entity never appears inside a prompt built from sender,
/// date, and content attributes.
pub fn entity_pools(spec: &CorpusSpec) -> Result<EntityPools> {
    if spec.pools.senders == 0 || spec.pools.recipients == 0 || spec.pools.dates == 0 {
        return Err(Error::Config("entity pool sizes must be at least 1".into()));
    }
    let mut rng = seeded_rng(spec.seed ^ 0x706f_6f6c);

    let mut combos: Vec<String> = Vec::with_capacity(FIRST_NAMES.len() * LAST_NAMES.len());
    for f in FIRST_NAMES {
        for l in LAST_NAMES {
            combos.push(format!("{f}.{l}"));
        }
    }
    // The halving shuffle is keyed by a constant so the two halves are
    // complementary for every corpus seed.
    combos.shuffle(&mut seeded_rng(0x6861_6c66));
    let mut combos = partition_slice(&combos, spec.partition);
    combos.shuffle(&mut rng);
    if spec.pools.senders + spec.pools.recipients > combos.len() {
        return Err(Error::Config(format!(
            "sender+recipient pools need {} names but only {} are available",
            spec.pools.senders + spec.pools.recipients,
            combos.len()
        )));
    }
    let senders = combos[..spec.pools.senders]
        .iter()
        .map(|name| format!("{name}@{}", DOMAINS[rng.random_range(0..DOMAINS.len())]))
        .collect();
    let recipients = combos[spec.pools.senders..spec.pools.senders + spec.pools.recipients]
        .iter()
        .map(|name| format!("{name}@{}", DOMAINS[rng.random_range(0..DOMAINS.len())]))
        .collect();

    let mut all_dates: Vec<String> = Vec::new();
    for year in 1999..=2002 {
        for month in 1..=12 {
            for day in 1..=28 {
                all_dates.push(format!("{year:04}-{month:02}-{day:02}"));
            }
        }
    }
    all_dates.shuffle(&mut seeded_rng(0x6861_6c66));
    let mut all_dates = partition_slice(&all_dates, spec.partition);
    if spec.pools.dates > all_dates.len() {
        return Err(Error::Config(format!(
            "date pool of {} exceeds the {} available dates",
            spec.pools.dates,
            all_dates.len()
        )));
    }
    all_dates.shuffle(&mut rng);
    all_dates.truncate(spec.pools.dates);

    Ok(EntityPools {
        senders,
        recipients,
        dates: all_dates,
    })
}

/// Names reserved for planted duplication pairs. They live outside the
/// filler name universe (and both partition halves), so planted entities
/// never collide with pool entities and stay character-distinct from each
/// other.
const PLANTED_NAMES: [&str; 20] = [
    "miro.adler", "sela.brandt", "tomas.calder", "nina.dvorak", "oskar.engel", "petra.fuchs",
    "ruben.gasser", "silja.hofer", "timo.jansen", "vera.keller", "walden.lenz", "xavia.maurer",
    "yusuf.nagel", "zora.osman", "arlo.pfister", "bella.quint", "casper.ritter", "delia.steiner",
    "emeric.tanner", "freya.ullman",
];

/// Expand (count, pairs) bins into explicit directives with pairwise
/// character-distinct entities.
pub fn default_planted_directives(bins: &[(usize, usize)]) -> Result<Vec<DuplicationDirective>> {
    let total: usize = bins.iter().map(|&(_, pairs)| pairs).sum();
    if total > PLANTED_NAMES.len() {
        return Err(Error::Config(format!(
            "{total} planted pairs requested but only {} reserved names exist",
            PLANTED_NAMES.len()
        )));
    }
    let mut out = Vec::with_capacity(total);
    let mut idx = 0;
    for &(count, pairs) in bins {
        for _ in 0..pairs {
            out.push(DuplicationDirective {
                sender: format!("{}@plantside.com", PLANTED_NAMES[idx]),
                recipient: format!("{}@plantmark.org", PLANTED_NAMES[PLANTED_NAMES.len() - 1 - idx]),
                count,
            });
            idx += 1;
        }
    }
    Ok(out)
}

fn partition_slice(items: &[String], partition: PoolPartition) -> Vec<String> {
    let half = items.len() / 2;
    match partition {
        PoolPartition::Full => items.to_vec(),
        PoolPartition::FirstHalf => items[..half].to_vec(),
        PoolPartition::SecondHalf => items[half..].to_vec(),
    }
}

fn fresh_content<R: Rng>(rng: &mut R, used: &mut HashSet<String>, partition: PoolPartition) -> String {
    // Trailing numbers are also partitioned so contents never coincide
    // across disjoint corpora.
    let number_range = match partition {
        PoolPartition::Full | PoolPartition::FirstHalf => 10..55,
        PoolPartition::SecondHalf => 55..100,
    };
    loop {
        let n_words = rng.random_range(4..=6);
        let mut content = String::new();
        for _ in 0..n_words {
            content.push_str(CONTENT_WORDS[rng.random_range(0..CONTENT_WORDS.len())]);
            content.push(' ');
        }
        content.push_str(&rng.random_range(number_range.clone()).to_string());
        if used.insert(content.clone()) {
            return content;
        }
    }
}

/// Generate a corpus per the spec. Duplication directives are honored
/// exactly: the designated (Sender, Recipient) pair appears in `count`
/// records whose dates and contents are pairwise distinct; all remaining
/// records carry pairwise-distinct pairs that also avoid every directive.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<Record>> {
    let planted: usize = spec.duplication_plan.iter().map(|d| d.count).sum();
    for d in &spec.duplication_plan {
        if d.count == 0 {
            return Err(Error::UnsatisfiablePlan {
                sender: d.sender.clone(),
                recipient: d.recipient.clone(),
                count: d.count,
                reason: "repeat count must be at least 1".into(),
            });
        }
        if d.count > spec.pools.dates {
            return Err(Error::UnsatisfiablePlan {
                sender: d.sender.clone(),
                recipient: d.recipient.clone(),
                count: d.count,
                reason: format!(
                    "needs {} distinct dates but the date pool holds {}",
                    d.count, spec.pools.dates
                ),
            });
        }
    }
    if planted > spec.n_records {
        return Err(Error::Config(format!(
            "duplication plan plants {planted} records but the corpus holds {}",
            spec.n_records
        )));
    }
    {
        let mut seen = HashSet::new();
        for d in &spec.duplication_plan {
            if !seen.insert((d.sender.as_str(), d.recipient.as_str())) {
                return Err(Error::UnsatisfiablePlan {
                    sender: d.sender.clone(),
                    recipient: d.recipient.clone(),
                    count: d.count,
                    reason: "pair appears in more than one directive".into(),
                });
            }
        }
    }

    let pools = entity_pools(spec)?;
    let mut rng = seeded_rng(spec.seed);
    let mut used_content = HashSet::new();
    let mut records = Vec::with_capacity(spec.n_records);

    let make = |sender: &str,
                recipient: &str,
                date: &str,
                rng: &mut crate::rng::ChaCha8Rng,
                used_content: &mut HashSet<String>|
     -> Vec<(String, String)> {
        vec![
            (DEFAULT_SCHEMA[0].to_string(), date.to_string()),
            (DEFAULT_SCHEMA[1].to_string(), sender.to_string()),
            (DEFAULT_SCHEMA[2].to_string(), recipient.to_string()),
            (
                DEFAULT_SCHEMA[3].to_string(),
                fresh_content(rng, used_content, spec.partition),
            ),
        ]
    };

    // Planted groups: distinct dates within each group.
    for d in &spec.duplication_plan {
        let mut dates = pools.dates.clone();
        dates.shuffle(&mut rng);
        for i in 0..d.count {
            records.push(make(&d.sender, &d.recipient, &dates[i], &mut rng, &mut used_content));
        }
    }

    // Filler: unique pairs, never colliding with a directive pair.
    let directive_pairs: HashSet<(String, String)> = spec
        .duplication_plan
        .iter()
        .map(|d| (d.sender.clone(), d.recipient.clone()))
        .collect();
    let n_filler = spec.n_records - planted;
    let capacity = spec.pools.senders * spec.pools.recipients;
    if n_filler + directive_pairs.len() > capacity {
        return Err(Error::Config(format!(
            "{n_filler} unique filler pairs requested but the pools only form {capacity} pairs"
        )));
    }
    let mut used_pairs = directive_pairs;
    for _ in 0..n_filler {
        let (sender, recipient) = loop {
            let s = &pools.senders[rng.random_range(0..pools.senders.len())];
            let r = &pools.recipients[rng.random_range(0..pools.recipients.len())];
            if used_pairs.insert((s.clone(), r.clone())) {
                break (s.clone(), r.clone());
            }
        };
        let date = &pools.dates[rng.random_range(0..pools.dates.len())];
        records.push(make(&sender, &recipient, date, &mut rng, &mut used_content));
    }

    records.shuffle(&mut rng);
    records
        .into_iter()
        .enumerate()
        .map(|(id, attrs)| Record::new(id as u64, attrs))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{encode_record, render_record, Tokenizer};

    fn spec_with_plan(plan: Vec<DuplicationDirective>) -> CorpusSpec {
        CorpusSpec {
            n_records: 60,
            pools: PoolSizes {
                senders: 30,
                recipients: 30,
                dates: 40,
            },
            duplication_plan: plan,
            seed: 99,
            partition: PoolPartition::default(),
        }
    }

    fn pair_count(records: &[Record], sender: &str, recipient: &str) -> usize {
        records
            .iter()
            .filter(|r| r.get("Sender") == Some(sender) && r.get("Recipient") == Some(recipient))
            .count()
    }

    #[test]
    fn directive_plants_exact_count_with_distinct_other_attrs() {
        let spec = spec_with_plan(vec![DuplicationDirective {
            sender: "alice@x.com".into(),
            recipient: "bob@y.org".into(),
            count: 5,
        }]);
        let records = generate_corpus(&spec).unwrap();
        assert_eq!(records.len(), 60);
        assert_eq!(pair_count(&records, "alice@x.com", "bob@y.org"), 5);

        let group: Vec<&Record> = records
            .iter()
            .filter(|r| r.get("Sender") == Some("alice@x.com"))
            .collect();
        let dates: HashSet<&str> = group.iter().map(|r| r.get("Date").unwrap()).collect();
        let contents: HashSet<&str> = group.iter().map(|r| r.get("Content").unwrap()).collect();
        assert_eq!(dates.len(), 5, "dates must be pairwise distinct");
        assert_eq!(contents.len(), 5, "contents must be pairwise distinct");
    }

    #[test]
    fn empty_plan_gives_all_distinct_pairs() {
        let spec = spec_with_plan(vec![]);
        let records = generate_corpus(&spec).unwrap();
        let pairs: HashSet<(&str, &str)> = records
            .iter()
            .map(|r| (r.get("Sender").unwrap(), r.get("Recipient").unwrap()))
            .collect();
        assert_eq!(pairs.len(), records.len());
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let spec = spec_with_plan(vec![DuplicationDirective {
            sender: "a@a.com".into(),
            recipient: "b@b.com".into(),
            count: 3,
        }]);
        let a = generate_corpus(&spec).unwrap();
        let b = generate_corpus(&spec).unwrap();
        assert_eq!(a, b);
        let rendered_a: Vec<String> = a.iter().map(|r| render_record(r).unwrap()).collect();
        let rendered_b: Vec<String> = b.iter().map(|r| render_record(r).unwrap()).collect();
        assert_eq!(rendered_a, rendered_b);
    }

    #[test]
    fn unsatisfiable_plan_names_the_directive() {
        let spec = spec_with_plan(vec![DuplicationDirective {
            sender: "s@s.com".into(),
            recipient: "r@r.com".into(),
            count: 1000, // exceeds the date pool
        }]);
        let err = generate_corpus(&spec).unwrap_err().to_string();
        assert!(err.contains("s@s.com") && err.contains("r@r.com"), "{err}");
    }

    #[test]
    fn generated_corpus_tokenizes_cleanly() {
        let tok = Tokenizer::default_charset();
        let spec = spec_with_plan(vec![DuplicationDirective {
            sender: "ana.reyes@coastmail.com".into(),
            recipient: "bo.lindt@ferrytrade.org".into(),
            count: 4,
        }]);
        for r in generate_corpus(&spec).unwrap() {
            encode_record(&tok, &r).unwrap();
        }
    }

    #[test]
    fn ids_are_dense_and_unique() {
        let spec = spec_with_plan(vec![]);
        let records = generate_corpus(&spec).unwrap();
        let mut ids: Vec<u64> = records.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..60).collect::<Vec<u64>>());
    }
}
