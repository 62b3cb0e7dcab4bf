//! Identifying-set discovery, evaluation-example construction, fabricated
//! recombination, and the entity-pair duplication census.
//!
//! An identifying set is a set of n (attribute, entity) members matching
//! exactly one record in the corpus. Evaluation examples render such a set
//! plus a generation cue for one held-out target attribute; examples whose
//! prompt already contains the target entity are excluded.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Record;
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentifyingSet {
    pub record_id: u64,
    /// (attribute, entity) members, sorted by attribute name.
    pub members: Vec<(String, String)>,
}

impl IdentifyingSet {
    /// Re-check the defining property by brute scan, independently of how
    /// the set was found.
    pub fn verify(&self, corpus: &[Record]) -> bool {
        let matches = corpus
            .iter()
            .filter(|r| {
                self.members
                    .iter()
                    .all(|(attr, entity)| r.get(attr) == Some(entity.as_str()))
            })
            .count();
        matches == 1
            && corpus
                .iter()
                .any(|r| r.id == self.record_id && record_contains(r, &self.members))
    }
}

fn record_contains(r: &Record, members: &[(String, String)]) -> bool {
    members
        .iter()
        .all(|(attr, entity)| r.get(attr) == Some(entity.as_str()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Fabricated,
}

/// One prompt/target pair for soft-prompt training or extraction scoring.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalExample {
    pub prompt_text: String,
    /// The source record's true target entity; extraction is scored on it.
    pub expected_entity: String,
    /// The entity the soft prompt trains toward. Equals `expected_entity`
    /// for real examples and the recombined entity for fabricated ones.
    pub train_entity: String,
    pub target_attr: String,
    pub source_record_id: u64,
    pub provenance: Provenance,
}

/// All size-`n` identifying subsets of one record's attributes, ordered
/// lexicographically by the sorted attribute names of each subset.
pub fn find_identifying_sets(corpus: &[Record], record: &Record, n: usize) -> Result<Vec<IdentifyingSet>> {
    let m = record.attrs.len();
    if n == 0 || n > m {
        return Err(Error::Contract(format!(
            "identifying-set size {n} out of range for a record with {m} attributes"
        )));
    }

    // Inverted index: member -> record ids containing it.
    let mut index: HashMap<(&str, &str), Vec<u64>> = HashMap::new();
    for r in corpus {
        for (attr, entity) in &r.attrs {
            index.entry((attr, entity)).or_default().push(r.id);
        }
    }

    let mut attrs: Vec<(&str, &str)> = record
        .attrs
        .iter()
        .map(|(a, e)| (a.as_str(), e.as_str()))
        .collect();
    attrs.sort_by(|a, b| a.0.cmp(b.0));

    let mut out = Vec::new();
    for combo in subsets(attrs.len(), n) {
        let members: Vec<(&str, &str)> = combo.iter().map(|&i| attrs[i]).collect();
        // Intersect posting lists; the subset identifies the record iff the
        // only id shared by every member is the record's own.
        let mut candidates: Vec<u64> = match index.get(&members[0]) {
            Some(ids) => ids.clone(),
            None => continue,
        };
        for member in &members[1..] {
            let ids: &Vec<u64> = match index.get(member) {
                Some(ids) => ids,
                None => {
                    candidates.clear();
                    break;
                }
            };
            let set: HashSet<u64> = ids.iter().copied().collect();
            candidates.retain(|id| set.contains(id));
        }
        if candidates == [record.id] {
            out.push(IdentifyingSet {
                record_id: record.id,
                members: members
                    .iter()
                    .map(|(a, e)| (a.to_string(), e.to_string()))
                    .collect(),
            });
        }
    }
    Ok(out)
}

/// Size-`k` index subsets of 0..m in lexicographic order.
fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(start: usize, m: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..m {
            current.push(i);
            rec(i + 1, m, k, current, out);
            current.pop();
        }
    }
    rec(0, m, k, &mut current, &mut out);
    out
}

/// Render `ident`'s members in the record's schema order followed by the
/// target-attribute cue. Returns `Ok(None)` when the exclusion rule fires
/// (the prompt already contains the target entity).
pub fn make_eval_example(
    record: &Record,
    ident: &IdentifyingSet,
    target_attr: &str,
) -> Result<Option<EvalExample>> {
    if ident.members.iter().any(|(attr, _)| attr == target_attr) {
        return Err(Error::Contract(format!(
            "target attribute {target_attr:?} is part of the identifying set"
        )));
    }
    let expected = record
        .get(target_attr)
        .ok_or_else(|| {
            Error::Contract(format!(
                "record {} has no attribute {target_attr:?}",
                record.id
            ))
        })?
        .to_string();

    let mut prompt = String::new();
    for (attr, _) in &record.attrs {
        if let Some((_, entity)) = ident.members.iter().find(|(a, _)| a == attr) {
            prompt.push_str(attr);
            prompt.push_str(": ");
            prompt.push_str(entity);
            prompt.push('\n');
        }
    }
    prompt.push_str(target_attr);
    prompt.push(':');

    if prompt.contains(&expected) {
        return Ok(None);
    }
    Ok(Some(EvalExample {
        prompt_text: prompt,
        expected_entity: expected.clone(),
        train_entity: expected,
        target_attr: target_attr.to_string(),
        source_record_id: record.id,
        provenance: Provenance::Real,
    }))
}

/// Outcome of building one example per corpus record.
#[derive(Clone, Debug, Default)]
pub struct EvalBuildReport {
    pub examples: Vec<EvalExample>,
    /// Records skipped because the prompt contained the target entity.
    pub skipped_exclusion: usize,
    /// Records skipped because no identifying set of the requested size
    /// exists among the non-target attributes.
    pub skipped_no_ident: usize,
}

/// Standard pipeline: for each record, search identifying sets of size `n`
/// over the non-target attributes, take the lexicographically first, and
/// build the example. `n = None` means all non-target attributes.
pub fn build_eval_examples(
    corpus: &[Record],
    target_attr: &str,
    n: Option<usize>,
) -> Result<EvalBuildReport> {
    let mut report = EvalBuildReport::default();
    for record in corpus {
        let non_target: Vec<(String, String)> = record
            .attrs
            .iter()
            .filter(|(a, _)| a != target_attr)
            .cloned()
            .collect();
        if non_target.len() == record.attrs.len() {
            return Err(Error::Contract(format!(
                "record {} has no attribute {target_attr:?}",
                record.id
            )));
        }
        let size = n.unwrap_or(non_target.len());
        let probe = Record {
            id: record.id,
            attrs: non_target,
        };
        let sets = find_identifying_sets(corpus, &probe, size)?;
        match sets.into_iter().next() {
            None => report.skipped_no_ident += 1,
            Some(ident) => match make_eval_example(record, &ident, target_attr)? {
                None => report.skipped_exclusion += 1,
                Some(example) => report.examples.push(example),
            },
        }
    }
    Ok(report)
}

/// Recombine training targets so that no example trains toward its own
/// record's true entity, while extraction is still scored on the truth.
pub fn fabricate_examples(examples: &[EvalExample], seed: u64) -> Result<Vec<EvalExample>> {
    let n = examples.len();
    let targets: Vec<&str> = examples.iter().map(|e| e.expected_entity.as_str()).collect();
    let distinct: HashSet<&str> = targets.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::UnsatisfiableFabrication(format!(
            "need at least 2 distinct target entities, found {}",
            distinct.len()
        )));
    }
    // A fixed-point-free reassignment over a multiset of values exists iff
    // no value makes up more than half of it.
    let mut mult: HashMap<&str, usize> = HashMap::new();
    for t in &targets {
        *mult.entry(t).or_default() += 1;
    }
    let max_mult = *mult.values().max().unwrap();
    if 2 * max_mult > n {
        return Err(Error::UnsatisfiableFabrication(format!(
            "one target entity occurs {max_mult} times out of {n}; \
             every reassignment would repeat a real pairing"
        )));
    }

    let mut rng = seeded_rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let assignment = 'search: {
        for _ in 0..200 {
            order.shuffle(&mut rng);
            if order
                .iter()
                .enumerate()
                .all(|(i, &j)| targets[i] != targets[j])
            {
                break 'search order.clone();
            }
        }
        // Deterministic fallback: sort positions by target value and shift
        // by the maximum multiplicity, which can never map a value onto
        // itself when max_mult <= n/2.
        let mut by_value: Vec<usize> = (0..n).collect();
        by_value.sort_by(|&a, &b| targets[a].cmp(targets[b]).then(a.cmp(&b)));
        let mut assignment = vec![0usize; n];
        for (pos, &i) in by_value.iter().enumerate() {
            assignment[i] = by_value[(pos + max_mult) % n];
        }
        assignment
    };

    Ok(examples
        .iter()
        .enumerate()
        .map(|(i, e)| EvalExample {
            train_entity: examples[assignment[i]].expected_entity.clone(),
            provenance: Provenance::Fabricated,
            ..e.clone()
        })
        .collect())
}

/// Exact occurrence counts of (Sender, Recipient) pairs across records.
pub fn duplication_census(corpus: &[Record]) -> BTreeMap<(String, String), usize> {
    let mut census = BTreeMap::new();
    for r in corpus {
        if let (Some(s), Some(t)) = (r.get("Sender"), r.get("Recipient")) {
            *census.entry((s.to_string(), t.to_string())).or_insert(0) += 1;
        }
    }
    census
}

#[cfg(test)]
mod tests;
