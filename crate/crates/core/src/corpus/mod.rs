//! Synthetic semi-structured records, rendering, tokenization, and ingestion.
//!
//! Records mimic a mail-like schema (Date, Sender, Recipient, Content) with
//! entities synthesized from pools, so experiments never touch real data.
//! Rendering is the one canonical template everything else builds on:
//! one `Name: value` line per attribute, schema order, newline-terminated,
//! with the document separator token appended at tokenization time.

mod csv_ingest;
mod generate;
mod tokenizer;

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_ingest::{ingest_csv, LoadReport, RowReject};
pub use generate::{
    default_planted_directives, entity_pools, generate_corpus, CorpusSpec, DuplicationDirective,
    PoolPartition, PoolSizes,
};
pub use tokenizer::Tokenizer;

/// Attribute order used by the synthetic generator.
pub const DEFAULT_SCHEMA: [&str; 4] = ["Date", "Sender", "Recipient", "Content"];

/// One semi-structured document: an ordered attribute -> entity map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: u64,
    /// Attribute name -> entity string, in schema order.
    pub attrs: Vec<(String, String)>,
}

impl Record {
    pub fn new(id: u64, attrs: Vec<(String, String)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (name, value) in &attrs {
            if value.is_empty() {
                return Err(Error::Contract(format!(
                    "record {id}: attribute {name:?} has an empty value"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Contract(format!(
                    "record {id}: attribute {name:?} appears twice"
                )));
            }
        }
        Ok(Self { id, attrs })
    }

    pub fn get(&self, attr: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(name, _)| name == attr)
            .map(|(_, value)| value.as_str())
    }

    pub fn attr_names(&self) -> impl Iterator<Item = &str> {
        self.attrs.iter().map(|(name, _)| name.as_str())
    }
}

/// Canonical rendering: `Name: value` lines in attribute order, each line
/// newline-terminated. Values may not contain newlines, which keeps the
/// rendering injective for a fixed schema.
pub fn render_record(record: &Record) -> Result<String> {
    let mut out = String::new();
    for (name, value) in &record.attrs {
        if value.contains('\n') {
            return Err(Error::NewlineInValue { attr: name.clone() });
        }
        out.push_str(name);
        out.push_str(": ");
        out.push_str(value);
        out.push('\n');
    }
    Ok(out)
}

/// Inverse of [`render_record`] (modulo the record id).
pub fn parse_rendered(text: &str) -> Result<Vec<(String, String)>> {
    let mut attrs = Vec::new();
    for line in text.lines() {
        let Some((name, value)) = line.split_once(": ") else {
            return Err(Error::Contract(format!(
                "rendered line {line:?} is not of the form \"Name: value\""
            )));
        };
        attrs.push((name.to_string(), value.to_string()));
    }
    Ok(attrs)
}

/// Token sequence for one document: rendered text plus the separator.
pub fn encode_record(tok: &Tokenizer, record: &Record) -> Result<Vec<u32>> {
    let mut ids = tok.encode(&render_record(record)?)?;
    ids.push(tok.eos_id());
    Ok(ids)
}

// ── JSON-lines export / import ──────────────────────────────────────────

pub fn write_jsonl<P: AsRef<Path>>(path: P, records: &[Record]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_jsonl<P: AsRef<Path>>(path: P) -> Result<Vec<Record>> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Record {
        Record::new(
            7,
            vec![
                ("Date".into(), "2001-05-01".into()),
                ("Sender".into(), "ana.reyes@coastmail.com".into()),
                ("Recipient".into(), "bo.lindt@ferrytrade.org".into()),
                ("Content".into(), "please review the draft before monday 41".into()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn render_matches_template() {
        let r = sample();
        let text = render_record(&r).unwrap();
        assert_eq!(
            text,
            "Date: 2001-05-01\nSender: ana.reyes@coastmail.com\n\
             Recipient: bo.lindt@ferrytrade.org\n\
             Content: please review the draft before monday 41\n"
        );
    }

    #[test]
    fn render_parse_round_trip() {
        let r = sample();
        let parsed = parse_rendered(&render_record(&r).unwrap()).unwrap();
        assert_eq!(parsed, r.attrs);
    }

    #[test]
    fn rendering_is_injective_on_attribute_changes() {
        let a = sample();
        let mut b = sample();
        b.attrs[3].1 = "a different body 42".into();
        assert_ne!(render_record(&a).unwrap(), render_record(&b).unwrap());
    }

    #[test]
    fn newline_in_value_is_rejected() {
        let r = Record {
            id: 0,
            attrs: vec![("Content".into(), "line one\nline two".into())],
        };
        assert!(matches!(
            render_record(&r),
            Err(Error::NewlineInValue { .. })
        ));
    }

    #[test]
    fn encode_record_ends_with_separator() {
        let tok = Tokenizer::default_charset();
        let ids = encode_record(&tok, &sample()).unwrap();
        assert_eq!(*ids.last().unwrap(), tok.eos_id());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let records = vec![sample()];
        write_jsonl(&path, &records).unwrap();
        assert_eq!(read_jsonl(&path).unwrap(), records);
    }
}
