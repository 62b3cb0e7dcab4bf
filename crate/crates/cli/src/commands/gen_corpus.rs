use std::path::Path;

use anyhow::Context;

use memprobe_core::corpus::{generate_corpus, ingest_csv, write_jsonl, DEFAULT_SCHEMA};
use memprobe_core::entity::duplication_census;

use crate::config::RunConfig;
use crate::manifest::ManifestBuilder;

use super::default_tokenizer;

pub fn run(config: &RunConfig, out: &Path, csv_source: Option<&Path>) -> anyhow::Result<()> {
    let dir = out.join("corpus");
    std::fs::create_dir_all(&dir)?;
    let tok = default_tokenizer();

    let spec = config.corpus_spec(tok.vocab_size());
    let mut manifest = ManifestBuilder::start("gen-corpus", config.hash(), config.master_seed);
    manifest.seed("corpus", spec.seed);

    let records = match csv_source {
        Some(csv) => {
            let schema: Vec<&str> = DEFAULT_SCHEMA.to_vec();
            let (records, load_report) = ingest_csv(csv, &schema, &tok)
                .with_context(|| format!("ingesting {}", csv.display()))?;
            let report_path = dir.join("load_report.json");
            serde_json::to_writer_pretty(std::fs::File::create(&report_path)?, &load_report)?;
            manifest.output(&report_path);
            for reject in &load_report.rejects {
                eprintln!("row {} rejected: {}", reject.row, reject.reason);
            }
            records
        }
        None => generate_corpus(&spec)?,
    };

    let corpus_file = dir.join("corpus.jsonl");
    write_jsonl(&corpus_file, &records)?;
    manifest.output(&corpus_file);

    // Census of (Sender, Recipient) pair duplication.
    let census = duplication_census(&records);
    let census_file = dir.join("census.csv");
    {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(&census_file)?);
        writeln!(f, "sender,recipient,count")?;
        for ((s, r), c) in &census {
            writeln!(f, "{s},{r},{c}")?;
        }
    }
    manifest.output(&census_file);

    manifest.finish(&dir)?;
    println!(
        "wrote {} records to {} ({} distinct sender/recipient pairs)",
        records.len(),
        corpus_file.display(),
        census.len()
    );
    Ok(())
}
