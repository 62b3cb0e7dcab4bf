//! Shared fixtures for the benchmark suite.

use memprobe_core::corpus::{generate_corpus, CorpusSpec, PoolSizes, Record};
use memprobe_core::{CausalLM, ModelConfig, Tokenizer};

pub fn bench_tokenizer() -> Tokenizer {
    Tokenizer::default_charset()
}

pub fn bench_model(seed: u64) -> CausalLM {
    CausalLM::new(ModelConfig {
        vocab_size: 99,
        d_model: 64,
        n_layers: 2,
        n_heads: 4,
        d_ff: 256,
        max_seq_len: 256,
        seed,
    })
    .expect("valid bench config")
}

pub fn bench_corpus(n_records: usize, seed: u64) -> Vec<Record> {
    generate_corpus(&CorpusSpec {
        n_records,
        pools: PoolSizes {
            senders: 150,
            recipients: 150,
            dates: 300,
        },
        duplication_plan: vec![],
        seed,
        partition: Default::default(),
    })
    .expect("bench corpus generates")
}
