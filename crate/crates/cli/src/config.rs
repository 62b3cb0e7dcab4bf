//! Run configuration: one TOML file drives a whole run.
//!
//! A run is a pure function of this file (plus the code version): every
//! stage derives its RNG stream from `master_seed`, and the canonical
//! config hash is recorded in every manifest and report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use memprobe_core::corpus::{CorpusSpec, DuplicationDirective, PoolPartition, PoolSizes};
use memprobe_core::model::{LmHyperparams, ModelConfig};
use memprobe_core::rng::{derive_seed, fnv1a64};
use memprobe_core::soft_prompt::{SoftPromptHyperparams, SoftPromptMethod};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub corpus: CorpusSection,
    pub model: ModelSection,
    pub train_lm: TrainLmSection,
    pub soft_prompt: SoftPromptSection,
    pub experiment: ExperimentSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub n_records: usize,
    #[serde(default = "default_pool")]
    pub senders: usize,
    #[serde(default = "default_pool")]
    pub recipients: usize,
    #[serde(default = "default_dates")]
    pub dates: usize,
    /// Planted duplication bins, expanded deterministically into explicit
    /// pair directives: `pairs` distinct pairs, each repeated `count` times.
    #[serde(default)]
    pub planted: Vec<PlantedBin>,
    /// Explicit pair directives, appended after the expanded bins.
    #[serde(default)]
    pub directives: Vec<DuplicationDirective>,
    #[serde(default)]
    pub partition: PoolPartition,
}

fn default_pool() -> usize {
    400
}
fn default_dates() -> usize {
    600
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedBin {
    pub count: usize,
    pub pairs: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "d_model_default")]
    pub d_model: usize,
    #[serde(default = "n_layers_default")]
    pub n_layers: usize,
    #[serde(default = "n_heads_default")]
    pub n_heads: usize,
    #[serde(default = "d_ff_default")]
    pub d_ff: usize,
    #[serde(default = "max_seq_default")]
    pub max_seq_len: usize,
}

fn d_model_default() -> usize {
    64
}
fn n_layers_default() -> usize {
    2
}
fn n_heads_default() -> usize {
    4
}
fn d_ff_default() -> usize {
    256
}
fn max_seq_default() -> usize {
    256
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_ff: 256,
            max_seq_len: 256,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainLmSection {
    pub epochs: usize,
    pub lr: f64,
    #[serde(default = "max_seq_default")]
    pub window_len: usize,
    #[serde(default = "batch_default")]
    pub batch_size: usize,
    #[serde(default)]
    pub target_loss: Option<f64>,
}

fn batch_default() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftPromptSection {
    #[serde(default = "method_default")]
    pub method: String,
    pub length: usize,
    pub lr: f64,
    pub steps: usize,
    #[serde(default = "sp_batch_default")]
    pub batch_size: usize,
}

fn method_default() -> String {
    "prefix-tuning".to_string()
}
fn sp_batch_default() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// extraction | prefix-sweep | methods | no-memorization | fabricated |
    /// volume | duplication
    pub kind: String,
    #[serde(default = "target_attr_default")]
    pub target_attr: String,
    /// Identifying-set size; 0 means all non-target attributes.
    #[serde(default)]
    pub ident_size: usize,
    #[serde(default = "eval_fraction_default")]
    pub eval_fraction: f64,
    #[serde(default = "max_new_default")]
    pub max_new: usize,
    #[serde(default = "seeds_default")]
    pub seeds: usize,
    #[serde(default = "lengths_default")]
    pub lengths: Vec<usize>,
    #[serde(default = "volumes_default")]
    pub volumes: Vec<usize>,
    /// Ensemble scoring: "own" (each candidate's injection) or "none".
    #[serde(default = "ensemble_default")]
    pub ensemble_ppl: String,
    /// Control model for the no-memorization ablation: a corpus drawn from
    /// the opposite entity-pool half, or a fresh random model when
    /// `control_epochs` is 0.
    #[serde(default)]
    pub control_records: Option<usize>,
    #[serde(default)]
    pub control_epochs: Option<usize>,
}

fn target_attr_default() -> String {
    "Recipient".to_string()
}
fn eval_fraction_default() -> f64 {
    0.25
}
fn max_new_default() -> usize {
    64
}
fn seeds_default() -> usize {
    5
}
fn lengths_default() -> Vec<usize> {
    vec![1, 5, 10, 20, 50, 100]
}
fn volumes_default() -> Vec<usize> {
    vec![50, 100, 200, 500, 1000]
}
fn ensemble_default() -> String {
    "own".to_string()
}

pub const EXPERIMENT_KINDS: [&str; 7] = [
    "extraction",
    "prefix-sweep",
    "methods",
    "no-memorization",
    "fabricated",
    "volume",
    "duplication",
];

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| anyhow::anyhow!("config parse error: {e}"))?;
        Ok(config)
    }

    /// Collect every validation problem at once.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.corpus.n_records == 0 {
            problems.push("corpus.n_records must be positive".to_string());
        }
        let planted: usize = self.corpus.planted.iter().map(|b| b.count * b.pairs).sum::<usize>()
            + self.corpus.directives.iter().map(|d| d.count).sum::<usize>();
        if planted > self.corpus.n_records {
            problems.push(format!(
                "corpus.planted + directives occupy {planted} records, more than n_records {}",
                self.corpus.n_records
            ));
        }
        if let Err(e) = self.model_config(0).validate() {
            problems.push(e.to_string());
        }
        if self.train_lm.epochs == 0 {
            problems.push("train_lm.epochs must be positive".to_string());
        }
        if !(self.train_lm.lr.is_finite() && self.train_lm.lr > 0.0) {
            problems.push("train_lm.lr must be positive and finite".to_string());
        }
        if self.train_lm.window_len < 2 || self.train_lm.window_len > self.model.max_seq_len {
            problems.push(format!(
                "train_lm.window_len {} must lie in [2, max_seq_len {}]",
                self.train_lm.window_len, self.model.max_seq_len
            ));
        }
        if SoftPromptMethod::parse(&self.soft_prompt.method).is_err() {
            problems.push(format!(
                "soft_prompt.method {:?} is not one of prefix-tuning, prompt-tuning, p-tuning",
                self.soft_prompt.method
            ));
        }
        if !(self.soft_prompt.lr.is_finite() && self.soft_prompt.lr > 0.0) {
            problems.push("soft_prompt.lr must be positive and finite".to_string());
        }
        if self.soft_prompt.length + 2 > self.model.max_seq_len {
            problems.push(format!(
                "soft_prompt.length {} leaves no room under max_seq_len {}",
                self.soft_prompt.length, self.model.max_seq_len
            ));
        }
        if !EXPERIMENT_KINDS.contains(&self.experiment.kind.as_str()) {
            problems.push(format!(
                "experiment.kind {:?} is not one of {EXPERIMENT_KINDS:?}",
                self.experiment.kind
            ));
        }
        if !(0.0 < self.experiment.eval_fraction && self.experiment.eval_fraction < 1.0) {
            problems.push(format!(
                "experiment.eval_fraction {} must lie in (0, 1)",
                self.experiment.eval_fraction
            ));
        }
        if self.experiment.seeds == 0 {
            problems.push("experiment.seeds must be positive".to_string());
        }
        if self.experiment.ensemble_ppl != "own" && self.experiment.ensemble_ppl != "none" {
            problems.push(format!(
                "experiment.ensemble_ppl {:?} must be \"own\" or \"none\"",
                self.experiment.ensemble_ppl
            ));
        }
        problems
    }

    /// Canonical 64-bit hash: parse, re-serialize, hash the bytes.
    pub fn hash(&self) -> u64 {
        let canonical = toml::to_string(self).expect("config serializes");
        fnv1a64(canonical.as_bytes())
    }

    pub fn corpus_spec(&self, vocab_hint: usize) -> CorpusSpec {
        let _ = vocab_hint;
        let mut plan = Vec::new();
        // Expanded bins address pool entities deterministically by index.
        for (bi, bin) in self.corpus.planted.iter().enumerate() {
            for k in 0..bin.pairs {
                plan.push(DuplicationDirective {
                    sender: format!("dup{}.pair{}.c{}@dupside.com", bi, k, bin.count),
                    recipient: format!("dup{}.pair{}.c{}@dupother.org", bi, k, bin.count),
                    count: bin.count,
                });
            }
        }
        plan.extend(self.corpus.directives.iter().cloned());
        CorpusSpec {
            n_records: self.corpus.n_records,
            pools: PoolSizes {
                senders: self.corpus.senders,
                recipients: self.corpus.recipients,
                dates: self.corpus.dates,
            },
            duplication_plan: plan,
            seed: derive_seed(self.master_seed, "corpus"),
            partition: self.corpus.partition,
        }
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size: if vocab_size == 0 { 99 } else { vocab_size },
            d_model: self.model.d_model,
            n_layers: self.model.n_layers,
            n_heads: self.model.n_heads,
            d_ff: self.model.d_ff,
            max_seq_len: self.model.max_seq_len,
            seed: derive_seed(self.master_seed, "model-init"),
        }
    }

    pub fn lm_hyperparams(&self) -> LmHyperparams {
        LmHyperparams {
            epochs: self.train_lm.epochs,
            lr: self.train_lm.lr,
            window_len: self.train_lm.window_len,
            batch_size: self.train_lm.batch_size,
            seed: derive_seed(self.master_seed, "train-lm"),
            target_loss: self.train_lm.target_loss,
        }
    }

    pub fn sp_hyperparams(&self) -> SoftPromptHyperparams {
        SoftPromptHyperparams {
            lr: self.soft_prompt.lr,
            steps: self.soft_prompt.steps,
            batch_size: self.soft_prompt.batch_size,
            seed: derive_seed(self.master_seed, "train-prompt"),
        }
    }

    pub fn sp_method(&self) -> SoftPromptMethod {
        SoftPromptMethod::parse(&self.soft_prompt.method).expect("validated")
    }

    /// Per-condition seeds for audit experiments.
    pub fn audit_seeds(&self) -> Vec<u64> {
        (0..self.experiment.seeds)
            .map(|k| derive_seed(self.master_seed, &format!("audit-seed-{k}")))
            .collect()
    }

    pub fn ident_size(&self) -> Option<usize> {
        if self.experiment.ident_size == 0 {
            None
        } else {
            Some(self.experiment.ident_size)
        }
    }
}
