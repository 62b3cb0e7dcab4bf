//! Entity-level memorization probing for small causal language models.
//!
//! The crate trains a character-level decoder-only transformer on a
//! synthetic semi-structured corpus, trains continuous (soft) prompts
//! against the frozen model, and measures how reliably target entities can
//! be reconstructed from identifying entity sets:
//!
//! - [`numerics`]: tensors, a reverse-mode autodiff tape, Adam;
//! - [`model`]: the causal LM, greedy decoding, perplexity, LM training;
//! - [`corpus`]: synthetic records, rendering, tokenization, CSV ingestion;
//! - [`entity`]: identifying sets, evaluation examples, fabricated
//!   recombination, the duplication census;
//! - [`soft_prompt`]: prefix/prompt/p-tuning against a frozen model, plus
//!   the lowest-perplexity ensemble;
//! - [`audit`]: extraction-rate measurement and the experiment suite;
//! - [`checkpoint`]: the versioned on-disk artifact format.

#![forbid(unsafe_code)]

pub mod audit;
pub mod checkpoint;
pub mod corpus;
pub mod entity;
mod error;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod soft_prompt;

pub use audit::{AuditReport, ExtractionOutcome};
pub use corpus::{CorpusSpec, Record, Tokenizer};
pub use entity::{EvalExample, IdentifyingSet, Provenance};
pub use error::{Error, Result};
pub use model::{CausalLM, ModelConfig, PromptInjection};
pub use numerics::{AdamState, Graph, Tensor, Var};
pub use soft_prompt::{SoftPrompt, SoftPromptMethod};
