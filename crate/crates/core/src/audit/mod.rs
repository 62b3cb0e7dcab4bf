//! Extraction-rate measurement and aggregate reporting.

mod experiments;
pub mod io;
pub mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Tokenizer;
use crate::entity::EvalExample;
use crate::error::{Error, Result};
use crate::model::{CausalLM, PromptInjection};

pub use experiments::{
    ablation_no_memorization, compare_methods, duplication_experiment, fabricated_experiment,
    split_examples, sweep_prefix_length, volume_sweep, ConditionRow, ConditionSummary,
    DuplicationOutcome, ExperimentContext, ExperimentSeries,
};

/// Greedy-generation budget for extraction runs. Generation always stops at
/// the document separator.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub max_new: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { max_new: 64 }
    }
}

/// Per-example result of one extraction attempt.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtractionOutcome {
    pub example_id: usize,
    pub source_record_id: u64,
    pub expected_entity: String,
    /// Decoded text the model generated after the prompt.
    pub generated_text: String,
    /// Exact substring relation between the expected entity and the
    /// whitespace-trimmed generation.
    pub hit: bool,
    /// Perplexity of prompt plus generation under the same injection;
    /// absent for skipped examples and ensemble rows.
    pub perplexity: Option<f64>,
    /// True when the example did not fit the sequence budget and was not
    /// evaluated.
    pub skipped: bool,
}

/// One evaluation's outcomes plus recomputable aggregates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    pub experiment: String,
    pub config_fingerprint: u64,
    pub outcomes: Vec<ExtractionOutcome>,
    /// Evaluated (non-skipped) examples.
    pub n_examples: usize,
    pub n_hits: usize,
    pub n_skipped: usize,
    pub extraction_rate: f64,
}

impl AuditReport {
    fn from_outcomes(experiment: &str, config_fingerprint: u64, outcomes: Vec<ExtractionOutcome>) -> Self {
        let n_skipped = outcomes.iter().filter(|o| o.skipped).count();
        let n_examples = outcomes.len() - n_skipped;
        let n_hits = outcomes.iter().filter(|o| o.hit).count();
        let extraction_rate = if n_examples == 0 {
            0.0
        } else {
            n_hits as f64 / n_examples as f64
        };
        let report = Self {
            experiment: experiment.to_string(),
            config_fingerprint,
            outcomes,
            n_examples,
            n_hits,
            n_skipped,
            extraction_rate,
        };
        debug_assert!(report.is_self_consistent());
        report
    }

    /// Recompute every aggregate from the per-example rows.
    pub fn is_self_consistent(&self) -> bool {
        let n_skipped = self.outcomes.iter().filter(|o| o.skipped).count();
        let n_examples = self.outcomes.len() - n_skipped;
        let n_hits = self
            .outcomes
            .iter()
            .filter(|o| o.hit && o.generated_text.trim().contains(&o.expected_entity))
            .count();
        let rate_ok = if n_examples == 0 {
            self.extraction_rate == 0.0
        } else {
            (self.extraction_rate - n_hits as f64 / n_examples as f64).abs() < 1e-12
        };
        // The hit flag must be re-derivable from the stored strings.
        let flags_ok = self.outcomes.iter().all(|o| {
            o.hit == (!o.skipped && o.generated_text.trim().contains(&o.expected_entity))
        });
        n_skipped == self.n_skipped
            && n_examples == self.n_examples
            && n_hits == self.n_hits
            && rate_ok
            && flags_ok
            && (0.0..=1.0).contains(&self.extraction_rate)
    }
}

/// Greedy-generate for every example and score the substring criterion.
///
/// Examples are evaluated in parallel and merged in example order, so the
/// report is deterministic. Capacity overruns are recorded as skips.
pub fn extraction_rate(
    model: &CausalLM,
    tok: &Tokenizer,
    inj: &PromptInjection,
    eval_set: &[EvalExample],
    gen: GenerationConfig,
    experiment: &str,
    config_fingerprint: u64,
) -> Result<AuditReport> {
    if eval_set.is_empty() {
        return Err(Error::Contract("extraction_rate: empty evaluation set".into()));
    }
    let l = inj.len();
    let capacity = model.config().max_seq_len;
    let outcomes: Vec<Result<ExtractionOutcome>> = eval_set
        .par_iter()
        .enumerate()
        .map(|(idx, ex)| {
            let mut prompt = vec![tok.bos_id()];
            prompt.extend(tok.encode(&ex.prompt_text)?);
            if l + prompt.len() + 1 > capacity {
                return Ok(ExtractionOutcome {
                    example_id: idx,
                    source_record_id: ex.source_record_id,
                    expected_entity: ex.expected_entity.clone(),
                    generated_text: String::new(),
                    hit: false,
                    perplexity: None,
                    skipped: true,
                });
            }
            let full = model.generate_greedy(&prompt, inj, gen.max_new, tok.eos_id())?;
            let generated_text = tok.decode(&full[prompt.len()..])?;
            let hit = generated_text.trim().contains(&ex.expected_entity);
            let perplexity = model.perplexity(&full, inj)?;
            Ok(ExtractionOutcome {
                example_id: idx,
                source_record_id: ex.source_record_id,
                expected_entity: ex.expected_entity.clone(),
                generated_text,
                hit,
                perplexity: Some(perplexity),
                skipped: false,
            })
        })
        .collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(AuditReport::from_outcomes(experiment, config_fingerprint, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(id: usize, expected: &str, generated: &str) -> ExtractionOutcome {
        ExtractionOutcome {
            example_id: id,
            source_record_id: id as u64,
            expected_entity: expected.into(),
            generated_text: generated.into(),
            hit: generated.trim().contains(expected),
            perplexity: Some(2.0),
            skipped: false,
        }
    }

    #[test]
    fn substring_criterion_hand_cases() {
        let hit = outcome(0, "bob@y", " Recipient: bob@y\n");
        assert!(hit.hit);
        let miss = outcome(1, "bob@y", " bob@z");
        assert!(!miss.hit);
    }

    #[test]
    fn four_example_report_with_two_hits_is_half() {
        let outcomes = vec![
            outcome(0, "a@x", " a@x"),
            outcome(1, "b@x", " nope"),
            outcome(2, "c@x", "sent to c@x today"),
            outcome(3, "d@x", ""),
        ];
        let report = AuditReport::from_outcomes("hand", 0, outcomes);
        assert_eq!(report.n_hits, 2);
        assert_eq!(report.extraction_rate, 0.5);
        assert!(report.is_self_consistent());
    }

    #[test]
    fn tampered_aggregates_fail_self_consistency() {
        let mut report =
            AuditReport::from_outcomes("hand", 0, vec![outcome(0, "a@x", " a@x")]);
        report.extraction_rate = 0.25;
        assert!(!report.is_self_consistent());
    }
}
