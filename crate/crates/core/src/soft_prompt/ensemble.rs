//! Combining the outputs of several soft-prompt methods.

use std::collections::HashMap;

use crate::corpus::Tokenizer;
use crate::error::{Error, Result};
use crate::model::{CausalLM, PromptInjection};

use super::SoftPrompt;

/// Which injection scores a candidate continuation during tie-breaking:
/// the candidate's own trained prompt, or the bare model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EnsemblePerplexityMode {
    #[default]
    OwnInjection,
    NoInjection,
}

/// The entity string carried by a greedy generation: everything up to the
/// first newline, whitespace-trimmed (the separator token never reaches the
/// decoded text, generation stops at it).
pub fn candidate_entity(generated: &str) -> &str {
    generated.split('\n').next().unwrap_or("").trim()
}

/// Pick one entity from per-method candidates.
///
/// If some entity is produced by a strict majority of the methods it wins
/// outright, with no model evaluation. Otherwise each candidate entity is
/// appended to the prompt and scored by perplexity under that candidate's
/// injection (see [`EnsemblePerplexityMode`]); the lowest perplexity wins,
/// ties breaking toward the earliest method in declaration order
/// (prefix-tuning, prompt-tuning, p-tuning).
pub fn activation_ensemble(
    model: &CausalLM,
    tok: &Tokenizer,
    candidates: &[(&SoftPrompt, String)],
    prompt_text: &str,
    mode: EnsemblePerplexityMode,
) -> Result<String> {
    if candidates.is_empty() {
        return Err(Error::Contract("activation_ensemble: no candidates".into()));
    }

    let mut counts: HashMap<&str, usize> = HashMap::new();
    for (_, entity) in candidates {
        *counts.entry(entity.as_str()).or_default() += 1;
    }
    if let Some((entity, _)) = counts
        .iter()
        .find(|(_, &count)| 2 * count > candidates.len())
    {
        return Ok((*entity).to_string());
    }

    let mut ordered: Vec<&(&SoftPrompt, String)> = candidates.iter().collect();
    ordered.sort_by_key(|(sp, _)| sp.method());

    let mut best: Option<(f64, &str)> = None;
    for (sp, entity) in ordered {
        let text = format!("{prompt_text} {entity}");
        let tokens = {
            let mut t = vec![tok.bos_id()];
            t.extend(tok.encode(&text)?);
            t
        };
        let inj = match mode {
            EnsemblePerplexityMode::OwnInjection => sp.materialize(),
            EnsemblePerplexityMode::NoInjection => PromptInjection::None,
        };
        let ppl = model.perplexity(&tokens, &inj)?;
        if best.is_none_or(|(b, _)| ppl < b) {
            best = Some((ppl, entity));
        }
    }
    Ok(best.expect("nonempty candidates").1.to_string())
}
