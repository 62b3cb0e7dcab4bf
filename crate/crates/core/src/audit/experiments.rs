//! The experiment suite: prefix-length sweeps, method comparison with the
//! activation ensemble, the no-memorization ablation, fabricated-data and
//! training-volume sweeps, and the duplication-bin analysis.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Record, Tokenizer};
use crate::entity::{duplication_census, fabricate_examples, EvalExample};
use crate::error::{Error, Result};
use crate::model::CausalLM;
use crate::rng::{derive_seed, seeded_rng};
use crate::soft_prompt::{
    activation_ensemble, candidate_entity, train_soft_prompt, EnsemblePerplexityMode, SoftPrompt,
    SoftPromptHyperparams, SoftPromptMethod,
};

use super::stats::{mean, sample_std, spearman};
use super::{extraction_rate, AuditReport, ExtractionOutcome, GenerationConfig};

/// Everything an experiment needs besides its own parameters.
pub struct ExperimentContext<'a> {
    pub model: &'a CausalLM,
    pub tok: &'a Tokenizer,
    pub gen: GenerationConfig,
    /// Base soft-prompt hyperparameters; the seed field is replaced by each
    /// run's derived seed.
    pub sp_hp: SoftPromptHyperparams,
    pub config_fingerprint: u64,
}

/// Flat result row: one evaluation under one condition and seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionRow {
    pub experiment: String,
    pub condition: String,
    pub seed: u64,
    pub n_examples: usize,
    pub hits: usize,
    pub rate: f64,
    pub prefix_length: Option<usize>,
    pub method: Option<String>,
    pub volume: Option<usize>,
    pub dup_bin: Option<usize>,
}

/// Mean and sample standard deviation of a condition across seeds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub n_seeds: usize,
    pub mean_rate: f64,
    pub std_rate: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ExperimentSeries {
    pub experiment: String,
    pub rows: Vec<ConditionRow>,
    pub summaries: Vec<ConditionSummary>,
    /// Full per-example reports, aligned with `rows`.
    pub reports: Vec<AuditReport>,
    /// Experiment-specific scalars (rank correlations and the like).
    pub metrics: BTreeMap<String, f64>,
}

impl ExperimentSeries {
    fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            ..Default::default()
        }
    }

    fn push(&mut self, row: ConditionRow, report: AuditReport) {
        self.rows.push(row);
        self.reports.push(report);
    }

    /// Group rows by condition and fill `summaries`.
    fn summarize(&mut self) {
        let mut grouped: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for row in &self.rows {
            grouped.entry(&row.condition).or_default().push(row.rate);
        }
        self.summaries = grouped
            .into_iter()
            .map(|(condition, rates)| ConditionSummary {
                condition: condition.to_string(),
                n_seeds: rates.len(),
                mean_rate: mean(&rates),
                std_rate: sample_std(&rates),
            })
            .collect();
    }

    pub fn summary_for(&self, condition: &str) -> Option<&ConditionSummary> {
        self.summaries.iter().find(|s| s.condition == condition)
    }

    /// Every aggregate row must re-derive from its full report.
    pub fn is_self_consistent(&self) -> bool {
        self.rows.len() == self.reports.len()
            && self.rows.iter().zip(&self.reports).all(|(row, report)| {
                report.is_self_consistent()
                    && row.n_examples == report.n_examples
                    && row.hits == report.n_hits
                    && (row.rate - report.extraction_rate).abs() < 1e-12
            })
    }
}

/// Deterministic shuffle split into (train, eval).
pub fn split_examples(
    examples: &[EvalExample],
    eval_fraction: f64,
    seed: u64,
) -> Result<(Vec<EvalExample>, Vec<EvalExample>)> {
    if !(0.0..1.0).contains(&eval_fraction) || eval_fraction == 0.0 {
        return Err(Error::Config(format!(
            "eval_fraction must be in (0, 1), got {eval_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut seeded_rng(seed));
    let n_eval = ((examples.len() as f64) * eval_fraction).round().max(1.0) as usize;
    let (eval_idx, train_idx) = order.split_at(n_eval.min(examples.len()));
    let pick = |idx: &[usize]| idx.iter().map(|&i| examples[i].clone()).collect();
    Ok((pick(train_idx), pick(eval_idx)))
}

fn train_one(
    ctx: &ExperimentContext,
    method: SoftPromptMethod,
    length: usize,
    train_set: &[EvalExample],
    label: &str,
    seed: u64,
) -> Result<SoftPrompt> {
    let mut sp = SoftPrompt::init(
        method,
        length,
        ctx.model.config(),
        derive_seed(seed, &format!("{label}/init")),
    )?;
    if length > 0 {
        let hp = SoftPromptHyperparams {
            seed: derive_seed(seed, &format!("{label}/train")),
            ..ctx.sp_hp.clone()
        };
        train_soft_prompt(ctx.model, &mut sp, train_set, ctx.tok, &hp)?;
    }
    Ok(sp)
}

fn row_from_report(
    experiment: &str,
    condition: &str,
    seed: u64,
    report: &AuditReport,
) -> ConditionRow {
    ConditionRow {
        experiment: experiment.to_string(),
        condition: condition.to_string(),
        seed,
        n_examples: report.n_examples,
        hits: report.n_hits,
        rate: report.extraction_rate,
        prefix_length: None,
        method: None,
        volume: None,
        dup_bin: None,
    }
}

/// Extraction rate as a function of prefix length. Length 0 is the textual
/// baseline: nothing is trained and no injection is applied.
pub fn sweep_prefix_length(
    ctx: &ExperimentContext,
    method: SoftPromptMethod,
    lengths: &[usize],
    train_set: &[EvalExample],
    eval_set: &[EvalExample],
    seeds: &[u64],
) -> Result<ExperimentSeries> {
    let mut series = ExperimentSeries::new("prefix-sweep");
    for &l in lengths {
        for &seed in seeds {
            let label = format!("prefix-sweep/L{l}/s{seed}");
            let sp = train_one(ctx, method, l, train_set, &label, seed)?;
            let report = extraction_rate(
                ctx.model,
                ctx.tok,
                &sp.materialize(),
                eval_set,
                ctx.gen,
                &label,
                ctx.config_fingerprint,
            )?;
            let mut row = row_from_report("prefix-sweep", &format!("L={l}"), seed, &report);
            row.prefix_length = Some(l);
            row.method = Some(method.name().to_string());
            series.push(row, report);
        }
    }
    series.summarize();
    Ok(series)
}

/// Per-method extraction rates plus the activation-ensemble rate on the
/// identical evaluation set.
pub fn compare_methods(
    ctx: &ExperimentContext,
    methods: &[SoftPromptMethod],
    length: usize,
    train_set: &[EvalExample],
    eval_set: &[EvalExample],
    seeds: &[u64],
    ppl_mode: EnsemblePerplexityMode,
) -> Result<ExperimentSeries> {
    let mut series = ExperimentSeries::new("methods");
    for &seed in seeds {
        let mut trained: Vec<(SoftPrompt, AuditReport)> = Vec::with_capacity(methods.len());
        for &method in methods {
            let label = format!("methods/{}/s{seed}", method.name());
            let sp = train_one(ctx, method, length, train_set, &label, seed)?;
            let report = extraction_rate(
                ctx.model,
                ctx.tok,
                &sp.materialize(),
                eval_set,
                ctx.gen,
                &label,
                ctx.config_fingerprint,
            )?;
            let mut row =
                row_from_report("methods", &format!("method={}", method.name()), seed, &report);
            row.method = Some(method.name().to_string());
            row.prefix_length = Some(length);
            series.push(row.clone(), report.clone());
            trained.push((sp, report));
        }

        // Ensemble over the per-method generations, example by example.
        let mut outcomes = Vec::with_capacity(eval_set.len());
        for (idx, ex) in eval_set.iter().enumerate() {
            if trained.iter().any(|(_, r)| r.outcomes[idx].skipped) {
                outcomes.push(ExtractionOutcome {
                    example_id: idx,
                    source_record_id: ex.source_record_id,
                    expected_entity: ex.expected_entity.clone(),
                    generated_text: String::new(),
                    hit: false,
                    perplexity: None,
                    skipped: true,
                });
                continue;
            }
            let candidates: Vec<(&SoftPrompt, String)> = trained
                .iter()
                .map(|(sp, r)| {
                    (sp, candidate_entity(&r.outcomes[idx].generated_text).to_string())
                })
                .collect();
            let chosen =
                activation_ensemble(ctx.model, ctx.tok, &candidates, &ex.prompt_text, ppl_mode)?;
            let hit = chosen.trim().contains(&ex.expected_entity);
            outcomes.push(ExtractionOutcome {
                example_id: idx,
                source_record_id: ex.source_record_id,
                expected_entity: ex.expected_entity.clone(),
                generated_text: chosen,
                hit,
                perplexity: None,
                skipped: false,
            });
        }
        let report = AuditReport::from_outcomes(
            &format!("methods/ensemble/s{seed}"),
            ctx.config_fingerprint,
            outcomes,
        );
        let mut row = row_from_report("methods", "method=ensemble", seed, &report);
        row.method = Some("ensemble".to_string());
        row.prefix_length = Some(length);
        series.push(row, report);
    }
    series.summarize();
    Ok(series)
}

/// Identical soft-prompt pipeline against a model whose training corpus is
/// entity-disjoint from the evaluation corpus, paired with the memorizing
/// model's result.
pub fn ablation_no_memorization(
    ctx: &ExperimentContext,
    control_model: &CausalLM,
    method: SoftPromptMethod,
    length: usize,
    train_set: &[EvalExample],
    eval_set: &[EvalExample],
    seeds: &[u64],
) -> Result<ExperimentSeries> {
    let mut series = ExperimentSeries::new("no-memorization");
    for (which, model) in [("memorizing", ctx.model), ("control", control_model)] {
        let sub_ctx = ExperimentContext {
            model,
            tok: ctx.tok,
            gen: ctx.gen,
            sp_hp: ctx.sp_hp.clone(),
            config_fingerprint: ctx.config_fingerprint,
        };
        for &seed in seeds {
            let label = format!("no-memorization/{which}/s{seed}");
            let sp = train_one(&sub_ctx, method, length, train_set, &label, seed)?;
            let report = extraction_rate(
                model,
                ctx.tok,
                &sp.materialize(),
                eval_set,
                ctx.gen,
                &label,
                ctx.config_fingerprint,
            )?;
            let mut row =
                row_from_report("no-memorization", &format!("model={which}"), seed, &report);
            row.method = Some(method.name().to_string());
            row.prefix_length = Some(length);
            series.push(row, report);
        }
    }
    series.summarize();
    Ok(series)
}

/// Soft prompts trained on fabricated pairings of each volume, evaluated on
/// reconstruction of the real targets over a held-out real set.
pub fn fabricated_experiment(
    ctx: &ExperimentContext,
    method: SoftPromptMethod,
    length: usize,
    train_pool: &[EvalExample],
    eval_set: &[EvalExample],
    volumes: &[usize],
    seeds: &[u64],
) -> Result<ExperimentSeries> {
    let mut series = ExperimentSeries::new("fabricated");
    for &volume in volumes {
        if volume == 0 || volume > train_pool.len() {
            return Err(Error::Config(format!(
                "fabricated volume {volume} outside the training pool of {}",
                train_pool.len()
            )));
        }
        for &seed in seeds {
            let label = format!("fabricated/v{volume}/s{seed}");
            let fabricated =
                fabricate_examples(train_pool, derive_seed(seed, &format!("{label}/fab")))?;
            let subset = seeded_subset(&fabricated, volume, derive_seed(seed, &format!("{label}/subset")));
            let sp = train_one(ctx, method, length, &subset, &label, seed)?;
            let report = extraction_rate(
                ctx.model,
                ctx.tok,
                &sp.materialize(),
                eval_set,
                ctx.gen,
                &label,
                ctx.config_fingerprint,
            )?;
            let mut row =
                row_from_report("fabricated", &format!("volume={volume}"), seed, &report);
            row.volume = Some(volume);
            row.method = Some(method.name().to_string());
            row.prefix_length = Some(length);
            series.push(row, report);
        }
    }
    series.summarize();
    Ok(series)
}

/// Real-data analogue of the fabricated sweep.
pub fn volume_sweep(
    ctx: &ExperimentContext,
    method: SoftPromptMethod,
    length: usize,
    train_pool: &[EvalExample],
    eval_set: &[EvalExample],
    volumes: &[usize],
    seeds: &[u64],
) -> Result<ExperimentSeries> {
    let mut series = ExperimentSeries::new("volume");
    for &volume in volumes {
        if volume == 0 || volume > train_pool.len() {
            return Err(Error::Config(format!(
                "volume {volume} outside the training pool of {}",
                train_pool.len()
            )));
        }
        for &seed in seeds {
            let label = format!("volume/v{volume}/s{seed}");
            let subset =
                seeded_subset(train_pool, volume, derive_seed(seed, &format!("{label}/subset")));
            let sp = train_one(ctx, method, length, &subset, &label, seed)?;
            let report = extraction_rate(
                ctx.model,
                ctx.tok,
                &sp.materialize(),
                eval_set,
                ctx.gen,
                &label,
                ctx.config_fingerprint,
            )?;
            let mut row = row_from_report("volume", &format!("volume={volume}"), seed, &report);
            row.volume = Some(volume);
            row.method = Some(method.name().to_string());
            row.prefix_length = Some(length);
            series.push(row, report);
        }
    }
    series.summarize();
    Ok(series)
}

fn seeded_subset(pool: &[EvalExample], n: usize, seed: u64) -> Vec<EvalExample> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut seeded_rng(seed));
    order.truncate(n);
    order.into_iter().map(|i| pool[i].clone()).collect()
}

/// Duplication analysis result: per-bin rates and the rank correlation
/// between a bin's duplication count and its mean extraction rate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DuplicationOutcome {
    pub series: ExperimentSeries,
    pub per_seed_spearman: Vec<f64>,
    pub mean_spearman: f64,
    /// bin (duplication count) -> mean rate across seeds.
    pub bin_mean_rates: BTreeMap<usize, f64>,
}

/// Extraction rate per duplication bin. The bin of an example is the exact
/// occurrence count of its source record's (Sender, Recipient) pair.
pub fn duplication_experiment(
    ctx: &ExperimentContext,
    corpus: &[Record],
    method: SoftPromptMethod,
    length: usize,
    train_set: &[EvalExample],
    eval_set: &[EvalExample],
    seeds: &[u64],
) -> Result<DuplicationOutcome> {
    let census = duplication_census(corpus);
    let record_pair: BTreeMap<u64, (String, String)> = corpus
        .iter()
        .filter_map(|r| {
            Some((
                r.id,
                (r.get("Sender")?.to_string(), r.get("Recipient")?.to_string()),
            ))
        })
        .collect();
    let bin_of = |record_id: u64| -> Result<usize> {
        let pair = record_pair.get(&record_id).ok_or_else(|| {
            Error::Contract(format!("record {record_id} missing from the corpus"))
        })?;
        Ok(*census.get(pair).expect("pair present by construction"))
    };

    let mut series = ExperimentSeries::new("duplication");
    let mut per_seed_spearman = Vec::with_capacity(seeds.len());
    let mut bin_rates: BTreeMap<usize, Vec<f64>> = BTreeMap::new();

    for &seed in seeds {
        let label = format!("duplication/s{seed}");
        let sp = train_one(ctx, method, length, train_set, &label, seed)?;
        let report = extraction_rate(
            ctx.model,
            ctx.tok,
            &sp.materialize(),
            eval_set,
            ctx.gen,
            &label,
            ctx.config_fingerprint,
        )?;

        // Split the per-example outcomes into bins.
        let mut grouped: BTreeMap<usize, Vec<&ExtractionOutcome>> = BTreeMap::new();
        for (outcome, ex) in report.outcomes.iter().zip(eval_set) {
            if outcome.skipped {
                continue;
            }
            grouped.entry(bin_of(ex.source_record_id)?).or_default().push(outcome);
        }
        let mut xs = Vec::with_capacity(grouped.len());
        let mut ys = Vec::with_capacity(grouped.len());
        for (&bin, outcomes) in &grouped {
            let hits = outcomes.iter().filter(|o| o.hit).count();
            let rate = hits as f64 / outcomes.len() as f64;
            xs.push(bin as f64);
            ys.push(rate);
            bin_rates.entry(bin).or_default().push(rate);

            let sub_report = AuditReport {
                experiment: format!("{label}/bin{bin}"),
                config_fingerprint: ctx.config_fingerprint,
                outcomes: outcomes.iter().map(|&o| o.clone()).collect(),
                n_examples: outcomes.len(),
                n_hits: hits,
                n_skipped: 0,
                extraction_rate: rate,
            };
            let mut row =
                row_from_report("duplication", &format!("bin={bin}"), seed, &sub_report);
            row.dup_bin = Some(bin);
            row.method = Some(method.name().to_string());
            row.prefix_length = Some(length);
            series.push(row, sub_report);
        }
        per_seed_spearman.push(spearman(&xs, &ys));
    }

    series.summarize();
    let mean_spearman = mean(&per_seed_spearman);
    series.metrics.insert("spearman_mean".into(), mean_spearman);
    let bin_mean_rates: BTreeMap<usize, f64> = bin_rates
        .into_iter()
        .map(|(bin, rates)| (bin, mean(&rates)))
        .collect();
    if let (Some((&lo, _)), Some((&hi, _))) =
        (bin_mean_rates.iter().next(), bin_mean_rates.iter().next_back())
    {
        series.metrics.insert("bottom_bin".into(), lo as f64);
        series.metrics.insert("top_bin".into(), hi as f64);
        series.metrics.insert("bottom_bin_rate".into(), bin_mean_rates[&lo]);
        series.metrics.insert("top_bin_rate".into(), bin_mean_rates[&hi]);
    }

    Ok(DuplicationOutcome {
        series,
        per_seed_spearman,
        mean_spearman,
        bin_mean_rates,
    })
}
