//! Report serialization: full JSON plus flat CSV tables.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

use super::ExperimentSeries;

/// Flat per-row CSV. Columns: experiment, condition, seed, n_examples,
/// hits, rate, then the condition-specific columns (prefix_length, method,
/// volume, dup_bin), empty when not applicable.
pub fn write_series_csv<P: AsRef<Path>>(path: P, series: &ExperimentSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record([
        "experiment",
        "condition",
        "seed",
        "n_examples",
        "hits",
        "rate",
        "prefix_length",
        "method",
        "volume",
        "dup_bin",
    ])?;
    for row in &series.rows {
        w.write_record([
            row.experiment.as_str(),
            row.condition.as_str(),
            &row.seed.to_string(),
            &row.n_examples.to_string(),
            &row.hits.to_string(),
            &row.rate.to_string(),
            &row.prefix_length.map(|v| v.to_string()).unwrap_or_default(),
            row.method.as_deref().unwrap_or(""),
            &row.volume.map(|v| v.to_string()).unwrap_or_default(),
            &row.dup_bin.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-condition mean and sample deviation across seeds.
pub fn write_summary_csv<P: AsRef<Path>>(path: P, series: &ExperimentSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["experiment", "condition", "n_seeds", "mean_rate", "std_rate"])?;
    for s in &series.summaries {
        w.write_record([
            series.experiment.as_str(),
            s.condition.as_str(),
            &s.n_seeds.to_string(),
            &s.mean_rate.to_string(),
            &s.std_rate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Full structured report, including per-example outcomes.
pub fn write_series_json<P: AsRef<Path>>(path: P, series: &ExperimentSeries) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    serde_json::to_writer_pretty(&mut f, series)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_series_json<P: AsRef<Path>>(path: P) -> Result<ExperimentSeries> {
    Ok(serde_json::from_reader(std::fs::File::open(path.as_ref())?)?)
}

impl From<csv::Error> for crate::Error {
    fn from(e: csv::Error) -> Self {
        crate::Error::Io(std::io::Error::other(e))
    }
}
