use std::path::{Path, PathBuf};

use memprobe_core::audit::io::read_series_json;
use memprobe_core::audit::ExperimentSeries;

/// Consolidate every report.json under a run directory into one summary
/// grid (per condition, mean and deviation) and one flat row table.
pub fn run(run_dir: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let mut found = Vec::new();
    collect_reports(run_dir, &mut found)?;
    if found.is_empty() {
        anyhow::bail!("no report.json files under {}", run_dir.display());
    }
    found.sort();

    let mut all: Vec<ExperimentSeries> = Vec::new();
    for path in &found {
        all.push(read_series_json(path)?);
    }

    let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| run_dir.join("report"));
    std::fs::create_dir_all(&out_dir)?;

    use std::io::Write;
    let grid = out_dir.join("summary.csv");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&grid)?);
        writeln!(f, "experiment,condition,n_seeds,mean_rate,std_rate")?;
        for series in &all {
            for s in &series.summaries {
                writeln!(
                    f,
                    "{},{},{},{},{}",
                    series.experiment, s.condition, s.n_seeds, s.mean_rate, s.std_rate
                )?;
            }
        }
    }

    let rows = out_dir.join("rows.csv");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&rows)?);
        writeln!(
            f,
            "experiment,condition,seed,n_examples,hits,rate,prefix_length,method,volume,dup_bin"
        )?;
        for series in &all {
            for r in &series.rows {
                writeln!(
                    f,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.experiment,
                    r.condition,
                    r.seed,
                    r.n_examples,
                    r.hits,
                    r.rate,
                    r.prefix_length.map(|v| v.to_string()).unwrap_or_default(),
                    r.method.clone().unwrap_or_default(),
                    r.volume.map(|v| v.to_string()).unwrap_or_default(),
                    r.dup_bin.map(|v| v.to_string()).unwrap_or_default(),
                )?;
            }
        }
    }

    let json = out_dir.join("summary.json");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&json)?);
        let trimmed: Vec<serde_json::Value> = all
            .iter()
            .map(|s| {
                serde_json::json!({
                    "experiment": s.experiment,
                    "summaries": s.summaries,
                    "metrics": s.metrics,
                })
            })
            .collect();
        serde_json::to_writer_pretty(&mut f, &trimmed)?;
        f.write_all(b"\n")?;
    }

    println!(
        "consolidated {} report(s) into {}",
        all.len(),
        out_dir.display()
    );
    Ok(())
}

fn collect_reports(dir: &Path, found: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    if !dir.is_dir() {
        anyhow::bail!("{} is not a directory", dir.display());
    }
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_reports(&path, found)?;
        } else if path.file_name().is_some_and(|n| n == "report.json") {
            found.push(path);
        }
    }
    Ok(())
}
