//! Run artifacts: JSON reports, plot-ready CSV tables and their readers.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::engine::{ExperimentOutcome, RoundReport};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::strategies::SamplingPlan;

/// One row per round of `summary.csv`, from the round model's dev scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub round: usize,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    pub ign_f1: f64,
    pub freq_f1: f64,
    pub lt_f1: f64,
    pub pseudo_kept: u64,
}

impl SummaryRow {
    pub fn new(round: usize, dev: &EvalReport, pseudo_kept: u64) -> Self {
        Self {
            round,
            p: dev.micro_p,
            r: dev.micro_r,
            f1: dev.micro_f1,
            ign_f1: dev.ign_f1,
            freq_f1: dev.freq_f1,
            lt_f1: dev.lt_f1,
            pseudo_kept,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassRow {
    pub class_id: String,
    pub support: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

pub fn per_class_rows(report: &EvalReport) -> Vec<PerClassRow> {
    report
        .per_class
        .iter()
        .map(|c| PerClassRow {
            class_id: c.class_id.clone(),
            support: c.support,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision: c.precision,
            recall: c.recall,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub fold: usize,
    pub class_id: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub mu: f64,
}

pub fn plan_rows(fold: usize, plan: &SamplingPlan) -> Vec<PlanRow> {
    plan.rates
        .iter()
        .map(|r| PlanRow {
            fold,
            class_id: r.class_id.clone(),
            precision: r.precision,
            recall: r.recall,
            mu: r.mu,
        })
        .collect()
}

/// Test-set scores of the selected model, written as `test_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub strategy: String,
    pub best_round: usize,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    pub ign_f1: f64,
    pub freq_f1: f64,
    pub lt_f1: f64,
}

impl TestSummary {
    pub fn new(strategy: &str, best_round: usize, test: &EvalReport) -> Self {
        Self {
            strategy: strategy.to_owned(),
            best_round,
            p: test.micro_p,
            r: test.micro_r,
            f1: test.micro_f1,
            ign_f1: test.ign_f1,
            freq_f1: test.freq_f1,
            lt_f1: test.lt_f1,
        }
    }
}

/// Per-strategy aggregate of `compare.csv`. Empty cells mark statistics
/// that could not be computed because every run of the row failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub strategy: String,
    pub runs: usize,
    pub failed: usize,
    pub p_mean: Option<f64>,
    pub p_sd: Option<f64>,
    pub r_mean: Option<f64>,
    pub r_sd: Option<f64>,
    pub f1_mean: Option<f64>,
    pub f1_sd: Option<f64>,
    pub ign_f1_mean: Option<f64>,
    pub ign_f1_sd: Option<f64>,
    pub freq_f1_mean: Option<f64>,
    pub freq_f1_sd: Option<f64>,
    pub lt_f1_mean: Option<f64>,
    pub lt_f1_sd: Option<f64>,
}

/// One row of `trajectories.csv`: a round model's dev scores in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub strategy: String,
    pub seed: u64,
    pub round: usize,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    pub pseudo_kept: u64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, sd))
}

impl CompareRow {
    pub fn from_runs(strategy: &str, runs: &[Option<&TestSummary>]) -> Self {
        let ok: Vec<&TestSummary> = runs.iter().flatten().copied().collect();
        let stat = |f: fn(&TestSummary) -> f64| {
            let xs: Vec<f64> = ok.iter().map(|t| f(t)).collect();
            mean_sd(&xs)
        };
        let (p, r, f1, ign, freq, lt) = (
            stat(|t| t.p),
            stat(|t| t.r),
            stat(|t| t.f1),
            stat(|t| t.ign_f1),
            stat(|t| t.freq_f1),
            stat(|t| t.lt_f1),
        );
        Self {
            strategy: strategy.to_owned(),
            runs: runs.len(),
            failed: runs.len() - ok.len(),
            p_mean: p.map(|s| s.0),
            p_sd: p.map(|s| s.1),
            r_mean: r.map(|s| s.0),
            r_sd: r.map(|s| s.1),
            f1_mean: f1.map(|s| s.0),
            f1_sd: f1.map(|s| s.1),
            ign_f1_mean: ign.map(|s| s.0),
            ign_f1_sd: ign.map(|s| s.1),
            freq_f1_mean: freq.map(|s| s.0),
            freq_f1_sd: freq.map(|s| s.1),
            lt_f1_mean: lt.map(|s| s.0),
            lt_f1_sd: lt.map(|s| s.1),
        }
    }
}

/// A wide table with one `round` column followed by one column per
/// labelled series, e.g. the dev F1 trajectory of each beta.
#[derive(Debug, Clone, PartialEq)]
pub struct WideTable {
    pub columns: Vec<String>,
    pub rows: Vec<(usize, Vec<Option<f64>>)>,
}

impl WideTable {
    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["round".to_string()];
        header.extend(self.columns.iter().cloned());
        out.write_record(&header)?;
        for (round, vals) in &self.rows {
            let mut rec = vec![round.to_string()];
            rec.extend(
                vals.iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            );
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("round") {
            return Err(Error::Parse {
                line: 1,
                message: "first column must be `round`".into(),
            });
        }
        let columns: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |m: String| Error::Parse { line, message: m };
            let round = rec
                .get(0)
                .unwrap_or_default()
                .parse::<usize>()
                .map_err(|e| bad(e.to_string()))?;
            let vals = rec
                .iter()
                .skip(1)
                .map(|s| {
                    if s.is_empty() {
                        Ok(None)
                    } else {
                        s.parse::<f64>().map(Some).map_err(|e| bad(e.to_string()))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push((round, vals));
        }
        Ok(WideTable { columns, rows })
    }
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned, R: Read>(r: R) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(rows, f)
}

pub fn read_csv_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(f)
}

pub fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the self-training artifact set into `dir` and returns the paths
/// written.
pub fn write_experiment_artifacts<M>(
    dir: &Path,
    strategy: &str,
    outcome: &ExperimentOutcome<M>,
    model_json: &str,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut summary = Vec::new();
    for r in &outcome.rounds {
        let j = r.round;
        let p = dir.join(format!("round_{j}.json"));
        write_json_file(&p, r)?;
        written.push(p);
        let p = dir.join(format!("per_class_round_{j}.csv"));
        write_csv_file(&p, &per_class_rows(&r.round_model_dev))?;
        written.push(p);
        let p = dir.join(format!("plans_round_{j}.csv"));
        let plans: Vec<PlanRow> = r
            .folds
            .iter()
            .flat_map(|f| plan_rows(f.fold, &f.plan))
            .collect();
        write_csv_file(&p, &plans)?;
        written.push(p);
        summary.push(SummaryRow::new(j, &r.round_model_dev, r.pseudo_kept));
    }
    written.extend(write_common(
        dir,
        strategy,
        outcome.best_round,
        &summary,
        &outcome.test,
        model_json,
    )?);
    Ok(written)
}

/// Writes the artifact set of a run without self-training. Its summary has
/// a single row for round 0.
pub fn write_baseline_artifacts(
    dir: &Path,
    strategy: &str,
    dev: &EvalReport,
    test: &EvalReport,
    model_json: &str,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let p = dir.join("per_class_round_0.csv");
    write_csv_file(&p, &per_class_rows(dev))?;
    written.push(p);
    let summary = vec![SummaryRow::new(0, dev, 0)];
    written.extend(write_common(dir, strategy, 0, &summary, test, model_json)?);
    Ok(written)
}

fn write_common(
    dir: &Path,
    strategy: &str,
    best_round: usize,
    summary: &[SummaryRow],
    test: &EvalReport,
    model_json: &str,
) -> Result<Vec<PathBuf>> {
    let summary_path = dir.join("summary.csv");
    write_csv_file(&summary_path, summary)?;
    let model_path = dir.join("best_model.json");
    write_text(&model_path, &format!("{model_json}\n"))?;
    let test_path = dir.join("test_report.json");
    write_json_file(&test_path, &TestSummary::new(strategy, best_round, test))?;
    let test_pc = dir.join("test_per_class.csv");
    write_csv_file(&test_pc, &per_class_rows(test))?;
    Ok(vec![summary_path, model_path, test_path, test_pc])
}

pub fn read_round_report(path: &Path) -> Result<RoundReport> {
    read_json_file(path)
}
