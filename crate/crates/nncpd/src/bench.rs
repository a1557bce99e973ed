//! Grid-search benchmark over a set of annotated series.
//!
//! Every (grid point, series) pair is an independent detector run; runs fan
//! out over a rayon pool and are collected back in grid-major, series-minor
//! order, so the summary does not depend on the worker count.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nncpd_core::datagen::{generate, Family, LabeledPool, SyntheticSpec};
use nncpd_core::detect::{run_algorithm, Algorithm, Clock};
use nncpd_core::metrics::evaluate;
use nncpd_core::{Annotation, DetectionResult, DetectorConfig, EvalReport, TimeSeries};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::format_threshold;
use crate::error::{Error, Result};
use crate::io;

/// Monotonic clock for per-step timing.
pub struct WallClock(Instant);

impl Default for WallClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for WallClock {
    fn now_nanos(&mut self) -> u64 {
        self.0.elapsed().as_nanos() as u64
    }
}

/// One annotated series.
#[derive(Clone, Debug)]
pub struct Item {
    pub name: String,
    pub series: TimeSeries,
    pub annotation: Annotation,
}

/// Generates `count` series; series `i` uses seed `seed + i`.
pub fn generate_items(
    family: Family,
    count: usize,
    seed: u64,
    noise_sigma: f64,
    pool: Option<&LabeledPool>,
) -> Result<Vec<Item>> {
    (0..count)
        .map(|i| {
            let mut spec = SyntheticSpec::new(family, seed.wrapping_add(i as u64));
            spec.noise_sigma = noise_sigma;
            let (series, annotation) = generate(&spec, pool)?;
            Ok(Item {
                name: format!("series_{i:03}"),
                series,
                annotation,
            })
        })
        .collect()
}

/// Writes `NAME.csv` and `NAME.cps` for every item.
pub fn write_items(dir: &Path, items: &[Item]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(items.len());
    for item in items {
        let series = dir.join(format!("{}.csv", item.name));
        io::write_series(&series, &item.series)?;
        io::write_annotation(&series.with_extension("cps"), item.annotation.positions())?;
        written.push(series);
    }
    Ok(written)
}

/// Loads every `*.csv` in `dir` (sorted by name) with its `.cps` sidecar.
pub fn load_items(dir: &Path) -> Result<Vec<Item>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyDataset(dir.into()));
    }
    paths
        .into_iter()
        .map(|p| {
            let series = io::read_series(&p)?;
            let annotation = io::read_annotation(&p.with_extension("cps"))?;
            annotation.check_range(series.start_index(), series.end_index())?;
            Ok(Item {
                name: p.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
                series,
                annotation,
            })
        })
        .collect()
}

/// One cell of the hyperparameter grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub n: usize,
    pub n_epochs: usize,
    pub lr: f64,
}

/// `n in {1, 10}`, `n_epochs in {1, 10}`, `lr in {0.1, 0.01}`.
pub fn default_grid() -> Vec<GridPoint> {
    let mut grid = Vec::with_capacity(8);
    for n in [1, 10] {
        for n_epochs in [1, 10] {
            for lr in [0.1, 0.01] {
                grid.push(GridPoint { n, n_epochs, lr });
            }
        }
    }
    grid
}

/// Serializable copy of an [`EvalReport`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRecord {
    pub series: String,
    pub n_true: usize,
    pub n_detected: usize,
    pub tp_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub rand_index: f64,
    pub detected: Vec<i64>,
}

impl ReportRecord {
    fn new(series: &str, report: &EvalReport, detected: &[i64]) -> Self {
        Self {
            series: series.into(),
            n_true: report.n_true,
            n_detected: report.n_detected,
            tp_count: report.tp_count,
            precision: report.precision,
            recall: report.recall,
            f1: report.f1,
            rand_index: report.rand_index,
            detected: detected.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridResult {
    #[serde(flatten)]
    pub point: GridPoint,
    pub mean_rand_index: f64,
    pub mean_f1: f64,
}

/// Averages over the series of the selected configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub algo: String,
    pub series_count: usize,
    pub k: usize,
    pub l: usize,
    pub alpha: f64,
    pub hidden: Vec<usize>,
    pub threshold: String,
    pub margin: usize,
    pub seed: u64,
    pub grid: Vec<GridResult>,
    /// Index into `grid` of the RI-maximising configuration (first on ties).
    pub best: usize,
    pub best_config: GridPoint,
    pub mean_rand_index: f64,
    pub mean_f1: f64,
    pub per_series: Vec<ReportRecord>,
}

/// One row of the run log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub config: usize,
    pub n: usize,
    pub n_epochs: usize,
    pub lr: f64,
    pub series: String,
    pub seed: u64,
    pub rand_index: f64,
    pub f1: f64,
    pub n_detected: usize,
    pub tp_count: usize,
}

pub struct BenchmarkOutcome {
    pub summary: BenchmarkSummary,
    pub runs: Vec<RunRecord>,
    /// Detector output of the selected configuration, one per series.
    pub best_results: Vec<DetectionResult>,
    pub elapsed: Duration,
}

pub struct BenchmarkPlan<'a> {
    pub algo: Algorithm,
    /// Supplies `k`, `l`, `alpha`, architecture and peak rule; `n`,
    /// `n_epochs`, `lr` and `seed` are overridden per run.
    pub base: &'a DetectorConfig,
    pub grid: &'a [GridPoint],
    pub margin: usize,
    /// Series `i` runs with detector seed `seed + i`.
    pub seed: u64,
    pub workers: usize,
}

/// Scores `detected` against `true_cps` over the index range of `series`.
/// Positions are rebased so the first sample counts as time 1.
pub fn evaluate_on(series: &TimeSeries, true_cps: &[i64], detected: &[i64], margin: usize) -> Result<EvalReport> {
    let offset = series.start_index() - 1;
    let rebase = |cps: &[i64]| cps.iter().map(|c| c - offset).collect::<Vec<_>>();
    let mut report = evaluate(&rebase(true_cps), &rebase(detected), series.len(), margin)?;
    for pair in &mut report.pairs {
        pair.0 += offset;
        pair.1 += offset;
    }
    Ok(report)
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let count = values.len();
    if count == 0 {
        return 0.0;
    }
    values.sum::<f64>() / count as f64
}

pub fn run_benchmark(items: &[Item], plan: &BenchmarkPlan<'_>) -> Result<BenchmarkOutcome> {
    if items.is_empty() {
        return Err(Error::Config("benchmark needs at least one series".into()));
    }
    if plan.grid.is_empty() {
        return Err(Error::Config("benchmark grid is empty".into()));
    }
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let jobs: Vec<(usize, usize)> = (0..plan.grid.len())
        .flat_map(|g| (0..items.len()).map(move |s| (g, s)))
        .collect();
    let outputs: Vec<Result<(DetectionResult, EvalReport)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(g, s)| {
                let point = plan.grid[g];
                let item = &items[s];
                let cfg = DetectorConfig {
                    n: point.n,
                    n_epochs: point.n_epochs,
                    lr: point.lr,
                    seed: plan.seed.wrapping_add(s as u64),
                    ..plan.base.clone()
                };
                let result = run_algorithm(plan.algo, &item.series, &cfg, &mut WallClock::default())?;
                let report = evaluate_on(&item.series, item.annotation.positions(), &result.detected, plan.margin)?;
                Ok((result, report))
            })
            .collect()
    });
    let mut outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut runs = Vec::with_capacity(jobs.len());
    let mut grid = Vec::with_capacity(plan.grid.len());
    for (g, point) in plan.grid.iter().enumerate() {
        let block = &outputs[g * items.len()..(g + 1) * items.len()];
        for (s, (result, report)) in block.iter().enumerate() {
            runs.push(RunRecord {
                config: g,
                n: point.n,
                n_epochs: point.n_epochs,
                lr: point.lr,
                series: items[s].name.clone(),
                seed: plan.seed.wrapping_add(s as u64),
                rand_index: report.rand_index,
                f1: report.f1,
                n_detected: result.detected.len(),
                tp_count: report.tp_count,
            });
        }
        grid.push(GridResult {
            point: *point,
            mean_rand_index: mean(block.iter().map(|(_, r)| r.rand_index)),
            mean_f1: mean(block.iter().map(|(_, r)| r.f1)),
        });
    }

    let mut best = 0;
    for (g, r) in grid.iter().enumerate() {
        if r.mean_rand_index > grid[best].mean_rand_index {
            best = g;
        }
    }
    let best_block: Vec<(DetectionResult, EvalReport)> =
        outputs.drain(best * items.len()..(best + 1) * items.len()).collect();
    let per_series: Vec<ReportRecord> = best_block
        .iter()
        .zip(items)
        .map(|((res, rep), item)| ReportRecord::new(&item.name, rep, &res.detected))
        .collect();

    let summary = BenchmarkSummary {
        algo: plan.algo.name().into(),
        series_count: items.len(),
        k: plan.base.k,
        l: plan.base.l,
        alpha: plan.base.alpha,
        hidden: plan.base.arch.hidden.clone(),
        threshold: format_threshold(plan.base.peaks.threshold),
        margin: plan.margin,
        seed: plan.seed,
        best_config: plan.grid[best],
        mean_rand_index: mean(per_series.iter().map(|r| r.rand_index)),
        mean_f1: mean(per_series.iter().map(|r| r.f1)),
        grid,
        best,
        per_series,
    };
    Ok(BenchmarkOutcome {
        summary,
        runs,
        best_results: best_block.into_iter().map(|(r, _)| r).collect(),
        elapsed: started.elapsed(),
    })
}

pub fn summary_json(summary: &BenchmarkSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}

pub fn format_runs(runs: &[RunRecord]) -> String {
    let mut out = String::from("config,n,n_epochs,lr,series,seed,rand_index,f1,n_detected,tp_count\n");
    for r in runs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.config,
            r.n,
            r.n_epochs,
            io::fmt_f64(r.lr),
            r.series,
            r.seed,
            io::fmt_f64(r.rand_index),
            io::fmt_f64(r.f1),
            r.n_detected,
            r.tp_count
        ));
    }
    out
}

/// Writes `summary.json`, `runs.csv` and `scores/NAME.csv` for the selected
/// configuration. Wall time is deliberately left out of every file.
pub fn write_outcome(dir: &Path, items: &[Item], outcome: &BenchmarkOutcome) -> Result<()> {
    let scores = dir.join("scores");
    fs::create_dir_all(&scores).map_err(|e| Error::io(&scores, e))?;
    let summary = dir.join("summary.json");
    fs::write(&summary, summary_json(&outcome.summary)).map_err(|e| Error::io(&summary, e))?;
    let runs = dir.join("runs.csv");
    fs::write(&runs, format_runs(&outcome.runs)).map_err(|e| Error::io(&runs, e))?;
    for (item, result) in items.iter().zip(&outcome.best_results) {
        io::write_scores(&scores.join(format!("{}.csv", item.name)), result)?;
    }
    Ok(())
}
