use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use nncpd::bench::{self, BenchmarkPlan, WallClock};
use nncpd::config::RunConfig;
use nncpd::io;
use nncpd::plot::render_svg;
use nncpd_core::datagen::Family;
use nncpd_core::detect::{run_algorithm, Algorithm};

#[derive(Parser)]
#[command(name = "nncpd", version, about = "Online neural-network change-point detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic series and their change points.
    Generate(GenerateArgs),
    /// Run a detector over one series and write its score file.
    Detect(DetectArgs),
    /// Compare detections with an annotation.
    Evaluate(EvaluateArgs),
    /// Grid search over a directory of annotated series.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// mean_jumps, variance_jumps, cov_jumps or class_alternation.
    #[arg(long)]
    family: String,
    /// Number of series.
    #[arg(long, default_value_t = 10)]
    series: usize,
    /// Series i is generated with seed + i.
    #[arg(long, env = "CPD_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "data")]
    out: PathBuf,
    /// Labeled CSV (`label,f1,..`) for class_alternation.
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Additive noise for class_alternation.
    #[arg(long, default_value_t = 2.0)]
    noise: f64,
}

/// Detector flags; each one overrides the value from `--config`.
#[derive(Args)]
struct DetectorFlags {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// onnc or onnr.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Hidden layer widths, comma separated; empty for none.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// tanh or relu.
    #[arg(long)]
    activation: Option<String>,
    /// linear or softplus.
    #[arg(long)]
    ratio_head: Option<String>,
    /// noise_floor:F, mean_std:F or absolute:V.
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    min_distance: Option<usize>,
    #[arg(long, env = "CPD_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    margin: Option<usize>,
}

impl DetectorFlags {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let Some(algo) = &self.algo else {
                    bail!("--algo is required when no --config is given");
                };
                RunConfig::new(algo.parse()?)
            }
        };
        if let Some(v) = &self.algo {
            cfg.algo = v.clone();
        }
        macro_rules! take {
            ($($f:ident),*) => {$(if let Some(v) = &self.$f { cfg.$f = v.clone(); })*};
        }
        take!(k, n, l, epochs, lr, alpha, hidden, activation, ratio_head, threshold, seed, margin);
        if self.min_distance.is_some() {
            cfg.min_distance = self.min_distance;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Series CSV; falls back to `series` in the config file.
    series: Option<PathBuf>,
    #[command(flatten)]
    flags: DetectorFlags,
    /// Score CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Two-panel SVG of signal and score.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Change points to evaluate against; the report goes to standard error.
    #[arg(long)]
    annotation: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Score CSV or a list of positions, one per line.
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    annotation: PathBuf,
    #[arg(long, default_value_t = nncpd_core::metrics::DEFAULT_MARGIN)]
    margin: usize,
    /// Series length; positions are taken over 1..=length.
    #[arg(long, conflicts_with = "series")]
    length: Option<usize>,
    /// Series CSV supplying the index range.
    #[arg(long)]
    series: Option<PathBuf>,
    /// Report file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Directory of `*.csv` series with `.cps` sidecars.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    algo: String,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Series i runs with detector seed seed + i.
    #[arg(long, env = "CPD_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "bench")]
    out: PathBuf,
    /// Fixed detector settings outside the grid (k, l, alpha, ...).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    margin: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Detect(a) => detect(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Benchmark(a) => benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn generate(a: GenerateArgs) -> anyhow::Result<()> {
    let family: Family = a.family.parse()?;
    let pool = match (&a.pool, family) {
        (Some(p), _) => Some(io::read_pool(p)?),
        (None, Family::ClassAlternation) => bail!("class_alternation needs --pool"),
        (None, _) => None,
    };
    let noise = if family == Family::ClassAlternation { a.noise } else { 0.0 };
    let items = bench::generate_items(family, a.series, a.seed, noise, pool.as_ref())?;
    let paths = bench::write_items(&a.out, &items)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "path,seed,length,dim,change_points")?;
    for (i, (item, path)) in items.iter().zip(&paths).enumerate() {
        writeln!(
            stdout,
            "{},{},{},{},{}",
            path.display(),
            a.seed.wrapping_add(i as u64),
            item.series.len(),
            item.series.dim(),
            item.annotation.len()
        )?;
    }
    Ok(())
}

fn write_or_print(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn detect(a: DetectArgs) -> anyhow::Result<()> {
    let run = a.flags.resolve()?;
    let algo = run.algorithm()?;
    let cfg = run.detector_config()?;
    let Some(series_path) = a.series.as_ref().or(run.series.as_ref()) else {
        bail!("no series given");
    };
    let series = io::read_series(series_path)?;
    let result = run_algorithm(algo, &series, &cfg, &mut WallClock::default())?;

    let out = a.out.as_ref().or(run.scores.as_ref());
    write_or_print(out.map(PathBuf::as_path), &io::format_scores(&io::score_rows(&result)))?;

    let annotation = match a.annotation.as_ref().or(run.annotation.as_ref()) {
        Some(p) => Some(io::read_annotation(p)?),
        None => None,
    };
    if let Some(plot) = a.plot.as_ref().or(run.plot.as_ref()) {
        let svg = render_svg(&series, &result, annotation.as_ref().map(|a| a.positions()));
        fs::write(plot, svg).with_context(|| format!("writing {}", plot.display()))?;
    }
    eprintln!(
        "{}: {} detections, threshold {}, {} steps in {:.3}s",
        algo.name(),
        result.detected.len(),
        io::fmt_f64(result.threshold),
        result.timing.steps,
        result.timing.total_nanos as f64 * 1e-9
    );
    if let Some(annotation) = annotation {
        let report = bench::evaluate_on(&series, annotation.positions(), &result.detected, run.margin)?;
        if let Some(p) = &run.report {
            io::write_report(p, &report)?;
        }
        eprint!("{}", io::format_report(&report));
    }
    Ok(())
}

fn read_detections(path: &Path) -> anyhow::Result<Vec<i64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.starts_with(io::SCORE_HEADER) {
        let rows = io::read_scores_from(text.as_bytes(), path)?;
        Ok(io::detections(&rows))
    } else {
        Ok(io::parse_annotation(&text, path)?.into_inner())
    }
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let detected = read_detections(&a.detections)?;
    let annotation = io::read_annotation(&a.annotation)?;
    let report = match (&a.series, a.length) {
        (Some(p), _) => bench::evaluate_on(&io::read_series(p)?, annotation.positions(), &detected, a.margin)?,
        (None, Some(len)) => nncpd_core::metrics::evaluate(annotation.positions(), &detected, len, a.margin)?,
        (None, None) => bail!("the series length is unknown; pass --length or --series"),
    };
    let text = io::format_report(&report);
    print!("{text}");
    if let Some(p) = &a.out {
        io::write_report(p, &report)?;
    }
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> anyhow::Result<()> {
    let algo: Algorithm = a.algo.parse()?;
    let mut run = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::new(algo),
    };
    run.algo = algo.name().into();
    run.seed = a.seed;
    macro_rules! take {
        ($($f:ident),*) => {$(if let Some(v) = &a.$f { run.$f = v.clone(); })*};
    }
    take!(k, l, alpha, hidden, threshold, margin);
    let grid = bench::default_grid();
    // every grid point must be valid, not just the base
    for p in &grid {
        RunConfig {
            n: p.n,
            epochs: p.n_epochs,
            lr: p.lr,
            ..run.clone()
        }
        .detector_config()?;
    }
    let base = run.detector_config()?;
    let workers = a
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        bail!("--workers must be >= 1");
    }

    let items = bench::load_items(&a.data)?;
    let plan = BenchmarkPlan {
        algo,
        base: &base,
        grid: &grid,
        margin: run.margin,
        seed: a.seed,
        workers,
    };
    let outcome = bench::run_benchmark(&items, &plan)?;
    bench::write_outcome(&a.out, &items, &outcome)?;
    let timing = a.out.join("timing.txt");
    let secs = outcome.elapsed.as_secs_f64();
    fs::write(&timing, format!("total_seconds={secs:.3}\nruns={}\nworkers={workers}\n", outcome.runs.len()))
        .with_context(|| format!("writing {}", timing.display()))?;

    let s = &outcome.summary;
    println!(
        "{}: best n={} n_epochs={} lr={} over {} series: mean RI {:.4}, mean F1 {:.4}",
        s.algo,
        s.best_config.n,
        s.best_config.n_epochs,
        s.best_config.lr,
        s.series_count,
        s.mean_rand_index,
        s.mean_f1
    );
    eprintln!("{} runs in {secs:.2}s on {workers} workers", outcome.runs.len());
    Ok(())
}
