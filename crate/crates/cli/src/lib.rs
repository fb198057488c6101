//! Command implementations behind the `cast` binary. Each `cmd_*` function
//! does the work of one subcommand and returns a summary; `execute` prints
//! the summaries and maps the outcome to an exit code.

pub mod spec;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cast::config::FileConfig;
use cast::corpus::{Corpus, SplitTag};
use cast::engine::{baseline_run, run_experiment, ExperimentConfig};
use cast::io::{corpus_to_bytes, load_corpus, save_corpus};
use cast::learner::{DecisionMode, Learner, LinearOvr};
use cast::report::{
    write_baseline_artifacts, write_csv_file, write_experiment_artifacts, write_json_file,
    CompareRow, SummaryRow, TestSummary, TrajectoryRow, WideTable,
};
use cast::synth::{flag_known_facts, generate, ingest_docred_json, Featurization, GeneratorConfig};

pub use spec::{ParamFlags, StrategyKind, StrategySpec};

pub const CORPUS_FILES: [&str; 3] = ["train.jsonl", "dev.jsonl", "test.jsonl"];

#[derive(Debug, Parser)]
#[command(
    name = "cast",
    version,
    about = "Class-adaptive self-training experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic train/dev/test corpus.
    Generate(GenerateArgs),
    /// Run one strategy on a corpus.
    Run(RunArgs),
    /// Run every strategy for every seed and tabulate the results.
    Compare(CompareArgs),
    /// Run CAST for several beta values and tabulate dev trajectories.
    BetaSweep(BetaSweepArgs),
    /// Convert a DocRED-format JSON file into a corpus file.
    IngestDocred(IngestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the generator seed of the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

/// Experiment settings shared by `run`, `compare` and `beta-sweep`. Flags
/// win over the `[experiment]` table of `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentFlags {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Score dev against its corrupted labels.
    #[arg(long)]
    pub corrupt_dev: bool,
    /// Emit at most one class per instance.
    #[arg(long)]
    pub single_label: bool,
}

impl ExperimentFlags {
    fn params(&self) -> ParamFlags {
        ParamFlags {
            beta: self.beta,
            alpha: self.alpha,
            gamma: self.gamma,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Directory holding train.jsonl, dev.jsonl and test.jsonl.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "cast")]
    pub strategy: StrategySpec,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub exp: ExperimentFlags,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Corpus directory shared by all seeds. Without it, each seed gets a
    /// corpus generated from the `[generator]` table with that seed.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(
        long = "strategy",
        visible_alias = "strategies",
        value_delimiter = ',',
        required = true
    )]
    pub strategies: Vec<StrategySpec>,
    #[arg(
        long = "seeds",
        visible_alias = "seed",
        value_delimiter = ',',
        required = true
    )]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub exp: ExperimentFlags,
}

#[derive(Debug, Clone, Args)]
pub struct BetaSweepArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long = "betas", value_delimiter = ',', required = true)]
    pub betas: Vec<f64>,
    #[arg(
        long = "seeds",
        visible_alias = "seed",
        value_delimiter = ',',
        required = true
    )]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub exp: ExperimentFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Dev,
    Test,
}

impl From<SplitArg> for SplitTag {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => SplitTag::Train,
            SplitArg::Dev => SplitTag::Dev,
            SplitArg::Test => SplitTag::Test,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub split: SplitArg,
    /// Previously ingested train corpus; supplies the label space and the
    /// facts used to flag known facts in dev and test.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Width of the hashed feature vector.
    #[arg(long, default_value_t = 1024)]
    pub dim: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

/// Provenance record written next to every command's artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub command: String,
    pub tool_version: String,
    pub generator: Option<GeneratorConfig>,
    pub experiment: Option<ExperimentConfig>,
    pub strategies: Vec<String>,
    pub seeds: Vec<u64>,
    /// Paths relative to the manifest's directory.
    pub artifacts: Vec<String>,
    pub wall_clock_seconds: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn write_manifest(
    dir: &Path,
    mut manifest: RunManifest,
    artifacts: &[PathBuf],
    started: Instant,
) -> Result<PathBuf> {
    let mut rel: Vec<String> = artifacts
        .iter()
        .map(|p| {
            p.strip_prefix(dir)
                .unwrap_or(p)
                .to_string_lossy()
                .replace('\\', "/")
        })
        .collect();
    rel.sort();
    rel.dedup();
    manifest.artifacts = rel;
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    let path = dir.join(MANIFEST_FILE);
    write_json_file(&path, &manifest)?;
    Ok(path)
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        Some(p) => FileConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(FileConfig::default()),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// Prepares an output directory: refuses to reuse a non-empty one unless
/// `force`, in which case its previous contents are removed.
fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .next()
            .is_some();
        if non_empty {
            if !force {
                bail!(
                    "{} already exists and is not empty; pass --force to overwrite",
                    dir.display()
                );
            }
            fs::remove_dir_all(dir).with_context(|| format!("removing {}", dir.display()))?;
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Train, dev and test corpora of one experiment.
#[derive(Debug, Clone)]
pub struct Corpora {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
}

impl Corpora {
    pub fn load(dir: &Path) -> Result<Self> {
        let load = |name: &str| {
            let p = dir.join(name);
            load_corpus(&p).with_context(|| format!("loading {}", p.display()))
        };
        Ok(Corpora {
            train: load(CORPUS_FILES[0])?,
            dev: load(CORPUS_FILES[1])?,
            test: load(CORPUS_FILES[2])?,
        })
    }

    pub fn generate(cfg: &GeneratorConfig) -> Result<Self> {
        let (train, dev, test) = generate(cfg)?;
        Ok(Corpora { train, dev, test })
    }

    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for (c, name) in [&self.train, &self.dev, &self.test]
            .into_iter()
            .zip(CORPUS_FILES)
        {
            let p = dir.join(name);
            save_corpus(c, &p)?;
            out.push(p);
        }
        Ok(out)
    }

    /// SHA-256 over the serialised corpora.
    pub fn digest(&self) -> Result<String> {
        let mut h = Sha256::new();
        for c in [&self.train, &self.dev, &self.test] {
            h.update(corpus_to_bytes(c)?);
        }
        Ok(hex(&h.finalize()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitStats {
    pub split: String,
    pub docs: usize,
    pub instances: usize,
    pub gold: usize,
    pub observed: usize,
    /// Fraction of instances without any gold label.
    pub na_rate: f64,
}

impl SplitStats {
    pub fn of(c: &Corpus) -> Self {
        let labels = c.reference_labels();
        let positive: std::collections::HashSet<(&str, &str)> = labels
            .iter()
            .map(|l| (l.doc_id.as_str(), l.instance_id.as_str()))
            .collect();
        let n = c.num_instances();
        SplitStats {
            split: c.split_tag.to_string(),
            docs: c.documents.len(),
            instances: n,
            gold: labels.len(),
            observed: c.observed.len(),
            na_rate: if n == 0 {
                0.0
            } else {
                1.0 - positive.len() as f64 / n as f64
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenerateSummary {
    pub splits: Vec<SplitStats>,
    pub files: Vec<PathBuf>,
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<GenerateSummary> {
    let started = Instant::now();
    let mut file = load_file_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        file.generator.seed = s;
    }
    file.generator.validate()?;
    prepare_dir(&args.out, args.force)?;
    let corpora = Corpora::generate(&file.generator)?;
    let files = corpora.save(&args.out)?;
    let splits = [&corpora.train, &corpora.dev, &corpora.test]
        .map(SplitStats::of)
        .to_vec();
    let manifest = RunManifest {
        name: "generate".into(),
        command: "generate".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        generator: Some(file.generator.clone()),
        experiment: None,
        strategies: Vec::new(),
        seeds: vec![file.generator.seed],
        artifacts: Vec::new(),
        wall_clock_seconds: 0.0,
    };
    write_manifest(&args.out, manifest, &files, started)?;
    Ok(GenerateSummary { splits, files })
}

/// Experiment configuration for one (strategy, seed) cell.
pub fn resolve_experiment(
    base: &ExperimentConfig,
    flags: &ExperimentFlags,
    spec: &StrategySpec,
    seed: u64,
) -> ExperimentConfig {
    let mut cfg = base.clone();
    let params = flags.params();
    if let Some(r) = flags.rounds {
        cfg.rounds = r;
    }
    if let Some(f) = flags.folds {
        cfg.folds = f;
    }
    cfg.corrupt_dev |= flags.corrupt_dev;
    if flags.single_label {
        cfg.learner.decision_mode = DecisionMode::SingleLabel;
    }
    if let Some(s) = spec.self_training(&params) {
        cfg.strategy = s;
    }
    if let Some(g) = spec.gamma(&params) {
        cfg.learner.negative_sampling_rate = g;
    }
    cfg.master_seed = seed;
    cfg
}

/// Result of one (strategy, seed) cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub test: TestSummary,
    /// Round-model dev scores; a single round-0 row without self-training.
    pub trajectory: Vec<SummaryRow>,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Serialize)]
struct CellConfig<'a> {
    strategy: String,
    corpus_digest: &'a str,
    experiment: &'a ExperimentConfig,
}

/// Runs one cell and writes its artifacts (plus `config.json`) into `dir`.
pub fn run_cell(
    spec: &StrategySpec,
    cfg: &ExperimentConfig,
    corpora: &Corpora,
    digest: &str,
    dir: &Path,
) -> Result<CellOutcome> {
    cfg.validate()?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let config_path = dir.join("config.json");
    write_json_file(
        &config_path,
        &CellConfig {
            strategy: spec.label(),
            corpus_digest: digest,
            experiment: cfg,
        },
    )?;
    let learner = LinearOvr::new(cfg.learner.clone());
    let label = spec.label();
    let (test, trajectory, mut artifacts) = if spec.kind.is_self_training() {
        let out = run_experiment(&learner, &corpora.train, &corpora.dev, &corpora.test, cfg)?;
        let model_json = learner.model_json(&out.best_model)?;
        let artifacts = write_experiment_artifacts(dir, &label, &out, &model_json)?;
        let trajectory = out
            .rounds
            .iter()
            .map(|r| SummaryRow::new(r.round, &r.round_model_dev, r.pseudo_kept))
            .collect();
        (
            TestSummary::new(&label, out.best_round, &out.test),
            trajectory,
            artifacts,
        )
    } else {
        let out = baseline_run(
            &learner,
            &corpora.train,
            &corpora.dev,
            &corpora.test,
            cfg.master_seed,
            cfg.corrupt_dev,
        )?;
        let model_json = learner.model_json(&out.model)?;
        let artifacts = write_baseline_artifacts(dir, &label, &out.dev, &out.test, &model_json)?;
        (
            TestSummary::new(&label, 0, &out.test),
            vec![SummaryRow::new(0, &out.dev, 0)],
            artifacts,
        )
    };
    artifacts.push(config_path);
    Ok(CellOutcome {
        test,
        trajectory,
        artifacts,
    })
}

/// Hash naming a `run` directory: strategy, resolved config and corpus.
pub fn config_hash(spec: &StrategySpec, cfg: &ExperimentConfig, digest: &str) -> Result<String> {
    let text = serde_json::to_string(&CellConfig {
        strategy: spec.label(),
        corpus_digest: digest,
        experiment: cfg,
    })?;
    Ok(hex(&Sha256::digest(text.as_bytes()))[..12].to_owned())
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub test: TestSummary,
}

pub fn cmd_run(args: &RunArgs) -> Result<RunSummary> {
    let started = Instant::now();
    let file = load_file_config(args.exp.config.as_deref())?;
    let cfg = resolve_experiment(&file.experiment, &args.exp, &args.strategy, args.seed);
    cfg.validate()?;
    let corpora = Corpora::load(&args.corpus)?;
    let digest = corpora.digest()?;
    let dir = args.out.join(format!(
        "{}-{}",
        sanitize(&args.strategy.label()),
        config_hash(&args.strategy, &cfg, &digest)?
    ));
    prepare_dir(&dir, args.force)?;
    let cell = run_cell(&args.strategy, &cfg, &corpora, &digest, &dir)?;
    let generator = read_generator_manifest(&args.corpus);
    let manifest = RunManifest {
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        command: "run".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        generator,
        experiment: Some(cfg),
        strategies: vec![args.strategy.label()],
        seeds: vec![args.seed],
        artifacts: Vec::new(),
        wall_clock_seconds: 0.0,
    };
    write_manifest(&dir, manifest, &cell.artifacts, started)?;
    Ok(RunSummary {
        dir,
        test: cell.test,
    })
}

/// Generator settings recorded by `generate` next to a corpus, if any.
fn read_generator_manifest(corpus_dir: &Path) -> Option<GeneratorConfig> {
    let m: RunManifest = cast::report::read_json_file(&corpus_dir.join(MANIFEST_FILE)).ok()?;
    m.generator
}

/// Where the corpora of a multi-seed command come from.
enum CorpusSource {
    Shared(Box<(Corpora, String)>),
    PerSeed(Vec<(u64, Corpora, String)>),
}

impl CorpusSource {
    fn build(corpus: Option<&Path>, generator: &GeneratorConfig, seeds: &[u64]) -> Result<Self> {
        match corpus {
            Some(dir) => {
                let c = Corpora::load(dir)?;
                let d = c.digest()?;
                Ok(CorpusSource::Shared(Box::new((c, d))))
            }
            None => {
                let built: Result<Vec<_>> = seeds
                    .par_iter()
                    .map(|&s| {
                        let cfg = GeneratorConfig {
                            seed: s,
                            ..generator.clone()
                        };
                        let c = Corpora::generate(&cfg)?;
                        let d = c.digest()?;
                        Ok((s, c, d))
                    })
                    .collect();
                Ok(CorpusSource::PerSeed(built?))
            }
        }
    }

    fn get(&self, seed: u64) -> (&Corpora, &str) {
        match self {
            CorpusSource::Shared(b) => (&b.0, &b.1),
            CorpusSource::PerSeed(v) => {
                let (_, c, d) = v
                    .iter()
                    .find(|(s, _, _)| *s == seed)
                    .expect("corpus generated for every seed");
                (c, d)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub strategy: String,
    pub seed: u64,
    pub error: String,
}

struct Cell {
    spec: StrategySpec,
    seed: u64,
    dir: PathBuf,
    cfg: ExperimentConfig,
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        b = b.num_threads(j);
    }
    b.build().context("building thread pool")
}

fn run_cells(
    cells: &[Cell],
    source: &CorpusSource,
    jobs: Option<usize>,
) -> Result<Vec<Result<CellOutcome, String>>> {
    let pool = thread_pool(jobs)?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|c| {
                let (corpora, digest) = source.get(c.seed);
                let r = run_cell(&c.spec, &c.cfg, corpora, digest, &c.dir)
                    .map_err(|e| format!("{e:#}"));
                if let Err(e) = &r {
                    log::error!("{} seed {} failed: {e}", c.spec, c.seed);
                }
                r
            })
            .collect()
    }))
}

#[derive(Debug, Clone)]
pub struct CompareSummary {
    pub rows: Vec<CompareRow>,
    pub trajectories: Vec<TrajectoryRow>,
    pub failures: Vec<FailureRow>,
    /// Per-cell test summaries in (strategy, seed) order; `None` on failure.
    pub cells: Vec<(String, u64, Option<TestSummary>)>,
}

pub fn cmd_compare(args: &CompareArgs) -> Result<CompareSummary> {
    let started = Instant::now();
    if args.strategies.is_empty() || args.seeds.is_empty() {
        bail!("compare needs at least one strategy and one seed");
    }
    let file = load_file_config(args.exp.config.as_deref())?;
    let source = CorpusSource::build(args.corpus.as_deref(), &file.generator, &args.seeds)?;
    prepare_dir(&args.out, args.force)?;
    let mut cells = Vec::new();
    for spec in &args.strategies {
        for &seed in &args.seeds {
            let cfg = resolve_experiment(&file.experiment, &args.exp, spec, seed);
            cfg.validate()?;
            cells.push(Cell {
                spec: *spec,
                seed,
                dir: args
                    .out
                    .join("runs")
                    .join(sanitize(&spec.label()))
                    .join(format!("seed_{seed}")),
                cfg,
            });
        }
    }
    let results = run_cells(&cells, &source, args.jobs)?;

    let mut artifacts = Vec::new();
    let mut failures = Vec::new();
    let mut trajectories = Vec::new();
    let mut per_cell = Vec::new();
    for (cell, r) in cells.iter().zip(&results) {
        match r {
            Ok(o) => {
                artifacts.extend(o.artifacts.iter().cloned());
                if cell.spec.kind.is_self_training() {
                    trajectories.extend(o.trajectory.iter().map(|s| TrajectoryRow {
                        strategy: cell.spec.label(),
                        seed: cell.seed,
                        round: s.round,
                        p: s.p,
                        r: s.r,
                        f1: s.f1,
                        pseudo_kept: s.pseudo_kept,
                    }));
                }
                per_cell.push((cell.spec.label(), cell.seed, Some(o.test.clone())));
            }
            Err(e) => {
                failures.push(FailureRow {
                    strategy: cell.spec.label(),
                    seed: cell.seed,
                    error: e.clone(),
                });
                per_cell.push((cell.spec.label(), cell.seed, None));
            }
        }
    }
    let rows: Vec<CompareRow> = args
        .strategies
        .iter()
        .map(|spec| {
            let label = spec.label();
            let runs: Vec<Option<&TestSummary>> = per_cell
                .iter()
                .filter(|(l, _, _)| *l == label)
                .map(|(_, _, t)| t.as_ref())
                .collect();
            CompareRow::from_runs(&label, &runs)
        })
        .collect();

    let p = args.out.join("compare.csv");
    write_csv_file(&p, &rows)?;
    artifacts.push(p);
    let p = args.out.join("trajectories.csv");
    write_csv_file(&p, &trajectories)?;
    artifacts.push(p);
    let p = args.out.join("failures.csv");
    write_failures(&p, &failures)?;
    artifacts.push(p);
    let manifest = RunManifest {
        name: args
            .out
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        command: "compare".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        generator: match args.corpus {
            Some(ref d) => read_generator_manifest(d),
            None => Some(file.generator.clone()),
        },
        experiment: Some(resolve_experiment(
            &file.experiment,
            &args.exp,
            &args.strategies[0],
            args.seeds[0],
        )),
        strategies: args.strategies.iter().map(StrategySpec::label).collect(),
        seeds: args.seeds.clone(),
        artifacts: Vec::new(),
        wall_clock_seconds: 0.0,
    };
    write_manifest(&args.out, manifest, &artifacts, started)?;
    Ok(CompareSummary {
        rows,
        trajectories,
        failures,
        cells: per_cell,
    })
}

/// `failures.csv` always has a header, even when nothing failed.
fn write_failures(path: &Path, failures: &[FailureRow]) -> cast::Result<()> {
    if failures.is_empty() {
        fs::write(path, "strategy,seed,error\n").map_err(|e| cast::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    } else {
        write_csv_file(path, failures)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub seed: u64,
    pub round: usize,
    pub f1: f64,
    pub pseudo_kept: u64,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    /// Mean round-model dev F1 per round, one column per beta.
    pub f1: WideTable,
    /// Mean pseudo labels kept per round, one column per beta.
    pub kept: WideTable,
    pub runs: Vec<SweepRow>,
    pub failures: Vec<FailureRow>,
}

fn beta_column(b: f64) -> String {
    format!("beta={b}")
}

pub fn cmd_beta_sweep(args: &BetaSweepArgs) -> Result<SweepSummary> {
    let started = Instant::now();
    if args.betas.is_empty() || args.seeds.is_empty() {
        bail!("beta-sweep needs at least one beta and one seed");
    }
    if let Some(b) = args.betas.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
        bail!("beta values must be finite and non-negative, got {b}");
    }
    let file = load_file_config(args.exp.config.as_deref())?;
    let source = CorpusSource::build(args.corpus.as_deref(), &file.generator, &args.seeds)?;
    prepare_dir(&args.out, args.force)?;
    let mut cells = Vec::new();
    for &beta in &args.betas {
        let spec = StrategySpec {
            kind: StrategyKind::Cast,
            param: Some(beta),
        };
        for &seed in &args.seeds {
            let cfg = resolve_experiment(&file.experiment, &args.exp, &spec, seed);
            cfg.validate()?;
            cells.push(Cell {
                spec,
                seed,
                dir: args
                    .out
                    .join("runs")
                    .join(sanitize(&beta_column(beta)))
                    .join(format!("seed_{seed}")),
                cfg,
            });
        }
    }
    let results = run_cells(&cells, &source, args.jobs)?;

    let mut artifacts = Vec::new();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (cell, r) in cells.iter().zip(&results) {
        let beta = cell.spec.param.expect("sweep specs carry beta");
        match r {
            Ok(o) => {
                artifacts.extend(o.artifacts.iter().cloned());
                runs.extend(o.trajectory.iter().map(|s| SweepRow {
                    beta,
                    seed: cell.seed,
                    round: s.round,
                    f1: s.f1,
                    pseudo_kept: s.pseudo_kept,
                }));
            }
            Err(e) => failures.push(FailureRow {
                strategy: cell.spec.label(),
                seed: cell.seed,
                error: e.clone(),
            }),
        }
    }
    let max_round = runs.iter().map(|r| r.round).max().unwrap_or(0);
    let table = |f: fn(&SweepRow) -> f64| WideTable {
        columns: args.betas.iter().map(|&b| beta_column(b)).collect(),
        rows: (1..=max_round)
            .map(|round| {
                let vals = args
                    .betas
                    .iter()
                    .map(|&b| {
                        let xs: Vec<f64> = runs
                            .iter()
                            .filter(|r| r.beta == b && r.round == round)
                            .map(f)
                            .collect();
                        cast::report::mean_sd(&xs).map(|(m, _)| m)
                    })
                    .collect();
                (round, vals)
            })
            .collect(),
    };
    let f1 = table(|r| r.f1);
    let kept = table(|r| r.pseudo_kept as f64);
    for (name, t) in [("beta_sweep_f1.csv", &f1), ("beta_sweep_kept.csv", &kept)] {
        let p = args.out.join(name);
        let fh = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        t.write(fh)?;
        artifacts.push(p);
    }
    let p = args.out.join("beta_sweep_runs.csv");
    write_csv_file(&p, &runs)?;
    artifacts.push(p);
    let p = args.out.join("failures.csv");
    write_failures(&p, &failures)?;
    artifacts.push(p);
    let spec0 = StrategySpec {
        kind: StrategyKind::Cast,
        param: Some(args.betas[0]),
    };
    let manifest = RunManifest {
        name: args
            .out
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        command: "beta-sweep".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        generator: match args.corpus {
            Some(ref d) => read_generator_manifest(d),
            None => Some(file.generator.clone()),
        },
        experiment: Some(resolve_experiment(
            &file.experiment,
            &args.exp,
            &spec0,
            args.seeds[0],
        )),
        strategies: args.betas.iter().map(|&b| beta_column(b)).collect(),
        seeds: args.seeds.clone(),
        artifacts: Vec::new(),
        wall_clock_seconds: 0.0,
    };
    write_manifest(&args.out, manifest, &artifacts, started)?;
    Ok(SweepSummary {
        f1,
        kept,
        runs,
        failures,
    })
}

#[derive(Debug, Clone)]
pub struct IngestSummary {
    pub stats: SplitStats,
    pub classes: usize,
    pub known_facts: usize,
}

pub fn cmd_ingest_docred(args: &IngestArgs) -> Result<IngestSummary> {
    if args.out.exists() && !args.force {
        bail!(
            "{} already exists; pass --force to overwrite",
            args.out.display()
        );
    }
    let train = match &args.train {
        Some(p) => Some(load_corpus(p).with_context(|| format!("loading {}", p.display()))?),
        None => None,
    };
    if args.split != SplitArg::Train && train.is_none() {
        log::warn!("no --train corpus given: label space is derived from this file and no known facts are flagged");
    }
    let mut corpus = ingest_docred_json(
        &args.input,
        Featurization::HashedBow { dim: args.dim },
        args.split.into(),
        train.as_ref().map(|t| &t.label_space),
    )
    .with_context(|| format!("ingesting {}", args.input.display()))?;
    if let Some(t) = &train {
        flag_known_facts(&mut corpus, t);
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    save_corpus(&corpus, &args.out)?;
    Ok(IngestSummary {
        stats: SplitStats::of(&corpus),
        classes: corpus.label_space.len(),
        known_facts: corpus
            .reference_labels()
            .iter()
            .filter(|l| l.known_fact)
            .count(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

/// Runs a parsed command line, printing summaries to stdout. Returns the
/// process exit code: 0 only when every requested run completed.
pub fn execute(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Generate(a) => {
            let s = cmd_generate(a)?;
            for st in &s.splits {
                println!(
                    "{}: docs={} instances={} gold={} observed={} na_rate={:.4}",
                    st.split, st.docs, st.instances, st.gold, st.observed, st.na_rate
                );
            }
            Ok(0)
        }
        Command::Run(a) => {
            let s = cmd_run(a)?;
            println!(
                "{} best_round={} test_f1={:.4} dir={}",
                s.test.strategy,
                s.test.best_round,
                s.test.f1,
                s.dir.display()
            );
            Ok(0)
        }
        Command::Compare(a) => {
            let s = cmd_compare(a)?;
            println!(
                "{:<14} {:>4} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}",
                "strategy", "runs", "failed", "p", "r", "f1", "freq_f1", "lt_f1"
            );
            for r in &s.rows {
                println!(
                    "{:<14} {:>4} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}",
                    r.strategy,
                    r.runs,
                    r.failed,
                    fmt_opt(r.p_mean),
                    fmt_opt(r.r_mean),
                    fmt_opt(r.f1_mean),
                    fmt_opt(r.freq_f1_mean),
                    fmt_opt(r.lt_f1_mean)
                );
            }
            report_failures(&s.failures)
        }
        Command::BetaSweep(a) => {
            let s = cmd_beta_sweep(a)?;
            for (round, vals) in &s.f1.rows {
                let cells: Vec<String> = vals.iter().map(|v| fmt_opt(*v)).collect();
                println!("round {round}: {}", cells.join(" "));
            }
            report_failures(&s.failures)
        }
        Command::IngestDocred(a) => {
            let s = cmd_ingest_docred(a)?;
            println!(
                "{}: docs={} instances={} labels={} classes={} known_facts={}",
                s.stats.split,
                s.stats.docs,
                s.stats.instances,
                s.stats.gold,
                s.classes,
                s.known_facts
            );
            Ok(0)
        }
    }
}

fn report_failures(failures: &[FailureRow]) -> Result<u8> {
    for f in failures {
        eprintln!("failed: {} seed {}: {}", f.strategy, f.seed, f.error);
    }
    Ok(if failures.is_empty() { 0 } else { 1 })
}
