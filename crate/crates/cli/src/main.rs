use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stackdx::metrics::{Metric, MetricReport};
use stackdx::pipeline::{
    inspect, load_dataset, read_json, run_pipeline, stage_evaluate, stage_ingest, stage_train,
    with_workers, SplitManifest, TestMetrics, BUNDLE, DATASET, SPLIT_MANIFEST,
};
use stackdx::stacking::TestScoring;
use stackdx::synth::{emit_csvs, generate_cohort, SyntheticSpec};
use stackdx::{Error, ModelBundle, PipelineConfig, Result};

#[derive(Parser)]
#[command(name = "stackdx", version, about = "Stacked ensemble diagnosis pipeline over MIMIC-III style tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort as MIMIC-III CSV tables.
    Synth(SynthArgs),
    /// Load the tables, build cohorts and encode the feature matrix.
    Ingest(RunArgs),
    /// Split, cross-validate, stack and save the model bundle.
    Train(RunArgs),
    /// Build both testing sets and score the trained bundle on them.
    Evaluate(RunArgs),
    /// Print the feature-importance ranking of a bundle.
    Importance(ImportanceArgs),
    /// Summarize a model bundle.
    Inspect(InspectArgs),
    /// Run every stage.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// TOML config whose `[synthetic]` table is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the CSV files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    patients: Option<usize>,
    #[arg(long)]
    cases: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scoring {
    Refit,
    FoldAverage,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; runs go to `<out>/run-<config hash>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Use a generated cohort (the config's `[synthetic]` table or defaults).
    #[arg(long, conflicts_with = "input")]
    synthetic: bool,
    /// Directory with PATIENTS.csv, ADMISSIONS.csv, DIAGNOSES_ICD.csv and PROCEDURES_ICD.csv.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    holdout: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    test_scoring: Option<Scoring>,
    #[arg(long)]
    bootstrap_resamples: Option<usize>,
    #[arg(long)]
    include_procedures: bool,
    /// Random forest trees.
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Boosting rounds.
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    leaves: Option<usize>,
    /// MLP hidden widths, e.g. `512,256,128`.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
struct ImportanceArgs {
    /// Path to bundle.json.
    bundle: PathBuf,
    /// Rows to print; all when omitted.
    #[arg(long)]
    top: Option<usize>,
}

#[derive(Args)]
struct InspectArgs {
    /// Path to bundle.json.
    bundle: PathBuf,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.output_dir, self.out.clone());
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if let Some(dir) = &self.input {
            cfg.input_dir = Some(dir.clone());
            cfg.synthetic = None;
        }
        if self.synthetic {
            cfg.input_dir = None;
            cfg.synthetic.get_or_insert_with(SyntheticSpec::default);
        }
        set(&mut cfg.holdout, self.holdout);
        set(&mut cfg.folds, self.folds);
        set(&mut cfg.top_n, self.top_n);
        set(&mut cfg.lambda, self.lambda);
        set(
            &mut cfg.test_scoring,
            self.test_scoring.map(|s| match s {
                Scoring::Refit => TestScoring::Refit,
                Scoring::FoldAverage => TestScoring::FoldAverage,
            }),
        );
        set(&mut cfg.bootstrap.resamples, self.bootstrap_resamples);
        cfg.include_procedures |= self.include_procedures;
        let m = &mut cfg.models;
        set(&mut m.forest.n_trees, self.trees);
        if self.max_depth.is_some() {
            m.forest.max_depth = self.max_depth;
        }
        set(&mut m.gbdt.n_rounds, self.rounds);
        set(&mut m.gbdt.learning_rate, self.learning_rate);
        set(&mut m.gbdt.max_leaves, self.leaves);
        set(&mut m.mlp.hidden, self.hidden.clone());
        set(&mut m.mlp.dropout, self.dropout);
        set(&mut m.mlp.epochs, self.epochs);
        set(&mut m.mlp.batch_size, self.batch_size);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn estimate(r: &MetricReport, m: Metric) -> String {
    let e = r.get(m);
    match (e.point, e.lower, e.upper) {
        (Some(p), Some(l), Some(u)) => format!("{p:.4} [{l:.4}, {u:.4}]"),
        (Some(p), _, _) => format!("{p:.4}"),
        _ => "undefined".into(),
    }
}

fn print_report(label: &str, r: &MetricReport) {
    println!(
        "  {label:<5} auc {}  sens {}  spec {}",
        estimate(r, Metric::Auc),
        estimate(r, Metric::Sensitivity),
        estimate(r, Metric::Specificity)
    );
}

fn print_test_metrics(m: &TestMetrics) {
    for (name, set) in [("testing set 1", &m.testing_set_1), ("testing set 2", &m.testing_set_2)] {
        println!("{name} ({} samples, {} cases):", set.n, set.positives);
        for (model, r) in &set.models {
            print_report(model, r);
        }
    }
}

fn require(path: &Path, hint: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} not found; {hint}", path.display())))
    }
}

fn synth(args: &SynthArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => PipelineConfig::load(path)?.synthetic.unwrap_or_default(),
        None => SyntheticSpec::default(),
    };
    set(&mut spec.seed, args.seed);
    set(&mut spec.n_patients, args.patients);
    if args.cases.is_some() {
        spec.case_count = args.cases;
    }
    let cohort = generate_cohort(&spec)?;
    let paths = emit_csvs(&cohort.tables, &args.out)?;
    println!(
        "wrote {} patients ({} cases) to {}",
        spec.n_patients,
        cohort.cases.len(),
        paths.patients.parent().unwrap_or(&args.out).display()
    );
    Ok(())
}

fn ingest(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let run_dir = cfg.run_dir();
    let out = with_workers(cfg.workers, || stage_ingest(&cfg, &run_dir)).map_err(|e| e.in_stage("ingest"))?;
    println!(
        "{}: {} cases, {} controls, {} features",
        run_dir.display(),
        out.report.n_cases,
        out.report.n_controls,
        out.vocabulary.len()
    );
    Ok(())
}

fn train(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let run_dir = cfg.run_dir();
    with_workers(cfg.workers, || {
        let (vocab, data) = if run_dir.join(DATASET).exists() {
            load_dataset(&run_dir).map_err(|e| e.in_stage("ingest"))?
        } else {
            let out = stage_ingest(&cfg, &run_dir).map_err(|e| e.in_stage("ingest"))?;
            (out.vocabulary, out.dataset)
        };
        let out = stage_train(&cfg, &run_dir, &vocab, &data).map_err(|e| e.in_stage("train"))?;
        println!("{}: cross-validated base models", run_dir.display());
        for (model, r) in &out.cv_metrics {
            print_report(model, r);
        }
        Ok(())
    })
}

fn evaluate(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let run_dir = cfg.run_dir();
    for file in [DATASET, SPLIT_MANIFEST, BUNDLE] {
        require(&run_dir.join(file), "run `train` with the same config first")?;
    }
    with_workers(cfg.workers, || {
        let (_, data) = load_dataset(&run_dir)?;
        let split: SplitManifest = read_json(&run_dir.join(SPLIT_MANIFEST))?;
        let bundle = ModelBundle::load(&run_dir.join(BUNDLE))?;
        let metrics = stage_evaluate(&cfg, &run_dir, &data, &split, &bundle)?;
        print_test_metrics(&metrics);
        Ok(())
    })
    .map_err(|e: Error| e.in_stage("evaluate"))
}

fn importance(args: &ImportanceArgs) -> Result<()> {
    let bundle = ModelBundle::load(&args.bundle)?;
    let ranking = bundle.ranking();
    let n = args.top.unwrap_or(ranking.len());
    println!("rank\tfeature\timportance");
    for (rank, (name, value)) in ranking.iter().take(n).enumerate() {
        println!("{}\t{name}\t{value:.6}", rank + 1);
    }
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let summary = run_pipeline(&cfg)?;
    println!("run directory: {}", summary.run_dir.display());
    println!("cross-validated base models:");
    for (model, r) in &summary.cv_metrics {
        print_report(model, r);
    }
    print_test_metrics(&summary.test_metrics);
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Importance(a) => importance(a),
        Command::Inspect(a) => {
            print!("{}", inspect(&a.bundle)?);
            Ok(())
        }
        Command::Run(a) => run(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
