//! The `severity-nn` command line: generate, train, sweep, eval, predict.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for malformed
//! flags, files or values. Every file written is a headered CSV with `\n`
//! line endings, except model and selection files, which are JSON.

mod model_file;
mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{
    encode_with_vocab, load_csv, save_csv, Dataset, RawRecord, Severity, SplitIndices, SplitRatios, CSV_HEADER,
};
use crate::error::{Error, Result};
use crate::grnn::train_grnn;
use crate::metrics::{compute_metrics, confusion, error_histogram, regression_plot};
use crate::mlp::{class_from_outputs, TrainAlgorithm, TransferFn};
use crate::pipeline::{prepare, DivideFn, PipelineConfig, Prepared, DEFAULT_CUTOFF_YEAR};
use crate::sweep::{
    compare_models, fit_rbf_selected, run_sweep, staged_mlp_search, ComparisonConfig, LearningRule, MlpSetup,
    SweepData, SweepFamily, SweepResult, SweepSpec, DEFAULT_REPETITIONS,
};
use crate::synthgen::{generate, SynthConfig};

pub use model_file::{ModelFile, ModelPayload, PartitionMetrics, TrainingMeta, FORMAT_VERSION};
pub use report::Table;

#[derive(Debug, Parser)]
#[command(
    name = "severity-nn",
    version,
    about = "Severity forecasting with MLP, RBF and GRNN models"
)]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset CSV.
    Generate(GenerateArgs),
    /// Train one model and save it as JSON.
    Train(TrainArgs),
    /// Run a hyperparameter sweep, the staged MLP search or the model comparison.
    Sweep(SweepArgs),
    /// Score a saved model on a dataset and write plot data.
    Eval(EvalArgs),
    /// Predict severity classes for new inputs.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 500)]
    rows: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = SynthConfig::default().n_varieties)]
    varieties: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 2000)]
    start_year: i32,
    #[arg(long, default_value_t = 2018)]
    end_year: i32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Seed for the data split and weight initialization.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Seasons after this year are held out from training.
    #[arg(long, default_value_t = DEFAULT_CUTOFF_YEAR)]
    cutoff_year: i32,
    /// Use every row for the train/validation/test split.
    #[arg(long)]
    no_holdout: bool,
    /// `dividerand` or `divideind`.
    #[arg(long, default_value = "dividerand")]
    divide: DivideFn,
}

impl DataArgs {
    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            cutoff_year: (!self.no_holdout).then_some(self.cutoff_year),
            ratios: SplitRatios::default(),
            divide: self.divide,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Mlp,
    Rbf,
    Grnn,
}

#[derive(Debug, Args)]
struct MlpArgs {
    /// Hidden neurons.
    #[arg(long)]
    hidden: Option<usize>,
    /// Training algorithm, e.g. `lm`, `trainbfg`, `rp`.
    #[arg(long)]
    algo: Option<TrainAlgorithm>,
    /// Hidden-layer transfer function: `tansig`, `logsig` or `purelin`.
    #[arg(long)]
    hidden_fn: Option<TransferFn>,
    /// Output-layer transfer function.
    #[arg(long)]
    output_fn: Option<TransferFn>,
    /// `learngdm` or `learngd`.
    #[arg(long)]
    learning: Option<LearningRule>,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Validation failures tolerated before stopping.
    #[arg(long)]
    patience: Option<usize>,
    /// Learning rate of the gradient-descent algorithms.
    #[arg(long)]
    lr: Option<f64>,
}

impl MlpArgs {
    fn apply(&self, base: MlpSetup, divide: DivideFn) -> MlpSetup {
        let mut s = base;
        s.divide = divide;
        if let Some(h) = self.hidden {
            s.hidden = h;
        }
        if let Some(a) = self.algo {
            s.train.algorithm = a;
        }
        if let Some(f) = self.hidden_fn {
            s.f_hidden = f;
        }
        if let Some(f) = self.output_fn {
            s.f_out = f;
        }
        if let Some(l) = self.learning {
            s.learning = l;
            s.train.momentum = l.momentum();
        }
        if let Some(e) = self.max_epochs {
            s.train.max_epochs = e;
        }
        if let Some(p) = self.patience {
            s.train.patience = p;
        }
        if let Some(lr) = self.lr {
            s.train.learning_rate = lr;
        }
        s
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model family to train.
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Model JSON to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    mlp: MlpArgs,
    /// RBF spread.
    #[arg(long, default_value_t = 0.2)]
    spread: f64,
    /// RBF neuron count; by default the count with the lowest validation MSE.
    #[arg(long)]
    neurons: Option<usize>,
    /// GRNN smoothing factor.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// mlp-hidden, mlp-divide, mlp-transfer, mlp-learning, mlp-algorithm,
    /// rbf-spread, grnn-sigma, mlp-staged or compare.
    #[arg(long)]
    family: String,
    /// Directory for the result tables (created if missing).
    #[arg(long)]
    out_dir: PathBuf,
    /// Training runs per MLP grid point; the best is reported.
    #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
    reps: usize,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    mlp: MlpArgs,
    /// RBF spread for `compare`.
    #[arg(long, default_value_t = 0.2)]
    spread: f64,
    /// GRNN smoothing factor for `compare`.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with the dataset columns; the severity column is optional and ignored.
    #[arg(long, conflicts_with_all = ["rainfall", "tmax", "tmin", "tavg", "rh", "variety"])]
    input: Option<PathBuf>,
    #[arg(long, required_unless_present = "input")]
    rainfall: Option<f64>,
    #[arg(long, required_unless_present = "input")]
    tmax: Option<f64>,
    #[arg(long, required_unless_present = "input")]
    tmin: Option<f64>,
    #[arg(long, required_unless_present = "input")]
    tavg: Option<f64>,
    #[arg(long, required_unless_present = "input")]
    rh: Option<f64>,
    #[arg(long, required_unless_present = "input")]
    variety: Option<String>,
    /// Write predictions here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point of the `severity-nn` binary.
pub fn main() -> ExitCode {
    run(std::env::args_os())
}

/// Parses `args` (including the program name), runs the command and maps
/// the outcome to an exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Predict(a) => cmd_predict(&a),
    }
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_rows: a.rows,
        year_range: (a.start_year, a.end_year),
        n_varieties: a.varieties,
        noise_sd: a.noise,
        seed: a.seed,
    };
    let records = generate(&cfg)?;
    save_csv(&a.out, &records)?;
    let count = |s: Severity| records.iter().filter(|r| r.severity == s).count();
    println!("wrote {} rows to {}", records.len(), a.out.display());
    println!(
        "class balance: high={} medium={} low={}",
        count(Severity::High),
        count(Severity::Medium),
        count(Severity::Low)
    );
    Ok(())
}

/// Named partitions of the development data plus the holdout, if any.
fn partitions(prepared_data: &Dataset, split: &SplitIndices, holdout: Option<&Dataset>) -> Vec<(String, Dataset)> {
    let mut parts = vec![
        ("train".to_string(), prepared_data.subset(&split.train)),
        ("val".to_string(), prepared_data.subset(&split.val)),
        ("test".to_string(), prepared_data.subset(&split.test)),
    ];
    if let Some(h) = holdout {
        parts.push(("holdout".to_string(), h.clone()));
    }
    parts
}

fn partition_metrics(model: &ModelPayload, parts: &[(String, Dataset)]) -> Result<Vec<PartitionMetrics>> {
    parts
        .iter()
        .filter(|(_, d)| d.len() >= 2)
        .map(|(name, d)| {
            Ok(PartitionMetrics {
                partition: name.clone(),
                metrics: compute_metrics(&model.predict_all(&d.features), &d.targets)?,
            })
        })
        .collect()
}

fn describe(model: &ModelPayload) -> String {
    match model {
        ModelPayload::Mlp { setup, record, .. } => format!(
            "MLP 6-{}-3 ({}/{}, {}, {}), best epoch {} of {}, stop: {:?}",
            setup.hidden,
            setup.f_hidden,
            setup.f_out,
            setup.algorithm().alias(),
            setup.learning.name(),
            record.best_epoch,
            record.final_epoch(),
            record.stop_reason
        ),
        ModelPayload::Rbf { network, .. } => {
            format!("RBFNN 6-{}-3, spread {}", network.n_neurons(), network.spread)
        }
        ModelPayload::Grnn { model } => {
            format!("GRNN with {} patterns, sigma {}", model.patterns.rows(), model.sigma)
        }
    }
}

fn train_payload(a: &TrainArgs, prepared: &Prepared) -> Result<ModelPayload> {
    Ok(match a.family {
        FamilyArg::Mlp => {
            let setup = a.mlp.apply(MlpSetup::default(), a.data.divide);
            let (network, record) = setup.fit(prepared, a.data.seed)?;
            ModelPayload::Mlp { setup, network, record }
        }
        FamilyArg::Rbf => {
            let (network, growth) = fit_rbf_selected(prepared, a.spread, a.neurons)?;
            ModelPayload::Rbf { network, growth }
        }
        FamilyArg::Grnn => ModelPayload::Grnn {
            model: train_grnn(&prepared.data, &prepared.split.train, a.sigma)?,
        },
    })
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let records = load_csv(&a.data.data)?;
    let pipeline = a.data.pipeline();
    let prepared = prepare(&records, &pipeline)?;
    let model = train_payload(a, &prepared)?;
    let parts = partitions(&prepared.data, &prepared.split, prepared.holdout.as_ref());
    let metrics = partition_metrics(&model, &parts)?;
    println!("{}", describe(&model));
    print!("{}", report::format_metrics_summary(&metrics));
    let file = ModelFile::new(
        prepared.normalizer.clone(),
        prepared.vocab().to_vec(),
        model,
        TrainingMeta {
            seed: a.data.seed,
            pipeline,
            metrics,
        },
    );
    file.save(&a.out)?;
    println!("wrote model to {}", a.out.display());
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn selected_json(result: &SweepResult, base: &MlpSetup) -> serde_json::Value {
    let Some(row) = result.selected_row() else {
        return serde_json::json!({ "family": result.family.name(), "selected": null });
    };
    let config = match row.value {
        crate::sweep::GridValue::Spread(s) => serde_json::json!({ "spread": s, "neurons": row.neurons }),
        crate::sweep::GridValue::Sigma(s) => serde_json::json!({ "sigma": s }),
        v => serde_json::to_value(v.apply(base)).unwrap_or(serde_json::Value::Null),
    };
    serde_json::json!({
        "family": result.family.name(),
        "selected": row.value.to_string(),
        "best_val_mse": row.best_val_mse,
        "seed": row.seed,
        "config": config,
    })
}

fn save_sweep(dir: &Path, stem: &str, result: &SweepResult, base: &MlpSetup) -> Result<()> {
    report::sweep_table(result).save(dir.join(format!("{stem}.csv")))?;
    report::sweep_timing_table(result).save(dir.join(format!("{stem}_timing.csv")))?;
    write_json(&dir.join(format!("{stem}_selected.json")), &selected_json(result, base))
}

fn print_sweep(result: &SweepResult) {
    println!("{}: {} rows", result.family.name(), result.rows.len());
    for (i, row) in result.rows.iter().enumerate() {
        let mark = if result.selected == Some(i) { "*" } else { " " };
        match (row.best_val_mse, &row.error) {
            (Some(v), _) => println!("{mark} {:<22} val mse {v:.6}", row.value.to_string()),
            (None, Some(e)) => println!("{mark} {:<22} failed: {e}", row.value.to_string()),
            (None, None) => println!("{mark} {:<22} -", row.value.to_string()),
        }
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let records = load_csv(&a.data.data)?;
    let data = SweepData::new(&records, &a.data.pipeline())?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let base = a.mlp.apply(MlpSetup::search_baseline(), a.data.divide);
    match a.family.as_str() {
        "mlp-staged" => {
            let staged = staged_mlp_search(&data, a.data.seed, a.reps, a.jobs)?;
            let mut setup = base.clone();
            for (i, stage) in staged.stages.iter().enumerate() {
                print_sweep(stage);
                save_sweep(
                    &a.out_dir,
                    &format!("stage{}_{}", i + 1, stage.family.name()),
                    stage,
                    &setup,
                )?;
                if let Some(row) = stage.selected_row() {
                    setup = row.value.apply(&setup);
                }
            }
            write_json(
                &a.out_dir.join("mlp-staged_selected.json"),
                &serde_json::to_value(&staged.winner)?,
            )?;
            println!(
                "winner: 6-{}-3 {}/{} {} {} {}",
                staged.winner.hidden,
                staged.winner.f_hidden,
                staged.winner.f_out,
                staged.winner.divide.name(),
                staged.winner.learning.name(),
                staged.winner.algorithm().alias()
            );
        }
        "compare" => {
            let cfg = ComparisonConfig {
                mlp: a.mlp.apply(MlpSetup::default(), a.data.divide),
                mlp_seed: a.data.seed,
                rbf_spread: a.spread,
                rbf_neurons: None,
                grnn_sigma: a.sigma,
            };
            let report = compare_models(data.default_prepared(), &cfg)?;
            report::comparison_table(&report).save(a.out_dir.join("comparison.csv"))?;
            report::comparison_timing_table(&report).save(a.out_dir.join("comparison_timing.csv"))?;
            for row in &report.rows {
                println!(
                    "{:<6} train rmse {:.4}  test rmse {:.4}  trained in {:.3} s",
                    row.family.name(),
                    row.train.rmse,
                    row.test.rmse,
                    row.train_seconds
                );
            }
        }
        name => {
            let family: SweepFamily = name.parse()?;
            let spec = SweepSpec {
                repetitions: a.reps,
                jobs: a.jobs,
                ..SweepSpec::new(family, base.clone(), a.data.seed)
            };
            let result = run_sweep(&spec, &data)?;
            print_sweep(&result);
            save_sweep(&a.out_dir, family.name(), &result, &base)?;
        }
    }
    println!("wrote results to {}", a.out_dir.display());
    Ok(())
}

/// Re-creates the training-time partitions of `records` from the stored
/// pipeline, vocabulary and normalizer.
fn replay_partitions(model: &ModelFile, records: &[RawRecord]) -> Result<Vec<(String, Dataset)>> {
    let pipeline = &model.training.pipeline;
    let (dev, later) = match pipeline.cutoff_year {
        Some(year) => {
            let (dev, later): (Vec<_>, Vec<_>) = records.iter().cloned().partition(|r| r.year <= year);
            (dev, Some(later))
        }
        None => (records.to_vec(), None),
    };
    let encode = |rows: &[RawRecord]| -> Result<Dataset> {
        Ok(encode_with_vocab(rows, &model.variety_vocab)?.normalized(&model.normalizer))
    };
    let dev_data = encode(&dev)?;
    let holdout = match later {
        Some(rows) if !rows.is_empty() => Some(encode(&rows)?),
        _ => None,
    };
    match pipeline.divide.split(dev_data.len(), pipeline.ratios, pipeline.seed) {
        Ok(split) => Ok(partitions(&dev_data, &split, holdout.as_ref())),
        Err(_) => Ok(holdout.map(|h| ("holdout".to_string(), h)).into_iter().collect()),
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let model = ModelFile::load(&a.model)?;
    let records = load_csv(&a.data)?;
    let all = encode_with_vocab(&records, &model.variety_vocab)?.normalized(&model.normalizer);
    let mut parts = replay_partitions(&model, &records)?;
    parts.push(("all".to_string(), all.clone()));
    let metrics = partition_metrics(&model.model, &parts)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    report::metrics_table(&metrics).save(a.out_dir.join("metrics.csv"))?;

    let mut regressions = Vec::new();
    for (name, d) in &parts {
        if let Ok(plot) = regression_plot(&model.model.predict_all(&d.features), &d.targets) {
            regressions.push((name.clone(), plot));
        }
    }
    report::regression_points_table(&regressions).save(a.out_dir.join("regression_points.csv"))?;
    report::regression_fit_table(&regressions).save(a.out_dir.join("regression_fit.csv"))?;

    let outputs = model.model.predict_all(&all.features);
    report::histogram_table(&error_histogram(&outputs, &all.targets)?).save(a.out_dir.join("error_histogram.csv"))?;
    let predicted: Vec<Severity> = outputs.row_iter().map(class_from_outputs).collect();
    let cm = confusion(&predicted, &all.classes())?;
    report::confusion_table(&cm).save(a.out_dir.join("confusion.csv"))?;
    match &model.model {
        ModelPayload::Mlp { record, .. } => {
            report::train_record_table(record).save(a.out_dir.join("training_record.csv"))?
        }
        ModelPayload::Rbf { growth, .. } => report::growth_table(growth).save(a.out_dir.join("growth_record.csv"))?,
        ModelPayload::Grnn { .. } => {}
    }

    println!("{}", describe(&model.model));
    print!("{}", report::format_metrics_summary(&metrics));
    println!("accuracy (all rows): {:.4}", cm.accuracy());
    println!("wrote evaluation files to {}", a.out_dir.display());
    Ok(())
}

/// Reads a prediction CSV: the dataset columns with or without severity.
fn read_inputs(path: &Path) -> Result<Vec<RawRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().next().unwrap_or_default();
    let columns: Vec<&str> = first.split(',').map(str::trim).collect();
    if columns == CSV_HEADER {
        return crate::dataset::read_csv(text.as_bytes());
    }
    if columns != CSV_HEADER[..7] {
        return Err(Error::Schema(format!(
            "expected header {:?} with optional severity column, found {first:?}",
            CSV_HEADER[..7].join(",")
        )));
    }
    // reuse the dataset parser with a placeholder label
    let mut labeled = String::with_capacity(text.len() + 16 * text.lines().count());
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        labeled.push_str(line);
        labeled.push_str(if i == 0 { ",severity\n" } else { ",low\n" });
    }
    crate::dataset::read_csv(labeled.as_bytes())
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let model = ModelFile::load(&a.model)?;
    let records = match &a.input {
        Some(path) => read_inputs(path)?,
        None => {
            let record = RawRecord {
                year: 0,
                rainfall: a.rainfall.unwrap_or_default(),
                tmax: a.tmax.unwrap_or_default(),
                tmin: a.tmin.unwrap_or_default(),
                tavg: a.tavg.unwrap_or_default(),
                rel_humidity: a.rh.unwrap_or_default(),
                variety: a.variety.clone().unwrap_or_default(),
                severity: Severity::Low,
            };
            record.validate().map_err(|message| Error::Range { row: 1, message })?;
            vec![record]
        }
    };
    let mut table = Table::new(&["severity", "high", "medium", "low"]);
    for r in &records {
        let y = model.predict_record(r)?;
        let mut row = vec![class_from_outputs(&y).to_string()];
        row.extend(y.iter().map(|v| report::num(*v)));
        table.push(row);
    }
    match &a.out {
        Some(path) => table.save(path),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table.write_to(&mut lock)?;
            lock.flush().map_err(|e| Error::io("<stdout>", e))
        }
    }
}
