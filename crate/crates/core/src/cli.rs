//! Command-line front end: `train`, `predict`, `eval` and `gradcheck`.
//!
//! Exit codes: 0 success, 2 bad arguments, 3 data or model-file problems,
//! 4 numerical divergence, 5 failed gradient check. Errors are reported on
//! stderr as a single `error: <category>: <reason>` line.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::data::{self, MissingPolicy, Task};
use crate::error::RadfError;
use crate::gradcheck;
use crate::model_file::{self, ModelFile, ModelMeta, Prediction, Predictor};
use crate::numerics::LossKind;
use crate::registry;
use crate::training::{self, Metric, Model, TrainConfig, TrainHistory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;
pub const EXIT_GRADCHECK: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "radf",
    version,
    about = "Train and apply response-augmented differentiable forests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a forest on a CSV file and write the model.
    Train(TrainArgs),
    /// Score a CSV file with a saved model.
    Predict(PredictArgs),
    /// Report one metric of a saved model on a labelled CSV file.
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences on random forests.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the target column; every other column is a feature.
    #[arg(long)]
    target: String,
    /// `classification` or `regression`.
    #[arg(long, value_parser = parse_task)]
    task: Task,
    /// Number of trees K.
    #[arg(long, default_value_t = 8)]
    trees: usize,
    /// Depth of every tree; each tree has 2^depth leaves.
    #[arg(long, default_value_t = 4)]
    depth: usize,
    /// Learning rate for the gates and the memory write.
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Mini-batch size.
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// Maximum number of epochs.
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 10)]
    patience: usize,
    /// Gate optimizer (see the registry for names).
    #[arg(long, default_value = "adam", value_parser = parse_optimizer)]
    optimizer: String,
    /// Loss; defaults to cross_entropy for classification and mse otherwise.
    #[arg(long, value_parser = parse_loss)]
    loss: Option<LossKind>,
    /// Erase strength of the memory write in [0, 1]; 0 is plain gradient descent.
    #[arg(long, default_value_t = 0.0)]
    decay: f64,
    /// Gate temperature; larger values give softer routing.
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// Seed for initialization, splitting and shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the trained model.
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Train, validation and test fractions.
    #[arg(long, default_value = "0.7,0.15,0.15", value_parser = parse_split)]
    split: (f64, f64, f64),
    /// Fill empty feature cells with training-split means instead of failing.
    #[arg(long)]
    impute_missing: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model file written by `radf train`.
    #[arg(long)]
    model: PathBuf,
    /// CSV containing at least the model's feature columns.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Model file written by `radf train`.
    #[arg(long)]
    model: PathBuf,
    /// CSV with the feature columns and the target column.
    #[arg(long)]
    data: PathBuf,
    /// `loss`, `accuracy` (classification) or `rmse` (regression).
    #[arg(long, value_parser = parse_metric)]
    metric: Metric,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Seed of the first random case.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random forests to check.
    #[arg(long, default_value_t = 50)]
    cases: usize,
    /// Flip the analytic gradient's sign to exercise the failure path.
    #[arg(long, hide = true)]
    corrupt_gradient: bool,
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse().map_err(|e: RadfError| e.to_string())
}

fn parse_optimizer(s: &str) -> Result<String, String> {
    registry::optimizers()
        .get(s)
        .map(|_| s.to_owned())
        .map_err(|e| e.to_string())
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    s.parse().map_err(|e: RadfError| e.to_string())
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: RadfError| e.to_string())
}

fn parse_split(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(format!("expected three comma-separated fractions, got {}", parts.len())),
    }
}

/// A failed command: exit code plus the one-line reason.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub category: &'static str,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            category: "usage",
            message: message.into(),
        }
    }
}

impl From<RadfError> for CliError {
    fn from(e: RadfError) -> Self {
        let (code, category) = match &e {
            RadfError::InvalidArgument(_) => (EXIT_USAGE, "usage"),
            RadfError::Divergence(_) => (EXIT_DIVERGENCE, "numerical"),
            RadfError::OracleFailure(_) => (EXIT_GRADCHECK, "gradcheck"),
            RadfError::Version { .. } | RadfError::Malformed { .. } => (EXIT_DATA, "model"),
            RadfError::Io { .. } => (EXIT_DATA, "io"),
            _ => (EXIT_DATA, "data"),
        };
        Self {
            code,
            category,
            message: e.to_string(),
        }
    }
}

/// Data-stage failures exit with 3 even when the underlying error is an
/// argument-shaped one (e.g. a bad split for this row count).
fn data_stage(e: RadfError) -> CliError {
    let mut err = CliError::from(e);
    if err.code == EXIT_USAGE {
        err.code = EXIT_DATA;
        err.category = "data";
    }
    err
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return EXIT_OK;
            }
            let rendered = e.render().to_string();
            let body = rendered.strip_prefix("error: ").unwrap_or(&rendered);
            let _ = write!(err, "error: usage: {body}");
            return EXIT_USAGE;
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Gradcheck(a) => cmd_gradcheck(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let message = e.message.replace('\n', " ");
            let _ = writeln!(err, "error: {}: {message}", e.category);
            e.code
        }
    }
}

fn io_err(path: &std::path::Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| RadfError::io(path, e).into()
}

fn print_history(out: &mut dyn Write, history: &TrainHistory) -> std::io::Result<()> {
    for r in &history.records {
        writeln!(out, "epoch={} train={} val={}", r.epoch, r.train_loss, r.val_loss)?;
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let loss = a.loss.unwrap_or(match a.task {
        Task::Classification => LossKind::CrossEntropy,
        Task::Regression => LossKind::Mse,
    });
    if loss.is_classification() != (a.task == Task::Classification) {
        return Err(CliError::usage(format!("loss {loss} does not fit a {} task", a.task)));
    }
    let cfg = TrainConfig {
        eta: a.lr,
        batch_size: a.batch,
        max_epochs: a.epochs,
        patience: a.patience,
        optimizer: a.optimizer.clone(),
        loss,
        decay: a.decay,
        temperature: a.temperature,
        shuffle_seed: a.seed,
        init_seed: a.seed,
    };
    cfg.validate()?;
    if a.trees == 0 {
        return Err(CliError::usage("--trees must be at least 1"));
    }
    crate::forest::TreeTopology::new(a.depth)?;

    let missing = if a.impute_missing {
        MissingPolicy::Impute
    } else {
        MissingPolicy::Reject
    };
    let ds = data::load_csv_with(&a.data, &a.target, a.task, missing).map_err(data_stage)?;
    let (mut train, mut val, mut test) = data::split_dataset(&ds, a.split, a.seed).map_err(data_stage)?;
    data::impute_missing(&mut train, &mut [&mut val, &mut test]).map_err(data_stage)?;
    let (stats, train, rest) = data::standardize(&train, &[&val, &test]).map_err(data_stage)?;
    let (val, test) = (&rest[0], &rest[1]);

    let model = Model::init(a.trees, a.depth, train.n_features(), train.response_width(), &cfg)?;
    let fitted = match training::fit(model, &train, val, &cfg) {
        Ok(f) => f,
        Err(failure) => {
            print_history(out, &failure.history).map_err(io_err(&a.out))?;
            return Err(failure.error.into());
        }
    };
    print_history(out, &fitted.history).map_err(io_err(&a.out))?;
    let model = fitted.model;
    let test_loss = training::evaluate(&model, test, Metric::Loss, loss)?;
    let headline = match a.task {
        Task::Classification => Metric::Accuracy,
        Task::Regression => Metric::Rmse,
    };
    let test_metric = training::evaluate(&model, test, headline, loss)?;
    let write_err = io_err(&a.out);
    writeln!(out, "best_epoch={}", fitted.history.best_epoch).map_err(&write_err)?;
    writeln!(out, "test_loss={test_loss}").map_err(&write_err)?;
    writeln!(out, "test_{headline}={test_metric}").map_err(&write_err)?;

    let meta = ModelMeta {
        task: a.task,
        loss,
        feature_names: train.feature_names().to_vec(),
        target_name: a.target.clone(),
        standardization: stats,
        class_labels: train.class_labels().map(<[String]>::to_vec),
    };
    model_file::save_model(&ModelFile::new(&model, meta)?, &a.out)?;
    Ok(())
}

fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let predictor = Predictor::new(model_file::load_model(&a.model)?)?;
    let file = &predictor.file;
    let (features, n_rows) = data::load_features(&a.data, &file.feature_names).map_err(data_stage)?;

    let mut text = String::new();
    match &file.class_labels {
        Some(labels) => {
            text.push_str("label");
            for l in labels {
                text.push_str(&format!(",prob_{l}"));
            }
        }
        None if file.response_width == 1 => text.push_str("prediction"),
        None => {
            let cols: Vec<String> = (0..file.response_width).map(|f| format!("prediction_{f}")).collect();
            text.push_str(&cols.join(","));
        }
    }
    text.push('\n');
    for row in features.chunks_exact(file.n_features).take(n_rows) {
        let line = match predictor.predict(row)? {
            Prediction::Values(v) => v.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            Prediction::Class {
                label, probabilities, ..
            } => std::iter::once(label)
                .chain(probabilities.iter().map(f64::to_string))
                .collect::<Vec<_>>()
                .join(","),
        };
        text.push_str(&line);
        text.push('\n');
    }
    match &a.out {
        Some(path) => std::fs::write(path, text).map_err(io_err(path))?,
        None => out.write_all(text.as_bytes()).map_err(io_err(&a.data))?,
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = model_file::load_model(&a.model)?;
    let schema = data::Schema {
        feature_names: &file.feature_names,
        target_name: &file.target_name,
        task: file.task,
        class_labels: file.class_labels.as_deref(),
    };
    let ds = data::load_with_schema(&a.data, &schema).map_err(data_stage)?;
    let ds = file.standardization.apply(&ds).map_err(data_stage)?;
    let model = file.model()?;
    let value = training::evaluate(&model, &ds, a.metric, file.loss).map_err(|e| match e {
        RadfError::InvalidArgument(m) => CliError::usage(m),
        other => other.into(),
    })?;
    writeln!(out, "metric={} value={value}", a.metric).map_err(io_err(&a.data))?;
    Ok(())
}

fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.cases == 0 {
        return Err(CliError::usage("--cases must be at least 1"));
    }
    let report = gradcheck::run(a.seed, a.cases, a.corrupt_gradient).map_err(|e| CliError {
        code: EXIT_GRADCHECK,
        category: "gradcheck",
        message: e.to_string(),
    })?;
    writeln!(out, "cases={} max_rel_err={}", report.cases, report.max_rel_err)
        .map_err(|e| CliError::from(RadfError::io("<stdout>", e)))?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_GRADCHECK,
            category: "gradcheck",
            message: format!(
                "max_rel_err {} exceeds {} (case seed {})",
                report.max_rel_err,
                gradcheck::REL_TOL,
                report.worst_seed
            ),
        })
    }
}
