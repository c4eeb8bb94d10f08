//! `slr` command line: synth, train, eval, predict, serve.
//!
//! Machine-readable results go to stdout, diagnostics to stderr. Exit codes:
//! 0 success, 1 usage error, 2 data or format error, 3 runtime failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{load_csv, save_csv, stratified_split, synth_generate};
use crate::eval::{evaluate, metrics_from_confusion, render_confusion_csv, render_report};
use crate::io_util::atomic_write;
use crate::model::{load_model, render_training_log, save_model, train, ModelError, TrainConfig};
use crate::serve::{handle_message, run_server, ErrorCode, Response, ServeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ExitStatus {
    Success = 0,
    Usage = 1,
    Data = 2,
    Runtime = 3,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl From<ExitStatus> for std::process::ExitCode {
    fn from(s: ExitStatus) -> Self {
        std::process::ExitCode::from(s.code())
    }
}

#[derive(Debug, Parser)]
#[command(name = "slr", version, about = "Fingerspelling recognition from hand landmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic landmark dataset.
    Synth(SynthArgs),
    /// Split a dataset, train a model and report test accuracy.
    Train(TrainArgs),
    /// Evaluate a model on a dataset.
    Eval(EvalArgs),
    /// Classify a single frame.
    Predict(PredictArgs),
    /// Serve predictions over the streaming protocol.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    per_class: u32,
    #[arg(long, value_parser = non_negative)]
    sigma: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
    epochs: u32,
    #[arg(long, default_value_t = 0.01, value_parser = positive)]
    lr: f64,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..))]
    batch: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.8, value_parser = open_unit)]
    split: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    confusion: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Inline JSON (a frame message or a bare array of 21 pairs) or a path to a file holding it.
    #[arg(long)]
    frame: String,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 8765)]
    port: u16,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: {s}"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    parse_f64(s).and_then(|v| if v >= 0.0 { Ok(v) } else { Err("must be >= 0".into()) })
}

fn positive(s: &str) -> Result<f64, String> {
    parse_f64(s).and_then(|v| if v > 0.0 { Ok(v) } else { Err("must be > 0".into()) })
}

fn open_unit(s: &str) -> Result<f64, String> {
    parse_f64(s).and_then(|v| {
        if v > 0.0 && v < 1.0 {
            Ok(v)
        } else {
            Err("must lie strictly between 0 and 1".into())
        }
    })
}

/// Failure carrying its exit status and a diagnostic line.
struct Failure(ExitStatus, String);

impl Failure {
    fn data(msg: impl std::fmt::Display) -> Self {
        Failure(ExitStatus::Data, msg.to_string())
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = write!(err, "{}", e.render().ansi());
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    ExitStatus::Success
                }
                _ => ExitStatus::Usage,
            };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(&a, out, err),
        Command::Train(a) => cmd_train(&a, out, err),
        Command::Eval(a) => cmd_eval(&a, out, err),
        Command::Predict(a) => cmd_predict(&a, out, err),
        Command::Serve(a) => cmd_serve(&a),
    };
    match result {
        Ok(()) => ExitStatus::Success,
        Err(Failure(status, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            status
        }
    }
}

fn cmd_synth(a: &SynthArgs, out: &mut dyn Write, _err: &mut dyn Write) -> CmdResult {
    let synth = synth_generate(a.per_class as usize, a.sigma, a.seed).map_err(Failure::data)?;
    save_csv(&synth.dataset, &a.out).map_err(Failure::data)?;
    let _ = writeln!(out, "samples={}", synth.dataset.len());
    Ok(())
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let data = load_csv(&a.data).map_err(|e| Failure::data(format!("{}: {e}", a.data.display())))?;
    let (train_set, test_set) = stratified_split(&data, a.split, a.seed).map_err(Failure::data)?;
    let _ = writeln!(
        err,
        "split seed {} fraction {}: {} train / {} test",
        a.seed,
        a.split,
        train_set.len(),
        test_set.len()
    );
    let config = TrainConfig {
        epochs: a.epochs as usize,
        learning_rate: a.lr,
        batch_size: a.batch as usize,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let outcome = train(&train_set, &config).map_err(|e| match e {
        ModelError::InvalidConfig(_) => Failure(ExitStatus::Usage, e.to_string()),
        _ => Failure(ExitStatus::Runtime, e.to_string()),
    })?;
    if outcome.skipped_degenerate > 0 {
        let _ = writeln!(err, "warning: skipped {} degenerate frame(s)", outcome.skipped_degenerate);
    }
    save_model(&outcome.params, &a.out).map_err(Failure::data)?;
    atomic_write(&a.log, render_training_log(&outcome.history).as_bytes())
        .map_err(|e| Failure::data(format!("{}: {e}", a.log.display())))?;

    let last = outcome.history.last().expect("epochs >= 1");
    let _ = writeln!(out, "train_accuracy={}", last.train_accuracy);
    if test_set.is_empty() {
        let _ = writeln!(err, "warning: test split is empty");
        return Ok(());
    }
    let (cm, skipped) = evaluate(&outcome.params, &test_set);
    if skipped > 0 {
        let _ = writeln!(err, "warning: skipped {skipped} degenerate test frame(s)");
    }
    match metrics_from_confusion(&cm) {
        Ok(report) => {
            let _ = writeln!(out, "test_accuracy={}", report.accuracy);
        }
        Err(_) => {
            let _ = writeln!(err, "warning: no evaluable test frames");
        }
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let data = load_csv(&a.data).map_err(|e| Failure::data(format!("{}: {e}", a.data.display())))?;
    let model = load_model(&a.model).map_err(|e| Failure::data(format!("{}: {e}", a.model.display())))?;
    let (cm, skipped) = evaluate(&model, &data);
    if skipped > 0 {
        let _ = writeln!(err, "warning: skipped {skipped} degenerate frame(s)");
    }
    let report = metrics_from_confusion(&cm).map_err(|e| Failure::data(format!("{}: {e}", a.data.display())))?;
    write_text(&a.report, &render_report(&report))?;
    write_text(&a.confusion, &render_confusion_csv(&cm))?;
    let _ = writeln!(out, "accuracy={}", report.accuracy);
    Ok(())
}

fn cmd_predict(a: &PredictArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let model = load_model(&a.model).map_err(|e| Failure::data(format!("{}: {e}", a.model.display())))?;
    let trimmed = a.frame.trim_start();
    let text = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        a.frame.clone()
    } else {
        std::fs::read_to_string(&a.frame).map_err(|e| Failure::data(format!("{}: {e}", a.frame)))?
    };
    let message = frame_message(&text);
    let response = handle_message(&model, message.as_bytes());
    match &response {
        Response::Prediction { .. }
        | Response::Error {
            code: ErrorCode::DegenerateHand,
            ..
        } => {
            let _ = writeln!(out, "{}", response.to_json());
            Ok(())
        }
        Response::Error { .. } => {
            let _ = writeln!(err, "{}", response.to_json());
            Err(Failure::data("invalid frame"))
        }
    }
}

/// Wraps a bare landmark array into a frame message with id 0.
fn frame_message(text: &str) -> String {
    let text = text.trim();
    if text.starts_with('[') {
        format!(r#"{{"type":"frame","id":0,"landmarks":{text}}}"#)
    } else {
        text.to_string()
    }
}

fn cmd_serve(a: &ServeArgs) -> CmdResult {
    run_server(&a.model, a.port).map_err(|e| match e {
        ServeError::Model(e) => Failure::data(format!("{}: {e}", a.model.display())),
        ServeError::Bind { .. } | ServeError::Io(_) => Failure(ExitStatus::Runtime, e.to_string()),
    })
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    atomic_write(path, text.as_bytes()).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}
