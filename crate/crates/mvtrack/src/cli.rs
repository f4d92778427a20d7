use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use mvtrack_core::losses::{
    retrieval_accuracy, toy_train, SyntheticBatch, SyntheticBatchConfig, TrainMode, DEFAULT_EPOCHS, DEFAULT_LR,
};
use mvtrack_core::metrics::{evaluate, ViewSequence};
use mvtrack_core::pipeline::track_stream;
use mvtrack_core::simulate::simulate;

use crate::config::{parse_config, Settings};
use crate::dataset::{read_detections, read_observations, write_scene, write_tracks};
use crate::error::{Error, Result};
use crate::mot::format_g;
use crate::report::render;
use crate::selfcheck;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SELFCHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mvtrack", version, about = "Multi-view multi-object tracking on synthetic scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Shared,
    Plain,
    ConflictFree,
}

impl From<Mode> for TrainMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Shared => TrainMode::Shared,
            Mode::Plain => TrainMode::DecoupledPlain,
            Mode::ConflictFree => TrainMode::DecoupledConflictFree,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene: ground truth, detections and embeddings.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run single-view and cross-view tracking over a detection directory.
    Track {
        /// A `det` directory, or a scene directory containing one.
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against ground truth.
    Evaluate {
        /// A `gt` directory, or a scene directory containing one.
        #[arg(long)]
        gt: PathBuf,
        /// A directory of `view_<i>.txt` files, or a track output directory.
        #[arg(long)]
        pred: PathBuf,
        /// Treat prediction ids as global IDs and add the cross-view scores.
        #[arg(long)]
        cross_view: bool,
        #[arg(long, default_value_t = 0.5)]
        iou_threshold: f64,
    },
    /// Train the toy embedding heads and report cross-view retrieval accuracy.
    TrainDemo {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_EPOCHS)]
        epochs: usize,
        #[arg(long, default_value_t = DEFAULT_LR)]
        lr: f64,
        /// Also write `epoch,loss` lines to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the gradient, assignment, metric and temperature oracles.
    Selfcheck,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ =
                if e.use_stderr() { err.write_all(rendered.as_bytes()) } else { out.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Selfcheck => return run_selfcheck(out),
        Command::Simulate { config, out: dir, seed } => cmd_simulate(config.as_deref(), &dir, seed, out),
        Command::Track { dets, config, out: dir } => cmd_track(&dets, config.as_deref(), &dir, out),
        Command::Evaluate { gt, pred, cross_view, iou_threshold } => {
            cmd_evaluate(&gt, &pred, cross_view, iou_threshold, out)
        }
        Command::TrainDemo { mode, seed, epochs, lr, trace } => {
            cmd_train(mode.into(), seed, epochs, lr, trace.as_deref(), out)
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_VALIDATION
        }
    }
}

fn load_settings(path: Option<&Path>) -> Result<Settings> {
    match path {
        Some(p) => parse_config(&fs::read_to_string(p).map_err(Error::io(p))?).map_err(|e| match e {
            Error::Config { line, message } => Error::Parse { path: p.to_path_buf(), line, message },
            other => other,
        }),
        None => Ok(Settings::default()),
    }
}

/// `dir/name` when it exists, otherwise `dir`.
fn nested(dir: &Path, name: &str) -> PathBuf {
    let inner = dir.join(name);
    if inner.is_dir() {
        inner
    } else {
        dir.to_path_buf()
    }
}

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(Error::io("<stdout>"))
}

fn cmd_simulate(config: Option<&Path>, dir: &Path, seed: Option<u64>, out: &mut dyn Write) -> Result<()> {
    let mut settings = load_settings(config)?;
    if let Some(seed) = seed {
        settings.run.seed = seed;
        settings.scene.seed = seed;
    }
    let scene = simulate(&settings.scene)?;
    write_scene(dir, &scene, &settings)?;
    let n_dets: usize = scene.stream.iter().flatten().map(Vec::len).sum();
    say(
        out,
        &format!(
            "wrote {} views, {} frames, {} detections to {}\n",
            settings.scene.n_views,
            settings.scene.n_frames,
            n_dets,
            dir.display()
        ),
    )
}

fn cmd_track(dets: &Path, config: Option<&Path>, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let settings = load_settings(config)?;
    let stream = read_detections(&nested(dets, "det"))?;
    let output = track_stream(&settings.run, &stream, 1)?;
    write_tracks(dir, &output)?;
    let rows: usize = output.cross.iter().map(Vec::len).sum();
    say(out, &format!("tracked {} views, {} output rows to {}\n", stream.len(), rows, dir.display()))
}

fn cmd_evaluate(gt: &Path, pred: &Path, cross_view: bool, iou_threshold: f64, out: &mut dyn Write) -> Result<()> {
    let gt = read_observations(&nested(gt, "gt"))?;
    let pred = read_observations(&nested(pred, if cross_view { "cross" } else { "single" }))?;
    if gt.is_empty() {
        return Err(Error::Validation("no ground-truth views found".into()));
    }
    if gt.len() != pred.len() {
        return Err(Error::Validation(format!("{} ground-truth views but {} prediction views", gt.len(), pred.len())));
    }
    let views: Vec<ViewSequence> = gt.into_iter().zip(pred).map(|(gt, pred)| ViewSequence { gt, pred }).collect();
    let report = evaluate(&views, iou_threshold, cross_view)?;
    say(out, &render(&report))
}

fn cmd_train(
    mode: TrainMode,
    seed: u64,
    epochs: usize,
    lr: f64,
    trace: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let batch = SyntheticBatch::generate(&SyntheticBatchConfig::default(), seed)?;
    let outcome = toy_train(&batch, mode, epochs, lr, seed)?;
    let mut text = String::new();
    let step = (epochs / 10).max(1);
    for (epoch, loss) in outcome.trace.iter().enumerate() {
        if epoch % step == 0 || epoch == epochs {
            text.push_str(&format!("epoch {epoch:>5}  loss {loss:.6}\n"));
        }
    }
    let accuracy = retrieval_accuracy(&outcome.model, &batch.held_out)?;
    text.push_str(&format!(
        "mode={mode:?}\nseed={seed}\nfinal_loss={:.6}\nmatching_accuracy={accuracy:.6}\n",
        outcome.trace[epochs]
    ));
    if let Some(path) = trace {
        let lines: String = outcome.trace.iter().enumerate().map(|(e, l)| format!("{e},{}\n", format_g(*l))).collect();
        fs::write(path, lines).map_err(Error::io(path))?;
    }
    say(out, &text)
}

fn run_selfcheck(out: &mut dyn Write) -> i32 {
    let checks = selfcheck::run_all();
    let mut text = String::new();
    for c in &checks {
        text.push_str(&format!("{} {:<14} {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    let _ = out.write_all(text.as_bytes());
    if checks.iter().all(|c| c.passed) {
        EXIT_OK
    } else {
        EXIT_SELFCHECK
    }
}
