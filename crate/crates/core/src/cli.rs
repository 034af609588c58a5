//! The `orthoreg` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 partial
//! result (RIP enumeration budget exceeded).

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::analysis::{report_with_budget, AnalysisError, RIP_SUBSET_BUDGET};
use crate::config::{ConfigError, ExperimentConfig};
use crate::gradcheck::{check_seed, DEFAULT_STEP};
use crate::linalg::io::{read_matrix, write_matf};
use crate::regularizers::{RegKind, RegOptions};
use crate::rng::RNG_ALGORITHM;
use crate::schedule::ScheduleConfig;
use crate::trainer::{train, TrainError, TrainRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "orthoreg",
    version,
    about = "Orthogonality regularizers: gradient checks, matrix analysis, training runs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare analytic regularizer gradients with central differences.
    Gradcheck {
        #[arg(long)]
        reg: RegKind,
        /// Matrix shape as ROWSxCOLS.
        #[arg(long, value_parser = parse_shape)]
        shape: (usize, usize),
        /// Number of random matrices, seeded 0..SEEDS.
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Finite-difference step.
        #[arg(long, default_value_t = DEFAULT_STEP)]
        h: f64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coherence, spectral and RIP diagnostics for a MATF or CSV matrix.
    Analyze {
        path: PathBuf,
        /// Sparsity levels for the RIP constant, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        ks: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Maximum number of column subsets to enumerate per level.
        #[arg(long, default_value_t = RIP_SUBSET_BUDGET)]
        budget: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a training experiment described by a config file.
    Train {
        config: PathBuf,
        /// Output directory for the record, checkpoints and manifest.
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// Overrides `train.threads` from the config.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the per-epoch λ and λ₂ plan.
    ScheduleDump {
        /// Experiment config, or a file holding only a `[schedule]` table.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: usize,
        /// Selects the weight-decay plan. Defaults to the config's
        /// `train.reg`, or srip without a config.
        #[arg(long)]
        reg: Option<RegKind>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("shape must look like ROWSxCOLS, got {s:?}"))?;
    let dim = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("shape dimension {t:?} is not a non-negative integer"))
    };
    let (r, c) = (dim(r)?, dim(c)?);
    if r == 0 || c == 0 {
        return Err(format!("shape dimensions must be positive, got {r}x{c}"));
    }
    Ok((r, c))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Gradcheck {
            reg,
            shape,
            seeds,
            tol,
            lambda,
            h,
            out,
        } => cmd_gradcheck(reg, shape, seeds, tol, lambda, h, out.as_deref()),
        Command::Analyze {
            path,
            ks,
            format,
            budget,
            out,
        } => cmd_analyze(&path, &ks, format, budget, out.as_deref()),
        Command::Train { config, out, threads } => cmd_train(&config, &out, threads),
        Command::ScheduleDump {
            config,
            epochs,
            reg,
            out,
        } => cmd_schedule_dump(config.as_deref(), epochs, reg, out.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn failure(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_FAILURE,
        message: message.into(),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| failure(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| failure(format!("cannot write to stdout: {e}"))),
    }
}

fn cmd_gradcheck(
    reg: RegKind,
    shape: (usize, usize),
    seeds: u64,
    tol: f64,
    lambda: f64,
    h: f64,
    out: Option<&Path>,
) -> Result<i32, Failure> {
    if seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(usage("--h must be positive"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(usage("--lambda must be finite and non-negative"));
    }
    let opts = RegOptions::exact();
    let mut csv = String::from("seed,max_rel_error,skipped,pass\n");
    let mut failed = 0usize;
    let mut skipped = 0usize;
    for seed in 0..seeds {
        let o = check_seed(reg, shape, seed, lambda, h, &opts).map_err(|e| failure(e.to_string()))?;
        let pass = o.passed(tol);
        failed += usize::from(!pass);
        skipped += usize::from(o.skipped);
        csv.push_str(&format!("{},{},{},{}\n", o.seed, o.max_rel_error, o.skipped, pass));
    }
    emit(out, &csv)?;
    eprintln!(
        "gradcheck {reg} {}x{}: {} seeds, {failed} failed, {skipped} skipped at tie points",
        shape.0, shape.1, seeds
    );
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_analyze(path: &Path, ks: &[usize], format: Format, budget: u64, out: Option<&Path>) -> Result<i32, Failure> {
    let w = read_matrix(path).map_err(|e| failure(e.to_string()))?;
    let report = match report_with_budget(&w, ks, budget) {
        Ok(r) => r,
        Err(e @ AnalysisError::InvalidK { .. }) => return Err(usage(format!("--ks: {e}"))),
        Err(e) => return Err(failure(format!("{}: {e}", path.display()))),
    };
    let text = match format {
        Format::Text => report.to_text(),
        Format::Csv => report.to_csv(),
    };
    emit(out, &text)?;
    if report.is_partial() {
        eprintln!("warning: RIP enumeration budget exceeded; report is partial");
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}

fn config_failure(e: ConfigError) -> Failure {
    match e {
        ConfigError::Io { .. } => failure(e.to_string()),
        _ => usage(e.to_string()),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let p = dir.join(name);
    std::fs::write(&p, contents).map_err(|e| failure(format!("cannot write {}: {e}", p.display())))
}

fn manifest(cfg: &ExperimentConfig, raw: &[u8], config_path: &Path, record: &TrainRecord, status: &str) -> String {
    let tc = cfg.train_config().expect("validated earlier");
    let mut m = String::new();
    m.push_str(&format!("orthoreg_version: {}\n", env!("CARGO_PKG_VERSION")));
    m.push_str(&format!("config: {}\n", config_path.display()));
    m.push_str(&format!("config_sha256: {}\n", hex::encode(Sha256::digest(raw))));
    m.push_str(&format!("seed: {}\n", tc.seed));
    m.push_str(&format!("rng: {RNG_ALGORITHM}\n"));
    m.push_str(&format!("reg: {}\n", tc.reg_kind));
    m.push_str(&format!("threads: {}\n", tc.threads));
    m.push_str(&format!("status: {status}\n"));
    m.push_str(&format!("epochs_completed: {}\n", record.epochs.len()));
    let layers: Vec<String> = record.weight_layers.iter().map(|l| format!("layer_{l}.matf")).collect();
    m.push_str(&format!("checkpoints: {}\n", layers.join(",")));
    m.push_str("\nschedule:\n");
    m.push_str(&tc.schedule.dump_csv(tc.reg_kind, tc.epochs));
    m
}

fn cmd_train(config_path: &Path, out: &Path, threads: Option<usize>) -> Result<i32, Failure> {
    let (cfg, raw) = ExperimentConfig::load(config_path).map_err(config_failure)?;
    let mut tc = cfg.train_config().map_err(config_failure)?;
    if let Some(t) = threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        tc.threads = t;
    }
    if let Err(e) = tc.validate() {
        return Err(usage(format!("{}: {e}", config_path.display())));
    }
    let (train_set, val_set) = cfg.datasets().map_err(|e| failure(format!("data: {e}")))?;
    std::fs::create_dir_all(out).map_err(|e| failure(format!("cannot create {}: {e}", out.display())))?;

    match train(&tc, &train_set, &val_set) {
        Ok(outcome) => {
            write_file(out, "record.csv", &outcome.record.to_csv())?;
            write_file(out, "timing.csv", &outcome.record.timing_csv())?;
            for &i in &outcome.record.weight_layers {
                let w = outcome.network.layers[i].weight_matrix().expect("weight layer");
                let p = out.join(format!("layer_{i}.matf"));
                write_matf(&p, &w).map_err(|e| failure(e.to_string()))?;
            }
            write_file(
                out,
                "manifest.txt",
                &manifest(&cfg, &raw, config_path, &outcome.record, "complete"),
            )?;
            let last = outcome.record.last().expect("at least one epoch");
            eprintln!(
                "trained {} epochs: val_accuracy {} train_loss {}",
                outcome.record.epochs.len(),
                last.val_accuracy,
                last.train_loss
            );
            Ok(EXIT_OK)
        }
        Err(TrainError::NonFiniteLoss {
            epoch,
            step,
            loss,
            record,
        }) => {
            write_file(out, "record.csv", &record.to_csv())?;
            write_file(out, "timing.csv", &record.timing_csv())?;
            write_file(
                out,
                "manifest.txt",
                &manifest(&cfg, &raw, config_path, &record, "non_finite_loss"),
            )?;
            Err(failure(format!(
                "non-finite loss {loss} at epoch {epoch}, step {step}; partial record written to {}",
                out.display()
            )))
        }
        Err(e @ (TrainError::InvalidConfig(_) | TrainError::ShapeMismatch(_) | TrainError::Schedule(_))) => {
            Err(usage(format!("{}: {e}", config_path.display())))
        }
        Err(e) => Err(failure(e.to_string())),
    }
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleOnly {
    #[serde(default)]
    schedule: ScheduleConfig,
}

fn cmd_schedule_dump(
    config: Option<&Path>,
    epochs: usize,
    reg: Option<RegKind>,
    out: Option<&Path>,
) -> Result<i32, Failure> {
    if epochs == 0 {
        return Err(usage("--epochs must be at least 1"));
    }
    let (schedule, config_reg) = match config {
        None => (ScheduleConfig::default(), None),
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| failure(format!("cannot read config {}: {e}", p.display())))?;
            match ExperimentConfig::parse(&text) {
                Ok(cfg) => (cfg.schedule, Some(cfg.train.reg)),
                Err(full_err) => match toml::from_str::<ScheduleOnly>(&text) {
                    Ok(s) => (s.schedule, None),
                    Err(_) => return Err(usage(format!("invalid config {}: {full_err}", p.display()))),
                },
            }
        }
    };
    schedule.validate().map_err(|e| usage(e.to_string()))?;
    let kind = reg.or(config_reg).unwrap_or(RegKind::Srip);
    emit(out, &schedule.dump_csv(kind, epochs))?;
    Ok(EXIT_OK)
}
