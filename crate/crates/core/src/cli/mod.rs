//! The `sent` command-line tool.
//!
//! Subcommands: `synth`, `corrupt`, `train`, `eval`, `refine`, `histogram`.
//! Settings come from defaults, then `--config FILE`, then `--set KEY=VALUE`
//! and the dedicated flags. Errors go to stderr as `error[category]: ...`;
//! configuration and usage errors exit with 2, everything else with 1.

mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::CliConfig;

use crate::error::{Result, SentError};

#[derive(Debug, Parser)]
#[command(name = "sent", version, about = "Negative training and noise filtering for noisy relation labels")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags accepted by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// Key-value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-instance work; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Share of instances to corrupt.
    #[arg(long, global = true)]
    pub ratio: Option<f64>,
    /// Global filtering threshold.
    #[arg(long, global = true)]
    pub th: Option<f64>,
    #[arg(long = "th-relabel", global = true)]
    pub th_relabel: Option<f64>,
    /// Complementary labels per instance.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Epochs per iteration.
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long = "max-iterations", global = true)]
    pub max_iterations: Option<usize>,
    #[arg(long, global = true)]
    pub patience: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Any configuration key, e.g. `--set optimizer.learning_rate=0.01`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a clean synthetic corpus split into train/dev/test.
    Synth {
        /// Number of classes, NA included.
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long = "per-class")]
        per_class: Option<usize>,
        /// Instances of the NA class (defaults to --per-class).
        #[arg(long = "na-count")]
        na_count: Option<usize>,
    },
    /// Replace a share of the labels with wrong ones.
    Corrupt {
        input: PathBuf,
        output: PathBuf,
        /// Where to write the corruption manifest (default: next to OUTPUT).
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Iterative negative training with refinement, then a final PT pass.
    Train {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Gold-labeled test set scored at the end.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long = "final-pt-epochs")]
        final_pt_epochs: Option<usize>,
    },
    /// Score a checkpoint on a gold-labeled dataset.
    Eval {
        checkpoint: PathBuf,
        data: PathBuf,
        /// Refined dataset with noise ground truth to score as well.
        #[arg(long)]
        refined: Option<PathBuf>,
    },
    /// One filtering and re-labeling pass with a checkpoint.
    Refine {
        checkpoint: PathBuf,
        data: PathBuf,
        #[arg(long, default_value_t = 1)]
        iteration: usize,
    },
    /// Confidence histogram of a checkpoint over a dataset.
    Histogram {
        checkpoint: PathBuf,
        data: PathBuf,
        #[arg(long)]
        bins: Option<usize>,
        /// Keep NA-labeled instances.
        #[arg(long = "include-na")]
        include_na: bool,
    },
}

impl Cli {
    /// Defaults, then the config file, then `--set`, then dedicated flags.
    pub fn resolve(&self) -> Result<CliConfig> {
        let mut cfg = CliConfig::default();
        let c = &self.common;
        if let Some(path) = &c.config {
            cfg.apply_file(path)?;
        }
        for kv in &c.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| SentError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v)?;
        }
        let mut overrides: Vec<(&str, Option<String>)> = vec![
            ("seed", c.seed.map(|v| v.to_string())),
            ("noise.ratio", c.ratio.map(|v| v.to_string())),
            ("refine.th", c.th.map(|v| v.to_string())),
            ("refine.th_relabel", c.th_relabel.map(|v| v.to_string())),
            ("run.k", c.k.map(|v| v.to_string())),
            ("run.epochs", c.epochs.map(|v| v.to_string())),
            ("run.max_iterations", c.max_iterations.map(|v| v.to_string())),
            ("run.patience", c.patience.map(|v| v.to_string())),
            ("paths.out", c.out.as_ref().map(|p| p.display().to_string())),
        ];
        let show = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        match &self.command {
            Command::Synth {
                classes,
                per_class,
                na_count,
            } => {
                overrides.push(("synth.classes", classes.map(|v| v.to_string())));
                overrides.push(("synth.per_class", per_class.map(|v| v.to_string())));
                overrides.push(("synth.na_count", na_count.map(|v| v.to_string())));
            }
            Command::Train {
                train,
                dev,
                test,
                labels,
                final_pt_epochs,
            } => {
                overrides.push(("paths.train", show(train)));
                overrides.push(("paths.dev", show(dev)));
                overrides.push(("paths.test", show(test)));
                overrides.push(("paths.labels", show(labels)));
                overrides.push(("run.final_pt_epochs", final_pt_epochs.map(|v| v.to_string())));
            }
            Command::Histogram { bins, include_na, .. } => {
                overrides.push(("histogram.bins", bins.map(|v| v.to_string())));
                if *include_na {
                    overrides.push(("histogram.exclude_na", Some("false".into())));
                }
            }
            _ => {}
        }
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("SENT_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .format_target(false)
        .try_init();
}

fn init_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(SentError::Config("--threads must be at least 1".into()));
        }
        // the global pool can only be set once per process
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("keeping the existing thread pool: {e}");
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    use clap::error::ErrorKind;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            let msg = e.render().to_string();
            let msg = msg.trim_end().strip_prefix("error: ").unwrap_or(msg.trim_end());
            return Err(SentError::Config(msg.to_string()));
        }
    };
    init_threads(cli.common.threads)?;
    let cfg = cli.resolve()?;
    match cli.command {
        Command::Synth { .. } => commands::synth(&cfg),
        Command::Corrupt { input, output, manifest } => commands::corrupt(&cfg, &input, &output, manifest.as_deref()),
        Command::Train { .. } => commands::train(&cfg),
        Command::Eval {
            checkpoint,
            data,
            refined,
        } => commands::eval(&cfg, &checkpoint, &data, refined.as_deref()),
        Command::Refine {
            checkpoint,
            data,
            iteration,
        } => commands::refine(&cfg, &checkpoint, &data, iteration),
        Command::Histogram { checkpoint, data, .. } => commands::histogram(&cfg, &checkpoint, &data),
    }
}

/// Process entry point; returns the exit code.
pub fn main() -> i32 {
    init_logging();
    match run(std::env::args_os()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            match e {
                SentError::Config(_) => 2,
                _ => 1,
            }
        }
    }
}
