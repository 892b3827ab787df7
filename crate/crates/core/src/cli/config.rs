//! Flat `section.key = value` configuration.
//!
//! Resolution order is defaults, then the config file, then command-line
//! overrides. [`CliConfig::render`] writes every key, so the echo of a
//! resolved config reruns the same experiment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Result, SentError};
use crate::losses::LossKind;
use crate::model::{Activation, HiddenSpec, OptimizerKind};
use crate::noisegen::{NoiseSpec, NoiseWeighting, VocabSpec};
use crate::trainer::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// One class name per line; inferred from the training file when absent.
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub classes: usize,
    pub per_class: usize,
    /// Instances of the NA class; `per_class` when unset.
    pub na_count: Option<usize>,
    /// Train/dev/test shares; whatever is left over goes unused.
    pub split: [f64; 3],
    pub vocab: VocabSpec,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            classes: 10,
            per_class: 200,
            na_count: None,
            split: [0.8, 0.1, 0.1],
            vocab: VocabSpec::default(),
        }
    }
}

impl SynthConfig {
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![self.per_class; self.classes];
        if let (Some(first), Some(na)) = (counts.first_mut(), self.na_count) {
            *first = na;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub seed: u64,
    pub run: RunConfig,
    pub noise: NoiseSpec,
    pub synth: SynthConfig,
    pub bins: usize,
    pub exclude_na: bool,
    pub paths: Paths,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            seed: 0,
            run: RunConfig::default(),
            noise: NoiseSpec::default(),
            synth: SynthConfig::default(),
            bins: crate::metrics::DEFAULT_BINS,
            exclude_na: true,
            paths: Paths {
                train: None,
                dev: None,
                test: None,
                labels: None,
                out: None,
            },
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| SentError::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(SentError::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl CliConfig {
    /// Every recognised key, in the order [`render`](Self::render) writes them.
    pub const KEYS: &'static [&'static str] = &[
        "seed",
        "run.k",
        "run.epochs",
        "run.max_iterations",
        "run.patience",
        "run.batch_size",
        "run.final_pt_epochs",
        "run.reinit",
        "run.iteration_loss",
        "optimizer.kind",
        "optimizer.learning_rate",
        "refine.th",
        "refine.th_relabel",
        "refine.relabel",
        "featurizer.hash_dim",
        "featurizer.window",
        "featurizer.use_entity_types",
        "featurizer.use_position_buckets",
        "model.hidden",
        "model.activation",
        "noise.ratio",
        "noise.weighting",
        "synth.classes",
        "synth.per_class",
        "synth.na_count",
        "synth.split",
        "synth.filler_words",
        "synth.triggers_per_class",
        "synth.entity_names",
        "synth.min_len",
        "synth.max_len",
        "histogram.bins",
        "histogram.exclude_na",
        "paths.train",
        "paths.dev",
        "paths.test",
        "paths.labels",
        "paths.out",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let run = &mut self.run;
        let syn = &mut self.synth;
        match key {
            "seed" => self.seed = parse(key, v)?,
            "run.k" => run.k = parse(key, v)?,
            "run.epochs" => run.epochs = parse(key, v)?,
            "run.max_iterations" => run.max_iterations = parse(key, v)?,
            "run.patience" => run.patience = parse(key, v)?,
            "run.batch_size" => run.batch_size = parse(key, v)?,
            "run.final_pt_epochs" => run.final_pt_epochs = parse(key, v)?,
            "run.reinit" => run.reinit = parse_bool(key, v)?,
            "run.iteration_loss" => {
                run.iteration_loss = match v {
                    "nt" => LossKind::Nt,
                    "pt" => LossKind::Pt,
                    _ => return Err(SentError::Config(format!("{key}: expected nt or pt, got {v:?}"))),
                }
            }
            "optimizer.kind" => {
                run.optimizer.kind = match v {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    _ => return Err(SentError::Config(format!("{key}: expected adam or sgd, got {v:?}"))),
                }
            }
            "optimizer.learning_rate" => run.optimizer.learning_rate = parse(key, v)?,
            "refine.th" => run.refine.th = parse(key, v)?,
            "refine.th_relabel" => run.refine.th_relabel = parse(key, v)?,
            "refine.relabel" => run.refine.relabel = parse_bool(key, v)?,
            "featurizer.hash_dim" => run.featurizer.hash_dim = parse(key, v)?,
            "featurizer.window" => run.featurizer.window = parse(key, v)?,
            "featurizer.use_entity_types" => run.featurizer.use_entity_types = parse_bool(key, v)?,
            "featurizer.use_position_buckets" => run.featurizer.use_position_buckets = parse_bool(key, v)?,
            "model.hidden" => {
                let size: usize = parse(key, v)?;
                let activation = run.hidden.map_or(Activation::Tanh, |h| h.activation);
                run.hidden = (size > 0).then_some(HiddenSpec { size, activation });
            }
            "model.activation" => {
                let act = match v {
                    "tanh" => Activation::Tanh,
                    "relu" => Activation::Relu,
                    _ => return Err(SentError::Config(format!("{key}: expected tanh or relu, got {v:?}"))),
                };
                if let Some(h) = run.hidden.as_mut() {
                    h.activation = act;
                } else if act != Activation::Tanh {
                    return Err(SentError::Config(format!("{key}: set model.hidden first")));
                }
            }
            "noise.ratio" => self.noise.ratio = parse(key, v)?,
            "noise.weighting" => {
                self.noise.weighting = match v {
                    "class_frequency" => NoiseWeighting::ClassFrequency,
                    "uniform" => NoiseWeighting::Uniform,
                    _ => {
                        return Err(SentError::Config(format!(
                            "{key}: expected class_frequency or uniform, got {v:?}"
                        )))
                    }
                }
            }
            "synth.classes" => syn.classes = parse(key, v)?,
            "synth.per_class" => syn.per_class = parse(key, v)?,
            "synth.na_count" => syn.na_count = if v.is_empty() { None } else { Some(parse(key, v)?) },
            "synth.split" => {
                let parts: Vec<f64> = v.split(',').map(|p| parse(key, p.trim())).collect::<Result<_>>()?;
                syn.split = parts
                    .try_into()
                    .map_err(|_| SentError::Config(format!("{key}: expected three comma-separated shares")))?;
            }
            "synth.filler_words" => syn.vocab.filler_words = parse(key, v)?,
            "synth.triggers_per_class" => syn.vocab.triggers_per_class = parse(key, v)?,
            "synth.entity_names" => syn.vocab.entity_names = parse(key, v)?,
            "synth.min_len" => syn.vocab.min_len = parse(key, v)?,
            "synth.max_len" => syn.vocab.max_len = parse(key, v)?,
            "histogram.bins" => self.bins = parse(key, v)?,
            "histogram.exclude_na" => self.exclude_na = parse_bool(key, v)?,
            "paths.train" => self.paths.train = opt_path(v),
            "paths.dev" => self.paths.dev = opt_path(v),
            "paths.test" => self.paths.test = opt_path(v),
            "paths.labels" => self.paths.labels = opt_path(v),
            "paths.out" => self.paths.out = opt_path(v),
            _ => return Err(SentError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let run = &self.run;
        let syn = &self.synth;
        Some(match key {
            "seed" => self.seed.to_string(),
            "run.k" => run.k.to_string(),
            "run.epochs" => run.epochs.to_string(),
            "run.max_iterations" => run.max_iterations.to_string(),
            "run.patience" => run.patience.to_string(),
            "run.batch_size" => run.batch_size.to_string(),
            "run.final_pt_epochs" => run.final_pt_epochs.to_string(),
            "run.reinit" => run.reinit.to_string(),
            "run.iteration_loss" => match run.iteration_loss {
                LossKind::Nt => "nt".into(),
                LossKind::Pt => "pt".into(),
            },
            "optimizer.kind" => match run.optimizer.kind {
                OptimizerKind::Adam => "adam".into(),
                OptimizerKind::Sgd => "sgd".into(),
            },
            "optimizer.learning_rate" => run.optimizer.learning_rate.to_string(),
            "refine.th" => run.refine.th.to_string(),
            "refine.th_relabel" => run.refine.th_relabel.to_string(),
            "refine.relabel" => run.refine.relabel.to_string(),
            "featurizer.hash_dim" => run.featurizer.hash_dim.to_string(),
            "featurizer.window" => run.featurizer.window.to_string(),
            "featurizer.use_entity_types" => run.featurizer.use_entity_types.to_string(),
            "featurizer.use_position_buckets" => run.featurizer.use_position_buckets.to_string(),
            "model.hidden" => run.hidden.map_or(0, |h| h.size).to_string(),
            "model.activation" => match run.hidden.map_or(Activation::Tanh, |h| h.activation) {
                Activation::Tanh => "tanh".into(),
                Activation::Relu => "relu".into(),
            },
            "noise.ratio" => self.noise.ratio.to_string(),
            "noise.weighting" => match self.noise.weighting {
                NoiseWeighting::ClassFrequency => "class_frequency".into(),
                NoiseWeighting::Uniform => "uniform".into(),
            },
            "synth.classes" => syn.classes.to_string(),
            "synth.per_class" => syn.per_class.to_string(),
            "synth.na_count" => syn.na_count.map(|n| n.to_string()).unwrap_or_default(),
            "synth.split" => syn.split.map(|f| f.to_string()).join(","),
            "synth.filler_words" => syn.vocab.filler_words.to_string(),
            "synth.triggers_per_class" => syn.vocab.triggers_per_class.to_string(),
            "synth.entity_names" => syn.vocab.entity_names.to_string(),
            "synth.min_len" => syn.vocab.min_len.to_string(),
            "synth.max_len" => syn.vocab.max_len.to_string(),
            "histogram.bins" => self.bins.to_string(),
            "histogram.exclude_na" => self.exclude_na.to_string(),
            "paths.train" => show_path(&self.paths.train),
            "paths.dev" => show_path(&self.paths.dev),
            "paths.test" => show_path(&self.paths.test),
            "paths.labels" => show_path(&self.paths.labels),
            "paths.out" => show_path(&self.paths.out),
            _ => return None,
        })
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| SentError::Parse {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key.trim(), value).map_err(|e| SentError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| SentError::io(path, e))?;
        self.apply_text(&text).map_err(|e| match e {
            SentError::Parse { line, message } => SentError::Config(format!("{}:{line}: {message}", path.display())),
            other => other,
        })
    }

    /// `key = value` for every key, grouped by section.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for key in Self::KEYS {
            let sec = key.split_once('.').map_or("", |(s, _)| s);
            if sec != section && !out.is_empty() {
                out.push('\n');
            }
            section = sec;
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("listed key"));
        }
        out
    }

    /// The training configuration, seeded from `seed`.
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            base_seed: self.seed,
            ..self.run.clone()
        }
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            seed: self.seed,
            ..self.noise
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.run_config().validate()?;
        self.noise_spec().validate()?;
        if self.bins < 2 {
            return Err(SentError::Config("histogram.bins must be at least 2".into()));
        }
        Ok(())
    }
}
