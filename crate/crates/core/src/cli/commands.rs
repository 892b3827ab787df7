use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use super::config::CliConfig;
use crate::dataset::{partition, read_jsonl, save_dataset, LabelSpace, LoadOptions, RefinedDataset};
use crate::error::{Result, SentError};
use crate::losses::LossKind;
use crate::metrics::{confidence_histogram, noise_detection_of, relabel_quality_of, Prf};
use crate::model::{load_checkpoint, save_checkpoint, Classifier};
use crate::noisegen::{assign_bag_labels, inject_noise, synth_corpus, SynthSpec};
use crate::refine::refine_dataset;
use crate::trainer::{evaluate_dev, final_pt, sent_train_observed, train_epochs, FeatureCache, IterationArtifacts};

type Model = Classifier<f64>;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SentError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| SentError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports always serialize");
    text.push('\n');
    write_text(path, &text)
}

fn save_data(path: &Path, ds: &RefinedDataset) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_dataset(path, ds)
}

fn save_model(path: &Path, model: &Model) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    save_checkpoint(path, model)
}

fn out_dir(cfg: &CliConfig) -> Result<&Path> {
    cfg.paths
        .out
        .as_deref()
        .ok_or_else(|| SentError::Config("an output directory is required (--out or paths.out)".into()))
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| SentError::Config(format!("missing {what} (--{what} or paths.{what})")))
}

/// Reads a dataset, assigning unassigned instances from their bags.
fn load(path: &Path, label_space: Option<&LabelSpace>, seed: u64) -> Result<RefinedDataset> {
    let mut raw = read_jsonl(
        path,
        LoadOptions {
            label_space,
            ..LoadOptions::default()
        },
    )?;
    raw.instances = assign_bag_labels(&raw.instances, seed)?;
    raw.into_dataset()
}

fn label_space(cfg: &CliConfig) -> Result<Option<LabelSpace>> {
    cfg.paths
        .labels
        .as_deref()
        .map(|p| LabelSpace::from_file(p, crate::dataset::DEFAULT_NA_NAME))
        .transpose()
}

pub fn synth(cfg: &CliConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let spec = SynthSpec {
        class_counts: cfg.synth.class_counts(),
        vocab: cfg.synth.vocab.clone(),
        seed: cfg.seed,
    };
    let ds = synth_corpus(&spec)?;
    let parts = partition(&ds, &cfg.synth.split, cfg.seed)?;
    create_dir(dir)?;
    let mut labels = ds.label_space().names().join("\n");
    labels.push('\n');
    write_text(&dir.join("labels.txt"), &labels)?;
    for (name, part) in ["train", "dev", "test"].iter().zip(&parts) {
        let path = dir.join(format!("{name}.jsonl"));
        save_data(&path, part)?;
        println!("{}: {} instances", path.display(), part.len());
    }
    Ok(())
}

pub fn corrupt(cfg: &CliConfig, input: &Path, output: &Path, manifest: Option<&Path>) -> Result<()> {
    let ls = label_space(cfg)?;
    let mut raw = read_jsonl(
        input,
        LoadOptions {
            label_space: ls.as_ref(),
            ..LoadOptions::default()
        },
    )?;
    // the clean corpus is labeled by its gold labels
    for inst in &mut raw.instances {
        let gold = inst
            .gold_label
            .ok_or_else(|| SentError::Data(format!("instance id={} has no gold label", inst.id)))?;
        inst.assigned_label.get_or_insert(gold);
    }
    let ds = raw.into_dataset()?;
    let (noisy, report) = inject_noise(&ds, &cfg.noise_spec())?;
    save_data(output, &noisy)?;
    let manifest = manifest.map(Path::to_path_buf).unwrap_or_else(|| output.with_extension("manifest.json"));
    write_json(&manifest, &report)?;
    println!("corrupted {} of {} instances", report.corrupted, report.total);
    Ok(())
}

#[derive(Serialize)]
struct TestScores {
    pt_baseline: Prf,
    sent: Prf,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_pt: Option<Prf>,
}

pub fn train(cfg: &CliConfig) -> Result<()> {
    let dir = out_dir(cfg)?.to_path_buf();
    let run = cfg.run_config();
    let fixed = label_space(cfg)?;
    let train = load(required(&cfg.paths.train, "train")?, fixed.as_ref(), cfg.seed)?;
    let ls = train.label_space().clone();
    let dev = load(required(&cfg.paths.dev, "dev")?, Some(&ls), cfg.seed)?;
    let test = cfg
        .paths
        .test
        .as_deref()
        .map(|p| load(p, Some(&ls), cfg.seed))
        .transpose()?;

    create_dir(&dir)?;
    write_text(&dir.join("config.conf"), &cfg.render())?;
    let hist_dir = dir.join("histograms");
    let histogram = |name: &str, model: &Model, ds: &RefinedDataset| -> Result<()> {
        let h = confidence_histogram(model, ds, cfg.bins, cfg.exclude_na)?;
        write_json(&hist_dir.join(format!("{name}.json")), &h)
    };

    // cross-entropy on the unrefined data for as many epochs as one iteration
    info!("training the PT baseline");
    let cache = FeatureCache::new(&train, &run.featurizer);
    let mut baseline = Classifier::init(ls.clone(), run.featurizer, run.hidden, run.iteration_seed(1))?;
    train_epochs(&mut baseline, &train, &cache, &run, 1, LossKind::Pt, run.epochs)?;
    drop(cache);
    save_model(&dir.join("pt_baseline").join("model.ckpt"), &baseline)?;
    histogram("pt_baseline", &baseline, &train)?;

    let history_path = dir.join("history.json");
    let outcome = sent_train_observed::<f64>(&train, &dev, &run, |a: IterationArtifacts<'_, f64>| {
        let rel = format!("iter_{:02}/model.ckpt", a.iteration);
        save_model(&dir.join(&rel), a.model)?;
        let record = a.history.iterations.last_mut().expect("record of this iteration");
        record.checkpoint = Some(rel);
        write_json(&dir.join(format!("iter_{:02}", a.iteration)).join("refine_report.json"), &record.refine)?;
        if a.iteration == 1 {
            histogram("nt_iter1", a.model, a.trained_on)?;
        }
        write_json(&history_path, a.history)
    })?;
    let mut history = outcome.history;
    save_model(&dir.join("sent").join("model.ckpt"), &outcome.model)?;
    save_data(&dir.join("refined_train.jsonl"), &outcome.refined)?;
    histogram("sent", &outcome.model, &outcome.refined)?;

    let final_model = if run.final_pt_epochs > 0 {
        info!("final PT on the refined data");
        let (model, record) = final_pt::<f64>(&outcome.refined, &dev, &run)?;
        history.final_pt = Some(record);
        save_model(&dir.join("final").join("model.ckpt"), &model)?;
        histogram("final_pt", &model, &outcome.refined)?;
        Some(model)
    } else {
        None
    };
    write_json(&history_path, &history)?;

    if let Some(test) = test {
        let scores = TestScores {
            pt_baseline: evaluate_dev(&baseline, &test)?,
            sent: evaluate_dev(&outcome.model, &test)?,
            final_pt: final_model.as_ref().map(|m| evaluate_dev(m, &test)).transpose()?,
        };
        write_json(&dir.join("test_metrics.json"), &scores)?;
    }
    println!(
        "{} iteration(s), best {}; run directory {}",
        history.iterations.len(),
        history.best_iteration.unwrap_or(0),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct NoiseReport {
    noise_detection: Prf,
    relabel: Prf,
}

pub fn eval(cfg: &CliConfig, checkpoint: &Path, data: &Path, refined: Option<&Path>) -> Result<()> {
    let model: Model = load_checkpoint(checkpoint)?;
    let ls = model.label_space().clone();
    let ds = load(data, Some(&ls), cfg.seed)?;
    let prf = evaluate_dev(&model, &ds)?;
    let noise = refined
        .map(|p| -> Result<NoiseReport> {
            let r = load(p, Some(&ls), cfg.seed)?;
            let noise_detection = noise_detection_of(&r)
                .ok_or_else(|| SentError::Data(format!("{}: instances lack is_noise", p.display())))?;
            Ok(NoiseReport {
                noise_detection,
                relabel: relabel_quality_of(&r)?,
            })
        })
        .transpose()?;
    match cfg.paths.out.as_deref() {
        Some(dir) => {
            write_json(&dir.join("metrics.json"), &prf)?;
            if let Some(n) = &noise {
                write_json(&dir.join("noise_report.json"), n)?;
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            let text = serde_json::to_string_pretty(&prf).expect("serializes");
            writeln!(w, "{text}").map_err(|e| SentError::io("<stdout>", e))?;
            if let Some(n) = &noise {
                let text = serde_json::to_string_pretty(n).expect("serializes");
                writeln!(w, "{text}").map_err(|e| SentError::io("<stdout>", e))?;
            }
        }
    }
    Ok(())
}

pub fn refine(cfg: &CliConfig, checkpoint: &Path, data: &Path, iteration: usize) -> Result<()> {
    let dir = out_dir(cfg)?;
    let model: Model = load_checkpoint(checkpoint)?;
    let ds = load(data, Some(model.label_space()), cfg.seed)?;
    let (refined, report) = refine_dataset(&ds, &model, &cfg.run.refine, iteration)?;
    save_data(&dir.join("refined.jsonl"), &refined)?;
    write_json(&dir.join("refine_report.json"), &report)?;
    println!(
        "kept {} filtered {} relabeled {} (newly filtered {}, newly relabeled {})",
        report.kept, report.filtered, report.relabeled, report.newly_filtered, report.newly_relabeled
    );
    Ok(())
}

pub fn histogram(cfg: &CliConfig, checkpoint: &Path, data: &Path) -> Result<()> {
    let model: Model = load_checkpoint(checkpoint)?;
    let ds = load(data, Some(model.label_space()), cfg.seed)?;
    let h = confidence_histogram(&model, &ds, cfg.bins, cfg.exclude_na)?;
    match cfg.paths.out.as_deref() {
        Some(dir) => write_json(&dir.join("histogram.json"), &h),
        None => {
            println!("{}", serde_json::to_string_pretty(&h).expect("serializes"));
            Ok(())
        }
    }
}
