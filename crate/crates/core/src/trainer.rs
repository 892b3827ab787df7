//! The iterative training loop.
//!
//! Each iteration starts from a freshly initialized classifier (seed
//! `base_seed + t`), trains it for `M` epochs with negative training on the
//! current refined data, scores it on the dev set, and refines the training
//! data with it. Iteration stops once dev F1 has failed to improve for more
//! than `patience` consecutive iterations. The best-dev model then gives the
//! final refined data, on which a fresh classifier (seed `base_seed`) is
//! trained with ordinary cross-entropy.

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::dataset::{LabelId, RefinedDataset};
use crate::error::{Result, SentError};
use crate::losses::{sample_complementary, LossKind};
use crate::metrics::{prf1, Prf};
use crate::model::{Classifier, Example, FeaturizerConfig, HiddenSpec, OptimizerSpec, OptimizerState, SparseFeatures, Target};
use crate::refine::{refine_dataset, RefineConfig, RefineReport};
use crate::scalar::Scalar;
use crate::seed::{self, fnv1a, tag};

use rand::seq::SliceRandom;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Complementary labels per instance per epoch.
    pub k: usize,
    /// Epochs per iteration.
    pub epochs: usize,
    pub max_iterations: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSpec,
    pub refine: RefineConfig,
    pub base_seed: u64,
    /// Epochs of the closing cross-entropy pass; 0 skips it.
    pub final_pt_epochs: usize,
    pub featurizer: FeaturizerConfig,
    pub hidden: Option<HiddenSpec>,
    /// Start every iteration from a fresh classifier.
    pub reinit: bool,
    /// Loss used inside the iterations (negative training normally).
    pub iteration_loss: LossKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 10,
            epochs: 10,
            max_iterations: 10,
            patience: 1,
            batch_size: 32,
            optimizer: OptimizerSpec::default(),
            refine: RefineConfig::default(),
            base_seed: 0,
            final_pt_epochs: 10,
            featurizer: FeaturizerConfig::default(),
            hidden: None,
            reinit: true,
            iteration_loss: LossKind::Nt,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k", self.k),
            ("epochs", self.epochs),
            ("max_iterations", self.max_iterations),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(SentError::Config(format!("{name} must be at least 1")));
            }
        }
        self.optimizer.validate()?;
        self.refine.validate()?;
        self.featurizer.validate()?;
        Ok(())
    }

    pub fn iteration_seed(&self, iteration: usize) -> u64 {
        self.base_seed.wrapping_add(iteration as u64)
    }
}

/// Features of every instance of a dataset, computed once.
pub struct FeatureCache {
    features: Vec<SparseFeatures>,
}

impl FeatureCache {
    pub fn new(ds: &RefinedDataset, config: &FeaturizerConfig) -> Self {
        use rayon::prelude::*;
        FeatureCache {
            features: ds
                .instances()
                .par_iter()
                .map(|i| crate::model::featurize(i, config))
                .collect(),
        }
    }

    pub fn get(&self, i: usize) -> &SparseFeatures {
        &self.features[i]
    }

    pub fn all(&self) -> &[SparseFeatures] {
        &self.features
    }
}

/// `(instance index, label)` pairs of the training view.
fn view_indices(ds: &RefinedDataset) -> Vec<(usize, LabelId)> {
    ds.states()
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.effective_label().map(|l| (i, l)))
        .collect()
}

/// Trains `model` for `epochs` epochs on the training view of `ds`.
///
/// Epoch `e` of iteration `t` shuffles with stream `(base_seed, t, e)`;
/// under negative training every instance draws `K` fresh complementary
/// labels per epoch from a stream keyed by its id. Returns the mean training
/// loss of each epoch.
pub fn train_epochs<T: Scalar>(
    model: &mut Classifier<T>,
    ds: &RefinedDataset,
    cache: &FeatureCache,
    config: &RunConfig,
    iteration: usize,
    kind: LossKind,
    epochs: usize,
) -> Result<Vec<f64>> {
    let view = view_indices(ds);
    if view.is_empty() {
        return Err(SentError::Data("all instances filtered: empty training view".into()));
    }
    let c = model.num_classes();
    let mut opt = OptimizerState::for_model(config.optimizer, model)?;
    let mut curve = Vec::with_capacity(epochs);
    let mut grad = vec![T::zero(); model.params().len()];
    let mut order = view;
    for epoch in 0..epochs {
        let coords = [iteration as u64, epoch as u64];
        let mut shuffle = seed::stream(config.base_seed, &[tag::SHUFFLE, coords[0], coords[1]]);
        order.sort_unstable_by_key(|&(i, _)| i);
        order.shuffle(&mut shuffle);

        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let targets = batch
                .iter()
                .map(|&(i, label)| match kind {
                    LossKind::Pt => Ok(Target::Label(label)),
                    LossKind::Nt => {
                        let id = &ds.instances()[i].id;
                        let mut rng = seed::stream(
                            config.base_seed,
                            &[tag::COMPLEMENT, coords[0], coords[1], fnv1a(id.as_bytes())],
                        );
                        sample_complementary(label, c, config.k, &mut rng).map(Target::Complementary)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let examples: Vec<Example<'_>> = batch
                .iter()
                .zip(&targets)
                .map(|(&(i, _), target)| Example {
                    id: &ds.instances()[i].id,
                    features: cache.get(i),
                    target,
                })
                .collect();
            let loss = model.batch_loss_and_grad_into(&examples, kind, &mut grad)?;
            opt.step(model, &grad)?;
            loss_sum += loss.as_f64() * batch.len() as f64;
        }
        let mean = loss_sum / order.len() as f64;
        debug!("iteration {iteration} epoch {epoch}: {kind:?} loss {mean:.6}");
        curve.push(mean);
    }
    Ok(curve)
}

/// M epochs of negative training on the current refined data.
pub fn train_nt_epochs<T: Scalar>(
    model: &mut Classifier<T>,
    ds: &RefinedDataset,
    cache: &FeatureCache,
    config: &RunConfig,
    iteration: usize,
) -> Result<Vec<f64>> {
    train_epochs(model, ds, cache, config, iteration, LossKind::Nt, config.epochs)
}

/// Argmax predictions for every instance.
pub fn predict_labels<T: Scalar>(model: &Classifier<T>, ds: &RefinedDataset) -> Result<Vec<LabelId>> {
    Ok(model.predict_all(ds.instances())?.iter().map(|p| p.argmax().0).collect())
}

/// NA-excluded micro P/R/F1 against gold labels.
pub fn evaluate_dev<T: Scalar>(model: &Classifier<T>, dev: &RefinedDataset) -> Result<Prf> {
    let golds = dev
        .gold_labels()
        .map_err(|e| SentError::Data(format!("evaluation set lacks gold labels: {e}")))?;
    let preds = predict_labels(model, dev)?;
    prf1(&preds, &golds, dev.label_space().na_id())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub dev: Prf,
    pub train_loss: Vec<f64>,
    pub training_size: usize,
    pub refine: RefineReport,
    pub checkpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalPtRecord {
    pub dev_per_epoch: Vec<Prf>,
    pub train_loss: Vec<f64>,
    pub best_epoch: usize,
    pub dev: Prf,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub iterations: Vec<IterationRecord>,
    pub best_iteration: Option<usize>,
    pub final_refine: Option<RefineReport>,
    pub final_pt: Option<FinalPtRecord>,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&IterationRecord> {
        let b = self.best_iteration?;
        self.iterations.iter().find(|r| r.iteration == b)
    }
}

/// Handed to the observer after every completed iteration.
pub struct IterationArtifacts<'a, T> {
    pub iteration: usize,
    pub model: &'a Classifier<T>,
    /// Data the model was trained on.
    pub trained_on: &'a RefinedDataset,
    /// Data after this iteration's refinement.
    pub refined: &'a RefinedDataset,
    pub history: &'a mut TrainHistory,
}

pub struct SentOutcome<T> {
    pub model: Classifier<T>,
    pub refined: RefinedDataset,
    pub history: TrainHistory,
}

pub fn sent_train<T: Scalar>(train: &RefinedDataset, dev: &RefinedDataset, config: &RunConfig) -> Result<SentOutcome<T>> {
    sent_train_observed(train, dev, config, |_| Ok(()))
}

/// [`sent_train`] with a callback after each iteration (used to persist
/// checkpoints and history as the run progresses).
pub fn sent_train_observed<T: Scalar>(
    train: &RefinedDataset,
    dev: &RefinedDataset,
    config: &RunConfig,
    mut observe: impl FnMut(IterationArtifacts<'_, T>) -> Result<()>,
) -> Result<SentOutcome<T>> {
    config.validate()?;
    dev.gold_labels()
        .map_err(|e| SentError::Data(format!("dev set lacks gold labels: {e}")))?;
    if train.label_space() != dev.label_space() {
        return Err(SentError::Contract("train and dev label spaces differ".into()));
    }
    let ls = train.label_space().clone();
    let cache = FeatureCache::new(train, &config.featurizer);

    let mut history = TrainHistory::default();
    let mut data = train.clone();
    let mut best: Option<(f64, Classifier<T>, RefinedDataset)> = None;
    let mut stale = 0;
    let mut carried: Option<Classifier<T>> = None;

    for t in 1..=config.max_iterations {
        let mut model = match carried.take() {
            Some(m) if !config.reinit => m,
            _ => Classifier::init(ls.clone(), config.featurizer, config.hidden, config.iteration_seed(t))?,
        };
        let curve = train_epochs(&mut model, &data, &cache, config, t, config.iteration_loss, config.epochs)?;
        let dev_prf = evaluate_dev(&model, dev)?;
        let (next, report) = refine_dataset(&data, &model, &config.refine, t)?;
        info!(
            "iteration {t}: dev F1 {:.4}; kept {} filtered {} relabeled {}",
            dev_prf.f1, report.kept, report.filtered, report.relabeled
        );
        history.iterations.push(IterationRecord {
            iteration: t,
            dev: dev_prf,
            train_loss: curve,
            training_size: data.training_view().len(),
            refine: report,
            checkpoint: None,
        });

        let improved = best.as_ref().is_none_or(|(f1, _, _)| dev_prf.f1 > *f1);
        if improved {
            best = Some((dev_prf.f1, model.clone(), data.clone()));
            history.best_iteration = Some(t);
            stale = 0;
        } else {
            stale += 1;
        }
        observe(IterationArtifacts {
            iteration: t,
            model: &model,
            trained_on: &data,
            refined: &next,
            history: &mut history,
        })?;
        data = next;
        carried = Some(model);
        if stale > config.patience {
            info!("dev F1 has not improved for {stale} iteration(s); stopping");
            break;
        }
        if data.training_view().is_empty() {
            info!("refinement filtered every instance; stopping");
            break;
        }
    }

    let (_, model, trained_on) = best.expect("at least one iteration ran");
    let (refined, report) = refine_dataset(&trained_on, &model, &config.refine, history.best_iteration.unwrap_or(0))?;
    history.final_refine = Some(report);
    Ok(SentOutcome {
        model,
        refined,
        history,
    })
}

/// Fresh classifier (seed `base_seed`) trained with cross-entropy on the
/// training view of `ds`; returns the epoch with the best dev F1.
pub fn final_pt<T: Scalar>(
    ds: &RefinedDataset,
    dev: &RefinedDataset,
    config: &RunConfig,
) -> Result<(Classifier<T>, FinalPtRecord)> {
    config.validate()?;
    if config.final_pt_epochs == 0 {
        return Err(SentError::Config("final_pt_epochs must be at least 1".into()));
    }
    let cache = FeatureCache::new(ds, &config.featurizer);
    let mut model = Classifier::init(ds.label_space().clone(), config.featurizer, config.hidden, config.iteration_seed(0))?;
    let view = view_indices(ds);
    if view.is_empty() {
        return Err(SentError::Data("all instances filtered: empty training view".into()));
    }
    let mut opt = OptimizerState::for_model(config.optimizer, &model)?;
    let mut best: Option<(usize, Prf, Classifier<T>)> = None;
    let mut dev_per_epoch = Vec::new();
    let mut losses = Vec::new();
    for epoch in 0..config.final_pt_epochs {
        // one epoch at a time so each can be scored on dev; the optimizer
        // state carries across epochs
        let loss = pt_epoch(&mut model, &mut opt, ds, &cache, config, &view, epoch)?;
        let prf = evaluate_dev(&model, dev)?;
        debug!("final PT epoch {epoch}: loss {loss:.6} dev F1 {:.4}", prf.f1);
        losses.push(loss);
        dev_per_epoch.push(prf);
        if best.as_ref().is_none_or(|(_, b, _)| prf.f1 > b.f1) {
            best = Some((epoch, prf, model.clone()));
        }
    }
    let (best_epoch, dev_prf, model) = best.expect("at least one epoch");
    Ok((
        model,
        FinalPtRecord {
            dev_per_epoch,
            train_loss: losses,
            best_epoch,
            dev: dev_prf,
        },
    ))
}

fn pt_epoch<T: Scalar>(
    model: &mut Classifier<T>,
    opt: &mut OptimizerState<T>,
    ds: &RefinedDataset,
    cache: &FeatureCache,
    config: &RunConfig,
    view: &[(usize, LabelId)],
    epoch: usize,
) -> Result<f64> {
    let mut order = view.to_vec();
    let mut shuffle = seed::stream(config.base_seed, &[tag::SHUFFLE, 0, epoch as u64]);
    order.shuffle(&mut shuffle);
    let mut loss_sum = 0.0;
    let mut grad = vec![T::zero(); model.params().len()];
    for batch in order.chunks(config.batch_size) {
        let targets: Vec<Target> = batch.iter().map(|&(_, l)| Target::Label(l)).collect();
        let examples: Vec<Example<'_>> = batch
            .iter()
            .zip(&targets)
            .map(|(&(i, _), target)| Example {
                id: &ds.instances()[i].id,
                features: cache.get(i),
                target,
            })
            .collect();
        let loss = model.batch_loss_and_grad_into(&examples, LossKind::Pt, &mut grad)?;
        opt.step(model, &grad)?;
        loss_sum += loss.as_f64() * batch.len() as f64;
    }
    Ok(loss_sum / order.len() as f64)
}
