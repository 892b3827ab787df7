//! Noise filtering with per-class dynamic thresholds, and confidence-gated
//! re-labeling of the filtered instances.
//!
//! For class `c`, `p_h[c]` is the highest probability of class `c` the model
//! assigns to any instance currently labeled `c`, and the class threshold is
//! `Th · p_h[c]`. An instance labeled `c` whose `p_c` falls strictly below its
//! class threshold is filtered. A filtered instance is re-labeled to its
//! argmax class when that maximum probability strictly exceeds `Th_relabel`.

use serde::{Deserialize, Serialize};

use crate::dataset::{InstanceState, LabelId, RefinedDataset, Status};
use crate::error::{Result, SentError};
use crate::metrics::{noise_detection_of, relabel_quality_of};
use crate::model::Classifier;
use crate::prob::ProbVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Global filtering threshold `Th`.
    pub th: f64,
    /// Re-labeling threshold `Th_relabel`.
    pub th_relabel: f64,
    /// When false, filtered instances stay filtered.
    #[serde(default = "yes")]
    pub relabel: bool,
}

fn yes() -> bool {
    true
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            th: 0.25,
            th_relabel: 0.7,
            relabel: true,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.th) {
            return Err(SentError::Config(format!("th must lie in (0, 1), got {}", self.th)));
        }
        if !open_unit(self.th_relabel) {
            return Err(SentError::Config(format!(
                "th_relabel must lie in (0, 1), got {}",
                self.th_relabel
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassThresholds<T> {
    pub p_h: Vec<T>,
    pub th_c: Vec<T>,
}

impl<T: Scalar> ClassThresholds<T> {
    /// The same absolute threshold for every class (no `p_h` scaling).
    pub fn uniform(value: T, classes: usize) -> Self {
        ClassThresholds {
            p_h: vec![T::one(); classes],
            th_c: vec![value; classes],
        }
    }
}

/// Per-class maximum of `p_c` over non-filtered instances labeled `c`.
/// Classes without labeled instances get 0.
pub fn class_max_from_probs<T: Scalar>(ds: &RefinedDataset, probs: &[Option<ProbVector<T>>]) -> Result<Vec<T>> {
    let mut p_h = vec![T::zero(); ds.label_space().size()];
    for (i, st) in ds.states().iter().enumerate() {
        let Some(c) = st.effective_label() else { continue };
        let p = row(ds, probs, i)?;
        p_h[c] = p_h[c].max(p.get(c));
    }
    Ok(p_h)
}

pub fn class_max_probs<T: Scalar>(model: &Classifier<T>, ds: &RefinedDataset) -> Result<Vec<T>> {
    let probs: Vec<Option<ProbVector<T>>> = model.predict_all(ds.instances())?.into_iter().map(Some).collect();
    class_max_from_probs(ds, &probs)
}

/// `Th_c = Th · p_h[c]`.
pub fn compute_thresholds<T: Scalar>(p_h: &[T], config: &RefineConfig) -> ClassThresholds<T> {
    let th = T::of(config.th);
    ClassThresholds {
        p_h: p_h.to_vec(),
        th_c: p_h.iter().map(|&p| th * p).collect(),
    }
}

fn row<'a, T>(ds: &RefinedDataset, probs: &'a [Option<ProbVector<T>>], i: usize) -> Result<&'a ProbVector<T>> {
    probs.get(i).and_then(Option::as_ref).ok_or_else(|| {
        SentError::Contract(format!(
            "no probability row for instance id={}",
            ds.instances()[i].id
        ))
    })
}

/// Marks non-filtered instances below their class threshold as FILTERED.
pub fn filter_noise<T: Scalar>(
    ds: &RefinedDataset,
    probs: &[Option<ProbVector<T>>],
    thresholds: &ClassThresholds<T>,
) -> Result<RefinedDataset> {
    let mut states = ds.states().to_vec();
    for (i, st) in states.iter_mut().enumerate() {
        let Some(c) = st.effective_label() else { continue };
        let p = row(ds, probs, i)?;
        if p.get(c) < thresholds.th_c[c] {
            *st = InstanceState::filtered(st.original_label());
        }
    }
    ds.with_states(states)
}

/// Re-labels FILTERED instances whose top probability exceeds `th_relabel`.
pub fn relabel<T: Scalar>(
    ds: &RefinedDataset,
    probs: &[Option<ProbVector<T>>],
    config: &RefineConfig,
) -> Result<RefinedDataset> {
    let gate = T::of(config.th_relabel);
    let mut states = ds.states().to_vec();
    for (i, st) in states.iter_mut().enumerate() {
        if !st.is_filtered() {
            continue;
        }
        let (k, top) = row(ds, probs, i)?.argmax();
        if top > gate {
            *st = InstanceState::relabeled(st.original_label(), k);
        }
    }
    ds.with_states(states)
}

/// Per-pass summary, persisted as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub iteration: usize,
    pub kept: usize,
    pub filtered: usize,
    pub relabeled: usize,
    pub thresholds: Vec<f64>,
    pub p_h: Vec<f64>,
    pub noise_precision: Option<f64>,
    pub noise_recall: Option<f64>,
    pub relabel_precision: Option<f64>,
    pub relabel_recall: Option<f64>,
    /// Instances this pass moved out of the training view.
    pub newly_filtered: usize,
    /// Instances this pass re-labeled (including back to their original label).
    pub newly_relabeled: usize,
    /// Currently RELABELED instances whose new label equals the original one.
    pub relabeled_to_original: usize,
}

impl RefineReport {
    pub fn noise_f1(&self) -> Option<f64> {
        Some(crate::metrics::harmonic_mean(self.noise_precision?, self.noise_recall?))
    }
}

/// Class maxima used by [`refine_dataset`].
///
/// Besides the instances labeled `c`, instances that this pass would re-label
/// into `c` (argmax `c` above `th_relabel`, whatever their status) count
/// toward the maximum. With that, a second pass under the same model sees the
/// same thresholds and changes nothing.
fn refine_ceiling<T: Scalar>(ds: &RefinedDataset, probs: &[Option<ProbVector<T>>], config: &RefineConfig) -> Result<Vec<T>> {
    let mut p_h = class_max_from_probs(ds, probs)?;
    if config.relabel {
        let gate = T::of(config.th_relabel);
        for p in probs.iter().flatten() {
            let (k, top) = p.argmax();
            if top > gate {
                p_h[k] = p_h[k].max(top);
            }
        }
    }
    Ok(p_h)
}

/// One filtering + re-labeling pass with the given per-instance probabilities.
pub fn refine_with_probs<T: Scalar>(
    ds: &RefinedDataset,
    probs: &[Option<ProbVector<T>>],
    config: &RefineConfig,
    iteration: usize,
) -> Result<(RefinedDataset, RefineReport)> {
    config.validate()?;
    let p_h = refine_ceiling(ds, probs, config)?;
    let thresholds = compute_thresholds(&p_h, config);
    let filtered = filter_noise(ds, probs, &thresholds)?;
    let out = if config.relabel {
        relabel(&filtered, probs, config)?
    } else {
        filtered.clone()
    };

    let newly_filtered = ds
        .states()
        .iter()
        .zip(filtered.states())
        .filter(|(before, after)| !before.is_filtered() && after.is_filtered())
        .count();
    let newly_relabeled = filtered
        .states()
        .iter()
        .zip(out.states())
        .filter(|(before, after)| before.is_filtered() && after.status() == Status::Relabeled)
        .count();
    let relabeled_to_original = out
        .states()
        .iter()
        .filter(|s| s.status() == Status::Relabeled && s.effective_label() == Some(s.original_label()))
        .count();

    let noise = (!out.is_empty()).then(|| noise_detection_of(&out)).flatten();
    let relabel_q = if out.is_empty() { None } else { relabel_quality_of(&out).ok() };
    let report = RefineReport {
        iteration,
        kept: out.count(Status::Kept),
        filtered: out.count(Status::Filtered),
        relabeled: out.count(Status::Relabeled),
        thresholds: thresholds.th_c.iter().map(|t| t.as_f64()).collect(),
        p_h: thresholds.p_h.iter().map(|t| t.as_f64()).collect(),
        noise_precision: noise.map(|m| m.precision),
        noise_recall: noise.map(|m| m.recall),
        relabel_precision: relabel_q.map(|m| m.precision),
        relabel_recall: relabel_q.map(|m| m.recall),
        newly_filtered,
        newly_relabeled,
        relabeled_to_original,
    };
    Ok((out, report))
}

/// Scores every instance with `model`, then filters and re-labels.
pub fn refine_dataset<T: Scalar>(
    ds: &RefinedDataset,
    model: &Classifier<T>,
    config: &RefineConfig,
    iteration: usize,
) -> Result<(RefinedDataset, RefineReport)> {
    if model.label_space() != ds.label_space() {
        return Err(SentError::Contract("model and dataset label spaces differ".into()));
    }
    let probs: Vec<Option<ProbVector<T>>> = model.predict_all(ds.instances())?.into_iter().map(Some).collect();
    refine_with_probs(ds, &probs, config, iteration)
}

/// Flags of instances that refinement took out of the KEPT state.
pub fn flagged(ds: &RefinedDataset) -> Vec<bool> {
    ds.states().iter().map(|s| s.status() != Status::Kept).collect()
}

/// `(instance index, new label)` for every RELABELED instance.
pub fn relabeled_pairs(ds: &RefinedDataset) -> Vec<(usize, LabelId)> {
    ds.states()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.status() == Status::Relabeled)
        .map(|(i, s)| (i, s.effective_label().expect("relabeled has a label")))
        .collect()
}
