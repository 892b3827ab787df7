//! Precision / recall / F1 and confidence histograms.
//!
//! Classification scores are micro-averaged over the positive (non-NA)
//! classes: an NA prediction is neither a true nor a false positive. Any
//! undefined ratio is reported as 0.

use serde::{Deserialize, Serialize};

use crate::dataset::{LabelId, RefinedDataset, Status};
use crate::error::{Result, SentError};
use crate::model::Classifier;
use crate::scalar::Scalar;

pub const DEFAULT_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Support {
    pub pred_pos: usize,
    pub gold_pos: usize,
    pub tp: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: Support,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

impl Prf {
    pub fn from_counts(pred_pos: usize, gold_pos: usize, tp: usize) -> Self {
        debug_assert!(tp <= pred_pos.min(gold_pos));
        let precision = ratio(tp, pred_pos);
        let recall = ratio(tp, gold_pos);
        Prf {
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
            support: Support { pred_pos, gold_pos, tp },
        }
    }
}

/// NA-excluded micro P/R/F1.
pub fn prf1(predictions: &[LabelId], golds: &[LabelId], na_id: LabelId) -> Result<Prf> {
    if predictions.len() != golds.len() {
        return Err(SentError::Contract(format!(
            "{} predictions vs {} gold labels",
            predictions.len(),
            golds.len()
        )));
    }
    let mut s = Support::default();
    for (&p, &g) in predictions.iter().zip(golds) {
        s.pred_pos += (p != na_id) as usize;
        s.gold_pos += (g != na_id) as usize;
        s.tp += (p == g && g != na_id) as usize;
    }
    Ok(Prf::from_counts(s.pred_pos, s.gold_pos, s.tp))
}

/// P/R/F1 of the refinement's noise flags against ground truth.
pub fn noise_detection_prf1(flagged: &[bool], truth: &[Option<bool>]) -> Result<Prf> {
    if flagged.len() != truth.len() {
        return Err(SentError::Contract("flag and truth lengths differ".into()));
    }
    let mut s = Support::default();
    for (i, (&f, t)) in flagged.iter().zip(truth).enumerate() {
        let t = t.ok_or_else(|| SentError::Data(format!("instance {i} has no noise ground truth")))?;
        s.pred_pos += f as usize;
        s.gold_pos += t as usize;
        s.tp += (f && t) as usize;
    }
    Ok(Prf::from_counts(s.pred_pos, s.gold_pos, s.tp))
}

/// Label-recovery quality.
///
/// `changes` holds `(new label, gold label)` for every instance whose label was
/// changed by re-labeling; `truly_noisy` counts instances whose assigned
/// label differs from gold. A change is correct when it lands on gold, which
/// for a changed label implies the instance was noisy, so the same count is
/// the numerator of both precision and recall.
pub fn relabel_quality(changes: &[(LabelId, LabelId)], truly_noisy: usize) -> Prf {
    let correct = changes.iter().filter(|(new, gold)| new == gold).count();
    Prf::from_counts(changes.len(), truly_noisy, correct.min(truly_noisy))
}

/// [`relabel_quality`] over a refined dataset; requires gold labels.
pub fn relabel_quality_of(ds: &RefinedDataset) -> Result<Prf> {
    let golds = ds.gold_labels()?;
    let mut changes = Vec::new();
    let mut noisy = 0;
    for (st, &gold) in ds.states().iter().zip(&golds) {
        noisy += (st.original_label() != gold) as usize;
        if st.status() == Status::Relabeled {
            let new = st.effective_label().expect("relabeled state has a label");
            if new != st.original_label() {
                changes.push((new, gold));
            }
        }
    }
    Ok(relabel_quality(&changes, noisy))
}

/// Noise-detection P/R/F1 where "flagged" means the instance was ever
/// filtered (status FILTERED or RELABELED). `None` without ground truth.
pub fn noise_detection_of(ds: &RefinedDataset) -> Option<Prf> {
    let truth = ds.noise_truth()?;
    let flagged: Vec<bool> = ds.states().iter().map(|s| s.status() != Status::Kept).collect();
    let truth: Vec<Option<bool>> = truth.into_iter().map(Some).collect();
    noise_detection_prf1(&flagged, &truth).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cohort {
    Clean,
    Noisy,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub clean: Vec<usize>,
    pub noisy: Vec<usize>,
    pub unknown: Vec<usize>,
    pub exclude_na: bool,
}

impl Histogram {
    pub fn new(bins: usize, exclude_na: bool) -> Result<Self> {
        if bins < 2 {
            return Err(SentError::Contract(format!("need at least 2 bins, got {bins}")));
        }
        Ok(Histogram {
            edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
            clean: vec![0; bins],
            noisy: vec![0; bins],
            unknown: vec![0; bins],
            exclude_na,
        })
    }

    pub fn bins(&self) -> usize {
        self.clean.len()
    }

    /// Bin of `v`; the last bin is closed on the right.
    pub fn bin_of(&self, v: f64) -> usize {
        let b = self.bins();
        ((v.clamp(0.0, 1.0) * b as f64) as usize).min(b - 1)
    }

    pub fn add(&mut self, v: f64, cohort: Cohort) {
        let b = self.bin_of(v);
        match cohort {
            Cohort::Clean => self.clean[b] += 1,
            Cohort::Noisy => self.noisy[b] += 1,
            Cohort::Unknown => self.unknown[b] += 1,
        }
    }

    pub fn counts(&self, cohort: Cohort) -> &[usize] {
        match cohort {
            Cohort::Clean => &self.clean,
            Cohort::Noisy => &self.noisy,
            Cohort::Unknown => &self.unknown,
        }
    }

    pub fn total(&self) -> usize {
        self.clean.iter().chain(&self.noisy).chain(&self.unknown).sum()
    }

    /// Share of `cohort` in bins whose upper edge is ≤ `x`.
    pub fn fraction_below(&self, cohort: Cohort, x: f64) -> f64 {
        let counts = self.counts(cohort);
        let total: usize = counts.iter().sum();
        let low: usize = counts
            .iter()
            .zip(&self.edges[1..])
            .filter(|(_, &hi)| hi <= x + 1e-12)
            .map(|(c, _)| c)
            .sum();
        ratio(low, total)
    }
}

/// Per-instance confidence in its effective label, with its cohort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confidence {
    pub index: usize,
    pub value: f64,
    pub cohort: Cohort,
}

/// `p_{effective label}` for every non-filtered instance (optionally skipping
/// NA-labeled ones).
pub fn label_confidences<T: Scalar>(
    model: &Classifier<T>,
    ds: &RefinedDataset,
    exclude_na: bool,
) -> Result<Vec<Confidence>> {
    let na = ds.label_space().na_id();
    let probs = model.predict_all(ds.instances())?;
    let truth = ds.instances().iter().map(|i| {
        i.is_noise
            .or_else(|| Some(i.assigned_label? != i.gold_label?))
    });
    Ok(ds
        .states()
        .iter()
        .zip(probs)
        .zip(truth)
        .enumerate()
        .filter_map(|(index, ((st, p), noisy))| {
            let label = st.effective_label()?;
            if exclude_na && label == na {
                return None;
            }
            let cohort = match noisy {
                Some(true) => Cohort::Noisy,
                Some(false) => Cohort::Clean,
                None => Cohort::Unknown,
            };
            Some(Confidence {
                index,
                value: p.get(label).as_f64(),
                cohort,
            })
        })
        .collect())
}

pub fn histogram_of(values: &[Confidence], bins: usize, exclude_na: bool) -> Result<Histogram> {
    let mut h = Histogram::new(bins, exclude_na)?;
    for c in values {
        h.add(c.value, c.cohort);
    }
    Ok(h)
}

pub fn confidence_histogram<T: Scalar>(
    model: &Classifier<T>,
    ds: &RefinedDataset,
    bins: usize,
    exclude_na: bool,
) -> Result<Histogram> {
    Histogram::new(bins, exclude_na)?;
    histogram_of(&label_confidences(model, ds, exclude_na)?, bins, exclude_na)
}

/// Mean confidence of one cohort; `None` when the cohort is empty.
pub fn cohort_mean(values: &[Confidence], cohort: Cohort) -> Option<f64> {
    let (sum, n) = values
        .iter()
        .filter(|c| c.cohort == cohort)
        .fold((0.0, 0usize), |(s, n), c| (s + c.value, n + 1));
    (n > 0).then(|| sum / n as f64)
}
