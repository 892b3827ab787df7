//! Positive-training (cross-entropy) and negative-training (complementary
//! label) losses, with their gradients with respect to the logits.
//!
//! Negative training on a complementary label `k` minimizes `−ln(1 − p_k)`:
//! the model is told "this sentence is not class `k`". With `K` sampled
//! complementary labels the per-instance loss is the mean over the `K`
//! per-label terms.

use rand::seq::index;
use rand::Rng;

use crate::dataset::LabelId;
use crate::error::{Result, SentError};
use crate::prob::ProbVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Positive training: cross-entropy toward the given label.
    Pt,
    /// Negative training on sampled complementary labels.
    Nt,
}

/// Complementary labels drawn for one instance: distinct, sorted, and never
/// the instance's effective label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplementarySample {
    excluded: LabelId,
    labels: Vec<LabelId>,
}

impl ComplementarySample {
    pub fn new(excluded: LabelId, mut labels: Vec<LabelId>) -> Result<Self> {
        labels.sort_unstable();
        labels.dedup();
        if labels.is_empty() {
            return Err(SentError::Contract("empty complementary label set".into()));
        }
        if labels.contains(&excluded) {
            return Err(SentError::Contract(format!(
                "complementary set {labels:?} contains the effective label {excluded}"
            )));
        }
        Ok(ComplementarySample { excluded, labels })
    }

    /// The label this sample is complementary to.
    pub fn excluded(&self) -> LabelId {
        self.excluded
    }

    pub fn labels(&self) -> &[LabelId] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }
}

/// Draws `min(k, c − 1)` distinct labels uniformly from `{0..c} \ {label}`.
pub fn sample_complementary<R: Rng + ?Sized>(
    label: LabelId,
    c: usize,
    k: usize,
    rng: &mut R,
) -> Result<ComplementarySample> {
    if c < 2 {
        return Err(SentError::Contract(format!("no complementary label exists for C={c}")));
    }
    if k == 0 {
        return Err(SentError::Contract("K must be at least 1".into()));
    }
    if label >= c {
        return Err(SentError::Contract(format!("label {label} out of range for C={c}")));
    }
    let k = k.min(c - 1);
    // Sample positions in the (c−1)-element complement and skip over `label`.
    let labels = index::sample(rng, c - 1, k)
        .into_iter()
        .map(|i| if i >= label { i + 1 } else { i })
        .collect();
    ComplementarySample::new(label, labels)
}

/// `−ln p_label`.
pub fn pt_loss<T: Scalar>(p: &ProbVector<T>, label: LabelId) -> T {
    -p.get(label).ln()
}

/// Mean over the sampled labels of `−ln(1 − p_k)`.
pub fn nt_loss<T: Scalar>(p: &ProbVector<T>, sample: &ComplementarySample) -> T {
    let total: T = sample.labels.iter().map(|&k| -p.complement(k).ln()).sum();
    total / T::of_usize(sample.k())
}

/// Gradient of [`pt_loss`] with respect to the logits: `p_j − 1[j = label]`.
pub fn pt_logit_grad<T: Scalar>(p: &ProbVector<T>, label: LabelId, out: &mut [T]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = p.get(j);
    }
    out[label] -= T::one();
}

/// Gradient of [`nt_loss`] with respect to the logits.
///
/// With `r_k = p_k / (1 − p_k)` and `S` the sampled set of size `K`:
/// `∂L/∂z_j = (1[j ∈ S]·r_j − p_j·Σ_{k∈S} r_k) / K`.
pub fn nt_logit_grad<T: Scalar>(p: &ProbVector<T>, sample: &ComplementarySample, out: &mut [T]) {
    let inv_k = T::one() / T::of_usize(sample.k());
    let mut ratio_sum = T::zero();
    for o in out.iter_mut() {
        *o = T::zero();
    }
    for &k in &sample.labels {
        let r = p.get(k) / p.complement(k);
        ratio_sum += r;
        out[k] = r;
    }
    for (j, o) in out.iter_mut().enumerate() {
        *o = (*o - p.get(j) * ratio_sum) * inv_k;
    }
}
