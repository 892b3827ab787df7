//! Probability vectors produced by the classifier.

use crate::dataset::LabelId;
use crate::error::{Result, SentError};
use crate::scalar::Scalar;

/// Softmax output: `C` strictly positive entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector<T> {
    probs: Vec<T>,
}

impl<T: Scalar> ProbVector<T> {
    /// Wraps an explicit distribution after checking it.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(SentError::Contract("probability vector needs at least 2 entries".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= T::zero() && *p <= T::one())) {
            return Err(SentError::Contract(format!("entries must lie in [0, 1]: {probs:?}")));
        }
        let sum: T = probs.iter().copied().sum();
        if (sum - T::one()).abs() > T::of(1e-6) {
            return Err(SentError::Contract(format!("entries sum to {sum}, not 1")));
        }
        Ok(ProbVector { probs })
    }

    /// Numerically stable softmax (max subtracted). Underflowing entries are
    /// floored at the smallest positive normal so every entry stays positive.
    pub fn softmax(logits: &[T]) -> Result<Self> {
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(SentError::Numerical(format!("non-finite logits {logits:?}")));
        }
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let mut probs: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
        let sum: T = probs.iter().copied().sum();
        for p in &mut probs {
            *p = (*p / sum).max(T::min_positive_value());
        }
        Ok(ProbVector { probs })
    }

    pub fn uniform(c: usize) -> Self {
        ProbVector {
            probs: vec![T::one() / T::of_usize(c); c],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, k: LabelId) -> T {
        self.probs[k]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.probs
    }

    /// `1 − p_k`, summed from the other entries to keep precision when `p_k ≈ 1`.
    pub fn complement(&self, k: LabelId) -> T {
        self.probs
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &p)| p)
            .sum()
    }

    /// Index and value of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> (LabelId, T) {
        let mut best = (0, self.probs[0]);
        for (k, &p) in self.probs.iter().enumerate().skip(1) {
            if p > best.1 {
                best = (k, p);
            }
        }
        best
    }
}
