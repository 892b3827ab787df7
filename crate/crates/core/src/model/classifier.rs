//! Linear or one-hidden-layer softmax classifier over hashed features.
//!
//! All parameters live in one flat vector so the optimizer, gradient checks
//! and checkpoints can treat them uniformly. Layout:
//!
//! ```text
//! [ output weights C×I | output bias C | hidden weights H×D | hidden bias H ]
//! ```
//!
//! where `D` is the feature width and `I` is `H` with a hidden layer, `D`
//! without.

use rand::distributions::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::featurize::{featurize, FeaturizerConfig, SparseFeatures};
use crate::dataset::{Instance, LabelId, LabelSpace};
use crate::error::{Result, SentError};
use crate::losses::{nt_logit_grad, nt_loss, pt_logit_grad, pt_loss, ComplementarySample, LossKind};
use crate::prob::ProbVector;
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply<T: Scalar>(self, a: T) -> T {
        match self {
            Activation::Tanh => a.tanh(),
            Activation::Relu => a.max(T::zero()),
        }
    }

    /// Derivative expressed through the pre-activation `a` and output `h`.
    fn derivative<T: Scalar>(self, a: T, h: T) -> T {
        match self {
            Activation::Tanh => T::one() - h * h,
            Activation::Relu => {
                if a > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenSpec {
    pub size: usize,
    pub activation: Activation,
}

/// Training target for one instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Label(LabelId),
    Complementary(ComplementarySample),
}

/// One row of a minibatch.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub id: &'a str,
    pub features: &'a SparseFeatures,
    pub target: &'a Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    classes: usize,
    features: usize,
    hidden: Option<HiddenSpec>,
}

impl Layout {
    fn out_in(&self) -> usize {
        self.hidden.map_or(self.features, |h| h.size)
    }
    fn out_w(&self) -> usize {
        0
    }
    fn out_b(&self) -> usize {
        self.classes * self.out_in()
    }
    fn hid_w(&self) -> usize {
        self.out_b() + self.classes
    }
    fn hid_b(&self) -> usize {
        self.hid_w() + self.hidden.map_or(0, |h| h.size * self.features)
    }
    fn total(&self) -> usize {
        self.hid_b() + self.hidden.map_or(0, |h| h.size)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier<T> {
    label_space: LabelSpace,
    featurizer: FeaturizerConfig,
    layout: Layout,
    params: Vec<T>,
}

/// Intermediate values of one forward pass, kept for backprop.
struct Trace<T> {
    logits: Vec<T>,
    pre: Vec<T>,
    hidden: Vec<T>,
}

impl<T: Scalar> Classifier<T> {
    /// Xavier-uniform weights, zero biases; same seed gives identical parameters.
    pub fn init(
        label_space: LabelSpace,
        featurizer: FeaturizerConfig,
        hidden: Option<HiddenSpec>,
        seed: u64,
    ) -> Result<Self> {
        let mut model = Self::zeros(label_space, featurizer, hidden)?;
        let layout = model.layout;
        let mut rng = seed::stream(seed, &[seed::tag::INIT]);
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new(-a, a);
            for p in &mut model.params[range] {
                *p = T::of(dist.sample(&mut rng));
            }
        };
        fill(layout.out_w()..layout.out_b(), layout.out_in(), layout.classes);
        if let Some(h) = layout.hidden {
            fill(layout.hid_w()..layout.hid_b(), layout.features, h.size);
        }
        Ok(model)
    }

    /// All-zero parameters.
    pub fn zeros(label_space: LabelSpace, featurizer: FeaturizerConfig, hidden: Option<HiddenSpec>) -> Result<Self> {
        featurizer.validate()?;
        if let Some(h) = hidden {
            if h.size == 0 {
                return Err(SentError::Config("hidden size must be positive".into()));
            }
        }
        let layout = Layout {
            classes: label_space.size(),
            features: featurizer.input_dim(),
            hidden,
        };
        Ok(Classifier {
            label_space,
            featurizer,
            layout,
            params: vec![T::zero(); layout.total()],
        })
    }

    /// Rebuilds a classifier from a flat parameter vector.
    pub fn from_params(
        label_space: LabelSpace,
        featurizer: FeaturizerConfig,
        hidden: Option<HiddenSpec>,
        params: Vec<T>,
    ) -> Result<Self> {
        let mut model = Self::zeros(label_space, featurizer, hidden)?;
        if params.len() != model.params.len() {
            return Err(SentError::Contract(format!(
                "expected {} parameters, got {}",
                model.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(SentError::Numerical("non-finite parameter".into()));
        }
        model.params = params;
        Ok(model)
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn featurizer(&self) -> &FeaturizerConfig {
        &self.featurizer
    }

    pub fn hidden(&self) -> Option<HiddenSpec> {
        self.layout.hidden
    }

    pub fn num_classes(&self) -> usize {
        self.layout.classes
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Named parameter blocks with their shapes, in storage order.
    pub fn blocks(&self) -> Vec<(&'static str, Vec<usize>, &[T])> {
        let l = self.layout;
        let mut out = vec![
            ("output.weight", vec![l.classes, l.out_in()], &self.params[l.out_w()..l.out_b()]),
            ("output.bias", vec![l.classes], &self.params[l.out_b()..l.hid_w()]),
        ];
        if let Some(h) = l.hidden {
            out.push(("hidden.weight", vec![h.size, l.features], &self.params[l.hid_w()..l.hid_b()]));
            out.push(("hidden.bias", vec![h.size], &self.params[l.hid_b()..l.total()]));
        }
        out
    }

    pub fn featurize(&self, inst: &Instance) -> SparseFeatures {
        featurize(inst, &self.featurizer)
    }

    fn check_features(&self, x: &SparseFeatures) -> Result<()> {
        match x.max_index() {
            Some(i) if i as usize >= self.layout.features => Err(SentError::Contract(format!(
                "feature index {i} exceeds model width {}",
                self.layout.features
            ))),
            _ => Ok(()),
        }
    }

    fn trace(&self, x: &SparseFeatures) -> Trace<T> {
        let l = self.layout;
        let c = l.classes;
        let p = &self.params;
        let mut logits: Vec<T> = p[l.out_b()..l.hid_w()].to_vec();
        match l.hidden {
            None => {
                let d = l.features;
                for &(i, v) in x.entries() {
                    let v = T::of(v);
                    for (k, z) in logits.iter_mut().enumerate() {
                        *z += p[k * d + i as usize] * v;
                    }
                }
                Trace {
                    logits,
                    pre: Vec::new(),
                    hidden: Vec::new(),
                }
            }
            Some(h) => {
                let d = l.features;
                let hw = &p[l.hid_w()..l.hid_b()];
                let mut pre: Vec<T> = p[l.hid_b()..l.total()].to_vec();
                for &(i, v) in x.entries() {
                    let v = T::of(v);
                    for (j, a) in pre.iter_mut().enumerate() {
                        *a += hw[j * d + i as usize] * v;
                    }
                }
                let hidden: Vec<T> = pre.iter().map(|&a| h.activation.apply(a)).collect();
                for (k, z) in logits.iter_mut().enumerate().take(c) {
                    let row = &p[k * h.size..(k + 1) * h.size];
                    *z += row.iter().zip(&hidden).map(|(&w, &hv)| w * hv).sum::<T>();
                }
                Trace { logits, pre, hidden }
            }
        }
    }

    /// Logits and softmax probabilities for a feature vector.
    pub fn forward_features(&self, id: &str, x: &SparseFeatures) -> Result<(Vec<T>, ProbVector<T>)> {
        self.check_features(x)?;
        let t = self.trace(x);
        let p = ProbVector::softmax(&t.logits).map_err(|e| match e {
            SentError::Numerical(m) => SentError::Numerical(format!("instance id={id}: {m}")),
            other => other,
        })?;
        Ok((t.logits, p))
    }

    pub fn forward(&self, inst: &Instance) -> Result<(Vec<T>, ProbVector<T>)> {
        self.forward_features(&inst.id, &self.featurize(inst))
    }

    /// Argmax label (ties to the lowest id) and the probabilities.
    pub fn predict(&self, inst: &Instance) -> Result<(LabelId, ProbVector<T>)> {
        let (_, p) = self.forward(inst)?;
        Ok((p.argmax().0, p))
    }

    /// Probabilities for many instances, computed in parallel, returned in input order.
    pub fn predict_all(&self, instances: &[Instance]) -> Result<Vec<ProbVector<T>>> {
        instances
            .par_iter()
            .map(|inst| self.forward(inst).map(|(_, p)| p))
            .collect()
    }

    /// Like [`predict_all`](Self::predict_all) over precomputed features.
    pub fn predict_features(&self, ids: &[&str], features: &[SparseFeatures]) -> Result<Vec<ProbVector<T>>> {
        ids.par_iter()
            .zip(features.par_iter())
            .map(|(id, x)| self.forward_features(id, x).map(|(_, p)| p))
            .collect()
    }

    /// Mean loss over the batch and its gradient, shaped like [`params`](Self::params).
    ///
    /// Per-instance contributions are accumulated in batch order, so the
    /// result does not depend on thread scheduling.
    pub fn batch_loss_and_grad(&self, batch: &[Example<'_>], kind: LossKind) -> Result<(T, Vec<T>)> {
        let mut grad = vec![T::zero(); self.layout.total()];
        let loss = self.batch_loss_and_grad_into(batch, kind, &mut grad)?;
        Ok((loss, grad))
    }

    /// [`batch_loss_and_grad`](Self::batch_loss_and_grad) writing into a
    /// caller-owned buffer, which is overwritten. Training loops reuse one
    /// buffer instead of allocating a model-sized vector per batch.
    pub fn batch_loss_and_grad_into(&self, batch: &[Example<'_>], kind: LossKind, grad: &mut [T]) -> Result<T> {
        let l = self.layout;
        let c = l.classes;
        if grad.len() != l.total() {
            return Err(SentError::Contract(format!(
                "gradient buffer has {} entries, model has {}",
                grad.len(),
                l.total()
            )));
        }
        grad.fill(T::zero());
        if batch.is_empty() {
            return Ok(T::zero());
        }
        let scale = T::one() / T::of_usize(batch.len());
        let mut total = T::zero();
        let mut dlogits = vec![T::zero(); c];
        let mut dpre: Vec<T> = Vec::new();

        for ex in batch {
            self.check_features(ex.features)?;
            let t = self.trace(ex.features);
            let p = ProbVector::softmax(&t.logits)
                .map_err(|e| SentError::Numerical(format!("instance id={}: {e}", ex.id)))?;
            let loss = match (kind, ex.target) {
                (LossKind::Pt, Target::Label(y)) => {
                    check_label(ex.id, *y, c)?;
                    pt_logit_grad(&p, *y, &mut dlogits);
                    pt_loss(&p, *y)
                }
                (LossKind::Nt, Target::Complementary(s)) => {
                    if let Some(&k) = s.labels().iter().find(|&&k| k >= c) {
                        check_label(ex.id, k, c)?;
                    }
                    nt_logit_grad(&p, s, &mut dlogits);
                    nt_loss(&p, s)
                }
                (kind, _) => {
                    return Err(SentError::Contract(format!(
                        "instance id={}: target does not match loss kind {kind:?}",
                        ex.id
                    )))
                }
            };
            total += loss;
            for g in &mut dlogits {
                *g *= scale;
            }

            // output bias
            for (gb, &dz) in grad[l.out_b()..l.hid_w()].iter_mut().zip(&dlogits) {
                *gb += dz;
            }
            match l.hidden {
                None => {
                    let d = l.features;
                    for &(i, v) in ex.features.entries() {
                        let v = T::of(v);
                        for (k, &dz) in dlogits.iter().enumerate() {
                            grad[k * d + i as usize] += dz * v;
                        }
                    }
                }
                Some(h) => {
                    let hs = h.size;
                    dpre.clear();
                    dpre.resize(hs, T::zero());
                    for (k, &dz) in dlogits.iter().enumerate() {
                        let row = k * hs;
                        for j in 0..hs {
                            grad[row + j] += dz * t.hidden[j];
                            dpre[j] += self.params[row + j] * dz;
                        }
                    }
                    for j in 0..hs {
                        dpre[j] *= h.activation.derivative(t.pre[j], t.hidden[j]);
                    }
                    let d = l.features;
                    let hw = l.hid_w();
                    for &(i, v) in ex.features.entries() {
                        let v = T::of(v);
                        for (j, &da) in dpre.iter().enumerate() {
                            grad[hw + j * d + i as usize] += da * v;
                        }
                    }
                    for (gb, &da) in grad[l.hid_b()..].iter_mut().zip(&dpre) {
                        *gb += da;
                    }
                }
            }
        }
        Ok(total * scale)
    }

    /// Featurizes `batch` and delegates to [`batch_loss_and_grad`](Self::batch_loss_and_grad).
    pub fn loss_and_grad(&self, batch: &[(&Instance, Target)], kind: LossKind) -> Result<(T, Vec<T>)> {
        let feats: Vec<SparseFeatures> = batch.iter().map(|(i, _)| self.featurize(i)).collect();
        for (inst, target) in batch {
            if let Target::Complementary(s) = target {
                let y = inst.label()?;
                if s.excluded() != y || s.labels().contains(&y) {
                    return Err(SentError::Contract(format!(
                        "instance id={}: complementary set {:?} not drawn for its label {y}",
                        inst.id,
                        s.labels()
                    )));
                }
            }
        }
        let examples: Vec<Example<'_>> = batch
            .iter()
            .zip(&feats)
            .map(|((inst, target), f)| Example {
                id: &inst.id,
                features: f,
                target,
            })
            .collect();
        self.batch_loss_and_grad(&examples, kind)
    }
}

fn check_label(id: &str, label: LabelId, c: usize) -> Result<()> {
    if label >= c {
        return Err(SentError::Contract(format!("instance id={id}: label {label} out of range")));
    }
    Ok(())
}
