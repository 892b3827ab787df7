//! SGD and Adam over the classifier's flat parameter vector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classifier::Classifier;
use crate::error::{Result, SentError};
use crate::scalar::Scalar;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec {
            kind: OptimizerKind::Adam,
            learning_rate: 5e-4,
        }
    }
}

impl OptimizerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(SentError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    spec: OptimizerSpec,
    first: Vec<T>,
    second: Vec<T>,
    steps: u64,
}

impl<T: Scalar> OptimizerState<T> {
    /// Fresh state for a model with `num_params` parameters.
    pub fn new(spec: OptimizerSpec, num_params: usize) -> Result<Self> {
        spec.validate()?;
        let moments = match spec.kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam => num_params,
        };
        Ok(OptimizerState {
            spec,
            first: vec![T::zero(); moments],
            second: vec![T::zero(); moments],
            steps: 0,
        })
    }

    pub fn for_model(spec: OptimizerSpec, model: &Classifier<T>) -> Result<Self> {
        Self::new(spec, model.params().len())
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn spec(&self) -> OptimizerSpec {
        self.spec
    }

    /// Applies one update to `params` in place.
    pub fn apply(&mut self, params: &mut [T], grad: &[T]) -> Result<()> {
        if params.len() != grad.len() {
            return Err(SentError::Contract(format!(
                "gradient has {} entries, parameters {}",
                grad.len(),
                params.len()
            )));
        }
        if let Some(i) = grad
            .par_chunks(CHUNK)
            .enumerate()
            .find_map_first(|(c, chunk)| chunk.iter().position(|g| !g.is_finite()).map(|i| c * CHUNK + i))
        {
            return Err(SentError::Numerical(format!(
                "non-finite gradient {} at parameter {i} (step {})",
                grad[i],
                self.steps + 1
            )));
        }
        let lr = T::of(self.spec.learning_rate);
        self.steps += 1;
        match self.spec.kind {
            OptimizerKind::Sgd => {
                params
                    .par_chunks_mut(CHUNK)
                    .zip(grad.par_chunks(CHUNK))
                    .for_each(|(p, g)| {
                        for (p, &g) in p.iter_mut().zip(g) {
                            *p -= lr * g;
                        }
                    });
            }
            OptimizerKind::Adam => {
                if self.first.len() != params.len() {
                    return Err(SentError::Contract("Adam moments shaped for another model".into()));
                }
                let (b1, b2) = (T::of(BETA1), T::of(BETA2));
                let t = self.steps as i32;
                let c1 = T::one() - b1.powi(t);
                let c2 = T::one() - b2.powi(t);
                let eps = T::of(ADAM_EPS);
                // elementwise, so splitting the work does not change the result
                params
                    .par_chunks_mut(CHUNK)
                    .zip(self.first.par_chunks_mut(CHUNK))
                    .zip(self.second.par_chunks_mut(CHUNK))
                    .zip(grad.par_chunks(CHUNK))
                    .for_each(|(((p, m), v), g)| {
                        for (((p, m), v), &g) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                            *m = b1 * *m + (T::one() - b1) * g;
                            *v = b2 * *v + (T::one() - b2) * g * g;
                            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                        }
                    });
            }
        }
        Ok(())
    }

    pub fn step(&mut self, model: &mut Classifier<T>, grad: &[T]) -> Result<()> {
        self.apply(model.params_mut(), grad)
    }
}
