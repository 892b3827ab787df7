//! Hashed sparse features for a sentence with a marked entity pair.
//!
//! Feature groups, all hashed into `hash_dim` buckets with FNV-1a:
//!
//! * unigrams over the whole sentence (lowercased);
//! * tokens within `window` of the head / tail mention, tagged by side;
//! * head type, tail type and the type pair (when `use_entity_types`).
//!
//! Token-derived features carry counts divided by sentence length; type
//! indicators carry 1. When `use_position_buckets` is set, a dense block of
//! [`POSITION_FEATURES`] follows the hashed block: a one-hot bucket of the
//! token gap between the two mentions plus a head-before-tail indicator.

use serde::{Deserialize, Serialize};

use crate::dataset::Instance;
use crate::error::{Result, SentError};
use crate::seed::fnv1a;

/// Gap buckets: 0, 1, 2, 3–4, 5–7, 8–15, 16–31, 32+.
const GAP_BUCKETS: [usize; 7] = [1, 2, 3, 5, 8, 16, 32];
pub const POSITION_FEATURES: usize = GAP_BUCKETS.len() + 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub hash_dim: usize,
    pub window: usize,
    pub use_entity_types: bool,
    pub use_position_buckets: bool,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig {
            hash_dim: 4096,
            window: 2,
            use_entity_types: true,
            use_position_buckets: true,
        }
    }
}

impl FeaturizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hash_dim < 2 {
            return Err(SentError::Config(format!("hash_dim must be ≥ 2, got {}", self.hash_dim)));
        }
        if self.hash_dim > u32::MAX as usize {
            return Err(SentError::Config("hash_dim too large".into()));
        }
        Ok(())
    }

    pub fn dense_dim(&self) -> usize {
        if self.use_position_buckets {
            POSITION_FEATURES
        } else {
            0
        }
    }

    /// Width of the feature vector.
    pub fn input_dim(&self) -> usize {
        self.hash_dim + self.dense_dim()
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseFeatures {
    entries: Vec<(u32, f64)>,
}

impl SparseFeatures {
    /// Sums duplicate indices and drops zeros.
    pub fn from_unsorted(mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match merged.last_mut() {
                Some((j, w)) if *j == i => *w += v,
                _ => merged.push((i, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        SparseFeatures { entries: merged }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_index(&self) -> Option<u32> {
        self.entries.last().map(|&(i, _)| i)
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }
}

fn bucket(prefix: &str, token: &str, hash_dim: usize) -> u32 {
    let mut key = Vec::with_capacity(prefix.len() + token.len() + 1);
    key.extend_from_slice(prefix.as_bytes());
    key.push(0x1f);
    key.extend_from_slice(token.to_lowercase().as_bytes());
    (fnv1a(&key) % hash_dim as u64) as u32
}

pub fn featurize(inst: &Instance, config: &FeaturizerConfig) -> SparseFeatures {
    let hd = config.hash_dim;
    let n = inst.tokens.len().max(1);
    let unit = 1.0 / n as f64;
    let mut entries: Vec<(u32, f64)> = Vec::with_capacity(inst.tokens.len() * 3 + 12);

    for tok in &inst.tokens {
        entries.push((bucket("u", tok, hd), unit));
    }

    if config.window > 0 {
        for (side, span) in [("h", inst.head_span), ("t", inst.tail_span)] {
            let lo = span.start.saturating_sub(config.window);
            let hi = (span.end + config.window).min(inst.tokens.len());
            let context = (lo..span.start).chain(span.end..hi);
            for i in context {
                entries.push((bucket(side, &inst.tokens[i], hd), unit));
            }
        }
    }

    if config.use_entity_types {
        entries.push((bucket("ht", &inst.head_type, hd), 1.0));
        entries.push((bucket("tt", &inst.tail_type, hd), 1.0));
        let pair = format!("{}|{}", inst.head_type, inst.tail_type);
        entries.push((bucket("pt", &pair, hd), 1.0));
    }

    if config.use_position_buckets {
        let (first, second) = if inst.head_span.start < inst.tail_span.start {
            (inst.head_span, inst.tail_span)
        } else {
            (inst.tail_span, inst.head_span)
        };
        let gap = second.start.saturating_sub(first.end);
        let b = GAP_BUCKETS.iter().take_while(|&&edge| gap >= edge).count();
        entries.push(((hd + b) as u32, 1.0));
        if inst.head_span.start < inst.tail_span.start {
            entries.push(((hd + GAP_BUCKETS.len() + 1) as u32, 1.0));
        }
    }

    SparseFeatures::from_unsorted(entries)
}
