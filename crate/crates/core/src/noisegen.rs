//! Ground-truth-preserving label corruption, bag-label assignment, and a
//! synthetic relation corpus with known labels.

use std::collections::BTreeMap;

use log::warn;
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Instance, LabelId, LabelSpace, RefinedDataset, Span};
use crate::error::{Result, SentError};
use crate::seed::{self, fnv1a, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseWeighting {
    /// Replacement labels drawn in proportion to clean class frequency.
    ClassFrequency,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub ratio: f64,
    pub seed: u64,
    pub weighting: NoiseWeighting,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            ratio: 0.3,
            seed: 0,
            weighting: NoiseWeighting::ClassFrequency,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(SentError::Config(format!("noise ratio must lie in [0, 1], got {}", self.ratio)));
        }
        Ok(())
    }
}

/// Picks one bag label uniformly. When the gold label is known the noise flag
/// records whether the pick was wrong.
pub fn assign_bag_label<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Result<Instance> {
    let &label = inst
        .bag_labels
        .choose(rng)
        .ok_or_else(|| SentError::validation(&inst.id, "empty bag_labels"))?;
    let mut out = inst.clone();
    out.assigned_label = Some(label);
    if let Some(gold) = inst.gold_label {
        out.is_noise = Some(label != gold);
    }
    Ok(out)
}

/// Assigns every unassigned instance from its bag, each from its own stream
/// keyed by instance id.
pub fn assign_bag_labels(instances: &[Instance], seed: u64) -> Result<Vec<Instance>> {
    instances
        .iter()
        .map(|inst| match inst.assigned_label {
            Some(_) => Ok(inst.clone()),
            None => {
                let mut rng = seed::stream(seed, &[tag::BAG_ASSIGN, fnv1a(inst.id.as_bytes())]);
                assign_bag_label(inst, &mut rng)
            }
        })
        .collect()
}

/// Share of assigned instances whose assigned label differs from gold;
/// `None` when no instance has both.
pub fn assignment_error_rate(instances: &[Instance]) -> Option<f64> {
    let (wrong, n) = instances
        .iter()
        .filter_map(|i| Some((i.assigned_label? != i.gold_label?) as usize))
        .fold((0, 0), |(w, n), x| (w + x, n + 1));
    (n > 0).then(|| wrong as f64 / n as f64)
}

/// What [`inject_noise`] did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionManifest {
    pub seed: u64,
    pub ratio: f64,
    pub weighting: NoiseWeighting,
    pub total: usize,
    pub corrupted: usize,
    /// Replacement label name → number of corrupted instances given it.
    pub replacement_counts: BTreeMap<String, usize>,
    /// Corrupted instances whose gold label is NA (now labeled positive).
    pub from_na: usize,
    /// Corrupted instances now labeled NA.
    pub to_na: usize,
}

/// Half-to-even rounding of `ratio · n`.
pub fn corruption_count(ratio: f64, n: usize) -> usize {
    (ratio * n as f64).round_ties_even() as usize
}

/// Replacement-label weights for an instance of class `gold`.
fn replacement_weights(freq: &[usize], gold: LabelId, weighting: NoiseWeighting) -> Vec<f64> {
    let mut w: Vec<f64> = match weighting {
        NoiseWeighting::ClassFrequency => freq.iter().map(|&f| f as f64).collect(),
        NoiseWeighting::Uniform => vec![1.0; freq.len()],
    };
    w[gold] = 0.0;
    if w.iter().all(|&x| x == 0.0) {
        // no other class occurs in the data
        w = vec![1.0; freq.len()];
        w[gold] = 0.0;
    }
    w
}

/// Corrupts exactly `round(ratio · N)` uniformly chosen instances.
///
/// Every instance must carry a gold label equal to its assigned label. A
/// corrupted instance gets a label different from gold, drawn by class
/// frequency of the clean gold labels (or uniformly), as its assigned label
/// and sole bag label; `is_noise` is set on every instance.
pub fn inject_noise(ds: &RefinedDataset, spec: &NoiseSpec) -> Result<(RefinedDataset, CorruptionManifest)> {
    spec.validate()?;
    let ls = ds.label_space();
    let c = ls.size();
    if c < 2 {
        return Err(SentError::Contract("noise injection needs at least 2 classes".into()));
    }
    let golds = ds.gold_labels()?;
    for (inst, &g) in ds.instances().iter().zip(&golds) {
        if inst.assigned_label != Some(g) {
            return Err(SentError::validation(&inst.id, "assigned_label must equal gold_label before corruption"));
        }
    }
    let n = ds.len();
    let k = corruption_count(spec.ratio, n);
    if k == 0 && spec.ratio > 0.0 {
        warn!("noise ratio {} of {n} instances rounds to zero corruptions", spec.ratio);
    }

    let mut freq = vec![0usize; c];
    for &g in &golds {
        freq[g] += 1;
    }
    let mut select_rng = seed::stream(spec.seed, &[tag::NOISE_SELECT]);
    let mut chosen: Vec<usize> = index::sample(&mut select_rng, n, k).into_vec();
    chosen.sort_unstable();

    let mut instances: Vec<Instance> = ds.instances().to_vec();
    for inst in &mut instances {
        inst.is_noise = Some(false);
    }
    let mut manifest = CorruptionManifest {
        seed: spec.seed,
        ratio: spec.ratio,
        weighting: spec.weighting,
        total: n,
        corrupted: k,
        replacement_counts: BTreeMap::new(),
        from_na: 0,
        to_na: 0,
    };
    for &i in &chosen {
        let gold = golds[i];
        let weights = replacement_weights(&freq, gold, spec.weighting);
        let dist = WeightedIndex::new(&weights).expect("at least one positive weight");
        let mut rng = seed::stream(spec.seed, &[tag::NOISE_LABEL, i as u64]);
        let new = dist.sample(&mut rng);
        debug_assert_ne!(new, gold);
        let inst = &mut instances[i];
        inst.assigned_label = Some(new);
        inst.bag_labels = vec![new];
        inst.is_noise = Some(true);
        *manifest.replacement_counts.entry(ls.name(new).to_string()).or_default() += 1;
        manifest.from_na += (gold == ls.na_id()) as usize;
        manifest.to_na += (new == ls.na_id()) as usize;
    }
    let out = RefinedDataset::new(instances, ls.clone())?;
    Ok((out, manifest))
}

/// Token generation knobs for [`synth_corpus`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabSpec {
    /// Distinct filler words.
    pub filler_words: usize,
    /// Trigger words per positive class.
    pub triggers_per_class: usize,
    /// Distinct entity names.
    pub entity_names: usize,
    /// Sentence length range (inclusive), entities and trigger included.
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for VocabSpec {
    fn default() -> Self {
        VocabSpec {
            filler_words: 2000,
            triggers_per_class: 3,
            entity_names: 5000,
            min_len: 10,
            max_len: 18,
        }
    }
}

/// Synthetic corpus shape: instance count per class (NA first) and vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub class_counts: Vec<usize>,
    pub vocab: VocabSpec,
    pub seed: u64,
}

impl SynthSpec {
    /// `n_classes` classes (one of them NA) with `n_per_class` instances each.
    pub fn balanced(n_classes: usize, n_per_class: usize, seed: u64) -> Self {
        SynthSpec {
            class_counts: vec![n_per_class; n_classes],
            vocab: VocabSpec::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_counts.len() < 2 {
            return Err(SentError::Config(format!(
                "need at least 2 classes (one is NA), got {}",
                self.class_counts.len()
            )));
        }
        let v = &self.vocab;
        if v.min_len < 8 || v.max_len < v.min_len {
            return Err(SentError::Config("sentence length range must satisfy 8 ≤ min ≤ max".into()));
        }
        if v.filler_words == 0 || v.triggers_per_class == 0 || v.entity_names < 2 {
            return Err(SentError::Config("vocabulary sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn label_space(&self) -> LabelSpace {
        let names = (0..self.class_counts.len())
            .map(|i| if i == 0 { "NA".to_string() } else { format!("rel_{i:02}") })
            .collect();
        LabelSpace::new(names, 0).expect("at least two distinct names")
    }
}

const HEAD_TYPES: [&str; 2] = ["PER", "ORG"];
const TAIL_TYPES: [&str; 4] = ["PER", "ORG", "LOC", "DATE"];

fn trigger(class: LabelId, j: usize) -> String {
    format!("trig{class}_{j}")
}

/// Template sentences where a class-specific trigger word sits right next to
/// one of the two entity mentions. NA sentences have no trigger. Gold and
/// assigned labels are both the generating class.
pub fn synth_corpus(spec: &SynthSpec) -> Result<RefinedDataset> {
    spec.validate()?;
    let ls = spec.label_space();
    let v = &spec.vocab;
    let mut instances = Vec::with_capacity(spec.class_counts.iter().sum());

    for (class, &count) in spec.class_counts.iter().enumerate() {
        for j in 0..count {
            let mut rng = seed::stream(spec.seed, &[tag::SYNTH, class as u64, j as u64]);
            let len = rng.gen_range(v.min_len..=v.max_len);
            let mut tokens: Vec<String> = (0..len)
                .map(|_| format!("w{}", rng.gen_range(0..v.filler_words)))
                .collect();

            // head and tail are single tokens with a gap of 2..=5 between them
            let gap = rng.gen_range(2..=5usize);
            let span_len = gap + 2;
            let start = rng.gen_range(0..=len - span_len);
            let (mut h, mut t) = (start, start + gap + 1);
            if rng.gen_bool(0.3) {
                std::mem::swap(&mut h, &mut t);
            }
            let e1 = rng.gen_range(0..v.entity_names);
            let mut e2 = rng.gen_range(0..v.entity_names);
            if e2 == e1 {
                e2 = (e2 + 1) % v.entity_names;
            }
            tokens[h] = format!("ent{e1}");
            tokens[t] = format!("ent{e2}");

                        if class != ls.na_id() {
                // inside the gap, next to one of the mentions
                let tw = trigger(class, rng.gen_range(0..v.triggers_per_class));
                let pos = if rng.gen_bool(0.5) { start + 1 } else { start + gap };
                tokens[pos] = tw;
            }

            instances.push(Instance {
                id: format!("{}-{j:05}", ls.name(class)),
                tokens,
                head_span: Span::new(h, h + 1),
                tail_span: Span::new(t, t + 1),
                head_type: HEAD_TYPES[rng.gen_range(0..HEAD_TYPES.len())].to_string(),
                tail_type: TAIL_TYPES[rng.gen_range(0..TAIL_TYPES.len())].to_string(),
                bag_labels: vec![class],
                assigned_label: Some(class),
                gold_label: Some(class),
                is_noise: None,
            });
        }
    }
    RefinedDataset::new(instances, ls)
}
