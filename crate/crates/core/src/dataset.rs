//! Domain types for noisily labeled sentence datasets and their JSONL form.
//!
//! A [`RefinedDataset`] pairs the immutable instances with a parallel list of
//! [`InstanceState`]s. Refinement never edits instances; it produces a new
//! dataset sharing the same instance storage with a new states list.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SentError};
use crate::seed;

pub type LabelId = usize;

pub const DEFAULT_NA_NAME: &str = "NA";

/// Ordered relation classes with a designated no-relation class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    names: Vec<String>,
    index: HashMap<String, LabelId>,
    na_id: LabelId,
}

impl LabelSpace {
    pub fn new(names: Vec<String>, na_id: LabelId) -> Result<Self> {
        if names.len() < 2 {
            return Err(SentError::Config(format!(
                "label space needs at least 2 classes, got {}",
                names.len()
            )));
        }
        if na_id >= names.len() {
            return Err(SentError::Config(format!(
                "na_id {na_id} out of range for {} classes",
                names.len()
            )));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(SentError::Config("empty label name".into()));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(SentError::Config(format!("duplicate label name {name:?}")));
            }
        }
        Ok(LabelSpace { names, index, na_id })
    }

    /// Builds a label space whose NA class is the one called `na_name`.
    pub fn with_na_name(names: Vec<String>, na_name: &str) -> Result<Self> {
        let na_id = names
            .iter()
            .position(|n| n == na_name)
            .ok_or_else(|| SentError::Config(format!("no label named {na_name:?}")))?;
        Self::new(names, na_id)
    }

    /// Reads one class name per line; blank lines are skipped.
    pub fn from_file(path: &Path, na_name: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SentError::io(path, e))?;
        let names = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        Self::with_na_name(names, na_name)
    }

    pub fn size(&self) -> usize {
        self.names.len()
    }

    pub fn na_id(&self) -> LabelId {
        self.na_id
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: LabelId) -> &str {
        &self.names[id]
    }

    pub fn id(&self, name: &str) -> Option<LabelId> {
        self.index.get(name).copied()
    }
}

impl Serialize for LabelSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            names: &'a [String],
            na_id: LabelId,
        }
        Repr {
            names: &self.names,
            na_id: self.na_id,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabelSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            names: Vec<String>,
            na_id: LabelId,
        }
        let r = Repr::deserialize(d)?;
        LabelSpace::new(r.names, r.na_id).map_err(serde::de::Error::custom)
    }
}

/// Half-open token interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl From<[usize; 2]> for Span {
    fn from([start, end]: [usize; 2]) -> Self {
        Span { start, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

/// One sentence with its entity pair and labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub id: String,
    pub tokens: Vec<String>,
    pub head_span: Span,
    pub tail_span: Span,
    pub head_type: String,
    pub tail_type: String,
    pub bag_labels: Vec<LabelId>,
    /// The (possibly wrong) training label; `None` until a bag label is picked.
    pub assigned_label: Option<LabelId>,
    pub gold_label: Option<LabelId>,
    pub is_noise: Option<bool>,
}

impl Instance {
    /// Checks every instance invariant against a label space of size `num_labels`.
    pub fn validate(&self, num_labels: usize) -> Result<()> {
        let id = self.id.as_str();
        if id.is_empty() {
            return Err(SentError::validation(id, "empty id"));
        }
        let n = self.tokens.len();
        for (side, span) in [("head", self.head_span), ("tail", self.tail_span)] {
            if span.start >= span.end {
                return Err(SentError::validation(id, format!("empty span ({side})")));
            }
            if span.end > n {
                return Err(SentError::validation(
                    id,
                    format!("{side} span [{}, {}) out of range for {n} tokens", span.start, span.end),
                ));
            }
        }
        if self.head_span.overlaps(&self.tail_span) {
            return Err(SentError::validation(id, "head and tail spans overlap"));
        }
        if self.bag_labels.is_empty() {
            return Err(SentError::validation(id, "empty bag_labels"));
        }
        let all_labels = self
            .bag_labels
            .iter()
            .chain(self.assigned_label.iter())
            .chain(self.gold_label.iter());
        for &l in all_labels {
            if l >= num_labels {
                return Err(SentError::validation(id, format!("label id {l} out of range")));
            }
        }
        if let Some(a) = self.assigned_label {
            if !self.bag_labels.contains(&a) {
                return Err(SentError::validation(id, "assigned_label not in bag_labels"));
            }
        }
        if let (Some(gold), Some(noise), Some(a)) = (self.gold_label, self.is_noise, self.assigned_label) {
            if noise != (a != gold) {
                return Err(SentError::validation(
                    id,
                    "is_noise inconsistent with assigned_label vs gold_label",
                ));
            }
        }
        Ok(())
    }

    /// The assigned label, or a data error for unassigned instances.
    pub fn label(&self) -> Result<LabelId> {
        self.assigned_label.ok_or_else(|| {
            SentError::validation(&self.id, "instance has no assigned_label (assign a bag label first)")
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Kept,
    Filtered,
    Relabeled,
}

/// Refinement status of one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceState {
    status: Status,
    effective_label: Option<LabelId>,
    original_label: LabelId,
}

impl InstanceState {
    pub fn kept(original: LabelId) -> Self {
        InstanceState {
            status: Status::Kept,
            effective_label: Some(original),
            original_label: original,
        }
    }

    pub fn filtered(original: LabelId) -> Self {
        InstanceState {
            status: Status::Filtered,
            effective_label: None,
            original_label: original,
        }
    }

    pub fn relabeled(original: LabelId, new_label: LabelId) -> Self {
        InstanceState {
            status: Status::Relabeled,
            effective_label: Some(new_label),
            original_label: original,
        }
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn effective_label(&self) -> Option<LabelId> {
        self.effective_label
    }

    pub fn original_label(&self) -> LabelId {
        self.original_label
    }

    pub fn is_filtered(&self) -> bool {
        self.status == Status::Filtered
    }
}

/// Instances plus their refinement states; the non-filtered part is the
/// training set for the next round.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedDataset {
    instances: Arc<[Instance]>,
    states: Vec<InstanceState>,
    label_space: LabelSpace,
}

impl RefinedDataset {
    /// Validates instances and starts every one as KEPT under its assigned label.
    pub fn new(instances: Vec<Instance>, label_space: LabelSpace) -> Result<Self> {
        let states = instances
            .iter()
            .map(|inst| inst.label().map(InstanceState::kept))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(instances.into(), states, label_space)
    }

    pub fn from_parts(
        instances: Arc<[Instance]>,
        states: Vec<InstanceState>,
        label_space: LabelSpace,
    ) -> Result<Self> {
        if instances.len() != states.len() {
            return Err(SentError::Contract(format!(
                "{} instances but {} states",
                instances.len(),
                states.len()
            )));
        }
        let c = label_space.size();
        let mut seen = HashSet::with_capacity(instances.len());
        for (inst, st) in instances.iter().zip(&states) {
            inst.validate(c)?;
            if !seen.insert(inst.id.as_str()) {
                return Err(SentError::validation(&inst.id, "duplicate id"));
            }
            let original = inst.label()?;
            if st.original_label != original {
                return Err(SentError::validation(&inst.id, "state original_label differs from assigned_label"));
            }
            let ok = match st.status {
                Status::Kept => st.effective_label == Some(original),
                Status::Filtered => st.effective_label.is_none(),
                Status::Relabeled => st.effective_label.is_some_and(|l| l < c),
            };
            if !ok {
                return Err(SentError::validation(&inst.id, "inconsistent refinement state"));
            }
        }
        Ok(RefinedDataset {
            instances,
            states,
            label_space,
        })
    }

    /// Same instances, new states.
    pub fn with_states(&self, states: Vec<InstanceState>) -> Result<Self> {
        Self::from_parts(self.instances.clone(), states, self.label_space.clone())
    }

    /// Every instance back to KEPT.
    pub fn reset(&self) -> Self {
        let states = self.states.iter().map(|s| InstanceState::kept(s.original_label)).collect();
        RefinedDataset {
            instances: self.instances.clone(),
            states,
            label_space: self.label_space.clone(),
        }
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn states(&self) -> &[InstanceState] {
        &self.states
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Non-filtered instances with their effective labels.
    pub fn training_view(&self) -> Vec<(&Instance, LabelId)> {
        self.instances
            .iter()
            .zip(&self.states)
            .filter_map(|(inst, st)| st.effective_label.map(|l| (inst, l)))
            .collect()
    }

    pub fn count(&self, status: Status) -> usize {
        self.states.iter().filter(|s| s.status == status).count()
    }

    /// Gold labels for every instance, or a data error if any is missing.
    pub fn gold_labels(&self) -> Result<Vec<LabelId>> {
        self.instances
            .iter()
            .map(|i| {
                i.gold_label
                    .ok_or_else(|| SentError::Data(format!("instance id={} has no gold_label", i.id)))
            })
            .collect()
    }

    /// Ground-truth noise flags: `is_noise` when present, otherwise derived
    /// from gold vs assigned. `None` if some instance has neither.
    pub fn noise_truth(&self) -> Option<Vec<bool>> {
        self.instances
            .iter()
            .map(|i| {
                i.is_noise
                    .or_else(|| Some(i.assigned_label? != i.gold_label?))
            })
            .collect()
    }

    /// Keeps the instances at `indices` (in the given order) with their states.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let instances: Vec<Instance> = indices.iter().map(|&i| self.instances[i].clone()).collect();
        let states = indices.iter().map(|&i| self.states[i]).collect();
        RefinedDataset {
            instances: instances.into(),
            states,
            label_space: self.label_space.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// JSONL

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    tokens: Vec<String>,
    head_span: Span,
    tail_span: Span,
    head_type: String,
    tail_type: String,
    bag_labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    assigned_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    is_noise: Option<bool>,
    // Refinement state; written only for non-KEPT instances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    status: Option<Status>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    effective_label: Option<String>,
}

impl Record {
    fn label_names(&self) -> impl Iterator<Item = &String> {
        self.bag_labels
            .iter()
            .chain(self.assigned_label.iter())
            .chain(self.gold_label.iter())
            .chain(self.effective_label.iter())
    }
}

/// How to resolve label names while reading a dataset.
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions<'a> {
    /// Fixed label space; unknown names become validation errors.
    pub label_space: Option<&'a LabelSpace>,
    /// Name of the NA class when the label space is inferred.
    pub na_name: &'a str,
}

impl Default for LoadOptions<'_> {
    fn default() -> Self {
        LoadOptions {
            label_space: None,
            na_name: DEFAULT_NA_NAME,
        }
    }
}

/// Parsed file contents before the states are checked against assignments.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub label_space: LabelSpace,
    pub instances: Vec<Instance>,
    /// Stored refinement state per line, when the line carried one.
    pub states: Vec<Option<InstanceState>>,
}

impl RawDataset {
    /// Validated dataset; instances must all have an assigned label.
    pub fn into_dataset(self) -> Result<RefinedDataset> {
        let states = self
            .instances
            .iter()
            .zip(self.states)
            .map(|(inst, st)| Ok(st.unwrap_or(InstanceState::kept(inst.label()?))))
            .collect::<Result<Vec<_>>>()?;
        RefinedDataset::from_parts(self.instances.into(), states, self.label_space)
    }
}

pub fn parse_jsonl<R: BufRead>(reader: R, opts: LoadOptions<'_>) -> Result<RawDataset> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| SentError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| SentError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        records.push(rec);
    }

    let label_space = match opts.label_space {
        Some(ls) => ls.clone(),
        None => infer_label_space(&records, opts.na_name)?,
    };
    let lookup = |rec: &Record, name: &str| {
        label_space
            .id(name)
            .ok_or_else(|| SentError::validation(&rec.id, format!("unknown label {name:?}")))
    };

    let mut instances = Vec::with_capacity(records.len());
    let mut states = Vec::with_capacity(records.len());
    let mut seen = HashSet::new();
    for rec in &records {
        let mut bag_labels = Vec::with_capacity(rec.bag_labels.len());
        for name in &rec.bag_labels {
            let l = lookup(rec, name)?;
            if !bag_labels.contains(&l) {
                bag_labels.push(l);
            }
        }
        let inst = Instance {
            id: rec.id.clone(),
            tokens: rec.tokens.clone(),
            head_span: rec.head_span,
            tail_span: rec.tail_span,
            head_type: rec.head_type.clone(),
            tail_type: rec.tail_type.clone(),
            bag_labels,
            assigned_label: rec.assigned_label.as_deref().map(|n| lookup(rec, n)).transpose()?,
            gold_label: rec.gold_label.as_deref().map(|n| lookup(rec, n)).transpose()?,
            is_noise: rec.is_noise,
        };
        inst.validate(label_space.size())?;
        if !seen.insert(inst.id.clone()) {
            return Err(SentError::validation(&inst.id, "duplicate id"));
        }
        let state = match rec.status {
            None | Some(Status::Kept) => None,
            Some(status) => {
                let original = inst.label()?;
                let eff = rec.effective_label.as_deref().map(|n| lookup(rec, n)).transpose()?;
                Some(match (status, eff) {
                    (Status::Filtered, None) => InstanceState::filtered(original),
                    (Status::Relabeled, Some(l)) => InstanceState::relabeled(original, l),
                    _ => return Err(SentError::validation(&inst.id, "status and effective_label disagree")),
                })
            }
        };
        instances.push(inst);
        states.push(state);
    }
    Ok(RawDataset {
        label_space,
        instances,
        states,
    })
}

/// Names in order of first appearance; the NA class is appended when absent.
fn infer_label_space(records: &[Record], na_name: &str) -> Result<LabelSpace> {
    let mut names: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for name in records.iter().flat_map(Record::label_names) {
        if seen.insert(name.as_str()) {
            names.push(name.clone());
        }
    }
    if !seen.contains(na_name) {
        names.push(na_name.to_string());
    }
    LabelSpace::with_na_name(names, na_name)
}

pub fn read_jsonl(path: &Path, opts: LoadOptions<'_>) -> Result<RawDataset> {
    let f = File::open(path).map_err(|e| SentError::io(path, e))?;
    parse_jsonl(BufReader::new(f), opts)
}

/// Loads and validates a dataset, all states KEPT unless the file stores
/// refinement states.
pub fn load_dataset(path: &Path, label_space: Option<&LabelSpace>) -> Result<RefinedDataset> {
    read_jsonl(
        path,
        LoadOptions {
            label_space,
            ..LoadOptions::default()
        },
    )?
    .into_dataset()
}

fn record_of(inst: &Instance, state: Option<&InstanceState>, ls: &LabelSpace) -> Record {
    let name = |l: LabelId| ls.name(l).to_string();
    let (status, effective_label) = match state {
        Some(st) if st.status != Status::Kept => (Some(st.status), st.effective_label.map(name)),
        _ => (None, None),
    };
    Record {
        id: inst.id.clone(),
        tokens: inst.tokens.clone(),
        head_span: inst.head_span,
        tail_span: inst.tail_span,
        head_type: inst.head_type.clone(),
        tail_type: inst.tail_type.clone(),
        bag_labels: inst.bag_labels.iter().map(|&l| name(l)).collect(),
        assigned_label: inst.assigned_label.map(name),
        gold_label: inst.gold_label.map(name),
        is_noise: inst.is_noise,
        status,
        effective_label,
    }
}

pub fn write_instances<W: Write>(
    mut w: W,
    instances: &[Instance],
    states: Option<&[InstanceState]>,
    ls: &LabelSpace,
) -> Result<()> {
    for (i, inst) in instances.iter().enumerate() {
        let rec = record_of(inst, states.map(|s| &s[i]), ls);
        let line = serde_json::to_string(&rec).expect("records always serialize");
        writeln!(w, "{line}").map_err(|e| SentError::io("<writer>", e))?;
    }
    Ok(())
}

pub fn write_jsonl<W: Write>(w: W, ds: &RefinedDataset) -> Result<()> {
    write_instances(w, ds.instances(), Some(ds.states()), ds.label_space())
}

pub fn save_dataset(path: &Path, ds: &RefinedDataset) -> Result<()> {
    let f = File::create(path).map_err(|e| SentError::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_jsonl(&mut w, ds)?;
    w.flush().map_err(|e| SentError::io(path, e))
}

// ---------------------------------------------------------------------------
// Splitting

/// Stratified, seeded partition into `fractions.len()` parts.
///
/// Within each class (by original label) the instances are shuffled, part
/// `j ≥ 1` takes `floor(n · f_j)` of them, and part 0 takes the rest minus
/// `floor(n · (1 − Σf))` dropped instances. Classes with fewer than two
/// instances go entirely to part 0. Each part keeps the input order.
pub fn partition(ds: &RefinedDataset, fractions: &[f64], seed: u64) -> Result<Vec<RefinedDataset>> {
    const EPS: f64 = 1e-9;
    if fractions.is_empty() || fractions.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return Err(SentError::Contract("split fractions must be positive".into()));
    }
    let total: f64 = fractions.iter().sum();
    if total > 1.0 + EPS {
        return Err(SentError::Contract(format!("split fractions sum to {total} > 1")));
    }

    let c = ds.label_space().size();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, st) in ds.states().iter().enumerate() {
        by_class[st.original_label()].push(i);
    }

    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); fractions.len()];
    for (class, mut members) in by_class.into_iter().enumerate() {
        let n = members.len();
        if n == 0 {
            continue;
        }
        if n < 2 {
            warn!(
                "class {:?} has {n} instance(s); placing all in the first split",
                ds.label_space().name(class)
            );
            parts[0].extend(members);
            continue;
        }
        let mut rng = seed::stream(seed, &[seed::tag::SPLIT, class as u64]);
        members.shuffle(&mut rng);
        let nf = n as f64;
        let mut cursor = 0;
        let mut rest_counts = Vec::with_capacity(fractions.len() - 1);
        for &f in &fractions[1..] {
            rest_counts.push((nf * f + EPS).floor() as usize);
        }
        let dropped = (nf * (1.0 - total).max(0.0) + EPS).floor() as usize;
        let first = n - rest_counts.iter().sum::<usize>() - dropped;
        parts[0].extend_from_slice(&members[..first]);
        cursor += first;
        for (j, &k) in rest_counts.iter().enumerate() {
            parts[j + 1].extend_from_slice(&members[cursor..cursor + k]);
            cursor += k;
        }
    }
    Ok(parts
        .into_iter()
        .map(|mut idx| {
            idx.sort_unstable();
            ds.subset(&idx)
        })
        .collect())
}

/// Stratified (train, dev) split.
pub fn split_dataset(
    ds: &RefinedDataset,
    (train, dev): (f64, f64),
    seed: u64,
) -> Result<(RefinedDataset, RefinedDataset)> {
    let mut parts = partition(ds, &[train, dev], seed)?;
    let dev = parts.pop().expect("two parts");
    let train = parts.pop().expect("two parts");
    Ok((train, dev))
}
