//! Sparse feature encoding of interactions under a model family.
//!
//! Every emitted row only sees the strictly prior history of its student:
//! counters are updated after the row for an interaction has been built.
//! Interactions sharing a timestamp are processed in input order, so an
//! earlier row with the same time counts as prior history of a later one.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Interaction, QMatrix};
use crate::error::{Error, Result};

/// Nested lookback windows, in days. Strictly increasing, ending at `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct WindowSet {
    widths: Vec<f64>,
}

impl WindowSet {
    pub fn new(widths: Vec<f64>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::config("window set must not be empty"));
        }
        if widths.iter().any(|w| w.is_nan() || *w <= 0.0) {
            return Err(Error::config("window widths must be positive"));
        }
        if widths.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::config("window widths must be strictly increasing"));
        }
        if *widths.last().unwrap() != f64::INFINITY {
            return Err(Error::config("the last window must be +inf"));
        }
        Ok(Self { widths })
    }

    /// Only the all-history window.
    pub fn unbounded() -> Self {
        Self {
            widths: vec![f64::INFINITY],
        }
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }
}

impl Default for WindowSet {
    /// One hour, one day, one week, one month, all time.
    fn default() -> Self {
        Self {
            widths: vec![1.0 / 24.0, 1.0, 7.0, 30.0, f64::INFINITY],
        }
    }
}

impl FromStr for WindowSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let widths = s
            .split(',')
            .map(|tok| match tok.trim() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                other => other
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("bad window width `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(widths)
    }
}

impl fmt::Display for WindowSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .widths
            .iter()
            .map(|w| if w.is_infinite() { "inf".to_owned() } else { w.to_string() })
            .collect();
        f.write_str(&parts.join(","))
    }
}

impl TryFrom<String> for WindowSet {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<WindowSet> for String {
    fn from(w: WindowSet) -> String {
        w.to_string()
    }
}

/// Prior attempts and wins falling inside each window.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WindowCounts {
    pub attempts: Vec<u32>,
    pub wins: Vec<u32>,
}

impl WindowCounts {
    pub fn zeros(windows: usize) -> Self {
        Self {
            attempts: vec![0; windows],
            wins: vec![0; windows],
        }
    }

    /// Counts over the whole history (the last, unbounded window).
    pub fn total_attempts(&self) -> u32 {
        self.attempts.last().copied().unwrap_or(0)
    }

    pub fn total_wins(&self) -> u32 {
        self.wins.last().copied().unwrap_or(0)
    }
}

/// Counts a chronologically ordered history of `(time, correct)` attempts
/// inside each window ending at `query_time`. An attempt belongs to window
/// `w` when `query_time - time < w`.
pub fn window_counts(history: &[(f64, bool)], query_time: f64, windows: &WindowSet) -> WindowCounts {
    let mut cum_wins = Vec::with_capacity(history.len() + 1);
    cum_wins.push(0u32);
    for &(_, correct) in history {
        cum_wins.push(cum_wins.last().unwrap() + u32::from(correct));
    }
    let total_wins = *cum_wins.last().unwrap();
    let mut counts = WindowCounts::zeros(windows.len());
    for (w, &width) in windows.widths().iter().enumerate() {
        let start = history.partition_point(|&(t, _)| !(query_time - t < width));
        counts.attempts[w] = (history.len() - start) as u32;
        counts.wins[w] = total_wins - cum_wins[start];
    }
    counts
}

/// Incremental per-key history. Queries must arrive in nondecreasing time.
#[derive(Debug, Clone)]
struct KeyHistory {
    times: Vec<f64>,
    cum_wins: Vec<u32>,
    cursors: Vec<usize>,
}

impl KeyHistory {
    fn new(windows: usize) -> Self {
        Self {
            times: Vec::new(),
            cum_wins: vec![0],
            cursors: vec![0; windows],
        }
    }

    fn push(&mut self, time: f64, correct: bool) {
        self.times.push(time);
        let last = *self.cum_wins.last().unwrap();
        self.cum_wins.push(last + u32::from(correct));
    }

    fn counts(&mut self, query_time: f64, windows: &WindowSet) -> WindowCounts {
        let n = self.times.len();
        let total_wins = self.cum_wins[n];
        let mut out = WindowCounts::zeros(windows.len());
        for (w, &width) in windows.widths().iter().enumerate() {
            let cursor = &mut self.cursors[w];
            while *cursor < n && !(query_time - self.times[*cursor] < width) {
                *cursor += 1;
            }
            out.attempts[w] = (n - *cursor) as u32;
            out.wins[w] = total_wins - self.cum_wins[*cursor];
        }
        out
    }
}

/// Per-student counter streams keyed by skill or item index.
#[derive(Debug, Clone)]
pub struct CounterState {
    windows: WindowSet,
    keys: HashMap<u32, KeyHistory>,
}

impl CounterState {
    pub fn new(windows: WindowSet) -> Self {
        Self {
            windows,
            keys: HashMap::new(),
        }
    }

    pub fn record(&mut self, key: u32, time: f64, correct: bool) {
        let w = self.windows.len();
        self.keys.entry(key).or_insert_with(|| KeyHistory::new(w)).push(time, correct);
    }

    pub fn counts(&mut self, key: u32, query_time: f64) -> WindowCounts {
        match self.keys.get_mut(&key) {
            Some(h) => h.counts(query_time, &self.windows),
            None => WindowCounts::zeros(self.windows.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Irt,
    Mirtb,
    Afm,
    Pfa,
    DashItems,
    DashKc,
    Das3h,
    #[serde(rename = "das3h-1p")]
    Das3h1p,
    Das3hPlaincounts,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 9] = [
        ModelFamily::Irt,
        ModelFamily::Mirtb,
        ModelFamily::Afm,
        ModelFamily::Pfa,
        ModelFamily::DashItems,
        ModelFamily::DashKc,
        ModelFamily::Das3h,
        ModelFamily::Das3h1p,
        ModelFamily::Das3hPlaincounts,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Irt => "irt",
            ModelFamily::Mirtb => "mirtb",
            ModelFamily::Afm => "afm",
            ModelFamily::Pfa => "pfa",
            ModelFamily::DashItems => "dash-items",
            ModelFamily::DashKc => "dash-kc",
            ModelFamily::Das3h => "das3h",
            ModelFamily::Das3h1p => "das3h-1p",
            ModelFamily::Das3hPlaincounts => "das3h-plaincounts",
        }
    }

    fn counter_key(self) -> CounterKey {
        match self {
            ModelFamily::Irt | ModelFamily::Mirtb => CounterKey::None,
            ModelFamily::DashItems => CounterKey::Item,
            _ => CounterKey::Skill,
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let s = match s.as_str() {
            "dash" => "dash-items",
            "das3h1p" | "das3h_1p" => "das3h-1p",
            "dash_items" => "dash-items",
            "dash_kc" => "dash-kc",
            "das3h_plaincounts" => "das3h-plaincounts",
            other => other,
        };
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::config(format!("unknown model family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CounterKey {
    None,
    Skill,
    Item,
}

/// Which model to encode for, with its embedding dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub dim: usize,
    pub windows: WindowSet,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, dim: usize, windows: WindowSet) -> Result<Self> {
        match (family, dim) {
            (ModelFamily::Mirtb, 0) => Err(Error::config("mirtb needs an embedding dimension > 0")),
            (ModelFamily::Irt, d) if d > 0 => Err(Error::config("irt has dimension 0; use mirtb for d > 0")),
            _ => Ok(Self { family, dim, windows }),
        }
    }

    /// Like [`ModelSpec::new`], but IRT with `dim > 0` becomes MIRTb and
    /// MIRTb with `dim == 0` becomes IRT.
    pub fn promoted(family: ModelFamily, dim: usize, windows: WindowSet) -> Result<Self> {
        let family = match (family, dim) {
            (ModelFamily::Irt, d) if d > 0 => ModelFamily::Mirtb,
            (ModelFamily::Mirtb, 0) => ModelFamily::Irt,
            (f, _) => f,
        };
        Self::new(family, dim, windows)
    }

    pub fn label(&self) -> String {
        format!("{} d={}", self.family, self.dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Users,
    Items,
    Skills,
    Wins,
    Attempts,
    Fails,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub offset: usize,
    pub size: usize,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.size
    }
}

/// Contiguous feature blocks tiling `[0, n_features)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDescriptor {
    pub family: ModelFamily,
    pub students: usize,
    pub items: usize,
    pub skills: usize,
    pub windows: usize,
    pub blocks: Vec<Block>,
    pub n_features: usize,
}

impl LayoutDescriptor {
    pub fn block(&self, kind: BlockKind) -> Option<&Block> {
        self.blocks.iter().find(|b| b.kind == kind)
    }

    /// Block index of every feature, for per-block hyperparameters.
    pub fn feature_groups(&self) -> Vec<usize> {
        let mut groups = vec![0; self.n_features];
        for (g, block) in self.blocks.iter().enumerate() {
            for slot in &mut groups[block.range()] {
                *slot = g;
            }
        }
        groups
    }

    /// Index of the win (or attempt) feature of `skill` in window `w` for
    /// per-skill windowed families.
    pub fn skill_window_index(&self, kind: BlockKind, skill: u32, w: usize) -> Option<usize> {
        let block = self.block(kind)?;
        if block.size != self.skills * self.windows {
            return None;
        }
        Some(block.offset + skill as usize * self.windows + w)
    }
}

/// Block sizes of each family for `(S, J, K)` and `W` windows.
pub fn feature_layout(spec: &ModelSpec, dims: (usize, usize, usize)) -> Result<LayoutDescriptor> {
    let (s, j, k) = dims;
    if s == 0 || j == 0 || k == 0 {
        return Err(Error::config(format!(
            "feature dimensions must be positive, got S={s} J={j} K={k}"
        )));
    }
    let w = spec.windows.len();
    use BlockKind::*;
    let sizes: Vec<(BlockKind, usize)> = match spec.family {
        ModelFamily::Irt | ModelFamily::Mirtb => vec![(Users, s), (Items, j)],
        ModelFamily::Afm => vec![(Skills, k), (Attempts, k)],
        ModelFamily::Pfa => vec![(Skills, k), (Wins, k), (Fails, k)],
        ModelFamily::DashItems | ModelFamily::DashKc => vec![(Users, s), (Items, j), (Wins, w), (Attempts, w)],
        ModelFamily::Das3h => vec![(Users, s), (Items, j), (Skills, k), (Wins, k * w), (Attempts, k * w)],
        ModelFamily::Das3h1p => vec![(Users, s), (Items, j), (Skills, k), (Wins, w), (Attempts, w)],
        ModelFamily::Das3hPlaincounts => vec![(Users, s), (Items, j), (Skills, k), (Wins, k), (Fails, k)],
    };
    let mut offset = 0;
    let blocks = sizes
        .into_iter()
        .map(|(kind, size)| {
            let b = Block { kind, offset, size };
            offset += size;
            b
        })
        .collect();
    Ok(LayoutDescriptor {
        family: spec.family,
        students: s,
        items: j,
        skills: k,
        windows: w,
        blocks,
        n_features: offset,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowMeta {
    pub student: u32,
    pub item: u32,
    pub timestamp: f64,
}

/// One encoded interaction: strictly increasing feature indices, finite values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub label: bool,
    pub meta: Option<RowMeta>,
}

impl SparseVector {
    pub fn from_pairs(pairs: Vec<(u32, f64)>, label: bool) -> Self {
        let (indices, values) = pairs.into_iter().unzip();
        Self {
            indices,
            values,
            label,
            meta: None,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn max_index(&self) -> Option<u32> {
        self.indices.last().copied()
    }

    /// Checks the sparse-row invariants against a feature count.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.indices.len() != self.values.len() {
            return Err(Error::Dimension("index/value length mismatch".into()));
        }
        if self.indices.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Dimension("indices must be strictly increasing".into()));
        }
        if let Some(max) = self.max_index() {
            if max as usize >= n_features {
                return Err(Error::Dimension(format!(
                    "feature index {max} out of range for {n_features} features"
                )));
            }
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Fit("non-finite feature value".into()));
        }
        Ok(())
    }
}

/// Id tables and q-matrix needed to interpret encoded rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub students: Vec<String>,
    pub items: Vec<String>,
    pub skills: Vec<String>,
    pub qmatrix: QMatrix,
}

impl Vocabulary {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.students.len(), self.items.len(), self.skills.len())
    }

    pub fn student_index(&self, id: &str) -> Option<u32> {
        self.students.iter().position(|s| s == id).map(|i| i as u32)
    }

    pub fn item_index(&self, id: &str) -> Option<u32> {
        self.items.iter().position(|s| s == id).map(|i| i as u32)
    }

    pub fn skill_index(&self, id: &str) -> Option<u32> {
        self.skills.iter().position(|s| s == id).map(|i| i as u32)
    }
}

impl From<&Dataset> for Vocabulary {
    fn from(ds: &Dataset) -> Self {
        Self {
            students: ds.students.clone(),
            items: ds.items.clone(),
            skills: ds.skills.clone(),
            qmatrix: ds.qmatrix.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub spec: ModelSpec,
    pub layout: LayoutDescriptor,
    pub rows: Vec<SparseVector>,
}

impl DesignMatrix {
    pub fn n_features(&self) -> usize {
        self.layout.n_features
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Writes `label idx:value ...` lines.
    pub fn write_sparse<W: Write>(&self, mut writer: W) -> Result<()> {
        for row in &self.rows {
            write!(writer, "{}", u8::from(row.label))?;
            for (i, v) in row.iter() {
                write!(writer, " {i}:{v}")?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }
}

/// Parses `label idx:value ...` lines; row metadata is not part of the format.
pub fn read_sparse<R: BufRead>(reader: R, n_features: usize) -> Result<Vec<SparseVector>> {
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = n + 1;
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else { continue };
        let label = match label {
            "1" | "+1" => true,
            "0" | "-1" => false,
            other => return Err(Error::parse(line_no, format!("bad label `{other}`"))),
        };
        let mut pairs = Vec::new();
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| Error::parse(line_no, format!("bad feature `{tok}`")))?;
            let i: u32 = i.parse().map_err(|_| Error::parse(line_no, format!("bad index `{i}`")))?;
            let v: f64 = v.parse().map_err(|_| Error::parse(line_no, format!("bad value `{v}`")))?;
            pairs.push((i, v));
        }
        let row = SparseVector::from_pairs(pairs, label);
        row.validate(n_features).map_err(|e| Error::parse(line_no, e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}

/// JSON sidecar stored next to a sparse design-matrix file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedSidecar {
    pub spec: ModelSpec,
    pub layout: LayoutDescriptor,
    pub vocabulary: Vocabulary,
    pub rows: usize,
}

/// Inputs for assembling one row.
struct RowInputs<'a> {
    student: Option<u32>,
    item: Option<u32>,
    skills: &'a [u32],
    /// Parallel to `skills` for skill-keyed families.
    skill_counts: &'a [WindowCounts],
    item_counts: Option<&'a WindowCounts>,
}

fn assemble(spec: &ModelSpec, layout: &LayoutDescriptor, input: &RowInputs<'_>) -> Vec<(u32, f64)> {
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(4 + 4 * spec.windows.len());
    let mut push = |idx: usize, value: f64| {
        if value != 0.0 {
            out.push((idx as u32, value));
        }
    };
    let w_count = spec.windows.len();

    for block in &layout.blocks {
        let off = block.offset;
        match (block.kind, spec.family) {
            (BlockKind::Users, _) => {
                if let Some(s) = input.student {
                    push(off + s as usize, 1.0);
                }
            }
            (BlockKind::Items, _) => {
                if let Some(j) = input.item {
                    push(off + j as usize, 1.0);
                }
            }
            (BlockKind::Skills, _) => {
                for &k in input.skills {
                    push(off + k as usize, 1.0);
                }
            }
            (BlockKind::Attempts, ModelFamily::Afm) => {
                for (&k, c) in input.skills.iter().zip(input.skill_counts) {
                    push(off + k as usize, f64::from(c.total_attempts()));
                }
            }
            (BlockKind::Wins, ModelFamily::Pfa | ModelFamily::Das3hPlaincounts) => {
                for (&k, c) in input.skills.iter().zip(input.skill_counts) {
                    push(off + k as usize, f64::from(c.total_wins()));
                }
            }
            (BlockKind::Fails, _) => {
                for (&k, c) in input.skills.iter().zip(input.skill_counts) {
                    push(off + k as usize, f64::from(c.total_attempts() - c.total_wins()));
                }
            }
            (kind @ (BlockKind::Wins | BlockKind::Attempts), ModelFamily::Das3h) => {
                for (&k, c) in input.skills.iter().zip(input.skill_counts) {
                    let counts = if kind == BlockKind::Wins { &c.wins } else { &c.attempts };
                    for (w, &n) in counts.iter().enumerate() {
                        push(off + k as usize * w_count + w, f64::from(n).ln_1p());
                    }
                }
            }
            (kind @ (BlockKind::Wins | BlockKind::Attempts), ModelFamily::DashItems) => {
                if let Some(c) = input.item_counts {
                    let counts = if kind == BlockKind::Wins { &c.wins } else { &c.attempts };
                    for (w, &n) in counts.iter().enumerate() {
                        push(off + w, f64::from(n).ln_1p());
                    }
                }
            }
            (kind @ (BlockKind::Wins | BlockKind::Attempts), ModelFamily::DashKc | ModelFamily::Das3h1p) => {
                for w in 0..w_count {
                    let mut sum = 0.0;
                    for c in input.skill_counts {
                        let n = if kind == BlockKind::Wins { c.wins[w] } else { c.attempts[w] };
                        sum += f64::from(n).ln_1p();
                    }
                    push(off + w, sum);
                }
            }
            (kind, family) => unreachable!("block {kind:?} not produced for {family}"),
        }
    }
    out
}

fn encode_sequence(
    seq: &[Interaction],
    spec: &ModelSpec,
    layout: &LayoutDescriptor,
    vocab_items: &[String],
    qmatrix: &QMatrix,
) -> Result<Vec<SparseVector>> {
    let key = spec.family.counter_key();
    let mut counters = CounterState::new(spec.windows.clone());
    let mut rows = Vec::with_capacity(seq.len());
    let mut skill_counts = Vec::new();
    for it in seq {
        let skills = qmatrix.skills_of(it.item);
        if skills.is_empty() {
            let name = vocab_items.get(it.item as usize).map(String::as_str).unwrap_or("?");
            return Err(Error::Encoding(format!("item `{name}` has no q-matrix entry")));
        }
        skill_counts.clear();
        let mut item_counts = None;
        match key {
            CounterKey::None => {}
            CounterKey::Skill => {
                skill_counts.extend(skills.iter().map(|&k| counters.counts(k, it.timestamp)));
            }
            CounterKey::Item => item_counts = Some(counters.counts(it.item, it.timestamp)),
        }
        let inputs = RowInputs {
            student: Some(it.student),
            item: Some(it.item),
            skills,
            skill_counts: &skill_counts,
            item_counts: item_counts.as_ref(),
        };
        let mut row = SparseVector::from_pairs(assemble(spec, layout, &inputs), it.correct);
        row.meta = Some(RowMeta {
            student: it.student,
            item: it.item,
            timestamp: it.timestamp,
        });
        rows.push(row);

        match key {
            CounterKey::None => {}
            CounterKey::Skill => {
                for &k in skills {
                    counters.record(k, it.timestamp, it.correct);
                }
            }
            CounterKey::Item => counters.record(it.item, it.timestamp, it.correct),
        }
    }
    Ok(rows)
}

/// Encodes every interaction of every student.
pub fn encode_dataset(dataset: &Dataset, spec: &ModelSpec) -> Result<DesignMatrix> {
    let students: Vec<u32> = (0..dataset.student_count() as u32).collect();
    encode_students(dataset, spec, &students)
}

/// Encodes the interactions of `students`, in the given student order and
/// chronological order within a student. Layout dimensions always come
/// from the full dataset so that folds share one feature space.
pub fn encode_students(dataset: &Dataset, spec: &ModelSpec, students: &[u32]) -> Result<DesignMatrix> {
    let layout = feature_layout(spec, dataset.dims())?;
    let per_student: Vec<Vec<SparseVector>> = students
        .par_iter()
        .map(|&s| {
            let seq = dataset
                .sequences
                .get(s as usize)
                .ok_or_else(|| Error::config(format!("student index {s} out of range")))?;
            encode_sequence(seq, spec, &layout, &dataset.items, &dataset.qmatrix)
        })
        .collect::<Result<_>>()?;
    Ok(DesignMatrix {
        spec: spec.clone(),
        layout,
        rows: per_student.into_iter().flatten().collect(),
    })
}

/// A past answer of one student, used to encode hypothetical queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEvent {
    pub item: u32,
    pub timestamp: f64,
    pub correct: bool,
}

/// Encodes a virtual interaction at `query_time` over an arbitrary skill
/// set. Events after `query_time` are ignored; events at `query_time` count
/// as prior. `skills` need not match the q-matrix row of `item`.
pub fn encode_query(
    spec: &ModelSpec,
    layout: &LayoutDescriptor,
    qmatrix: &QMatrix,
    student: Option<u32>,
    item: Option<u32>,
    skills: &[u32],
    history: &[HistoryEvent],
    query_time: f64,
) -> Result<SparseVector> {
    if skills.is_empty() {
        return Err(Error::config("query needs at least one skill"));
    }
    let mut skills: Vec<u32> = skills.to_vec();
    skills.sort_unstable();
    skills.dedup();
    if let Some(&k) = skills.last() {
        if k as usize >= layout.skills {
            return Err(Error::config(format!("skill index {k} out of range")));
        }
    }
    if let Some(s) = student {
        if s as usize >= layout.students {
            return Err(Error::config(format!("student index {s} out of range")));
        }
    }
    if let Some(j) = item {
        if j as usize >= layout.items {
            return Err(Error::config(format!("item index {j} out of range")));
        }
    }

    let mut prior: Vec<HistoryEvent> = history.iter().filter(|e| e.timestamp <= query_time).copied().collect();
    prior.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));

    let key = spec.family.counter_key();
    let mut counters = CounterState::new(spec.windows.clone());
    for e in &prior {
        match key {
            CounterKey::None => {}
            CounterKey::Skill => {
                for &k in qmatrix.skills_of(e.item) {
                    counters.record(k, e.timestamp, e.correct);
                }
            }
            CounterKey::Item => counters.record(e.item, e.timestamp, e.correct),
        }
    }
    let skill_counts: Vec<WindowCounts> = match key {
        CounterKey::Skill => skills.iter().map(|&k| counters.counts(k, query_time)).collect(),
        _ => Vec::new(),
    };
    let item_counts = match (key, item) {
        (CounterKey::Item, Some(j)) => Some(counters.counts(j, query_time)),
        _ => None,
    };
    let inputs = RowInputs {
        student,
        item,
        skills: &skills,
        skill_counts: &skill_counts,
        item_counts: item_counts.as_ref(),
    };
    Ok(SparseVector::from_pairs(assemble(spec, layout, &inputs), false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DatasetBuilder;

    #[test]
    fn empty_history_counts_zero() {
        let c = window_counts(&[], 3.0, &WindowSet::default());
        assert_eq!(c, WindowCounts::zeros(5));
    }

    #[test]
    fn counts_follow_elapsed_time() {
        let w = WindowSet::default();
        let c = window_counts(&[(0.0, true), (0.5, false)], 2.0, &w);
        assert_eq!(c.attempts, vec![0, 0, 2, 2, 2]);
        assert_eq!(c.wins, vec![0, 0, 1, 1, 1]);

        let c = window_counts(&[(0.0, true), (1.5, true), (1.99, true)], 2.0, &w);
        assert_eq!(c.attempts, vec![1, 2, 3, 3, 3]);
        assert_eq!(c.wins, c.attempts);
    }

    #[test]
    fn window_set_validation() {
        assert!(WindowSet::new(vec![1.0, 7.0]).is_err());
        assert!(WindowSet::new(vec![7.0, 1.0, f64::INFINITY]).is_err());
        let w: WindowSet = "0.0417,1,7,30,inf".parse().unwrap();
        assert_eq!(w.len(), 5);
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(serde_json::from_str::<WindowSet>(&json).unwrap(), w);
    }

    #[test]
    fn layout_sizes() {
        let w = WindowSet::default();
        let das3h = ModelSpec::new(ModelFamily::Das3h, 0, w.clone()).unwrap();
        assert_eq!(feature_layout(&das3h, (2, 3, 2)).unwrap().n_features, 27);
        let one_p = ModelSpec::new(ModelFamily::Das3h1p, 0, w.clone()).unwrap();
        let (k, ww) = (7, w.len());
        let diff = feature_layout(&das3h, (4, 5, k)).unwrap().n_features
            - feature_layout(&one_p, (4, 5, k)).unwrap().n_features;
        assert_eq!(diff, 2 * ww * (k - 1));
        let irt = ModelSpec::new(ModelFamily::Irt, 0, w).unwrap();
        assert_eq!(feature_layout(&irt, (10, 7, 1)).unwrap().n_features, 17);
        assert!(feature_layout(&irt, (10, 0, 1)).is_err());
    }

    #[test]
    fn spec_dimension_rules() {
        let w = WindowSet::default();
        assert!(ModelSpec::new(ModelFamily::Mirtb, 0, w.clone()).is_err());
        assert!(ModelSpec::new(ModelFamily::Irt, 5, w.clone()).is_err());
        let promoted = ModelSpec::promoted(ModelFamily::Irt, 5, w).unwrap();
        assert_eq!(promoted.family, ModelFamily::Mirtb);
        assert_eq!("dash".parse::<ModelFamily>().unwrap(), ModelFamily::DashItems);
    }

    fn two_row_dataset() -> Dataset {
        let mut b = DatasetBuilder::new();
        b.push("s", "i", 0.0, true, &["k"]);
        b.push("s", "i", 0.5, false, &["k"]);
        b.build()
    }

    #[test]
    fn first_row_has_only_indicators() {
        let ds = two_row_dataset();
        let spec = ModelSpec::new(ModelFamily::Das3h, 0, WindowSet::default()).unwrap();
        let m = encode_dataset(&ds, &spec).unwrap();
        assert_eq!(m.rows[0].indices, vec![0, 1, 2]);
        assert!(m.rows[0].values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn second_row_sees_first_win() {
        let ds = two_row_dataset();
        let spec = ModelSpec::new(ModelFamily::Das3h, 0, WindowSet::default()).unwrap();
        let m = encode_dataset(&ds, &spec).unwrap();
        let wins = m.layout.block(BlockKind::Wins).unwrap().offset as u32;
        let row = &m.rows[1];
        assert_eq!(row.get(wins), 0.0);
        for w in 1..5 {
            assert_eq!(row.get(wins + w), 2f64.ln());
        }
    }

    #[test]
    fn missing_qmatrix_entry_is_an_encoding_error() {
        let mut b = DatasetBuilder::new();
        b.push("s", "tagged", 0.0, true, &["k"]);
        b.push("s", "untagged", 1.0, true, &[]);
        let spec = ModelSpec::new(ModelFamily::Pfa, 0, WindowSet::default()).unwrap();
        let err = encode_dataset(&b.build(), &spec).unwrap_err();
        assert!(err.to_string().contains("untagged"));
    }

    #[test]
    fn sparse_text_roundtrip() {
        let ds = two_row_dataset();
        let spec = ModelSpec::new(ModelFamily::Das3h, 0, WindowSet::default()).unwrap();
        let m = encode_dataset(&ds, &spec).unwrap();
        let mut buf = Vec::new();
        m.write_sparse(&mut buf).unwrap();
        let rows = read_sparse(buf.as_slice(), m.n_features()).unwrap();
        for (a, b) in rows.iter().zip(&m.rows) {
            assert_eq!((&a.indices, &a.values, a.label), (&b.indices, &b.values, b.label));
        }
        assert!(read_sparse("1 99:1\n".as_bytes(), 5).is_err());
    }

    #[test]
    fn query_ignores_future_events() {
        let ds = two_row_dataset();
        let spec = ModelSpec::new(ModelFamily::Das3h, 0, WindowSet::default()).unwrap();
        let layout = feature_layout(&spec, ds.dims()).unwrap();
        let past = [HistoryEvent { item: 0, timestamp: 1.0, correct: true }];
        let mut with_future = past.to_vec();
        with_future.push(HistoryEvent { item: 0, timestamp: 9.0, correct: true });
        let a = encode_query(&spec, &layout, &ds.qmatrix, Some(0), None, &[0], &past, 5.0).unwrap();
        let b = encode_query(&spec, &layout, &ds.qmatrix, Some(0), None, &[0], &with_future, 5.0).unwrap();
        assert_eq!(a, b);
        assert!(encode_query(&spec, &layout, &ds.qmatrix, None, None, &[], &past, 5.0).is_err());
    }
}
