//! Interaction logs, q-matrices, preprocessing and student-level folds.
//!
//! Timestamps are stored in fractional days. A freshly loaded [`Dataset`]
//! keeps the wall-clock origin of the source file; [`preprocess`] rebases
//! every student so that their first remaining interaction sits at day 0.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDateTime;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Separator placed between problem and step identifiers when building
/// item ids for KDD-Cup style logs.
pub const KDD_ITEM_SEPARATOR: &str = "@@";

const SECONDS_PER_DAY: f64 = 86_400.0;

/// One answer of one student to one item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub student: u32,
    pub item: u32,
    /// Days. Relative to the student's first interaction once preprocessed.
    pub timestamp: f64,
    pub correct: bool,
    /// The source row had no skill tagging; dropped by [`preprocess`].
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub missing_skill: bool,
}

/// Binary item → skill tagging, stored as one sorted skill list per item.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QMatrix {
    item_skills: Vec<Vec<u32>>,
    skill_count: usize,
}

impl QMatrix {
    pub fn new(item_count: usize, skill_count: usize) -> Self {
        Self {
            item_skills: vec![Vec::new(); item_count],
            skill_count,
        }
    }

    /// Builds a q-matrix from `(item, skill)` pairs. Duplicate pairs collapse.
    pub fn from_pairs(
        item_count: usize,
        skill_count: usize,
        pairs: impl IntoIterator<Item = (u32, u32)>,
    ) -> Self {
        let mut q = Self::new(item_count, skill_count);
        for (item, skill) in pairs {
            q.insert(item, skill);
        }
        q
    }

    pub fn insert(&mut self, item: u32, skill: u32) {
        let idx = item as usize;
        if idx >= self.item_skills.len() {
            self.item_skills.resize(idx + 1, Vec::new());
        }
        self.skill_count = self.skill_count.max(skill as usize + 1);
        let row = &mut self.item_skills[idx];
        if let Err(pos) = row.binary_search(&skill) {
            row.insert(pos, skill);
        }
    }

    pub fn skills_of(&self, item: u32) -> &[u32] {
        self.item_skills
            .get(item as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Items tagged with `skill`, in increasing index order.
    pub fn items_with(&self, skill: u32) -> Vec<u32> {
        self.item_skills
            .iter()
            .enumerate()
            .filter(|(_, skills)| skills.binary_search(&skill).is_ok())
            .map(|(item, _)| item as u32)
            .collect()
    }

    pub fn item_count(&self) -> usize {
        self.item_skills.len()
    }

    pub fn skill_count(&self) -> usize {
        self.skill_count
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.item_skills
            .iter()
            .enumerate()
            .flat_map(|(item, skills)| skills.iter().map(move |&s| (item as u32, s)))
    }

    pub fn entry_count(&self) -> usize {
        self.item_skills.iter().map(Vec::len).sum()
    }
}

/// Identifier tables, q-matrix and per-student chronological interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub students: Vec<String>,
    pub items: Vec<String>,
    pub skills: Vec<String>,
    pub qmatrix: QMatrix,
    /// Indexed by student. Sorted by timestamp; ties keep input order.
    pub sequences: Vec<Vec<Interaction>>,
}

impl Dataset {
    pub fn student_count(&self) -> usize {
        self.sequences.len()
    }

    pub fn interaction_count(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }

    pub fn interactions(&self) -> impl Iterator<Item = &Interaction> {
        self.sequences.iter().flatten()
    }

    /// Feature-space dimensions `(S, J, K)`.
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

    /// Replaces the q-matrix with `(item_id, skill_id)` pairs. Pairs naming
    /// items absent from the log are ignored; the skills column of the log
    /// stops mattering, so missing-skill flags are cleared.
    pub fn apply_qmatrix<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) {
        let item_lookup: HashMap<&str, u32> = self
            .items
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i as u32))
            .collect();
        let mut skills = Interner::default();
        let mut resolved = Vec::new();
        for (item, skill) in pairs {
            if let Some(&j) = item_lookup.get(item) {
                resolved.push((j, skills.intern(skill)));
            }
        }
        self.skills = skills.ids;
        self.qmatrix = QMatrix::from_pairs(self.items.len(), self.skills.len(), resolved);
        for seq in &mut self.sequences {
            for it in seq.iter_mut() {
                it.missing_skill = false;
            }
        }
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}

#[derive(Default)]
struct Interner {
    ids: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, id: &str) -> u32 {
        if let Some(&idx) = self.lookup.get(id) {
            return idx;
        }
        let idx = self.ids.len() as u32;
        self.ids.push(id.to_owned());
        self.lookup.insert(id.to_owned(), idx);
        idx
    }
}

/// Incrementally assembles a [`Dataset`] from string identifiers.
#[derive(Default)]
pub struct DatasetBuilder {
    students: Interner,
    items: Interner,
    skills: Interner,
    pairs: Vec<(u32, u32)>,
    sequences: Vec<Vec<Interaction>>,
}

impl DatasetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one interaction. An empty `skills` slice marks the row as
    /// missing its skill tagging.
    pub fn push(&mut self, student: &str, item: &str, timestamp: f64, correct: bool, skills: &[&str]) {
        let s = self.students.intern(student);
        let j = self.items.intern(item);
        for skill in skills {
            let k = self.skills.intern(skill);
            self.pairs.push((j, k));
        }
        if s as usize >= self.sequences.len() {
            self.sequences.resize_with(s as usize + 1, Vec::new);
        }
        self.sequences[s as usize].push(Interaction {
            student: s,
            item: j,
            timestamp,
            correct,
            missing_skill: skills.is_empty(),
        });
    }

    pub fn build(self) -> Dataset {
        let qmatrix = QMatrix::from_pairs(self.items.ids.len(), self.skills.ids.len(), self.pairs);
        let mut sequences = self.sequences;
        for seq in &mut sequences {
            seq.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        }
        Dataset {
            students: self.students.ids,
            items: self.items.ids,
            skills: self.skills.ids,
            qmatrix,
            sequences,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeUnit {
    Seconds,
    Milliseconds,
}

impl TimeUnit {
    fn to_days(self, raw: f64) -> f64 {
        match self {
            TimeUnit::Seconds => raw / SECONDS_PER_DAY,
            TimeUnit::Milliseconds => raw / (1000.0 * SECONDS_PER_DAY),
        }
    }
}

/// Source layout of an interaction log.
///
/// | tag          | delimiter | user            | item                        | time                   | correct                | skills (separator)   |
/// |--------------|-----------|-----------------|-----------------------------|------------------------|------------------------|----------------------|
/// | `assist12`   | `,`       | `user_id`       | `problem_id`                | `start_time`           | `correct`              | `skill_id` (`~`)     |
/// | `kddcup`     | tab       | `Anon Student Id` | `Problem Name`@@`Step Name` | `First Transaction Time` | `Correct First Attempt` | first `KC(..)` column (`~~`) |
/// | `generic`    | `,`       | `user`          | `item`                      | `timestamp`            | `correct`              | `skills` (`~`)       |
///
/// Numeric times are seconds (`generic-ms`: milliseconds); `YYYY-MM-DD HH:MM:SS[.f]`
/// datetimes are accepted in every format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Assist12,
    KddCup,
    Generic(TimeUnit),
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "assist12" => Ok(DatasetFormat::Assist12),
            "kddcup" => Ok(DatasetFormat::KddCup),
            "generic" => Ok(DatasetFormat::Generic(TimeUnit::Seconds)),
            "generic-ms" => Ok(DatasetFormat::Generic(TimeUnit::Milliseconds)),
            other => Err(Error::config(format!(
                "unknown dataset format `{other}` (expected assist12, kddcup, generic, generic-ms)"
            ))),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetFormat::Assist12 => "assist12",
            DatasetFormat::KddCup => "kddcup",
            DatasetFormat::Generic(TimeUnit::Seconds) => "generic",
            DatasetFormat::Generic(TimeUnit::Milliseconds) => "generic-ms",
        })
    }
}

struct Columns {
    user: usize,
    item: usize,
    step: Option<usize>,
    time: usize,
    correct: usize,
    skills: usize,
}

impl DatasetFormat {
    fn delimiter(self) -> u8 {
        match self {
            DatasetFormat::KddCup => b'\t',
            _ => b',',
        }
    }

    fn skill_separator(self) -> &'static str {
        match self {
            DatasetFormat::KddCup => "~~",
            _ => "~",
        }
    }

    fn unit(self) -> TimeUnit {
        match self {
            DatasetFormat::Generic(unit) => unit,
            _ => TimeUnit::Seconds,
        }
    }

    fn columns(self, header: &csv::StringRecord) -> Result<Columns> {
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::config(format!("{self} input is missing column `{name}`")))
        };
        match self {
            DatasetFormat::Assist12 => Ok(Columns {
                user: find("user_id")?,
                item: find("problem_id")?,
                step: None,
                time: find("start_time")?,
                correct: find("correct")?,
                skills: find("skill_id")?,
            }),
            DatasetFormat::KddCup => Ok(Columns {
                user: find("Anon Student Id")?,
                item: find("Problem Name")?,
                step: Some(find("Step Name")?),
                time: find("First Transaction Time")?,
                correct: find("Correct First Attempt")?,
                skills: header
                    .iter()
                    .position(|h| h.trim().starts_with("KC("))
                    .ok_or_else(|| Error::config("kddcup input has no KC(..) column"))?,
            }),
            DatasetFormat::Generic(_) => Ok(Columns {
                user: find("user")?,
                item: find("item")?,
                step: None,
                time: find("timestamp")?,
                correct: find("correct")?,
                skills: find("skills")?,
            }),
        }
    }
}

fn parse_days(raw: &str, unit: TimeUnit) -> Option<f64> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<f64>() {
        return v.is_finite().then(|| unit.to_days(v));
    }
    const FORMATS: [&str; 2] = ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"];
    FORMATS.iter().find_map(|fmt| {
        NaiveDateTime::parse_from_str(raw, fmt).ok().map(|dt| {
            let utc = dt.and_utc();
            (utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) * 1e-9) / SECONDS_PER_DAY
        })
    })
}

fn parse_correct(raw: &str) -> Option<bool> {
    match raw.trim() {
        "1" | "1.0" | "true" | "True" => Some(true),
        "0" | "0.0" | "false" | "False" => Some(false),
        _ => None,
    }
}

fn is_missing(raw: &str) -> bool {
    matches!(raw.trim(), "" | "NaN" | "nan" | "NA" | "NULL")
}

/// Parses an interaction log from `reader` in the given format.
pub fn read_interactions<R: Read>(reader: R, format: DatasetFormat) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols = format.columns(&header)?;
    let unit = format.unit();
    let separator = format.skill_separator();

    let mut builder = DatasetBuilder::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(err) => return Err(err.into()),
        }
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let user = record[cols.user].trim();
        if user.is_empty() {
            return Err(Error::parse(line, "empty user id"));
        }
        let problem = record[cols.item].trim();
        let item = match cols.step {
            Some(step) => format!("{problem}{KDD_ITEM_SEPARATOR}{}", record[step].trim()),
            None => problem.to_owned(),
        };
        if problem.is_empty() {
            return Err(Error::parse(line, "empty item id"));
        }
        let timestamp = parse_days(&record[cols.time], unit).ok_or_else(|| {
            Error::parse(line, format!("unparseable timestamp `{}`", &record[cols.time]))
        })?;
        let correct = parse_correct(&record[cols.correct]).ok_or_else(|| {
            Error::parse(line, format!("correctness must be 0 or 1, got `{}`", &record[cols.correct]))
        })?;
        let raw_skills = &record[cols.skills];
        let skills: Vec<&str> = if is_missing(raw_skills) {
            Vec::new()
        } else {
            raw_skills
                .split(separator)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect()
        };
        builder.push(user, &item, timestamp, correct, &skills);
    }
    Ok(builder.build())
}

pub fn load_interactions(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_interactions(std::io::BufReader::new(file), format)
}

/// Writes `dataset` as a generic log: `user,item,timestamp,correct,skills`
/// with timestamps in seconds and skills joined by `~`.
pub fn write_generic<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["user", "item", "timestamp", "correct", "skills"])?;
    let mut rows: Vec<&Interaction> = dataset.interactions().collect();
    rows.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then(a.student.cmp(&b.student)));
    for it in rows {
        let skills: Vec<&str> = dataset
            .qmatrix
            .skills_of(it.item)
            .iter()
            .map(|&k| dataset.skills[k as usize].as_str())
            .collect();
        let seconds = (it.timestamp * SECONDS_PER_DAY).round();
        wtr.write_record([
            dataset.students[it.student as usize].as_str(),
            dataset.items[it.item as usize].as_str(),
            &format!("{seconds}"),
            if it.correct { "1" } else { "0" },
            &skills.join("~"),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `item,skill` pairs (an optional third column of 0/1 weights is
/// honoured) from a delimiter-separated file with a header.
pub fn read_qmatrix_pairs<R: Read>(reader: R) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let mut pairs = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() < 2 {
            return Err(Error::parse(line, "q-matrix rows need item and skill columns"));
        }
        if record.len() > 2 && parse_correct(&record[2]) == Some(false) {
            continue;
        }
        pairs.push((record[0].trim().to_owned(), record[1].trim().to_owned()));
    }
    Ok(pairs)
}

/// Filters and rebases a loaded dataset.
///
/// Order of operations: drop untagged interactions, drop duplicate
/// `(student, item, timestamp)` rows keeping the first, drop students with
/// fewer than `min_interactions` remaining rows, rebase each student to day
/// 0, then compact the identifier tables. The result is a fixed point.
pub fn preprocess(dataset: &Dataset, min_interactions: usize) -> Result<Dataset> {
    let mut kept: Vec<(u32, Vec<Interaction>)> = Vec::new();
    for (s, seq) in dataset.sequences.iter().enumerate() {
        let mut seen = HashSet::new();
        let filtered: Vec<Interaction> = seq
            .iter()
            .filter(|it| !it.missing_skill && !dataset.qmatrix.skills_of(it.item).is_empty())
            .filter(|it| seen.insert((it.item, it.timestamp.to_bits())))
            .copied()
            .collect();
        if filtered.len() >= min_interactions.max(1) {
            kept.push((s as u32, filtered));
        }
    }
    if kept.is_empty() {
        return Err(Error::Empty(format!(
            "no student has at least {min_interactions} usable interactions"
        )));
    }

    let mut item_map: HashMap<u32, u32> = HashMap::new();
    let mut item_order = Vec::new();
    let mut skill_map: HashMap<u32, u32> = HashMap::new();
    let mut skill_order = Vec::new();
    let mut students = Vec::with_capacity(kept.len());
    let mut sequences = Vec::with_capacity(kept.len());

    for (new_s, (old_s, seq)) in kept.into_iter().enumerate() {
        students.push(dataset.students[old_s as usize].clone());
        let origin = seq[0].timestamp;
        let mut rebased = Vec::with_capacity(seq.len());
        for it in seq {
            let next = item_map.len() as u32;
            let item = *item_map.entry(it.item).or_insert_with(|| {
                item_order.push(it.item);
                next
            });
            rebased.push(Interaction {
                student: new_s as u32,
                item,
                timestamp: it.timestamp - origin,
                correct: it.correct,
                missing_skill: false,
            });
        }
        rebased.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        sequences.push(rebased);
    }

    let mut pairs = Vec::new();
    for (new_j, &old_j) in item_order.iter().enumerate() {
        for &old_k in dataset.qmatrix.skills_of(old_j) {
            let next = skill_map.len() as u32;
            let k = *skill_map.entry(old_k).or_insert_with(|| {
                skill_order.push(old_k);
                next
            });
            pairs.push((new_j as u32, k));
        }
    }

    let items: Vec<String> = item_order.iter().map(|&j| dataset.items[j as usize].clone()).collect();
    let skills: Vec<String> = skill_order.iter().map(|&k| dataset.skills[k as usize].clone()).collect();
    let qmatrix = QMatrix::from_pairs(items.len(), skills.len(), pairs);
    Ok(Dataset {
        students,
        items,
        skills,
        qmatrix,
        sequences,
    })
}

/// Summary statistics of a (preprocessed) dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub users: usize,
    pub items: usize,
    pub skills: usize,
    pub interactions: usize,
    pub mean_correctness: f64,
    pub skills_per_item: f64,
    /// Mean elapsed days between consecutive interactions of one student
    /// with one skill.
    pub mean_skill_delay: f64,
    /// Mean over students of last minus first timestamp, in days.
    pub mean_study_period: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn dataset_stats(dataset: &Dataset) -> StatsReport {
    let interactions = dataset.interaction_count();
    let users = dataset.sequences.iter().filter(|s| !s.is_empty()).count();
    if interactions == 0 {
        return StatsReport {
            users: 0,
            items: 0,
            skills: 0,
            interactions: 0,
            mean_correctness: 0.0,
            skills_per_item: 0.0,
            mean_skill_delay: 0.0,
            mean_study_period: 0.0,
            warning: Some("dataset has no interactions".into()),
        };
    }

    let correct = dataset.interactions().filter(|it| it.correct).count();
    let item_count = dataset.qmatrix.item_count().max(dataset.items.len());
    let skills_per_item = if item_count == 0 {
        0.0
    } else {
        dataset.qmatrix.entry_count() as f64 / item_count as f64
    };

    let mut delay_sum = 0.0;
    let mut delay_n = 0usize;
    let mut period_sum = 0.0;
    for seq in dataset.sequences.iter().filter(|s| !s.is_empty()) {
        period_sum += seq[seq.len() - 1].timestamp - seq[0].timestamp;
        let mut last_seen: HashMap<u32, f64> = HashMap::new();
        for it in seq {
            for &k in dataset.qmatrix.skills_of(it.item) {
                if let Some(prev) = last_seen.insert(k, it.timestamp) {
                    delay_sum += it.timestamp - prev;
                    delay_n += 1;
                }
            }
        }
    }

    StatsReport {
        users,
        items: dataset.items.len(),
        skills: dataset.skills.len(),
        interactions,
        mean_correctness: correct as f64 / interactions as f64,
        skills_per_item,
        mean_skill_delay: if delay_n == 0 { 0.0 } else { delay_sum / delay_n as f64 },
        mean_study_period: period_sum / users as f64,
        warning: None,
    }
}

/// Partition of students into `k` folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    /// Fold index of each student, indexed by student.
    pub fold_of_student: Vec<u32>,
    pub k: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn fold_of(&self, student: u32) -> usize {
        self.fold_of_student[student as usize] as usize
    }

    pub fn students_in(&self, fold: usize) -> Vec<u32> {
        self.fold_of_student
            .iter()
            .enumerate()
            .filter(|(_, &f)| f as usize == fold)
            .map(|(s, _)| s as u32)
            .collect()
    }

    /// Students outside `fold`.
    pub fn students_not_in(&self, fold: usize) -> Vec<u32> {
        self.fold_of_student
            .iter()
            .enumerate()
            .filter(|(_, &f)| f as usize != fold)
            .map(|(s, _)| s as u32)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of_student {
            sizes[f as usize] += 1;
        }
        sizes
    }
}

/// Shuffles students with a seeded permutation and cuts the result into `k`
/// contiguous chunks whose sizes differ by at most one.
pub fn student_kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    kfold_students(dataset.student_count(), k, seed)
}

pub fn kfold_students(student_count: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::config(format!("fold count must be at least 2, got {k}")));
    }
    if k > student_count {
        return Err(Error::config(format!(
            "cannot split {student_count} students into {k} folds"
        )));
    }
    let mut order: Vec<u32> = (0..student_count as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let base = student_count / k;
    let extra = student_count % k;
    let mut fold_of_student = vec![0u32; student_count];
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &s in &order[pos..pos + size] {
            fold_of_student[s as usize] = fold as u32;
        }
        pos += size;
    }
    Ok(FoldAssignment {
        fold_of_student,
        k,
        seed,
    })
}
