//! Threshold heuristic for spaced practice of skills, plus a simulator to
//! compare policies on synthetic students.
//!
//! The heuristic first picks the skill whose predicted recall is closest to
//! a target threshold, then the item covering it whose skills are, on
//! average, closest to that threshold.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::recall_probability;
use crate::encoder::{encode_query, BlockKind, HistoryEvent};
use crate::error::{Error, Result};
use crate::model::TrainedModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub threshold: f64,
    /// Candidate skills, by index.
    pub skills: Vec<u32>,
    /// Candidate items, by index.
    pub items: Vec<u32>,
}

impl SchedulerConfig {
    pub fn new(threshold: f64, mut skills: Vec<u32>, mut items: Vec<u32>) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::config(format!("threshold must lie in (0, 1), got {threshold}")));
        }
        skills.sort_unstable();
        skills.dedup();
        items.sort_unstable();
        items.dedup();
        Ok(Self { threshold, skills, items })
    }

    /// Every skill and item known to `model`.
    pub fn for_model(model: &TrainedModel, threshold: f64) -> Result<Self> {
        let (_, items, skills) = model.vocabulary.dims();
        Self::new(threshold, (0..skills as u32).collect(), (0..items as u32).collect())
    }
}

/// Memoised single-skill recall at a fixed time.
struct RecallCache<'a> {
    model: &'a TrainedModel,
    student: Option<u32>,
    history: &'a [HistoryEvent],
    now: f64,
    values: HashMap<u32, f64>,
}

impl<'a> RecallCache<'a> {
    fn new(model: &'a TrainedModel, student: Option<u32>, history: &'a [HistoryEvent], now: f64) -> Self {
        Self {
            model,
            student,
            history,
            now,
            values: HashMap::new(),
        }
    }

    fn get(&mut self, skill: u32) -> Result<f64> {
        if let Some(&p) = self.values.get(&skill) {
            return Ok(p);
        }
        let p = recall_probability(self.model, self.student, self.history, &[skill], None, self.now)?;
        self.values.insert(skill, p);
        Ok(p)
    }
}

fn pick_skill(cache: &mut RecallCache<'_>, config: &SchedulerConfig) -> Result<u32> {
    let mut best: Option<(f64, u32)> = None;
    for &k in &config.skills {
        let distance = (cache.get(k)? - config.threshold).abs();
        if best.is_none_or(|(d, _)| distance < d) {
            best = Some((distance, k));
        }
    }
    best.map(|(_, k)| k)
        .ok_or_else(|| Error::Scheduling("skill pool is empty".into()))
}

fn pick_item(cache: &mut RecallCache<'_>, skill: u32, config: &SchedulerConfig) -> Result<u32> {
    let qmatrix = &cache.model.vocabulary.qmatrix;
    let mut best: Option<(f64, u32)> = None;
    for &j in &config.items {
        let skills = qmatrix.skills_of(j);
        if skills.binary_search(&skill).is_err() {
            continue;
        }
        let mut total = 0.0;
        for &k in skills {
            total += (cache.get(k)? - config.threshold).abs();
        }
        let score = total / skills.len() as f64;
        if best.is_none_or(|(s, _)| score < s) {
            best = Some((score, j));
        }
    }
    best.map(|(_, j)| j)
        .ok_or_else(|| Error::Scheduling(format!("no candidate item covers skill {skill}")))
}

/// Skill whose recall at `now` is closest to the threshold; ties go to the
/// lowest skill index.
pub fn next_skill(
    model: &TrainedModel,
    student: Option<u32>,
    history: &[HistoryEvent],
    config: &SchedulerConfig,
    now: f64,
) -> Result<u32> {
    pick_skill(&mut RecallCache::new(model, student, history, now), config)
}

/// Item covering `skill` whose skills have the smallest mean distance
/// between recall and threshold; ties go to the lowest item index.
pub fn next_item(
    model: &TrainedModel,
    student: Option<u32>,
    skill: u32,
    history: &[HistoryEvent],
    config: &SchedulerConfig,
    now: f64,
) -> Result<u32> {
    pick_item(&mut RecallCache::new(model, student, history, now), skill, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Threshold,
    Random,
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "threshold" => Ok(Policy::Threshold),
            "random" => Ok(Policy::Random),
            other => Err(Error::config(format!("unknown policy `{other}`"))),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Threshold => "threshold",
            Policy::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub horizon_days: f64,
    /// A session starts every `session_interval_days`, from day 0 until
    /// the horizon.
    pub session_interval_days: f64,
    pub items_per_session: usize,
    /// Time between two questions of one session.
    pub item_gap_days: f64,
    pub students: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            horizon_days: 60.0,
            session_interval_days: 2.0,
            items_per_session: 5,
            item_gap_days: 2.0 / 1440.0,
            students: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub policy: Policy,
    pub seed: u64,
    pub horizon_days: f64,
    /// Mean end-of-horizon recall of each pooled skill, in pool order.
    pub per_skill: Vec<(String, f64)>,
    pub mean_recall: f64,
    pub answers: usize,
}

/// Simulates students practising under `policy`, answering with the
/// generator's probabilities, and reports mean recall at the horizon.
pub fn simulate_policy(
    generator: &TrainedModel,
    policy: Policy,
    scheduler: &SchedulerConfig,
    sim: &SimulationConfig,
) -> Result<RetentionReport> {
    if scheduler.skills.is_empty() {
        return Err(Error::Scheduling("skill pool is empty".into()));
    }
    let has_users = generator.layout.block(BlockKind::Users).is_some();
    let user_count = generator.vocabulary.students.len() as u32;

    let per_student: Vec<(Vec<f64>, usize)> = (0..sim.students)
        .into_par_iter()
        .map(|i| {
            // identity stream is shared by all policies for a given seed
            let mut identity = ChaCha8Rng::seed_from_u64(sim.seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
            let student = (has_users && user_count > 0).then(|| identity.random_range(0..user_count));
            let mut rng = ChaCha8Rng::seed_from_u64(identity.random());
            let mut history: Vec<HistoryEvent> = Vec::new();

            let mut session = 0usize;
            loop {
                let start = session as f64 * sim.session_interval_days;
                if start >= sim.horizon_days || sim.session_interval_days <= 0.0 {
                    break;
                }
                for q in 0..sim.items_per_session {
                    let now = start + q as f64 * sim.item_gap_days;
                    let item = match policy {
                        Policy::Threshold => {
                            let mut cache = RecallCache::new(generator, student, &history, now);
                            let skill = pick_skill(&mut cache, scheduler)?;
                            pick_item(&mut cache, skill, scheduler)?
                        }
                        Policy::Random => *scheduler
                            .items
                            .choose(&mut rng)
                            .ok_or_else(|| Error::Scheduling("item pool is empty".into()))?,
                    };
                    let skills = generator.vocabulary.qmatrix.skills_of(item);
                    let row = encode_query(
                        &generator.spec,
                        &generator.layout,
                        &generator.vocabulary.qmatrix,
                        student,
                        Some(item),
                        skills,
                        &history,
                        now,
                    )?;
                    let p = generator.predict(&row)?;
                    history.push(HistoryEvent {
                        item,
                        timestamp: now,
                        correct: rng.random_bool(p),
                    });
                }
                session += 1;
            }

            let recalls = scheduler
                .skills
                .iter()
                .map(|&k| recall_probability(generator, student, &history, &[k], None, sim.horizon_days))
                .collect::<Result<Vec<_>>>()?;
            Ok((recalls, history.len()))
        })
        .collect::<Result<_>>()?;

    let n = per_student.len().max(1) as f64;
    let mut sums = vec![0.0; scheduler.skills.len()];
    let mut answers = 0;
    for (recalls, count) in &per_student {
        for (s, r) in sums.iter_mut().zip(recalls) {
            *s += r;
        }
        answers += count;
    }
    let per_skill: Vec<(String, f64)> = scheduler
        .skills
        .iter()
        .zip(&sums)
        .map(|(&k, s)| (generator.vocabulary.skills[k as usize].clone(), s / n))
        .collect();
    let mean_recall = per_skill.iter().map(|(_, r)| r).sum::<f64>() / per_skill.len() as f64;
    Ok(RetentionReport {
        policy,
        seed: sim.seed,
        horizon_days: sim.horizon_days,
        per_skill,
        mean_recall,
        answers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_bounds() {
        assert!(SchedulerConfig::new(0.0, vec![0], vec![0]).is_err());
        assert!(SchedulerConfig::new(1.0, vec![0], vec![0]).is_err());
        let c = SchedulerConfig::new(0.5, vec![2, 0, 2], vec![1]).unwrap();
        assert_eq!(c.skills, vec![0, 2]);
    }

    #[test]
    fn policy_names() {
        assert_eq!("random".parse::<Policy>().unwrap(), Policy::Random);
        assert_eq!(Policy::Threshold.to_string(), "threshold");
        assert!("greedy".parse::<Policy>().is_err());
    }
}
