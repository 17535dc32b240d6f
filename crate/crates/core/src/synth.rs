//! Synthetic learners that practise and forget.
//!
//! The generator is a d = 0 DAS3H model with known parameters. Answers are
//! drawn from it using window counts computed directly on each student's
//! per-skill history, without going through the encoder.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Interaction, QMatrix};
use crate::encoder::{feature_layout, window_counts, BlockKind, ModelFamily, ModelSpec, Vocabulary, WindowCounts, WindowSet};
use crate::error::{Error, Result};
use crate::glm::{sigmoid, LinearParams};
use crate::model::{Predictor, TrainedModel, TrainingInfo};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub students: usize,
    pub skills: usize,
    pub items_per_skill: usize,
    /// Extra items tagged with two distinct skills.
    pub multi_skill_items: usize,
    pub interactions_per_student: usize,
    /// Mean number of answers per sitting.
    pub session_length: usize,
    /// Mean gap between sittings.
    pub mean_session_gap_days: f64,
    /// When false, only the unbounded window carries weight, so elapsed
    /// time has no effect on answers.
    pub forgetting: bool,
    pub windows: WindowSet,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            students: 500,
            skills: 8,
            items_per_skill: 10,
            multi_skill_items: 10,
            interactions_per_student: 100,
            session_length: 8,
            mean_session_gap_days: 4.0,
            forgetting: true,
            windows: WindowSet::default(),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// 3 skills, 20 students, 200 interactions.
    pub fn fixture() -> Self {
        Self {
            students: 20,
            skills: 3,
            items_per_skill: 3,
            multi_skill_items: 2,
            interactions_per_student: 10,
            session_length: 4,
            mean_session_gap_days: 3.0,
            seed: 7,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.students == 0 || self.skills == 0 || self.items_per_skill == 0 || self.interactions_per_student == 0 {
            return Err(Error::config("synthetic students, skills, items and interactions must be positive"));
        }
        if self.multi_skill_items > 0 && self.skills < 2 {
            return Err(Error::config("multi-skill items need at least two skills"));
        }
        if !(self.mean_session_gap_days > 0.0) {
            return Err(Error::config("mean session gap must be positive"));
        }
        Ok(())
    }
}

/// Ground-truth parameters of a d = 0 DAS3H learner population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub windows: WindowSet,
    pub ability: Vec<f64>,
    /// Item easiness, the negated difficulty.
    pub easiness: Vec<f64>,
    pub skill_bias: Vec<f64>,
    /// `[skill][window]`, applied to `ln(1 + wins)`.
    pub win_weights: Vec<Vec<f64>>,
    /// `[skill][window]`, applied to `ln(1 + attempts)`.
    pub attempt_weights: Vec<Vec<f64>>,
    pub qmatrix: QMatrix,
}

impl GeneratorParams {
    /// Draws a population. With forgetting, wins in short windows weigh
    /// more than wins in long ones.
    pub fn sample(config: &SyntheticConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let k_count = config.skills;
        let w_count = config.windows.len();

        let mut qmatrix = QMatrix::new(k_count * config.items_per_skill + config.multi_skill_items, k_count);
        for k in 0..k_count {
            for i in 0..config.items_per_skill {
                qmatrix.insert((k * config.items_per_skill + i) as u32, k as u32);
            }
        }
        for m in 0..config.multi_skill_items {
            let j = (k_count * config.items_per_skill + m) as u32;
            for k in sample_indices(&mut rng, k_count, 2) {
                qmatrix.insert(j, k as u32);
            }
        }

        let normal = |sd: f64| Normal::new(0.0, sd).expect("finite sd");
        let ability = (0..config.students).map(|_| normal(0.7).sample(&mut rng)).collect();
        let easiness = (0..qmatrix.item_count()).map(|_| normal(0.6).sample(&mut rng)).collect();
        let skill_bias = (0..k_count).map(|_| -0.8 + normal(0.5).sample(&mut rng)).collect();

        let mut win_weights = Vec::with_capacity(k_count);
        let mut attempt_weights = Vec::with_capacity(k_count);
        for _ in 0..k_count {
            let scale: f64 = rng.random_range(0.5..1.5);
            let (wins, attempts): (Vec<f64>, Vec<f64>) = (0..w_count)
                .map(|w| {
                    let last = w + 1 == w_count;
                    let base = match (config.forgetting, last) {
                        (true, true) => 0.15,
                        (true, false) => 0.9 * 0.6f64.powi(w as i32),
                        (false, true) => 0.6,
                        (false, false) => 0.0,
                    };
                    (scale * base, -0.3 * scale * base)
                })
                .unzip();
            win_weights.push(wins);
            attempt_weights.push(attempts);
        }

        Ok(Self {
            windows: config.windows.clone(),
            ability,
            easiness,
            skill_bias,
            win_weights,
            attempt_weights,
            qmatrix,
        })
    }

    /// Log-odds of a correct answer given the counts of each of the item's
    /// skills, in `qmatrix.skills_of(item)` order.
    pub fn logit(&self, student: u32, item: u32, counts: &[WindowCounts]) -> f64 {
        let mut z = self.ability[student as usize] + self.easiness[item as usize];
        for (&k, c) in self.qmatrix.skills_of(item).iter().zip(counts) {
            let k = k as usize;
            z += self.skill_bias[k];
            for w in 0..self.windows.len() {
                z += self.win_weights[k][w] * f64::from(c.wins[w]).ln_1p();
                z += self.attempt_weights[k][w] * f64::from(c.attempts[w]).ln_1p();
            }
        }
        z
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary {
            students: (0..self.ability.len()).map(|s| format!("s{s:04}")).collect(),
            items: (0..self.easiness.len()).map(|j| format!("i{j:03}")).collect(),
            skills: (0..self.skill_bias.len()).map(|k| format!("k{k:02}")).collect(),
            qmatrix: self.qmatrix.clone(),
        }
    }

    /// The generator as a fitted DAS3H model, for use with the scheduler
    /// and the analysis read-outs.
    pub fn to_model(&self) -> Result<TrainedModel> {
        let spec = ModelSpec::new(ModelFamily::Das3h, 0, self.windows.clone())?;
        let vocabulary = self.vocabulary();
        let layout = feature_layout(&spec, vocabulary.dims())?;
        let mut params = LinearParams::zeros(layout.n_features, 0.0);
        let w = &mut params.weights;
        let block = |kind| layout.block(kind).expect("das3h block").offset;
        let (users, items, skills) = (block(BlockKind::Users), block(BlockKind::Items), block(BlockKind::Skills));
        w[users..users + self.ability.len()].copy_from_slice(&self.ability);
        w[items..items + self.easiness.len()].copy_from_slice(&self.easiness);
        w[skills..skills + self.skill_bias.len()].copy_from_slice(&self.skill_bias);
        for k in 0..self.skill_bias.len() {
            for win in 0..self.windows.len() {
                let wi = layout.skill_window_index(BlockKind::Wins, k as u32, win).expect("wins");
                let ai = layout.skill_window_index(BlockKind::Attempts, k as u32, win).expect("attempts");
                w[wi] = self.win_weights[k][win];
                w[ai] = self.attempt_weights[k][win];
            }
        }
        Ok(TrainedModel {
            seen_skills: (0..self.skill_bias.len() as u32).collect(),
            spec,
            layout,
            vocabulary,
            predictor: Predictor::Linear(params),
            training: TrainingInfo {
                rows: 0,
                converged: true,
                iterations: 0,
                logistic: None,
                gibbs: None,
            },
        })
    }
}

/// Simulates practice logs. Each sitting focuses on one skill; most of its
/// items cover that skill and the rest are drawn uniformly. Answers within
/// a sitting are one to three minutes apart.
pub fn simulate_dataset(params: &GeneratorParams, config: &SyntheticConfig) -> Result<Dataset> {
    config.validate()?;
    if params.ability.len() != config.students {
        return Err(Error::config("generator and config disagree on the number of students"));
    }
    let vocabulary = params.vocabulary();
    let k_count = params.skill_bias.len();
    let j_count = params.easiness.len();
    let by_skill: Vec<Vec<u32>> = (0..k_count as u32).map(|k| params.qmatrix.items_with(k)).collect();
    let gap = Exp::new(1.0 / config.mean_session_gap_days).expect("positive rate");

    let mut sequences = Vec::with_capacity(config.students);
    for s in 0..config.students as u32 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0000_0000 ^ u64::from(s));
        let mut histories: Vec<Vec<(f64, bool)>> = vec![Vec::new(); k_count];
        let mut seq = Vec::with_capacity(config.interactions_per_student);
        let mut now = 0.0;
        let mut left_in_session = 0usize;
        let mut focus = 0usize;
        for n in 0..config.interactions_per_student {
            if left_in_session == 0 {
                if n > 0 {
                    now += gap.sample(&mut rng);
                }
                focus = rng.random_range(0..k_count);
                left_in_session = rng.random_range(1..=2 * config.session_length.max(1));
            } else {
                now += rng.random_range(1.0..3.0) / 1440.0;
            }
            left_in_session -= 1;

            let item = if rng.random_bool(0.8) && !by_skill[focus].is_empty() {
                by_skill[focus][rng.random_range(0..by_skill[focus].len())]
            } else {
                rng.random_range(0..j_count as u32)
            };
            let skills = params.qmatrix.skills_of(item);
            let counts: Vec<WindowCounts> = skills
                .iter()
                .map(|&k| window_counts(&histories[k as usize], now, &params.windows))
                .collect();
            let correct = rng.random_bool(sigmoid(params.logit(s, item, &counts)));
            for &k in skills {
                histories[k as usize].push((now, correct));
            }
            seq.push(Interaction {
                student: s,
                item,
                timestamp: now,
                correct,
                missing_skill: false,
            });
        }
        sequences.push(seq);
    }

    Ok(Dataset {
        students: vocabulary.students,
        items: vocabulary.items,
        skills: vocabulary.skills,
        qmatrix: params.qmatrix.clone(),
        sequences,
    })
}

/// Generator and dataset for `config` in one call.
pub fn generate(config: &SyntheticConfig) -> Result<(GeneratorParams, Dataset)> {
    let params = GeneratorParams::sample(config)?;
    let dataset = simulate_dataset(&params, config)?;
    Ok((params, dataset))
}

/// Small deterministic dataset: 3 skills, 20 students, 200 interactions.
pub fn fixture() -> Dataset {
    generate(&SyntheticConfig::fixture()).expect("fixture config is valid").1
}
