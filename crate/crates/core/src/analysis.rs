//! Read-outs of fitted models: forgetting-curve slopes per skill and recall
//! probabilities for arbitrary skill sets at arbitrary times.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoder::{encode_query, BlockKind, HistoryEvent, ModelFamily};
use crate::error::{Error, Result};
use crate::glm::sigmoid;
use crate::model::TrainedModel;

/// Which window transitions a slope averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlopePairing {
    /// A win moving from window `w` to window `w + 1`.
    #[default]
    Adjacent,
    /// A win moving from window `w` to any wider window `w' > w`, leaving
    /// every window in between.
    AllPairs,
}

impl FromStr for SlopePairing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjacent" => Ok(SlopePairing::Adjacent),
            "all-pairs" | "all" => Ok(SlopePairing::AllPairs),
            other => Err(Error::config(format!("unknown slope pairing `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEntry {
    pub skill: String,
    pub skill_index: u32,
    /// Mean drop of correctness probability, in percentage points.
    pub mean_drop_pct: f64,
    pub std: f64,
    pub folds: usize,
    pub window_pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub pairing: SlopePairing,
    pub entries: Vec<SlopeEntry>,
}

impl SlopeReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("skill_id,mean_drop_pct,std\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{:.6},{:.6}", e.skill, e.mean_drop_pct, e.std);
        }
        out
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Reference operating point of one skill in one fitted DAS3H model: the
/// logit with one win and one attempt present in every window, user and
/// item biases at their means, and the per-window effect of that win.
struct SkillState {
    logit: f64,
    /// `(theta_win + theta_attempt) * ln 2` per window.
    window_effect: Vec<f64>,
}

fn skill_state(model: &TrainedModel, skill: u32) -> Result<SkillState> {
    if model.spec.family != ModelFamily::Das3h {
        return Err(Error::config(format!(
            "forgetting slopes need a das3h model, got {}",
            model.spec.family
        )));
    }
    let params = model
        .linear_params()
        .ok_or_else(|| Error::config("forgetting slopes need a d = 0 model"))?;
    let layout = &model.layout;
    if skill as usize >= layout.skills {
        return Err(Error::config(format!("skill index {skill} out of range")));
    }
    let w = &params.weights;

    let users = layout.block(BlockKind::Users).expect("das3h has users");
    let mean_user = mean(&w[users.range()]).unwrap_or(0.0);
    let items = layout.block(BlockKind::Items).expect("das3h has items");
    let tagged: Vec<f64> = model
        .vocabulary
        .qmatrix
        .items_with(skill)
        .iter()
        .map(|&j| w[items.offset + j as usize])
        .collect();
    let mean_item = mean(&tagged).unwrap_or(0.0);
    let skills = layout.block(BlockKind::Skills).expect("das3h has skills");

    let ln2 = std::f64::consts::LN_2;
    let mut logit = params.intercept + mean_user + mean_item + w[skills.offset + skill as usize];
    let mut window_effect = Vec::with_capacity(layout.windows);
    for win in 0..layout.windows {
        let wi = layout.skill_window_index(BlockKind::Wins, skill, win).expect("per-skill wins");
        let ai = layout.skill_window_index(BlockKind::Attempts, skill, win).expect("per-skill attempts");
        let effect = (w[wi] + w[ai]) * ln2;
        logit += effect;
        window_effect.push(effect);
    }
    Ok(SkillState { logit, window_effect })
}

/// Probability drops (as fractions) for every window transition of `pairing`.
fn transition_drops(state: &SkillState, pairing: SlopePairing) -> Vec<f64> {
    let windows = state.window_effect.len();
    let p = sigmoid(state.logit);
    let mut drops = Vec::new();
    for from in 0..windows.saturating_sub(1) {
        let targets: Vec<usize> = match pairing {
            SlopePairing::Adjacent => vec![from + 1],
            SlopePairing::AllPairs => (from + 1..windows).collect(),
        };
        for to in targets {
            let lost: f64 = state.window_effect[from..to].iter().sum();
            drops.push(p - sigmoid(state.logit - lost));
        }
    }
    drops
}

/// Mean drop in correctness probability, over window transitions and
/// fitted models, when one past win of `skill` ages out of a window.
pub fn forgetting_slope(models: &[TrainedModel], skill: u32, pairing: SlopePairing) -> Result<SlopeEntry> {
    let first = models.first().ok_or_else(|| Error::config("no fitted models"))?;
    let name = first
        .vocabulary
        .skills
        .get(skill as usize)
        .cloned()
        .unwrap_or_else(|| skill.to_string());
    let mut drops = Vec::new();
    let mut pairs = 0;
    let mut unseen = 0;
    for model in models {
        if !model.seen_skills.contains(&skill) {
            unseen += 1;
        }
        let d = transition_drops(&skill_state(model, skill)?, pairing);
        pairs = d.len();
        drops.extend(d);
    }
    let pct: Vec<f64> = drops.iter().map(|d| 100.0 * d).collect();
    let mean_drop = mean(&pct).unwrap_or(0.0);
    let std = if pct.is_empty() {
        0.0
    } else {
        (pct.iter().map(|v| (v - mean_drop) * (v - mean_drop)).sum::<f64>() / pct.len() as f64).sqrt()
    };
    Ok(SlopeEntry {
        skill: name,
        skill_index: skill,
        mean_drop_pct: mean_drop,
        std,
        folds: models.len(),
        window_pairs: pairs,
        warning: (unseen > 0).then(|| format!("skill unseen in training for {unseen} of {} models", models.len())),
    })
}

/// Slopes of every skill.
pub fn forgetting_slopes(models: &[TrainedModel], pairing: SlopePairing) -> Result<SlopeReport> {
    let first = models.first().ok_or_else(|| Error::config("no fitted models"))?;
    let entries = (0..first.layout.skills as u32)
        .map(|k| forgetting_slope(models, k, pairing))
        .collect::<Result<Vec<_>>>()?;
    Ok(SlopeReport { pairing, entries })
}

/// Predicted probability that `student` answers correctly an item over
/// `skills` at `query_time`, given their history.
///
/// When `item` is `None` the item effect is the mean over items tagged with
/// any of the queried skills. Events after `query_time` are ignored.
pub fn recall_probability(
    model: &TrainedModel,
    student: Option<u32>,
    history: &[HistoryEvent],
    skills: &[u32],
    item: Option<u32>,
    query_time: f64,
) -> Result<f64> {
    if skills.is_empty() {
        return Err(Error::config("recall query needs at least one skill"));
    }
    let row = encode_query(
        &model.spec,
        &model.layout,
        &model.vocabulary.qmatrix,
        student,
        item,
        skills,
        history,
        query_time,
    )?;
    if item.is_some() {
        return model.predict(&row);
    }
    let mut pool: Vec<u32> = skills
        .iter()
        .flat_map(|&k| model.vocabulary.qmatrix.items_with(k))
        .collect();
    pool.sort_unstable();
    pool.dedup();
    model.predict_item_mixture(&row, &pool)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_counts() {
        let state = SkillState {
            logit: 0.3,
            window_effect: vec![0.2, 0.1, 0.0, 0.4, 0.5],
        };
        assert_eq!(transition_drops(&state, SlopePairing::Adjacent).len(), 4);
        assert_eq!(transition_drops(&state, SlopePairing::AllPairs).len(), 10);
        assert_eq!(transition_drops(&state, SlopePairing::Adjacent)[2], 0.0);
        assert!("sideways".parse::<SlopePairing>().is_err());
    }
}
