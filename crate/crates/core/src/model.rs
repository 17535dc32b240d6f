//! Fitted models and the on-disk model container.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::encoder::{BlockKind, DesignMatrix, LayoutDescriptor, ModelSpec, SparseVector, Vocabulary};
use crate::error::{Error, Result};
use crate::fm::{self, FmModel, GibbsConfig, PredictionMode};
use crate::glm::{self, LinearParams, LogisticConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Predictor {
    Linear(LinearParams),
    Fm { chain: FmModel, mode: PredictionMode },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub rows: usize,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logistic: Option<LogisticConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gibbs: Option<GibbsConfig>,
}

/// A fitted model together with everything needed to encode new queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub layout: LayoutDescriptor,
    pub vocabulary: Vocabulary,
    pub predictor: Predictor,
    pub training: TrainingInfo,
    /// Skills that occurred in at least one training row.
    pub seen_skills: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub logistic: LogisticConfig,
    pub gibbs: GibbsConfig,
    pub mode: PredictionMode,
}

fn seen_skills(design: &DesignMatrix, vocabulary: &Vocabulary) -> Vec<u32> {
    let mut seen = vec![false; vocabulary.skills.len()];
    if let Some(block) = design.layout.block(BlockKind::Skills) {
        for row in &design.rows {
            for &i in &row.indices {
                if block.range().contains(&(i as usize)) {
                    seen[i as usize - block.offset] = true;
                }
            }
        }
    } else {
        for meta in design.rows.iter().filter_map(|r| r.meta) {
            for &k in vocabulary.qmatrix.skills_of(meta.item) {
                seen[k as usize] = true;
            }
        }
    }
    (0..seen.len() as u32).filter(|&k| seen[k as usize]).collect()
}

/// Fits logistic regression when `spec.dim == 0`, a Gibbs-sampled
/// factorization machine otherwise.
pub fn train(design: &DesignMatrix, vocabulary: &Vocabulary, config: &TrainConfig) -> Result<TrainedModel> {
    train_with_eval(design, vocabulary, config, &[]).map(|(m, _)| m)
}

/// Trains and scores `eval_rows`. For factorization machines the scores
/// are averaged over the post-burn-in chain as it runs.
pub fn train_with_eval(
    design: &DesignMatrix,
    vocabulary: &Vocabulary,
    config: &TrainConfig,
    eval_rows: &[SparseVector],
) -> Result<(TrainedModel, Vec<f64>)> {
    let labels = design.labels();
    let n = design.n_features();
    let (predictor, training, predictions) = if design.spec.dim == 0 {
        let fit = glm::fit_logistic(&design.rows, &labels, n, &config.logistic)?;
        let predictions = eval_rows
            .iter()
            .map(|r| glm::predict_proba(&fit.params, r))
            .collect::<Result<Vec<_>>>()?;
        let info = TrainingInfo {
            rows: design.len(),
            converged: fit.converged,
            iterations: fit.iterations,
            logistic: Some(config.logistic.clone()),
            gibbs: None,
        };
        (Predictor::Linear(fit.params), info, predictions)
    } else {
        let groups = design.layout.feature_groups();
        let (chain, chain_avg) = fm::fit_fm_gibbs_with_eval(
            &design.rows,
            &labels,
            n,
            &groups,
            design.spec.dim,
            &config.gibbs,
            eval_rows,
        )?;
        let predictions = match config.mode {
            PredictionMode::ChainAverage => chain_avg,
            PredictionMode::PointEstimate => eval_rows
                .iter()
                .map(|r| fm::fm_predict(&chain, r, PredictionMode::PointEstimate))
                .collect::<Result<Vec<_>>>()?,
        };
        let info = TrainingInfo {
            rows: design.len(),
            converged: true,
            iterations: config.gibbs.iterations,
            logistic: None,
            gibbs: Some(config.gibbs.clone()),
        };
        (
            Predictor::Fm {
                chain,
                mode: config.mode,
            },
            info,
            predictions,
        )
    };
    let model = TrainedModel {
        spec: design.spec.clone(),
        layout: design.layout.clone(),
        vocabulary: vocabulary.clone(),
        seen_skills: seen_skills(design, vocabulary),
        predictor,
        training,
    };
    Ok((model, predictions))
}

/// Copy of `row` with feature `index` set to 1.
fn with_indicator(row: &SparseVector, index: u32) -> SparseVector {
    let mut out = row.clone();
    match out.indices.binary_search(&index) {
        Ok(pos) => out.values[pos] = 1.0,
        Err(pos) => {
            out.indices.insert(pos, index);
            out.values.insert(pos, 1.0);
        }
    }
    out
}

impl TrainedModel {
    pub fn predict(&self, row: &SparseVector) -> Result<f64> {
        match &self.predictor {
            Predictor::Linear(params) => glm::predict_proba(params, row),
            Predictor::Fm { chain, mode } => fm::fm_predict(chain, row, *mode),
        }
    }

    pub fn linear_params(&self) -> Option<&LinearParams> {
        match &self.predictor {
            Predictor::Linear(p) => Some(p),
            Predictor::Fm { .. } => None,
        }
    }

    /// Probability for `row` with the item indicator averaged over `items`.
    ///
    /// The score is affine in the parameters of the single active item, so
    /// averaging scores over the pool equals scoring with the pool's mean
    /// item bias (and mean embedding).
    pub fn predict_item_mixture(&self, row: &SparseVector, items: &[u32]) -> Result<f64> {
        let Some(block) = self.layout.block(BlockKind::Items) else {
            return self.predict(row);
        };
        if items.is_empty() {
            return self.predict(row);
        }
        let rows: Vec<SparseVector> = items
            .iter()
            .map(|&j| with_indicator(row, (block.offset + j as usize) as u32))
            .collect();
        match &self.predictor {
            Predictor::Linear(params) => {
                let mut total = 0.0;
                for r in &rows {
                    glm::predict_proba(params, r)?;
                    total += params.logit(r);
                }
                Ok(glm::sigmoid(total / rows.len() as f64))
            }
            Predictor::Fm { chain, mode } => {
                let mean_score = |sample: &fm::FMParams| -> Result<f64> {
                    let mut total = 0.0;
                    for r in &rows {
                        total += fm::fm_score(sample, r)?;
                    }
                    Ok(total / rows.len() as f64)
                };
                let p = match mode {
                    PredictionMode::ChainAverage => {
                        let mut total = 0.0;
                        for s in &chain.samples {
                            total += fm::probit(mean_score(s)?);
                        }
                        total / chain.samples.len() as f64
                    }
                    PredictionMode::PointEstimate => {
                        let mut total = 0.0;
                        for s in &chain.samples {
                            total += mean_score(s)?;
                        }
                        fm::probit(total / chain.samples.len() as f64)
                    }
                };
                Ok(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
            }
        }
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let model: Self = serde_json::from_reader(reader)?;
        let expected = model.layout.n_features;
        let actual = match &model.predictor {
            Predictor::Linear(p) => p.weights.len(),
            Predictor::Fm { chain, .. } => chain.n_features(),
        };
        if expected != actual {
            return Err(Error::Dimension(format!(
                "model file has {actual} weights but its layout needs {expected}"
            )));
        }
        Ok(model)
    }
}
