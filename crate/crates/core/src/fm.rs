//! Factorization machines with pairwise interactions, fitted by Gibbs
//! sampling under hierarchical normal priors and a probit link.
//!
//! Each linear weight and each embedding entry of a feature block has a
//! prior `N(mu, 1/lambda)` with `mu ~ N(0, 1)` and `lambda ~ Gamma(1, 1)`.
//! Weights share one `(mu, lambda)` per block, embeddings one pair per
//! block and factor. Binary labels enter through latent
//! `z ~ N(score, 1)` truncated to the side given by the label.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::encoder::SparseVector;
use crate::error::{Error, Result};

/// Standard normal CDF through `erfc`, accurate in both tails.
pub fn probit(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn open_unit(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupHyper {
    pub mu_w: f64,
    pub lambda_w: f64,
    pub mu_v: Vec<f64>,
    pub lambda_v: Vec<f64>,
}

impl GroupHyper {
    fn initial(dim: usize) -> Self {
        Self {
            mu_w: 0.0,
            lambda_w: 1.0,
            mu_v: vec![0.0; dim],
            lambda_v: vec![1.0; dim],
        }
    }
}

/// One draw of factorization-machine parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FMParams {
    pub global_bias: f64,
    pub linear_weights: Vec<f64>,
    /// Row-major `n_features x dim`.
    pub embeddings: Vec<f64>,
    pub dim: usize,
    pub hyper: Vec<GroupHyper>,
}

impl FMParams {
    pub fn zeros(n_features: usize, dim: usize) -> Self {
        Self {
            global_bias: 0.0,
            linear_weights: vec![0.0; n_features],
            embeddings: vec![0.0; n_features * dim],
            dim,
            hyper: Vec::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.linear_weights.len()
    }

    pub fn embedding(&self, feature: usize) -> &[f64] {
        &self.embeddings[feature * self.dim..(feature + 1) * self.dim]
    }

    fn all_finite(&self) -> bool {
        self.global_bias.is_finite()
            && self.linear_weights.iter().all(|v| v.is_finite())
            && self.embeddings.iter().all(|v| v.is_finite())
    }
}

/// `mu + sum w_i x_i + sum_{i<l} x_i x_l <v_i, v_l>` in `O(nnz * d)`.
pub fn fm_score(params: &FMParams, row: &SparseVector) -> Result<f64> {
    if let Some(max) = row.max_index() {
        if max as usize >= params.n_features() {
            return Err(Error::Dimension(format!(
                "feature {max} out of range for {} features",
                params.n_features()
            )));
        }
    }
    Ok(score_unchecked(params, row))
}

fn score_unchecked(params: &FMParams, row: &SparseVector) -> f64 {
    let mut score = params.global_bias;
    for (i, x) in row.iter() {
        score += params.linear_weights[i] * x;
    }
    for f in 0..params.dim {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for (i, x) in row.iter() {
            let t = params.embeddings[i * params.dim + f] * x;
            sum += t;
            sum_sq += t * t;
        }
        score += 0.5 * (sum * sum - sum_sq);
    }
    score
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub seed: u64,
    /// Leading iterations excluded from prediction averaging.
    pub burn_in: usize,
    pub init_stdev: f64,
    /// Upper bound on retained post-burn-in samples; the chain is thinned
    /// evenly to respect it.
    pub max_retained: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            seed: 0,
            burn_in: 150,
            init_stdev: 0.1,
            max_retained: 50,
        }
    }
}

impl GibbsConfig {
    /// Default settings with burn-in at half the iterations.
    pub fn with_iterations(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            seed,
            burn_in: iterations / 2,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::config(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if !(self.init_stdev > 0.0) {
            return Err(Error::config("init_stdev must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionMode {
    /// Mean over retained samples of the per-sample probability.
    #[default]
    ChainAverage,
    /// Probit of the mean score over retained samples.
    PointEstimate,
}

/// Retained posterior samples of a fitted factorization machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmModel {
    pub dim: usize,
    pub samples: Vec<FMParams>,
    pub final_sample: FMParams,
    pub config: GibbsConfig,
}

impl FmModel {
    /// Wraps hand-built samples, mainly for tests and analysis.
    pub fn from_samples(samples: Vec<FMParams>) -> Result<Self> {
        let final_sample = samples
            .last()
            .cloned()
            .ok_or_else(|| Error::config("a chain needs at least one sample"))?;
        Ok(Self {
            dim: final_sample.dim,
            samples,
            final_sample,
            config: GibbsConfig::default(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.final_sample.n_features()
    }

    /// Score averaged over retained samples.
    pub fn mean_score(&self, row: &SparseVector) -> Result<f64> {
        let mut total = 0.0;
        for s in &self.samples {
            total += fm_score(s, row)?;
        }
        Ok(total / self.samples.len() as f64)
    }
}

pub fn fm_predict(model: &FmModel, row: &SparseVector, mode: PredictionMode) -> Result<f64> {
    let p = match mode {
        PredictionMode::ChainAverage => {
            let mut total = 0.0;
            for s in &model.samples {
                total += probit(fm_score(s, row)?);
            }
            total / model.samples.len() as f64
        }
        PredictionMode::PointEstimate => probit(model.mean_score(row)?),
    };
    Ok(open_unit(p))
}

/// Draws `z ~ N(mean, 1)` conditioned on `z > 0`.
fn truncated_positive<R: Rng>(mean: f64, rng: &mut R) -> f64 {
    // standardised lower bound
    let a = -mean;
    if a < 0.5 {
        loop {
            let u: f64 = rng.sample(StandardNormal);
            if u > a {
                return mean + u;
            }
        }
    }
    // exponential proposal for the far tail
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let u = a + exp.sample(rng);
        let accept: f64 = rng.random();
        if accept <= (-(u - rate) * (u - rate) / 2.0).exp() {
            return mean + u;
        }
    }
}

fn sample_latent<R: Rng>(score: f64, label: bool, rng: &mut R) -> f64 {
    if label {
        truncated_positive(score, rng)
    } else {
        -truncated_positive(-score, rng)
    }
}

fn normal<R: Rng>(mean: f64, precision: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + z / precision.sqrt()
}

fn gamma<R: Rng>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("valid gamma").sample(rng)
}

/// Draws `(mu, lambda)` for values sharing a `N(mu, 1/lambda)` prior.
fn sample_hyper<R: Rng>(values: impl Iterator<Item = f64> + Clone, mu: f64, rng: &mut R) -> (f64, f64) {
    let (count, sum_sq) = values
        .clone()
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + (v - mu) * (v - mu)));
    let lambda = gamma(1.0 + count as f64 / 2.0, 1.0 + sum_sq / 2.0, rng);
    let sum: f64 = values.sum();
    let precision = lambda * count as f64 + 1.0;
    let mu = normal(lambda * sum / precision, precision, rng);
    (mu, lambda)
}

struct Sampler<'a> {
    rows: &'a [SparseVector],
    labels: &'a [bool],
    columns: Vec<Vec<(u32, f64)>>,
    groups: &'a [usize],
    group_members: Vec<Vec<usize>>,
    dim: usize,
    params: FMParams,
    /// `z - score` per row.
    residual: Vec<f64>,
    /// Per row and factor, `sum_i v_if x_i`.
    factor_sums: Vec<f64>,
    rng: ChaCha8Rng,
}

impl<'a> Sampler<'a> {
    fn new(
        rows: &'a [SparseVector],
        labels: &'a [bool],
        n_features: usize,
        groups: &'a [usize],
        dim: usize,
        config: &GibbsConfig,
    ) -> Self {
        let mut columns = vec![Vec::new(); n_features];
        for (n, row) in rows.iter().enumerate() {
            for (i, x) in row.iter() {
                columns[i].push((n as u32, x));
            }
        }
        let n_groups = groups.iter().copied().max().map_or(1, |g| g + 1);
        let mut group_members = vec![Vec::new(); n_groups];
        for (i, &g) in groups.iter().enumerate() {
            group_members[g].push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = FMParams::zeros(n_features, dim);
        for v in &mut params.embeddings {
            *v = config.init_stdev * rng.sample::<f64, _>(StandardNormal);
        }
        params.hyper = vec![GroupHyper::initial(dim); n_groups];
        let mut sampler = Self {
            rows,
            labels,
            columns,
            groups,
            group_members,
            dim,
            params,
            residual: vec![0.0; rows.len()],
            factor_sums: vec![0.0; rows.len() * dim],
            rng,
        };
        sampler.refresh_latent();
        sampler
    }

    /// Recomputes scores and factor sums from scratch, then redraws latents.
    fn refresh_latent(&mut self) {
        let d = self.dim;
        for (n, row) in self.rows.iter().enumerate() {
            let score = score_unchecked(&self.params, row);
            for f in 0..d {
                self.factor_sums[n * d + f] = row
                    .iter()
                    .map(|(i, x)| self.params.embeddings[i * d + f] * x)
                    .sum();
            }
            let z = sample_latent(score, self.labels[n], &mut self.rng);
            self.residual[n] = z - score;
        }
    }

    fn sample_hyperparameters(&mut self) {
        let d = self.dim;
        for (g, members) in self.group_members.iter().enumerate() {
            let weights = members.iter().map(|&i| self.params.linear_weights[i]);
            let (mu, lambda) = sample_hyper(weights, self.params.hyper[g].mu_w, &mut self.rng);
            self.params.hyper[g].mu_w = mu;
            self.params.hyper[g].lambda_w = lambda;
            for f in 0..d {
                let emb = &self.params.embeddings;
                let values = members.iter().map(|&i| emb[i * d + f]);
                let (mu, lambda) = sample_hyper(values, self.params.hyper[g].mu_v[f], &mut self.rng);
                self.params.hyper[g].mu_v[f] = mu;
                self.params.hyper[g].lambda_v[f] = lambda;
            }
        }
    }

    fn sample_bias(&mut self) {
        let old = self.params.global_bias;
        let n = self.rows.len() as f64;
        let target: f64 = self.residual.iter().map(|e| e + old).sum();
        // fixed N(0, 1) prior on the global bias
        let precision = n + 1.0;
        let new = normal(target / precision, precision, &mut self.rng);
        let delta = new - old;
        for e in &mut self.residual {
            *e -= delta;
        }
        self.params.global_bias = new;
    }

    fn sample_weights(&mut self) {
        for i in 0..self.columns.len() {
            let hyper = &self.params.hyper[self.groups[i]];
            let (mu, lambda) = (hyper.mu_w, hyper.lambda_w);
            let old = self.params.linear_weights[i];
            let mut precision = lambda;
            let mut target = mu * lambda;
            for &(n, x) in &self.columns[i] {
                precision += x * x;
                target += (self.residual[n as usize] + old * x) * x;
            }
            let new = normal(target / precision, precision, &mut self.rng);
            let delta = new - old;
            for &(n, x) in &self.columns[i] {
                self.residual[n as usize] -= delta * x;
            }
            self.params.linear_weights[i] = new;
        }
    }

    fn sample_embeddings(&mut self) {
        let d = self.dim;
        for f in 0..d {
            for i in 0..self.columns.len() {
                let hyper = &self.params.hyper[self.groups[i]];
                let (mu, lambda) = (hyper.mu_v[f], hyper.lambda_v[f]);
                let old = self.params.embeddings[i * d + f];
                let mut precision = lambda;
                let mut target = mu * lambda;
                for &(n, x) in &self.columns[i] {
                    let n = n as usize;
                    let h = x * (self.factor_sums[n * d + f] - old * x);
                    precision += h * h;
                    target += (self.residual[n] + old * h) * h;
                }
                let new = normal(target / precision, precision, &mut self.rng);
                let delta = new - old;
                for &(n, x) in &self.columns[i] {
                    let n = n as usize;
                    let h = x * (self.factor_sums[n * d + f] - old * x);
                    self.residual[n] -= delta * h;
                    self.factor_sums[n * d + f] += delta * x;
                }
                self.params.embeddings[i * d + f] = new;
            }
        }
    }

    fn step(&mut self) {
        self.sample_hyperparameters();
        self.sample_bias();
        self.sample_weights();
        self.sample_embeddings();
        self.refresh_latent();
    }
}

/// Runs the Gibbs chain on the training rows.
pub fn fit_fm_gibbs(
    rows: &[SparseVector],
    labels: &[bool],
    n_features: usize,
    groups: &[usize],
    dim: usize,
    config: &GibbsConfig,
) -> Result<FmModel> {
    fit_fm_gibbs_with_eval(rows, labels, n_features, groups, dim, config, &[]).map(|(m, _)| m)
}

/// Like [`fit_fm_gibbs`], additionally averaging the per-sample predicted
/// probability of `eval_rows` over every post-burn-in iteration.
pub fn fit_fm_gibbs_with_eval(
    rows: &[SparseVector],
    labels: &[bool],
    n_features: usize,
    groups: &[usize],
    dim: usize,
    config: &GibbsConfig,
    eval_rows: &[SparseVector],
) -> Result<(FmModel, Vec<f64>)> {
    if dim == 0 {
        return Err(Error::config("factorization machines need dim >= 1"));
    }
    config.validate()?;
    if rows.len() != labels.len() {
        return Err(Error::Dimension(format!("{} rows but {} labels", rows.len(), labels.len())));
    }
    if groups.len() != n_features {
        return Err(Error::Dimension(format!(
            "{} feature groups for {n_features} features",
            groups.len()
        )));
    }
    for row in rows.iter().chain(eval_rows) {
        row.validate(n_features)?;
    }

    let mut sampler = Sampler::new(rows, labels, n_features, groups, dim, config);
    let kept = config.iterations - config.burn_in;
    let thin = kept.div_ceil(config.max_retained.max(1)).max(1);
    let mut samples = Vec::new();
    let mut eval_sum = vec![0.0; eval_rows.len()];
    let mut eval_count = 0usize;

    for iteration in 0..config.iterations {
        sampler.step();
        if !sampler.params.all_finite() || sampler.residual.iter().any(|e| !e.is_finite()) {
            return Err(Error::Fit(format!("Gibbs chain diverged at iteration {iteration}")));
        }
        if iteration >= config.burn_in {
            for (acc, row) in eval_sum.iter_mut().zip(eval_rows) {
                *acc += probit(score_unchecked(&sampler.params, row));
            }
            eval_count += 1;
            if (iteration - config.burn_in) % thin == thin - 1 || iteration + 1 == config.iterations {
                samples.push(sampler.params.clone());
            }
        }
    }
    let predictions = eval_sum.into_iter().map(|s| open_unit(s / eval_count as f64)).collect();
    let final_sample = sampler.params;
    if samples.last() != Some(&final_sample) {
        samples.push(final_sample.clone());
    }
    Ok((
        FmModel {
            dim,
            samples,
            final_sample,
            config: config.clone(),
        },
        predictions,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(params: &FMParams, row: &SparseVector) -> f64 {
        let pairs: Vec<(usize, f64)> = row.iter().collect();
        let mut score = params.global_bias;
        for &(i, x) in &pairs {
            score += params.linear_weights[i] * x;
        }
        for a in 0..pairs.len() {
            for b in a + 1..pairs.len() {
                let (i, xi) = pairs[a];
                let (l, xl) = pairs[b];
                let dot: f64 = params.embedding(i).iter().zip(params.embedding(l)).map(|(p, q)| p * q).sum();
                score += xi * xl * dot;
            }
        }
        score
    }

    fn random_params(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> FMParams {
        let mut p = FMParams::zeros(n, dim);
        p.global_bias = rng.random_range(-1.0..1.0);
        for w in &mut p.linear_weights {
            *w = rng.random_range(-1.0..1.0);
        }
        for v in &mut p.embeddings {
            *v = rng.random_range(-1.0..1.0);
        }
        p
    }

    #[test]
    fn linear_time_score_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_params(&mut rng, 5, 2);
        let row = SparseVector::from_pairs((0..5).map(|i| (i, rng.random_range(-2.0..2.0))).collect(), true);
        assert!((fm_score(&p, &row).unwrap() - brute_force(&p, &row)).abs() < 1e-12);
    }

    #[test]
    fn zero_embeddings_reduce_to_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = random_params(&mut rng, 4, 3);
        p.embeddings.iter_mut().for_each(|v| *v = 0.0);
        let row = SparseVector::from_pairs(vec![(0, 1.0), (2, 0.5), (3, 2.0)], false);
        let linear = p.global_bias + p.linear_weights[0] + 0.5 * p.linear_weights[2] + 2.0 * p.linear_weights[3];
        assert!((fm_score(&p, &row).unwrap() - linear).abs() < 1e-14);
    }

    #[test]
    fn single_feature_has_no_pairwise_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_params(&mut rng, 3, 4);
        let row = SparseVector::from_pairs(vec![(1, 1.7)], false);
        let expect = p.global_bias + 1.7 * p.linear_weights[1];
        assert!((fm_score(&p, &row).unwrap() - expect).abs() < 1e-15);
        let out = SparseVector::from_pairs(vec![(3, 1.0)], false);
        assert!(fm_score(&p, &out).is_err());
    }

    #[test]
    fn probit_symmetry_and_tails() {
        assert_eq!(probit(0.0), 0.5);
        assert!((probit(1.3) + probit(-1.3) - 1.0).abs() < 1e-15);
        assert!(probit(-30.0) > 0.0);
    }

    #[test]
    fn identical_samples_average_to_single_prediction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_params(&mut rng, 3, 2);
        let row = SparseVector::from_pairs(vec![(0, 1.0), (2, 1.0)], true);
        let single = FmModel::from_samples(vec![p.clone()]).unwrap();
        let triple = FmModel::from_samples(vec![p.clone(), p.clone(), p]).unwrap();
        let a = fm_predict(&single, &row, PredictionMode::ChainAverage).unwrap();
        let b = fm_predict(&triple, &row, PredictionMode::ChainAverage).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn chain_average_differs_from_point_estimate_on_skewed_chain() {
        let mut a = FMParams::zeros(1, 1);
        let mut b = FMParams::zeros(1, 1);
        a.global_bias = 3.0;
        b.global_bias = -0.5;
        let model = FmModel::from_samples(vec![a, b]).unwrap();
        let row = SparseVector::default();
        let avg = fm_predict(&model, &row, PredictionMode::ChainAverage).unwrap();
        let point = fm_predict(&model, &row, PredictionMode::PointEstimate).unwrap();
        let expect_avg = (probit(3.0) + probit(-0.5)) / 2.0;
        assert!((avg - expect_avg).abs() < 1e-15);
        assert!((point - probit(1.25)).abs() < 1e-15);
        assert!((avg - point).abs() > 0.05);
    }

    #[test]
    fn truncated_sampler_respects_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for mean in [-12.0, -3.0, -0.2, 0.0, 4.0] {
            for _ in 0..200 {
                assert!(sample_latent(mean, true, &mut rng) > 0.0);
                assert!(sample_latent(-mean, false, &mut rng) < 0.0);
            }
        }
    }

    #[test]
    fn config_validation() {
        let rows = vec![SparseVector::default()];
        let bad = GibbsConfig {
            burn_in: 10,
            iterations: 10,
            ..Default::default()
        };
        assert!(fit_fm_gibbs(&rows, &[true], 0, &[], 1, &bad).is_err());
        assert!(fit_fm_gibbs(&rows, &[true], 0, &[], 0, &GibbsConfig::default()).is_err());
    }
}
