//! L2-penalised logistic regression for the `d = 0` models.
//!
//! Objective: mean negative log-likelihood over rows plus
//! `l2_strength / (2 n) * ||w||^2`. The intercept is not penalised. The
//! solver is a deterministic limited-memory BFGS with Armijo backtracking.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::SparseVector;
use crate::error::{Error, Result};

/// Row shards for loss evaluation. Fixed so that the reduction order does
/// not depend on the thread pool.
const SHARDS: usize = 16;
const LBFGS_MEMORY: usize = 10;
const ARMIJO_C: f64 = 1e-4;

/// Logistic function, safe for arguments of any magnitude.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub l2_strength: f64,
}

impl LinearParams {
    pub fn zeros(n_features: usize, l2_strength: f64) -> Self {
        Self {
            weights: vec![0.0; n_features],
            intercept: 0.0,
            l2_strength,
        }
    }

    /// `intercept + <weights, row>`; indices are not checked.
    pub fn logit(&self, row: &SparseVector) -> f64 {
        self.intercept + row.iter().map(|(i, v)| self.weights[i] * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LossGradient {
    pub fn norm(&self) -> f64 {
        (self.weights.iter().map(|g| g * g).sum::<f64>() + self.intercept * self.intercept).sqrt()
    }
}

fn check_rows(rows: &[SparseVector], labels: &[bool], n_features: usize) -> Result<()> {
    if rows.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    for (n, row) in rows.iter().enumerate() {
        if row.values.iter().any(|v| v.is_nan()) {
            return Err(Error::Fit(format!("NaN feature value in row {n}")));
        }
        if let Some(max) = row.max_index() {
            if max as usize >= n_features {
                return Err(Error::Dimension(format!(
                    "row {n} uses feature {max} but the model has {n_features}"
                )));
            }
        }
    }
    Ok(())
}

/// Penalised mean log-loss and its gradient.
pub fn loss_and_gradient(params: &LinearParams, rows: &[SparseVector], labels: &[bool]) -> Result<LossGradient> {
    check_rows(rows, labels, params.weights.len())?;
    Ok(evaluate(&params.weights, params.intercept, params.l2_strength, rows, labels))
}

fn evaluate(weights: &[f64], intercept: f64, l2: f64, rows: &[SparseVector], labels: &[bool]) -> LossGradient {
    let n = rows.len().max(1) as f64;
    let n_features = weights.len();
    let shard = rows.len().div_ceil(SHARDS).max(1);

    let partials: Vec<(f64, Vec<f64>, f64)> = rows
        .par_chunks(shard)
        .zip(labels.par_chunks(shard))
        .map(|(rows, labels)| {
            let mut loss = 0.0;
            let mut grad = vec![0.0; n_features];
            let mut grad_b = 0.0;
            for (row, &y) in rows.iter().zip(labels) {
                let z = intercept + row.iter().map(|(i, v)| weights[i] * v).sum::<f64>();
                // -log p(y | z) = softplus(-z) for y = 1, softplus(z) for y = 0
                loss += if y { softplus(-z) } else { softplus(z) };
                let residual = sigmoid(z) - f64::from(u8::from(y));
                for (i, v) in row.iter() {
                    grad[i] += residual * v;
                }
                grad_b += residual;
            }
            (loss, grad, grad_b)
        })
        .collect();

    let mut loss = 0.0;
    let mut grad = vec![0.0; n_features];
    let mut grad_b = 0.0;
    for (l, g, b) in partials {
        loss += l;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += gi;
        }
        grad_b += b;
    }

    let penalty_scale = l2 / n;
    let sq_norm: f64 = weights.iter().map(|w| w * w).sum();
    for (g, w) in grad.iter_mut().zip(weights) {
        *g = *g / n + penalty_scale * w;
    }
    LossGradient {
        loss: loss / n + 0.5 * penalty_scale * sq_norm,
        weights: grad,
        intercept: grad_b / n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub l2_strength: f64,
    pub max_iterations: usize,
    /// Stop once the Euclidean gradient norm falls to this value.
    pub tolerance: f64,
    /// Recorded for provenance; the solver itself is deterministic.
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            l2_strength: 1.0,
            max_iterations: 500,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub params: LinearParams,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective value after every accepted step, starting at the origin.
    pub loss_trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Packs weights followed by the intercept.
fn eval_packed(x: &[f64], l2: f64, rows: &[SparseVector], labels: &[bool]) -> (f64, Vec<f64>) {
    let (w, b) = x.split_at(x.len() - 1);
    let lg = evaluate(w, b[0], l2, rows, labels);
    let mut g = lg.weights;
    g.push(lg.intercept);
    (lg.loss, g)
}

pub fn fit_logistic(
    rows: &[SparseVector],
    labels: &[bool],
    n_features: usize,
    config: &LogisticConfig,
) -> Result<LogisticFit> {
    check_rows(rows, labels, n_features)?;
    if !(config.l2_strength >= 0.0) {
        return Err(Error::config("l2 strength must be nonnegative"));
    }
    let l2 = config.l2_strength;
    let dim = n_features + 1;
    let mut x = vec![0.0; dim];
    let (mut f, mut g) = eval_packed(&x, l2, rows, labels);
    let mut trace = vec![f];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(LBFGS_MEMORY);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= config.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            for di in &mut d {
                *di *= gamma;
            }
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            memory.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }

        let mut step = if memory.is_empty() { (1.0 / gnorm).min(1.0) } else { 1.0 };
        let mut accepted = None;
        while step > 1e-20 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = eval_packed(&trial, l2, rows, labels);
            if ft.is_finite() && ft <= f + ARMIJO_C * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, ft, gt)) = accepted else {
            // no descent possible at machine precision
            break;
        };

        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if memory.len() == LBFGS_MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        x = trial;
        f = ft;
        g = gt;
        trace.push(f);
    }
    if !converged && dot(&g, &g).sqrt() <= config.tolerance {
        converged = true;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("solver produced non-finite parameters".into()));
    }

    let intercept = x.pop().unwrap();
    Ok(LogisticFit {
        params: LinearParams {
            weights: x,
            intercept,
            l2_strength: l2,
        },
        converged,
        iterations,
        gradient_norm: dot(&g, &g).sqrt(),
        loss_trace: trace,
    })
}

pub fn predict_proba(params: &LinearParams, row: &SparseVector) -> Result<f64> {
    if let Some(max) = row.max_index() {
        if max as usize >= params.weights.len() {
            return Err(Error::Dimension(format!(
                "feature {max} out of range for {} weights",
                params.weights.len()
            )));
        }
    }
    Ok(sigmoid(params.logit(row)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(pairs: &[(u32, f64)]) -> SparseVector {
        SparseVector::from_pairs(pairs.to_vec(), false)
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        for x in [0.3, 2.0, 17.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(sigmoid(710.0), 1.0);
        let tiny = sigmoid(-710.0);
        assert!(!tiny.is_nan() && (0.0..1e-300).contains(&tiny));
        assert_eq!(sigmoid(-800.0), 0.0);
    }

    #[test]
    fn zero_weights_balanced_labels_cost_ln2() {
        let rows = vec![row(&[(0, 1.0)]), row(&[(1, 2.0)])];
        let p = LinearParams::zeros(2, 3.0);
        let lg = loss_and_gradient(&p, &rows, &[true, false]).unwrap();
        assert!((lg.loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(loss_and_gradient(&p, &rows, &[true]).is_err());
    }

    #[test]
    fn intercept_only_recovers_logit() {
        let rows = vec![SparseVector::default(); 4];
        let labels = [true, true, true, false];
        let cfg = LogisticConfig {
            l2_strength: 0.0,
            ..Default::default()
        };
        let fit = fit_logistic(&rows, &labels, 0, &cfg).unwrap();
        assert!(fit.converged);
        assert!((fit.params.intercept - 3f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn gradient_descent_on_separable_point_decreases_loss() {
        let rows = vec![row(&[(0, 1.0)])];
        let labels = [true];
        let mut p = LinearParams::zeros(1, 0.0);
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let lg = loss_and_gradient(&p, &rows, &labels).unwrap();
            assert!(lg.loss < last);
            last = lg.loss;
            p.weights[0] -= 0.5 * lg.weights[0];
            p.intercept -= 0.5 * lg.intercept;
        }
    }

    #[test]
    fn nan_features_are_rejected() {
        let rows = vec![row(&[(0, f64::NAN)])];
        let err = fit_logistic(&rows, &[true], 1, &LogisticConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Fit(_)));
    }

    #[test]
    fn predict_checks_range() {
        let p = LinearParams {
            weights: vec![1.0],
            intercept: 0.25,
            l2_strength: 0.0,
        };
        assert_eq!(predict_proba(&p, &SparseVector::default()).unwrap(), sigmoid(0.25));
        assert!(predict_proba(&p, &row(&[(1, 1.0)])).is_err());
    }

    fn random_problem(seed: u64, n: usize, features: usize) -> (Vec<SparseVector>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let mut pairs: Vec<(u32, f64)> = Vec::new();
            for i in 0..features as u32 {
                if rng.random_bool(0.4) {
                    pairs.push((i, rng.random_range(-2.0..2.0)));
                }
            }
            rows.push(SparseVector::from_pairs(pairs, false));
            labels.push(rng.random_bool(0.5));
        }
        (rows, labels)
    }

    #[test]
    fn loss_is_convex_along_random_chords() {
        let (rows, labels) = random_problem(11, 40, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let a: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let t: f64 = rng.random();
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            let f = |w: &[f64]| evaluate(w, 0.1, 0.7, &rows, &labels).loss;
            assert!(f(&mix) <= t * f(&a) + (1.0 - t) * f(&b) + 1e-12);
        }
    }

    #[test]
    fn accepted_steps_never_increase_the_objective() {
        let (rows, labels) = random_problem(5, 200, 8);
        let fit = fit_logistic(&rows, &labels, 8, &LogisticConfig::default()).unwrap();
        assert!(fit.loss_trace.windows(2).all(|p| p[1] <= p[0]));
        assert!(fit.converged);
    }

    #[test]
    fn row_order_does_not_change_the_fit() {
        let (rows, labels) = random_problem(9, 150, 5);
        let cfg = LogisticConfig::default();
        let a = fit_logistic(&rows, &labels, 5, &cfg).unwrap();
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.reverse();
        order.swap(3, 70);
        let rows2: Vec<_> = order.iter().map(|&i| rows[i].clone()).collect();
        let labels2: Vec<_> = order.iter().map(|&i| labels[i]).collect();
        let b = fit_logistic(&rows2, &labels2, 5, &cfg).unwrap();
        for (x, y) in a.params.weights.iter().zip(&b.params.weights) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}
