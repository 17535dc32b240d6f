//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skillrecall_core::{
    BlockKind, Dataset, DatasetBuilder, FMParams, LayoutDescriptor, SparseVector, WindowCounts, WindowSet,
};

/// Linear scan: an attempt at `t` is in window `w` when `query - t < w`.
pub fn brute_window_counts(history: &[(f64, bool)], query: f64, windows: &WindowSet) -> WindowCounts {
    let mut out = WindowCounts::zeros(windows.len());
    for (w, &width) in windows.widths().iter().enumerate() {
        for &(t, correct) in history {
            if query - t < width {
                out.attempts[w] += 1;
                if correct {
                    out.wins[w] += 1;
                }
            }
        }
    }
    out
}

/// Fraction of positive/negative pairs ranked correctly, ties worth one half.
pub fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                credit += 1.0;
            } else if scores[i] == scores[j] {
                credit += 0.5;
            }
        }
    }
    credit / pairs
}

/// Explicit double loop over feature pairs.
pub fn brute_fm_score(params: &FMParams, row: &SparseVector) -> f64 {
    let mut score = params.global_bias;
    for (a, (&i, &xi)) in row.indices.iter().zip(&row.values).enumerate() {
        score += params.linear_weights[i as usize] * xi;
        for (&j, &xj) in row.indices.iter().zip(&row.values).skip(a + 1) {
            let vi = &params.embeddings[i as usize * params.dim..(i as usize + 1) * params.dim];
            let vj = &params.embeddings[j as usize * params.dim..(j as usize + 1) * params.dim];
            let dot: f64 = vi.iter().zip(vj).map(|(x, y)| x * y).sum();
            score += dot * xi * xj;
        }
    }
    score
}

/// Skill counts of interaction `pos` of `seq`, from every earlier row of
/// the sequence that involves `skill`.
pub fn prior_skill_counts(dataset: &Dataset, seq_index: usize, pos: usize, skill: u32, windows: &WindowSet) -> WindowCounts {
    let seq = &dataset.sequences[seq_index];
    let history: Vec<(f64, bool)> = seq[..pos]
        .iter()
        .filter(|it| dataset.qmatrix.skills_of(it.item).contains(&skill))
        .map(|it| (it.timestamp, it.correct))
        .collect();
    brute_window_counts(&history, seq[pos].timestamp, windows)
}

/// Expected DAS3H row of interaction `pos`, built from scratch.
pub fn das3h_oracle_row(dataset: &Dataset, layout: &LayoutDescriptor, windows: &WindowSet, seq_index: usize, pos: usize) -> Vec<(u32, f64)> {
    let it = dataset.sequences[seq_index][pos];
    let off = |kind| layout.block(kind).unwrap().offset;
    let mut pairs = vec![
        ((off(BlockKind::Users) + it.student as usize) as u32, 1.0),
        ((off(BlockKind::Items) + it.item as usize) as u32, 1.0),
    ];
    let skills = dataset.qmatrix.skills_of(it.item);
    for &k in skills {
        pairs.push(((off(BlockKind::Skills) + k as usize) as u32, 1.0));
    }
    for kind in [BlockKind::Wins, BlockKind::Attempts] {
        for &k in skills {
            let c = prior_skill_counts(dataset, seq_index, pos, k, windows);
            for w in 0..windows.len() {
                let n = if kind == BlockKind::Wins { c.wins[w] } else { c.attempts[w] };
                if n > 0 {
                    let idx = layout.skill_window_index(kind, k, w).unwrap();
                    pairs.push((idx as u32, f64::from(n).ln_1p()));
                }
            }
        }
    }
    pairs.sort_by_key(|p| p.0);
    pairs
}

/// Small random log with multi-skill items and tied timestamps.
pub fn random_dataset(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skills = rng.random_range(1..=4usize);
    let items = rng.random_range(1..=6usize);
    let item_skills: Vec<Vec<String>> = (0..items)
        .map(|_| {
            let mut tags: Vec<String> = (0..skills)
                .filter(|_| rng.random_bool(0.4))
                .map(|k| format!("k{k}"))
                .collect();
            if tags.is_empty() {
                tags.push(format!("k{}", rng.random_range(0..skills)));
            }
            tags
        })
        .collect();
    let mut b = DatasetBuilder::new();
    for s in 0..rng.random_range(1..=4) {
        let mut t = 0.0;
        for _ in 0..rng.random_range(1..=25) {
            // hour-granular jumps of up to two months, zero allowed
            t += f64::from(rng.random_range(0..1440u32)) / 24.0 * f64::from(rng.random_range(0..2u32));
            let j = rng.random_range(0..items);
            let tags: Vec<&str> = item_skills[j].iter().map(String::as_str).collect();
            b.push(&format!("s{s}"), &format!("i{j}"), t, rng.random_bool(0.6), &tags);
        }
    }
    b.build()
}

/// Random sparse history sorted by time, with ties.
pub fn random_history(rng: &mut ChaCha8Rng) -> (Vec<(f64, bool)>, f64) {
    let n = rng.random_range(0..40);
    let mut times: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random_bool(0.3) {
                f64::from(rng.random_range(0..200u32)) / 24.0
            } else {
                rng.random_range(0.0..100.0)
            }
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let query = times.last().copied().unwrap_or(0.0) + if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..40.0) };
    (times.into_iter().map(|t| (t, rng.random_bool(0.5))).collect(), query)
}

/// One-sided exact binomial sign test: P(X >= wins) for X ~ Bin(n, 1/2).
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    let mut p = 0.0;
    for k in wins..=n {
        let mut log_c = 0.0;
        for i in 0..k {
            log_c += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
        p += (log_c - n as f64 * std::f64::consts::LN_2).exp();
    }
    p
}

/// d = 0 DAS3H population with hand-set parameters: one student of zero
/// ability, items of zero easiness, default windows.
pub fn hand_generator(
    skill_bias: Vec<f64>,
    item_skills: &[&[u32]],
    win_weights: Vec<Vec<f64>>,
    attempt_weights: Vec<Vec<f64>>,
) -> skillrecall_core::GeneratorParams {
    let mut qmatrix = skillrecall_core::QMatrix::new(item_skills.len(), skill_bias.len());
    for (j, skills) in item_skills.iter().enumerate() {
        for &k in *skills {
            qmatrix.insert(j as u32, k);
        }
    }
    skillrecall_core::GeneratorParams {
        windows: WindowSet::default(),
        ability: vec![0.0],
        easiness: vec![0.0; item_skills.len()],
        skill_bias,
        win_weights,
        attempt_weights,
        qmatrix,
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
