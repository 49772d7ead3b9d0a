//! Permutation test, rank AUC, Pearson correlation and summaries.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seeding;

pub const DEFAULT_PERMUTATIONS: usize = 10_000;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1`); zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    Summary {
        n: xs.len(),
        mean: mean(xs),
        std: std_dev(xs),
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub observed_delta: f64,
    pub p_value: f64,
    pub n_permutations: usize,
    pub seed: u64,
}

/// Two-sided label-shuffling test on the difference of means, with add-one
/// smoothing: `p = (1 + #{|Δ_perm| >= |Δ_obs|}) / (n_perm + 1)`.
pub fn permutation_test(
    scores_a: &[f64],
    scores_b: &[f64],
    n_perm: usize,
    seed: u64,
) -> PermutationResult {
    let observed = mean(scores_a) - mean(scores_b);
    let mut pooled: Vec<f64> = scores_a.iter().chain(scores_b).copied().collect();
    let na = scores_a.len();
    let total: f64 = pooled.iter().sum();
    let scale = pooled.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    // ties within rounding count as "at least as extreme"
    let threshold = observed.abs() - 1e-9 * scale;
    let mut rng = seeding::substream(seed, "permutation");
    let mut extreme = 0usize;
    for _ in 0..n_perm {
        pooled.shuffle(&mut rng);
        let sum_a: f64 = pooled[..na].iter().sum();
        let delta = sum_a / na as f64 - (total - sum_a) / (pooled.len() - na) as f64;
        if delta.abs() >= threshold {
            extreme += 1;
        }
    }
    PermutationResult {
        observed_delta: observed,
        p_value: (1 + extreme) as f64 / (n_perm + 1) as f64,
        n_permutations: n_perm,
        seed,
    }
}

/// Mann–Whitney AUC: probability a positive outscores a negative, ties ½.
pub fn auc_roc(scores_pos: &[f64], scores_neg: &[f64]) -> f64 {
    if scores_pos.is_empty() || scores_neg.is_empty() {
        return f64::NAN;
    }
    // midranks over the pooled sample
    let mut pooled: Vec<(f64, bool)> = scores_pos
        .iter()
        .map(|&s| (s, true))
        .chain(scores_neg.iter().map(|&s| (s, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += pooled[i..=j].iter().filter(|p| p.1).count() as f64 * midrank;
        i = j + 1;
    }
    let np = scores_pos.len() as f64;
    let nn = scores_neg.len() as f64;
    let u = rank_sum_pos - np * (np + 1.0) / 2.0;
    (u / (np * nn)).clamp(0.0, 1.0)
}

/// Sample Pearson correlation; `None` when undefined.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    let scale_x = xs.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let scale_y = ys.iter().fold(0.0f64, |m, y| m.max(y.abs())).max(f64::MIN_POSITIVE);
    let tiny = 1e-24 * xs.len() as f64;
    if sxx <= tiny * scale_x * scale_x || syy <= tiny * scale_y * scale_y {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Kolmogorov–Smirnov distance between a sample and Uniform(0,1).
pub fn ks_uniform_distance(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let lo = x - i as f64 / n;
            let hi = (i + 1) as f64 / n - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}
