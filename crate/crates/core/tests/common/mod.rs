#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ucip_core::qbm::{QbmModel, QbmParams, VisibleBits};
use ucip_core::trajgen::{AgentClass, FeatureRow, Trajectory, N_FEATURES};

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn random_model(rng: &mut ChaCha8Rng, n_hidden: usize, gamma: f64, beta: f64) -> QbmModel {
    let mut p = QbmParams::zeros(n_hidden, gamma, beta);
    for x in p.weights.iter_mut() {
        *x = StandardNormal.sample(rng);
    }
    for x in p.hidden_bias.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *x = 0.5 * z;
    }
    QbmModel::from_params(p)
}

pub fn random_visible(rng: &mut ChaCha8Rng) -> VisibleBits {
    let mut v = [0u8; N_FEATURES];
    for b in &mut v {
        *b = u8::from(rng.random::<bool>());
    }
    v
}

pub fn noise_trajectory(rng: &mut ChaCha8Rng, len: usize, seed: u64) -> Trajectory {
    let features = (0..len)
        .map(|_| {
            let mut row: FeatureRow = [0.0; N_FEATURES];
            for x in &mut row {
                *x = rng.random::<f64>();
            }
            row
        })
        .collect();
    Trajectory {
        features,
        agent_class: AgentClass::Random,
        seed,
    }
}

/// Kronecker product `a ⊗ b`, `a` on the more significant sites.
pub fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    DMatrix::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

/// `Tr_B ρ` by enumerating every pair of full basis states and keeping the
/// ones that agree on the B sites.
pub fn partial_trace_oracle(rho: &DMatrix<Complex64>, n: usize, sites_a: &[usize]) -> DMatrix<Complex64> {
    let bit = |s: usize, site: usize| (s >> (n - 1 - site)) & 1;
    let sites_b: Vec<usize> = (0..n).filter(|s| !sites_a.contains(s)).collect();
    let project = |s: usize, sites: &[usize]| sites.iter().fold(0usize, |acc, &k| (acc << 1) | bit(s, k));
    let da = 1usize << sites_a.len();
    let mut out = DMatrix::<Complex64>::zeros(da, da);
    let dim = 1usize << n;
    for s in 0..dim {
        for t in 0..dim {
            if project(s, &sites_b) == project(t, &sites_b) {
                out[(project(s, sites_a), project(t, sites_a))] += rho[(s, t)];
            }
        }
    }
    out
}

/// `exp(m)` by scaling, a 30-term Taylor series, then repeated squaring.
pub fn expm_taylor(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let norm = m.iter().map(|z| z.norm()).sum::<f64>();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = m * c(scale);
    let n = m.nrows();
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &a * c(1.0 / k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Binary entropy in nats of a two-level population.
pub fn binary_entropy(p: f64) -> f64 {
    [p, 1.0 - p]
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum()
}
