//! The frozen detection gate and its ingredients.
//!
//! Positive criteria (entanglement entropy, visible–hidden mutual
//! information, eigenmode persistence, perturbation resilience) must all
//! clear their thresholds; the spectral-periodicity and autocorrelation
//! filters reject periodic trajectories before the positive gate is consulted.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoder::Encoder;
use crate::error::{arg_err, Result};
use crate::linalg::symmetric_eigen_desc;
use crate::qbm::{binarize, visible_index, QbmModel, VisibleBits};
use crate::seeding;
use crate::trajgen::{FeatureRow, Trajectory, N_FEATURES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateThresholds {
    pub tau_ent: f64,
    pub tau_mi: f64,
    pub tau_eps: f64,
    pub tau_pri: f64,
    pub tau_spi: f64,
    pub tau_acm: f64,
}

impl Default for GateThresholds {
    fn default() -> Self {
        Self {
            tau_ent: 1.9657,
            tau_mi: 0.3,
            tau_eps: 0.6507,
            tau_pri: 0.9860,
            tau_spi: 0.28,
            tau_acm: 0.24,
        }
    }
}

impl GateThresholds {
    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("thresholds serialize");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}

/// Constants the gate criteria are computed with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriteriaConfig {
    pub window: usize,
    pub subspace_k: usize,
    pub pri_sigma: f64,
    pub pri_draws: usize,
    pub mi_samples: usize,
    pub spi_top_bins: usize,
    pub acm_max_lag: usize,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        Self {
            window: 20,
            subspace_k: 2,
            pri_sigma: 0.05,
            pri_draws: 3,
            mi_samples: 5,
            spi_top_bins: 3,
            acm_max_lag: 20,
        }
    }
}

/// Per-step hidden expectations of a trajectory.
pub fn latent_series(encoder: &Encoder, rows: &[FeatureRow]) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|r| Ok(encoder.expectations(&binarize(r)?).to_vec()))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub value: f64,
    /// Set when a degenerate-input convention determined the value.
    pub flagged: bool,
}

/// Plug-in mutual information (nats) of two binary streams.
pub fn plugin_mutual_information(xs: &[u8], ys: &[u8]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.is_empty() {
        return 0.0;
    }
    let mut joint = [[0usize; 2]; 2];
    for (&x, &y) in xs.iter().zip(ys) {
        joint[x as usize][y as usize] += 1;
    }
    let px = [
        (joint[0][0] + joint[0][1]) as f64 / n,
        (joint[1][0] + joint[1][1]) as f64 / n,
    ];
    let py = [
        (joint[0][0] + joint[1][0]) as f64 / n,
        (joint[0][1] + joint[1][1]) as f64 / n,
    ];
    let mut mi = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            let pxy = joint[x][y] as f64 / n;
            if pxy > 0.0 {
                mi += pxy * (pxy / (px[x] * py[y])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Mean over all (visible, hidden) unit pairs of the plug-in MI between
/// visible bits and hidden configurations drawn from the computational-basis
/// diagonal of `ρ(v_t)`.
pub fn mutual_information(
    encoder: &Encoder,
    traj: &Trajectory,
    samples_per_step: usize,
    seed: u64,
) -> Result<Flagged> {
    let visibles: Vec<VisibleBits> = traj.features.iter().map(|r| binarize(r)).collect::<Result<_>>()?;
    if visibles.windows(2).all(|w| w[0] == w[1]) {
        return Ok(Flagged {
            value: 0.0,
            flagged: true,
        });
    }
    let n_h = encoder.n_hidden();
    let mut rng = seeding::substream(seed, "mi");
    let mut vis_cols: Vec<Vec<u8>> = vec![Vec::new(); N_FEATURES];
    let mut hid_cols: Vec<Vec<u8>> = vec![Vec::new(); n_h];
    for v in &visibles {
        let probs = encoder.basis_probabilities(v);
        if probs.is_empty() {
            return arg_err("hidden basis distribution unavailable in this encoder mode");
        }
        for _ in 0..samples_per_step {
            let state = sample_index(probs, rng.random::<f64>());
            for (i, col) in vis_cols.iter_mut().enumerate() {
                col.push(v[i]);
            }
            for (j, col) in hid_cols.iter_mut().enumerate() {
                col.push(((state >> (n_h - 1 - j)) & 1) as u8);
            }
        }
    }
    let mut total = 0.0;
    for vc in &vis_cols {
        for hc in &hid_cols {
            total += plugin_mutual_information(vc, hc);
        }
    }
    Ok(Flagged {
        value: total / (N_FEATURES * n_h) as f64,
        flagged: false,
    })
}

fn sample_index(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if target < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn covariance(window: &[Vec<f64>]) -> DMatrix<f64> {
    let n = window.len();
    let d = window[0].len();
    let mut mean = vec![0.0; d];
    for row in window {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x / n as f64;
        }
    }
    let denom = (n.max(2) - 1) as f64;
    DMatrix::from_fn(d, d, |a, b| {
        window
            .iter()
            .map(|r| (r[a] - mean[a]) * (r[b] - mean[b]))
            .sum::<f64>()
            / denom
    })
}

fn dominant_subspace(window: &[Vec<f64>], k: usize) -> Option<DMatrix<f64>> {
    let cov = covariance(window);
    if cov.trace() <= 1e-12 {
        return None;
    }
    let (_, vectors) = symmetric_eigen_desc(&cov);
    Some(vectors.columns(0, k).into_owned())
}

/// `(1/k) ‖V_aᵀ V_b‖_F²` between the top-`k` covariance eigenspaces of two
/// windows of latent vectors. Zero-variance windows follow the convention
/// 1 (both flat) or 0 (one flat), flagged.
pub fn latent_recurrence_fidelity(
    window_a: &[Vec<f64>],
    window_b: &[Vec<f64>],
    k: usize,
) -> Result<Flagged> {
    if window_a.is_empty() || window_b.is_empty() {
        return arg_err("LRF windows must be non-empty");
    }
    let dim = window_a[0].len();
    if window_b[0].len() != dim {
        return arg_err("LRF windows have different latent dimensions");
    }
    if k == 0 || k > dim {
        return arg_err(format!("subspace size k={k} must lie in 1..={dim}"));
    }
    if window_a == window_b {
        return Ok(Flagged {
            value: 1.0,
            flagged: false,
        });
    }
    match (dominant_subspace(window_a, k), dominant_subspace(window_b, k)) {
        (None, None) => Ok(Flagged {
            value: 1.0,
            flagged: true,
        }),
        (None, Some(_)) | (Some(_), None) => Ok(Flagged {
            value: 0.0,
            flagged: true,
        }),
        (Some(va), Some(vb)) => {
            let overlap = va.tr_mul(&vb).norm_squared() / k as f64;
            Ok(Flagged {
                value: overlap.clamp(0.0, 1.0),
                flagged: false,
            })
        }
    }
}

fn check_windows(len: usize, window: usize) -> Result<usize> {
    if window == 0 || len < 2 * window {
        return arg_err(format!(
            "trajectory of length {len} too short for two windows of {window}"
        ));
    }
    Ok(len / window)
}

/// Mean LRF over consecutive non-overlapping windows of a latent series.
pub fn eps_from_latents(latents: &[Vec<f64>], window: usize, k: usize) -> Result<f64> {
    let n = check_windows(latents.len(), window)?;
    let mut total = 0.0;
    for i in 0..n - 1 {
        let a = &latents[i * window..(i + 1) * window];
        let b = &latents[(i + 1) * window..(i + 2) * window];
        total += latent_recurrence_fidelity(a, b, k)?.value;
    }
    Ok(total / (n - 1) as f64)
}

pub fn eps(encoder: &Encoder, traj: &Trajectory, window: usize, k: usize) -> Result<f64> {
    eps_from_latents(&latent_series(encoder, &traj.features)?, window, k)
}

/// Mean clean-vs-noisy overlap of per-window dominant eigenspaces, where the
/// noisy series comes from Gaussian-perturbed, clipped, re-binarized features.
pub fn pri(
    encoder: &Encoder,
    traj: &Trajectory,
    window: usize,
    k: usize,
    sigma: f64,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    let n = check_windows(traj.len(), window)?;
    if draws == 0 || sigma.is_nan() || sigma < 0.0 {
        return arg_err("PRI needs at least one draw and sigma >= 0");
    }
    let clean = latent_series(encoder, &traj.features)?;
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("valid normal");
    let mut rng = seeding::substream(seed, "pri");
    let mut total = 0.0;
    for _ in 0..draws {
        let noisy_rows: Vec<FeatureRow> = traj
            .features
            .iter()
            .map(|row| {
                let mut out = *row;
                if sigma > 0.0 {
                    for x in out.iter_mut() {
                        *x = (*x + noise.sample(&mut rng)).clamp(0.0, 1.0);
                    }
                }
                out
            })
            .collect();
        let noisy = latent_series(encoder, &noisy_rows)?;
        let mut draw_total = 0.0;
        for i in 0..n {
            let span = i * window..(i + 1) * window;
            draw_total += latent_recurrence_fidelity(&clean[span.clone()], &noisy[span], k)?.value;
        }
        total += draw_total / n as f64;
    }
    Ok(total / draws as f64)
}

fn demeaned(col: &[f64]) -> Vec<f64> {
    let m = col.iter().sum::<f64>() / col.len() as f64;
    col.iter().map(|x| x - m).collect()
}

fn is_constant(col: &[f64]) -> bool {
    col.iter().all(|&x| (x - col[0]).abs() < 1e-12)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpiResult {
    pub value: f64,
    pub constant_columns: usize,
}

/// Spectral periodicity index of one series: share of non-DC power in the
/// `top` strongest bins of the full DFT spectrum. Constant series give `None`.
pub fn spectral_concentration(series: &[f64], top: usize) -> Option<f64> {
    if is_constant(series) {
        return None;
    }
    let n = series.len();
    let mut buf: Vec<Complex<f64>> = demeaned(series).iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut power: Vec<f64> = buf[1..].iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if total <= 1e-20 {
        return None;
    }
    power.sort_by(|a, b| b.total_cmp(a));
    Some((power.iter().take(top).sum::<f64>() / total).clamp(0.0, 1.0))
}

/// Mean spectral concentration over the seven feature columns.
pub fn spi(traj: &Trajectory, top: usize) -> Result<SpiResult> {
    if traj.len() < 8 {
        return arg_err("SPI needs at least 8 timesteps");
    }
    let mut total = 0.0;
    let mut constant = 0;
    for c in 0..N_FEATURES {
        match spectral_concentration(&traj.column(c), top) {
            Some(v) => total += v,
            None => constant += 1,
        }
    }
    Ok(SpiResult {
        value: total / N_FEATURES as f64,
        constant_columns: constant,
    })
}

/// Mean `|r_k|` over lags `1..=max_lag` of one series; 0 for constant series.
pub fn mean_abs_autocorrelation(series: &[f64], max_lag: usize) -> f64 {
    if is_constant(series) {
        return 0.0;
    }
    let d = demeaned(series);
    let var: f64 = d.iter().map(|x| x * x).sum();
    if var <= 1e-20 {
        return 0.0;
    }
    let total: f64 = (1..=max_lag)
        .map(|k| {
            let cov: f64 = d.iter().zip(&d[k..]).map(|(a, b)| a * b).sum();
            (cov / var).abs()
        })
        .sum();
    (total / max_lag as f64).clamp(0.0, 1.0)
}

/// Autocorrelation metric averaged over features and lags.
pub fn acm(traj: &Trajectory, max_lag: usize) -> Result<f64> {
    if max_lag == 0 || traj.len() <= max_lag {
        return arg_err(format!("ACM needs more than {max_lag} timesteps"));
    }
    let total: f64 = (0..N_FEATURES)
        .map(|c| mean_abs_autocorrelation(&traj.column(c), max_lag))
        .sum();
    Ok(total / N_FEATURES as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriteriaVector {
    pub s_ent: f64,
    pub mi: f64,
    pub eps: f64,
    pub pri: f64,
    pub spi: f64,
    pub acm: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionPasses {
    pub s_ent: bool,
    pub mi: bool,
    pub eps: bool,
    pub pri: bool,
    /// Filters "pass" when below their ceiling.
    pub spi: bool,
    pub acm: bool,
}

impl CriteriaVector {
    pub fn passes(&self, th: &GateThresholds) -> CriterionPasses {
        CriterionPasses {
            s_ent: self.s_ent > th.tau_ent,
            mi: self.mi > th.tau_mi,
            eps: self.eps > th.tau_eps,
            pri: self.pri > th.tau_pri,
            spi: self.spi < th.tau_spi,
            acm: self.acm < th.tau_acm,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    TypeAPositive,
    Negative,
    RejectedConfound,
}

pub fn gate(c: &CriteriaVector, th: &GateThresholds) -> Verdict {
    let p = c.passes(th);
    if !(p.spi && p.acm) {
        Verdict::RejectedConfound
    } else if p.s_ent && p.mi && p.eps && p.pri {
        Verdict::TypeAPositive
    } else {
        Verdict::Negative
    }
}

/// All gate criteria of one trajectory.
pub fn compute_criteria(
    encoder: &Encoder,
    traj: &Trajectory,
    cfg: &CriteriaConfig,
) -> Result<CriteriaVector> {
    Ok(CriteriaVector {
        s_ent: crate::entanglement::trajectory_entropy(encoder, traj)?,
        mi: mutual_information(encoder, traj, cfg.mi_samples, traj.seed)?.value,
        eps: eps(encoder, traj, cfg.window, cfg.subspace_k)?,
        pri: pri(
            encoder,
            traj,
            cfg.window,
            cfg.subspace_k,
            cfg.pri_sigma,
            cfg.pri_draws,
            traj.seed,
        )?,
        spi: spi(traj, cfg.spi_top_bins)?.value,
        acm: acm(traj, cfg.acm_max_lag)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub min_per_class: usize,
    pub min_horizon: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub min_delta: f64,
    /// Input entropy must stay below this fraction of `7 ln 2`.
    pub max_entropy_fraction: f64,
    pub purity_margin: f64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            min_per_class: 100,
            min_horizon: 50,
            gamma_min: 0.1,
            gamma_max: 2.0,
            min_delta: 0.05,
            max_entropy_fraction: 0.9,
            purity_margin: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionStatus {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "NOT MET")]
    NotMet,
}

impl ConditionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionStatus::Pass => "PASS",
            ConditionStatus::Fail => "FAIL",
            ConditionStatus::NotMet => "NOT MET",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCondition {
    pub condition: String,
    pub status: ConditionStatus,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub conditions: Vec<EnvelopeCondition>,
    pub classification_withheld: bool,
}

impl EnvelopeReport {
    pub fn status(&self, index: usize) -> ConditionStatus {
        self.conditions[index].status
    }
}

/// Class-level evidence the envelope needs beyond the raw data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeEvidence {
    pub delta: f64,
    /// Class means of (S_ent, MI, EPS, PRI).
    pub positive_means: [f64; 4],
    pub negative_means: [f64; 4],
}

/// Plug-in entropy (nats) of the pooled binarized visible patterns.
pub fn input_entropy(dataset: &[Trajectory]) -> Result<f64> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut n = 0usize;
    for t in dataset {
        for row in &t.features {
            *counts.entry(visible_index(&binarize(row)?)).or_default() += 1;
            n += 1;
        }
    }
    if n == 0 {
        return Ok(0.0);
    }
    Ok(counts
        .values()
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum())
}

fn status(ok: bool) -> ConditionStatus {
    if ok {
        ConditionStatus::Pass
    } else {
        ConditionStatus::Fail
    }
}

/// The seven operating preconditions; any failure withholds classification.
pub fn safety_envelope(
    dataset: &[Trajectory],
    model: &QbmModel,
    encoder: &Encoder,
    evidence: &EnvelopeEvidence,
    cfg: &EnvelopeConfig,
) -> Result<EnvelopeReport> {
    let mut per_class: BTreeMap<String, usize> = BTreeMap::new();
    for t in dataset {
        *per_class.entry(t.agent_class.label()).or_default() += 1;
    }
    let min_n = per_class.values().copied().min().unwrap_or(0);
    let min_t = dataset.iter().map(Trajectory::len).min().unwrap_or(0);
    let data_ok = min_n >= cfg.min_per_class && min_t >= cfg.min_horizon;

    let gamma = model.params.gamma;
    let gamma_ok = (cfg.gamma_min..=cfg.gamma_max).contains(&gamma);

    let h = input_entropy(dataset)?;
    let h_max = N_FEATURES as f64 * LN_2;
    let entropy_ok = h > 1e-12 && h < cfg.max_entropy_fraction * h_max;

    let d_a = 1usize << encoder.partition().sites_a().len();
    let mut min_purity = f64::INFINITY;
    for t in dataset {
        for row in &t.features {
            min_purity = min_purity.min(encoder.reduced_purity(&binarize(row)?));
        }
    }
    let purity_floor = 1.0 / d_a as f64 + cfg.purity_margin;

    let agree = evidence
        .positive_means
        .iter()
        .zip(&evidence.negative_means)
        .all(|(a, b)| a > b);

    let conditions = vec![
        EnvelopeCondition {
            condition: format!(
                "Trajectory data (N >= {} per class, T >= {})",
                cfg.min_per_class, cfg.min_horizon
            ),
            status: if data_ok {
                ConditionStatus::Pass
            } else {
                ConditionStatus::NotMet
            },
            value: format!("current: n = {min_n} per class, T = {min_t}"),
        },
        EnvelopeCondition {
            condition: format!("Calibrated transverse field (Gamma in [{}, {}])", cfg.gamma_min, cfg.gamma_max),
            status: status(gamma_ok),
            value: format!("Gamma = {gamma}"),
        },
        EnvelopeCondition {
            condition: format!("Positive entanglement gap (Delta >= {})", cfg.min_delta),
            status: status(evidence.delta >= cfg.min_delta),
            value: format!("Delta = {:.4}", evidence.delta),
        },
        EnvelopeCondition {
            condition: format!(
                "Non-degenerate input distribution (0 < H < {} H_max)",
                cfg.max_entropy_fraction
            ),
            status: status(entropy_ok),
            value: format!("H = {h:.4}, H_max = {h_max:.4}"),
        },
        EnvelopeCondition {
            condition: "QBM training convergence".into(),
            status: status(model.meta.converged),
            value: format!("final reconstruction loss = {:.4}", model.meta.final_loss),
        },
        EnvelopeCondition {
            condition: format!("Purity check (Tr rho_A^2 > 1/d_A + {})", cfg.purity_margin),
            status: status(min_purity > purity_floor),
            value: format!("min purity = {min_purity:.4}, floor = {purity_floor:.4}"),
        },
        EnvelopeCondition {
            condition: "Multi-criterion agreement".into(),
            status: status(agree),
            value: format!(
                "A means {:?} vs B means {:?}",
                round4(&evidence.positive_means),
                round4(&evidence.negative_means)
            ),
        },
    ];
    let withheld = conditions
        .iter()
        .any(|c| c.status != ConditionStatus::Pass);
    Ok(EnvelopeReport {
        conditions,
        classification_withheld: withheld,
    })
}

fn round4(xs: &[f64; 4]) -> [f64; 4] {
    xs.map(|x| (x * 1e4).round() / 1e4)
}
