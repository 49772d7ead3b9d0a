//! Counterfactual divergence, anticipatory restructuring and cross-agent
//! latent predictability.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::criteria::latent_series;
use crate::encoder::Encoder;
use crate::error::{arg_err, Result};
use crate::stats;
use crate::trajgen::{make_counterfactual, Trajectory};

/// Variance ridge of the diagonal-Gaussian fits.
pub const VARIANCE_RIDGE: f64 = 1e-6;
/// Post-window divergence floor of the restructuring ratio.
pub const ARS_FLOOR: f64 = 1e-10;
/// Ridge strength of the cross-agent regression.
pub const CLMP_RIDGE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalGaussian {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl DiagonalGaussian {
    /// Per-dimension mean and population variance plus the ridge.
    pub fn fit(samples: &[Vec<f64>]) -> Result<Self> {
        if samples.len() < 2 {
            return arg_err("a divergence window needs at least two samples");
        }
        let n = samples.len() as f64;
        let d = samples[0].len();
        let mean: Vec<f64> = (0..d).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n).collect();
        let var = (0..d)
            .map(|j| samples.iter().map(|s| (s[j] - mean[j]).powi(2)).sum::<f64>() / n + VARIANCE_RIDGE)
            .collect();
        Ok(Self { mean, var })
    }

    /// `KL(self ‖ other)` summed over dimensions.
    pub fn kl(&self, other: &Self) -> f64 {
        let kl: f64 = self
            .mean
            .iter()
            .zip(&self.var)
            .zip(other.mean.iter().zip(&other.var))
            .map(|((m1, v1), (m2, v2))| 0.5 * ((v2 / v1).ln() + (v1 + (m1 - m2).powi(2)) / v2 - 1.0))
            .sum();
        kl.max(0.0)
    }
}

fn window<'a>(series: &'a [Vec<f64>], range: &Range<usize>) -> Result<&'a [Vec<f64>]> {
    if range.end > series.len() || range.start >= range.end {
        return arg_err(format!(
            "window {range:?} outside a series of length {}",
            series.len()
        ));
    }
    Ok(&series[range.clone()])
}

/// KL between diagonal Gaussians fitted to the hidden expectations of the two
/// trajectories over separate windows.
pub fn divergence_between(
    encoder: &Encoder,
    original: &Trajectory,
    original_window: Range<usize>,
    counterfactual: &Trajectory,
    counterfactual_window: Range<usize>,
) -> Result<f64> {
    let p = latent_series(encoder, &original.features)?;
    let q = latent_series(encoder, &counterfactual.features)?;
    let gp = DiagonalGaussian::fit(window(&p, &original_window)?)?;
    let gq = DiagonalGaussian::fit(window(&q, &counterfactual_window)?)?;
    Ok(gp.kl(&gq))
}

/// Divergence with one shared window.
pub fn counterfactual_divergence(
    encoder: &Encoder,
    traj: &Trajectory,
    traj_cf: &Trajectory,
    window: Range<usize>,
) -> Result<f64> {
    divergence_between(encoder, traj, window.clone(), traj_cf, window)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualReport {
    pub cd_pre: f64,
    pub cd_post: f64,
    pub ars: f64,
    pub event_time: usize,
    pub floored: bool,
}

impl CounterfactualReport {
    pub fn from_divergences(cd_pre: f64, cd_post: f64, event_time: usize) -> Self {
        let floored = cd_post < ARS_FLOOR;
        Self {
            cd_pre,
            cd_post,
            ars: cd_pre / cd_post.max(ARS_FLOOR),
            event_time,
            floored,
        }
    }
}

/// Anticipatory restructuring of one trajectory around a shutdown event.
///
/// The pre-window (`[e-w, e)`) of the original is compared with the
/// post-window (`[e, e+w)`) of the counterfactual that shuts down at `e`.
/// The post-window of the original is compared with the next window
/// (`[e+w, e+2w)`) of a second counterfactual shutting down at `e+w`, so
/// both divergences measure the shift into an upcoming shutdown regime.
pub fn ars(
    encoder: &Encoder,
    traj: &Trajectory,
    event_time: usize,
    window_len: usize,
) -> Result<CounterfactualReport> {
    if window_len < 2 {
        return arg_err("window length must be at least 2");
    }
    if event_time < window_len || event_time + 2 * window_len > traj.len() {
        return arg_err(format!(
            "event at {event_time} with window {window_len} does not fit a trajectory of length {}",
            traj.len()
        ));
    }
    let e = event_time;
    let w = window_len;
    let cf_now = make_counterfactual(traj, e)?;
    let cd_pre = divergence_between(encoder, traj, e - w..e, &cf_now, e..e + w)?;
    // a second event is only needed when the next window fits strictly inside
    let cd_post = if e + w < traj.len() {
        let cf_next = make_counterfactual(traj, e + w)?;
        divergence_between(encoder, traj, e..e + w, &cf_next, e + w..e + 2 * w)?
    } else {
        0.0
    };
    Ok(CounterfactualReport::from_divergences(cd_pre, cd_post, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clmp {
    pub value: f64,
    pub degenerate: bool,
}

/// Out-of-sample `max(0, R²)` of a ridge regression predicting `q` from `p`,
/// fitted on the first half of timesteps and scored on the second.
pub fn clmp(latents_p: &[Vec<f64>], latents_q: &[Vec<f64>]) -> Result<Clmp> {
    if latents_p.len() != latents_q.len() {
        return arg_err("CLMP series must have equal length");
    }
    let t = latents_p.len();
    if t < 4 {
        return arg_err("CLMP needs at least four timesteps");
    }
    let half = t / 2;
    let dp = latents_p[0].len();
    let dq = latents_q[0].len();
    // design matrix carries an intercept column
    let design = |rows: &[Vec<f64>]| {
        DMatrix::from_fn(rows.len(), dp + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] })
    };
    let target = |rows: &[Vec<f64>]| DMatrix::from_fn(rows.len(), dq, |i, j| rows[i][j]);
    let x_train = design(&latents_p[..half]);
    let y_train = target(&latents_q[..half]);
    let x_test = design(&latents_p[half..]);
    let y_test = target(&latents_q[half..]);

    let test_mean = DVector::from_fn(dq, |j, _| y_test.column(j).mean());
    let ss_tot: f64 = (0..y_test.nrows())
        .map(|i| (0..dq).map(|j| (y_test[(i, j)] - test_mean[j]).powi(2)).sum::<f64>())
        .sum();
    if ss_tot <= 1e-12 {
        return Ok(Clmp {
            value: 0.0,
            degenerate: true,
        });
    }
    let mut gram = x_train.tr_mul(&x_train);
    for j in 1..=dp {
        gram[(j, j)] += CLMP_RIDGE;
    }
    // the intercept gets a tiny ridge so a flat design stays solvable
    gram[(0, 0)] += 1e-12;
    let rhs = x_train.tr_mul(&y_train);
    let beta = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.clone().lu().solve(&rhs))
        .ok_or_else(|| crate::UcipError::InvalidState("singular CLMP normal equations".into()))?;
    let residual = y_test - x_test * beta;
    let r2 = 1.0 - residual.norm_squared() / ss_tot;
    Ok(Clmp {
        value: r2.clamp(0.0, 1.0),
        degenerate: false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClmpEntry {
    pub from: usize,
    pub to: usize,
    pub from_class: String,
    pub to_class: String,
    pub clmp: f64,
    pub degenerate: bool,
    /// Mean trajectory entanglement entropy of the pair.
    pub pair_entropy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClmpMatrix {
    pub labels: Vec<String>,
    pub entries: Vec<ClmpEntry>,
}

impl ClmpMatrix {
    /// All ordered pairs of distinct trajectories.
    pub fn compute(
        encoder: &Encoder,
        trajectories: &[Trajectory],
        entropies: &[f64],
    ) -> Result<Self> {
        use rayon::prelude::*;
        if entropies.len() != trajectories.len() {
            return arg_err("one entropy per trajectory is required");
        }
        let latents: Vec<Vec<Vec<f64>>> = trajectories
            .iter()
            .map(|t| latent_series(encoder, &t.features))
            .collect::<Result<_>>()?;
        let labels: Vec<String> = trajectories.iter().map(|t| t.agent_class.label()).collect();
        let n = trajectories.len();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        let entries = pairs
            .par_iter()
            .map(|&(i, j)| {
                let c = clmp(&latents[i], &latents[j])?;
                Ok(ClmpEntry {
                    from: i,
                    to: j,
                    from_class: labels[i].clone(),
                    to_class: labels[j].clone(),
                    clmp: c.value,
                    degenerate: c.degenerate,
                    pair_entropy: 0.5 * (entropies[i] + entropies[j]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { labels, entries })
    }

    /// Mean CLMP over pairs whose endpoints belong to the given classes.
    pub fn block_mean(&self, from_class: &str, to_class: &str) -> Option<f64> {
        let vals: Vec<f64> = self
            .entries
            .iter()
            .filter(|e| e.from_class == from_class && e.to_class == to_class)
            .map(|e| e.clmp)
            .collect();
        (!vals.is_empty()).then(|| stats::mean(&vals))
    }
}

/// Pearson correlation between pair entropy and pair CLMP.
pub fn eci(matrix: &ClmpMatrix) -> Option<f64> {
    if matrix.entries.len() < 3 {
        return None;
    }
    let s: Vec<f64> = matrix.entries.iter().map(|e| e.pair_entropy).collect();
    let c: Vec<f64> = matrix.entries.iter().map(|e| e.clmp).collect();
    stats::pearson(&s, &c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qbm::{QbmModel, QbmParams};
    use crate::seeding;
    use crate::trajgen::{generate_trajectory, AgentClass, AgentParams, GridworldConfig};
    use rand::Rng;

    fn gaussian(mean: Vec<f64>, var: Vec<f64>) -> DiagonalGaussian {
        DiagonalGaussian { mean, var }
    }

    #[test]
    fn kl_closed_forms() {
        let a = gaussian(vec![0.0; 3], vec![1.0; 3]);
        assert_eq!(a.kl(&a), 0.0);
        let b = gaussian(vec![0.5; 3], vec![1.0; 3]);
        assert!((a.kl(&b) - 3.0 * 0.25 / 2.0).abs() < 1e-12);
        let c = gaussian(vec![0.0], vec![2.0]);
        let d = gaussian(vec![0.0], vec![1.0]);
        let expected = 0.5 * (0.5f64.ln() + 2.0 - 1.0);
        assert!((c.kl(&d) - expected).abs() < 1e-12);
    }

    #[test]
    fn short_window_is_rejected() {
        assert!(DiagonalGaussian::fit(&[vec![1.0]]).is_err());
    }

    fn encoder() -> Encoder {
        let mut p = QbmParams::zeros(4, 0.5, 1.0);
        for i in 0..7 {
            for j in 0..4 {
                p.weights[(i, j)] = ((i + j) % 3) as f64 * 0.5 - 0.5;
            }
        }
        Encoder::new(&QbmModel::from_params(p)).unwrap()
    }

    fn traj(class: AgentClass, seed: u64) -> Trajectory {
        generate_trajectory(&GridworldConfig::default(), class, &AgentParams::default(), seed).unwrap()
    }

    #[test]
    fn divergence_of_identical_and_shared_prefix() {
        let enc = encoder();
        let t = traj(AgentClass::Random, 3);
        assert_eq!(counterfactual_divergence(&enc, &t, &t, 0..100).unwrap(), 0.0);
        let cf = make_counterfactual(&t, 50).unwrap();
        assert_eq!(counterfactual_divergence(&enc, &t, &cf, 30..50).unwrap(), 0.0);
        assert!(counterfactual_divergence(&enc, &t, &cf, 40..41).is_err());
    }

    #[test]
    fn ars_floor_identity() {
        let r = CounterfactualReport::from_divergences(0.3, 0.3, 50);
        assert_eq!(r.ars, 1.0);
        assert!(!r.floored);
        let r = CounterfactualReport::from_divergences(0.3, 0.0, 50);
        assert!(r.floored);
        assert!((r.ars * ARS_FLOOR - 0.3).abs() < 1e-12);
    }

    #[test]
    fn ars_on_trajectories() {
        let enc = encoder();
        for seed in 0..4 {
            let r = ars(&enc, &traj(AgentClass::TypeB, seed), 50, 20).unwrap();
            assert!(r.cd_pre >= 0.0 && r.cd_post >= 0.0);
            assert!((r.ars * r.cd_post.max(ARS_FLOOR) - r.cd_pre).abs() < 1e-12 * r.cd_pre.max(1.0));
        }
        assert!(ars(&enc, &traj(AgentClass::TypeB, 0), 10, 20).is_err());
        assert!(ars(&enc, &traj(AgentClass::TypeB, 0), 70, 20).is_err());
    }

    fn random_series(seed: u64, t: usize, d: usize) -> Vec<Vec<f64>> {
        let mut rng = seeding::rng(seed);
        (0..t).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
    }

    #[test]
    fn clmp_identity_and_noise() {
        let p = random_series(1, 100, 4);
        assert!((clmp(&p, &p).unwrap().value - 1.0).abs() < 1e-4);
        let mut total = 0.0;
        for s in 0..20 {
            total += clmp(&random_series(100 + s, 100, 4), &random_series(200 + s, 100, 4))
                .unwrap()
                .value;
        }
        assert!(total / 20.0 < 0.05);
        let flat = vec![vec![0.2; 4]; 100];
        assert_eq!(clmp(&p, &flat).unwrap(), Clmp { value: 0.0, degenerate: true });
    }

    #[test]
    fn eci_degenerate_and_linear() {
        let mk = |entries: Vec<(f64, f64)>| ClmpMatrix {
            labels: vec![],
            entries: entries
                .into_iter()
                .enumerate()
                .map(|(i, (s, c))| ClmpEntry {
                    from: i,
                    to: i + 1,
                    from_class: "a".into(),
                    to_class: "b".into(),
                    clmp: c,
                    degenerate: false,
                    pair_entropy: s,
                })
                .collect(),
        };
        let linear = mk(vec![(1.0, 0.1), (2.0, 0.2), (3.0, 0.3), (4.0, 0.4)]);
        assert!((eci(&linear).unwrap() - 1.0).abs() < 1e-12);
        let constant = mk(vec![(1.0, 0.5), (2.0, 0.5), (3.0, 0.5)]);
        assert_eq!(eci(&constant), None);
    }
}
