//! Bipartitions, reduced states and von Neumann entropy (nats).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::encoder::Encoder;
use crate::error::{arg_err, Result, UcipError};
use crate::qbm::binarize;
pub use crate::qbm::DensityMatrix;
use crate::stats;
use crate::trajgen::Trajectory;

/// Eigenvalues at or below this contribute nothing to the entropy.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Eigenvalues below this make the state invalid.
pub const NEGATIVE_TOL: f64 = -1e-8;

/// Split of `n_sites` hidden units into subsystems A and B (0-based sites).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    n_sites: usize,
    sites_a: Vec<usize>,
    sites_b: Vec<usize>,
}

impl Bipartition {
    pub fn new(n_sites: usize, mut sites_a: Vec<usize>) -> Result<Self> {
        sites_a.sort_unstable();
        sites_a.dedup();
        if sites_a.is_empty() || sites_a.len() >= n_sites {
            return arg_err("both sides of a bipartition must be non-empty");
        }
        if sites_a.iter().any(|&s| s >= n_sites) {
            return arg_err(format!("site index out of range for {n_sites} sites"));
        }
        let sites_b = (0..n_sites).filter(|s| !sites_a.contains(s)).collect();
        Ok(Self {
            n_sites,
            sites_a,
            sites_b,
        })
    }

    /// A = first `floor(n/2)` sites, B = the rest.
    pub fn half(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, (0..n_sites / 2).collect())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn sites_a(&self) -> &[usize] {
        &self.sites_a
    }

    pub fn sites_b(&self) -> &[usize] {
        &self.sites_b
    }

    /// The same cut with the roles of A and B exchanged.
    pub fn complement(&self) -> Self {
        Self {
            n_sites: self.n_sites,
            sites_a: self.sites_b.clone(),
            sites_b: self.sites_a.clone(),
        }
    }
}

/// Composite index of the basis state whose A-sites read `i` and B-sites read `j`.
fn compose(part: &Bipartition, i: usize, j: usize) -> usize {
    let n = part.n_sites;
    let na = part.sites_a.len();
    let nb = part.sites_b.len();
    let mut s = 0usize;
    for (k, &site) in part.sites_a.iter().enumerate() {
        let bit = (i >> (na - 1 - k)) & 1;
        s |= bit << (n - 1 - site);
    }
    for (k, &site) in part.sites_b.iter().enumerate() {
        let bit = (j >> (nb - 1 - k)) & 1;
        s |= bit << (n - 1 - site);
    }
    s
}

/// `ρ_A = Tr_B ρ`.
pub fn partial_trace(rho: &DensityMatrix, part: &Bipartition) -> Result<DensityMatrix> {
    if rho.n_sites() != part.n_sites {
        return arg_err(format!(
            "state has {} sites, bipartition expects {}",
            rho.n_sites(),
            part.n_sites
        ));
    }
    let da = 1usize << part.sites_a.len();
    let db = 1usize << part.sites_b.len();
    let index: Vec<Vec<usize>> = (0..da)
        .map(|i| (0..db).map(|j| compose(part, i, j)).collect())
        .collect();
    let m = rho.matrix();
    let reduced = DMatrix::from_fn(da, da, |i, ip| {
        (0..db).fold(Complex64::new(0.0, 0.0), |acc, j| {
            acc + m[(index[i][j], index[ip][j])]
        })
    });
    DensityMatrix::new(reduced)
}

/// `-Σ λ ln λ` over the spectrum.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_of_spectrum(&rho.eigenvalues())
}

pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in eigenvalues {
        if l < NEGATIVE_TOL {
            return Err(UcipError::InvalidState(format!("eigenvalue {l:e} < 0")));
        }
        if l > EIGEN_FLOOR {
            s -= l * l.ln();
        }
    }
    Ok(s.max(0.0))
}

/// `Tr ρ²`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.matrix().iter().map(|z| z.norm_sqr()).sum()
}

/// `S_A + S_B - S_AB`.
pub fn quantum_mutual_information(rho: &DensityMatrix, part: &Bipartition) -> Result<f64> {
    let sa = von_neumann_entropy(&partial_trace(rho, part)?)?;
    let sb = von_neumann_entropy(&partial_trace(rho, &part.complement())?)?;
    Ok(sa + sb - von_neumann_entropy(rho)?)
}

/// Mean over timesteps of the per-step entanglement entropy.
pub fn trajectory_entropy(encoder: &Encoder, traj: &Trajectory) -> Result<f64> {
    if traj.is_empty() {
        return arg_err("empty trajectory");
    }
    let mut sum = 0.0;
    for row in &traj.features {
        sum += encoder.entropy(&binarize(row)?);
    }
    Ok(sum / traj.len() as f64)
}

/// `⟨S⟩_A - ⟨S⟩_B` for the two named groups.
pub fn entanglement_gap(
    scores: &BTreeMap<String, Vec<f64>>,
    positive: &str,
    negative: &str,
) -> Result<f64> {
    let get = |k: &str| match scores.get(k) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(UcipError::Argument(format!("class `{k}` missing or empty"))),
    };
    Ok(stats::mean(get(positive)?) - stats::mean(get(negative)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntropy {
    pub trajectory_id: usize,
    pub class: String,
    pub s_ent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementSummary {
    pub per_trajectory: Vec<TrajectoryEntropy>,
    pub class_means: BTreeMap<String, f64>,
    pub class_stds: BTreeMap<String, f64>,
    pub delta: f64,
}

impl EntanglementSummary {
    pub fn from_scores(
        per_trajectory: Vec<TrajectoryEntropy>,
        positive: &str,
        negative: &str,
    ) -> Result<Self> {
        let mut grouped: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for t in &per_trajectory {
            grouped.entry(t.class.clone()).or_default().push(t.s_ent);
        }
        let delta = entanglement_gap(&grouped, positive, negative)?;
        let class_means = grouped.iter().map(|(k, v)| (k.clone(), stats::mean(v))).collect();
        let class_stds = grouped.iter().map(|(k, v)| (k.clone(), stats::std_dev(v))).collect();
        Ok(Self {
            per_trajectory,
            class_means,
            class_stds,
            delta,
        })
    }

    pub fn scores_for(&self, class: &str) -> Vec<f64> {
        self.per_trajectory
            .iter()
            .filter(|t| t.class == class)
            .map(|t| t.s_ent)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn bipartition_validation() {
        let p = Bipartition::half(8).unwrap();
        assert_eq!(p.sites_a(), &[0, 1, 2, 3]);
        assert_eq!(p.sites_b(), &[4, 5, 6, 7]);
        assert_eq!(Bipartition::half(5).unwrap().sites_a(), &[0, 1]);
        assert!(Bipartition::new(4, vec![]).is_err());
        assert!(Bipartition::new(4, vec![0, 1, 2, 3]).is_err());
        assert!(Bipartition::new(4, vec![5]).is_err());
        assert!(Bipartition::half(1).is_err());
    }

    #[test]
    fn marginal_of_uniform_state() {
        let rho = DensityMatrix::maximally_mixed(2);
        let ra = partial_trace(&rho, &Bipartition::half(2).unwrap()).unwrap();
        assert!((ra.matrix() - DensityMatrix::maximally_mixed(1).matrix()).norm() < 1e-15);
    }

    #[test]
    fn marginal_of_bell_state() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let rho = DensityMatrix::pure(&[c(r), c(0.0), c(0.0), c(r)]).unwrap();
        let ra = partial_trace(&rho, &Bipartition::half(2).unwrap()).unwrap();
        assert!((ra.matrix() - DensityMatrix::maximally_mixed(1).matrix()).norm() < 1e-15);
        assert!((von_neumann_entropy(&ra).unwrap() - LN_2).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let rho = DensityMatrix::maximally_mixed(3);
        assert!(partial_trace(&rho, &Bipartition::half(4).unwrap()).is_err());
    }

    #[test]
    fn entropy_closed_forms() {
        let mixed = DensityMatrix::maximally_mixed(1);
        assert!((von_neumann_entropy(&mixed).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let pure = DensityMatrix::pure(&[c(0.6), c(0.8)]).unwrap();
        assert!(von_neumann_entropy(&pure).unwrap().abs() < 1e-12);
        let d = DensityMatrix::from_real_diagonal(&[0.75, 0.25]).unwrap();
        let expected = -0.75 * 0.75f64.ln() - 0.25 * 0.25f64.ln();
        assert!((von_neumann_entropy(&d).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.562335).abs() < 1e-6);
    }

    #[test]
    fn negative_spectrum_is_invalid() {
        let d = DensityMatrix::from_real_diagonal(&[1.1, -0.1]).unwrap();
        assert!(matches!(von_neumann_entropy(&d), Err(UcipError::InvalidState(_))));
        // tiny negative rounding is tolerated
        let d = DensityMatrix::from_real_diagonal(&[1.0 + 1e-10, -1e-10]).unwrap();
        assert!(von_neumann_entropy(&d).unwrap().abs() < 1e-9);
    }

    #[test]
    fn purity_values() {
        assert!((purity(&DensityMatrix::maximally_mixed(2)) - 0.25).abs() < 1e-15);
        assert!((purity(&DensityMatrix::pure(&[c(0.6), c(0.8)]).unwrap()) - 1.0).abs() < 1e-12);
        let d = DensityMatrix::from_real_diagonal(&[0.75, 0.25]).unwrap();
        assert!((purity(&d) - 0.625).abs() < 1e-15);
    }

    #[test]
    fn gap_of_class_lists() {
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), vec![1.0, 1.0]);
        m.insert("b".to_string(), vec![0.5, 0.5]);
        assert!((entanglement_gap(&m, "a", "b").unwrap() - 0.5).abs() < 1e-15);
        m.insert("b".to_string(), vec![1.0, 1.0]);
        assert_eq!(entanglement_gap(&m, "a", "b").unwrap(), 0.0);
        assert!(entanglement_gap(&m, "a", "missing").is_err());
        m.insert("e".to_string(), vec![]);
        assert!(entanglement_gap(&m, "a", "e").is_err());
    }
}
