//! Classically simulated quantum Boltzmann machine.
//!
//! Hidden units are spin-½ sites with Pauli operators `Z_j`, `X_j`
//! (eigenvalues ±1). Conditioned on a binary visible vector `v`, the hidden
//! Hamiltonian is
//!
//! ```text
//! H(v) = -Σ_j a_j(v) Z_j - Γ Σ_j X_j,     a_j(v) = Σ_i W_ij v_i + c_j
//! ```
//!
//! and the conditional state is the Gibbs state `exp(-βH) / Tr exp(-βH)`.
//! Composite basis states are indexed with site 0 as the most significant
//! bit; bit value 0 is spin up (`Z = +1`).
//!
//! Weights are learned with classical CD on binarized timesteps; the
//! transverse field only enters at evaluation. Visible biases exist for
//! training and are ignored by `H(v)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result, UcipError};
use crate::linalg;
use crate::seeding;
use crate::trajgen::{Trajectory, N_FEATURES};

/// Exact density matrices are built up to `2^10 = 1024` dimensions.
pub const MAX_EXACT_HIDDEN: usize = 10;

const HERMITIAN_TOL: f64 = 1e-10;

pub type VisibleBits = [u8; N_FEATURES];

/// `bit_i = 1` iff `feature_i >= 0.5`.
pub fn binarize(features: &[f64]) -> Result<VisibleBits> {
    if features.len() != N_FEATURES {
        return arg_err(format!(
            "expected {N_FEATURES} features, got {}",
            features.len()
        ));
    }
    let mut bits = [0u8; N_FEATURES];
    for (i, &f) in features.iter().enumerate() {
        if !(0.0..=1.0).contains(&f) {
            return arg_err(format!("feature {i} = {f} outside [0,1]"));
        }
        bits[i] = u8::from(f >= 0.5);
    }
    Ok(bits)
}

/// Index of a visible pattern in `0..2^7`, feature 0 most significant.
pub fn visible_index(bits: &VisibleBits) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

pub fn visible_from_index(index: usize) -> VisibleBits {
    let mut bits = [0u8; N_FEATURES];
    for (i, b) in bits.iter_mut().enumerate() {
        *b = ((index >> (N_FEATURES - 1 - i)) & 1) as u8;
    }
    bits
}

/// Spin value (`+1`/`-1`) of `site` in basis state `state`.
#[inline]
pub fn spin(state: usize, site: usize, n_sites: usize) -> f64 {
    if (state >> (n_sites - 1 - site)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QbmParams {
    pub n_visible: usize,
    pub n_hidden: usize,
    /// `n_visible × n_hidden`.
    pub weights: DMatrix<f64>,
    pub hidden_bias: DVector<f64>,
    pub visible_bias: DVector<f64>,
    pub gamma: f64,
    pub beta: f64,
}

impl QbmParams {
    /// Zero parameters of the given shape.
    pub fn zeros(n_hidden: usize, gamma: f64, beta: f64) -> Self {
        Self {
            n_visible: N_FEATURES,
            n_hidden,
            weights: DMatrix::zeros(N_FEATURES, n_hidden),
            hidden_bias: DVector::zeros(n_hidden),
            visible_bias: DVector::zeros(N_FEATURES),
            gamma,
            beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_hidden == 0 {
            return Err(UcipError::Config("n_hidden must be positive".into()));
        }
        if self.weights.shape() != (self.n_visible, self.n_hidden)
            || self.hidden_bias.len() != self.n_hidden
            || self.visible_bias.len() != self.n_visible
        {
            return Err(UcipError::Config("parameter shapes inconsistent".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(UcipError::Config(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(UcipError::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        let finite = self.weights.iter().all(|x| x.is_finite())
            && self.hidden_bias.iter().all(|x| x.is_finite())
            && self.visible_bias.iter().all(|x| x.is_finite());
        if !finite {
            return Err(UcipError::Config("non-finite parameters".into()));
        }
        Ok(())
    }

    /// Longitudinal fields `a_j(v)`.
    pub fn fields(&self, v: &VisibleBits) -> Vec<f64> {
        (0..self.n_hidden)
            .map(|j| {
                let wv: f64 = (0..self.n_visible)
                    .map(|i| self.weights[(i, j)] * v[i] as f64)
                    .sum();
                wv + self.hidden_bias[j]
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub cd_steps: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Final reconstruction loss must not exceed this for the run to count as converged.
    pub convergence_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            cd_steps: 1,
            epochs: 50,
            batch_size: 32,
            seed: 42,
            convergence_threshold: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.cd_steps == 0 || self.epochs == 0 || self.batch_size == 0
        {
            return Err(UcipError::Config("training hyperparameters must be positive".into()));
        }
        if self.convergence_threshold.is_nan() || self.convergence_threshold <= 0.0 {
            return Err(UcipError::Config("convergence_threshold must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: usize,
    pub final_loss: f64,
    pub converged: bool,
    pub loss_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QbmModel {
    pub params: QbmParams,
    pub meta: TrainMeta,
}

impl QbmModel {
    /// An untrained model wrapping fixed parameters.
    pub fn from_params(params: QbmParams) -> Self {
        Self {
            params,
            meta: TrainMeta {
                seed: 0,
                epochs: 0,
                final_loss: 0.0,
                converged: true,
                loss_trace: Vec::new(),
            },
        }
    }

    pub fn n_hidden(&self) -> usize {
        self.params.n_hidden
    }

    pub fn is_exact(&self) -> bool {
        self.params.n_hidden <= MAX_EXACT_HIDDEN
    }

    /// Copy with a different transverse field; weights are shared.
    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut m = self.clone();
        m.params.gamma = gamma;
        m
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Pooled binarized timesteps of every trajectory.
pub fn pooled_visible(dataset: &[Trajectory]) -> Result<Vec<VisibleBits>> {
    dataset
        .iter()
        .flat_map(|t| t.features.iter())
        .map(|row| binarize(row))
        .collect()
}

/// CD-k training on the pooled binarized timesteps.
///
/// Hidden spins are sampled with `p(h=+1|v) = σ(2β a(v))` and visibles
/// reconstructed with `p(v=1|h) = σ(2β (W h + b))`. The positive and negative
/// phases use the conditional spin means `tanh(β a)`; the negative phase uses
/// reconstruction probabilities rather than samples.
pub fn train(dataset: &[Trajectory], params: &QbmParams, cfg: &TrainConfig) -> Result<QbmModel> {
    if dataset.is_empty() {
        return arg_err("training dataset is empty");
    }
    params.validate()?;
    cfg.validate()?;
    let data: Vec<DVector<f64>> = pooled_visible(dataset)?
        .iter()
        .map(|bits| DVector::from_iterator(N_FEATURES, bits.iter().map(|&b| b as f64)))
        .collect();
    if data.is_empty() {
        return arg_err("training dataset has no timesteps");
    }

    let beta = params.beta;
    let n_h = params.n_hidden;
    let mut rng = seeding::substream(cfg.seed, "qbm-train");
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut w = DMatrix::from_fn(N_FEATURES, n_h, |_, _| init.sample(&mut rng));
    let mut b = params.visible_bias.clone();
    let mut c = params.hidden_bias.clone();

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let m = batch.len() as f64;
            let mut grad_w = DMatrix::<f64>::zeros(N_FEATURES, n_h);
            let mut grad_b = DVector::<f64>::zeros(N_FEATURES);
            let mut grad_c = DVector::<f64>::zeros(n_h);
            for &idx in batch {
                let v0 = &data[idx];
                let a0 = w.tr_mul(v0) + &c;
                let mean_h0 = a0.map(|a| (beta * a).tanh());
                let mut h = a0.map(|a| spin_sample(&mut rng, a, beta));
                let mut recon = DVector::zeros(N_FEATURES);
                let mut v_neg = v0.clone();
                for step in 0..cfg.cd_steps {
                    recon = (&w * &h + &b).map(|x| logistic(2.0 * beta * x));
                    v_neg = recon.clone();
                    if step + 1 < cfg.cd_steps {
                        let v_sample = recon.map(|p| f64::from(rng.random::<f64>() < p));
                        let a = w.tr_mul(&v_sample) + &c;
                        h = a.map(|a| spin_sample(&mut rng, a, beta));
                    }
                }
                let a1 = w.tr_mul(&v_neg) + &c;
                let mean_h1 = a1.map(|a| (beta * a).tanh());
                grad_w += v0 * mean_h0.transpose() - &v_neg * mean_h1.transpose();
                grad_b += v0 - &v_neg;
                grad_c += &mean_h0 - &mean_h1;
                loss_sum += (v0 - &recon).norm_squared() / N_FEATURES as f64;
            }
            w += grad_w * (cfg.learning_rate / m);
            b += grad_b * (cfg.learning_rate / m);
            c += grad_c * (cfg.learning_rate / m);
        }
        let loss = loss_sum / data.len() as f64;
        trace.push(loss);
        let finite = loss.is_finite()
            && w.iter().all(|x| x.is_finite())
            && b.iter().all(|x| x.is_finite())
            && c.iter().all(|x| x.is_finite());
        if !finite {
            return Err(UcipError::TrainingDivergence {
                epoch,
                detail: "non-finite parameters or loss".into(),
                loss_trace: trace,
            });
        }
    }

    let final_loss = *trace.last().expect("at least one epoch");
    Ok(QbmModel {
        params: QbmParams {
            n_visible: N_FEATURES,
            n_hidden: n_h,
            weights: w,
            hidden_bias: c,
            visible_bias: b,
            gamma: params.gamma,
            beta,
        },
        meta: TrainMeta {
            seed: cfg.seed,
            epochs: cfg.epochs,
            final_loss,
            converged: final_loss <= cfg.convergence_threshold,
            loss_trace: trace,
        },
    })
}

fn spin_sample<R: Rng>(rng: &mut R, a: f64, beta: f64) -> f64 {
    if rng.random::<f64>() < logistic(2.0 * beta * a) {
        1.0
    } else {
        -1.0
    }
}

/// `H = -Σ a_j Z_j - Γ Σ X_j` for explicit fields.
pub fn hamiltonian_from_fields(fields: &[f64], gamma: f64) -> DMatrix<Complex64> {
    let n = fields.len();
    let dim = 1usize << n;
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for s in 0..dim {
        let diag: f64 = fields
            .iter()
            .enumerate()
            .map(|(j, a)| -a * spin(s, j, n))
            .sum();
        h[(s, s)] = Complex64::new(diag, 0.0);
        for j in 0..n {
            let flipped = s ^ (1 << (n - 1 - j));
            h[(s, flipped)] = Complex64::new(-gamma, 0.0);
        }
    }
    h
}

/// Conditional hidden Hamiltonian `H(v)`.
pub fn hamiltonian(model: &QbmModel, v: &VisibleBits) -> Result<DMatrix<Complex64>> {
    let n_h = model.params.n_hidden;
    if n_h > MAX_EXACT_HIDDEN {
        return Err(UcipError::Capacity {
            got: n_h,
            max: MAX_EXACT_HIDDEN,
        });
    }
    Ok(hamiltonian_from_fields(&model.params.fields(v), model.params.gamma))
}

/// Hermitian, unit-trace, positive semidefinite operator on `n_sites` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_sites: usize,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Wraps a square matrix of dimension `2^n`. Validity is not checked;
    /// call [`DensityMatrix::validate`].
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim != matrix.ncols() || dim == 0 || !dim.is_power_of_two() {
            return arg_err(format!(
                "density matrix must be square with power-of-two dimension, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        Ok(Self {
            n_sites: dim.trailing_zeros() as usize,
            matrix,
        })
    }

    /// `|ψ⟩⟨ψ|` for a normalized state vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let norm = v.norm();
        if norm == 0.0 {
            return arg_err("zero state vector");
        }
        let v = v / Complex64::new(norm, 0.0);
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(n_sites: usize) -> Self {
        let dim = 1usize << n_sites;
        let m = DMatrix::<Complex64>::identity(dim, dim) / Complex64::new(dim as f64, 0.0);
        Self { n_sites, matrix: m }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        Self::new(DMatrix::from_diagonal(&d))
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Real diagonal: computational-basis probabilities.
    pub fn diagonal_probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    /// Hermitian, unit trace and PSD, all within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let defect = linalg::hermitian_defect(&self.matrix);
        if defect > tol {
            return Err(UcipError::InvalidState(format!("not Hermitian (defect {defect:e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(UcipError::InvalidState(format!("trace {tr} != 1")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -tol {
            return Err(UcipError::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `Tr(ρ Z_site)`.
    pub fn z_expectation(&self, site: usize) -> f64 {
        (0..self.dim())
            .map(|s| self.matrix[(s, s)].re * spin(s, site, self.n_sites))
            .sum()
    }
}

/// Gibbs state `exp(-βH) / Tr exp(-βH)` via eigendecomposition, with the
/// exponent shifted by the ground energy.
pub fn thermal_state(h: &DMatrix<Complex64>, beta: f64) -> Result<DensityMatrix> {
    if h.nrows() != h.ncols() {
        return arg_err("Hamiltonian must be square");
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return arg_err(format!("beta must be > 0, got {beta}"));
    }
    let scale = h.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    let defect = linalg::hermitian_defect(h);
    if defect > HERMITIAN_TOL * scale {
        return arg_err(format!("Hamiltonian not Hermitian (defect {defect:e})"));
    }
    if linalg::is_real(h) {
        return thermal_state_real(&h.map(|z| z.re), beta);
    }
    let (values, vectors) = linalg::hermitian_eigen(h);
    let weights = boltzmann_weights(&values, beta);
    let n = h.nrows();
    let mut scaled = vectors.clone();
    for (col, w) in weights.iter().enumerate() {
        let f = Complex64::new(*w, 0.0);
        for r in 0..n {
            scaled[(r, col)] *= f;
        }
    }
    let mut rho = scaled * vectors.adjoint();
    // symmetrize away rounding asymmetry
    let adj = rho.adjoint();
    rho = (rho + adj) * Complex64::new(0.5, 0.0);
    DensityMatrix::new(rho)
}

/// Normalized `exp(-β (E - E_0))` for ascending energies.
fn boltzmann_weights(values: &[f64], beta: f64) -> Vec<f64> {
    let ground = values[0];
    let weights: Vec<f64> = values.iter().map(|&e| (-beta * (e - ground)).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

fn thermal_state_real(h: &DMatrix<f64>, beta: f64) -> Result<DensityMatrix> {
    let (values, vectors) = linalg::symmetric_eigen_asc(h);
    let weights = boltzmann_weights(&values, beta);
    let mut scaled = vectors.clone();
    for (col, w) in weights.iter().enumerate() {
        scaled.column_mut(col).scale_mut(*w);
    }
    let rho = scaled * vectors.transpose();
    let sym = (&rho + rho.transpose()) * 0.5;
    DensityMatrix::new(sym.map(|x| Complex64::new(x, 0.0)))
}

/// Exact conditional state `ρ(v)`.
pub fn conditional_state(model: &QbmModel, v: &VisibleBits) -> Result<DensityMatrix> {
    thermal_state(&hamiltonian(model, v)?, model.params.beta)
}

/// Ground state of a single site `-a Z - Γ X`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiteState {
    /// Amplitudes on `|0⟩` (spin up) and `|1⟩`.
    pub amplitudes: [f64; 2],
    pub energy: f64,
}

impl SiteState {
    pub fn ground(field: f64, gamma: f64) -> Self {
        let theta = gamma.atan2(field);
        Self {
            amplitudes: [(theta / 2.0).cos(), (theta / 2.0).sin()],
            energy: -(field * field + gamma * gamma).sqrt(),
        }
    }

    /// `⟨Z⟩ = |α|² - |β|²`.
    pub fn z_expectation(&self) -> f64 {
        self.amplitudes[0].powi(2) - self.amplitudes[1].powi(2)
    }
}

/// Product of single-site ground states: valid for any `n_hidden`, carries
/// no bipartite entanglement.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    pub sites: Vec<SiteState>,
}

impl ProductState {
    /// A pure product state has zero entropy across every bipartition.
    pub fn entanglement_entropy(&self) -> f64 {
        0.0
    }

    pub fn z_expectations(&self) -> Vec<f64> {
        self.sites.iter().map(SiteState::z_expectation).collect()
    }

    /// Dense state vector; only sensible for small site counts.
    pub fn state_vector(&self) -> Vec<Complex64> {
        let n = self.sites.len();
        (0..1usize << n)
            .map(|s| {
                let amp: f64 = (0..n)
                    .map(|j| self.sites[j].amplitudes[(s >> (n - 1 - j)) & 1])
                    .product();
                Complex64::new(amp, 0.0)
            })
            .collect()
    }
}

pub fn mean_field_state(model: &QbmModel, v: &VisibleBits) -> ProductState {
    let gamma = model.params.gamma;
    ProductState {
        sites: model
            .params
            .fields(v)
            .into_iter()
            .map(|a| SiteState::ground(a, gamma))
            .collect(),
    }
}

/// `m_j = Tr(ρ(v) Z_j)`.
pub fn hidden_expectations(model: &QbmModel, v: &VisibleBits) -> Result<Vec<f64>> {
    let rho = conditional_state(model, v)?;
    Ok((0..model.params.n_hidden).map(|j| rho.z_expectation(j)).collect())
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    n_visible: usize,
    n_hidden: usize,
    #[serde(rename = "W")]
    weights: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    gamma: f64,
    beta: f64,
    train_meta: TrainMeta,
}

impl Serialize for QbmModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let p = &self.params;
        let weights = (0..p.n_visible)
            .flat_map(|i| (0..p.n_hidden).map(move |j| p.weights[(i, j)]))
            .collect();
        ModelRecord {
            n_visible: p.n_visible,
            n_hidden: p.n_hidden,
            weights,
            b: p.visible_bias.iter().copied().collect(),
            c: p.hidden_bias.iter().copied().collect(),
            gamma: p.gamma,
            beta: p.beta,
            train_meta: self.meta.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QbmModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ModelRecord::deserialize(d)?;
        if r.weights.len() != r.n_visible * r.n_hidden {
            return Err(serde::de::Error::custom("W length != n_visible * n_hidden"));
        }
        let params = QbmParams {
            n_visible: r.n_visible,
            n_hidden: r.n_hidden,
            weights: DMatrix::from_row_slice(r.n_visible, r.n_hidden, &r.weights),
            hidden_bias: DVector::from_vec(r.c),
            visible_bias: DVector::from_vec(r.b),
            gamma: r.gamma,
            beta: r.beta,
        };
        params.validate().map_err(serde::de::Error::custom)?;
        Ok(QbmModel {
            params,
            meta: r.train_meta,
        })
    }
}
