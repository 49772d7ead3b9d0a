//! Read-only lookup of conditional latent quantities for a frozen model.
//!
//! With seven binary visibles there are only 128 distinct conditional states,
//! so every quantity downstream code needs is computed once per pattern.

use rayon::prelude::*;

use crate::entanglement::{partial_trace, purity, von_neumann_entropy, Bipartition};
use crate::error::Result;
use crate::qbm::{
    conditional_state, mean_field_state, visible_from_index, visible_index, QbmModel, VisibleBits,
};
use crate::trajgen::N_FEATURES;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderMode {
    Exact,
    MeanField,
}

#[derive(Clone, Debug)]
struct PatternState {
    entropy: f64,
    reduced_purity: f64,
    expectations: Vec<f64>,
    basis_probs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Encoder {
    mode: EncoderMode,
    n_hidden: usize,
    partition: Bipartition,
    table: Vec<PatternState>,
}

impl Encoder {
    /// Exact for `n_hidden <= 10`, mean-field above.
    pub fn new(model: &QbmModel) -> Result<Self> {
        let mode = if model.is_exact() {
            EncoderMode::Exact
        } else {
            EncoderMode::MeanField
        };
        Self::with_mode(model, mode)
    }

    pub fn with_mode(model: &QbmModel, mode: EncoderMode) -> Result<Self> {
        let partition = Bipartition::half(model.n_hidden())?;
        Self::with_partition(model, mode, partition)
    }

    pub fn with_partition(model: &QbmModel, mode: EncoderMode, partition: Bipartition) -> Result<Self> {
        model.params.validate()?;
        let n_patterns = 1usize << N_FEATURES;
        let table = (0..n_patterns)
            .into_par_iter()
            .map(|idx| {
                let v = visible_from_index(idx);
                match mode {
                    EncoderMode::Exact => exact_pattern(model, &v, &partition),
                    EncoderMode::MeanField => Ok(mean_field_pattern(model, &v)),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mode,
            n_hidden: model.n_hidden(),
            partition,
            table,
        })
    }

    pub fn mode(&self) -> EncoderMode {
        self.mode
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn partition(&self) -> &Bipartition {
        &self.partition
    }

    fn state(&self, v: &VisibleBits) -> &PatternState {
        &self.table[visible_index(v)]
    }

    /// `S(ρ_A(v))` in nats.
    pub fn entropy(&self, v: &VisibleBits) -> f64 {
        self.state(v).entropy
    }

    /// `Tr ρ_A(v)²`.
    pub fn reduced_purity(&self, v: &VisibleBits) -> f64 {
        self.state(v).reduced_purity
    }

    /// `Tr(ρ(v) Z_j)` for every hidden site.
    pub fn expectations(&self, v: &VisibleBits) -> &[f64] {
        &self.state(v).expectations
    }

    /// Computational-basis distribution of the hidden state.
    pub fn basis_probabilities(&self, v: &VisibleBits) -> &[f64] {
        &self.state(v).basis_probs
    }
}

fn exact_pattern(model: &QbmModel, v: &VisibleBits, part: &Bipartition) -> Result<PatternState> {
    let rho = conditional_state(model, v)?;
    let reduced = partial_trace(&rho, part)?;
    Ok(PatternState {
        entropy: von_neumann_entropy(&reduced)?,
        reduced_purity: purity(&reduced),
        expectations: (0..model.n_hidden()).map(|j| rho.z_expectation(j)).collect(),
        basis_probs: rho.diagonal_probabilities().iter().map(|p| p.max(0.0)).collect(),
    })
}

fn mean_field_pattern(model: &QbmModel, v: &VisibleBits) -> PatternState {
    let product = mean_field_state(model, v);
    // basis distribution is only materialized while it stays small
    let basis_probs = if model.n_hidden() <= 16 {
        product.state_vector().iter().map(|z| z.norm_sqr()).collect()
    } else {
        Vec::new()
    };
    PatternState {
        entropy: product.entanglement_entropy(),
        reduced_purity: 1.0,
        expectations: product.z_expectations(),
        basis_probs,
    }
}
