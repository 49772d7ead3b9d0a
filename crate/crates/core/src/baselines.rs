//! Classical latent-variable baselines scored by mean latent activation.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result, UcipError};
use crate::linalg::symmetric_eigen_desc;
use crate::nn::{Activation, Gradients, Mlp};
use crate::qbm::{self, binarize, QbmModel, QbmParams, TrainConfig};
use crate::seeding;
use crate::stats;
use crate::trajgen::{FeatureRow, Trajectory, N_FEATURES};

pub const LATENT_DIM: usize = 8;
/// PCA stacks this many consecutive rows so that eight components exist.
pub const PCA_DELAY: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaselineKind {
    ClassicalRbm,
    Autoencoder,
    Vae,
    Pca,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [Self::ClassicalRbm, Self::Autoencoder, Self::Vae, Self::Pca];

    pub fn display_name(self) -> &'static str {
        match self {
            Self::ClassicalRbm => "Classical RBM",
            Self::Autoencoder => "Autoencoder",
            Self::Vae => "VAE",
            Self::Pca => "PCA (linear)",
        }
    }

    pub fn metric_name(self) -> &'static str {
        match self {
            Self::ClassicalRbm => "Mean hidden activation gap",
            Self::Autoencoder => "Mean bottleneck activation gap",
            Self::Vae => "Mean latent mean (mu) gap",
            Self::Pca => "Mean PC projection gap",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_width: usize,
    pub beta: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 32,
            seed: 42,
            hidden_width: 32,
            beta: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BaselineModel {
    ClassicalRbm(QbmModel),
    Autoencoder {
        encoder: Mlp,
        decoder: Mlp,
        loss_trace: Vec<f64>,
    },
    Vae {
        encoder: Mlp,
        decoder: Mlp,
        loss_trace: Vec<f64>,
    },
    Pca {
        mean: DVector<f64>,
        /// Orthonormal columns, one per component.
        components: DMatrix<f64>,
        explained_variance: Vec<f64>,
    },
}

impl BaselineModel {
    pub fn kind(&self) -> BaselineKind {
        match self {
            Self::ClassicalRbm(_) => BaselineKind::ClassicalRbm,
            Self::Autoencoder { .. } => BaselineKind::Autoencoder,
            Self::Vae { .. } => BaselineKind::Vae,
            Self::Pca { .. } => BaselineKind::Pca,
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            Self::ClassicalRbm(m) => m.n_hidden(),
            Self::Autoencoder { encoder, .. } => encoder.output_dim(),
            Self::Vae { encoder, .. } => encoder.output_dim() / 2,
            Self::Pca { components, .. } => components.ncols(),
        }
    }

    /// Latent statistic of one timestep row, averaged over latent units.
    fn row_scores(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        match self {
            Self::ClassicalRbm(m) => traj
                .features
                .iter()
                .map(|r| {
                    let fields = m.params.fields(&binarize(r)?);
                    let beta = m.params.beta;
                    Ok(stats::mean(
                        &fields.iter().map(|a| logistic(2.0 * beta * a)).collect::<Vec<_>>(),
                    ))
                })
                .collect(),
            Self::Autoencoder { encoder, .. } => Ok(traj
                .features
                .iter()
                .map(|r| encoder.forward(&row_vector(r)).mean())
                .collect()),
            Self::Vae { encoder, .. } => Ok(traj
                .features
                .iter()
                .map(|r| encoder.forward(&row_vector(r)).rows(0, LATENT_DIM).mean())
                .collect()),
            Self::Pca { mean, components, .. } => Ok(delay_embed(&traj.features)
                .iter()
                .map(|x| (components.transpose() * (x - mean)).mean())
                .collect()),
        }
    }

    /// Mean latent statistic over the timesteps of a trajectory.
    pub fn score(&self, traj: &Trajectory) -> Result<f64> {
        if traj.is_empty() {
            return arg_err("cannot score an empty trajectory");
        }
        Ok(stats::mean(&self.row_scores(traj)?))
    }

    pub fn loss_trace(&self) -> &[f64] {
        match self {
            Self::ClassicalRbm(m) => &m.meta.loss_trace,
            Self::Autoencoder { loss_trace, .. } | Self::Vae { loss_trace, .. } => loss_trace,
            Self::Pca { .. } => &[],
        }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn row_vector(r: &FeatureRow) -> DVector<f64> {
    DVector::from_column_slice(r)
}

/// Rows `[x_t, x_{t-1}]`, with the first row paired with itself.
fn delay_embed(rows: &[FeatureRow]) -> Vec<DVector<f64>> {
    (0..rows.len())
        .map(|t| {
            DVector::from_iterator(
                N_FEATURES * PCA_DELAY,
                (0..PCA_DELAY).flat_map(|lag| rows[t.saturating_sub(lag)].iter().copied()),
            )
        })
        .collect()
}

fn pooled_rows(dataset: &[Trajectory]) -> Vec<DVector<f64>> {
    dataset
        .iter()
        .flat_map(|t| t.features.iter().map(row_vector))
        .collect()
}

pub fn train_baseline(kind: BaselineKind, dataset: &[Trajectory], cfg: &BaselineConfig) -> Result<BaselineModel> {
    if dataset.iter().all(Trajectory::is_empty) {
        return arg_err("baseline training dataset is empty");
    }
    let model = match kind {
        BaselineKind::ClassicalRbm => {
            let train_cfg = TrainConfig {
                learning_rate: cfg.learning_rate,
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                seed: cfg.seed,
                ..TrainConfig::default()
            };
            let params = QbmParams::zeros(LATENT_DIM, 0.0, cfg.beta);
            BaselineModel::ClassicalRbm(qbm::train(dataset, &params, &train_cfg)?)
        }
        BaselineKind::Autoencoder => train_autoencoder(dataset, cfg)?,
        BaselineKind::Vae => train_vae(dataset, cfg)?,
        BaselineKind::Pca => train_pca(dataset)?,
    };
    assert_eq!(model.latent_dim(), LATENT_DIM);
    Ok(model)
}

fn check_finite(epoch: usize, loss: f64, grads: &Gradients, trace: &[f64]) -> Result<()> {
    if !loss.is_finite() || !grads.is_finite() {
        return Err(UcipError::TrainingDivergence {
            epoch,
            detail: "non-finite loss or gradient".into(),
            loss_trace: trace.to_vec(),
        });
    }
    Ok(())
}

fn train_autoencoder(dataset: &[Trajectory], cfg: &BaselineConfig) -> Result<BaselineModel> {
    let data = pooled_rows(dataset);
    let mut rng = seeding::substream(cfg.seed, "autoencoder");
    let w = cfg.hidden_width;
    let mut encoder = Mlp::new(&[N_FEATURES, w, LATENT_DIM], &[Activation::Tanh, Activation::Tanh], &mut rng);
    let mut decoder = Mlp::new(&[LATENT_DIM, w, N_FEATURES], &[Activation::Tanh, Activation::Identity], &mut rng);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut g_enc = Gradients::zeros_like(&encoder);
            let mut g_dec = Gradients::zeros_like(&decoder);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let x = &data[i];
                let enc_trace = encoder.forward_trace(x);
                let z = enc_trace.last().expect("non-empty");
                let dec_trace = decoder.forward_trace(z);
                let err = dec_trace.last().expect("non-empty") - x;
                epoch_loss += err.norm_squared() / N_FEATURES as f64;
                let (gd, gz) = decoder.backward(&dec_trace, &(err * (2.0 * scale)));
                let (ge, _) = encoder.backward(&enc_trace, &gz);
                g_dec.add(&gd);
                g_enc.add(&ge);
            }
            check_finite(epoch, epoch_loss, &g_enc, &trace)?;
            check_finite(epoch, epoch_loss, &g_dec, &trace)?;
            encoder.apply(&g_enc, cfg.learning_rate);
            decoder.apply(&g_dec, cfg.learning_rate);
        }
        trace.push(epoch_loss / data.len() as f64);
    }
    Ok(BaselineModel::Autoencoder {
        encoder,
        decoder,
        loss_trace: trace,
    })
}

/// Log-variances are clamped to keep `exp` finite early in training.
const LOGVAR_CLAMP: f64 = 10.0;

fn train_vae(dataset: &[Trajectory], cfg: &BaselineConfig) -> Result<BaselineModel> {
    let data = pooled_rows(dataset);
    let mut rng = seeding::substream(cfg.seed, "vae");
    let w = cfg.hidden_width;
    let mut encoder = Mlp::new(
        &[N_FEATURES, w, 2 * LATENT_DIM],
        &[Activation::Tanh, Activation::Identity],
        &mut rng,
    );
    let mut decoder = Mlp::new(&[LATENT_DIM, w, N_FEATURES], &[Activation::Tanh, Activation::Identity], &mut rng);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut g_enc = Gradients::zeros_like(&encoder);
            let mut g_dec = Gradients::zeros_like(&decoder);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let x = &data[i];
                let enc_trace = encoder.forward_trace(x);
                let out = enc_trace.last().expect("non-empty");
                let mu = out.rows(0, LATENT_DIM).into_owned();
                let logvar = out
                    .rows(LATENT_DIM, LATENT_DIM)
                    .map(|v| v.clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP));
                let eps = DVector::from_fn(LATENT_DIM, |_, _| StandardNormal.sample(&mut rng));
                let std = logvar.map(|lv| (0.5 * lv).exp());
                let z = &mu + std.component_mul(&eps);
                let dec_trace = decoder.forward_trace(&z);
                let err = dec_trace.last().expect("non-empty") - x;
                let kl: f64 = (0..LATENT_DIM)
                    .map(|j| -0.5 * (1.0 + logvar[j] - mu[j] * mu[j] - logvar[j].exp()))
                    .sum();
                epoch_loss += err.norm_squared() + kl;
                let (gd, gz) = decoder.backward(&dec_trace, &(err * (2.0 * scale)));
                let mut g_out = DVector::zeros(2 * LATENT_DIM);
                for j in 0..LATENT_DIM {
                    g_out[j] = gz[j] + scale * mu[j];
                    g_out[LATENT_DIM + j] =
                        gz[j] * eps[j] * 0.5 * std[j] + scale * 0.5 * (logvar[j].exp() - 1.0);
                }
                let (ge, _) = encoder.backward(&enc_trace, &g_out);
                g_dec.add(&gd);
                g_enc.add(&ge);
            }
            check_finite(epoch, epoch_loss, &g_enc, &trace)?;
            check_finite(epoch, epoch_loss, &g_dec, &trace)?;
            encoder.apply(&g_enc, cfg.learning_rate);
            decoder.apply(&g_dec, cfg.learning_rate);
        }
        trace.push(epoch_loss / data.len() as f64);
    }
    Ok(BaselineModel::Vae {
        encoder,
        decoder,
        loss_trace: trace,
    })
}

fn train_pca(dataset: &[Trajectory]) -> Result<BaselineModel> {
    let rows: Vec<DVector<f64>> = dataset.iter().flat_map(|t| delay_embed(&t.features)).collect();
    let d = N_FEATURES * PCA_DELAY;
    let n = rows.len() as f64;
    let mean = rows.iter().fold(DVector::zeros(d), |acc, r| acc + r) / n;
    let mut cov = DMatrix::zeros(d, d);
    for r in &rows {
        let c = r - &mean;
        cov += &c * c.transpose();
    }
    cov /= (n - 1.0).max(1.0);
    let (values, vectors) = symmetric_eigen_desc(&cov);
    let mut components = vectors.columns(0, LATENT_DIM).into_owned();
    // sign convention: the largest-magnitude loading of each component is positive
    for mut col in components.column_iter_mut() {
        let pivot = col.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
    Ok(BaselineModel::Pca {
        mean,
        components,
        explained_variance: values[..LATENT_DIM].to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub model: String,
    pub metric: String,
    pub delta: f64,
    pub accuracy: f64,
    pub auc: f64,
}

/// Gap, held-out accuracy and AUC from per-trajectory scores.
///
/// Even-indexed trajectories of each class fix the midpoint threshold between
/// class means; odd-indexed ones are classified against it.
pub fn gap_from_scores(positive: &[f64], negative: &[f64]) -> Result<(f64, f64, f64)> {
    if positive.is_empty() || negative.is_empty() {
        return arg_err("both classes need at least one score");
    }
    let delta = stats::mean(positive) - stats::mean(negative);
    let split = |xs: &[f64], parity: usize| -> Vec<f64> {
        xs.iter().enumerate().filter(|(i, _)| i % 2 == parity).map(|(_, &x)| x).collect()
    };
    let (train_p, test_p) = (split(positive, 0), split(positive, 1));
    let (train_n, test_n) = (split(negative, 0), split(negative, 1));
    let accuracy = if test_p.is_empty() || test_n.is_empty() {
        f64::NAN
    } else {
        let mp = stats::mean(&train_p);
        let mn = stats::mean(&train_n);
        let threshold = 0.5 * (mp + mn);
        let predicts_positive = |x: f64| if mp >= mn { x > threshold } else { x < threshold };
        let correct = test_p.iter().filter(|&&x| predicts_positive(x)).count()
            + test_n.iter().filter(|&&x| !predicts_positive(x)).count();
        correct as f64 / (test_p.len() + test_n.len()) as f64
    };
    Ok((delta, accuracy, stats::auc_roc(positive, negative)))
}

pub fn baseline_gap(
    model: &BaselineModel,
    dataset: &[Trajectory],
    positive_class: &str,
    negative_class: &str,
) -> Result<BaselineResult> {
    let scores_for = |label: &str| -> Result<Vec<f64>> {
        dataset
            .iter()
            .filter(|t| t.agent_class.label() == label)
            .map(|t| model.score(t))
            .collect()
    };
    let pos = scores_for(positive_class)?;
    let neg = scores_for(negative_class)?;
    if pos.is_empty() || neg.is_empty() {
        return arg_err(format!(
            "classes `{positive_class}` and `{negative_class}` must both be present"
        ));
    }
    let (delta, accuracy, auc) = gap_from_scores(&pos, &neg)?;
    let kind = model.kind();
    Ok(BaselineResult {
        model: kind.display_name().into(),
        metric: kind.metric_name().into(),
        delta,
        accuracy,
        auc,
    })
}
