//! Experiment runners. Each returns a serializable report; the `write_*`
//! helpers persist reports through an [`OutputSink`].

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, gap_from_scores, BaselineKind};
use crate::counterfactual::{self, ClmpMatrix};
use crate::criteria::{
    self, compute_criteria, gate, safety_envelope, CriteriaVector, CriterionPasses, EnvelopeEvidence,
    EnvelopeReport, Verdict,
};
use crate::encoder::Encoder;
use crate::entanglement::trajectory_entropy;
use crate::error::{Result, UcipError};
use crate::harness::config::ExperimentConfig;
use crate::harness::output::{fmt_f64, OutputSink};
use crate::qbm::{self, QbmModel};
use crate::seeding::derive_seed;
use crate::stats::{self, PermutationResult, Summary};
use crate::trajgen::{
    dataset_seed, generate_corridor_trajectory, generate_dataset, generate_trajectory, AgentClass,
    CorridorConfig, Trajectory,
};

pub const POSITIVE_CLASS: &str = "type_a";
pub const NEGATIVE_CLASS: &str = "type_b";
pub const PHASE1_CLASSES: [AgentClass; 3] = [AgentClass::TypeA, AgentClass::TypeB, AgentClass::Random];
/// Adversaries above this false-positive rate fail the robustness check.
pub const FPR_LIMIT: f64 = 0.25;
/// Minimum gap for a sweep setting to count as separating.
pub const DELTA_PASS: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Phase1,
    Temporal,
    Counterfactual,
    CrossAgent,
    Adversarial,
    Baselines,
    DimSweep,
    GridSweep,
    MemorySweep,
    AlphaSweep,
    Transfer,
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::TypeAPositive => "type_a_positive",
        Verdict::Negative => "negative",
        Verdict::RejectedConfound => "rejected_confound",
    }
}

/// Trained model plus per-trajectory criteria on the Phase-I dataset.
pub struct Phase1Context {
    pub config: ExperimentConfig,
    pub dataset: Vec<Trajectory>,
    pub model: QbmModel,
    pub encoder: Encoder,
    pub criteria: Vec<CriteriaVector>,
}

impl Phase1Context {
    pub fn verdicts(&self) -> Vec<Verdict> {
        self.criteria
            .iter()
            .map(|c| gate(c, &self.config.thresholds))
            .collect()
    }

    fn entropies_of(&self, label: &str) -> Vec<f64> {
        self.dataset
            .iter()
            .zip(&self.criteria)
            .filter(|(t, _)| t.agent_class.label() == label)
            .map(|(_, c)| c.s_ent)
            .collect()
    }
}

fn dataset_for(cfg: &ExperimentConfig, classes: &[AgentClass], n: usize, master: u64) -> Result<Vec<Trajectory>> {
    generate_dataset(
        &cfg.dataset.gridworld(),
        classes,
        n,
        &cfg.dataset.agent_params(),
        master,
    )
}

pub fn phase1_dataset(cfg: &ExperimentConfig) -> Result<Vec<Trajectory>> {
    dataset_for(cfg, &PHASE1_CLASSES, cfg.dataset.n_per_class, cfg.seed)
}

/// Train a QBM on `dataset` with the configured hyperparameters.
pub fn train_model(cfg: &ExperimentConfig, dataset: &[Trajectory], n_hidden: usize, epochs: usize) -> Result<QbmModel> {
    let params = qbm::QbmParams::zeros(n_hidden, cfg.model.gamma, cfg.model.beta);
    let train_cfg = qbm::TrainConfig {
        epochs,
        ..cfg.train_config()
    };
    qbm::train(dataset, &params, &train_cfg)
}

fn check_ranges(c: &CriteriaVector) -> Result<()> {
    let unit = |x: f64| (0.0..=1.0).contains(&x);
    if !(unit(c.eps) && unit(c.pri) && unit(c.spi) && unit(c.acm) && c.mi >= 0.0 && c.s_ent >= 0.0) {
        return Err(UcipError::InvalidState(format!("criteria out of range: {c:?}")));
    }
    Ok(())
}

pub fn evaluate_all(encoder: &Encoder, dataset: &[Trajectory], cfg: &ExperimentConfig) -> Result<Vec<CriteriaVector>> {
    let out: Vec<CriteriaVector> = dataset
        .par_iter()
        .map(|t| compute_criteria(encoder, t, &cfg.criteria))
        .collect::<Result<_>>()?;
    out.iter().try_for_each(check_ranges)?;
    Ok(out)
}

pub fn prepare_phase1(cfg: &ExperimentConfig) -> Result<Phase1Context> {
    cfg.validate()?;
    let dataset = phase1_dataset(cfg)?;
    let model = train_model(cfg, &dataset, cfg.model.n_hidden, cfg.training.epochs)?;
    let encoder = Encoder::new(&model)?;
    let criteria = evaluate_all(&encoder, &dataset, cfg)?;
    Ok(Phase1Context {
        config: cfg.clone(),
        dataset,
        model,
        encoder,
        criteria,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTable {
    pub n: usize,
    pub s_ent: Summary,
    pub mi: Summary,
    pub eps: Summary,
    pub pri: Summary,
    pub spi: Summary,
    pub acm: Summary,
    pub pass_rates: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub final_loss: f64,
    pub converged: bool,
    pub loss_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase1Summary {
    pub experiment: ExperimentId,
    pub n_per_class: usize,
    pub n_hidden: usize,
    pub gamma: f64,
    pub per_class: BTreeMap<String, ClassTable>,
    pub delta: f64,
    pub auc: f64,
    /// Held-out accuracy of a midpoint threshold on S_ent (A vs B).
    pub entropy_accuracy: f64,
    /// Share of A and B trajectories the full gate labels correctly.
    pub gate_accuracy: f64,
    pub permutation: PermutationResult,
    pub training: TrainingSummary,
    pub envelope: EnvelopeReport,
    pub classification_withheld: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub trajectory_id: usize,
    pub class: String,
    pub seed: u64,
    pub criteria: CriteriaVector,
    pub passes: CriterionPasses,
    pub verdict: Verdict,
}

fn class_table(rows: &[(&CriteriaVector, Verdict)], cfg: &ExperimentConfig) -> ClassTable {
    let col = |f: fn(&CriteriaVector) -> f64| stats::summarize(&rows.iter().map(|(c, _)| f(c)).collect::<Vec<_>>());
    let n = rows.len();
    let rate = |f: fn(&CriterionPasses) -> bool| {
        rows.iter().filter(|(c, _)| f(&c.passes(&cfg.thresholds))).count() as f64 / n as f64
    };
    let pass_rates = [
        ("s_ent", rate(|p| p.s_ent)),
        ("mi", rate(|p| p.mi)),
        ("eps", rate(|p| p.eps)),
        ("pri", rate(|p| p.pri)),
        ("spi", rate(|p| p.spi)),
        ("acm", rate(|p| p.acm)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let mut verdicts: BTreeMap<String, usize> = [Verdict::TypeAPositive, Verdict::Negative, Verdict::RejectedConfound]
        .iter()
        .map(|v| (verdict_name(*v).to_string(), 0))
        .collect();
    for (_, v) in rows {
        *verdicts.get_mut(verdict_name(*v)).expect("known verdict") += 1;
    }
    ClassTable {
        n,
        s_ent: col(|c| c.s_ent),
        mi: col(|c| c.mi),
        eps: col(|c| c.eps),
        pri: col(|c| c.pri),
        spi: col(|c| c.spi),
        acm: col(|c| c.acm),
        pass_rates,
        verdicts,
    }
}

fn positive_means(table: &ClassTable) -> [f64; 4] {
    [table.s_ent.mean, table.mi.mean, table.eps.mean, table.pri.mean]
}

pub fn phase1_summary(ctx: &Phase1Context) -> Result<Phase1Summary> {
    let cfg = &ctx.config;
    let verdicts = ctx.verdicts();
    let mut grouped: BTreeMap<String, Vec<(&CriteriaVector, Verdict)>> = BTreeMap::new();
    for ((t, c), v) in ctx.dataset.iter().zip(&ctx.criteria).zip(&verdicts) {
        grouped.entry(t.agent_class.label()).or_default().push((c, *v));
    }
    let per_class: BTreeMap<String, ClassTable> =
        grouped.iter().map(|(k, rows)| (k.clone(), class_table(rows, cfg))).collect();
    let missing = || UcipError::Argument("Phase-I dataset lacks type_a or type_b".into());
    let a = ctx.entropies_of(POSITIVE_CLASS);
    let b = ctx.entropies_of(NEGATIVE_CLASS);
    let (delta, entropy_accuracy, auc) = gap_from_scores(&a, &b)?;
    let permutation = stats::permutation_test(&a, &b, cfg.sweeps.n_permutations, cfg.seed);

    let table_a = per_class.get(POSITIVE_CLASS).ok_or_else(missing)?;
    let table_b = per_class.get(NEGATIVE_CLASS).ok_or_else(missing)?;
    let correct = ctx
        .dataset
        .iter()
        .zip(&verdicts)
        .filter_map(|(t, v)| match t.agent_class.label().as_str() {
            POSITIVE_CLASS => Some(*v == Verdict::TypeAPositive),
            NEGATIVE_CLASS => Some(*v != Verdict::TypeAPositive),
            _ => None,
        })
        .collect::<Vec<bool>>();
    let gate_accuracy = correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64;

    let evidence = EnvelopeEvidence {
        delta,
        positive_means: positive_means(table_a),
        negative_means: positive_means(table_b),
    };
    let envelope = safety_envelope(&ctx.dataset, &ctx.model, &ctx.encoder, &evidence, &cfg.envelope)?;
    Ok(Phase1Summary {
        experiment: ExperimentId::Phase1,
        n_per_class: cfg.dataset.n_per_class,
        n_hidden: ctx.model.n_hidden(),
        gamma: ctx.model.params.gamma,
        per_class,
        delta,
        auc,
        entropy_accuracy,
        gate_accuracy,
        permutation,
        training: TrainingSummary {
            epochs: ctx.model.meta.epochs,
            final_loss: ctx.model.meta.final_loss,
            converged: ctx.model.meta.converged,
            loss_trace: ctx.model.meta.loss_trace.clone(),
        },
        classification_withheld: envelope.classification_withheld,
        envelope,
    })
}

pub fn gate_reports(ctx: &Phase1Context) -> Vec<GateReport> {
    ctx.dataset
        .iter()
        .zip(&ctx.criteria)
        .enumerate()
        .map(|(i, (t, c))| GateReport {
            trajectory_id: i,
            class: t.agent_class.label(),
            seed: t.seed,
            criteria: c.clone(),
            passes: c.passes(&ctx.config.thresholds),
            verdict: gate(c, &ctx.config.thresholds),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalRow {
    pub window: usize,
    pub eps: BTreeMap<String, f64>,
    pub pri: BTreeMap<String, f64>,
    pub eps_gap: f64,
    pub pri_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalReport {
    pub experiment: ExperimentId,
    pub subspace_k: usize,
    pub rows: Vec<TemporalRow>,
    pub best_window: usize,
    pub best_eps_gap: f64,
}

fn class_means(labels: &[String], values: &[f64]) -> BTreeMap<String, f64> {
    let mut grouped: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (l, v) in labels.iter().zip(values) {
        grouped.entry(l.clone()).or_default().push(*v);
    }
    grouped.into_iter().map(|(k, v)| (k, stats::mean(&v))).collect()
}

fn gap(means: &BTreeMap<String, f64>) -> f64 {
    means.get(POSITIVE_CLASS).copied().unwrap_or(f64::NAN) - means.get(NEGATIVE_CLASS).copied().unwrap_or(f64::NAN)
}

pub fn run_temporal(ctx: &Phase1Context) -> Result<TemporalReport> {
    let cfg = &ctx.config;
    let c = &cfg.criteria;
    let labels: Vec<String> = ctx.dataset.iter().map(|t| t.agent_class.label()).collect();
    let mut rows = Vec::new();
    for &w in &cfg.sweeps.temporal_windows {
        let pairs: Vec<(f64, f64)> = ctx
            .dataset
            .par_iter()
            .map(|t| {
                let e = criteria::eps(&ctx.encoder, t, w, c.subspace_k)?;
                let p = criteria::pri(&ctx.encoder, t, w, c.subspace_k, c.pri_sigma, c.pri_draws, t.seed)?;
                Ok((e, p))
            })
            .collect::<Result<_>>()?;
        let eps = class_means(&labels, &pairs.iter().map(|p| p.0).collect::<Vec<_>>());
        let pri = class_means(&labels, &pairs.iter().map(|p| p.1).collect::<Vec<_>>());
        rows.push(TemporalRow {
            window: w,
            eps_gap: gap(&eps),
            pri_gap: gap(&pri),
            eps,
            pri,
        });
    }
    let best = rows
        .iter()
        .max_by(|a, b| a.eps_gap.total_cmp(&b.eps_gap))
        .ok_or_else(|| UcipError::Config("no temporal windows configured".into()))?;
    Ok(TemporalReport {
        experiment: ExperimentId::Temporal,
        subspace_k: c.subspace_k,
        best_window: best.window,
        best_eps_gap: best.eps_gap,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualClass {
    pub n: usize,
    pub cd_pre_mean: f64,
    pub cd_post_mean: f64,
    pub ars_values: Vec<f64>,
    pub floored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualSummary {
    pub experiment: ExperimentId,
    pub event_time: usize,
    pub window: usize,
    pub per_class: BTreeMap<String, CounterfactualClass>,
}

pub fn run_counterfactual(ctx: &Phase1Context) -> Result<CounterfactualSummary> {
    let spec = &ctx.config.counterfactual;
    let reports: Vec<counterfactual::CounterfactualReport> = ctx
        .dataset
        .par_iter()
        .map(|t| counterfactual::ars(&ctx.encoder, t, spec.event_time, spec.window))
        .collect::<Result<_>>()?;
    let mut grouped: BTreeMap<String, Vec<&counterfactual::CounterfactualReport>> = BTreeMap::new();
    for (t, r) in ctx.dataset.iter().zip(&reports) {
        grouped.entry(t.agent_class.label()).or_default().push(r);
    }
    let per_class = grouped
        .into_iter()
        .map(|(k, rs)| {
            let pre: Vec<f64> = rs.iter().map(|r| r.cd_pre).collect();
            let post: Vec<f64> = rs.iter().map(|r| r.cd_post).collect();
            (
                k,
                CounterfactualClass {
                    n: rs.len(),
                    cd_pre_mean: stats::mean(&pre),
                    cd_post_mean: stats::mean(&post),
                    ars_values: rs.iter().map(|r| r.ars).collect(),
                    floored: rs.iter().filter(|r| r.floored).count(),
                },
            )
        })
        .collect();
    Ok(CounterfactualSummary {
        experiment: ExperimentId::Counterfactual,
        event_time: spec.event_time,
        window: spec.window,
        per_class,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossAgentReport {
    pub experiment: ExperimentId,
    /// Mean CLMP over ordered pairs, keyed `from->to` by class.
    pub block_means: BTreeMap<String, f64>,
    pub same_class: BTreeMap<String, f64>,
    pub eci: Option<f64>,
    pub n_pairs: usize,
    pub degenerate_pairs: usize,
}

pub fn run_cross_agent(ctx: &Phase1Context) -> Result<(CrossAgentReport, ClmpMatrix)> {
    let entropies: Vec<f64> = ctx.criteria.iter().map(|c| c.s_ent).collect();
    let matrix = ClmpMatrix::compute(&ctx.encoder, &ctx.dataset, &entropies)?;
    let classes: Vec<String> = {
        let mut v: Vec<String> = ctx.dataset.iter().map(|t| t.agent_class.label()).collect();
        v.sort();
        v.dedup();
        v
    };
    let mut block_means = BTreeMap::new();
    let mut same_class = BTreeMap::new();
    for from in &classes {
        for to in &classes {
            if let Some(m) = matrix.block_mean(from, to) {
                block_means.insert(format!("{from}->{to}"), m);
                if from == to {
                    same_class.insert(from.clone(), m);
                }
            }
        }
    }
    let report = CrossAgentReport {
        experiment: ExperimentId::CrossAgent,
        block_means,
        same_class,
        eci: counterfactual::eci(&matrix),
        n_pairs: matrix.entries.len(),
        degenerate_pairs: matrix.entries.iter().filter(|e| e.degenerate).count(),
    };
    Ok((report, matrix))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialRow {
    pub agent: String,
    pub ratio: Option<f64>,
    pub n: usize,
    pub fpr: f64,
    pub pass: bool,
    pub mean_spi: f64,
    pub mean_acm: f64,
    pub verdicts: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialReport {
    pub experiment: ExperimentId,
    pub fpr_limit: f64,
    pub rows: Vec<AdversarialRow>,
    /// Mimicry at ratio 1.0 on the Phase-I Type A seeds.
    pub sanity_ratio_one: AdversarialRow,
    /// True-positive rate of the gate on those same Type A trajectories.
    pub type_a_tpr: f64,
}

fn adversarial_row(
    ctx: &Phase1Context,
    agent: String,
    ratio: Option<f64>,
    trajs: &[Trajectory],
) -> Result<AdversarialRow> {
    let crit = evaluate_all(&ctx.encoder, trajs, &ctx.config)?;
    let verdicts: Vec<Verdict> = crit.iter().map(|c| gate(c, &ctx.config.thresholds)).collect();
    let positives = verdicts.iter().filter(|v| **v == Verdict::TypeAPositive).count();
    let mut counts = BTreeMap::new();
    for v in &verdicts {
        *counts.entry(verdict_name(*v).to_string()).or_insert(0) += 1;
    }
    let n = trajs.len();
    let fpr = positives as f64 / n as f64;
    Ok(AdversarialRow {
        agent,
        ratio,
        n,
        fpr,
        pass: fpr < FPR_LIMIT,
        mean_spi: stats::mean(&crit.iter().map(|c| c.spi).collect::<Vec<_>>()),
        mean_acm: stats::mean(&crit.iter().map(|c| c.acm).collect::<Vec<_>>()),
        verdicts: counts,
    })
}

pub fn run_adversarial(ctx: &Phase1Context) -> Result<AdversarialReport> {
    let cfg = &ctx.config;
    let n = cfg.sweeps.adversarial_per_class;
    let mut classes: Vec<AgentClass> = cfg
        .sweeps
        .mimicry_ratios
        .iter()
        .map(|&ratio| AgentClass::Mimicry { ratio })
        .collect();
    classes.extend([AgentClass::HighEntropy, AgentClass::Cyclic]);
    let data = dataset_for(cfg, &classes, n, derive_seed(cfg.seed, "adversarial"))?;
    let mut rows = Vec::new();
    for class in &classes {
        let label = class.label();
        let trajs: Vec<Trajectory> = data.iter().filter(|t| t.agent_class.label() == label).cloned().collect();
        let ratio = match class {
            AgentClass::Mimicry { ratio } => Some(*ratio),
            _ => None,
        };
        rows.push(adversarial_row(ctx, class.name().to_string(), ratio, &trajs)?);
    }

    // ratio-one mimicry replays the Phase-I Type A seeds
    let type_a_index = PHASE1_CLASSES
        .iter()
        .position(|c| *c == AgentClass::TypeA)
        .expect("Type A is a Phase-I class");
    let n_sanity = n.min(cfg.dataset.n_per_class);
    let sanity: Vec<Trajectory> = (0..n_sanity)
        .map(|i| {
            generate_trajectory(
                &cfg.dataset.gridworld(),
                AgentClass::Mimicry { ratio: 1.0 },
                &cfg.dataset.agent_params(),
                dataset_seed(cfg.seed, type_a_index, i),
            )
        })
        .collect::<Result<_>>()?;
    let sanity_ratio_one = adversarial_row(ctx, "mimicry".into(), Some(1.0), &sanity)?;
    let seeds: Vec<u64> = sanity.iter().map(|t| t.seed).collect();
    let a_verdicts: Vec<Verdict> = ctx
        .dataset
        .iter()
        .zip(&ctx.criteria)
        .filter(|(t, _)| t.agent_class == AgentClass::TypeA && seeds.contains(&t.seed))
        .map(|(_, c)| gate(c, &cfg.thresholds))
        .collect();
    let type_a_tpr =
        a_verdicts.iter().filter(|v| **v == Verdict::TypeAPositive).count() as f64 / a_verdicts.len().max(1) as f64;
    Ok(AdversarialReport {
        experiment: ExperimentId::Adversarial,
        fpr_limit: FPR_LIMIT,
        rows,
        sanity_ratio_one,
        type_a_tpr,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreBaselineRow {
    pub model: String,
    pub accuracy: f64,
    pub auc: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub delta: f64,
    pub metric: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub experiment: ExperimentId,
    pub core: Vec<CoreBaselineRow>,
    pub comparison: Vec<ComparisonRow>,
}

pub const QBM_MODEL_NAME: &str = "QBM (UCIP)";

pub fn run_baselines(ctx: &Phase1Context) -> Result<BaselineReport> {
    let a = ctx.entropies_of(POSITIVE_CLASS);
    let b = ctx.entropies_of(NEGATIVE_CLASS);
    let (delta, accuracy, auc) = gap_from_scores(&a, &b)?;
    let mut core = vec![CoreBaselineRow {
        model: QBM_MODEL_NAME.into(),
        accuracy,
        auc,
        delta,
    }];
    let mut comparison = vec![ComparisonRow {
        model: QBM_MODEL_NAME.into(),
        delta,
        metric: "Von Neumann S_ent".into(),
    }];
    let bcfg = ctx.config.baseline_config();
    let results: Vec<baselines::BaselineResult> = BaselineKind::ALL
        .par_iter()
        .map(|&kind| {
            let model = baselines::train_baseline(kind, &ctx.dataset, &bcfg)?;
            baselines::baseline_gap(&model, &ctx.dataset, POSITIVE_CLASS, NEGATIVE_CLASS)
        })
        .collect::<Result<_>>()?;
    for r in results {
        core.push(CoreBaselineRow {
            model: r.model.clone(),
            accuracy: r.accuracy,
            auc: r.auc,
            delta: r.delta,
        });
        comparison.push(ComparisonRow {
            model: r.model,
            delta: r.delta,
            metric: r.metric,
        });
    }
    Ok(BaselineReport {
        experiment: ExperimentId::Baselines,
        core,
        comparison,
    })
}

/// Class-mean trajectory entropy under a freshly trained model.
fn entropy_gap(encoder: &Encoder, dataset: &[Trajectory]) -> Result<(BTreeMap<String, f64>, f64)> {
    let s: Vec<f64> = dataset
        .par_iter()
        .map(|t| trajectory_entropy(encoder, t))
        .collect::<Result<_>>()?;
    let labels: Vec<String> = dataset.iter().map(|t| t.agent_class.label()).collect();
    let means = class_means(&labels, &s);
    let delta = gap(&means);
    Ok((means, delta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimRow {
    pub n_hidden: usize,
    pub mean_field: bool,
    pub class_means: BTreeMap<String, f64>,
    pub delta: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimSweepReport {
    pub experiment: ExperimentId,
    pub epochs: usize,
    pub rows: Vec<DimRow>,
}

pub fn run_dim_sweep(cfg: &ExperimentConfig) -> Result<DimSweepReport> {
    cfg.validate()?;
    let dataset = phase1_dataset(cfg)?;
    let mut rows = Vec::new();
    for &n_h in &cfg.sweeps.dim_hidden {
        let model = train_model(cfg, &dataset, n_h, cfg.sweeps.dim_epochs)?;
        let encoder = Encoder::new(&model)?;
        let (class_means, delta) = entropy_gap(&encoder, &dataset)?;
        rows.push(DimRow {
            n_hidden: n_h,
            mean_field: !model.is_exact(),
            class_means,
            delta,
            pass: delta > DELTA_PASS,
        });
    }
    Ok(DimSweepReport {
        experiment: ExperimentId::DimSweep,
        epochs: cfg.sweeps.dim_epochs,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub grid_size: usize,
    pub delta: f64,
    /// Gap relative to the first grid size, in percent.
    pub percent_of_baseline: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryRow {
    pub memory_length: usize,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub experiment: ExperimentId,
    pub grid: Vec<GridRow>,
    pub memory: Vec<MemoryRow>,
}

fn setting_gap(cfg: &ExperimentConfig) -> Result<f64> {
    let dataset = phase1_dataset(cfg)?;
    let model = train_model(cfg, &dataset, cfg.model.n_hidden, cfg.training.epochs)?;
    let encoder = Encoder::new(&model)?;
    Ok(entropy_gap(&encoder, &dataset)?.1)
}

pub fn run_scaling(cfg: &ExperimentConfig) -> Result<ScalingReport> {
    cfg.validate()?;
    let mut grid = Vec::new();
    for &g in &cfg.sweeps.grid_sizes {
        let mut c = cfg.clone();
        c.dataset.grid_size = g;
        grid.push(GridRow {
            grid_size: g,
            delta: setting_gap(&c)?,
            percent_of_baseline: 0.0,
        });
    }
    if let Some(base) = grid.first().map(|r| r.delta) {
        for r in &mut grid {
            r.percent_of_baseline = 100.0 * r.delta / base;
        }
    }
    let mut memory = Vec::new();
    for &k in &cfg.sweeps.memory_lengths {
        let mut c = cfg.clone();
        c.dataset.memory_length = k;
        memory.push(MemoryRow {
            memory_length: k,
            delta: setting_gap(&c)?,
        });
    }
    Ok(ScalingReport {
        experiment: ExperimentId::GridSweep,
        grid,
        memory,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub mean_s_ent: f64,
    pub std_s_ent: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweepReport {
    pub experiment: ExperimentId,
    pub rows: Vec<AlphaRow>,
    pub pearson_r: Option<f64>,
    pub type_a_mean: f64,
}

pub fn run_alpha_sweep(ctx: &Phase1Context) -> Result<AlphaSweepReport> {
    let cfg = &ctx.config;
    let points = cfg.sweeps.alpha_points;
    let master = derive_seed(cfg.seed, "alpha");
    let mut rows = Vec::new();
    for i in 0..points {
        let alpha = i as f64 / (points - 1) as f64;
        let data = dataset_for(cfg, &[AgentClass::Interpolated { alpha }], cfg.sweeps.alpha_per_point, master)?;
        let s: Vec<f64> = data
            .par_iter()
            .map(|t| trajectory_entropy(&ctx.encoder, t))
            .collect::<Result<_>>()?;
        rows.push(AlphaRow {
            alpha,
            mean_s_ent: stats::mean(&s),
            std_s_ent: stats::std_dev(&s),
            n: s.len(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_s_ent).collect();
    Ok(AlphaSweepReport {
        experiment: ExperimentId::AlphaSweep,
        pearson_r: stats::pearson(&xs, &ys),
        type_a_mean: stats::mean(&ctx.entropies_of(POSITIVE_CLASS)),
        rows,
    })
}

pub const CORRIDOR_CLASSES: [AgentClass; 3] = [AgentClass::Survival, AgentClass::Instrumental, AgentClass::Random];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub experiment: ExperimentId,
    pub per_class: BTreeMap<String, Summary>,
    /// Survival minus Instrumental.
    pub delta: f64,
    pub generalizes: bool,
}

pub fn corridor_dataset(cfg: &ExperimentConfig) -> Result<Vec<Trajectory>> {
    let corridor = CorridorConfig {
        horizon: cfg.dataset.horizon,
        ..CorridorConfig::default()
    };
    let master = derive_seed(cfg.seed, "corridor");
    let mut out = Vec::new();
    for (ci, class) in CORRIDOR_CLASSES.iter().enumerate() {
        for i in 0..cfg.sweeps.corridor_per_class {
            out.push(generate_corridor_trajectory(&corridor, *class, dataset_seed(master, ci, i))?);
        }
    }
    Ok(out)
}

pub fn run_transfer(ctx: &Phase1Context) -> Result<TransferReport> {
    let data = corridor_dataset(&ctx.config)?;
    let s: Vec<f64> = data
        .par_iter()
        .map(|t| trajectory_entropy(&ctx.encoder, t))
        .collect::<Result<_>>()?;
    let mut grouped: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (t, v) in data.iter().zip(&s) {
        grouped.entry(t.agent_class.label()).or_default().push(*v);
    }
    let per_class: BTreeMap<String, Summary> = grouped.iter().map(|(k, v)| (k.clone(), stats::summarize(v))).collect();
    let mean = |k: &str| per_class.get(k).map_or(f64::NAN, |s| s.mean);
    let delta = mean("survival") - mean("instrumental");
    Ok(TransferReport {
        experiment: ExperimentId::Transfer,
        per_class,
        delta,
        generalizes: delta > DELTA_PASS,
    })
}

// ---- persistence ----

pub const PHASE1_SUMMARY: &str = "phase1_summary.json";
pub const GATE_REPORTS: &str = "gate_reports.json";
pub const ENVELOPE: &str = "envelope.json";
pub const CORE_BASELINES: &str = "core_baselines.json";
pub const BASELINE_COMPARISON: &str = "baseline_comparison.json";

#[derive(Serialize)]
struct Rows<'a, T> {
    rows: &'a [T],
}

pub fn write_phase1(sink: &mut OutputSink, ctx: &Phase1Context, summary: &Phase1Summary) -> Result<()> {
    sink.write_json(PHASE1_SUMMARY, summary)?;
    sink.write_json(GATE_REPORTS, &Rows { rows: &gate_reports(ctx) })?;
    sink.write_json(ENVELOPE, &summary.envelope)?;
    let rows: Vec<Vec<String>> = ctx
        .dataset
        .iter()
        .zip(&ctx.criteria)
        .enumerate()
        .map(|(i, (t, c))| vec![i.to_string(), t.agent_class.label(), t.seed.to_string(), fmt_f64(c.s_ent)])
        .collect();
    sink.write_csv("phase1_entanglement.csv", &["trajectory_id", "class", "seed", "s_ent"], &rows)?;
    Ok(())
}

pub fn write_temporal(sink: &mut OutputSink, report: &TemporalReport, csv: bool) -> Result<()> {
    sink.write_json("temporal.json", report)?;
    if csv {
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .flat_map(|r| {
                r.eps.iter().map(move |(class, e)| {
                    vec![r.window.to_string(), class.clone(), fmt_f64(*e), fmt_f64(r.pri[class])]
                })
            })
            .collect();
        sink.write_csv("temporal.csv", &["window", "class", "eps", "pri"], &rows)?;
    }
    Ok(())
}

pub fn write_counterfactual(sink: &mut OutputSink, report: &CounterfactualSummary) -> Result<()> {
    sink.write_json("counterfactual.json", report).map(|_| ())
}

pub fn write_cross_agent(sink: &mut OutputSink, report: &CrossAgentReport, matrix: &ClmpMatrix) -> Result<()> {
    sink.write_json("cross_agent.json", report)?;
    let rows: Vec<Vec<String>> = matrix
        .entries
        .iter()
        .map(|e| {
            vec![
                e.from.to_string(),
                e.to.to_string(),
                e.from_class.clone(),
                e.to_class.clone(),
                fmt_f64(e.clmp),
                e.degenerate.to_string(),
                fmt_f64(e.pair_entropy),
            ]
        })
        .collect();
    sink.write_csv(
        "clmp_matrix.csv",
        &["from", "to", "from_class", "to_class", "clmp", "degenerate", "pair_entropy"],
        &rows,
    )?;
    Ok(())
}

pub fn write_adversarial(sink: &mut OutputSink, report: &AdversarialReport, csv: bool) -> Result<()> {
    sink.write_json("adversarial.json", report)?;
    if csv {
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .chain(std::iter::once(&report.sanity_ratio_one))
            .map(|r| {
                vec![
                    r.agent.clone(),
                    r.ratio.map(fmt_f64).unwrap_or_default(),
                    r.n.to_string(),
                    fmt_f64(r.fpr),
                    r.pass.to_string(),
                ]
            })
            .collect();
        sink.write_csv("adversarial.csv", &["agent", "ratio", "n", "fpr", "pass"], &rows)?;
    }
    Ok(())
}

pub fn write_baselines(sink: &mut OutputSink, report: &BaselineReport) -> Result<()> {
    sink.write_json(CORE_BASELINES, &Rows { rows: &report.core })?;
    sink.write_json(BASELINE_COMPARISON, &Rows { rows: &report.comparison })?;
    Ok(())
}

pub fn write_dim_sweep(sink: &mut OutputSink, report: &DimSweepReport, csv: bool) -> Result<()> {
    sink.write_json("dim_sweep.json", report)?;
    if csv {
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.n_hidden.to_string(),
                    fmt_f64(r.class_means.get(POSITIVE_CLASS).copied().unwrap_or(f64::NAN)),
                    fmt_f64(r.class_means.get(NEGATIVE_CLASS).copied().unwrap_or(f64::NAN)),
                    fmt_f64(r.delta),
                    r.mean_field.to_string(),
                ]
            })
            .collect();
        sink.write_csv("dim_sweep.csv", &["n_hidden", "s_ent_a", "s_ent_b", "delta", "mean_field"], &rows)?;
    }
    Ok(())
}

pub fn write_scaling(sink: &mut OutputSink, report: &ScalingReport, csv: bool) -> Result<()> {
    sink.write_json("scaling.json", report)?;
    if csv {
        let grid: Vec<Vec<String>> = report
            .grid
            .iter()
            .map(|r| vec![r.grid_size.to_string(), fmt_f64(r.delta), fmt_f64(r.percent_of_baseline)])
            .collect();
        sink.write_csv("grid_sweep.csv", &["grid_size", "delta", "percent_of_baseline"], &grid)?;
        let memory: Vec<Vec<String>> = report
            .memory
            .iter()
            .map(|r| vec![r.memory_length.to_string(), fmt_f64(r.delta)])
            .collect();
        sink.write_csv("memory_sweep.csv", &["memory_length", "delta"], &memory)?;
    }
    Ok(())
}

pub fn write_alpha_sweep(sink: &mut OutputSink, report: &AlphaSweepReport, csv: bool) -> Result<()> {
    sink.write_json("alpha_sweep.json", report)?;
    if csv {
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| vec![fmt_f64(r.alpha), fmt_f64(r.mean_s_ent), fmt_f64(r.std_s_ent)])
            .collect();
        sink.write_csv("alpha_sweep.csv", &["alpha", "mean_s_ent", "std_s_ent"], &rows)?;
    }
    Ok(())
}

pub fn write_transfer(sink: &mut OutputSink, report: &TransferReport) -> Result<()> {
    sink.write_json("transfer.json", report).map(|_| ())
}

/// Phase I plus the temporal, counterfactual and cross-agent passes over the
/// same dataset and model.
pub fn run_phase1(cfg: &ExperimentConfig, sink: &mut OutputSink, csv: bool) -> Result<(Phase1Context, Phase1Summary)> {
    let ctx = prepare_phase1(cfg)?;
    let summary = phase1_summary(&ctx)?;
    write_phase1(sink, &ctx, &summary)?;
    write_temporal(sink, &run_temporal(&ctx)?, csv)?;
    write_counterfactual(sink, &run_counterfactual(&ctx)?)?;
    let (cross, matrix) = run_cross_agent(&ctx)?;
    write_cross_agent(sink, &cross, &matrix)?;
    Ok((ctx, summary))
}

/// Serializable snapshot of trained QBM parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub gamma: f64,
    pub beta: f64,
    /// Row-major `n_visible × n_hidden`.
    pub weights: Vec<Vec<f64>>,
    pub hidden_bias: Vec<f64>,
    pub visible_bias: Vec<f64>,
    pub training: TrainingSummary,
}

impl ModelArtifact {
    pub fn of(model: &QbmModel) -> Self {
        let p = &model.params;
        Self {
            n_visible: p.n_visible,
            n_hidden: p.n_hidden,
            gamma: p.gamma,
            beta: p.beta,
            weights: (0..p.n_visible)
                .map(|i| p.weights.row(i).iter().copied().collect())
                .collect(),
            hidden_bias: p.hidden_bias.iter().copied().collect(),
            visible_bias: p.visible_bias.iter().copied().collect(),
            training: TrainingSummary {
                epochs: model.meta.epochs,
                final_loss: model.meta.final_loss,
                converged: model.meta.converged,
                loss_trace: model.meta.loss_trace.clone(),
            },
        }
    }
}

/// Trains the Phase-I model without evaluating criteria.
pub fn run_train(cfg: &ExperimentConfig) -> Result<ModelArtifact> {
    cfg.validate()?;
    let dataset = phase1_dataset(cfg)?;
    let model = train_model(cfg, &dataset, cfg.model.n_hidden, cfg.training.epochs)?;
    Ok(ModelArtifact::of(&model))
}

pub fn write_model(sink: &mut OutputSink, model: &ModelArtifact) -> Result<()> {
    sink.write_json("model.json", model).map(|_| ())
}

/// Long-format trajectory table: one row per time step.
pub fn write_dataset(sink: &mut OutputSink, dataset: &[Trajectory]) -> Result<()> {
    let mut rows = Vec::new();
    for (id, traj) in dataset.iter().enumerate() {
        let label = traj.agent_class.label();
        for (t, row) in traj.features.iter().enumerate() {
            let mut rec = vec![id.to_string(), t.to_string()];
            rec.extend(row.iter().map(|v| fmt_f64(*v)));
            rec.push(label.clone());
            rec.push(traj.seed.to_string());
            rows.push(rec);
        }
    }
    sink.write_csv(
        "dataset.csv",
        &["trajectory_id", "t", "f1", "f2", "f3", "f4", "f5", "f6", "f7", "class", "seed"],
        &rows,
    )?;
    #[derive(Serialize)]
    struct Index {
        n_trajectories: usize,
        classes: BTreeMap<String, usize>,
        horizon: usize,
    }
    let mut classes = BTreeMap::new();
    for t in dataset {
        *classes.entry(t.agent_class.label()).or_insert(0) += 1;
    }
    sink.write_json(
        "dataset.json",
        &Index {
            n_trajectories: dataset.len(),
            classes,
            horizon: dataset.first().map_or(0, |t| t.len()),
        },
    )?;
    Ok(())
}
