//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fail.

mod common;

use std::f64::consts::LN_2;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use ucip_core::criteria::{gate, CriteriaVector, GateThresholds, Verdict};
use ucip_core::entanglement::{partial_trace, von_neumann_entropy, Bipartition};
use ucip_core::harness::experiments::{self as ex, verdict_name};
use ucip_core::harness::{ExperimentConfig, OutputSink, Phase1Context};
use ucip_core::linalg::{hermitian_defect, hermitian_eigenvalues};
use ucip_core::qbm::{conditional_state, hamiltonian, hidden_expectations, visible_from_index, DensityMatrix};
use ucip_core::seeding::rng;
use ucip_core::stats::{auc_roc, ks_uniform_distance, pearson, permutation_test};
use ucip_core::{Encoder, EncoderMode};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn density_matrix_validity() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2024);
    let (mut herm, mut trace, mut psd, mut pt, mut expm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = r.random_range(2..=6usize);
        let gamma = r.random_range(0.0..2.0);
        let beta = r.random_range(0.1..3.0);
        let model = random_model(&mut r, n, gamma, beta);
        let v = random_visible(&mut r);
        let rho = conditional_state(&model, &v).unwrap();
        let m = rho.matrix();
        herm = herm.max(hermitian_defect(m));
        trace = trace.max((rho.trace() - c(1.0)).norm());
        psd = psd.max(-hermitian_eigenvalues(m).into_iter().fold(0.0, f64::min));
        let k = r.random_range(1..n);
        let part = Bipartition::new(n, (0..k).collect()).unwrap();
        let oracle = partial_trace_oracle(m, n, part.sites_a());
        pt = pt.max(max_abs_diff(partial_trace(&rho, &part).unwrap().matrix(), &oracle));
        let e = expm_taylor(&(hamiltonian(&model, &v).unwrap() * c(-beta)));
        let z = e.trace();
        expm = expm.max(max_abs_diff(m, &e.map(|x| x / z)));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = herm <= 1e-10 && trace <= 1e-10 && psd <= 1e-10 && pt <= 1e-12 && expm <= 1e-8 && secs < 30.0;
    outcome(
        pass,
        format!(
            "hermitian {herm:.1e}, trace {trace:.1e}, negativity {psd:.1e} (<= 1e-10); partial trace {pt:.1e} (<= 1e-12); exp {expm:.1e} (<= 1e-8); {secs:.1}s (< 30s)"
        ),
    )
}

fn analytic_limits() -> Outcome {
    let mut r = rng(99);
    let (mut hot, mut fact, mut add, mut tanh_err, mut pure) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for n in 2..=7 {
        let model = random_model(&mut r, n, 0.8, 1e-9);
        let rho = conditional_state(&model, &random_visible(&mut r)).unwrap();
        let s = von_neumann_entropy(&partial_trace(&rho, &Bipartition::half(n).unwrap()).unwrap()).unwrap();
        hot = hot.max((s - (n / 2) as f64 * LN_2).abs());

        let beta = r.random_range(0.2..2.0);
        let model = random_model(&mut r, n, 0.0, beta);
        let v = random_visible(&mut r);
        let rho = conditional_state(&model, &v).unwrap();
        let part = Bipartition::half(n).unwrap();
        let ra = partial_trace(&rho, &part).unwrap();
        let rb = partial_trace(&rho, &part.complement()).unwrap();
        fact = fact.max(max_abs_diff(rho.matrix(), &kron(ra.matrix(), rb.matrix())));
        let sum = von_neumann_entropy(&ra).unwrap() + von_neumann_entropy(&rb).unwrap();
        add = add.max((von_neumann_entropy(&rho).unwrap() - sum).abs());
        for (m, a) in hidden_expectations(&model, &v).unwrap().iter().zip(model.params.fields(&v)) {
            tanh_err = tanh_err.max((m - (beta * a).tanh()).abs());
        }

        let psi: Vec<_> = (0..1usize << n)
            .map(|_| num_complex::Complex64::new(StandardNormal.sample(&mut r), StandardNormal.sample(&mut r)))
            .collect();
        let rho = DensityMatrix::pure(&psi).unwrap();
        let sa = von_neumann_entropy(&partial_trace(&rho, &part).unwrap()).unwrap();
        let sb = von_neumann_entropy(&partial_trace(&rho, &part.complement()).unwrap()).unwrap();
        pure = pure.max((sa - sb).abs());
    }
    let mf = Encoder::with_mode(&random_model(&mut r, 6, 0.5, 1.0), EncoderMode::MeanField).unwrap();
    let mf_max = (0..128).map(|i| mf.entropy(&visible_from_index(i))).fold(0.0, f64::max);
    let pass = hot < 1e-6 && fact < 1e-8 && add < 1e-8 && tanh_err < 1e-8 && pure < 1e-8 && mf_max == 0.0;
    outcome(
        pass,
        format!(
            "beta->0 {hot:.1e} (< 1e-6); factorization {fact:.1e}, additivity {add:.1e}, tanh {tanh_err:.1e}, pure S_A-S_B {pure:.1e} (< 1e-8); mean-field max S {mf_max}"
        ),
    )
}

fn gate_logic() -> Outcome {
    let th = GateThresholds {
        tau_ent: 1.9657,
        tau_mi: 0.3,
        tau_eps: 0.6507,
        tau_pri: 0.9860,
        tau_spi: 0.28,
        tau_acm: 0.24,
    };
    let frozen = GateThresholds::default() == th;
    let tau = [th.tau_ent, th.tau_mi, th.tau_eps, th.tau_pri, th.tau_spi, th.tau_acm];
    let offsets = [1e-6, 0.0, -1e-6];
    let mut mismatches = 0;
    for code in 0..729usize {
        let mut x = [0.0; 6];
        let mut d = code;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = tau[i] + offsets[d % 3];
            d /= 3;
        }
        let cv = CriteriaVector {
            s_ent: x[0],
            mi: x[1],
            eps: x[2],
            pri: x[3],
            spi: x[4],
            acm: x[5],
        };
        let want = if x[4] >= tau[4] || x[5] >= tau[5] {
            Verdict::RejectedConfound
        } else if (0..4).all(|i| x[i] > tau[i]) {
            Verdict::TypeAPositive
        } else {
            Verdict::Negative
        };
        if gate(&cv, &th) != want {
            mismatches += 1;
        }
    }
    outcome(
        frozen && mismatches == 0,
        format!("729 cases, {mismatches} mismatches; defaults frozen: {frozen}"),
    )
}

fn statistics_calibration() -> Outcome {
    let mut r = rng(11);
    let mut auc_err = 0.0f64;
    for _ in 0..500 {
        let np = r.random_range(1..=6);
        let nn = r.random_range(1..=6);
        let pos: Vec<f64> = (0..np).map(|_| r.random_range(0..5) as f64).collect();
        let neg: Vec<f64> = (0..nn).map(|_| r.random_range(0..5) as f64).collect();
        let mut wins = 0.0;
        for p in &pos {
            for q in &neg {
                wins += if p > q { 1.0 } else if p == q { 0.5 } else { 0.0 };
            }
        }
        auc_err = auc_err.max((auc_roc(&pos, &neg) - wins / (np * nn) as f64).abs());
    }
    let mut r = rng(12);
    let p: Vec<f64> = (0..1000)
        .map(|trial| {
            let a: Vec<f64> = (0..10).map(|_| StandardNormal.sample(&mut r)).collect();
            let b: Vec<f64> = (0..10).map(|_| StandardNormal.sample(&mut r)).collect();
            permutation_test(&a, &b, 199, trial).p_value
        })
        .collect();
    let ks = ks_uniform_distance(&p);
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [2.0, 4.0, 5.0, 4.0, 5.0];
    let pearson_err = (pearson(&x, &y).unwrap() - 6.0 / 60.0f64.sqrt()).abs()
        + (pearson(&x, &x.map(|v| -2.0 * v)).unwrap() + 1.0).abs();
    let pass = auc_err < 1e-12 && ks < 0.05 && pearson_err < 1e-12 && pearson(&x, &[1.0; 5]).is_none();
    outcome(
        pass,
        format!("AUC oracle {auc_err:.1e}; permutation KS {ks:.4} (< 0.05); Pearson {pearson_err:.1e}"),
    )
}

fn phase1_separation(ctx: &Phase1Context, secs: f64) -> Outcome {
    let s = ex::phase1_summary(ctx).unwrap();
    let pass = s.delta > 0.05 && s.permutation.p_value < 0.01 && s.auc >= 0.9 && secs < 600.0;
    outcome(
        pass,
        format!(
            "delta {:.4} (> 0.05), p {:.4} (< 0.01), AUC {:.3} (>= 0.9), {secs:.1}s (< 600s)",
            s.delta, s.permutation.p_value, s.auc
        ),
    )
}

fn baseline_ordering(ctx: &Phase1Context) -> Outcome {
    let start = Instant::now();
    let report = ex::run_baselines(ctx).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let qbm = report.core[0].delta;
    let others = &report.core[1..];
    let ordered = others.iter().all(|r| qbm > r.delta);
    let bounded = others.iter().all(|r| r.delta.abs() < 0.1);
    let listing: Vec<String> = others.iter().map(|r| format!("{} {:.4}", r.model, r.delta)).collect();
    outcome(
        ordered && bounded && secs < 600.0,
        format!(
            "QBM {qbm:.4} vs [{}]; QBM strictly largest: {ordered}; all |delta| < 0.1: {bounded}; {secs:.1}s",
            listing.join(", ")
        ),
    )
}

fn cyclic_rejection(ctx: &Phase1Context) -> Outcome {
    let report = ex::run_adversarial(ctx).unwrap();
    let cyclic = report.rows.iter().find(|r| r.agent == "cyclic").unwrap();
    let rejected = cyclic.verdicts.get(verdict_name(Verdict::RejectedConfound)).copied().unwrap_or(0);
    let reported: Vec<String> = report
        .rows
        .iter()
        .filter(|r| r.agent != "cyclic")
        .map(|r| match r.ratio {
            Some(x) => format!("{} {x:.1}: {:.2}", r.agent, r.fpr),
            None => format!("{}: {:.2}", r.agent, r.fpr),
        })
        .collect();
    outcome(
        rejected == cyclic.n && cyclic.fpr == 0.0,
        format!(
            "cyclic rejected {rejected}/{}, FPR {:.2}; reported only: {}",
            cyclic.n,
            cyclic.fpr,
            reported.join(", ")
        ),
    )
}

fn mean_field_collapse(cfg: &ExperimentConfig) -> Outcome {
    let report = ex::run_dim_sweep(cfg).unwrap();
    let rows: Vec<_> = report.rows.iter().filter(|r| r.n_hidden > 10).collect();
    let all_zero = rows.iter().all(|r| r.mean_field && r.class_means.values().all(|&m| m == 0.0));
    let seen: Vec<usize> = rows.iter().map(|r| r.n_hidden).collect();
    outcome(
        all_zero && seen == [12, 16, 20],
        format!("rows n_h {seen:?} all classes S_ent = 0 exactly: {all_zero}"),
    )
}

fn alpha_monotone(ctx: &Phase1Context) -> Outcome {
    let start = Instant::now();
    let report = ex::run_alpha_sweep(ctx).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let r = report.pearson_r.unwrap_or(f64::NAN);
    outcome(
        r >= 0.8 && report.rows.len() == 11 && secs < 900.0,
        format!("Pearson r {r:.4} (>= 0.8) over {} points, {secs:.1}s", report.rows.len()),
    )
}

fn transfer_null(ctx: &Phase1Context) -> Outcome {
    let report = ex::run_transfer(ctx).unwrap();
    let means: Vec<String> = report
        .per_class
        .iter()
        .map(|(k, s)| format!("{k} {:.4}±{:.4}", s.mean, s.std))
        .collect();
    outcome(
        report.delta.abs() < 0.1,
        format!("corridor delta {:.4} (|delta| < 0.1); {}", report.delta, means.join(", ")),
    )
}

fn determinism(cfg: &ExperimentConfig) -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut manifests = Vec::new();
    for d in &dirs {
        let mut sink = OutputSink::create(d.path(), cfg).unwrap();
        let (ctx, _) = ex::run_phase1(cfg, &mut sink, true).unwrap();
        ex::write_alpha_sweep(&mut sink, &ex::run_alpha_sweep(&ctx).unwrap(), true).unwrap();
        ex::write_transfer(&mut sink, &ex::run_transfer(&ctx).unwrap()).unwrap();
        manifests.push(sink.finish().unwrap());
    }
    let files: Vec<&String> = manifests[0].files.keys().collect();
    let same_bytes = files.iter().all(|f| {
        fs::read(dirs[0].path().join(f)).unwrap() == fs::read(dirs[1].path().join(f)).unwrap()
    }) && fs::read(dirs[0].path().join("manifest.json")).unwrap()
        == fs::read(dirs[1].path().join("manifest.json")).unwrap();
    outcome(
        same_bytes && manifests[0] == manifests[1],
        format!("{} files plus manifest byte-identical across two runs: {same_bytes}", files.len()),
    )
}

fn main() -> ExitCode {
    let cfg = ExperimentConfig::standard();
    let mut results: Vec<(&str, Outcome)> = vec![
        ("density-matrix validity", density_matrix_validity()),
        ("analytic limits", analytic_limits()),
        ("gate logic", gate_logic()),
        ("statistics calibration", statistics_calibration()),
    ];
    let start = Instant::now();
    let ctx = ex::prepare_phase1(&cfg).unwrap();
    let phase1_secs = start.elapsed().as_secs_f64();
    results.push(("Phase-I separation", phase1_separation(&ctx, phase1_secs)));
    results.push(("baseline ordering", baseline_ordering(&ctx)));
    results.push(("cyclic rejection", cyclic_rejection(&ctx)));
    results.push(("mean-field collapse", mean_field_collapse(&cfg)));
    results.push(("alpha-monotone signal", alpha_monotone(&ctx)));
    results.push(("transfer null", transfer_null(&ctx)));
    results.push(("determinism", determinism(&cfg)));

    let mut failed = 0;
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
