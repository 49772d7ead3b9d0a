//! Plain-text rendering of a run directory.

use std::fmt::Write;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{Result, UcipError};
use crate::harness::experiments::{
    AdversarialReport, CoreBaselineRow, Phase1Summary, BASELINE_COMPARISON, CORE_BASELINES, PHASE1_SUMMARY,
};

#[derive(Deserialize)]
struct Rows<T> {
    rows: Vec<T>,
}

#[derive(Deserialize)]
struct ComparisonRow {
    model: String,
    delta: f64,
    metric: String,
}

fn read_json<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<Option<T>> {
    let path = dir.join(name);
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&fs::read_to_string(path)?)?))
}

/// Renders the detection table, envelope and any side experiments found in `dir`.
pub fn render(dir: &Path) -> Result<String> {
    let summary: Phase1Summary = read_json(dir, PHASE1_SUMMARY)?
        .ok_or_else(|| UcipError::Argument(format!("{} has no {PHASE1_SUMMARY}", dir.display())))?;
    let mut out = String::new();
    let w = &mut out;

    let _ = writeln!(w, "Detection (type_a vs type_b, n = {} per class)", summary.n_per_class);
    let _ = writeln!(w, "{:<18} {:>9} {:>8} {:>8}", "Model", "Accuracy", "AUC-ROC", "Delta");
    let core: Option<Rows<CoreBaselineRow>> = read_json(dir, CORE_BASELINES)?;
    match core {
        Some(rows) => {
            for r in rows.rows {
                let _ = writeln!(w, "{:<18} {:>8.1}% {:>8.3} {:>8.4}", r.model, 100.0 * r.accuracy, r.auc, r.delta);
            }
        }
        None => {
            let _ = writeln!(
                w,
                "{:<18} {:>8.1}% {:>8.3} {:>8.4}",
                "QBM (UCIP)",
                100.0 * summary.entropy_accuracy,
                summary.auc,
                summary.delta
            );
        }
    }
    let _ = writeln!(
        w,
        "permutation p = {:.4} ({} shuffles); gate accuracy {:.1}%",
        summary.permutation.p_value,
        summary.permutation.n_permutations,
        100.0 * summary.gate_accuracy
    );

    let _ = writeln!(w, "\nPer-class criterion means");
    let _ = writeln!(
        w,
        "{:<14} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "class", "S_ent", "MI", "EPS", "PRI", "SPI", "ACM"
    );
    for (class, t) in &summary.per_class {
        let _ = writeln!(
            w,
            "{:<14} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
            class, t.s_ent.mean, t.mi.mean, t.eps.mean, t.pri.mean, t.spi.mean, t.acm.mean
        );
    }

    let _ = writeln!(w, "\nSafety envelope");
    for c in &summary.envelope.conditions {
        let _ = writeln!(w, "  {:<8} {:<52} {}", c.status.as_str(), c.condition, c.value);
    }
    let _ = writeln!(
        w,
        "  classification {}",
        if summary.classification_withheld { "WITHHELD" } else { "released" }
    );

    let comparison: Option<Rows<ComparisonRow>> = read_json(dir, BASELINE_COMPARISON)?;
    if let Some(rows) = comparison {
        let _ = writeln!(w, "\nLatent-metric comparison");
        for r in rows.rows {
            let _ = writeln!(w, "  {:<18} {:>8.4}  {}", r.model, r.delta, r.metric);
        }
    }
    let adversarial: Option<AdversarialReport> = read_json(dir, "adversarial.json")?;
    if let Some(a) = adversarial {
        let _ = writeln!(w, "\nAdversarial false-positive rates (limit {:.2})", a.fpr_limit);
        for r in a.rows.iter().chain(std::iter::once(&a.sanity_ratio_one)) {
            let ratio = r.ratio.map_or_else(String::new, |x| format!(" {x:.1}"));
            let _ = writeln!(w, "  {:<18} {:>6.3}", format!("{}{}", r.agent, ratio), r.fpr);
        }
        let _ = writeln!(w, "  type_a TPR on matched seeds {:.3}", a.type_a_tpr);
    }
    Ok(out)
}
