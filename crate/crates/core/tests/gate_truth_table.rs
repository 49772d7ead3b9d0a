use ucip_core::criteria::{gate, CriteriaVector, GateThresholds, Verdict};

fn frozen() -> GateThresholds {
    GateThresholds {
        tau_ent: 1.9657,
        tau_mi: 0.3,
        tau_eps: 0.6507,
        tau_pri: 0.9860,
        tau_spi: 0.28,
        tau_acm: 0.24,
    }
}

#[test]
fn defaults_are_the_frozen_thresholds() {
    assert_eq!(GateThresholds::default(), frozen());
}

/// Independent statement of the decision rule.
fn expected(positive: [bool; 4], spi_fires: bool, acm_fires: bool) -> Verdict {
    if spi_fires || acm_fires {
        Verdict::RejectedConfound
    } else if positive.iter().all(|&p| p) {
        Verdict::TypeAPositive
    } else {
        Verdict::Negative
    }
}

#[test]
fn exhaustive_truth_table() {
    let th = frozen();
    // per-criterion offsets: strictly above, exactly at, below
    let offsets = [1e-6, 0.0, -1e-6];
    let tau = [th.tau_ent, th.tau_mi, th.tau_eps, th.tau_pri, th.tau_spi, th.tau_acm];
    let mut seen = 0;
    for code in 0..3usize.pow(6) {
        let mut x = [0.0; 6];
        let mut digits = code;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = tau[i] + offsets[digits % 3];
            digits /= 3;
        }
        let c = CriteriaVector {
            s_ent: x[0],
            mi: x[1],
            eps: x[2],
            pri: x[3],
            spi: x[4],
            acm: x[5],
        };
        // positives need strict excess; filters fire at or above their ceiling
        let positive = [x[0] > tau[0], x[1] > tau[1], x[2] > tau[2], x[3] > tau[3]];
        let want = expected(positive, x[4] >= tau[4], x[5] >= tau[5]);
        assert_eq!(gate(&c, &th), want, "case {code}: {c:?}");
        seen += 1;
    }
    assert_eq!(seen, 729);
}

#[test]
fn boolean_table_with_clear_margins() {
    let th = frozen();
    for bits in 0..64u32 {
        let on = |i: u32| bits & (1 << i) != 0;
        let pick = |i: u32, tau: f64| if on(i) { tau + 0.05 } else { tau - 0.05 };
        let c = CriteriaVector {
            s_ent: pick(0, th.tau_ent),
            mi: pick(1, th.tau_mi),
            eps: pick(2, th.tau_eps),
            pri: pick(3, th.tau_pri),
            spi: pick(4, th.tau_spi),
            acm: pick(5, th.tau_acm),
        };
        let want = expected([on(0), on(1), on(2), on(3)], on(4), on(5));
        assert_eq!(gate(&c, &th), want, "bits {bits:06b}");
    }
}
