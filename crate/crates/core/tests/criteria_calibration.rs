mod common;

use common::*;
use ucip_core::criteria::{acm, mutual_information, pri, spi};
use ucip_core::qbm::{QbmModel, QbmParams};
use ucip_core::seeding::rng;
use ucip_core::Encoder;

#[test]
fn white_noise_stays_below_confound_ceilings() {
    let mut r = rng(21);
    let (mut spis, mut acms) = (Vec::new(), Vec::new());
    for seed in 0..30 {
        let t = noise_trajectory(&mut r, 100, seed);
        spis.push(spi(&t, 3).unwrap().value);
        acms.push(acm(&t, 20).unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&spis) < 0.2, "mean SPI {}", mean(&spis));
    assert!(acms.iter().all(|&a| a < 0.15), "ACM {acms:?}");
}

#[test]
fn independent_streams_have_negligible_mi() {
    // zero couplings: hidden samples never depend on the input
    let model = QbmModel::from_params(QbmParams::zeros(8, 0.5, 1.0));
    let encoder = Encoder::new(&model).unwrap();
    let mut r = rng(22);
    for seed in 0..5 {
        let t = noise_trajectory(&mut r, 100, seed);
        let mi = mutual_information(&encoder, &t, 5, seed).unwrap();
        assert!(!mi.flagged);
        assert!(mi.value < 0.05, "MI {}", mi.value);
    }
}

#[test]
fn heavy_noise_pri_approaches_random_subspace_overlap() {
    // each hidden unit reads its own visible bit, so noisy latents are isotropic
    let n_h = 7;
    let mut p = QbmParams::zeros(n_h, 0.5, 1.0);
    for j in 0..n_h {
        p.weights[(j, j)] = 2.0;
        p.hidden_bias[j] = -1.0;
    }
    let encoder = Encoder::new(&QbmModel::from_params(p)).unwrap();
    let mut r = rng(23);
    let k = 2;
    let values: Vec<f64> = (0..20)
        .map(|seed| {
            let t = noise_trajectory(&mut r, 100, seed);
            pri(&encoder, &t, 20, k, 10.0, 3, seed).unwrap()
        })
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let baseline = k as f64 / n_h as f64;
    assert!((mean - baseline).abs() < 0.1, "PRI {mean} vs k/n_h {baseline}");
}
