use std::collections::BTreeSet;

use actorcause_core::stationarity::{adf_test, ensure_stationary};
use actorcause_core::synth::{generate_var, VarConfig, VarTerm};
use actorcause_core::timeseries::Panel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn walk(seed: u64, n: usize) -> Vec<f64> {
    noise(seed, n)
        .into_iter()
        .scan(0.0, |acc, e| {
            *acc += e;
            Some(*acc)
        })
        .collect()
}

#[test]
fn white_noise_rejects_unit_root() {
    let rejected = (0..100)
        .filter(|&s| adf_test(&noise(s, 500), None).unwrap().stationary_at_5pct)
        .count();
    assert!(rejected >= 95, "{rejected}/100");
}

#[test]
fn random_walk_keeps_unit_root() {
    let kept = (0..100)
        .filter(|&s| !adf_test(&walk(1000 + s, 500), None).unwrap().stationary_at_5pct)
        .count();
    assert!(kept >= 90, "{kept}/100");
}

#[test]
fn stable_var_panels_need_no_differencing() {
    let terms = vec![
        VarTerm { target: 4, source: 0, lag: 3, coefficient: 0.8 },
        VarTerm { target: 1, source: 1, lag: 1, coefficient: 0.5 },
        VarTerm { target: 2, source: 1, lag: 2, coefficient: 0.3 },
    ];
    let untouched = (0..20)
        .filter(|&seed| {
            let config = VarConfig {
                dimensions: 5,
                length: 300,
                terms: terms.clone(),
                noise_scale: 1.0,
                seed,
                kpi_columns: BTreeSet::from([4]),
            };
            let panel: Panel<f64> = generate_var(&config).unwrap();
            let (out, report) = ensure_stationary(&panel, 0.05, None).unwrap();
            report.rows_trimmed == 0 && out == panel
        })
        .count();
    assert!(untouched >= 18, "{untouched}/20");
}
