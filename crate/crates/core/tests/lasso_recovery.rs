use std::collections::BTreeSet;

use actorcause_core::lag_selector::{build_design, lag_frequency, sparse_group_lasso, LassoConfig, SolverOptions};
use actorcause_core::synth::{generate_var, VarConfig, VarTerm};
use actorcause_core::timeseries::{DailySeries, Panel, Role};
use rayon::prelude::*;

/// x0..x3 behaviors, y4 KPI with y4 ← 0.8·x0(t−3).
fn planted(seed: u64) -> Panel<f64> {
    generate_var(&VarConfig {
        dimensions: 5,
        length: 300,
        terms: vec![VarTerm { target: 4, source: 0, lag: 3, coefficient: 0.8 }],
        noise_scale: 1.0,
        seed,
        kpi_columns: BTreeSet::from([4]),
    })
    .unwrap()
}

#[test]
fn planted_lag_is_selected() {
    let hits: usize = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let sel = lag_frequency(&planted(seed), &["y4"], &LassoConfig::default()).unwrap();
            usize::from(sel.selected.contains(&3))
        })
        .sum();
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn planted_group_dominates_at_the_knee() {
    let design = build_design(&planted(42), "y4", 22).unwrap();
    let n = design.rows() as f64;
    // smallest group penalty at which every group is zero (λ_1 = 0)
    let lambda_max = design
        .groups
        .iter()
        .map(|g| {
            let corr: f64 = g
                .columns
                .clone()
                .map(|j| {
                    let c: f64 = design.predictors.col(j).iter().zip(&design.response).map(|(a, b)| a * b).sum();
                    (c / n).powi(2)
                })
                .sum();
            corr.sqrt() / (g.columns.len() as f64).sqrt()
        })
        .fold(0.0, f64::max);
    let fit = sparse_group_lasso(&design, 0.5 * lambda_max, 0.0, &SolverOptions::default()).unwrap();
    let planted_norm = fit.group_norm(&design, 3);
    assert!(planted_norm > 0.0);
    for g in &design.groups {
        if g.lag != 3 {
            assert!(fit.group_norm(&design, g.lag) < 0.1 * planted_norm, "lag {}", g.lag);
        }
    }
}

#[test]
fn column_order_does_not_change_selection() {
    for seed in 0..5 {
        let panel = planted(seed);
        let mut columns: Vec<(DailySeries<f64>, Role)> = panel
            .columns()
            .iter()
            .map(|c| (c.series.clone(), c.role))
            .collect();
        columns.reverse();
        columns.rotate_left(2);
        let permuted = Panel::from_columns(panel.start_day(), columns).unwrap();
        let config = LassoConfig::default();
        let a = lag_frequency(&panel, &["y4"], &config).unwrap();
        let b = lag_frequency(&permuted, &["y4"], &config).unwrap();
        assert_eq!(a.selected, b.selected);
        assert_eq!(a.frequency, b.frequency);
    }
}
