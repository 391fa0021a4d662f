use std::collections::BTreeSet;

use actorcause_core::causal_graph::{build_graph, export_dot, export_json};
use actorcause_core::granger::{result_from_p_values, GrangerResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_results(seed: u64, behaviors: usize, kpis: usize) -> Vec<GrangerResult<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for b in 0..behaviors {
        for k in 0..kpis {
            for lag in [2, 5, 6, 7, 15] {
                // skewed toward small p so a fair share of edges exist
                let p: f64 = rng.gen::<f64>().powi(4);
                let rp: f64 = rng.gen();
                out.push(result_from_p_values(&format!("HB@user={b}"), &format!("kpi {k}"), lag, p, rp, 0.05));
            }
        }
    }
    out
}

#[test]
fn edges_equal_filter_oracle() {
    for seed in 0..20 {
        let results = random_results(seed, 6, 3);
        let graph = build_graph(&results, 0.05);
        let oracle: BTreeSet<(String, String)> = results
            .iter()
            .filter(|r| r.p_value < 0.05)
            .map(|r| (r.source.clone(), r.target.clone()))
            .collect();
        let got: BTreeSet<(String, String)> = graph.edges.iter().map(|e| (e.source.clone(), e.target.clone())).collect();
        assert_eq!(got, oracle);
        assert!(graph.edges.len() <= 6 * 3);
        for e in &graph.edges {
            assert_ne!(e.source, e.target);
            assert!(!e.significant_lags.is_empty());
        }
    }
}

#[test]
fn top_edges_equal_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let results: Vec<GrangerResult<f64>> = (0..50)
        .map(|i| {
            // coarse p-values force ties
            let p = f64::from(rng.gen_range(1..40)) / 1000.0;
            result_from_p_values(&format!("b{}", i % 13), &format!("k{}", i / 13), 1, p, 0.5, 0.05)
        })
        .collect();
    let graph = build_graph(&results, 0.05);
    assert_eq!(graph.edges.len(), 50);
    let mut oracle: Vec<(f64, String, String)> = results.iter().map(|r| (r.p_value, r.source.clone(), r.target.clone())).collect();
    oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| (&a.1, &a.2).cmp(&(&b.1, &b.2))));
    oracle.truncate(10);
    let got: Vec<(f64, String, String)> = graph
        .top_edges(10)
        .iter()
        .map(|e| (e.min_p, e.source.clone(), e.target.clone()))
        .collect();
    assert_eq!(got, oracle);
    assert_eq!(graph.top_edges(100).len(), 50);
}

#[test]
fn dot_output_parses() {
    let graph = (0..1000)
        .map(|seed| build_graph(&random_results(seed, 4, 3), 0.05))
        .find(|g| g.edges.len() == 12)
        .expect("a fully connected 4 × 3 fixture");
    let dot = export_dot(&graph);
    let parsed = graphviz_rust::parse(&dot);
    assert!(parsed.is_ok(), "{parsed:?}\n{dot}");
    assert_eq!(dot.lines().filter(|l| l.contains("->")).count(), 12);

    let empty = build_graph(&random_results(1, 2, 1).into_iter().map(|mut r| {
        r.p_value = 0.5;
        r.significant = false;
        r
    }).collect::<Vec<_>>(), 0.05);
    let dot = export_dot(&empty);
    assert!(graphviz_rust::parse(&dot).is_ok(), "{dot}");
}

#[test]
fn rebuilding_is_byte_identical() {
    let results = random_results(3, 5, 2);
    let a = build_graph(&results, 0.05);
    let b = build_graph(&results, 0.05);
    assert_eq!(export_dot(&a), export_dot(&b));
    assert_eq!(export_json(&a).unwrap(), export_json(&b).unwrap());
}
