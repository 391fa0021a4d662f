//! Directed causality graph over significant Granger results.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::granger::GrangerResult;
use crate::scalar::Scalar;
use crate::timeseries::Role;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    /// p-value of every tested lag order, significant or not.
    pub lag_p_values: BTreeMap<usize, f64>,
    pub reverse_p_values: BTreeMap<usize, f64>,
    pub min_p: f64,
    pub significant_lags: Vec<usize>,
    /// No significant lag is matched by a significant reverse test.
    pub asymmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CausalGraph {
    pub alpha: f64,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

/// Builds one edge per (source, target) pair with any lag below `alpha`.
///
/// Sources are tagged as behavior nodes and targets as KPI nodes. Nodes are
/// listed in order of first appearance; edges by (source, target).
pub fn build_graph<T: Scalar>(results: &[GrangerResult<T>], alpha: f64) -> CausalGraph {
    let mut nodes: Vec<Node> = Vec::new();
    let mut add_node = |name: &str, role: Role| {
        if !nodes.iter().any(|n| n.name == name) {
            nodes.push(Node {
                name: name.to_string(),
                role,
            });
        }
    };
    let mut pairs: BTreeMap<(&str, &str), Vec<&GrangerResult<T>>> = BTreeMap::new();
    for r in results {
        add_node(&r.source, Role::Behavior);
        add_node(&r.target, Role::Kpi);
        if r.source != r.target {
            pairs.entry((&r.source, &r.target)).or_default().push(r);
        }
    }

    let mut edges = Vec::new();
    for ((source, target), rs) in pairs {
        let significant: Vec<&&GrangerResult<T>> = rs.iter().filter(|r| r.p_value.as_f64() < alpha).collect();
        if significant.is_empty() {
            continue;
        }
        let mut significant_lags: Vec<usize> = significant.iter().map(|r| r.lag_order).collect();
        significant_lags.sort_unstable();
        significant_lags.dedup();
        edges.push(Edge {
            source: source.to_string(),
            target: target.to_string(),
            lag_p_values: rs.iter().map(|r| (r.lag_order, r.p_value.as_f64())).collect(),
            reverse_p_values: rs.iter().map(|r| (r.lag_order, r.reverse_p_value.as_f64())).collect(),
            min_p: significant.iter().map(|r| r.p_value.as_f64()).fold(f64::INFINITY, f64::min),
            significant_lags,
            asymmetric: significant.iter().all(|r| r.reverse_p_value.as_f64() >= alpha),
        });
    }
    CausalGraph { alpha, nodes, edges }
}

impl CausalGraph {
    pub fn edge(&self, source: &str, target: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.source == source && e.target == target)
    }

    /// The `k` edges with the smallest `min_p`, ties by (source, target).
    pub fn top_edges(&self, k: usize) -> Vec<&Edge> {
        let mut edges: Vec<&Edge> = self.edges.iter().collect();
        edges.sort_by(|a, b| {
            a.min_p
                .total_cmp(&b.min_p)
                .then_with(|| a.source.cmp(&b.source))
                .then_with(|| a.target.cmp(&b.target))
        });
        edges.truncate(k);
        edges
    }

    /// Keeps only the given edges, and the nodes they touch.
    pub fn restricted_to(&self, edges: &[&Edge]) -> CausalGraph {
        let keep: Vec<Edge> = edges.iter().map(|&e| e.clone()).collect();
        let nodes = self
            .nodes
            .iter()
            .filter(|n| keep.iter().any(|e| e.source == n.name || e.target == n.name))
            .cloned()
            .collect();
        CausalGraph {
            alpha: self.alpha,
            nodes,
            edges: keep,
        }
    }
}

/// Formats to three significant digits without trailing zeros.
pub fn format_p_value(p: f64) -> String {
    if !p.is_finite() {
        return p.to_string();
    }
    if p == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{p:.2e}").parse().unwrap_or(p);
    let exponent = rounded.abs().log10().floor() as i32;
    if exponent < -4 {
        let s = format!("{rounded:.2e}");
        let (mantissa, exp) = s.split_once('e').unwrap_or((&s, "0"));
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{exp}");
    }
    let decimals = (2 - exponent).max(0) as usize;
    trim_zeros(&format!("{rounded:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn quoted(name: &str) -> String {
    let mut out = String::with_capacity(name.len() + 2);
    out.push('"');
    for c in name.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Graphviz DOT text. Behavior nodes are ellipses, KPI nodes boxes;
/// bidirectional edges are dashed.
pub fn export_dot(graph: &CausalGraph) -> String {
    let mut out = String::from("digraph {\n");
    for n in &graph.nodes {
        let shape = match n.role {
            Role::Behavior => "ellipse",
            Role::Kpi => "box",
        };
        let _ = writeln!(out, "  {} [shape={shape}];", quoted(&n.name));
    }
    for e in &graph.edges {
        let lags: Vec<String> = e.significant_lags.iter().map(|l| l.to_string()).collect();
        let _ = write!(
            out,
            "  {} -> {} [label=\"{}\", lags=\"{}\"",
            quoted(&e.source),
            quoted(&e.target),
            format_p_value(e.min_p),
            lags.join(",")
        );
        if !e.asymmetric {
            out.push_str(", style=dashed");
        }
        out.push_str("];\n");
    }
    out.push_str("}\n");
    out
}

pub fn export_json(graph: &CausalGraph) -> serde_json::Result<String> {
    serde_json::to_string_pretty(graph)
}
