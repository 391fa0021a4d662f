//! Pairwise Granger causality via nested autoregressions and an F-test.
//!
//! For lag order `L` the restricted model regresses `y_t` on
//! `y_{t−1}..y_{t−L}`; the unrestricted model adds `x_{t−1}..x_{t−L}`. Both use
//! the same rows `t = L..T` and an intercept, absorbed by demeaning every
//! column over that sample. With `n = T − L` regression observations,
//!
//! ```text
//! F = ((SSR_r − SSR_u) / L) / (SSR_u / (n − 2L − 1))
//! ```
//!
//! and the p-value is the upper tail of `F(L, n − 2L − 1)`.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{least_squares, LeastSquares, LinalgError, Matrix};
use crate::scalar::{mean, Scalar};
use crate::special::f_survival;
use crate::timeseries::Panel;

/// Significance level used throughout the causal analysis.
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrangerError {
    #[error("series lengths differ ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },
    #[error("lag order must be at least 1")]
    ZeroLag,
    #[error("series of length {len} too short for lag order {lag} (need more than {})", 2 * .lag + 10)]
    InsufficientData { len: usize, lag: usize },
    #[error("degenerate series: {0}")]
    Degenerate(String),
    #[error("no significant forward results; asymmetry ratio undefined")]
    UndefinedRatio,
    #[error("no lags to test")]
    NoLags,
}

/// Ordinary least squares on a full-rank design.
pub fn ols<T: Scalar>(design: &Matrix<T>, response: &[T]) -> Result<LeastSquares<T>, LinalgError> {
    least_squares(design, response)
}

/// One fitted autoregression of a Granger test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArFit<T> {
    /// Own-lag coefficients `α_1..α_L`, then cross-lag coefficients
    /// `β_1..β_L` when present.
    pub coefficients: Vec<T>,
    pub ssr: T,
    pub observations_used: usize,
    pub lag_order: usize,
}

/// One direction of a Granger test (`x → y`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DirectionalTest<T> {
    #[serde(with = "crate::scalar::serde_real")]
    pub f_statistic: T,
    pub p_value: T,
    pub df_num: usize,
    pub df_den: usize,
    pub restricted: ArFit<T>,
    pub unrestricted: ArFit<T>,
    /// The unrestricted model fits the sample exactly.
    pub exact_fit: bool,
}

fn centered<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    let m = mean(&v);
    for x in v.iter_mut() {
        *x -= m;
    }
    v
}

/// F-test of whether lags of `x` improve the autoregression of `y`.
pub fn directional_test<T: Scalar>(x: &[T], y: &[T], lag: usize) -> Result<DirectionalTest<T>, GrangerError> {
    if x.len() != y.len() {
        return Err(GrangerError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if lag == 0 {
        return Err(GrangerError::ZeroLag);
    }
    let len = y.len();
    if len <= 2 * lag + 10 {
        return Err(GrangerError::InsufficientData { len, lag });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(GrangerError::Degenerate("non-finite values".into()));
    }
    let n = len - lag;
    let response = centered(y[lag..].to_vec());
    let mut columns: Vec<Vec<T>> = Vec::with_capacity(2 * lag);
    for l in 1..=lag {
        columns.push(centered(y[lag - l..len - l].to_vec()));
    }
    for l in 1..=lag {
        columns.push(centered(x[lag - l..len - l].to_vec()));
    }
    let fit = |cols: &[Vec<T>], what: &str| {
        least_squares(&Matrix::from_columns(cols), &response)
            .map_err(|e| GrangerError::Degenerate(format!("{what} model: {e}")))
    };
    let restricted = fit(&columns[..lag], "restricted")?;
    let unrestricted = fit(&columns, "unrestricted")?;

    let df_num = lag;
    let df_den = n - 2 * lag - 1;
    let (ssr_r, ssr_u) = (restricted.ssr, unrestricted.ssr);
    if ssr_r <= T::zero() {
        return Err(GrangerError::Degenerate("target is perfectly explained by its own lags".into()));
    }
    let exact_fit = ssr_u <= T::epsilon() * ssr_r;
    let (f_statistic, p_value) = if exact_fit {
        (T::infinity(), T::zero())
    } else {
        let f = ((ssr_r - ssr_u).max(T::zero()) / T::from_usize_lossy(df_num))
            / (ssr_u / T::from_usize_lossy(df_den));
        (f, f_survival(f, T::from_usize_lossy(df_num), T::from_usize_lossy(df_den)))
    };
    let wrap = |ls: LeastSquares<T>| ArFit {
        coefficients: ls.coefficients,
        ssr: ls.ssr,
        observations_used: n,
        lag_order: lag,
    };
    Ok(DirectionalTest {
        f_statistic,
        p_value,
        df_num,
        df_den,
        restricted: wrap(restricted),
        unrestricted: wrap(unrestricted),
        exact_fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GrangerResult<T> {
    pub source: String,
    pub target: String,
    pub lag_order: usize,
    #[serde(with = "crate::scalar::serde_real")]
    pub f_statistic: T,
    pub p_value: T,
    pub significant: bool,
    #[serde(with = "crate::scalar::serde_real")]
    pub reverse_f_statistic: T,
    pub reverse_p_value: T,
    /// Significant forward and not significant in reverse.
    pub asymmetric: bool,
    pub df_num: usize,
    pub df_den: usize,
    pub observations: usize,
    #[serde(with = "crate::scalar::serde_real")]
    pub ssr_restricted: T,
    #[serde(with = "crate::scalar::serde_real")]
    pub ssr_unrestricted: T,
    pub exact_fit: bool,
}

/// Assembles a result from precomputed forward (`source → target`) and
/// reverse p-values.
pub fn result_from_p_values<T: Scalar>(
    source: &str,
    target: &str,
    lag: usize,
    p_value: T,
    reverse_p_value: T,
    alpha: f64,
) -> GrangerResult<T> {
    let a = T::lit(alpha);
    let significant = p_value < a;
    GrangerResult {
        source: source.to_string(),
        target: target.to_string(),
        lag_order: lag,
        f_statistic: T::nan(),
        p_value,
        significant,
        reverse_f_statistic: T::nan(),
        reverse_p_value,
        asymmetric: significant && reverse_p_value >= a,
        df_num: lag,
        df_den: 0,
        observations: 0,
        ssr_restricted: T::nan(),
        ssr_unrestricted: T::nan(),
        exact_fit: false,
    }
}

/// Tests `x → y` at lag order `lag`, together with the reverse `y → x`.
pub fn granger_test<T: Scalar>(
    source: &str,
    x: &[T],
    target: &str,
    y: &[T],
    lag: usize,
    alpha: f64,
) -> Result<GrangerResult<T>, GrangerError> {
    let fwd = directional_test(x, y, lag)?;
    let rev = directional_test(y, x, lag)?;
    let mut r = result_from_p_values(source, target, lag, fwd.p_value, rev.p_value, alpha);
    r.f_statistic = fwd.f_statistic;
    r.reverse_f_statistic = rev.f_statistic;
    r.df_den = fwd.df_den;
    r.observations = fwd.unrestricted.observations_used;
    r.ssr_restricted = fwd.restricted.ssr;
    r.ssr_unrestricted = fwd.unrestricted.ssr;
    r.exact_fit = fwd.exact_fit;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedTest {
    pub source: String,
    pub target: String,
    pub lag_order: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PairwiseResults<T> {
    pub results: Vec<GrangerResult<T>>,
    pub skipped: Vec<SkippedTest>,
}

/// Tests every behavior → KPI column pair at every lag order in `lags`.
///
/// Output order follows the panel's column order for source, then target,
/// then ascending lag. Degenerate pairs are reported in `skipped`.
pub fn test_all_pairs<T: Scalar>(panel: &Panel<T>, lags: &[usize], alpha: f64) -> Result<PairwiseResults<T>, GrangerError> {
    if lags.is_empty() {
        return Err(GrangerError::NoLags);
    }
    let mut lags = lags.to_vec();
    lags.sort_unstable();
    lags.dedup();
    let behaviors = panel.behavior_names();
    let kpis = panel.kpi_names();
    let mut jobs: Vec<(&str, &str, usize)> = Vec::new();
    for &s in &behaviors {
        for &t in &kpis {
            jobs.extend(lags.iter().map(|&l| (s, t, l)));
        }
    }

    let outcomes: Vec<Result<GrangerResult<T>, SkippedTest>> = jobs
        .par_iter()
        .map(|&(s, t, l)| {
            let x = panel.values(s).expect("listed column");
            let y = panel.values(t).expect("listed column");
            granger_test(s, x, t, y, l, alpha).map_err(|e| SkippedTest {
                source: s.to_string(),
                target: t.to_string(),
                lag_order: l,
                reason: e.to_string(),
            })
        })
        .collect();

    let mut out = PairwiseResults {
        results: Vec::new(),
        skipped: Vec::new(),
    };
    for o in outcomes {
        match o {
            Ok(r) => out.results.push(r),
            Err(s) => out.skipped.push(s),
        }
    }
    Ok(out)
}

/// Fraction of significant forward results whose reverse test is not
/// significant.
pub fn asymmetry_ratio<T: Scalar>(results: &[GrangerResult<T>]) -> Result<f64, GrangerError> {
    let significant: Vec<&GrangerResult<T>> = results.iter().filter(|r| r.significant).collect();
    if significant.is_empty() {
        return Err(GrangerError::UndefinedRatio);
    }
    let asymmetric = significant.iter().filter(|r| r.asymmetric).count();
    Ok(asymmetric as f64 / significant.len() as f64)
}

/// One cell of the lag × pair table; `reverse_p` only for significant cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub p: f64,
    pub significant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reverse_p: Option<f64>,
}

/// Results keyed by lag, then by `"<source> → <target>"`.
pub type GrangerTable = BTreeMap<usize, BTreeMap<String, TableCell>>;

pub fn results_table<T: Scalar>(results: &[GrangerResult<T>]) -> GrangerTable {
    let mut table = GrangerTable::new();
    for r in results {
        table.entry(r.lag_order).or_default().insert(
            format!("{} → {}", r.source, r.target),
            TableCell {
                p: r.p_value.as_f64(),
                significant: r.significant,
                reverse_p: r.significant.then(|| r.reverse_p_value.as_f64()),
            },
        );
    }
    table
}

/// CSV with `source,target,lag,F,p,reverse_p,significant,asymmetric`.
pub fn write_results_csv<T: Scalar, W: Write>(results: &[GrangerResult<T>], sink: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["source", "target", "lag", "F", "p", "reverse_p", "significant", "asymmetric"])?;
    for r in results {
        w.write_record([
            r.source.clone(),
            r.target.clone(),
            r.lag_order.to_string(),
            r.f_statistic.to_string(),
            r.p_value.to_string(),
            r.reverse_p_value.to_string(),
            r.significant.to_string(),
            r.asymmetric.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{DailySeries, Role};
    use chrono::NaiveDate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn perfect_predictability() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = noise(&mut rng, 100);
        let mut y = vec![0.0];
        y.extend_from_slice(&x[..99]);
        let r = granger_test("x", &x, "y", &y, 1, SIGNIFICANCE).unwrap();
        assert!(r.ssr_unrestricted < 1e-20);
        assert!(r.p_value < 1e-12);
        assert!(r.significant);
    }

    #[test]
    fn nested_models_and_sample_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = noise(&mut rng, 120);
        let y = noise(&mut rng, 120);
        let t = directional_test(&x, &y, 5).unwrap();
        assert!(t.restricted.ssr >= t.unrestricted.ssr);
        assert!(t.f_statistic >= 0.0);
        assert_eq!(t.restricted.observations_used, t.unrestricted.observations_used);
        assert_eq!(t.restricted.observations_used, 115);
        assert_eq!(t.df_den, 115 - 11);
        assert_eq!(t.unrestricted.coefficients.len(), 10);
    }

    #[test]
    fn affine_rescaling_of_source_keeps_p_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = noise(&mut rng, 150);
        let y: Vec<f64> = (0..150)
            .map(|t| if t >= 2 { 0.3 * x[t - 2] } else { 0.0 } + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect::<Vec<f64>>();
        let scaled: Vec<f64> = x.iter().map(|v| 1e3 * v - 42.0).collect();
        let a = directional_test(&x, &y, 3).unwrap();
        let b = directional_test(&scaled, &y, 3).unwrap();
        assert!((a.p_value - b.p_value).abs() < 1e-10);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = vec![1.0; 60];
        let y = noise(&mut rng, 60);
        assert!(matches!(directional_test(&x, &y, 2), Err(GrangerError::Degenerate(_))));
    }

    #[test]
    fn length_checks() {
        assert!(matches!(directional_test(&[0.0; 20], &[0.0; 21], 1), Err(GrangerError::LengthMismatch { .. })));
        assert!(matches!(directional_test(&[0.0; 20], &[0.0; 20], 5), Err(GrangerError::InsufficientData { .. })));
        assert!(matches!(directional_test(&[0.0; 20], &[0.0; 20], 0), Err(GrangerError::ZeroLag)));
    }

    #[test]
    fn asymmetry_ratio_counts() {
        let mk = |p: f64, rp: f64| result_from_p_values("a", "b", 1, p, rp, SIGNIFICANCE);
        let all_one_way = vec![mk(0.01, 0.5), mk(0.02, 0.2), mk(0.5, 0.01)];
        assert_eq!(asymmetry_ratio(&all_one_way).unwrap(), 1.0);
        let half = vec![mk(0.01, 0.5), mk(0.01, 0.01), mk(0.03, 0.04), mk(0.001, 0.06)];
        assert_eq!(asymmetry_ratio(&half).unwrap(), 0.5);
        assert_eq!(asymmetry_ratio(&[mk(0.5, 0.5)]), Err(GrangerError::UndefinedRatio));
        // the boundary: reverse p of exactly alpha is not significant
        assert!(mk(0.01, 0.05).asymmetric);
    }

    #[test]
    fn pairwise_counts_and_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let mut cols = Vec::new();
        for name in ["C", "I", "HI", "HB"] {
            cols.push((DailySeries::observed(name, d0, noise(&mut rng, 150)), Role::Behavior));
        }
        for name in ["TT", "pct"] {
            cols.push((DailySeries::observed(name, d0, noise(&mut rng, 150)), Role::Kpi));
        }
        cols.push((DailySeries::observed("flat", d0, vec![0.0; 150]), Role::Behavior));
        let panel = Panel::from_columns(d0, cols).unwrap();
        let out = test_all_pairs(&panel, &[2, 5, 6, 7, 15], SIGNIFICANCE).unwrap();
        assert_eq!(out.results.len(), 40);
        assert_eq!(out.skipped.len(), 10);
        assert_eq!(out.results[0].source, "C");
        assert_eq!(out.results[0].target, "TT");
        assert_eq!(out.results[0].lag_order, 2);
        assert_eq!(out.results[4].lag_order, 15);
        assert_eq!(out.results[5].target, "pct");
        let table = results_table(&out.results);
        assert_eq!(table.len(), 5);
        assert_eq!(table[&2].len(), 8);
    }

    #[test]
    fn results_csv_header() {
        let r = result_from_p_values("HB", "TT", 21, 0.039f64, 0.005, SIGNIFICANCE);
        let mut buf = Vec::new();
        write_results_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("source,target,lag,F,p,reverse_p,significant,asymmetric\n"));
        assert!(text.contains("HB,TT,21,NaN,0.039,0.005,true,false"));
    }

    #[test]
    fn json_round_trip_with_exact_fit() {
        let mut r = result_from_p_values("C", "TT", 2, 0.0f64, 0.3, SIGNIFICANCE);
        r.f_statistic = f64::INFINITY;
        let s = serde_json::to_string(&r).unwrap();
        let back: GrangerResult<f64> = serde_json::from_str(&s).unwrap();
        assert!(back.f_statistic.is_infinite());
        assert_eq!(back.p_value, 0.0);
    }
}
