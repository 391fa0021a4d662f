//! Lag selection with the sparse group lasso.
//!
//! The design holds every behavior column at lags `1..=max_lag`, grouped by
//! lag so a whole lag enters or leaves the model at once. The solver minimizes
//!
//! ```text
//! (1/2n)‖y − Xβ‖² + λ_g Σ_g √|g| ‖β_g‖₂ + λ_1 ‖β‖₁
//! ```
//!
//! by block coordinate descent: each block is minimized with proximal-gradient
//! steps of size `1/L_g`, where `L_g` is the largest eigenvalue of
//! `X_gᵀX_g / n`. The proximal map of the combined penalty is elementwise soft
//! thresholding followed by group soft thresholding.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::{dot, mean, norm2, Scalar};
use crate::timeseries::{Panel, Role};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LassoError {
    #[error("unknown target column '{0}'")]
    UnknownTarget(String),
    #[error("target column '{0}' is not a KPI column")]
    NotKpi(String),
    #[error("panel has {rows} rows; max_lag {max_lag} needs more than {}", .max_lag + 10)]
    InsufficientData { rows: usize, max_lag: usize },
    #[error("max_lag must be at least 1")]
    ZeroLag,
    #[error("target column '{0}' is constant")]
    ConstantResponse(String),
    #[error("no usable predictor columns (all behavior columns constant or absent)")]
    NoPredictors,
    #[error("design contains non-finite values")]
    NonFinite,
    #[error("negative regularization parameter")]
    NegativePenalty,
    #[error("no lag group was active in any run; lower the group penalty grid")]
    NothingSelected,
    #[error("no target columns given")]
    NoTargets,
}

/// Hyperparameters for [`lag_frequency`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoConfig {
    pub max_lag: usize,
    pub lambda_group_grid: Vec<f64>,
    pub lambda_l1_grid: Vec<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub active_threshold: f64,
    pub top_k: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            max_lag: 22,
            lambda_group_grid: vec![0.01, 0.1, 0.5, 1.0, 5.0, 10.0],
            lambda_l1_grid: vec![0.0, 0.01, 0.1, 0.5, 1.0],
            tolerance: 1e-6,
            max_iterations: 10_000,
            active_threshold: 1e-6,
            top_k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorColumn {
    pub variable: String,
    pub lag: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagGroup {
    pub lag: usize,
    pub columns: Range<usize>,
}

/// Lag-structured, standardized regression problem for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    pub target: String,
    /// Standardized target at `t = max_lag + row`.
    pub response: Vec<T>,
    pub predictors: Matrix<T>,
    pub columns: Vec<PredictorColumn>,
    /// Contiguous column ranges, one per lag, in increasing lag order.
    pub groups: Vec<LagGroup>,
    /// Per-column `(mean, scale)` used to standardize.
    pub standardization: Vec<(T, T)>,
    /// `(mean, scale)` of the response.
    pub response_standardization: (T, T),
    /// Constant columns removed before fitting.
    pub dropped: Vec<PredictorColumn>,
    pub max_lag: usize,
}

impl<T: Scalar> DesignMatrix<T> {
    pub fn rows(&self) -> usize {
        self.response.len()
    }

    /// Undoes standardization of predictor entry `(row, col)`.
    pub fn raw_value(&self, row: usize, col: usize) -> T {
        let (m, s) = self.standardization[col];
        self.predictors.get(row, col) * s + m
    }
}

fn standardize<T: Scalar>(values: &mut [T]) -> Option<(T, T)> {
    let m = mean(values);
    let var = values.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::from_usize_lossy(values.len());
    let sd = var.sqrt();
    if sd.is_nan() || sd <= T::epsilon() * (m.abs() + T::one()) {
        return None;
    }
    for v in values.iter_mut() {
        *v = (*v - m) / sd;
    }
    Some((m, sd))
}

/// Builds the lag design for `target` from every behavior column of `panel`.
pub fn build_design<T: Scalar>(panel: &Panel<T>, target: &str, max_lag: usize) -> Result<DesignMatrix<T>, LassoError> {
    if max_lag == 0 {
        return Err(LassoError::ZeroLag);
    }
    let col = panel
        .column(target)
        .ok_or_else(|| LassoError::UnknownTarget(target.to_string()))?;
    if col.role != Role::Kpi {
        return Err(LassoError::NotKpi(target.to_string()));
    }
    let len = panel.len();
    if len <= max_lag + 10 {
        return Err(LassoError::InsufficientData { rows: len, max_lag });
    }
    let rows = len - max_lag;
    let behaviors = panel.behavior_names();

    let mut response = col.series.values[max_lag..].to_vec();
    if response.iter().any(|v| !v.is_finite()) {
        return Err(LassoError::NonFinite);
    }
    let response_standardization =
        standardize(&mut response).ok_or_else(|| LassoError::ConstantResponse(target.to_string()))?;

    let mut data = Vec::new();
    let mut columns = Vec::new();
    let mut groups = Vec::new();
    let mut standardization = Vec::new();
    let mut dropped = Vec::new();
    for lag in 1..=max_lag {
        let start = columns.len();
        for &var in &behaviors {
            let series = panel.values(var).expect("listed column");
            let mut values: Vec<T> = (0..rows).map(|r| series[max_lag + r - lag]).collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(LassoError::NonFinite);
            }
            let meta = PredictorColumn {
                variable: var.to_string(),
                lag,
            };
            match standardize(&mut values) {
                Some(ms) => {
                    data.push(values);
                    columns.push(meta);
                    standardization.push(ms);
                }
                None => dropped.push(meta),
            }
        }
        if columns.len() > start {
            groups.push(LagGroup {
                lag,
                columns: start..columns.len(),
            });
        }
    }
    if columns.is_empty() {
        return Err(LassoError::NoPredictors);
    }
    Ok(DesignMatrix {
        target: target.to_string(),
        response,
        predictors: Matrix::from_columns(&data),
        columns,
        groups,
        standardization,
        response_standardization,
        dropped,
        max_lag,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: T::lit(1e-6),
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SglFit<T> {
    pub coefficients: Vec<T>,
    /// Completed sweeps over all groups.
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each sweep (the first entry is the starting point).
    pub objective_trace: Vec<T>,
}

impl<T: Scalar> SglFit<T> {
    /// Lags whose group has any coefficient above `threshold` in magnitude.
    pub fn active_lags(&self, design: &DesignMatrix<T>, threshold: T) -> Vec<usize> {
        design
            .groups
            .iter()
            .filter(|g| self.coefficients[g.columns.clone()].iter().any(|b| b.abs() > threshold))
            .map(|g| g.lag)
            .collect()
    }

    pub fn group_norm(&self, design: &DesignMatrix<T>, lag: usize) -> T {
        design
            .groups
            .iter()
            .find(|g| g.lag == lag)
            .map_or(T::zero(), |g| norm2(&self.coefficients[g.columns.clone()]))
    }
}

fn soft<T: Scalar>(x: T, t: T) -> T {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        T::zero()
    }
}

/// Largest eigenvalue of `X_gᵀX_g / n` by power iteration on the Gram matrix.
fn block_lipschitz<T: Scalar>(x: &Matrix<T>, cols: Range<usize>) -> T {
    let p = cols.len();
    let n = T::from_usize_lossy(x.rows());
    let mut gram = vec![T::zero(); p * p];
    for (a, ca) in cols.clone().enumerate() {
        for (b, cb) in cols.clone().enumerate().skip(a) {
            let v = dot(x.col(ca), x.col(cb)) / n;
            gram[a * p + b] = v;
            gram[b * p + a] = v;
        }
    }
    let mut v = vec![T::one() / T::from_usize_lossy(p).sqrt(); p];
    let mut lambda = T::zero();
    for _ in 0..1000 {
        let w: Vec<T> = (0..p).map(|i| dot(&gram[i * p..(i + 1) * p], &v)).collect();
        let nw = norm2(&w);
        if nw == T::zero() {
            return T::min_positive_value();
        }
        let next = dot(&v, &w);
        v = w.into_iter().map(|x| x / nw).collect();
        let done = (next - lambda).abs() <= T::lit(1e-12) * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    // the Rayleigh quotient approaches from below; pad it so 1/L stays a safe step
    let trace: T = (0..p).map(|i| gram[i * p + i]).sum();
    (lambda * T::lit(1.01)).min(trace).max(T::min_positive_value())
}

/// Reusable solver for one design across many penalty values.
#[derive(Debug, Clone)]
pub struct SglSolver<'a, T> {
    design: &'a DesignMatrix<T>,
    lipschitz: Vec<T>,
    weights: Vec<T>,
}

impl<'a, T: Scalar> SglSolver<'a, T> {
    pub fn new(design: &'a DesignMatrix<T>) -> Self {
        let lipschitz = design
            .groups
            .iter()
            .map(|g| block_lipschitz(&design.predictors, g.columns.clone()))
            .collect();
        let weights = design
            .groups
            .iter()
            .map(|g| T::from_usize_lossy(g.columns.len()).sqrt())
            .collect();
        Self {
            design,
            lipschitz,
            weights,
        }
    }

    pub fn solve(
        &self,
        lambda_group: T,
        lambda_l1: T,
        options: &SolverOptions<T>,
        warm_start: Option<&[T]>,
    ) -> Result<SglFit<T>, LassoError> {
        if lambda_group < T::zero() || lambda_l1 < T::zero() {
            return Err(LassoError::NegativePenalty);
        }
        let d = self.design;
        let x = &d.predictors;
        if !x.is_finite() || d.response.iter().any(|v| !v.is_finite()) {
            return Err(LassoError::NonFinite);
        }
        let n = T::from_usize_lossy(d.rows());
        let mut beta = warm_start.map_or_else(|| vec![T::zero(); x.cols()], <[T]>::to_vec);
        let fitted = x.mul_vec(&beta);
        let mut resid: Vec<T> = d.response.iter().zip(&fitted).map(|(&y, &f)| y - f).collect();

        let objective_of = |beta: &[T], resid: &[T]| -> T {
            let loss = dot(resid, resid) / (T::lit(2.0) * n);
            let group_pen: T = d
                .groups
                .iter()
                .zip(&self.weights)
                .map(|(g, &w)| w * norm2(&beta[g.columns.clone()]))
                .sum();
            let l1: T = beta.iter().map(|b| b.abs()).sum();
            loss + lambda_group * group_pen + lambda_l1 * l1
        };

        let mut trace = vec![objective_of(&beta, &resid)];
        let inner_tol = options.tolerance * T::lit(0.1);
        let mut converged = false;
        let mut iterations = 0;
        let mut block_old = Vec::new();
        let mut block_new = Vec::new();

        while iterations < options.max_iterations {
            iterations += 1;
            let mut max_change = T::zero();
            for (gi, g) in d.groups.iter().enumerate() {
                let step = T::one() / self.lipschitz[gi];
                let threshold_group = lambda_group * self.weights[gi] * step;
                let threshold_l1 = lambda_l1 * step;
                block_old.clear();
                block_old.extend_from_slice(&beta[g.columns.clone()]);
                for _inner in 0..100 {
                    block_new.clear();
                    for c in g.columns.clone() {
                        let grad = -dot(x.col(c), &resid) / n;
                        block_new.push(soft(beta[c] - step * grad, threshold_l1));
                    }
                    let norm = norm2(&block_new);
                    let shrink = if norm <= threshold_group {
                        T::zero()
                    } else {
                        T::one() - threshold_group / norm
                    };
                    let mut inner_change = T::zero();
                    for (k, c) in g.columns.clone().enumerate() {
                        let updated = block_new[k] * shrink;
                        let delta = updated - beta[c];
                        if delta != T::zero() {
                            for (r, &xv) in resid.iter_mut().zip(x.col(c)) {
                                *r -= xv * delta;
                            }
                            beta[c] = updated;
                        }
                        inner_change = inner_change.max(delta.abs());
                    }
                    if inner_change <= inner_tol {
                        break;
                    }
                }
                for (k, c) in g.columns.clone().enumerate() {
                    max_change = max_change.max((beta[c] - block_old[k]).abs());
                }
            }
            trace.push(objective_of(&beta, &resid));
            if max_change < options.tolerance {
                converged = true;
                break;
            }
        }
        Ok(SglFit {
            coefficients: beta,
            iterations,
            converged,
            objective_trace: trace,
        })
    }
}

/// Fits the sparse group lasso from a cold start.
pub fn sparse_group_lasso<T: Scalar>(
    design: &DesignMatrix<T>,
    lambda_group: T,
    lambda_l1: T,
    options: &SolverOptions<T>,
) -> Result<SglFit<T>, LassoError> {
    SglSolver::new(design).solve(lambda_group, lambda_l1, options, None)
}

/// Objective value at `beta`.
pub fn objective<T: Scalar>(design: &DesignMatrix<T>, beta: &[T], lambda_group: T, lambda_l1: T) -> T {
    let n = T::from_usize_lossy(design.rows());
    let fitted = design.predictors.mul_vec(beta);
    let ssr: T = design
        .response
        .iter()
        .zip(&fitted)
        .map(|(&y, &f)| (y - f) * (y - f))
        .sum();
    let group_pen: T = design
        .groups
        .iter()
        .map(|g| T::from_usize_lossy(g.columns.len()).sqrt() * norm2(&beta[g.columns.clone()]))
        .sum();
    let l1: T = beta.iter().map(|b| b.abs()).sum();
    ssr / (T::lit(2.0) * n) + lambda_group * group_pen + lambda_l1 * l1
}

/// Largest violation of the subgradient optimality conditions at `beta`.
pub fn kkt_residual<T: Scalar>(design: &DesignMatrix<T>, beta: &[T], lambda_group: T, lambda_l1: T) -> T {
    let n = T::from_usize_lossy(design.rows());
    let fitted = design.predictors.mul_vec(beta);
    let resid: Vec<T> = design.response.iter().zip(&fitted).map(|(&y, &f)| y - f).collect();
    let corr = design.predictors.tr_mul_vec(&resid);
    let mut worst = T::zero();
    for g in &design.groups {
        let w = T::from_usize_lossy(g.columns.len()).sqrt();
        let bg = &beta[g.columns.clone()];
        let bnorm = norm2(bg);
        if bnorm == T::zero() {
            let shrunk: Vec<T> = g.columns.clone().map(|c| soft(corr[c] / n, lambda_l1)).collect();
            worst = worst.max(norm2(&shrunk) - lambda_group * w);
        } else {
            for (k, c) in g.columns.clone().enumerate() {
                let gj = corr[c] / n;
                let v = if bg[k] != T::zero() {
                    (gj - lambda_l1 * bg[k].signum() - lambda_group * w * bg[k] / bnorm).abs()
                } else {
                    gj.abs() - lambda_l1
                };
                worst = worst.max(v);
            }
        }
    }
    worst.max(T::zero())
}

/// One fitted point of the hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub target: String,
    pub lambda_group: f64,
    pub lambda_l1: f64,
    pub active_lags: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagSelection {
    /// Lag → number of runs in which its group was active (every lag
    /// `1..=max_lag` present).
    pub frequency: BTreeMap<usize, usize>,
    /// Top lags, ascending.
    pub selected: Vec<usize>,
    /// Top lags in rank order (frequency descending, smaller lag first on ties).
    pub ranking: Vec<usize>,
    pub runs: Vec<GridRun>,
    pub max_lag: usize,
}

/// Counts how often each lag group is active across the `(λ_g, λ_1, target)`
/// grid and returns the most frequent lags.
///
/// For each target and `λ_1`, the `λ_g` grid is solved from the largest
/// penalty down with warm starts.
pub fn lag_frequency<T: Scalar>(panel: &Panel<T>, targets: &[&str], config: &LassoConfig) -> Result<LagSelection, LassoError> {
    if targets.is_empty() {
        return Err(LassoError::NoTargets);
    }
    if config
        .lambda_group_grid
        .iter()
        .chain(&config.lambda_l1_grid)
        .any(|&l| l < 0.0)
    {
        return Err(LassoError::NegativePenalty);
    }
    let designs: Vec<DesignMatrix<T>> = targets
        .iter()
        .map(|t| build_design(panel, t, config.max_lag))
        .collect::<Result<_, _>>()?;

    let mut group_grid = config.lambda_group_grid.clone();
    group_grid.sort_by(|a, b| b.total_cmp(a));
    let options = SolverOptions {
        tolerance: T::lit(config.tolerance),
        max_iterations: config.max_iterations,
    };
    let threshold = T::lit(config.active_threshold);

    let chains: Vec<(usize, f64)> = (0..designs.len())
        .flat_map(|d| config.lambda_l1_grid.iter().map(move |&l1| (d, l1)))
        .collect();
    let solvers: Vec<SglSolver<'_, T>> = designs.iter().map(SglSolver::new).collect();

    let runs: Vec<Vec<GridRun>> = chains
        .par_iter()
        .map(|&(d, l1)| {
            let solver = &solvers[d];
            let mut warm: Option<Vec<T>> = None;
            let mut out = Vec::with_capacity(group_grid.len());
            for &lg in &group_grid {
                let fit = solver.solve(T::lit(lg), T::lit(l1), &options, warm.as_deref())?;
                out.push(GridRun {
                    target: designs[d].target.clone(),
                    lambda_group: lg,
                    lambda_l1: l1,
                    active_lags: fit.active_lags(&designs[d], threshold),
                    iterations: fit.iterations,
                    converged: fit.converged,
                });
                warm = Some(fit.coefficients);
            }
            Ok(out)
        })
        .collect::<Result<_, LassoError>>()?;
    let runs: Vec<GridRun> = runs.into_iter().flatten().collect();

    let mut frequency: BTreeMap<usize, usize> = (1..=config.max_lag).map(|l| (l, 0)).collect();
    for r in &runs {
        for &l in &r.active_lags {
            *frequency.get_mut(&l).expect("lag within window") += 1;
        }
    }
    let ranking = top_lags(&frequency, config.top_k);
    if ranking.is_empty() {
        return Err(LassoError::NothingSelected);
    }
    let mut selected = ranking.clone();
    selected.sort_unstable();
    Ok(LagSelection {
        frequency,
        selected,
        ranking,
        runs,
        max_lag: config.max_lag,
    })
}

/// Lags with nonzero frequency ordered by frequency (descending) then lag
/// (ascending), truncated to `k`.
pub fn top_lags(frequency: &BTreeMap<usize, usize>, k: usize) -> Vec<usize> {
    let mut lags: Vec<(usize, usize)> = frequency
        .iter()
        .filter(|(_, &f)| f > 0)
        .map(|(&l, &f)| (l, f))
        .collect();
    lags.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    lags.into_iter().take(k).map(|(l, _)| l).collect()
}
