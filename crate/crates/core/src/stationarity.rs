//! Augmented Dickey-Fuller unit-root test (constant, no trend) with
//! Schwarz/BIC lag selection, and first-order differencing of panel columns
//! that fail it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{least_squares, LinalgError, Matrix};
use crate::scalar::{is_constant, Scalar};
use crate::timeseries::{DailySeries, Panel, Role, SeriesError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdfError {
    #[error("series is constant")]
    Degenerate,
    #[error("series has {got} observations, need at least {needed}")]
    InsufficientData { needed: usize, got: usize },
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("ADF regression is singular: {0}")]
    Singular(LinalgError),
    #[error("significance level {0} unsupported; use 0.01, 0.05 or 0.10")]
    UnsupportedLevel(f64),
}

#[derive(Debug, Error)]
pub enum StationarityError {
    #[error(transparent)]
    Adf(#[from] AdfError),
    #[error(transparent)]
    Panel(#[from] SeriesError),
}

/// Critical values of the constant-only Dickey-Fuller distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues<T> {
    #[serde(rename = "1%")]
    pub one_pct: T,
    #[serde(rename = "5%")]
    pub five_pct: T,
    #[serde(rename = "10%")]
    pub ten_pct: T,
}

impl<T: Scalar> CriticalValues<T> {
    /// Response-surface critical values for `nobs` regression observations
    /// (MacKinnon 2010, constant, one variable).
    pub fn for_sample(nobs: usize) -> Self {
        const SURFACE: [[f64; 4]; 3] = [
            [-3.43035, -6.5393, -16.786, -79.433],
            [-2.86154, -2.8903, -4.234, -40.040],
            [-2.56677, -1.5384, -2.809, 0.0],
        ];
        let inv = 1.0 / nobs as f64;
        let eval = |c: &[f64; 4]| T::lit(c[0] + c[1] * inv + c[2] * inv * inv + c[3] * inv * inv * inv);
        Self {
            one_pct: eval(&SURFACE[0]),
            five_pct: eval(&SURFACE[1]),
            ten_pct: eval(&SURFACE[2]),
        }
    }

    pub fn at(&self, level: f64) -> Result<T, AdfError> {
        const EPS: f64 = 1e-12;
        if (level - 0.01).abs() < EPS {
            Ok(self.one_pct)
        } else if (level - 0.05).abs() < EPS {
            Ok(self.five_pct)
        } else if (level - 0.10).abs() < EPS {
            Ok(self.ten_pct)
        } else {
            Err(AdfError::UnsupportedLevel(level))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AdfResult<T> {
    /// t-ratio of the lagged-level coefficient.
    #[serde(with = "crate::scalar::serde_real")]
    pub statistic: T,
    pub chosen_lag: usize,
    pub max_lag: usize,
    /// BIC of the chosen lag on the common estimation sample.
    pub criterion_value: T,
    /// Observations in the final regression.
    pub nobs: usize,
    pub critical_values: CriticalValues<T>,
    pub stationary_at_5pct: bool,
}

/// Schwert's rule `⌊12 (n/100)^{1/4}⌋`, capped at `n/2 − 2`.
pub fn default_max_lag(n: usize) -> usize {
    let schwert = (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;
    schwert.min((n / 2).saturating_sub(2))
}

/// ADF regression `Δy_t = α + γ y_{t−1} + Σ_{i≤p} δ_i Δy_{t−i}` over the rows
/// `first..Δy.len()` of the differenced series.
fn adf_regression<T: Scalar>(y: &[T], dy: &[T], lag: usize, first: usize) -> Result<(Matrix<T>, Vec<T>), AdfError> {
    let rows = dy.len() - first;
    let x = Matrix::from_fn(rows, lag + 2, |r, c| {
        let t = first + r;
        match c {
            0 => T::one(),
            1 => y[t],
            k => dy[t - (k - 1)],
        }
    });
    Ok((x, dy[first..].to_vec()))
}

fn bic<T: Scalar>(ssr: T, nobs: usize, params: usize) -> T {
    let n = T::from_usize_lossy(nobs);
    n * (ssr / n).ln() + T::from_usize_lossy(params) * n.ln()
}

/// Runs the ADF test. `max_lag = None` uses [`default_max_lag`].
///
/// Lags `0..=max_lag` are compared by BIC on the common sample that drops the
/// first `max_lag` differences; the chosen lag is then refitted on the
/// largest sample available to it.
pub fn adf_test<T: Scalar>(series: &[T], max_lag: Option<usize>) -> Result<AdfResult<T>, AdfError> {
    let n = series.len();
    if series.iter().any(|v| !v.is_finite()) {
        return Err(AdfError::NonFinite);
    }
    if is_constant(series) {
        return Err(AdfError::Degenerate);
    }
    let max_lag = match max_lag {
        Some(m) => {
            if n < m + 10 {
                return Err(AdfError::InsufficientData { needed: m + 10, got: n });
            }
            m
        }
        None => {
            if n < 10 {
                return Err(AdfError::InsufficientData { needed: 10, got: n });
            }
            default_max_lag(n)
        }
    };
    // the common sample must leave residual degrees of freedom for the largest model
    let common_obs = n - 1 - max_lag;
    if common_obs <= max_lag + 3 {
        return Err(AdfError::InsufficientData {
            needed: 2 * max_lag + 5,
            got: n,
        });
    }

    let dy: Vec<T> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let mut best: Option<(usize, T)> = None;
    for p in 0..=max_lag {
        let (x, target) = adf_regression(series, &dy, p, max_lag)?;
        let fit = least_squares(&x, &target).map_err(AdfError::Singular)?;
        let crit = bic(fit.ssr.max(T::min_positive_value()), common_obs, p + 2);
        if best.is_none_or(|(_, b)| crit < b) {
            best = Some((p, crit));
        }
    }
    let (chosen_lag, criterion_value) = best.expect("at least one lag evaluated");

    let (x, target) = adf_regression(series, &dy, chosen_lag, chosen_lag)?;
    let fit = least_squares(&x, &target).map_err(AdfError::Singular)?;
    let se = fit.standard_error(1);
    let statistic = if se > T::zero() {
        fit.coefficients[1] / se
    } else {
        T::neg_infinity()
    };
    let nobs = fit.observations();
    let critical_values = CriticalValues::for_sample(nobs);
    Ok(AdfResult {
        statistic,
        chosen_lag,
        max_lag,
        criterion_value,
        nobs,
        stationary_at_5pct: statistic < critical_values.five_pct,
        critical_values,
    })
}

/// `out[t] = x[t+1] − x[t]`.
pub fn difference<T: Scalar>(series: &[T]) -> Result<Vec<T>, AdfError> {
    if series.len() < 2 {
        return Err(AdfError::InsufficientData {
            needed: 2,
            got: series.len(),
        });
    }
    Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ColumnStationarity<T> {
    pub name: String,
    pub role: Role,
    pub original: Option<AdfResult<T>>,
    pub differenced: bool,
    pub after_difference: Option<AdfResult<T>>,
    /// Still failing after one round of differencing.
    pub still_nonstationary: bool,
    /// Why the column was not tested (e.g. constant series).
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StationarityReport<T> {
    pub alpha: f64,
    pub columns: Vec<ColumnStationarity<T>>,
    pub rows_trimmed: usize,
}

impl<T: Scalar> StationarityReport<T> {
    pub fn differenced(&self) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.differenced)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter_map(|c| {
                if c.still_nonstationary {
                    Some(format!("column '{}' is still non-stationary after differencing", c.name))
                } else {
                    c.skipped.as_ref().map(|r| format!("column '{}' not tested: {r}", c.name))
                }
            })
            .collect()
    }
}

/// Tests every column and replaces failing ones by their first difference.
///
/// When any column is differenced, every column loses its first day so the
/// calendar stays shared. Columns that cannot be tested (constant, too short)
/// are left untouched and reported.
pub fn ensure_stationary<T: Scalar>(
    panel: &Panel<T>,
    alpha: f64,
    max_lag: Option<usize>,
) -> Result<(Panel<T>, StationarityReport<T>), StationarityError> {
    // validate the level up front
    CriticalValues::<T>::for_sample(100).at(alpha)?;
    if panel.is_empty() {
        return Ok((
            panel.clone(),
            StationarityReport {
                alpha,
                columns: Vec::new(),
                rows_trimmed: 0,
            },
        ));
    }

    let decide = |r: &AdfResult<T>| -> bool { r.statistic < r.critical_values.at(alpha).expect("validated level") };

    let reports: Vec<ColumnStationarity<T>> = panel
        .columns()
        .par_iter()
        .map(|col| {
            let s = &col.series;
            let mut rep = ColumnStationarity {
                name: s.name.clone(),
                role: col.role,
                original: None,
                differenced: false,
                after_difference: None,
                still_nonstationary: false,
                skipped: None,
            };
            match adf_test(&s.values, max_lag) {
                Ok(r) => {
                    let stationary = decide(&r);
                    rep.original = Some(r);
                    if !stationary {
                        rep.differenced = true;
                        let d = difference(&s.values).expect("length checked by adf");
                        match adf_test(&d, max_lag) {
                            Ok(r2) => {
                                rep.still_nonstationary = !decide(&r2);
                                rep.after_difference = Some(r2);
                            }
                            Err(e) => {
                                rep.still_nonstationary = true;
                                rep.skipped = Some(format!("differenced series: {e}"));
                            }
                        }
                    }
                }
                Err(e) => rep.skipped = Some(e.to_string()),
            }
            rep
        })
        .collect();

    let any_differenced = reports.iter().any(|r| r.differenced);
    let rows_trimmed = usize::from(any_differenced);
    let columns = panel
        .columns()
        .iter()
        .zip(&reports)
        .map(|(col, rep)| {
            let s = &col.series;
            let series = if rep.differenced {
                DailySeries {
                    name: s.name.clone(),
                    start_day: panel.day(1),
                    values: difference(&s.values).expect("length checked"),
                    mask: s.mask.windows(2).map(|m| m[0] || m[1]).collect(),
                }
            } else {
                DailySeries {
                    name: s.name.clone(),
                    start_day: panel.day(rows_trimmed),
                    values: s.values[rows_trimmed..].to_vec(),
                    mask: s.mask[rows_trimmed..].to_vec(),
                }
            };
            (series, col.role)
        })
        .collect();
    let out = Panel::from_columns(panel.day(rows_trimmed), columns)?;
    Ok((
        out,
        StationarityReport {
            alpha,
            columns: reports,
            rows_trimmed,
        },
    ))
}
