//! Behavioral Granger-causality analysis of process event logs.
//!
//! The pipeline classifies consecutive same-case events into continuation,
//! interruption and handover behaviors, aggregates them into daily series
//! alongside KPI series, makes the panel stationary, selects informative lags
//! with a sparse group lasso and runs pairwise Granger tests.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`.

pub mod behavior;
pub mod causal_graph;
pub mod event_log;
pub mod granger;
pub mod lag_selector;
pub mod linalg;
pub mod scalar;
pub mod special;
pub mod stationarity;
pub mod synth;
pub mod timeseries;

use thiserror::Error;

pub use behavior::{classify_log, ActorIndex, BehaviorType, Classification, Transition};
pub use causal_graph::{build_graph, export_dot, CausalGraph, Edge, Node};
pub use event_log::{parse_csv, parse_xes, validate_and_sort, Event, EventLog};
pub use lag_selector::LassoConfig;
pub use scalar::Scalar;
pub use synth::{generate_log, SynthLogConfig};
pub use timeseries::{Completion, Granularity, OutcomeRule, Role};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type DailySeries = timeseries::DailySeries<f64>;
pub type Panel = timeseries::Panel<f64>;
pub type AdfResult = stationarity::AdfResult<f64>;
pub type StationarityReport = stationarity::StationarityReport<f64>;
pub type DesignMatrix = lag_selector::DesignMatrix<f64>;
pub type SglFit = lag_selector::SglFit<f64>;
pub type ArFit = granger::ArFit<f64>;
pub type GrangerResult = granger::GrangerResult<f64>;
pub type PairwiseResults = granger::PairwiseResults<f64>;
pub type Matrix = linalg::Matrix<f64>;

/// Coarse failure class, used to pick a process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Parse,
    InsufficientData,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    EventLog(#[from] event_log::EventLogError),
    #[error(transparent)]
    Transitions(#[from] behavior::TransitionsIoError),
    #[error(transparent)]
    Series(#[from] timeseries::SeriesError),
    #[error(transparent)]
    Stationarity(#[from] stationarity::StationarityError),
    #[error(transparent)]
    Lasso(#[from] lag_selector::LassoError),
    #[error(transparent)]
    Granger(#[from] granger::GrangerError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use lag_selector::LassoError as L;
        use timeseries::SeriesError as S;
        match self {
            Error::EventLog(event_log::EventLogError::Empty) => ErrorKind::InsufficientData,
            Error::EventLog(_) | Error::Transitions(_) => ErrorKind::Parse,
            Error::Series(S::Csv(_) | S::Json(_) | S::Format(_) | S::Io(_)) => ErrorKind::Parse,
            Error::Series(S::MissingAttribute { .. }) => ErrorKind::Config,
            Error::Series(_) => ErrorKind::InsufficientData,
            Error::Stationarity(stationarity::StationarityError::Adf(
                stationarity::AdfError::InsufficientData { .. },
            )) => ErrorKind::InsufficientData,
            Error::Stationarity(stationarity::StationarityError::Adf(stationarity::AdfError::UnsupportedLevel(_))) => {
                ErrorKind::Config
            }
            Error::Stationarity(_) => ErrorKind::Numeric,
            Error::Lasso(L::UnknownTarget(_) | L::NotKpi(_) | L::NegativePenalty | L::ZeroLag | L::NoTargets) => {
                ErrorKind::Config
            }
            Error::Lasso(L::InsufficientData { .. } | L::NothingSelected) => ErrorKind::InsufficientData,
            Error::Lasso(_) => ErrorKind::Numeric,
            Error::Granger(granger::GrangerError::InsufficientData { .. }) => ErrorKind::InsufficientData,
            Error::Granger(granger::GrangerError::NoLags | granger::GrangerError::ZeroLag) => ErrorKind::Config,
            Error::Granger(_) => ErrorKind::Numeric,
            Error::Synth(_) => ErrorKind::Config,
        }
    }
}
