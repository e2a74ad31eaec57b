//! Non-crossing multi-quantile kernel regression for probabilistic forecasting.
//!
//! The crate fits several conditional quantiles of a target at once with a
//! support-vector quantile regressor whose quantile functions are constrained
//! not to cross at the training inputs. The model is trained in the dual with
//! an exact coordinate-ascent (SMO-style) solver.
//!
//! Around the estimator sits a small month-ahead wind-power forecasting
//! pipeline:
//!
//! - [`dataset`]: hourly CSV ingestion, calendar-month sliding windows, min-max scaling
//! - [`features`]: the 13 wind predictors derived from U/V wind components
//! - [`kernels`]: RBF and linear kernels, Gram matrices
//! - [`csvqr`]: the dual problem, the solver, fitted models and their file format
//! - [`metrics`]: pinball loss, quantile score, PICP and ACE
//! - [`benchmarks`]: persistence, climatology and uniform reference forecasters
//! - [`backtest`]: sliding-window evaluation, hyperparameter tuning, report export
//! - [`synthetic`]: a heteroscedastic process with closed-form conditional quantiles

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod benchmarks;
pub mod csvqr;
pub mod dataset;
mod error;
pub mod features;
pub mod kernels;
pub mod metrics;
pub mod synthetic;

pub use error::{Error, Result};
