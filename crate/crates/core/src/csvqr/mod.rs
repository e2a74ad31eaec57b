//! Multi-quantile support vector regression with non-crossing constraints.
//!
//! For levels `tau_1 < ... < tau_M` the estimator fits `f_m(x) = w_m' phi(x)`
//! (no bias) by minimizing
//!
//! ```text
//! sum_m [ 1/2 |w_m|^2 + C sum_i ( tau_m xi+_mi + (1 - tau_m) xi-_mi ) ]
//! ```
//!
//! subject to the usual pinball slack constraints and `f_m(x_i) <= f_{m+1}(x_i)`
//! at every training input. The problem is solved in the dual, whose
//! variables are `alpha+`, `alpha-` (one pair per level and point) and a
//! crossing multiplier `lambda` per adjacent level pair and point. Fitted
//! functions are kernel expansions with coefficients
//! `(alpha+_m - alpha-_m) - (lambda_m - lambda_{m-1})`.

mod dual;
mod io;
mod levels;
mod model;
mod solver;

pub use dual::{
    coefficients, dual_gradient, dual_objective, kkt_violation, DualGradient, DualSolution,
};
pub use io::{read_model, write_model, MODEL_MAGIC};
pub use levels::QuantileLevels;
pub use model::{predict_intervals, CsvqrModel, PredictionInterval};
pub use solver::{
    solve_dual, solve_dual_observed, solve_single_quantile, CsvqrConfig, SolveStatus,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
