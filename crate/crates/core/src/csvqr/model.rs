use ndarray::{Array2, ArrayView2};

use super::{coefficients, solve_dual, CsvqrConfig, DualSolution, QuantileLevels, SolveStatus};
use crate::dataset::MinMaxScaler;
use crate::kernels::{gram, gram_cross};
use crate::metrics::pinball_unchecked;
use crate::{Error, Result};

/// A fitted non-crossing quantile regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvqrModel {
    /// Training inputs after scaling, `N x p`.
    pub support: Array2<f64>,
    pub dual: DualSolution,
    pub levels: QuantileLevels,
    pub config: CsvqrConfig,
    /// Applied to query rows before kernel evaluation, if present.
    pub scaler: Option<MinMaxScaler>,
    pub status: SolveStatus,
    coef: Array2<f64>,
}

impl CsvqrModel {
    /// Fit on inputs that are already on the scale the kernel should see.
    pub fn fit(
        x: ArrayView2<'_, f64>,
        y: &[f64],
        levels: &QuantileLevels,
        config: &CsvqrConfig,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "{} input rows, {} targets",
                x.nrows(),
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature value".into()));
        }
        config.validate()?;
        let g = gram(&config.kernel, x)?;
        let (dual, status) = solve_dual(g.view(), y, levels, config)?;
        Ok(Self::from_parts(
            x.to_owned(),
            dual,
            levels.clone(),
            *config,
            None,
            status,
        ))
    }

    /// Fit a min-max scaler on `x_raw`, scale, and fit. Queries passed to
    /// [`predict`](Self::predict) are raw and scaled internally.
    pub fn fit_scaled(
        x_raw: ArrayView2<'_, f64>,
        y: &[f64],
        levels: &QuantileLevels,
        config: &CsvqrConfig,
    ) -> Result<Self> {
        let scaler = MinMaxScaler::fit(x_raw)?;
        let x = scaler.transform(x_raw)?;
        let mut model = Self::fit(x.view(), y, levels, config)?;
        model.scaler = Some(scaler);
        Ok(model)
    }

    pub fn from_parts(
        support: Array2<f64>,
        dual: DualSolution,
        levels: QuantileLevels,
        config: CsvqrConfig,
        scaler: Option<MinMaxScaler>,
        status: SolveStatus,
    ) -> Self {
        let coef = coefficients(&dual);
        CsvqrModel {
            support,
            dual,
            levels,
            config,
            scaler,
            status,
            coef,
        }
    }

    pub fn n_features(&self) -> usize {
        self.support.ncols()
    }

    /// Expansion coefficients, `M x N`.
    pub fn coefficients(&self) -> &Array2<f64> {
        &self.coef
    }

    /// Quantile estimates for raw query rows, `m x M`, before clamping.
    pub fn predict_unclamped(&self, x_query: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x_query.ncols() != self.n_features() {
            return Err(Error::Dimension(format!(
                "model expects {} features, query has {}",
                self.n_features(),
                x_query.ncols()
            )));
        }
        let scaled;
        let q = match &self.scaler {
            Some(s) => {
                scaled = s.transform(x_query)?;
                scaled.view()
            }
            None => x_query,
        };
        let k = gram_cross(&self.config.kernel, self.support.view(), q)?;
        Ok(k.dot(&self.coef.t()))
    }

    /// Quantile estimates for raw query rows; column `m` is level `m`.
    pub fn predict(&self, x_query: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut out = self.predict_unclamped(x_query)?;
        if self.config.clamp {
            out.mapv_inplace(|v| v.clamp(0.0, 1.0));
        }
        Ok(out)
    }

    /// Fitted values at the training inputs, `N x M`, unclamped.
    pub fn fitted_training(&self) -> Array2<f64> {
        let g = gram(&self.config.kernel, self.support.view()).expect("support is nonempty");
        g.dot(&self.coef.t())
    }

    /// Primal objective
    /// `sum_m [ 1/2 |w_m|^2 + C sum_i pinball(y_i - f_m(x_i), tau_m) ]`
    /// with `|w_m|^2 = beta_m' G beta_m` and `f_m` evaluated at `x`
    /// (unclamped).
    pub fn primal_objective(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> Result<f64> {
        if x.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "{} input rows, {} targets",
                x.nrows(),
                y.len()
            )));
        }
        let g = gram(&self.config.kernel, self.support.view())?;
        let f = self.predict_unclamped(x)?;
        let mut total = 0.0;
        for (m, &tau) in self.levels.as_slice().iter().enumerate() {
            let b = self.coef.row(m);
            let norm2 = b.dot(&g.dot(&b));
            let slack: f64 = f
                .column(m)
                .iter()
                .zip(y)
                .map(|(fi, yi)| pinball_unchecked(yi - fi, tau))
                .sum();
            total += 0.5 * norm2 + self.config.c * slack;
        }
        Ok(total)
    }

    /// Number of `(row, m)` cells where `q_m > q_{m+1} + tol`.
    pub fn count_crossings(quantiles: ArrayView2<'_, f64>, tol: f64) -> usize {
        quantiles
            .rows()
            .into_iter()
            .map(|r| {
                r.windows(2)
                    .into_iter()
                    .filter(|w| w[0] > w[1] + tol)
                    .count()
            })
            .sum()
    }
}

/// Interval series between two quantile levels.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionInterval {
    pub lower_level: f64,
    pub upper_level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PredictionInterval {
    /// Nominal coverage in percent, `100 (tau_u - tau_l)`, computed through
    /// [`beta`](Self::beta) so that `ace = |picp - pinc|` holds bit for bit.
    pub fn nominal_coverage(&self) -> f64 {
        100.0 * (1.0 - self.beta())
    }

    /// `beta` such that the nominal coverage is `100 (1 - beta)`.
    pub fn beta(&self) -> f64 {
        1.0 - (self.upper_level - self.lower_level)
    }
}

/// Extract `[q_{tau_l}, q_{tau_u}]` series for each requested level pair.
pub fn predict_intervals(
    quantiles: ArrayView2<'_, f64>,
    levels: &QuantileLevels,
    pairs: &[(f64, f64)],
) -> Result<Vec<PredictionInterval>> {
    if quantiles.ncols() != levels.len() {
        return Err(Error::Dimension(format!(
            "{} forecast columns for {} levels",
            quantiles.ncols(),
            levels.len()
        )));
    }
    pairs
        .iter()
        .map(|&(lo, hi)| {
            if lo >= hi {
                return Err(Error::InvalidArgument(format!(
                    "interval lower level {lo} not below upper {hi}"
                )));
            }
            let find = |t: f64| {
                levels.index_of(t).ok_or_else(|| {
                    Error::InvalidArgument(format!("quantile level {t} was not estimated"))
                })
            };
            let (il, iu) = (find(lo)?, find(hi)?);
            Ok(PredictionInterval {
                lower_level: levels.as_slice()[il],
                upper_level: levels.as_slice()[iu],
                lower: quantiles.column(il).to_vec(),
                upper: quantiles.column(iu).to_vec(),
            })
        })
        .collect()
}
