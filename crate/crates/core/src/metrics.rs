//! Pinball loss, quantile score and prediction-interval reliability.
//!
//! Quantile levels are fractions in `(0, 1)` everywhere. Coverage figures
//! (PINC, PICP, ACE) are percentages.

use ndarray::ArrayView2;

use crate::{Error, Result};

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "quantile level {tau} not in (0, 1)"
        )))
    }
}

/// `tau * u` for `u >= 0`, `(tau - 1) * u` otherwise.
pub fn pinball(u: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(pinball_unchecked(u, tau))
}

#[inline]
pub(crate) fn pinball_unchecked(u: f64, tau: f64) -> f64 {
    if u >= 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}

/// Score of quantile estimate `q_hat` against observation `y`.
pub fn quantile_score(q_hat: f64, y: f64, tau: f64) -> Result<f64> {
    pinball(y - q_hat, tau)
}

/// Nominal vs. empirical coverage of one prediction interval series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityResult {
    pub pinc: f64,
    pub picp: f64,
    pub ace: f64,
}

/// Count of observations inside the closed interval `[lower, upper]`.
/// A crossed interval (`lower > upper`) contains nothing.
pub(crate) fn covered(lower: &[f64], upper: &[f64], y: &[f64]) -> usize {
    lower
        .iter()
        .zip(upper)
        .zip(y)
        .filter(|((l, u), v)| **l <= **v && **v <= **u)
        .count()
}

/// Percentage of observations falling inside their interval.
pub fn picp(lower: &[f64], upper: &[f64], y: &[f64]) -> Result<f64> {
    if lower.len() != y.len() || upper.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} lower bounds, {} upper bounds, {} observations",
            lower.len(),
            upper.len(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    if let Some(i) = lower.iter().zip(upper).position(|(l, u)| l > u) {
        return Err(Error::Validation(format!(
            "crossed interval at step {i}: lower {} > upper {}",
            lower[i], upper[i]
        )));
    }
    Ok(100.0 * covered(lower, upper, y) as f64 / y.len() as f64)
}

/// Like [`picp`] but a crossed interval counts as a miss instead of an error.
pub fn picp_lenient(lower: &[f64], upper: &[f64], y: &[f64]) -> Result<f64> {
    if lower.len() != y.len() || upper.len() != y.len() || y.is_empty() {
        return Err(Error::Dimension(
            "interval and observation lengths differ or are empty".into(),
        ));
    }
    Ok(100.0 * covered(lower, upper, y) as f64 / y.len() as f64)
}

/// `|picp - 100 (1 - beta)|`.
pub fn ace(picp: f64, beta: f64) -> Result<f64> {
    if !(0.0..=100.0).contains(&picp) {
        return Err(Error::InvalidArgument(format!(
            "PICP {picp} not in [0, 100]"
        )));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("beta {beta} not in (0, 1)")));
    }
    Ok((picp - 100.0 * (1.0 - beta)).abs())
}

pub fn reliability(
    lower: &[f64],
    upper: &[f64],
    y: &[f64],
    beta: f64,
) -> Result<ReliabilityResult> {
    let p = picp(lower, upper, y)?;
    Ok(ReliabilityResult {
        pinc: 100.0 * (1.0 - beta),
        picp: p,
        ace: ace(p, beta)?,
    })
}

/// Every per-cell quantile score of an `m x M` forecast matrix, row-major.
pub fn qscore_cells(quantiles: ArrayView2<'_, f64>, y: &[f64], levels: &[f64]) -> Result<Vec<f64>> {
    if quantiles.nrows() != y.len() || quantiles.ncols() != levels.len() {
        return Err(Error::Dimension(format!(
            "forecast matrix {:?} vs {} observations and {} levels",
            quantiles.dim(),
            y.len(),
            levels.len()
        )));
    }
    for &tau in levels {
        check_tau(tau)?;
    }
    let mut cells = Vec::with_capacity(quantiles.len());
    for (row, &obs) in quantiles.rows().into_iter().zip(y) {
        for (&q, &tau) in row.iter().zip(levels) {
            cells.push(pinball_unchecked(obs - q, tau));
        }
    }
    Ok(cells)
}

/// Mean and population standard deviation.
pub fn mean_sd(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("mean of an empty set".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Mean and population SD of the quantile score over all (step, level) cells.
pub fn aggregate_qscore(
    quantiles: ArrayView2<'_, f64>,
    y: &[f64],
    levels: &[f64],
) -> Result<(f64, f64)> {
    mean_sd(&qscore_cells(quantiles, y, levels)?)
}
