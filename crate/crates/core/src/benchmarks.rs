//! Reference probabilistic forecasters: persistence, climatology and uniform.
//!
//! All three issue an unconditional distribution, so every horizon step
//! receives the same row of quantiles.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::csvqr::QuantileLevels;
use crate::{Error, Result};

pub const DEFAULT_PERSISTENCE_HOURS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkKind {
    /// Empirical distribution of the last `window_hours` observations.
    Persistence { window_hours: usize },
    /// Empirical distribution of all past observations.
    Climatology,
    /// Uniform on `[0, 1]`.
    Uniform,
}

impl BenchmarkKind {
    pub fn persistence() -> Self {
        BenchmarkKind::Persistence {
            window_hours: DEFAULT_PERSISTENCE_HOURS,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BenchmarkKind::Persistence { .. } => "persistence",
            BenchmarkKind::Climatology => "climatology",
            BenchmarkKind::Uniform => "uniform",
        }
    }

    /// Forecast `horizon` steps from the observed power history that precedes
    /// the issue time.
    pub fn forecast(
        &self,
        history: &[f64],
        horizon: usize,
        levels: &QuantileLevels,
    ) -> Result<Array2<f64>> {
        match *self {
            BenchmarkKind::Persistence { window_hours } => {
                persistence_forecast(history, window_hours, horizon, levels)
            }
            BenchmarkKind::Climatology => climatology_forecast(history, horizon, levels),
            BenchmarkKind::Uniform => Ok(uniform_forecast(horizon, levels)),
        }
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "persistence" => Ok(BenchmarkKind::persistence()),
            "climatology" => Ok(BenchmarkKind::Climatology),
            "uniform" => Ok(BenchmarkKind::Uniform),
            other => Err(Error::InvalidArgument(format!(
                "unknown benchmark {other:?}"
            ))),
        }
    }
}

/// Sample quantiles by linear interpolation between order statistics at the
/// 1-based position `tau (n - 1) + 1`.
pub fn empirical_quantiles(sample: &[f64], levels: &QuantileLevels) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument(
            "empirical quantiles of an empty sample".into(),
        ));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in sample".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let last = sorted.len() - 1;
    Ok(levels
        .as_slice()
        .iter()
        .map(|&tau| {
            let h = tau * last as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(last);
            let frac = h - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        })
        .collect())
}

fn repeat_row(row: &[f64], horizon: usize) -> Array2<f64> {
    Array2::from_shape_fn((horizon, row.len()), |(_, m)| row[m])
}

pub fn persistence_forecast(
    history: &[f64],
    window_hours: usize,
    horizon: usize,
    levels: &QuantileLevels,
) -> Result<Array2<f64>> {
    if window_hours == 0 {
        return Err(Error::InvalidArgument(
            "persistence window must be at least one hour".into(),
        ));
    }
    if history.len() < window_hours {
        return Err(Error::InvalidArgument(format!(
            "persistence needs {window_hours} observations, history has {}",
            history.len()
        )));
    }
    let row = empirical_quantiles(&history[history.len() - window_hours..], levels)?;
    Ok(repeat_row(&row, horizon))
}

pub fn climatology_forecast(
    history: &[f64],
    horizon: usize,
    levels: &QuantileLevels,
) -> Result<Array2<f64>> {
    let row = empirical_quantiles(history, levels)?;
    Ok(repeat_row(&row, horizon))
}

pub fn uniform_forecast(horizon: usize, levels: &QuantileLevels) -> Array2<f64> {
    repeat_row(levels.as_slice(), horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lv(t: &[f64]) -> QuantileLevels {
        QuantileLevels::new(t.to_vec()).unwrap()
    }

    #[test]
    fn empirical_examples() {
        assert_eq!(
            empirical_quantiles(&[0.8, 0.2, 0.6, 0.4], &lv(&[0.5])).unwrap(),
            vec![0.5]
        );
        assert_eq!(
            empirical_quantiles(&[0.3; 5], &QuantileLevels::deciles()).unwrap(),
            vec![0.3; 9]
        );
        let q = empirical_quantiles(&[0.9, 0.1, 0.5], &lv(&[0.25, 0.75])).unwrap();
        assert!((q[0] - 0.3).abs() < 1e-15 && (q[1] - 0.7).abs() < 1e-15);
        assert!(empirical_quantiles(&[], &lv(&[0.5])).is_err());
    }

    #[test]
    fn persistence_examples() {
        let levels = QuantileLevels::deciles();
        let mut history = vec![0.9; 20];
        history.extend([0.3; 12]);
        let f = persistence_forecast(&history, 12, 5, &levels).unwrap();
        assert!(f.iter().all(|&v| v == 0.3));

        let spread: Vec<f64> = (0..12).map(|k| k as f64 / 11.0).collect();
        let f = BenchmarkKind::persistence()
            .forecast(&spread, 2, &levels)
            .unwrap();
        assert_eq!(f.row(0), f.row(1));
        assert_eq!(
            f.row(0).to_vec(),
            empirical_quantiles(&spread, &levels).unwrap()
        );

        assert!(persistence_forecast(&[0.1; 11], 12, 1, &levels).is_err());
    }

    #[test]
    fn climatology_and_uniform() {
        let levels = lv(&[0.1, 0.5, 0.9]);
        let f = climatology_forecast(&[0.42], 3, &levels).unwrap();
        assert!(f.iter().all(|&v| v == 0.42));
        assert!(climatology_forecast(&[], 3, &levels).is_err());

        let u = uniform_forecast(4, &lv(&[0.1, 0.25, 0.9]));
        assert_eq!(u.row(3).to_vec(), vec![0.1, 0.25, 0.9]);
        assert!(((u[[0, 2]] - u[[0, 0]]) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn parse_names() {
        assert_eq!(
            "Uniform".parse::<BenchmarkKind>().unwrap(),
            BenchmarkKind::Uniform
        );
        assert_eq!(
            "persistence".parse::<BenchmarkKind>().unwrap(),
            BenchmarkKind::Persistence { window_hours: 12 }
        );
        assert!("knn".parse::<BenchmarkKind>().is_err());
    }

    proptest! {
        #[test]
        fn outputs_never_cross(sample in prop::collection::vec(0.0..1.0f64, 12..60), horizon in 1usize..5) {
            let levels = QuantileLevels::deciles();
            for kind in [BenchmarkKind::persistence(), BenchmarkKind::Climatology, BenchmarkKind::Uniform] {
                let f = kind.forecast(&sample, horizon, &levels).unwrap();
                for row in f.rows() {
                    prop_assert!(row.windows(2).into_iter().all(|w| w[0] <= w[1]));
                    prop_assert_eq!(row, f.row(0));
                }
            }
        }
    }
}
