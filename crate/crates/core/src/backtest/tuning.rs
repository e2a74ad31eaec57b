use ndarray::{s, ArrayView2};
use rayon::prelude::*;

use crate::csvqr::{CsvqrConfig, CsvqrModel, QuantileLevels};
use crate::kernels::KernelSpec;
use crate::metrics::aggregate_qscore;
use crate::{Error, Result};

/// Candidate values for `C` and the RBF bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub cs: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        let root_p = (crate::features::N_FEATURES as f64).sqrt();
        HyperGrid {
            cs: vec![0.1, 1.0, 10.0, 100.0],
            sigmas: [0.5, 1.0, 2.0, 4.0].iter().map(|k| k * root_p).collect(),
        }
    }
}

impl HyperGrid {
    pub fn single(c: f64, sigma: f64) -> Self {
        HyperGrid {
            cs: vec![c],
            sigmas: vec![sigma],
        }
    }

    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.cs
            .iter()
            .flat_map(|&c| self.sigmas.iter().map(move |&s| (c, s)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.cs.len() * self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridScore {
    pub c: f64,
    pub sigma: f64,
    /// Mean pinball loss over the held-out tail, all levels.
    pub holdout_pinball: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: (f64, f64),
    pub scores: Vec<GridScore>,
}

pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.2;

/// Pick `(C, sigma)` by mean pinball loss on the chronological tail of the
/// training window.
///
/// Rows of `x_raw` must be in time order. The scaler is fit on the leading
/// part only. Ties go to the smaller `C`, then the smaller `sigma`.
pub fn tune_hyperparameters(
    x_raw: ArrayView2<'_, f64>,
    y: &[f64],
    grid: &HyperGrid,
    levels: &QuantileLevels,
    base: &CsvqrConfig,
    holdout_fraction: f64,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    if x_raw.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "{} rows, {} targets",
            x_raw.nrows(),
            y.len()
        )));
    }
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction {holdout_fraction} not in (0, 1)"
        )));
    }
    let n = y.len();
    let n_hold = (n as f64 * holdout_fraction).round() as usize;
    if n_hold == 0 || n_hold >= n {
        return Err(Error::InvalidArgument(format!(
            "training window of {n} rows is too small to hold out {:.0}%",
            100.0 * holdout_fraction
        )));
    }
    let split = n - n_hold;
    let (x_fit, x_hold) = (x_raw.slice(s![..split, ..]), x_raw.slice(s![split.., ..]));
    let (y_fit, y_hold) = (&y[..split], &y[split..]);

    let cells = grid.cells();
    if cells.len() == 1 {
        let (c, sigma) = cells[0];
        return Ok(TuneResult {
            best: (c, sigma),
            scores: vec![GridScore {
                c,
                sigma,
                holdout_pinball: f64::NAN,
            }],
        });
    }

    let scores: Vec<GridScore> = cells
        .par_iter()
        .map(|&(c, sigma)| -> Result<GridScore> {
            let cfg = CsvqrConfig {
                c,
                kernel: KernelSpec::rbf(sigma)?,
                ..*base
            };
            let model = CsvqrModel::fit_scaled(x_fit, y_fit, levels, &cfg)?;
            let q = model.predict(x_hold)?;
            let (mean, _) = aggregate_qscore(q.view(), y_hold, levels.as_slice())?;
            log::debug!("grid cell C={c} sigma={sigma:.4}: holdout pinball {mean:.6}");
            Ok(GridScore {
                c,
                sigma,
                holdout_pinball: mean,
            })
        })
        .collect::<Result<_>>()?;

    let best = scores
        .iter()
        .min_by(|a, b| {
            a.holdout_pinball
                .total_cmp(&b.holdout_pinball)
                .then(a.c.total_cmp(&b.c))
                .then(a.sigma.total_cmp(&b.sigma))
        })
        .expect("grid is nonempty");
    Ok(TuneResult {
        best: (best.c, best.sigma),
        scores,
    })
}
