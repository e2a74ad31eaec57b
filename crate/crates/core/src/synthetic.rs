//! Heteroscedastic test process with closed-form conditional quantiles.
//!
//! `y = clip(0.5 + 0.4 * x1 * eps, 0, 1)` with `eps ~ N(0, 1)` and `x1` in
//! `[0, 1]`. Clipping is monotone, so the conditional `tau`-quantile is
//! `clip(0.5 + 0.4 * x1 * z_tau, 0, 1)` where `z_tau` is the standard normal
//! quantile.

use chrono::Duration;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::{TimeSeriesRecord, YearMonth};

/// Wind speed at 100 m that maps to `x1 = 1`.
pub const MAX_SYNTHETIC_SPEED: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeteroscedasticProcess {
    pub center: f64,
    pub scale: f64,
    /// Total input dimension; columns after the first are uninformative.
    pub n_features: usize,
}

impl Default for HeteroscedasticProcess {
    fn default() -> Self {
        HeteroscedasticProcess {
            center: 0.5,
            scale: 0.4,
            n_features: 1,
        }
    }
}

pub fn standard_normal_quantile(tau: f64) -> f64 {
    Normal::standard().inverse_cdf(tau)
}

impl HeteroscedasticProcess {
    /// Conditional `tau`-quantile given the informative input `x1`.
    pub fn quantile(&self, x1: f64, tau: f64) -> f64 {
        (self.center + self.scale * x1 * standard_normal_quantile(tau)).clamp(0.0, 1.0)
    }

    fn draw_target<R: Rng>(&self, x1: f64, rng: &mut R) -> f64 {
        let eps: f64 = rng.sample(StandardNormal);
        (self.center + self.scale * x1 * eps).clamp(0.0, 1.0)
    }

    /// `n` i.i.d. draws with inputs uniform on `[0, 1]^p`.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> (Array2<f64>, Vec<f64>) {
        let p = self.n_features.max(1);
        let x = Array2::from_shape_simple_fn((n, p), || rng.random_range(0.0..1.0));
        let y = (0..n).map(|i| self.draw_target(x[[i, 0]], rng)).collect();
        (x, y)
    }

    /// Conditional quantiles of every row of `x`, `n x M`.
    pub fn quantile_matrix(&self, x: &Array2<f64>, levels: &[f64]) -> Array2<f64> {
        Array2::from_shape_fn((x.nrows(), levels.len()), |(i, m)| {
            self.quantile(x[[i, 0]], levels[m])
        })
    }

    /// Hourly records for one zone covering `first..=last`. The 100 m wind
    /// speed drives the spread of the power: `x1 = ws100 / 10`.
    ///
    /// Each month draws from its own stream of the seeded generator, so a
    /// month's records do not depend on the requested span.
    pub fn records(
        &self,
        first: YearMonth,
        last: YearMonth,
        zone: u32,
        seed: u64,
    ) -> Vec<TimeSeriesRecord> {
        let mut out = Vec::new();
        for month in YearMonth::range_inclusive(first, last) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((month.year() as i64 * 12 + month.month() as i64) as u64);
            let mut t = month.start();
            while t < month.end() {
                let speed = rng.random_range(0.0..MAX_SYNTHETIC_SPEED);
                let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                let veer = rng.random_range(-0.3..0.3);
                let ratio = rng.random_range(0.6..0.9);
                let power = self.draw_target(speed / MAX_SYNTHETIC_SPEED, &mut rng);
                out.push(TimeSeriesRecord {
                    timestamp: t,
                    zone,
                    power: Some(power),
                    u10: ratio * speed * (heading + veer).sin(),
                    v10: ratio * speed * (heading + veer).cos(),
                    u100: speed * heading.sin(),
                    v100: speed * heading.cos(),
                });
                t += Duration::hours(1);
            }
        }
        out
    }

    /// Conditional quantile of a record produced by [`records`](Self::records).
    pub fn record_quantile(&self, record: &TimeSeriesRecord, tau: f64) -> f64 {
        self.quantile(record.u100.hypot(record.v100) / MAX_SYNTHETIC_SPEED, tau)
    }
}
