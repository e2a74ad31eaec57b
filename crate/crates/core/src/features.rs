//! Wind predictors derived from NWP wind components.
//!
//! Each hourly record yields 13 features in a fixed column order:
//! speeds, directions and energies at 10 m and 100 m, shear, energy
//! difference, direction difference, and the four raw components.

use ndarray::Array2;

use crate::dataset::TimeSeriesRecord;
use crate::{Error, Result};

pub const N_FEATURES: usize = 13;

/// Column names in the order produced by [`build_features`].
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "ws10", "ws100", "wd10", "wd100", "we10", "we100", "wsh", "wed", "wdd", "u10", "v10", "u100",
    "v100",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Energy density used in the wind-energy feature.
    pub density: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { density: 1.0 }
    }
}

impl FeatureConfig {
    pub fn new(density: f64) -> Result<Self> {
        if !(density > 0.0 && density.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "energy density must be positive, got {density}"
            )));
        }
        Ok(FeatureConfig { density })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub ws10: f64,
    pub ws100: f64,
    pub wd10: f64,
    pub wd100: f64,
    pub we10: f64,
    pub we100: f64,
    pub wsh: f64,
    pub wed: f64,
    pub wdd: f64,
    pub u10: f64,
    pub v10: f64,
    pub u100: f64,
    pub v100: f64,
}

impl FeatureVector {
    pub fn from_components(
        u10: f64,
        v10: f64,
        u100: f64,
        v100: f64,
        config: &FeatureConfig,
    ) -> Self {
        let ws10 = wind_speed(u10, v10);
        let ws100 = wind_speed(u100, v100);
        let wd10 = wind_direction(u10, v10);
        let wd100 = wind_direction(u100, v100);
        let we10 = wind_energy(ws10, config.density);
        let we100 = wind_energy(ws100, config.density);
        FeatureVector {
            ws10,
            ws100,
            wd10,
            wd100,
            we10,
            we100,
            wsh: wind_shear(ws10, ws100),
            wed: we100 - we10,
            wdd: wrap_degrees(wd100 - wd10),
            u10,
            v10,
            u100,
            v100,
        }
    }

    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [
            self.ws10, self.ws100, self.wd10, self.wd100, self.we10, self.we100, self.wsh,
            self.wed, self.wdd, self.u10, self.v10, self.u100, self.v100,
        ]
    }
}

pub fn wind_speed(u: f64, v: f64) -> f64 {
    u.hypot(v)
}

/// Direction in degrees as the two-argument arctangent with `u` first, so
/// that `(1, 0)` maps to 90 and `(1, 1)` to 45. Calm air `(0, 0)` maps to 0.
pub fn wind_direction(u: f64, v: f64) -> f64 {
    if u == 0.0 && v == 0.0 {
        return 0.0;
    }
    wrap_degrees(u.atan2(v).to_degrees())
}

pub fn wind_energy(ws: f64, density: f64) -> f64 {
    0.5 * density * ws.powi(3)
}

/// Root-sum-of-squares of the two speeds.
pub fn wind_shear(ws10: f64, ws100: f64) -> f64 {
    ws10.hypot(ws100)
}

/// Wrap an angle in degrees into `(-180, 180]`.
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = (deg + 180.0).rem_euclid(360.0) - 180.0;
    if w <= -180.0 {
        w + 360.0
    } else {
        w
    }
}

/// Row `i` holds the features of `records[i]`; no scaling is applied.
pub fn build_features<'a, I>(records: I, config: &FeatureConfig) -> Result<Array2<f64>>
where
    I: IntoIterator<Item = &'a TimeSeriesRecord>,
{
    let rows: Vec<[f64; N_FEATURES]> = records
        .into_iter()
        .map(|r| FeatureVector::from_components(r.u10, r.v10, r.u100, r.v100, config).to_array())
        .collect();
    if rows.is_empty() {
        return Err(Error::InvalidArgument(
            "no records to build features from".into(),
        ));
    }
    let mut x = Array2::zeros((rows.len(), N_FEATURES));
    for (mut row, values) in x.rows_mut().into_iter().zip(&rows) {
        for (dst, v) in row.iter_mut().zip(values) {
            *dst = *v;
        }
    }
    Ok(x)
}
