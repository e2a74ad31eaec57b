use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Strictly increasing quantile levels in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileLevels(Vec<f64>);

/// Tolerance used when looking up a level by value.
const LEVEL_MATCH_EPS: f64 = 1e-9;

impl QuantileLevels {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one quantile level is required".into(),
            ));
        }
        if let Some(t) = levels.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "quantile level {t} not in (0, 1)"
            )));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "quantile levels must increase strictly: {levels:?}"
            )));
        }
        Ok(QuantileLevels(levels))
    }

    /// The nine deciles 0.1, ..., 0.9.
    pub fn deciles() -> Self {
        QuantileLevels((1..=9).map(|k| k as f64 / 10.0).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, tau: f64) -> Option<usize> {
        self.0
            .iter()
            .position(|t| (t - tau).abs() <= LEVEL_MATCH_EPS)
    }
}

impl fmt::Display for QuantileLevels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|t| t.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for QuantileLevels {
    type Err = Error;

    /// Accepts `start:stop:step` (inclusive stop) or a comma-separated list.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::InvalidArgument(format!("bad quantile levels {s:?}: {what}"));
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad("not a number"));
        let parts: Vec<&str> = s.split(':').collect();
        let levels = match parts.as_slice() {
            [start, stop, step] => {
                let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
                if !(step > 0.0) {
                    return Err(bad("step must be positive"));
                }
                let count = ((stop - start) / step + 1e-9).floor();
                if !(count >= 0.0) {
                    return Err(bad("empty range"));
                }
                // rounding keeps 0.1:0.9:0.1 at exactly 0.1, 0.2, ... instead of 0.30000000000000004
                (0..=count as usize)
                    .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                    .collect()
            }
            [list] => list.split(',').map(num).collect::<Result<Vec<f64>>>()?,
            _ => return Err(bad("expected start:stop:step or a comma list")),
        };
        QuantileLevels::new(levels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        let l: QuantileLevels = "0.1:0.9:0.1".parse().unwrap();
        assert_eq!(l, QuantileLevels::deciles());
        let l: QuantileLevels = "0.25, 0.75".parse().unwrap();
        assert_eq!(l.as_slice(), &[0.25, 0.75]);
        assert_eq!(l.index_of(0.75), Some(1));
        assert_eq!(l.index_of(0.5), None);
    }

    #[test]
    fn rejects_invalid() {
        assert!(QuantileLevels::new(vec![]).is_err());
        assert!(QuantileLevels::new(vec![0.5, 0.4]).is_err());
        assert!(QuantileLevels::new(vec![0.5, 0.5]).is_err());
        assert!(QuantileLevels::new(vec![0.0, 0.5]).is_err());
        assert!(QuantileLevels::new(vec![0.5, 1.0]).is_err());
        assert!("0.1:0.9:0".parse::<QuantileLevels>().is_err());
        assert!("a,b".parse::<QuantileLevels>().is_err());
    }
}
