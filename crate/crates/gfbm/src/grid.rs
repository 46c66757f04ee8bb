//! Sample-time grids.

use serde::{Deserialize, Serialize};

use crate::error::{GfbmError, Result};

/// Strictly increasing, finite sample times.
///
/// Grids feeding Lamperti-transform or Z-ratio computations must satisfy
/// `min_time > 0`; use [`TimeGrid::require_positive`] at those call sites.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    times: Vec<f64>,
    min_time: f64,
    max_time: f64,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(GfbmError::InvalidGrid {
                reason: "empty grid".into(),
            });
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(GfbmError::InvalidGrid {
                reason: "non-finite grid entry".into(),
            });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GfbmError::InvalidGrid {
                reason: "grid not strictly increasing".into(),
            });
        }
        let min_time = times[0];
        let max_time = *times.last().unwrap();
        Ok(Self {
            times,
            min_time,
            max_time,
        })
    }

    /// `n` equispaced points covering `[a, b]` inclusive.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 2 || !(b > a) {
            return Err(GfbmError::InvalidGrid {
                reason: format!("uniform grid needs n >= 2 and b > a (n={n}, a={a}, b={b})"),
            });
        }
        let step = (b - a) / (n - 1) as f64;
        let mut times: Vec<f64> = (0..n).map(|i| a + step * i as f64).collect();
        times[n - 1] = b;
        Self::new(times)
    }

    /// Default relative-offset grid for increment ensembles: equispaced on
    /// `[0, 1]` including both endpoints.
    pub fn unit_grid(n: usize) -> Result<Self> {
        Self::uniform(0.0, 1.0, n)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn min_time(&self) -> f64 {
        self.min_time
    }

    pub fn max_time(&self) -> f64 {
        self.max_time
    }

    pub fn require_positive(&self) -> Result<()> {
        if self.min_time > 0.0 {
            Ok(())
        } else {
            Err(GfbmError::InvalidGrid {
                reason: format!(
                    "grid must have strictly positive times (min = {})",
                    self.min_time
                ),
            })
        }
    }

    pub fn require_nonnegative(&self) -> Result<()> {
        if self.min_time >= 0.0 {
            Ok(())
        } else {
            Err(GfbmError::InvalidGrid {
                reason: format!("grid must have nonnegative times (min = {})", self.min_time),
            })
        }
    }
}

impl<'de> Deserialize<'de> for TimeGrid {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Full {
                times: Vec<f64>,
            },
            #[allow(dead_code)]
            Bare(Vec<f64>),
        }
        let times = match Raw::deserialize(deserializer)? {
            Raw::Full { times } => times,
            Raw::Bare(times) => times,
        };
        TimeGrid::new(times).map_err(serde::de::Error::custom)
    }
}
