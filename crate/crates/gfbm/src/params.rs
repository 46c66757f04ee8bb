//! Process parameters.
//!
//! The process is driven by the exponent pair `(alpha, gamma)` with
//!
//! ```text
//! gamma in [0, 1),   alpha in (-1/2 + gamma/2, 1/2 + gamma/2),
//! ```
//!
//! and is self-similar with index `H = alpha - gamma/2 + 1/2 in (0, 1)`.
//! `gamma = 0` recovers ordinary fractional Brownian motion with Hurst
//! index `H`; `gamma != 0` destroys stationarity of increments while
//! keeping self-similarity.

use serde::{Deserialize, Serialize};

use crate::error::{GfbmError, Result};

/// Validated parameter pair with the derived self-similarity index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GfbmParams {
    alpha: f64,
    gamma: f64,
    hurst: f64,
}

impl GfbmParams {
    /// Validates `(alpha, gamma)` against the admissible domain and derives `H`.
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        if !alpha.is_finite() || !gamma.is_finite() {
            return Err(GfbmError::InvalidParams {
                reason: format!("non-finite parameters alpha={alpha}, gamma={gamma}"),
            });
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(GfbmError::InvalidParams {
                reason: format!("gamma = {gamma} outside [0, 1)"),
            });
        }
        let lo = -0.5 + gamma / 2.0;
        let hi = 0.5 + gamma / 2.0;
        if !(alpha > lo && alpha < hi) {
            return Err(GfbmError::InvalidParams {
                reason: format!("alpha = {alpha} outside ({lo}, {hi}) for gamma = {gamma}"),
            });
        }
        let hurst = alpha - gamma / 2.0 + 0.5;
        debug_assert!(hurst > 0.0 && hurst < 1.0);
        Ok(Self {
            alpha,
            gamma,
            hurst,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Self-similarity index `H = alpha - gamma/2 + 1/2`.
    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// True iff `alpha < 1/2`, the hypothesis of the local LIL and of the
    /// tangent-process limit. Operations on the limit family require it.
    pub fn lil_regime(&self) -> bool {
        self.alpha < 0.5
    }

    /// Errors unless `alpha < 1/2`.
    pub fn require_lil_regime(&self) -> Result<()> {
        if self.lil_regime() {
            Ok(())
        } else {
            Err(GfbmError::NotLilRegime { alpha: self.alpha })
        }
    }
}

impl<'de> Deserialize<'de> for GfbmParams {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            alpha: f64,
            gamma: f64,
            #[serde(default)]
            #[allow(dead_code)]
            hurst: Option<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        GfbmParams::new(raw.alpha, raw.gamma).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_params() {
        let p = GfbmParams::new(0.0, 0.0).unwrap();
        assert_eq!(p.hurst(), 0.5);
        assert!(p.lil_regime());
    }

    #[test]
    fn hurst_is_derived() {
        let p = GfbmParams::new(0.2, 0.3).unwrap();
        assert!((p.hurst() - 0.55).abs() < 1e-15);
    }

    #[test]
    fn domain_gate_rejects_boundary_and_outside() {
        // gamma outside [0, 1)
        assert!(GfbmParams::new(0.0, 1.0).is_err());
        assert!(GfbmParams::new(0.0, -0.1).is_err());
        // alpha on the open boundary
        assert!(GfbmParams::new(-0.5, 0.0).is_err());
        assert!(GfbmParams::new(0.5, 0.0).is_err());
        // alpha = 0.9 with gamma = 0.4: 0.9 >= 0.7
        assert!(GfbmParams::new(0.9, 0.4).is_err());
        // just inside
        assert!(GfbmParams::new(0.699, 0.4).is_ok());
        assert!(GfbmParams::new(-0.299, 0.4).is_ok());
    }

    #[test]
    fn lil_regime_flag_tracks_alpha() {
        assert!(GfbmParams::new(0.49, 0.4).unwrap().lil_regime());
        assert!(!GfbmParams::new(0.55, 0.4).unwrap().lil_regime());
        assert!(GfbmParams::new(0.55, 0.4)
            .unwrap()
            .require_lil_regime()
            .is_err());
    }

    #[test]
    fn serde_roundtrip_revalidates() {
        let p = GfbmParams::new(0.2, 0.3).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: GfbmParams = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
        // tampered document must be rejected
        let bad = r#"{"alpha": 0.9, "gamma": 0.4, "hurst": 0.5}"#;
        assert!(serde_json::from_str::<GfbmParams>(bad).is_err());
    }

    // Validation accepts exactly the admissible rectangle-with-slanted-sides:
    // sweep a lattice and compare against the predicate.
    #[test]
    fn validation_matches_domain_on_lattice() {
        for ia in -12..=12 {
            for ig in -2..=12 {
                let alpha = f64::from(ia) * 0.1;
                let gamma = f64::from(ig) * 0.1;
                let admissible = (0.0..1.0).contains(&gamma)
                    && alpha > -0.5 + gamma / 2.0
                    && alpha < 0.5 + gamma / 2.0;
                assert_eq!(
                    GfbmParams::new(alpha, gamma).is_ok(),
                    admissible,
                    "alpha={alpha} gamma={gamma}"
                );
            }
        }
    }
}
