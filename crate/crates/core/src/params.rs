//! Biological and epidemiological constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DAYS_PER_YEAR: f64 = 365.0;

/// Carrying capacity printed in the dengue parameter table. The reported
/// results are consistent with the wild equilibrium `K*` equal to the human
/// population instead, which is what [`EpiParams::default`] uses.
pub const TABLE_CARRYING_CAPACITY: f64 = 65234.0;

/// Model constants. Rates are per day.
///
/// Serialized keys follow the usual symbol names (`b_M`, `beta_HM`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpiParams {
    #[serde(rename = "b_M")]
    pub b_m: f64,
    #[serde(rename = "b_W")]
    pub b_w: f64,
    #[serde(rename = "d_M")]
    pub d_m: f64,
    #[serde(rename = "d_W")]
    pub d_w: f64,
    #[serde(rename = "d_S")]
    pub d_s: f64,
    /// Cytoplasmic incompatibility level.
    pub s_h: f64,
    /// Sterile male competitiveness.
    pub s_c: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "b_H")]
    pub b_h: f64,
    #[serde(rename = "sigma_H")]
    pub sigma_h: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "beta_HM")]
    pub beta_hm: f64,
    #[serde(rename = "beta_MH")]
    pub beta_mh: f64,
    #[serde(rename = "beta_HW")]
    pub beta_hw: f64,
    #[serde(rename = "beta_WH")]
    pub beta_wh: f64,
    #[serde(rename = "gamma_M")]
    pub gamma_m: f64,
    #[serde(rename = "gamma_W")]
    pub gamma_w: f64,
    #[serde(rename = "gamma_H")]
    pub gamma_h: f64,
}

impl Default for EpiParams {
    fn default() -> Self {
        let mut p = Self::dengue_table();
        p.k = p.h / (1.0 - p.d_m / p.b_m);
        p
    }
}

impl EpiParams {
    /// Dengue values exactly as tabulated, including the printed carrying
    /// capacity [`TABLE_CARRYING_CAPACITY`].
    pub fn dengue_table() -> Self {
        Self {
            b_m: 4.4,
            b_w: 3.96,
            d_m: 0.04,
            d_w: 0.044,
            d_s: 0.12,
            s_h: 0.9,
            s_c: 0.9,
            k: TABLE_CARRYING_CAPACITY,
            b_h: 0.013 / DAYS_PER_YEAR,
            sigma_h: 0.2,
            h: 65000.0,
            beta_hm: 0.1647,
            beta_mh: 0.1647,
            beta_hw: 0.157,
            beta_wh: 0.0785,
            gamma_m: 0.186,
            gamma_w: 0.146,
            gamma_h: 0.17,
        }
    }

    /// Wild mosquito equilibrium `K (1 - d_M / b_M)`.
    pub fn k_star(&self) -> f64 {
        self.k * (1.0 - self.d_m / self.b_m)
    }

    /// Range and positivity checks. Does not enforce the transmission-rate
    /// ordering, see [`EpiParams::ordering_violations`].
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("b_M", self.b_m),
            ("b_W", self.b_w),
            ("d_M", self.d_m),
            ("d_W", self.d_w),
            ("d_S", self.d_s),
            ("K", self.k),
            ("b_H", self.b_h),
            ("sigma_H", self.sigma_h),
            ("H", self.h),
            ("beta_HM", self.beta_hm),
            ("beta_MH", self.beta_mh),
            ("beta_HW", self.beta_hw),
            ("beta_WH", self.beta_wh),
            ("gamma_M", self.gamma_m),
            ("gamma_W", self.gamma_w),
            ("gamma_H", self.gamma_h),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        if !(0.0..=1.0).contains(&self.s_h) {
            return Err(Error::InvalidParameter {
                name: "s_h",
                reason: format!("must lie in [0, 1], got {}", self.s_h),
            });
        }
        if !(self.s_c > 0.0 && self.s_c <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "s_c",
                reason: format!("must lie in (0, 1], got {}", self.s_c),
            });
        }
        if self.d_m >= self.b_m {
            return Err(Error::InvalidParameter {
                name: "d_M",
                reason: format!("K* <= 0 because d_M >= b_M ({} >= {})", self.d_m, self.b_m),
            });
        }
        Ok(())
    }

    /// Violations of `0 < beta_WH < beta_HW < beta_HM`. These are reported
    /// rather than rejected so that symmetric what-if scenarios remain usable.
    pub fn ordering_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.beta_wh >= self.beta_hw {
            out.push(format!(
                "beta_WH ({}) should be below beta_HW ({})",
                self.beta_wh, self.beta_hw
            ));
        }
        if self.beta_hw >= self.beta_hm {
            out.push(format!(
                "beta_HW ({}) should be below beta_HM ({})",
                self.beta_hw, self.beta_hm
            ));
        }
        out
    }

    /// Parses a flat TOML key/value document. Missing keys keep their
    /// defaults, unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let params: EpiParams = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("parameters always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_wild_equilibrium_matches_human_population() {
        let p = EpiParams::default();
        assert!((p.k_star() - p.h).abs() < 1e-9);
        assert!(p.k_star() < p.k);
        p.validate().unwrap();
        assert!(p.ordering_violations().is_empty());
    }

    #[test]
    fn human_rate_is_per_day() {
        let p = EpiParams::default();
        assert!((p.b_h * 365.0 - 0.013).abs() < 1e-15);
    }

    #[test]
    fn toml_round_trip_and_partial_override() {
        let p = EpiParams::dengue_table();
        let back = EpiParams::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(p, back);

        let q = EpiParams::from_toml_str("K = 70000.0\nbeta_HM = 0.2\n").unwrap();
        assert_eq!(q.k, 70000.0);
        assert_eq!(q.beta_hm, 0.2);
        assert_eq!(q.b_m, 4.4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = EpiParams::from_toml_str("b_m = 4.4\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(EpiParams::from_toml_str("s_h = 1.5").is_err());
        assert!(EpiParams::from_toml_str("s_c = 0.0").is_err());
        assert!(EpiParams::from_toml_str("H = -1.0").is_err());
        assert!(EpiParams::from_toml_str("d_M = 5.0").is_err());
    }

    #[test]
    fn ordering_is_reported_not_rejected() {
        let mut p = EpiParams::default();
        p.beta_wh = p.beta_mh;
        p.beta_hw = p.beta_hm;
        p.validate().unwrap();
        assert_eq!(p.ordering_violations().len(), 2);
    }
}
