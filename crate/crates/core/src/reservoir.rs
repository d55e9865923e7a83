//! Scalar reservoir coefficients for thermal and squeezed-thermal baths.
//!
//! The cavity sees a squeezed vacuum (optical photons have no thermal
//! occupation); the mechanics sees a squeezed thermal bath of occupancy n_th.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::C64;
use crate::model::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirSpec {
    /// Mechanical thermal occupancy.
    pub n_th: f64,
    /// Squeezing magnitude.
    #[serde(default)]
    pub r: f64,
    /// Squeezing phase in [0, 2π].
    #[serde(default)]
    pub theta: f64,
    /// High-temperature proxy k_BT/ω_m; `None` means "same as n_th".
    #[serde(rename = "kT_over_wm", default, skip_serializing_if = "Option::is_none")]
    pub kt_over_wm: Option<f64>,
    /// Documents n_th(ω_c) ≈ 0; only `true` is accepted.
    #[serde(default = "yes")]
    pub cavity_thermal_zero: bool,
}

fn yes() -> bool {
    true
}

impl ReservoirSpec {
    pub fn thermal(n_th: f64) -> Self {
        Self::squeezed(n_th, 0.0, 0.0)
    }

    pub fn squeezed(n_th: f64, r: f64, theta: f64) -> Self {
        Self {
            n_th,
            r,
            theta,
            kt_over_wm: None,
            cavity_thermal_zero: true,
        }
    }

    /// k_BT/ω_m, defaulting to n_th (high-temperature limit of the Bose factor).
    pub fn kt(&self) -> f64 {
        self.kt_over_wm.unwrap_or(self.n_th)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_th >= 0.0 && self.n_th.is_finite()) {
            return Err(Error::InvalidParameter(format!("n_th must be >= 0, got {}", self.n_th)));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParameter(format!("r must be >= 0, got {}", self.r)));
        }
        if !(0.0..=TAU).contains(&self.theta) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in [0, 2π], got {}",
                self.theta
            )));
        }
        if let Some(kt) = self.kt_over_wm {
            if !(kt >= 0.0 && kt.is_finite()) {
                return Err(Error::InvalidParameter(format!("kT_over_wm must be >= 0, got {kt}")));
            }
        }
        if !self.cavity_thermal_zero {
            return Err(Error::UnsupportedRegime(
                "a thermally occupied cavity reservoir is not modelled".into(),
            ));
        }
        Ok(())
    }
}

/// Effective occupations and pair correlations of both reservoirs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezedCoefficients {
    /// Mechanical effective occupancy N_eff.
    pub n_eff: f64,
    /// Mechanical pair correlation M_eff.
    pub m_eff: C64,
    /// Cavity occupancy N = sinh² r.
    pub n_cav: f64,
    /// Cavity pair correlation M = −cosh r sinh r e^{iθ}.
    pub m_cav: C64,
}

pub fn squeezed_coefficients(spec: &ReservoirSpec) -> SqueezedCoefficients {
    let (c, s) = (spec.r.cosh(), spec.r.sinh());
    let phase = C64::from_polar(1.0, spec.theta);
    let n = spec.n_th;
    SqueezedCoefficients {
        n_eff: n * (c * c + s * s) + s * s,
        m_eff: -c * s * (2.0 * n + 1.0) * phase,
        n_cav: s * s,
        m_cav: -c * s * phase,
    }
}

/// Thermal high-temperature cavity dephasing rate 4 γ_m (k_BT/ω_m) β0².
pub fn dephasing_rate_thermal(params: &SystemParams, spec: &ReservoirSpec) -> f64 {
    let beta0 = params.beta0();
    4.0 * params.gamma_m * spec.kt() * beta0 * beta0
}

/// cosh²r + sinh²r + 2 cosh r sinh r cos θ.
///
/// Evaluated as ½e^{2r}(1 + cos θ) + ½e^{−2r}(1 − cos θ), a sum of
/// non-negative terms, so θ = π and θ = 0 give e^{∓2r} to rounding.
pub fn squeeze_dephasing_factor(r: f64, theta: f64) -> f64 {
    let cos = theta.cos();
    0.5 * (2.0 * r).exp() * (1.0 + cos) + 0.5 * (-2.0 * r).exp() * (1.0 - cos)
}

/// High-temperature cavity dephasing rate with squeezing.
pub fn dephasing_rate_squeezed(params: &SystemParams, spec: &ReservoirSpec) -> f64 {
    dephasing_rate_thermal(params, spec) * squeeze_dephasing_factor(spec.r, spec.theta)
}

/// The two cavity-dephasing rates that appear in the dressed-basis standard
/// master equation with a squeezed thermal bath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmeExtraRates {
    /// Coefficient of N̂_c ρ N̂_c: 2γ_m cosh r sinh r cos θ (2n_th + 1) β0².
    pub sandwich_rate: f64,
    /// Coefficient of D[N̂_c]: γ_m (2N_eff + 1) β0².
    pub dephasing_rate: f64,
}

pub fn sme_extra_rates(params: &SystemParams, spec: &ReservoirSpec) -> SmeExtraRates {
    let beta2 = params.beta0() * params.beta0();
    let (c, s) = (spec.r.cosh(), spec.r.sinh());
    let coeffs = squeezed_coefficients(spec);
    SmeExtraRates {
        sandwich_rate: 2.0 * params.gamma_m * c * s * spec.theta.cos() * (2.0 * spec.n_th + 1.0) * beta2,
        dephasing_rate: params.gamma_m * (2.0 * coeffs.n_eff + 1.0) * beta2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn fig_params(g0: f64) -> SystemParams {
        SystemParams::new(0.0, g0, 0.05)
    }

    #[test]
    fn unsqueezed_reduces_to_thermal() {
        let c = squeezed_coefficients(&ReservoirSpec::thermal(20.0));
        assert_eq!(c.n_eff, 20.0);
        assert_eq!(c.m_eff, C64::new(0.0, 0.0));
        assert_eq!(c.n_cav, 0.0);
        assert_eq!(c.m_cav, C64::new(0.0, 0.0));
    }

    #[test]
    fn squeezed_vacuum_and_thermal_values() {
        // sinh²(0.5) and cosh(0.5) sinh(0.5) = sinh(1)/2
        let c = squeezed_coefficients(&ReservoirSpec::squeezed(0.0, 0.5, 0.0));
        assert_abs_diff_eq!(c.n_eff, 0.271540317407, epsilon = 1e-11);
        assert_abs_diff_eq!(c.m_eff.norm(), 0.587600596822, epsilon = 1e-11);
        let c = squeezed_coefficients(&ReservoirSpec::squeezed(20.0, 0.5, 0.0));
        // 20 cosh(1) + sinh²(0.5)
        assert_abs_diff_eq!(c.n_eff, 31.133153013712, epsilon = 1e-10);
    }

    #[test]
    fn thermal_dephasing_rate() {
        assert_eq!(dephasing_rate_thermal(&fig_params(0.0), &ReservoirSpec::thermal(20.0)), 0.0);
        let rate = dephasing_rate_thermal(&fig_params(0.8), &ReservoirSpec::thermal(20.0));
        assert_abs_diff_eq!(rate, 4.0 * (0.05 / 3.0) * 20.0 * 0.64, epsilon = 1e-15);
        assert_abs_diff_eq!(rate, 0.853333333333, epsilon = 1e-11);
        let mut cold = ReservoirSpec::thermal(20.0);
        cold.kt_over_wm = Some(0.0);
        assert_eq!(dephasing_rate_thermal(&fig_params(0.8), &cold), 0.0);
    }

    #[test]
    fn dephasing_factor_identities() {
        assert_eq!(squeeze_dephasing_factor(0.0, 1.234), 1.0);
        assert_abs_diff_eq!(squeeze_dephasing_factor(0.5, PI), (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(squeeze_dephasing_factor(0.5, 0.0), 1.0f64.exp(), epsilon = 1e-15);
        let (r, th) = (0.7f64, 1.1f64);
        let direct = r.cosh().powi(2) + r.sinh().powi(2) + 2.0 * r.cosh() * r.sinh() * th.cos();
        assert_abs_diff_eq!(squeeze_dephasing_factor(r, th), direct, epsilon = 1e-13);
    }

    #[test]
    fn sme_extra_rates_values() {
        let p = fig_params(0.8);
        let thermal = sme_extra_rates(&p, &ReservoirSpec::thermal(20.0));
        assert_eq!(thermal.sandwich_rate, 0.0);
        assert_abs_diff_eq!(thermal.dephasing_rate, p.gamma_m * 41.0 * 0.64, epsilon = 1e-15);
        let quad = sme_extra_rates(&p, &ReservoirSpec::squeezed(20.0, 0.9, FRAC_PI_2));
        assert_abs_diff_eq!(quad.sandwich_rate, 0.0, epsilon = 1e-15);
        let sq = sme_extra_rates(&p, &ReservoirSpec::squeezed(20.0, 0.5, 0.0));
        // 2 (0.05/3) (sinh(1)/2) 41 0.64
        assert_abs_diff_eq!(sq.sandwich_rate, 0.513954655354, epsilon = 1e-11);
    }

    #[test]
    fn validation() {
        assert!(ReservoirSpec::squeezed(1.0, -0.1, 0.0).validate().is_err());
        assert!(ReservoirSpec::squeezed(1.0, 0.1, 7.0).validate().is_err());
        let mut hot_cavity = ReservoirSpec::thermal(1.0);
        hot_cavity.cavity_thermal_zero = false;
        assert!(hot_cavity.validate().is_err());
        assert_eq!(ReservoirSpec::thermal(3.0).kt(), 3.0);
    }

    proptest! {
        #[test]
        fn n_eff_monotone(n in 0.0f64..50.0, r in 0.0f64..2.0, dn in 0.001f64..5.0, dr in 0.001f64..0.5) {
            let base = squeezed_coefficients(&ReservoirSpec::squeezed(n, r, 0.0)).n_eff;
            let more_n = squeezed_coefficients(&ReservoirSpec::squeezed(n + dn, r, 0.0)).n_eff;
            let more_r = squeezed_coefficients(&ReservoirSpec::squeezed(n, r + dr, 0.0)).n_eff;
            prop_assert!(more_n > base);
            prop_assert!(more_r > base);
        }

        #[test]
        fn squeezed_thermal_uncertainty_relation(n in 0.0f64..50.0, r in 0.0f64..2.0, th in 0.0f64..TAU) {
            let c = squeezed_coefficients(&ReservoirSpec::squeezed(n, r, th));
            let lhs = c.m_eff.norm_sqr() - c.n_eff * (c.n_eff + 1.0);
            prop_assert!((lhs + n * (n + 1.0)).abs() <= 1e-9 * (1.0 + c.n_eff * c.n_eff));
            prop_assert!(c.m_eff.norm() <= (c.n_eff * (c.n_eff + 1.0)).sqrt() + 1e-12);
        }

        #[test]
        fn dephasing_factor_bounded_by_extremes(r in 0.0f64..2.0, th in 0.0f64..TAU) {
            let f = squeeze_dephasing_factor(r, th);
            prop_assert!(f > 0.0);
            prop_assert!(f >= (-2.0 * r).exp() * (1.0 - 1e-14));
            prop_assert!(f <= (2.0 * r).exp() * (1.0 + 1e-14));
        }
    }
}
