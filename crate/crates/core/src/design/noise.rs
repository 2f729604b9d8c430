//! Decoherence-rate scaling, flux dispersion and thermal excitation.

use argmin::core::{CostFunction, Executor};
use argmin::solver::brent::BrentRoot;
use serde::{Deserialize, Serialize};

use super::leakage::LeakageModel;
use crate::error::{Error, Result};
use crate::units::{BOLTZMANN, PLANCK, TWO_PI};

/// Junction asymmetry of the reference transmon whose idle bias normalizes flux dephasing.
pub const REFERENCE_ASYMMETRY: f64 = 0.9;
/// Idle detuning below the flux sweet spot, GHz.
pub const IDLE_OFFSET_GHZ: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Basic,
    Advanced,
}

/// Error-budget model anchored at a reference transmon (energies in GHz, times in s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub t1_ref: f64,
    pub tphi_ref: f64,
    pub ref_ej: f64,
    pub ref_ec: f64,
    /// Kelvin.
    pub temperature: f64,
    pub leakage: LeakageModel,
    pub junction_asymmetry_d: f64,
    pub model_kind: ModelKind,
}

/// Relaxation and dephasing rates in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub gamma1: f64,
    pub gamma_phi: f64,
}

impl NoiseModel {
    /// Basic model with T_phi = T1 at (12, 0.2) GHz and 50 mK.
    pub fn reference(t1_ref: f64) -> Self {
        Self {
            t1_ref,
            tphi_ref: t1_ref,
            ref_ej: 12.0,
            ref_ec: 0.2,
            temperature: 0.05,
            leakage: LeakageModel::default(),
            junction_asymmetry_d: REFERENCE_ASYMMETRY,
            model_kind: ModelKind::Basic,
        }
    }

    pub fn with_kind(mut self, kind: ModelKind) -> Self {
        self.model_kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1_ref > 0.0 && self.tphi_ref > 0.0) {
            return Err(Error::InvalidParameter("reference coherence times must be positive".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidParameter(format!("temperature {} K must be positive", self.temperature)));
        }
        if !(self.ref_ej > 0.0 && self.ref_ec > 0.0) {
            return Err(Error::InvalidParameter("reference energies must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.junction_asymmetry_d) {
            return Err(Error::InvalidParameter(format!(
                "junction asymmetry {} outside [0, 1)",
                self.junction_asymmetry_d
            )));
        }
        self.leakage.validate()
    }
}

fn check_energies(e_j: f64, e_c: f64) -> Result<()> {
    if !(e_j > 0.0 && e_c > 0.0 && e_j.is_finite() && e_c.is_finite()) {
        return Err(Error::InvalidParameter(format!("energies E_J = {e_j}, E_C = {e_c} must be positive")));
    }
    Ok(())
}

/// Gamma_1 ~ E_C^{3/2} E_J^{1/2} and Gamma_phi ~ (E_C E_J)^{1/2} relative to the reference point.
pub fn scale_rates(model: &NoiseModel, e_j: f64, e_c: f64) -> Result<Rates> {
    check_energies(e_j, e_c)?;
    let ej = e_j / model.ref_ej;
    let ec = e_c / model.ref_ec;
    Ok(Rates {
        gamma1: ec.powf(1.5) * ej.sqrt() / model.t1_ref,
        gamma_phi: (ec * ej).sqrt() / model.tphi_ref,
    })
}

/// Effective Josephson energy of a split junction at flux bias phi (flux quanta).
pub fn josephson_at_flux(e_j_sigma: f64, d: f64, phi: f64) -> f64 {
    let (s, c) = (std::f64::consts::PI * phi).sin_cos();
    e_j_sigma * (c * c + d * d * s * s).sqrt()
}

/// Transmon frequency (GHz) at flux bias phi.
pub fn frequency_at_flux(e_j_sigma: f64, e_c: f64, d: f64, phi: f64) -> f64 {
    (8.0 * e_c * josephson_at_flux(e_j_sigma, d, phi)).sqrt() - e_c
}

/// First-order flux dispersion d omega / d Phi (GHz per flux quantum) for d close to 1.
pub fn flux_dispersion(e_j_sigma: f64, e_c: f64, d: f64, phi: f64) -> f64 {
    let pi = std::f64::consts::PI;
    (d - 1.0) * (8.0 * e_c * e_j_sigma).sqrt() * pi * (2.0 * pi * phi).sin() / 2.0
}

struct Shift {
    e_j_sigma: f64,
    e_c: f64,
    d: f64,
    target: f64,
}

impl CostFunction for Shift {
    type Param = f64;
    type Output = f64;
    fn cost(&self, phi: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok(frequency_at_flux(self.e_j_sigma, self.e_c, self.d, *phi) - self.target)
    }
}

/// Bias in [0, 1/2] lowering the frequency by `shift_ghz` below the sweet spot.
pub fn bias_for_shift(e_j_sigma: f64, e_c: f64, d: f64, shift_ghz: f64) -> Result<f64> {
    check_energies(e_j_sigma, e_c)?;
    if shift_ghz < 0.0 {
        return Err(Error::InvalidParameter(format!("frequency shift {shift_ghz} GHz must be non-negative")));
    }
    if shift_ghz == 0.0 {
        return Ok(0.0);
    }
    let top = frequency_at_flux(e_j_sigma, e_c, d, 0.0);
    let bottom = frequency_at_flux(e_j_sigma, e_c, d, 0.5);
    let target = top - shift_ghz;
    if target < bottom {
        return Err(Error::TuningRange(format!(
            "shift of {shift_ghz:.4} GHz exceeds the tunable range {:.4} GHz at d = {d}",
            top - bottom
        )));
    }
    let run = Executor::new(Shift { e_j_sigma, e_c, d, target }, BrentRoot::new(0.0, 0.5, 1e-14))
        .configure(|s| s.param(0.25).max_iters(200))
        .run()
        .map_err(|e| Error::Convergence(format!("flux bias search: {e}")))?;
    run.state.best_param.ok_or_else(|| Error::Convergence("flux bias search returned no point".into()))
}

/// Dephasing rate (1/s) at flux bias `flux_bias`.
///
/// Gamma_phi ~ |d omega / d Phi|, normalized so that the reference transmon at
/// REFERENCE_ASYMMETRY idling 10 MHz below its sweet spot dephases at 1 / tphi_ref.
pub fn flux_dephasing_advanced(model: &NoiseModel, e_j_sigma: f64, e_c: f64, flux_bias: f64) -> Result<f64> {
    check_energies(e_j_sigma, e_c)?;
    let d = model.junction_asymmetry_d;
    if !(0.0..1.0).contains(&d) {
        return Err(Error::InvalidParameter(format!("junction asymmetry {d} outside [0, 1)")));
    }
    let reference_bias = bias_for_shift(model.ref_ej, model.ref_ec, REFERENCE_ASYMMETRY, IDLE_OFFSET_GHZ)?;
    let reference = flux_dispersion(model.ref_ej, model.ref_ec, REFERENCE_ASYMMETRY, reference_bias).abs();
    Ok(flux_dispersion(e_j_sigma, e_c, d, flux_bias).abs() / reference / model.tphi_ref)
}

/// Flux-averaged dephasing rate, proportional to sqrt(E_C E_J_sigma) for every d.
pub fn flux_averaged_dephasing(model: &NoiseModel, e_j_sigma: f64, e_c: f64) -> Result<f64> {
    Ok(scale_rates(model, e_j_sigma, e_c)?.gamma_phi)
}

/// Excited-state population e^{-x} / (1 + e^{-x}) with x = hbar omega / (k_B T); omega in rad/s.
pub fn thermal_excitation(omega: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter(format!("temperature {temperature} K must be positive")));
    }
    if !(omega >= 0.0) {
        return Err(Error::InvalidParameter(format!("frequency {omega} rad/s must be non-negative")));
    }
    let x = PLANCK * (omega / TWO_PI) / (BOLTZMANN * temperature);
    Ok(1.0 / (1.0 + x.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{ghz_to_rad, US};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model() -> NoiseModel {
        NoiseModel::reference(100.0 * US)
    }

    #[test]
    fn reference_point_rates() {
        let r = scale_rates(&model(), 12.0, 0.2).unwrap();
        assert_eq!(r.gamma1, 1.0 / (100.0 * US));
        assert_eq!(r.gamma_phi, 1.0 / (100.0 * US));
    }

    #[test]
    fn power_law_exponents() {
        let m = model();
        let base = scale_rates(&m, 12.0, 0.2).unwrap();
        let ec = scale_rates(&m, 12.0, 0.8).unwrap();
        assert_relative_eq!(ec.gamma1 / base.gamma1, 8.0, max_relative = 1e-14);
        let ej = scale_rates(&m, 48.0, 0.2).unwrap();
        assert_relative_eq!(ej.gamma_phi / base.gamma_phi, 2.0, max_relative = 1e-14);
        assert_relative_eq!(ej.gamma1 / base.gamma1, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn sweet_spot_is_first_order_insensitive() {
        assert_eq!(flux_dephasing_advanced(&model(), 15.0, 0.2, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn asymmetry_ratio() {
        let mut a = model();
        let mut b = model();
        a.junction_asymmetry_d = 0.9;
        b.junction_asymmetry_d = 0.5;
        let ra = flux_dephasing_advanced(&a, 15.0, 0.2, 0.2).unwrap();
        let rb = flux_dephasing_advanced(&b, 15.0, 0.2, 0.2).unwrap();
        assert_relative_eq!(ra / rb, 0.2, max_relative = 1e-12);
    }

    #[test]
    fn reference_bias_reproduces_tphi() {
        let m = model();
        let phi = bias_for_shift(12.0, 0.2, REFERENCE_ASYMMETRY, IDLE_OFFSET_GHZ).unwrap();
        let top = frequency_at_flux(12.0, 0.2, REFERENCE_ASYMMETRY, 0.0);
        assert_relative_eq!(frequency_at_flux(12.0, 0.2, REFERENCE_ASYMMETRY, phi), top - 0.01, epsilon = 1e-12);
        let rate = flux_dephasing_advanced(&m, 12.0, 0.2, phi).unwrap();
        assert_relative_eq!(rate, 1.0 / m.tphi_ref, max_relative = 1e-12);
    }

    #[test]
    fn dispersion_matches_numerical_derivative_near_symmetric() {
        // d -> 1 limit of the exact frequency curve
        let (ej, ec, d, phi) = (15.0, 0.2, 0.98, 0.1);
        let h = 1e-6;
        let numeric = (frequency_at_flux(ej, ec, d, phi + h) - frequency_at_flux(ej, ec, d, phi - h)) / (2.0 * h);
        let approx = flux_dispersion(ej, ec, d, phi);
        assert_relative_eq!(numeric, approx, max_relative = 0.05);
    }

    #[test]
    fn unreachable_shift_is_reported() {
        assert!(matches!(bias_for_shift(15.0, 0.2, 0.99, 1.0), Err(Error::TuningRange(_))));
    }

    #[test]
    fn thermal_limits() {
        assert_eq!(thermal_excitation(ghz_to_rad(5.0), 1e-6).unwrap(), 0.0);
        assert!(thermal_excitation(ghz_to_rad(5.0), 0.0).is_err());
        // closed form and a 40-digit evaluation of the same Boltzmann ratio
        let x: f64 = 6.626_070_15e-34 * 5e9 / (1.380_649e-23 * 0.05);
        let oracle = (-x).exp() / (1.0 + (-x).exp());
        assert_relative_eq!(thermal_excitation(ghz_to_rad(5.0), 0.05).unwrap(), oracle, max_relative = 1e-14);
        assert_relative_eq!(thermal_excitation(ghz_to_rad(5.0), 0.05).unwrap(), 0.008_168_701_470_416_747, max_relative = 1e-13);
    }

    proptest! {
        #[test]
        fn thermal_decreases_with_frequency(f in 1.0f64..10.0, t in 0.01f64..0.2) {
            let low = thermal_excitation(ghz_to_rad(f), t).unwrap();
            let high = thermal_excitation(ghz_to_rad(2.0 * f), t).unwrap();
            prop_assert!(high < low);
        }

        #[test]
        fn relaxation_monotone_in_product(ej in 4.0f64..40.0, ec in 0.1f64..0.5, k in 1.01f64..2.0) {
            let m = NoiseModel::reference(100.0 * US);
            let a = scale_rates(&m, ej, ec).unwrap().gamma1;
            let b = scale_rates(&m, ej * k, ec).unwrap().gamma1;
            let c = scale_rates(&m, ej, ec * k).unwrap().gamma1;
            prop_assert!(b > a && c > a);
        }
    }
}
