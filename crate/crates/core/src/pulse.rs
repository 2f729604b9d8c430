//! Flattop-Gaussian flux pulse driving the coupler frequency.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::units::NS;

/// Default rise width of the flux pulse.
pub const DEFAULT_SIGMA: f64 = 5.0 * NS;

/// Step of duration tau_c convolved with a Gaussian of width sigma, offset so f(0) = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlattopGaussian {
    /// Coupler excursion A in rad/s.
    pub amplitude_a: f64,
    pub sigma: f64,
    pub tau_b: f64,
    pub tau_c: f64,
    pub c_offset: f64,
    pub total_t: f64,
}

impl FlattopGaussian {
    /// Pulse with tau_b = 2 sqrt(2) sigma and total length 2 tau_b + tau_c.
    pub fn new(amplitude_a: f64, sigma: f64, tau_c: f64) -> Result<Self> {
        if !(sigma > 0.0 && tau_c >= 0.0 && amplitude_a.is_finite()) {
            return Err(Error::InvalidParameter(format!("pulse sigma = {sigma}, tau_c = {tau_c}")));
        }
        let tau_b = 2.0 * std::f64::consts::SQRT_2 * sigma;
        let mut p = Self { amplitude_a, sigma, tau_b, tau_c, c_offset: 0.0, total_t: 2.0 * tau_b + tau_c };
        p.c_offset = p.raw(0.0);
        Ok(p)
    }

    pub fn with_default_sigma(amplitude_a: f64, tau_c: f64) -> Result<Self> {
        Self::new(amplitude_a, DEFAULT_SIGMA, tau_c)
    }

    /// Pulse of zero amplitude lasting `duration`.
    pub fn idle(duration: f64) -> Result<Self> {
        let sigma = DEFAULT_SIGMA;
        let tau_c = duration - 4.0 * std::f64::consts::SQRT_2 * sigma;
        if tau_c < 0.0 {
            return Err(Error::InvalidParameter(format!("idle duration {duration} shorter than the ramps")));
        }
        Self::new(0.0, sigma, tau_c)
    }

    fn raw(&self, t: f64) -> f64 {
        let s = std::f64::consts::SQRT_2 * self.sigma;
        0.5 * (erf((t - self.tau_b) / s) - erf((t - self.tau_b - self.tau_c) / s))
    }

    /// f(t) for t inside the pulse support.
    pub fn value(&self, t: f64) -> Result<f64> {
        let slack = 1e-12 * self.total_t.max(NS);
        if !(t >= -slack && t <= self.total_t + slack) {
            return Err(Error::Domain(format!("t = {t} s outside [0, {}] s", self.total_t)));
        }
        Ok(self.value_unchecked(t))
    }

    /// f(t) without the support check; callers guarantee 0 <= t <= total_t.
    pub fn value_unchecked(&self, t: f64) -> f64 {
        self.raw(t) - self.c_offset
    }

    /// Coupler frequency omega_idle - A f(t).
    pub fn coupler_frequency(&self, omega_idle: f64, t: f64) -> f64 {
        omega_idle - self.amplitude_a * self.value_unchecked(t)
    }

    /// Plateau value f(total_t / 2).
    pub fn peak(&self) -> f64 {
        self.value_unchecked(self.total_t / 2.0)
    }
}

/// f(t) of a pulse.
pub fn pulse_value(p: &FlattopGaussian, t: f64) -> Result<f64> {
    p.value(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_vanish() {
        let p = FlattopGaussian::with_default_sigma(1.0, 50.0 * NS).unwrap();
        assert!(p.value(0.0).unwrap().abs() < 1e-12);
        assert!(p.value(p.total_t).unwrap().abs() < 1e-12);
        assert!((p.tau_b - 2.0 * 2f64.sqrt() * 5.0 * NS).abs() < 1e-20);
        assert_eq!(p.total_t, 2.0 * p.tau_b + p.tau_c);
    }

    #[test]
    fn long_plateau_saturates() {
        let p = FlattopGaussian::with_default_sigma(1.0, 500.0 * NS).unwrap();
        let mid = p.value(p.tau_b + p.tau_c / 2.0).unwrap();
        assert!((mid - (1.0 - p.c_offset)).abs() < 1e-12);
        assert!((mid - 1.0).abs() < 0.01);
    }

    #[test]
    fn narrow_gaussian_becomes_step() {
        let p = FlattopGaussian::new(1.0, 1e-3 * NS, 40.0 * NS).unwrap();
        // tau_b scales with sigma, so the offset C stays fixed
        assert!((p.value(20.0 * NS).unwrap() - (1.0 - p.c_offset)).abs() < 1e-12);
        assert!((p.value(39.9 * NS).unwrap() - (1.0 - p.c_offset)).abs() < 1e-12);
        assert!((p.total_t - 40.0 * NS).abs() < 1e-2 * NS);
    }

    #[test]
    fn outside_support_is_rejected() {
        let p = FlattopGaussian::with_default_sigma(1.0, 10.0 * NS).unwrap();
        assert!(matches!(p.value(-1.0 * NS), Err(Error::Domain(_))));
        assert!(matches!(p.value(p.total_t + NS), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn bounded_and_symmetric(sigma_ns in 1.0f64..10.0, tau_ns in 0.0f64..100.0, frac in 0.0f64..=1.0) {
            let p = FlattopGaussian::new(1.0, sigma_ns * NS, tau_ns * NS).unwrap();
            let t = frac * p.total_t;
            let v = p.value(t).unwrap();
            prop_assert!((-1e-12..=1.0).contains(&v));
            prop_assert!((v - p.value(p.total_t - t).unwrap()).abs() < 1e-12);
        }
    }
}
