//! Unit conventions.
//!
//! Energies are stored as frequencies E/h in GHz. Angular frequencies are in
//! rad/s and times in seconds at every public boundary.

use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;

pub const NS: f64 = 1e-9;
pub const US: f64 = 1e-6;
pub const MS: f64 = 1e-3;

/// E/h in GHz to angular frequency in rad/s.
pub fn ghz_to_rad(f_ghz: f64) -> f64 {
    TWO_PI * f_ghz * 1e9
}

/// Angular frequency in rad/s to ordinary frequency in GHz.
pub fn rad_to_ghz(w: f64) -> f64 {
    w / (TWO_PI * 1e9)
}

pub fn mhz_to_rad(f_mhz: f64) -> f64 {
    TWO_PI * f_mhz * 1e6
}

pub fn rad_to_mhz(w: f64) -> f64 {
    w / (TWO_PI * 1e6)
}

pub fn rad_to_khz(w: f64) -> f64 {
    w / (TWO_PI * 1e3)
}

pub fn rad_to_hz(w: f64) -> f64 {
    w / TWO_PI
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut x = phi.rem_euclid(TWO_PI);
    if x > PI {
        x -= TWO_PI;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let w = ghz_to_rad(4.8);
        assert!((rad_to_ghz(w) - 4.8).abs() < 1e-15);
        assert!((rad_to_mhz(mhz_to_rad(-270.0)) + 270.0).abs() < 1e-12);
    }

    #[test]
    fn wrap_range() {
        assert!((wrap_phase(PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
    }
}
