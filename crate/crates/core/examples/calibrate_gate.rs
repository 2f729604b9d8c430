//! Calibrate the pulse amplitude and plateau length of the CZ gate for a
//! chosen E_J/E_C of the second qubit. Takes one to two minutes.
//!
//! Run with `cargo run --release --example calibrate_gate -- 55`.

use std::f64::consts::PI;

use transmon_parity::circuit::CircuitParams;
use transmon_parity::dynamics::{calibrate_pulse, gate_dispersions, CalibrationOptions};
use transmon_parity::units::{rad_to_ghz, NS};
use transmon_parity::{Error, Result};

fn main() -> Result<()> {
    let ratio: f64 = match std::env::args().nth(1) {
        Some(arg) => arg.parse().map_err(|_| Error::InvalidParameter(format!("{arg} is not a ratio")))?,
        None => 55.0,
    };
    let circuit = CircuitParams::for_ratio(ratio, 4.8).at_idle()?;
    let dispersions = gate_dispersions(&circuit)?;
    let cal = calibrate_pulse(&circuit, PI, &dispersions, &CalibrationOptions::default())?;
    println!("E_J/E_C = {ratio}");
    println!("amplitude {:.4} GHz, plateau {:.2} ns", rad_to_ghz(cal.pulse.amplitude_a), cal.pulse.tau_c / NS);
    println!("infidelity without parity shifts {:.3e}", cal.nominal_infidelity);
    println!("parity-averaged infidelity {:.3e}", cal.infidelity);
    println!("phase split {:.4e} rad over t_g = {:.2} ns", cal.analysis.phase_diff, cal.analysis.t_g_eff / NS);
    println!("{} objective evaluations", cal.evaluations);
    Ok(())
}
