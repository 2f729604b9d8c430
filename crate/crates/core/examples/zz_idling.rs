//! Residual ZZ of the qubit-coupler-qubit circuit, its idling points, and the
//! spread of the idling ZZ over charge-parity configurations.
//!
//! Run with `cargo run --release --example zz_idling`.

use transmon_parity::circuit::{find_idling_frequency, parity_zz_spread, zz_perturbative, zz_rate, CircuitParams};
use transmon_parity::dynamics::gate_dispersions;
use transmon_parity::units::{ghz_to_rad, rad_to_ghz, rad_to_hz, rad_to_khz};
use transmon_parity::Result;

fn main() -> Result<()> {
    let circuit = CircuitParams::table1(-270.0);
    println!("{:>10} {:>14} {:>14}", "w_c GHz", "exact kHz", "pert. kHz");
    for step in 0..=8 {
        let omega_c = ghz_to_rad(5.6 + 0.2 * step as f64);
        let exact = zz_rate(&circuit, omega_c)?;
        let pert = zz_perturbative(&circuit, omega_c)?;
        println!("{:>10.2} {:>14.3} {:>14.3}", rad_to_ghz(omega_c), rad_to_khz(exact), rad_to_khz(pert.zeta));
    }

    let idle = find_idling_frequency(&circuit.clone().with_levels(5))?;
    for (w, residual) in idle.frequencies.iter().zip(&idle.residuals) {
        println!("idling point {:.5} GHz, residual {:.2e} Hz", rad_to_ghz(*w), rad_to_hz(*residual));
    }

    let parked = CircuitParams::for_ratio(50.0, 4.8).with_levels(5).at_idle()?;
    let dispersions = gate_dispersions(&parked)?;
    let report = parity_zz_spread(&parked, parked.coupler.omega, &dispersions)?;
    println!("\nE_J/E_C = 50, parked at {:.5} GHz", rad_to_ghz(parked.coupler.omega));
    println!("{:>5} {:>5} {:>5} {:>12} {:>12}", "P_q1", "P_c", "P_q2", "Taylor Hz", "exact Hz");
    for p in &report.per_parity {
        println!(
            "{:>5} {:>5} {:>5} {:>12.2} {:>12.2}",
            i32::from(p.parities[0]),
            i32::from(p.parities[1]),
            i32::from(p.parities[2]),
            rad_to_hz(p.taylor),
            rad_to_hz(p.exact)
        );
    }
    println!("rms spread {:.2} Hz (exact {:.2} Hz)", rad_to_hz(report.rms), rad_to_hz(report.rms_exact));
    Ok(())
}
