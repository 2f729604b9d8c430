//! Two-level effective model of the CZ interaction and its sensitivity to the
//! anharmonicity shift caused by a parity flip of the second qubit.
//!
//! Run with `cargo run --release --example effective_model`.

use transmon_parity::channel::{delta_p11, delta_phi};
use transmon_parity::circuit::CircuitParams;
use transmon_parity::dynamics::gate_dispersions;
use transmon_parity::effective::{
    effective_gate, leakage_susceptibility, phase_susceptibility, swt_parameters, validate_assumptions,
    SusceptibilityMode,
};
use transmon_parity::units::{ghz_to_rad, rad_to_ghz, NS};
use transmon_parity::Result;

fn main() -> Result<()> {
    let circuit = CircuitParams::for_ratio(50.0, 4.8);
    let eps2 = ghz_to_rad(gate_dispersions(&circuit)?[2].eps2);
    println!("{:>8} {:>10} {:>12} {:>12} {:>12} {:>12}", "w_c GHz", "t_g ns", "dphi/da ns", "full ns", "dphi rad", "dP11");
    for omega_c_ghz in [5.4, 5.6, 5.8, 6.0] {
        let omega_c = ghz_to_rad(omega_c_ghz);
        let params = swt_parameters(&circuit, omega_c)?;
        let gate = effective_gate(&params, 1)?;
        let simplified = phase_susceptibility(&circuit, omega_c, gate.t_g, SusceptibilityMode::Simplified)?;
        let full = phase_susceptibility(&circuit, omega_c, gate.t_g, SusceptibilityMode::Full)?;
        let leak = leakage_susceptibility(&circuit, omega_c, gate.t_g)?;
        println!(
            "{omega_c_ghz:>8.2} {:>10.2} {:>12.3} {:>12.3} {:>12.4e} {:>12.4e}",
            gate.t_g / NS,
            simplified / NS,
            full / NS,
            delta_phi(simplified, eps2, 0.0),
            delta_p11(leak.second_derivative, eps2, 0.0)
        );
    }

    let omega_c = ghz_to_rad(5.6);
    let params = swt_parameters(&circuit, omega_c)?;
    println!("\nRabi frequency {:.3} MHz", rad_to_ghz(params.rabi) * 1e3);
    for check in validate_assumptions(&circuit, omega_c)?.checks {
        println!("{:<24} ratio {:.3e} (limit {:.1e}) {}", check.name, check.ratio, check.threshold, if check.passed { "ok" } else { "violated" });
    }
    Ok(())
}
