//! Charge-basis spectrum of a single transmon and the parity splitting of its levels.
//!
//! Run with `cargo run --release --example transmon_spectrum`.

use transmon_parity::spectral::{
    charge_dispersion_asymptotic, charge_dispersion_exact, diagonalize_charge_basis, Parity, TransmonParams,
    DEFAULT_CHARGE_CUTOFF,
};
use transmon_parity::Result;

fn main() -> Result<()> {
    let e_c = 0.25;
    let even = TransmonParams::new(12.5, e_c, 0.0, Parity::Even)?;
    let plus = diagonalize_charge_basis(&even, 4, DEFAULT_CHARGE_CUTOFF)?;
    let minus = diagonalize_charge_basis(&even.with_parity(Parity::Odd), 4, DEFAULT_CHARGE_CUTOFF)?;
    println!("E_J/E_C = {:.0}", even.ratio());
    println!("{:>3} {:>16} {:>16}", "m", "E_m(P=+1) GHz", "E_m(P=-1) GHz");
    for m in 0..4 {
        println!("{m:>3} {:>16.9} {:>16.9}", plus.levels[m], minus.levels[m]);
    }

    println!("\ncharge dispersion of the first three levels, GHz");
    println!("{:>6} {:>3} {:>14} {:>14}", "ratio", "m", "exact", "asymptotic");
    for ratio in [20.0, 40.0, 60.0, 80.0] {
        for m in 0..3 {
            let exact = charge_dispersion_exact(ratio * e_c, e_c, m, DEFAULT_CHARGE_CUTOFF)?;
            let asymptotic = charge_dispersion_asymptotic(ratio * e_c, e_c, m as u32)?;
            println!("{ratio:>6.0} {m:>3} {exact:>14.6e} {asymptotic:>14.6e}");
        }
    }
    Ok(())
}
