//! One step of the design loop: re-anchor the noise model to measured
//! coherence and propose the next (E_J, E_C).
//!
//! Run with `cargo run --release --example design_loop`.

use transmon_parity::design::{optimize_loop, CircuitSpec, Grid, MeasuredCoherence, NoiseModel};
use transmon_parity::units::US;
use transmon_parity::Result;

fn main() -> Result<()> {
    let measured = MeasuredCoherence { t1: 80.0 * US, tphi: 120.0 * US, temperature: 0.05 };
    let mut current = (12.0, 0.2);
    for step in 1..=3 {
        let proposal = optimize_loop(
            &measured,
            current,
            &NoiseModel::reference(100.0 * US),
            &CircuitSpec::default(),
            &Grid::default(),
            0.1,
        )?;
        println!(
            "step {step}: ({:.2}, {:.3}) 1-P = {:.3e} -> ({:.2}, {:.3}) 1-P = {:.3e}{}",
            current.0,
            current.1,
            proposal.current.one_minus_p,
            proposal.e_j,
            proposal.e_c,
            proposal.proposed.one_minus_p,
            if proposal.converged { ", converged" } else { "" }
        );
        if proposal.converged {
            break;
        }
        current = (proposal.e_j, proposal.e_c);
    }
    Ok(())
}
