//! Parity-switching Kraus channel: closed-form and Monte-Carlo gate fidelity,
//! error accumulation over repeated gates, and the decoherence bound from
//! quasiparticle tunnelling.
//!
//! Run with `cargo run --release --example parity_channel`.

use std::f64::consts::PI;

use transmon_parity::channel::{
    channel_fidelity, cphase, haar_average_fidelity, kraus_operators, n_gate_infidelity, qp_decoherence_bound,
    ParityChannel,
};
use transmon_parity::units::{MS, NS};
use transmon_parity::Result;

fn main() -> Result<()> {
    println!("{:>10} {:>14} {:>14} {:>14}", "dphi rad", "1-F exact", "1-F quad", "1-F Haar MC");
    for delta_phi in [0.01, 0.03, 0.1, 0.3] {
        let ch = ParityChannel::new(PI, delta_phi, 0.0)?;
        let f = channel_fidelity(&ch)?;
        let mc = haar_average_fidelity(&kraus_operators(&ch)?, &cphase(ch.phi0), 20_000, 7)?;
        println!("{delta_phi:>10.2} {:>14.4e} {:>14.4e} {:>14.4e}", 1.0 - f.exact, 1.0 - f.quadratic, 1.0 - mc.mean);
    }

    let ch = ParityChannel::new(PI, 0.05, 0.0)?;
    println!("\n{:>6} {:>14} {:>14}", "gates", "1-F exact", "1-F linear");
    for n in [1, 10, 100] {
        let nf = n_gate_infidelity(&ch, n)?;
        println!("{n:>6} {:>14.4e} {:>14.4e}", 1.0 - nf.exact, 1.0 - nf.linear);
    }

    println!("\nquasiparticle bound for a 50 ns gate");
    for t_parity_ms in [1.25, 2.5, 20.0] {
        println!("T_P = {t_parity_ms:>5} ms: {:.3e}", qp_decoherence_bound(t_parity_ms * MS, 50.0 * NS)?);
    }
    Ok(())
}
