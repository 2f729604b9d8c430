//! Performance-metric landscape over (E_J, E_C) for three coherence levels,
//! with the optimal region and the error source dominating each corner.
//!
//! Run with `cargo run --release --example design_landscape`.

use transmon_parity::design::{landscape_scan, performance_metric, CircuitSpec, ErrorSource, Grid, NoiseModel};
use transmon_parity::units::US;
use transmon_parity::Result;

fn main() -> Result<()> {
    let spec = CircuitSpec::default();
    let grid = Grid::default();
    for t1_us in [50.0, 150.0, 500.0] {
        let model = NoiseModel::reference(t1_us * US);
        let landscape = landscape_scan(&grid, &model, &spec, 0.1)?;
        let (ej, ec) = landscape.region_centroid().unwrap_or((f64::NAN, f64::NAN));
        println!("T1 = T_phi = {t1_us} us: optimal region centred at E_J = {ej:.2} GHz, E_C = {ec:.3} GHz");
        for source in [ErrorSource::Parity, ErrorSource::Decoherence, ErrorSource::Leakage, ErrorSource::Thermal] {
            println!("  {:<12} dominates {:>5} cells", source.name(), landscape.labelled(source).len());
        }
        for (e_j, e_c) in [(4.0, 0.1), (4.0, 0.5), (40.0, 0.1), (40.0, 0.5)] {
            let b = performance_metric(e_j, e_c, &model, &spec)?;
            println!("  corner ({e_j:>4}, {e_c}): 1-P = {:.3e}, dominant {}", b.one_minus_p, b.dominant().0);
        }
    }
    Ok(())
}
