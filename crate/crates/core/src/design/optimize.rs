//! One iteration of the design loop: re-anchor, rescan, propose.

use serde::{Deserialize, Serialize};

use super::landscape::{landscape_scan, Grid, Landscape};
use super::metric::{performance_metric, CircuitSpec, MetricBreakdown};
use super::noise::NoiseModel;
use crate::error::{Error, Result};

/// Coherence measured on the current device (seconds, kelvin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredCoherence {
    pub t1: f64,
    pub tphi: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub e_j: f64,
    pub e_c: f64,
    pub converged: bool,
    pub current: MetricBreakdown,
    pub proposed: MetricBreakdown,
    pub model: NoiseModel,
    pub landscape: Landscape,
}

/// Model anchored at the measured device.
pub fn reanchor(model: &NoiseModel, measured: &MeasuredCoherence, current: (f64, f64)) -> NoiseModel {
    NoiseModel {
        t1_ref: measured.t1,
        tphi_ref: measured.tphi,
        ref_ej: current.0,
        ref_ec: current.1,
        temperature: measured.temperature,
        ..model.clone()
    }
}

/// Converged when the current point scores inside the optimal region; otherwise
/// propose the optimal cell nearest to the region's log-space centroid.
pub fn optimize_loop(
    measured: &MeasuredCoherence,
    current: (f64, f64),
    model: &NoiseModel,
    spec: &CircuitSpec,
    grid: &Grid,
    percentile: f64,
) -> Result<Proposal> {
    let model = reanchor(model, measured, current);
    let landscape = landscape_scan(grid, &model, spec, percentile)?;
    let here = performance_metric(current.0, current.1, &model, spec)?;
    if here.one_minus_p <= landscape.threshold {
        return Ok(Proposal { e_j: current.0, e_c: current.1, converged: true, current: here, proposed: here, model, landscape });
    }
    let (cj, cc) = landscape.region_centroid().ok_or_else(|| Error::Convergence("empty optimal region".into()))?;
    let cell = landscape.nearest_optimal(cj, cc).ok_or_else(|| Error::Convergence("empty optimal region".into()))?;
    let proposed = cell.breakdown.ok_or_else(|| Error::Internal("masked cell without metric".into()))?;
    let (e_j, e_c) = (cell.e_j, cell.e_c);
    Ok(Proposal { e_j, e_c, converged: false, current: here, proposed, model, landscape })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::metric::ErrorSource;
    use crate::units::US;

    fn measured(t1: f64) -> MeasuredCoherence {
        MeasuredCoherence { t1, tphi: t1, temperature: 0.05 }
    }

    fn grid() -> Grid {
        Grid { n: 24, ..Grid::default() }
    }

    #[test]
    fn point_inside_region_converges() {
        let base = NoiseModel::reference(150.0 * US);
        let spec = CircuitSpec::default();
        let first = optimize_loop(&measured(150.0 * US), (12.0, 0.2), &base, &spec, &grid(), 0.1).unwrap();
        let inside = first.landscape.cells.iter().find(|c| c.in_optimal_region).unwrap();
        // re-anchoring at an optimal cell with the coherence the scaling predicts there
        let rates = crate::design::noise::scale_rates(&first.model, inside.e_j, inside.e_c).unwrap();
        let m = MeasuredCoherence { t1: 1.0 / rates.gamma1, tphi: 1.0 / rates.gamma_phi, temperature: 0.05 };
        let second = optimize_loop(&m, (inside.e_j, inside.e_c), &first.model, &spec, &grid(), 0.1).unwrap();
        assert!(second.converged);
        assert_eq!((second.e_j, second.e_c), (inside.e_j, inside.e_c));
    }

    #[test]
    fn parity_corner_moves_to_larger_ratio() {
        let base = NoiseModel::reference(150.0 * US);
        let spec = CircuitSpec::default();
        let current = (5.0, 0.45);
        let here = performance_metric(current.0, current.1, &base, &spec).unwrap();
        assert_eq!(here.dominant().1, ErrorSource::Parity);
        let p = optimize_loop(&measured(150.0 * US), current, &base, &spec, &grid(), 0.1).unwrap();
        assert!(!p.converged);
        assert!(p.e_j / p.e_c > current.0 / current.1);
    }

    #[test]
    fn longer_coherence_shifts_budget_to_parity() {
        let base = NoiseModel::reference(150.0 * US);
        let spec = CircuitSpec::default();
        let point = (10.0, 0.25);
        let short = reanchor(&base, &measured(100.0 * US), (12.0, 0.2));
        let long = reanchor(&base, &measured(200.0 * US), (12.0, 0.2));
        let a = performance_metric(point.0, point.1, &short, &spec).unwrap();
        let b = performance_metric(point.0, point.1, &long, &spec).unwrap();
        assert!(b.fraction(ErrorSource::Parity) > a.fraction(ErrorSource::Parity));
    }
}
