//! Metric landscapes over (E_J, E_C) with optimal-region masks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metric::{performance_metric, CircuitSpec, ErrorSource, MetricBreakdown};
use super::noise::NoiseModel;
use crate::error::{Error, Result};

/// Log-spaced rectangular grid in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub ej_min: f64,
    pub ej_max: f64,
    pub ec_min: f64,
    pub ec_max: f64,
    pub n: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self { ej_min: 4.0, ej_max: 40.0, ec_min: 0.1, ec_max: 0.5, n: 60 }
    }
}

fn log_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut axis: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    axis[0] = lo;
    axis[n - 1] = hi;
    axis
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if !(self.ej_min > 0.0 && self.ej_max > self.ej_min && self.ec_min > 0.0 && self.ec_max > self.ec_min) {
            return Err(Error::InvalidParameter("grid bounds must be positive and increasing".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter("grid needs at least two points per axis".into()));
        }
        Ok(())
    }

    pub fn ej_axis(&self) -> Vec<f64> {
        log_axis(self.ej_min, self.ej_max, self.n)
    }

    pub fn ec_axis(&self) -> Vec<f64> {
        log_axis(self.ec_min, self.ec_max, self.n)
    }

    /// Cells in row-major order: E_C outer, E_J inner.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let ej = self.ej_axis();
        self.ec_axis().into_iter().flat_map(|ec| ej.iter().map(move |&e| (e, ec))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub e_j: f64,
    pub e_c: f64,
    /// None when the cell cannot be realized, e.g. a tuning range is exceeded.
    pub breakdown: Option<MetricBreakdown>,
    pub one_minus_p: f64,
    pub dominant: Option<ErrorSource>,
    pub dominant_term: Option<String>,
    pub in_optimal_region: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub grid: Grid,
    pub percentile: f64,
    pub cells: Vec<Cell>,
    /// Largest 1 - P inside the optimal region.
    pub threshold: f64,
    pub warnings: Vec<String>,
}

/// Mask of the lowest round(percentile * count) finite values; ties keep index order.
pub fn optimal_mask(values: &[f64], percentile: f64) -> Result<Vec<bool>> {
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(Error::InvalidParameter(format!("percentile {percentile} outside (0, 1)")));
    }
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_finite()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let keep = (percentile * order.len() as f64).round() as usize;
    let mut mask = vec![false; values.len()];
    for &i in order.iter().take(keep) {
        mask[i] = true;
    }
    Ok(mask)
}

impl Landscape {
    pub fn values(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.one_minus_p).collect()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.cells.iter().map(|c| c.in_optimal_region).collect()
    }

    /// Geometric-mean E_J and E_C of the optimal region.
    pub fn region_centroid(&self) -> Option<(f64, f64)> {
        let inside: Vec<&Cell> = self.cells.iter().filter(|c| c.in_optimal_region).collect();
        if inside.is_empty() {
            return None;
        }
        let n = inside.len() as f64;
        let ej = inside.iter().map(|c| c.e_j.ln()).sum::<f64>() / n;
        let ec = inside.iter().map(|c| c.e_c.ln()).sum::<f64>() / n;
        Some((ej.exp(), ec.exp()))
    }

    /// Masked cell closest in log coordinates to (e_j, e_c).
    pub fn nearest_optimal(&self, e_j: f64, e_c: f64) -> Option<&Cell> {
        let dist = |c: &Cell| (c.e_j.ln() - e_j.ln()).powi(2) + (c.e_c.ln() - e_c.ln()).powi(2);
        self.cells
            .iter()
            .filter(|c| c.in_optimal_region)
            .min_by(|a, b| dist(a).total_cmp(&dist(b)))
    }

    /// Cells whose dominant source is `source`.
    pub fn labelled(&self, source: ErrorSource) -> Vec<usize> {
        (0..self.cells.len()).filter(|&i| self.cells[i].dominant == Some(source)).collect()
    }
}

/// Fraction of `reference` cells that are also set in `other`.
pub fn mask_overlap(reference: &[bool], other: &[bool]) -> f64 {
    let total = reference.iter().filter(|&&m| m).count();
    if total == 0 {
        return 0.0;
    }
    let shared = reference.iter().zip(other).filter(|(&a, &b)| a && b).count();
    shared as f64 / total as f64
}

/// Evaluate the metric on every cell in parallel; output order follows `Grid::points`.
pub fn landscape_scan(grid: &Grid, model: &NoiseModel, spec: &CircuitSpec, percentile: f64) -> Result<Landscape> {
    grid.validate()?;
    model.validate()?;
    spec.validate()?;
    let points = grid.points();
    let results: Vec<Result<MetricBreakdown>> =
        points.par_iter().map(|&(ej, ec)| performance_metric(ej, ec, model, spec)).collect();
    let mut warnings = Vec::new();
    let mut cells = Vec::with_capacity(points.len());
    let mut extrapolated = 0usize;
    for (&(e_j, e_c), r) in points.iter().zip(results) {
        let cell = match r {
            Ok(b) => {
                extrapolated += usize::from(b.leakage_extrapolated);
                let (term, source) = b.dominant();
                Cell {
                    e_j,
                    e_c,
                    breakdown: Some(b),
                    one_minus_p: b.one_minus_p,
                    dominant: Some(source),
                    dominant_term: Some(term.to_string()),
                    in_optimal_region: false,
                }
            }
            Err(Error::TuningRange(msg)) => {
                warnings.push(format!("E_J = {e_j:.4}, E_C = {e_c:.4}: {msg}"));
                Cell { e_j, e_c, breakdown: None, one_minus_p: f64::NAN, dominant: None, dominant_term: None, in_optimal_region: false }
            }
            Err(e) => return Err(e),
        };
        cells.push(cell);
    }
    if extrapolated > 0 {
        warnings.push(format!("leakage table extrapolated in {extrapolated} cells"));
    }
    let values: Vec<f64> = cells.iter().map(|c| c.one_minus_p).collect();
    let mask = optimal_mask(&values, percentile)?;
    let mut threshold = f64::NAN;
    for (c, m) in cells.iter_mut().zip(mask) {
        c.in_optimal_region = m;
        if m && !(c.one_minus_p <= threshold) {
            threshold = c.one_minus_p;
        }
    }
    Ok(Landscape { grid: *grid, percentile, cells, threshold, warnings })
}
