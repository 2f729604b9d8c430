//! Single-qubit-gate leakage: power law in E_C or a table from a driven three-level simulation.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{Matrix2, Matrix3, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{NS, TWO_PI};

/// Charging energies (GHz) of the default leakage table.
pub const TABLE_CHARGING_ENERGIES: [f64; 9] = [0.15, 0.175, 0.2, 0.225, 0.25, 0.275, 0.3, 0.325, 0.35];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LeakageModel {
    /// P_leak = reference_leakage (E_C / reference_ec)^(-gamma).
    PowerLaw { gamma: f64, reference_ec: f64, reference_leakage: f64 },
    /// Log-log interpolation of simulated points.
    Table(LeakageTable),
}

impl Default for LeakageModel {
    fn default() -> Self {
        Self::PowerLaw { gamma: 5.5, reference_ec: 0.2, reference_leakage: 3.44e-5 }
    }
}

impl LeakageModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::PowerLaw { gamma, reference_ec, reference_leakage } => {
                if !(5.0..=6.0).contains(gamma) {
                    return Err(Error::InvalidParameter(format!("leakage exponent {gamma} outside [5, 6]")));
                }
                if !(*reference_ec > 0.0 && *reference_leakage >= 0.0) {
                    return Err(Error::InvalidParameter("leakage anchor must be positive".into()));
                }
                Ok(())
            }
            Self::Table(t) => t.validate(),
        }
    }
}

/// Leakage with a flag set when the table was extrapolated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageEstimate {
    pub value: f64,
    pub extrapolated: bool,
}

/// Leakage per single-qubit gate of a transmon with charging energy e_c (GHz).
pub fn sqg_leakage(model: &LeakageModel, e_c: f64) -> Result<LeakageEstimate> {
    if !(e_c > 0.0) {
        return Err(Error::InvalidParameter(format!("charging energy {e_c} must be positive")));
    }
    match model {
        LeakageModel::PowerLaw { gamma, reference_ec, reference_leakage } => Ok(LeakageEstimate {
            value: reference_leakage * (e_c / reference_ec).powf(-gamma),
            extrapolated: false,
        }),
        LeakageModel::Table(t) => t.interpolate(e_c),
    }
}

/// Sorted (E_C in GHz, leakage) points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageTable {
    pub points: Vec<(f64, f64)>,
}

impl LeakageTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let t = Self { points };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::InvalidParameter("leakage table needs at least two points".into()));
        }
        for w in self.points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidParameter("leakage table charging energies must increase".into()));
            }
        }
        if self.points.iter().any(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
            return Err(Error::InvalidParameter("leakage table entries must be positive".into()));
        }
        Ok(())
    }

    /// Simulated table at the given charging energies.
    pub fn simulate(charging_energies: &[f64], pulse: &DragPulse) -> Result<Self> {
        let points = charging_energies
            .iter()
            .map(|&ec| Ok((ec, optimize_drag(-ec, pulse)?.leakage)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }

    pub fn interpolate(&self, e_c: f64) -> Result<LeakageEstimate> {
        let pts = &self.points;
        let first = pts[0].0;
        let last = pts[pts.len() - 1].0;
        let extrapolated = e_c < first || e_c > last;
        let i = pts.partition_point(|p| p.0 <= e_c).clamp(1, pts.len() - 1);
        let (x0, y0) = (pts[i - 1].0.ln(), pts[i - 1].1.ln());
        let (x1, y1) = (pts[i].0.ln(), pts[i].1.ln());
        let x = e_c.ln();
        Ok(LeakageEstimate { value: (y0 + (y1 - y0) * (x - x0) / (x1 - x0)).exp(), extrapolated })
    }

    /// Least-squares exponent gamma of P_leak ~ E_C^-gamma over points in [lo, hi].
    pub fn fitted_exponent(&self, lo: f64, hi: f64) -> Result<f64> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.0 >= lo && p.0 <= hi)
            .map(|p| (p.0.ln(), p.1.ln()))
            .collect();
        if pts.len() < 2 {
            return Err(Error::InvalidParameter(format!("fewer than two table points in [{lo}, {hi}]")));
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Ok(-sxy / sxx)
    }
}

/// Gaussian DRAG pulse on a resonant three-level transmon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DragPulse {
    pub sigma: f64,
    pub duration: f64,
    /// Rotation angle about x.
    pub theta: f64,
    pub steps: usize,
}

impl Default for DragPulse {
    fn default() -> Self {
        Self { sigma: 4.0 * NS, duration: 16.0 * NS, theta: std::f64::consts::PI, steps: 400 }
    }
}

/// Optimized DRAG gate at one anharmonicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DragResult {
    pub amplitude_scale: f64,
    pub drag_coefficient: f64,
    pub infidelity: f64,
    pub leakage: f64,
}

/// Propagator of the drive with amplitude scale `amp` and DRAG coefficient `beta`; alpha in GHz.
pub fn drag_unitary(alpha: f64, amp: f64, beta: f64, pulse: &DragPulse) -> Matrix3<Complex64> {
    // work in ns and rad/ns
    let sigma = pulse.sigma / NS;
    let total = pulse.duration / NS;
    let h = total / pulse.steps as f64;
    let floor = (-(total / 2.0).powi(2) / (2.0 * sigma * sigma)).exp();
    let envelope = |t: f64| (-(t - total / 2.0).powi(2) / (2.0 * sigma * sigma)).exp() - floor;
    let slope = |t: f64| -(t - total / 2.0) / (sigma * sigma) * (-(t - total / 2.0).powi(2) / (2.0 * sigma * sigma)).exp();
    let area: f64 = (0..pulse.steps).map(|k| envelope((k as f64 + 0.5) * h)).sum::<f64>() * h;
    let anharmonic = TWO_PI * alpha;
    let lowering = |i: usize| (i as f64).sqrt();
    let mut u = Matrix3::<Complex64>::identity();
    for k in 0..pulse.steps {
        let t = (k as f64 + 0.5) * h;
        let in_phase = amp * pulse.theta / area * envelope(t);
        let quadrature = -beta * amp * pulse.theta / area * slope(t) / anharmonic;
        let mut hm = Matrix3::<Complex64>::zeros();
        hm[(2, 2)] = Complex64::new(anharmonic, 0.0);
        for n in 1..3 {
            // 0.5 (Ox (a + a^dag) + i Oy (a^dag - a)) on the (n-1, n) pair
            let c = Complex64::new(0.5 * in_phase * lowering(n), -0.5 * quadrature * lowering(n));
            hm[(n - 1, n)] = c;
            hm[(n, n - 1)] = c.conj();
        }
        let eig = SymmetricEigen::new(hm);
        let phases = eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e * h));
        let step = &eig.eigenvectors * Matrix3::from_diagonal(&phases) * eig.eigenvectors.adjoint();
        u = step * u;
    }
    u
}

/// Fidelity to R_x(theta) after the best virtual Z frame, and leakage.
pub fn drag_fidelity(u: &Matrix3<Complex64>, theta: f64) -> (f64, f64) {
    let m: Matrix2<Complex64> = u.fixed_view::<2, 2>(0, 0).into_owned();
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let target = Matrix2::new(
        Complex64::new(c, 0.0),
        Complex64::new(0.0, -s),
        Complex64::new(0.0, -s),
        Complex64::new(c, 0.0),
    );
    // tr(T^dag Z M Z) = a + b e^{ip} + c e^{2ip} with Z = diag(1, e^{ip})
    let a = target[(0, 0)].conj() * m[(0, 0)];
    let b = target[(1, 0)].conj() * m[(1, 0)] + target[(0, 1)].conj() * m[(0, 1)];
    let cc = target[(1, 1)].conj() * m[(1, 1)];
    let overlap = |p: f64| (a + b * Complex64::from_polar(1.0, p) + cc * Complex64::from_polar(1.0, 2.0 * p)).norm_sqr();
    let grid = 720;
    let mut best = (0.0, f64::MIN);
    for i in 0..grid {
        let p = -std::f64::consts::PI + TWO_PI * i as f64 / grid as f64;
        let v = overlap(p);
        if v > best.1 {
            best = (p, v);
        }
    }
    // golden-section refinement inside the winning cell
    let (mut lo, mut hi) = (best.0 - TWO_PI / grid as f64, best.0 + TWO_PI / grid as f64);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let x1 = hi - ratio * (hi - lo);
        let x2 = lo + ratio * (hi - lo);
        if overlap(x1) > overlap(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let best = overlap(0.5 * (lo + hi)).max(best.1);
    let d = 2.0;
    let kept = (m * m.adjoint()).trace().re / d;
    let leakage = 1.0 - kept;
    ((best / d + kept) / (d + 1.0), leakage)
}

struct DragCost {
    alpha: f64,
    pulse: DragPulse,
}

impl CostFunction for DragCost {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let u = drag_unitary(self.alpha, x[0], x[1], &self.pulse);
        Ok(1.0 - drag_fidelity(&u, self.pulse.theta).0)
    }
}

/// Optimize amplitude scale and DRAG coefficient for anharmonicity alpha (GHz, negative).
pub fn optimize_drag(alpha: f64, pulse: &DragPulse) -> Result<DragResult> {
    if !(alpha < 0.0) {
        return Err(Error::InvalidParameter(format!("anharmonicity {alpha} GHz must be negative")));
    }
    let simplex = vec![vec![1.0, 0.5], vec![1.05, 0.5], vec![1.0, 0.6]];
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-15).map_err(|e| Error::Internal(e.to_string()))?;
    let run = Executor::new(DragCost { alpha, pulse: *pulse }, solver)
        .configure(|s| s.max_iters(500))
        .run()
        .map_err(|e| Error::Convergence(format!("DRAG optimization: {e}")))?;
    let x = run.state.best_param.ok_or_else(|| Error::Convergence("DRAG optimization returned no point".into()))?;
    let (fidelity, leakage) = drag_fidelity(&drag_unitary(alpha, x[0], x[1], pulse), pulse.theta);
    Ok(DragResult { amplitude_scale: x[0], drag_coefficient: x[1], infidelity: 1.0 - fidelity, leakage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn power_law_doubling() {
        let m = LeakageModel::default();
        let a = sqg_leakage(&m, 0.2).unwrap().value;
        let b = sqg_leakage(&m, 0.4).unwrap().value;
        assert_relative_eq!(b / a, 2f64.powf(-5.5), max_relative = 1e-14);
        assert_relative_eq!(a, 3.44e-5, max_relative = 1e-14);
    }

    #[test]
    fn exponent_outside_band_is_rejected() {
        let m = LeakageModel::PowerLaw { gamma: 4.0, reference_ec: 0.2, reference_leakage: 1e-5 };
        assert!(m.validate().is_err());
    }

    #[test]
    fn table_hits_nodes_and_flags_extrapolation() {
        let t = LeakageTable::new(vec![(0.3, 1e-5), (0.2, 4e-5), (0.25, 2e-5)]).unwrap();
        let at = t.interpolate(0.25).unwrap();
        assert_relative_eq!(at.value, 2e-5, max_relative = 1e-14);
        assert!(!at.extrapolated);
        assert!(t.interpolate(0.4).unwrap().extrapolated);
        assert!(t.interpolate(0.1).unwrap().extrapolated);
    }

    #[test]
    fn exact_power_law_table_fits_its_exponent() {
        let pts = TABLE_CHARGING_ENERGIES.iter().map(|&e| (e, 1e-5 * (e / 0.2f64).powf(-5.3))).collect();
        let t = LeakageTable::new(pts).unwrap();
        assert_relative_eq!(t.fitted_exponent(0.15, 0.35).unwrap(), 5.3, max_relative = 1e-12);
    }

    #[test]
    fn undriven_pulse_only_phases_the_second_level() {
        let u = drag_unitary(-0.2, 0.0, 0.0, &DragPulse::default());
        let block = u.fixed_view::<2, 2>(0, 0).into_owned();
        assert!((block - Matrix2::identity()).norm() < 1e-12);
        assert!((u[(2, 2)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn propagator_is_unitary() {
        let u = drag_unitary(-0.2, 1.0, 0.5, &DragPulse::default());
        assert!((u.adjoint() * u - Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn harmonic_limit_has_no_leakage_error_in_two_level_subspace() {
        // a very large anharmonicity decouples |2>, so the pulse is an ideal pi rotation
        let u = drag_unitary(-1e4, 1.0, 0.0, &DragPulse::default());
        let (f, leak) = drag_fidelity(&u, std::f64::consts::PI);
        assert!(leak < 1e-8 && 1.0 - f < 1e-7, "leak {leak} infidelity {}", 1.0 - f);
    }

    #[test]
    fn drag_beats_plain_gaussian_and_leakage_falls_with_charging_energy() {
        let pulse = DragPulse::default();
        let plain = drag_fidelity(&drag_unitary(-0.2, 1.0, 0.0, &pulse), pulse.theta).1;
        let tuned = optimize_drag(-0.2, &pulse).unwrap();
        assert!(tuned.leakage < plain);
        assert!(tuned.infidelity < 1e-3);
        let larger = optimize_drag(-0.3, &pulse).unwrap();
        assert!(larger.leakage < tuned.leakage);
    }
}
