//! Density-matrix simulation of the repeated reference circuit with gate-appended noise.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::metric::{derive_pair, term_inputs, CircuitSpec, DesignPair, TermInputs};
use super::noise::NoiseModel;
use crate::channel::{kraus_operators, ParityChannel};
use crate::error::{Error, Result};

type C = Complex64;

/// Error channels switched on in the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSelection {
    pub relaxation: bool,
    pub dephasing: bool,
    pub leakage: bool,
    pub parity: bool,
    pub thermal: bool,
}

impl ErrorSelection {
    pub const ALL: Self = Self { relaxation: true, dephasing: true, leakage: true, parity: true, thermal: true };
    pub const NONE: Self = Self { relaxation: false, dephasing: false, leakage: false, parity: false, thermal: false };
}

/// Outcome of one circuit run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitRun {
    pub infidelity: f64,
    pub repetitions: u64,
    /// Remaining trace after leakage losses.
    pub trace: f64,
}

fn rotation(axis_x: bool, angle: f64) -> Matrix2<C> {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    if axis_x {
        Matrix2::new(C::new(c, 0.0), C::new(0.0, -s), C::new(0.0, -s), C::new(c, 0.0))
    } else {
        Matrix2::new(C::new(c, 0.0), C::new(-s, 0.0), C::new(s, 0.0), C::new(c, 0.0))
    }
}

/// Embed a single-qubit operator; qubit 0 is the most significant bit.
fn embed(op: &Matrix2<C>, qubit: usize) -> Matrix4<C> {
    let mut out = Matrix4::<C>::zeros();
    for r in 0..4 {
        for c in 0..4 {
            let (r1, r2, c1, c2) = (r >> 1, r & 1, c >> 1, c & 1);
            out[(r, c)] = if qubit == 0 {
                if r2 == c2 { op[(r1, c1)] } else { C::new(0.0, 0.0) }
            } else if r1 == c1 {
                op[(r2, c2)]
            } else {
                C::new(0.0, 0.0)
            };
        }
    }
    out
}

fn conjugate(rho: &Matrix4<C>, u: &Matrix4<C>) -> Matrix4<C> {
    u * rho * u.adjoint()
}

fn kraus_sum(rho: &Matrix4<C>, ops: &[Matrix4<C>]) -> Matrix4<C> {
    ops.iter().map(|k| conjugate(rho, k)).sum()
}

fn amplitude_damping(rho: &Matrix4<C>, qubit: usize, gamma: f64) -> Matrix4<C> {
    let k0 = Matrix2::new(C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new((1.0 - gamma).sqrt(), 0.0));
    let k1 = Matrix2::new(C::new(0.0, 0.0), C::new(gamma.sqrt(), 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0));
    kraus_sum(rho, &[embed(&k0, qubit), embed(&k1, qubit)])
}

/// Multiply the coherences of `qubit` by `factor`.
fn dephase(rho: &Matrix4<C>, qubit: usize, factor: f64) -> Matrix4<C> {
    let shift = 1 - qubit;
    let mut out = *rho;
    for r in 0..4 {
        for c in 0..4 {
            if (r >> shift) & 1 != (c >> shift) & 1 {
                out[(r, c)] *= factor;
            }
        }
    }
    out
}

struct Noise {
    inputs: TermInputs,
    select: ErrorSelection,
    spec: CircuitSpec,
    parity_ops: [Matrix4<C>; 2],
}

impl Noise {
    fn decohere(&self, rho: &Matrix4<C>, duration: f64, gamma_phi: [f64; 2]) -> Matrix4<C> {
        let mut out = *rho;
        for q in 0..2 {
            if self.select.relaxation {
                out = amplitude_damping(&out, q, 1.0 - (-self.inputs.gamma1[q] * duration).exp());
            }
            if self.select.dephasing {
                out = dephase(&out, q, (-gamma_phi[q] * duration / 2.0).exp());
            }
        }
        out
    }

    fn leak(&self, rho: &Matrix4<C>) -> Matrix4<C> {
        if !self.select.leakage {
            return *rho;
        }
        let kept = (1.0 - self.inputs.leakage[0] / 3.0) * (1.0 - self.inputs.leakage[1] / 3.0);
        rho * C::new(kept, 0.0)
    }
}

fn cz() -> Matrix4<C> {
    let mut u = Matrix4::<C>::identity();
    u[(3, 3)] = C::new(-1.0, 0.0);
    u
}

fn layer(rho: &Matrix4<C>, gate: &Matrix2<C>) -> Matrix4<C> {
    conjugate(&conjugate(rho, &embed(gate, 0)), &embed(gate, 1))
}

/// One block: pi rotations, pi/2 rotations, CZ; noise appended after each gate.
fn repetition(rho: &Matrix4<C>, noise: Option<&Noise>) -> Matrix4<C> {
    let pi_x = rotation(true, std::f64::consts::PI);
    let half_y = rotation(false, std::f64::consts::FRAC_PI_2);
    let mut out = layer(rho, &pi_x);
    if let Some(n) = noise {
        out = n.leak(&n.decohere(&out, n.spec.t_sqg, n.inputs.gamma_phi_sqg));
    }
    out = layer(&out, &half_y);
    if let Some(n) = noise {
        out = n.decohere(&out, n.spec.t_sqg, n.inputs.gamma_phi_sqg);
    }
    match noise {
        Some(n) if n.select.parity => out = kraus_sum(&out, &n.parity_ops),
        _ => out = conjugate(&out, &cz()),
    }
    if let Some(n) = noise {
        out = n.decohere(&out, n.spec.t_tqg, n.inputs.gamma_phi_tqg);
    }
    out
}

/// Run the circuit for explicit noise inputs.
pub fn run_circuit(inputs: &TermInputs, spec: &CircuitSpec, repetitions: u64, select: ErrorSelection) -> Result<CircuitRun> {
    let delta_phi = spec.t_tqg / 2.0 * inputs.eps2;
    let channel = ParityChannel::new(std::f64::consts::PI, delta_phi, 0.0)?;
    let noise = Noise { inputs: *inputs, select, spec: *spec, parity_ops: kraus_operators(&channel)? };
    let mut rho = Matrix4::<C>::zeros();
    let (p1, p2) = if select.thermal { (inputs.thermal[0], inputs.thermal[1]) } else { (0.0, 0.0) };
    for r in 0..4 {
        let (b1, b2) = (r >> 1, r & 1);
        let w1 = if b1 == 1 { p1 } else { 1.0 - p1 };
        let w2 = if b2 == 1 { p2 } else { 1.0 - p2 };
        rho[(r, r)] = C::new(w1 * w2, 0.0);
    }
    let mut ideal = Matrix4::<C>::zeros();
    ideal[(0, 0)] = C::new(1.0, 0.0);
    for _ in 0..repetitions {
        rho = repetition(&rho, Some(&noise));
        ideal = repetition(&ideal, None);
    }
    let overlap = (ideal * rho).trace().re;
    if !overlap.is_finite() {
        return Err(Error::Internal("non-finite state overlap".into()));
    }
    Ok(CircuitRun { infidelity: 1.0 - overlap, repetitions, trace: rho.trace().re })
}

/// Final-state infidelity of the reference circuit at qubit-2 energies (e_j, e_c).
///
/// Rates follow the same scaling as the performance metric; N = floor(T_1,0 / (10 (t_TQG + 2 t_SQG))).
pub fn simulate_reference_circuit(e_j: f64, e_c: f64, model: &NoiseModel, spec: &CircuitSpec) -> Result<f64> {
    Ok(simulate_reference_circuit_with(e_j, e_c, model, spec, ErrorSelection::ALL)?.infidelity)
}

pub fn simulate_reference_circuit_with(
    e_j: f64,
    e_c: f64,
    model: &NoiseModel,
    spec: &CircuitSpec,
    select: ErrorSelection,
) -> Result<CircuitRun> {
    model.validate()?;
    spec.validate()?;
    let pair: DesignPair = derive_pair(e_j, e_c, model)?;
    let (inputs, _) = term_inputs(&pair, model)?;
    run_circuit(&inputs, spec, spec.n_repetitions(model.t1_ref).max(1), select)
}
