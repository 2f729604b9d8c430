//! Time-domain simulation of the flux-pulsed CZ gate.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    block_eigen, identify_in, parity_states, state_index, BlockTerms, CircuitParams, Dispersion, Label, ModeShift,
    SplitHamiltonian,
};
use crate::effective::GateOutcome;
use crate::error::{Error, Result};
use crate::pulse::{FlattopGaussian, DEFAULT_SIGMA};
use crate::spectral::Parity;
use crate::units::{ghz_to_rad, rad_to_ghz, wrap_phase, NS, TWO_PI};

/// Fourth-order commutator-free Magnus coefficients.
const CF4_A1: f64 = 0.25 + 0.288_675_134_594_812_9; // 1/4 + sqrt(3)/6
const CF4_A2: f64 = 0.25 - 0.288_675_134_594_812_9;
const CF4_C1: f64 = 0.5 - 0.288_675_134_594_812_9;
const CF4_C2: f64 = 0.5 + 0.288_675_134_594_812_9;

/// Tolerated drift of the state norm.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Commutator-free fourth-order Magnus steps.
    #[default]
    Magnus4,
    /// Midpoint Hamiltonian held constant over each step.
    PiecewiseConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationSettings {
    /// Step in seconds.
    pub dt: f64,
    pub integrator: Integrator,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        Self { dt: 0.1 * NS, integrator: Integrator::Magnus4 }
    }
}

impl PropagationSettings {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }
}

/// Complex column states of one parity block, stored as real and imaginary parts.
#[derive(Debug, Clone)]
struct BlockState {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl BlockState {
    fn column_norm_sq(&self, j: usize) -> f64 {
        self.re.column(j).norm_squared() + self.im.column(j).norm_squared()
    }
}

fn apply_exponential(h: DMatrix<f64>, dt: f64, s: &mut BlockState) {
    let eig = SymmetricEigen::new(h);
    let v = eig.eigenvectors;
    let mut wr = v.tr_mul(&s.re);
    let mut wi = v.tr_mul(&s.im);
    for (r, e) in eig.eigenvalues.iter().enumerate() {
        let (sn, c) = (e * dt).sin_cos();
        for j in 0..wr.ncols() {
            let (a, b) = (wr[(r, j)], wi[(r, j)]);
            wr[(r, j)] = c * a + sn * b;
            wi[(r, j)] = c * b - sn * a;
        }
    }
    s.re = &v * wr;
    s.im = &v * wi;
}

/// Propagates the columns of `state` through the pulse, calling `observe` after every step.
fn propagate_block(
    terms: &BlockTerms,
    omega_idle: f64,
    pulse: &FlattopGaussian,
    settings: &PropagationSettings,
    state: &mut BlockState,
    mut observe: impl FnMut(usize, f64, &BlockState),
) -> Result<usize> {
    if !(settings.dt > 0.0) {
        return Err(Error::InvalidParameter(format!("step {} s", settings.dt)));
    }
    let steps = ((pulse.total_t / settings.dt).ceil() as usize).max(1);
    let h = pulse.total_t / steps as f64;
    let wc = |t: f64| pulse.coupler_frequency(omega_idle, t);
    for k in 0..steps {
        let t0 = k as f64 * h;
        match settings.integrator {
            Integrator::Magnus4 => {
                let h1 = terms.assemble(wc(t0 + CF4_C1 * h));
                let h2 = terms.assemble(wc(t0 + CF4_C2 * h));
                apply_exponential(&h1 * CF4_A1 + &h2 * CF4_A2, h, state);
                apply_exponential(&h1 * CF4_A2 + &h2 * CF4_A1, h, state);
            }
            Integrator::PiecewiseConstant => {
                apply_exponential(terms.assemble(wc(t0 + 0.5 * h)), h, state);
            }
        }
        observe(k + 1, t0 + h, state);
    }
    for j in 0..state.re.ncols() {
        let drift = (state.column_norm_sq(j).sqrt() - 1.0).abs();
        if drift > NORM_TOLERANCE {
            return Err(Error::Integration(format!("norm drift {drift:.3e}; reduce the step")));
        }
    }
    Ok(steps)
}

/// Sampled state trajectory over the product Fock basis.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<Complex64>>,
}

/// Solves the Schrodinger equation with the coupler at circuit.coupler.omega - A f(t).
pub fn propagate(
    circuit: &CircuitParams,
    pulse: &FlattopGaussian,
    psi0: &DVector<Complex64>,
    samples: usize,
) -> Result<Trajectory> {
    propagate_with(circuit, pulse, psi0, samples, &PropagationSettings::default())
}

pub fn propagate_with(
    circuit: &CircuitParams,
    pulse: &FlattopGaussian,
    psi0: &DVector<Complex64>,
    samples: usize,
    settings: &PropagationSettings,
) -> Result<Trajectory> {
    if circuit.levels < 4 {
        return Err(Error::InvalidParameter("gate dynamics need at least 4 levels per transmon".into()));
    }
    let split = SplitHamiltonian::new(circuit)?;
    if psi0.len() != split.dimension() {
        return Err(Error::InvalidParameter(format!("state length {} != {}", psi0.len(), split.dimension())));
    }
    if (psi0.norm() - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::InvalidParameter("initial state is not normalized".into()));
    }
    let samples = samples.max(2);
    let steps = ((pulse.total_t / settings.dt).ceil() as usize).max(1);
    let marks: Vec<usize> = (0..samples).map(|i| (i * steps + (samples - 1) / 2) / (samples - 1)).collect();
    let h = pulse.total_t / steps as f64;
    let times: Vec<f64> = marks.iter().map(|&k| k as f64 * h).collect();
    let mut states = vec![DVector::<Complex64>::zeros(split.dimension()); samples];

    for block in &split.blocks {
        let dim = block.dim();
        let mut s = BlockState { re: DMatrix::zeros(dim, 1), im: DMatrix::zeros(dim, 1) };
        for (r, &idx) in block.indices.iter().enumerate() {
            s.re[(r, 0)] = psi0[idx].re;
            s.im[(r, 0)] = psi0[idx].im;
        }
        let scatter = |out: &mut DVector<Complex64>, st: &BlockState| {
            for (r, &idx) in block.indices.iter().enumerate() {
                out[idx] = Complex64::new(st.re[(r, 0)], st.im[(r, 0)]);
            }
        };
        let weight = s.column_norm_sq(0);
        for (i, &m) in marks.iter().enumerate() {
            if m == 0 {
                scatter(&mut states[i], &s);
            }
        }
        if weight == 0.0 {
            continue;
        }
        // normalise per block so the drift check applies to each block separately
        let scale = weight.sqrt();
        s.re /= scale;
        s.im /= scale;
        propagate_block(block, circuit.coupler.omega, pulse, settings, &mut s, |k, _, st| {
            for (i, &m) in marks.iter().enumerate() {
                if m == k {
                    for (r, &idx) in block.indices.iter().enumerate() {
                        states[i][idx] = Complex64::new(st.re[(r, 0)], st.im[(r, 0)]) * scale;
                    }
                }
            }
        })?;
    }
    Ok(Trajectory { times, states })
}

/// 4x4 block of the propagator in the dressed {00, 01, 10, 11} basis at the idle point.
#[derive(Debug, Clone)]
pub struct RawProcess {
    pub matrix: Matrix4<Complex64>,
    /// |<02|U|11>|^2.
    pub p02: f64,
    /// Full |11>-|02> cycles counted from the bare |002> population.
    pub n_rabi: u32,
    pub total_t: f64,
    /// Peak |002> population during the pulse.
    pub peak_p002: f64,
}

fn count_cycles(series: &[f64]) -> (u32, f64) {
    let peak = series.iter().copied().fold(0.0, f64::max);
    if peak < 0.05 {
        return (0, peak);
    }
    let (hi, lo) = (0.5 * peak, 0.25 * peak);
    let mut armed = true;
    let mut n = 0;
    for &p in series {
        if armed && p > hi {
            n += 1;
            armed = false;
        } else if !armed && p < lo {
            armed = true;
        }
    }
    (n, peak)
}

/// Propagate the dressed computational states through the pulse.
pub fn simulate_process(
    circuit: &CircuitParams,
    pulse: &FlattopGaussian,
    settings: &PropagationSettings,
) -> Result<RawProcess> {
    if circuit.levels < 4 {
        return Err(Error::InvalidParameter("gate dynamics need at least 4 levels per transmon".into()));
    }
    let split = SplitHamiltonian::new(circuit)?;
    let basis = identify_in(&split, &block_eigen(&split, circuit.coupler.omega))?;
    let bare_002 = split.location[state_index(circuit.levels, 0, 0, 2)];
    // even block carries 00 and 11, odd block 01 and 10
    let groups = [[Label::L00, Label::L11], [Label::L01, Label::L10]];
    let mut finals: Vec<BlockState> = Vec::with_capacity(2);
    let mut series = Vec::new();
    for (b, labels) in groups.iter().enumerate() {
        let dim = split.blocks[b].dim();
        let mut s = BlockState { re: DMatrix::zeros(dim, 2), im: DMatrix::zeros(dim, 2) };
        for (j, l) in labels.iter().enumerate() {
            let st = basis.get(*l);
            debug_assert_eq!(st.block, b);
            s.re.set_column(j, &st.block_vector);
        }
        propagate_block(&split.blocks[b], circuit.coupler.omega, pulse, settings, &mut s, |_, _, st| {
            if b == bare_002.0 {
                let r = bare_002.1;
                series.push(st.re[(r, 1)].powi(2) + st.im[(r, 1)].powi(2));
            }
        })?;
        finals.push(s);
    }
    let order = [Label::L00, Label::L01, Label::L10, Label::L11];
    let slot = |l: Label| -> (usize, usize) {
        match l {
            Label::L00 => (0, 0),
            Label::L11 => (0, 1),
            Label::L01 => (1, 0),
            _ => (1, 1),
        }
    };
    let overlap = |bra: &DVector<f64>, s: &BlockState, col: usize| {
        Complex64::new(bra.dot(&s.re.column(col)), bra.dot(&s.im.column(col)))
    };
    let mut matrix = Matrix4::<Complex64>::zeros();
    for (j, lj) in order.iter().enumerate() {
        let (bj, cj) = slot(*lj);
        for (i, li) in order.iter().enumerate() {
            let bra = basis.get(*li);
            if bra.block == bj {
                matrix[(i, j)] = overlap(&bra.block_vector, &finals[bj], cj);
            }
        }
    }
    let v02 = basis.get(Label::L02);
    let p02 = overlap(&v02.block_vector, &finals[0], 1).norm_sqr();
    let (n_rabi, peak_p002) = count_cycles(&series);
    Ok(RawProcess { matrix, p02, n_rabi, total_t: pulse.total_t, peak_p002 })
}

/// Conditional phase arg U11 - arg U01 - arg U10 + arg U00 of a block.
pub fn simulated_conditional_phase(m: &Matrix4<Complex64>) -> f64 {
    wrap_phase(m[(3, 3)].arg() - m[(1, 1)].arg() - m[(2, 2)].arg() + m[(0, 0)].arg())
}

/// Conditional phase in the convention of the closed-form model: the negative of the simulated one.
pub fn gate_phase(m: &Matrix4<Complex64>) -> f64 {
    wrap_phase(-simulated_conditional_phase(m))
}

/// Single-qubit phases (theta_00, theta_01, theta_10, theta_01 + theta_10 - theta_00) to strip.
pub fn virtual_z_phases(diagonal: [Complex64; 4]) -> [f64; 4] {
    let t: Vec<f64> = diagonal.iter().map(|z| z.arg()).collect();
    [t[0], t[1], t[2], t[1] + t[2] - t[0]]
}

pub fn apply_virtual_z(m: &Matrix4<Complex64>, phases: &[f64; 4]) -> Matrix4<Complex64> {
    let mut out = *m;
    for (r, th) in phases.iter().enumerate() {
        let z = Complex64::from_polar(1.0, -th);
        for c in 0..4 {
            out[(r, c)] *= z;
        }
    }
    out
}

fn diagonal(m: &Matrix4<Complex64>) -> [Complex64; 4] {
    [m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(3, 3)]]
}

/// Target block for a gate phase phi0 in the simulation frame.
pub fn cphase_target(phi0: f64) -> Matrix4<Complex64> {
    let mut u = Matrix4::<Complex64>::identity();
    u[(3, 3)] = Complex64::from_polar(1.0, -phi0);
    u
}

/// Processed gate for one parity configuration.
#[derive(Debug, Clone)]
pub struct GateProcess {
    pub parities: [Parity; 3],
    /// Block after removing its own single-qubit phases.
    pub block: Matrix4<Complex64>,
    pub raw: Matrix4<Complex64>,
    /// L = 1 - tr(M M^dag)/4.
    pub leakage: f64,
    pub phi: f64,
    pub p11: f64,
    pub n_rabi: u32,
    pub total_t: f64,
}

impl GateProcess {
    fn from_raw(parities: [Parity; 3], raw: RawProcess) -> Self {
        let block = apply_virtual_z(&raw.matrix, &virtual_z_phases(diagonal(&raw.matrix)));
        let leakage = 1.0 - (raw.matrix * raw.matrix.adjoint()).trace().re / 4.0;
        Self {
            parities,
            block,
            phi: gate_phase(&raw.matrix),
            p11: 1.0 - raw.p02,
            leakage,
            n_rabi: raw.n_rabi,
            total_t: raw.total_t,
            raw: raw.matrix,
        }
    }
}

fn check_physical(m: &Matrix4<Complex64>) -> Result<()> {
    let s = m.svd(false, false).singular_values.max();
    if s > 1.0 + 1e-6 {
        return Err(Error::NonPhysical(format!("singular value {s} exceeds 1")));
    }
    Ok(())
}

/// Average gate fidelity of a weighted operator set against a target unitary.
///
/// F = (sum_i w_i |tr(U^dag M_i)|^2 / d + 1 - L) / (d + 1) with L = 1 - sum_i w_i tr(M_i M_i^dag) / d.
pub fn kraus_fidelity(blocks: &[Matrix4<Complex64>], weights: &[f64], target: &Matrix4<Complex64>) -> Result<f64> {
    if blocks.is_empty() || blocks.len() != weights.len() {
        return Err(Error::InvalidParameter("operator and weight counts differ".into()));
    }
    let d = 4.0;
    let mut overlap = 0.0;
    let mut kept = 0.0;
    for (m, w) in blocks.iter().zip(weights) {
        check_physical(m)?;
        overlap += w * (target.adjoint() * m).trace().norm_sqr();
        kept += w * (m * m.adjoint()).trace().re;
    }
    let leakage = 1.0 - kept / d;
    Ok((overlap / d + 1.0 - leakage) / (d + 1.0))
}

/// Fidelity of one processed gate against CPHASE(target_phase).
pub fn average_gate_fidelity(process: &GateProcess, target_phase: f64) -> Result<f64> {
    kraus_fidelity(&[process.block], &[1.0], &cphase_target(target_phase))
}

/// Exact Rabi frequency of the |11>-|02> block at the pulse plateau (rad/s).
pub fn plateau_rabi(circuit: &CircuitParams, pulse: &FlattopGaussian) -> Result<f64> {
    let split = SplitHamiltonian::new(circuit)?;
    let wc = pulse.coupler_frequency(circuit.coupler.omega, pulse.total_t / 2.0);
    let [(_, ea), (_, eb)] = plateau_pair(&split, circuit.levels, wc);
    Ok((ea - eb).abs())
}

/// Gate outcome of the nominal circuit: phase from the equal superposition run,
/// residual |02> population, and t_g = 2 pi n / Omega from the counted cycles.
pub fn extract_gate(circuit: &CircuitParams, pulse: &FlattopGaussian) -> Result<GateOutcome> {
    extract_gate_with(circuit, pulse, &PropagationSettings::default())
}

pub fn extract_gate_with(
    circuit: &CircuitParams,
    pulse: &FlattopGaussian,
    settings: &PropagationSettings,
) -> Result<GateOutcome> {
    let raw = simulate_process(circuit, pulse, settings)?;
    let psi = raw.matrix * nalgebra::Vector4::from_element(Complex64::new(0.5, 0.0));
    let phase = wrap_phase(-(psi[3].arg() - psi[1].arg() - psi[2].arg() + psi[0].arg()));
    let t_g = if raw.n_rabi == 0 {
        pulse.total_t
    } else {
        TWO_PI * raw.n_rabi as f64 / plateau_rabi(circuit, pulse)?
    };
    Ok(GateOutcome { phi: phase, p11: (1.0 - raw.p02).clamp(0.0, 1.0), t_g, n_rabi: raw.n_rabi })
}

/// Process of one parity configuration: anharmonicities shifted by P eps2 / 2.
pub fn reconstruct_process(
    circuit: &CircuitParams,
    pulse: &FlattopGaussian,
    parities: [Parity; 3],
    dispersions: &[Dispersion; 3],
    settings: &PropagationSettings,
) -> Result<GateProcess> {
    let shifts: [ModeShift; 3] = std::array::from_fn(|i| dispersions[i].shift(parities[i], false));
    let (shifted, _) = circuit.shifted(&shifts);
    Ok(GateProcess::from_raw(parities, simulate_process(&shifted, pulse, settings)?))
}

/// Charge dispersions of q1, coupler (at its idle frequency) and q2.
pub fn gate_dispersions(circuit: &CircuitParams) -> Result<[Dispersion; 3]> {
    Ok([
        Dispersion::for_mode(circuit.q1.omega, -rad_to_ghz(circuit.q1.alpha))?,
        Dispersion::for_mode(circuit.coupler.omega, -rad_to_ghz(circuit.coupler.alpha))?,
        Dispersion::for_mode(circuit.q2.omega, -rad_to_ghz(circuit.q2.alpha))?,
    ])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParityRecord {
    pub parities: [Parity; 3],
    pub phi: f64,
    pub p11: f64,
    pub fidelity: f64,
    pub leakage: f64,
}

/// Two-operator channel for the q2 parity pair at fixed (P_q1, P_c).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRecord {
    pub parities_q1_c: [Parity; 2],
    pub fidelity: f64,
    /// phi(P_q2 = +1) - phi(P_q2 = -1).
    pub phase_diff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParityAnalysis {
    pub per_parity: Vec<ParityRecord>,
    pub pairs: Vec<PairRecord>,
    pub averaged_fidelity: f64,
    pub averaged_infidelity: f64,
    pub phase_diff: f64,
    pub t_g_eff: f64,
    pub n_rabi: u32,
    pub leakage: f64,
    pub total_t: f64,
    /// Shared single-qubit phases applied to all parity blocks.
    pub virtual_z: [f64; 4],
    #[serde(skip)]
    pub processes: Vec<GateProcess>,
}

fn circular_mean(values: impl Iterator<Item = Complex64>) -> Complex64 {
    values.fold(Complex64::new(0.0, 0.0), |a, b| a + b / b.norm().max(f64::MIN_POSITIVE))
}

/// All eight parity processes with a shared virtual-Z correction and the averaged fidelity.
pub fn parity_averaged_gate_analysis(
    circuit: &CircuitParams,
    pulse: &FlattopGaussian,
    dispersions: &[Dispersion; 3],
    target_phase: f64,
    settings: &PropagationSettings,
) -> Result<ParityAnalysis> {
    let states = parity_states();
    // parity shifts below one ulp leave the circuit bit-identical; simulate each distinct circuit once
    let shifted: Vec<CircuitParams> = states
        .iter()
        .map(|ps| {
            let shifts: [ModeShift; 3] = std::array::from_fn(|i| dispersions[i].shift(ps[i], false));
            circuit.shifted(&shifts).0
        })
        .collect();
    let key = |c: &CircuitParams| [c.q1.alpha.to_bits(), c.coupler.alpha.to_bits(), c.q2.alpha.to_bits()];
    let mut unique: Vec<usize> = Vec::new();
    let owner: Vec<usize> = shifted
        .iter()
        .map(|c| match unique.iter().position(|&u| key(&shifted[u]) == key(c)) {
            Some(k) => k,
            None => {
                unique.push(shifted.iter().position(|d| key(d) == key(c)).expect("present"));
                unique.len() - 1
            }
        })
        .collect();
    let raws = unique
        .par_iter()
        .map(|&u| simulate_process(&shifted[u], pulse, settings))
        .collect::<Result<Vec<_>>>()?;
    let processes: Vec<GateProcess> =
        states.iter().zip(&owner).map(|(ps, &k)| GateProcess::from_raw(*ps, raws[k].clone())).collect();
    let mean_diag: [Complex64; 4] =
        std::array::from_fn(|k| circular_mean(processes.iter().map(|p| p.raw[(k, k)])));
    let virtual_z = virtual_z_phases(mean_diag);
    let shared: Vec<Matrix4<Complex64>> = processes.iter().map(|p| apply_virtual_z(&p.raw, &virtual_z)).collect();
    let target = cphase_target(target_phase);
    let averaged_fidelity = kraus_fidelity(&shared, &[1.0 / 8.0; 8], &target)?;

    let per_parity = processes
        .iter()
        .map(|p| {
            Ok(ParityRecord {
                parities: p.parities,
                phi: p.phi,
                p11: p.p11,
                fidelity: average_gate_fidelity(p, target_phase)?,
                leakage: p.leakage,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pairs = Vec::new();
    for i in 0..8 {
        if states[i][2] != Parity::Even {
            continue;
        }
        let j = (0..8).find(|&j| states[j][..2] == states[i][..2] && states[j][2] == Parity::Odd).expect("pair");
        pairs.push(PairRecord {
            parities_q1_c: [states[i][0], states[i][1]],
            fidelity: kraus_fidelity(&[shared[i], shared[j]], &[0.5, 0.5], &target)?,
            phase_diff: wrap_phase(processes[i].phi - processes[j].phi),
        });
    }
    let phase_diff = pairs.iter().map(|p| p.phase_diff).sum::<f64>() / pairs.len() as f64;
    let n_rabi = processes[0].n_rabi;
    let t_g_eff = if n_rabi == 0 { pulse.total_t } else { TWO_PI * n_rabi as f64 / plateau_rabi(circuit, pulse)? };
    Ok(ParityAnalysis {
        leakage: processes.iter().map(|p| p.leakage).sum::<f64>() / 8.0,
        per_parity,
        pairs,
        averaged_fidelity,
        averaged_infidelity: 1.0 - averaged_fidelity,
        phase_diff,
        t_g_eff,
        n_rabi,
        total_t: pulse.total_t,
        virtual_z,
        processes,
    })
}

/// |F(dt) - F(dt/2)| of the nominal gate against CPHASE(target_phase).
pub fn step_convergence(
    circuit: &CircuitParams,
    pulse: &FlattopGaussian,
    target_phase: f64,
    settings: &PropagationSettings,
) -> Result<f64> {
    let fid = |s: &PropagationSettings| -> Result<f64> {
        let p = GateProcess::from_raw([Parity::Even; 3], simulate_process(circuit, pulse, s)?);
        average_gate_fidelity(&p, target_phase)
    };
    let half = PropagationSettings { dt: settings.dt / 2.0, ..*settings };
    Ok((fid(settings)? - fid(&half)?).abs())
}

/// Search window and tolerances for pulse calibration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub sigma: f64,
    /// Bounds on A/2pi in GHz.
    pub amplitude_ghz: (f64, f64),
    /// Bounds on tau_c in ns.
    pub tau_c_ns: (f64, f64),
    /// Local grid points along (A, tau_c) around the plateau seed.
    pub grid: (usize, usize),
    /// Half-width of the local amplitude grid, GHz.
    pub amplitude_span_ghz: f64,
    /// tau_c range of the local grid relative to one plateau Rabi period, ns.
    pub tau_c_offset_ns: (f64, f64),
    /// Step used for the coarse grid.
    pub coarse_dt: f64,
    pub settings: PropagationSettings,
    /// Standard-deviation tolerance of the simplex objective values.
    pub tolerance: f64,
    pub max_iters: u64,
    /// Largest accepted infidelity of the gate without parity shifts.
    pub max_infidelity: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            amplitude_ghz: (0.6, 1.4),
            tau_c_ns: (10.0, 120.0),
            grid: (7, 11),
            amplitude_span_ghz: 0.04,
            tau_c_offset_ns: (-10.0, 25.0),
            coarse_dt: 0.25 * NS,
            settings: PropagationSettings::default(),
            tolerance: 1e-7,
            max_iters: 300,
            max_infidelity: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Calibration {
    pub pulse: FlattopGaussian,
    pub infidelity: f64,
    pub nominal_infidelity: f64,
    pub evaluations: usize,
    pub analysis: ParityAnalysis,
}

/// Nominal (no parity shift) infidelity against CPHASE(target_phase).
pub fn nominal_infidelity(
    circuit: &CircuitParams,
    pulse: &FlattopGaussian,
    target_phase: f64,
    settings: &PropagationSettings,
) -> Result<f64> {
    let p = GateProcess::from_raw([Parity::Even; 3], simulate_process(circuit, pulse, settings)?);
    Ok(1.0 - average_gate_fidelity(&p, target_phase)?)
}

struct AveragedObjective<'a> {
    circuit: &'a CircuitParams,
    dispersions: &'a [Dispersion; 3],
    target_phase: f64,
    options: &'a CalibrationOptions,
    evaluations: std::cell::Cell<usize>,
}

impl AveragedObjective<'_> {
    fn pulse(&self, x: &[f64]) -> Result<FlattopGaussian> {
        FlattopGaussian::new(ghz_to_rad(x[0]), self.options.sigma, x[1] * NS)
    }

    fn outside(&self, x: &[f64]) -> f64 {
        let (a0, a1) = self.options.amplitude_ghz;
        let (t0, t1) = self.options.tau_c_ns;
        let d = |v: f64, lo: f64, hi: f64| (lo - v).max(0.0) + (v - hi).max(0.0);
        d(x[0], a0, a1) / (a1 - a0) + d(x[1], t0, t1) / (t1 - t0)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.evaluations.set(self.evaluations.get() + 1);
        let out = self.outside(x);
        if out > 0.0 {
            return Ok(1.0 + out);
        }
        let a = parity_averaged_gate_analysis(
            self.circuit,
            &self.pulse(x)?,
            self.dispersions,
            self.target_phase,
            &self.options.settings,
        );
        match a {
            Ok(a) => Ok(a.averaged_infidelity),
            Err(Error::AmbiguousBasis { .. }) => Ok(1.0),
            Err(e) => Err(e),
        }
    }
}

impl CostFunction for AveragedObjective<'_> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        // unlabelled or failed points score as a full error so the simplex steps away
        Ok(self.value(x).unwrap_or(1.0))
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Two plateau eigenstates carrying most of |101>: (weight, energy) pairs, heavier first.
fn plateau_pair(split: &SplitHamiltonian, levels: usize, omega_c: f64) -> [(f64, f64); 2] {
    let eig = SymmetricEigen::new(split.blocks[0].assemble(omega_c));
    let (_, r) = split.location[state_index(levels, 1, 0, 1)];
    let mut w: Vec<(f64, f64)> =
        (0..eig.eigenvalues.len()).map(|k| (eig.eigenvectors[(r, k)].powi(2), eig.eigenvalues[k])).collect();
    w.sort_by(|x, y| y.0.total_cmp(&x.0));
    [w[0], w[1]]
}

/// Amplitude (GHz) whose plateau gives the target phase after one cycle, and that cycle's period (ns).
fn plateau_seed(circuit: &CircuitParams, target_phase: f64, options: &CalibrationOptions) -> Result<(f64, f64)> {
    let split = SplitHamiltonian::new(circuit)?;
    let peak = FlattopGaussian::new(1.0, options.sigma, 60.0 * NS)?.peak();
    let (a0, a1) = options.amplitude_ghz;
    let n = ((a1 - a0) / 0.002).ceil() as usize + 1;
    let mut best: Option<(f64, f64, f64)> = None;
    for a in linspace(a0, a1, n) {
        let wc = circuit.coupler.omega - ghz_to_rad(a) * peak;
        if wc <= 0.0 {
            continue;
        }
        let [(wa, ea), (wb, eb)] = plateau_pair(&split, circuit.levels, wc);
        if wa + wb < 0.9 {
            continue;
        }
        let rabi = (ea - eb).abs();
        // two-level picture: |11>-heavier state above |02>-heavier one means positive detuning
        let x = if ea >= eb { 2.0 * wa - 1.0 } else { 1.0 - 2.0 * wa };
        let sign = if x < 0.0 { -1.0 } else { 1.0 };
        let predicted = wrap_phase(-std::f64::consts::PI * x + sign * std::f64::consts::PI);
        let score = wrap_phase(predicted - target_phase).abs();
        if best.map_or(true, |b| score < b.0) {
            best = Some((score, a, TWO_PI / rabi / NS));
        }
    }
    best.map(|b| (b.1, b.2))
        .ok_or_else(|| Error::Calibration {
            message: "no plateau in the amplitude window reaches the |11>-|02> resonance".into(),
            best_amplitude_ghz: f64::NAN,
            best_tau_c_ns: f64::NAN,
            best_infidelity: 1.0,
        })
}

/// Optimise (A, tau_c) for CPHASE(target_phase).
///
/// A plateau resonance scan and a local grid of the nominal infidelity seed a
/// simplex search on the parity-averaged infidelity. The coupler idles at circuit.coupler.omega.
pub fn calibrate_pulse(
    circuit: &CircuitParams,
    target_phase: f64,
    dispersions: &[Dispersion; 3],
    options: &CalibrationOptions,
) -> Result<Calibration> {
    let (a0, a1) = options.amplitude_ghz;
    let (t0, t1) = options.tau_c_ns;
    if !(a1 > a0 && t1 > t0 && t0 >= 0.0) {
        return Err(Error::InvalidParameter("empty calibration window".into()));
    }
    if circuit.levels < 4 {
        return Err(Error::InvalidParameter("gate dynamics need at least 4 levels per transmon".into()));
    }
    let coarse = PropagationSettings { dt: options.coarse_dt, ..options.settings };
    let (seed_a, period_ns) = plateau_seed(circuit, target_phase, options)?;
    let clip = |lo: f64, hi: f64, min: f64, max: f64| (lo.max(min).min(max), hi.max(min).min(max));
    let (ga0, ga1) = clip(seed_a - options.amplitude_span_ghz, seed_a + options.amplitude_span_ghz, a0, a1);
    let (gt0, gt1) = clip(period_ns + options.tau_c_offset_ns.0, period_ns + options.tau_c_offset_ns.1, t0, t1);
    let grid: Vec<(f64, f64)> = linspace(ga0, ga1, options.grid.0)
        .into_iter()
        .flat_map(|a| linspace(gt0, gt1, options.grid.1).into_iter().map(move |t| (a, t)))
        .collect();
    let scores: Vec<f64> = grid
        .par_iter()
        .map(|&(a, t)| {
            FlattopGaussian::new(ghz_to_rad(a), options.sigma, t * NS)
                .and_then(|p| nominal_infidelity(circuit, &p, target_phase, &coarse))
                .unwrap_or(1.0)
        })
        .collect();
    let best = (0..grid.len()).min_by(|&i, &j| scores[i].total_cmp(&scores[j])).expect("non-empty grid");
    let (sa, st) = grid[best];

    let objective = AveragedObjective {
        circuit,
        dispersions,
        target_phase,
        options,
        evaluations: std::cell::Cell::new(0),
    };
    let da = ((ga1 - ga0) / options.grid.0.max(2) as f64 / 2.0).max(1e-4);
    let dtc = ((gt1 - gt0) / options.grid.1.max(2) as f64 / 2.0).max(1e-2);
    let simplex = vec![vec![sa, st], vec![sa + da, st], vec![sa, st + dtc]];
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(options.tolerance)
        .map_err(|e| Error::Internal(e.to_string()))?;
    let run = Executor::new(objective, solver)
        .configure(|s| s.max_iters(options.max_iters))
        .run()
        .map_err(|e| Error::Convergence(e.to_string()))?;
    let x = run.state.best_param.clone().ok_or_else(|| Error::Convergence("no simplex point".into()))?;
    let objective = run.problem.problem.as_ref().expect("problem kept");
    let pulse = objective.pulse(&x)?;
    let evaluations = objective.evaluations.get() + grid.len();
    let analysis = parity_averaged_gate_analysis(circuit, &pulse, dispersions, target_phase, &options.settings);
    let analysis = match analysis {
        Ok(a) => a,
        Err(Error::AmbiguousBasis { .. }) => {
            return Err(Error::Calibration {
                message: "calibrated pulse leaves the labelled basis".into(),
                best_amplitude_ghz: x[0],
                best_tau_c_ns: x[1],
                best_infidelity: 1.0,
            })
        }
        Err(e) => return Err(e),
    };
    let nominal = nominal_infidelity(circuit, &pulse, target_phase, &options.settings)?;
    let outside = objective.outside(&x) > 0.0;
    if !(nominal <= options.max_infidelity) || outside {
        let reason = if outside { "optimum outside the search window".to_string() } else {
            format!("nominal infidelity {nominal:.3e} above {:.1e}", options.max_infidelity)
        };
        return Err(Error::Calibration {
            message: reason,
            best_amplitude_ghz: x[0],
            best_tau_c_ns: x[1],
            best_infidelity: analysis.averaged_infidelity,
        });
    }
    Ok(Calibration {
        pulse,
        infidelity: analysis.averaged_infidelity,
        nominal_infidelity: nominal,
        evaluations,
        analysis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::ghz_to_rad;
    use std::f64::consts::PI;

    fn idle_circuit() -> CircuitParams {
        let mut c = CircuitParams::table1(-270.0);
        c.coupler.omega = ghz_to_rad(6.05);
        c
    }

    #[test]
    fn zero_pulse_keeps_eigenstates() {
        let c = idle_circuit();
        let pulse = FlattopGaussian::idle(30.0 * NS).unwrap();
        let raw = simulate_process(&c, &pulse, &PropagationSettings::default()).unwrap();
        let basis = crate::circuit::dressed_basis(&c, c.coupler.omega).unwrap();
        for (k, l) in [Label::L00, Label::L01, Label::L10, Label::L11].iter().enumerate() {
            let z = raw.matrix[(k, k)];
            assert!((z.norm() - 1.0).abs() < 1e-6);
            let expect = wrap_phase(-basis.energy(*l) * pulse.total_t);
            assert!(wrap_phase(z.arg() - expect).abs() < 1e-6, "{l:?}");
        }
        let p = GateProcess::from_raw([Parity::Even; 3], raw);
        assert!(p.leakage < 1e-8);
        assert_eq!(p.n_rabi, 0);
    }

    #[test]
    fn propagate_keeps_norm() {
        let c = idle_circuit();
        let pulse = FlattopGaussian::with_default_sigma(ghz_to_rad(1.0), 40.0 * NS).unwrap();
        let dim = c.dimension();
        let mut psi = DVector::<Complex64>::zeros(dim);
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            psi[state_index(c.levels, i, 0, j)] = Complex64::new(0.5, 0.0);
        }
        let traj = propagate(&c, &pulse, &psi, 11).unwrap();
        assert_eq!(traj.states.len(), 11);
        assert_eq!(traj.times[0], 0.0);
        assert!((traj.times[10] - pulse.total_t).abs() < 1e-18);
        for s in &traj.states {
            assert!((s.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fidelity_of_exact_target_is_one() {
        let u = cphase_target(PI);
        let f = kraus_fidelity(&[u], &[1.0], &cphase_target(PI)).unwrap();
        assert!((f - 1.0).abs() < 1e-15);
        let mut bad = u;
        bad[(0, 0)] = Complex64::new(1.1, 0.0);
        assert!(matches!(kraus_fidelity(&[bad], &[1.0], &u), Err(Error::NonPhysical(_))));
    }

    #[test]
    fn split_phase_error_matches_quadratic_form() {
        for dphi in [0.01, 0.05, 0.1] {
            let plus = cphase_target(PI + dphi / 2.0);
            let minus = cphase_target(PI - dphi / 2.0);
            let f = kraus_fidelity(&[plus, minus], &[0.5, 0.5], &cphase_target(PI)).unwrap();
            let approx = 1.0 - 3.0 / 80.0 * dphi * dphi;
            assert!((f - approx).abs() < 1e-3 * dphi * dphi, "{f} vs {approx}");
        }
    }

    #[test]
    fn virtual_z_strips_local_phases() {
        let mut m = Matrix4::<Complex64>::identity();
        let th = [0.3, -1.2, 2.0];
        m[(0, 0)] = Complex64::from_polar(1.0, th[0]);
        m[(1, 1)] = Complex64::from_polar(1.0, th[1]);
        m[(2, 2)] = Complex64::from_polar(1.0, th[2]);
        m[(3, 3)] = Complex64::from_polar(1.0, th[1] + th[2] - th[0] + 0.7);
        let out = apply_virtual_z(&m, &virtual_z_phases(diagonal(&m)));
        for k in 0..3 {
            assert!((out[(k, k)] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        assert!((out[(3, 3)].arg() - 0.7).abs() < 1e-12);
        assert!((simulated_conditional_phase(&m) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn cycle_counter() {
        let series: Vec<f64> = (0..400).map(|k| (k as f64 * 0.05).sin().powi(2)).collect();
        assert_eq!(count_cycles(&series).0, 7);
        assert_eq!(count_cycles(&[0.0, 0.01, 0.0]).0, 0);
    }
}
