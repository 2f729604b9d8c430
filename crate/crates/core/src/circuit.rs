//! Two transmons coupled through a tunable transmon coupler: Hamiltonian,
//! dressed computational basis, ZZ analysis and idling points.

use argmin::core::{CostFunction, Executor};
use argmin::solver::brent::BrentRoot;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effective::swt_parameters;
use crate::error::{Error, Result};
use crate::spectral::{charge_dispersion_asymptotic, josephson_for_frequency, Parity};
use crate::units::{ghz_to_rad, mhz_to_rad, rad_to_ghz, TWO_PI};

/// Largest Hilbert-space dimension accepted by the dense solvers.
pub const MAX_DIMENSION: usize = 4096;
/// A dressed state must carry at least this much weight on its bare label.
pub const MIN_LABEL_POPULATION: f64 = 0.55;
/// Levels per transmon for static ZZ and idling analyses.
pub const ZZ_LEVELS: usize = 5;

/// Duffing mode of one transmon, angular frequencies in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub omega: f64,
    pub alpha: f64,
}

impl Mode {
    pub fn from_ghz(omega_ghz: f64, alpha_ghz: f64) -> Self {
        Self { omega: ghz_to_rad(omega_ghz), alpha: ghz_to_rad(alpha_ghz) }
    }
}

/// Dimensionless coupling prefactors, g_ij = beta_ij sqrt(omega_i omega_j).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Betas {
    pub q1c: f64,
    pub q2c: f64,
    pub q1q2: f64,
}

impl Default for Betas {
    fn default() -> Self {
        Self { q1c: 0.015, q2c: 0.015, q1q2: 0.001 }
    }
}

/// Parameters of the three-transmon circuit.
///
/// `coupler.omega` is only a nominal value; every analysis takes the coupler
/// frequency explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub q1: Mode,
    pub q2: Mode,
    pub coupler: Mode,
    pub beta: Betas,
    pub levels: usize,
}

/// Which transmon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Site {
    Q1,
    Coupler,
    Q2,
}

impl Site {
    pub const ALL: [Site; 3] = [Site::Q1, Site::Coupler, Site::Q2];
}

/// Additive parity shifts of one mode (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeShift {
    pub d_omega: f64,
    pub d_alpha: f64,
}

/// Charge dispersions of the first two excited levels, GHz.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Dispersion {
    pub eps1: f64,
    pub eps2: f64,
}

impl Dispersion {
    /// Asymptotic dispersions of a transmon with frequency `omega` (rad/s) and charging energy `e_c` (GHz).
    pub fn for_mode(omega: f64, e_c: f64) -> Result<Self> {
        let e_j = josephson_for_frequency(rad_to_ghz(omega), e_c);
        Ok(Self {
            eps1: charge_dispersion_asymptotic(e_j, e_c, 1)?,
            eps2: charge_dispersion_asymptotic(e_j, e_c, 2)?,
        })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Mode shift for one parity with n_g = 0: delta = P eps / 2.
    pub fn shift(&self, parity: Parity, include_eps1: bool) -> ModeShift {
        let p = parity.sign();
        ModeShift {
            d_omega: if include_eps1 { p * ghz_to_rad(self.eps1) / 2.0 } else { 0.0 },
            d_alpha: p * ghz_to_rad(self.eps2) / 2.0,
        }
    }
}

/// The eight parity configurations (q1, coupler, q2).
pub fn parity_states() -> Vec<[Parity; 3]> {
    let mut out = Vec::with_capacity(8);
    for p1 in Parity::BOTH {
        for pc in Parity::BOTH {
            for p2 in Parity::BOTH {
                out.push([p1, pc, p2]);
            }
        }
    }
    out
}

impl CircuitParams {
    /// Simulation parameters with omega_q2/2pi = 4.8 GHz and the given alpha_q2 (MHz, negative).
    ///
    /// omega_q1 = omega_q2 + alpha_q2 + 10 MHz, alpha_q1 = alpha_q2 + 10 MHz, alpha_c = -110 MHz.
    pub fn table1(alpha_q2_mhz: f64) -> Self {
        Self::table1_at(4.8, alpha_q2_mhz)
    }

    pub fn table1_at(omega_q2_ghz: f64, alpha_q2_mhz: f64) -> Self {
        let a2 = alpha_q2_mhz / 1e3;
        Self {
            q1: Mode::from_ghz(omega_q2_ghz + a2 + 0.010, a2 + 0.010),
            q2: Mode::from_ghz(omega_q2_ghz, a2),
            coupler: Mode::from_ghz(6.0, -0.110),
            beta: Betas::default(),
            levels: 4,
        }
    }

    /// Table-1 circuit whose second qubit has the asymptotic ratio E_J/E_C = r.
    pub fn for_ratio(r: f64, omega_q2_ghz: f64) -> Self {
        let e_c = omega_q2_ghz / ((8.0 * r).sqrt() - 1.0);
        Self::table1_at(omega_q2_ghz, -e_c * 1e3)
    }

    pub fn with_levels(mut self, levels: usize) -> Self {
        self.levels = levels;
        self
    }

    /// Sets omega_q1 = omega_q2 + detuning (rad/s).
    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.q1.omega = self.q2.omega + detuning;
        self
    }

    /// Copy with the coupler parked at its lowest idling frequency, searched at
    /// `ZZ_LEVELS` levels per transmon.
    pub fn at_idle(mut self) -> Result<Self> {
        let idle = find_idling_frequency(&self.with_levels(self.levels.max(ZZ_LEVELS)))?;
        self.coupler.omega = idle.frequencies[0];
        Ok(self)
    }

    pub fn mode(&self, site: Site) -> Mode {
        match site {
            Site::Q1 => self.q1,
            Site::Coupler => self.coupler,
            Site::Q2 => self.q2,
        }
    }

    pub fn mode_mut(&mut self, site: Site) -> &mut Mode {
        match site {
            Site::Q1 => &mut self.q1,
            Site::Coupler => &mut self.coupler,
            Site::Q2 => &mut self.q2,
        }
    }

    /// Charging energy E_C = -alpha (GHz) of a site.
    pub fn charging_energy(&self, site: Site) -> f64 {
        -rad_to_ghz(self.mode(site).alpha)
    }

    /// Copy with anharmonicity shifts applied; frequency shifts of q1 and q2 applied,
    /// the coupler frequency shift is returned for the caller to add to omega_c.
    pub fn shifted(&self, shifts: &[ModeShift; 3]) -> (Self, f64) {
        let mut c = *self;
        c.q1.omega += shifts[0].d_omega;
        c.q1.alpha += shifts[0].d_alpha;
        c.coupler.alpha += shifts[1].d_alpha;
        c.q2.omega += shifts[2].d_omega;
        c.q2.alpha += shifts[2].d_alpha;
        (c, shifts[1].d_omega)
    }

    /// (g_q1c, g_q2c, g_q1q2) in rad/s at coupler frequency omega_c.
    pub fn couplings(&self, omega_c: f64) -> (f64, f64, f64) {
        (
            self.beta.q1c * (self.q1.omega * omega_c).sqrt(),
            self.beta.q2c * (self.q2.omega * omega_c).sqrt(),
            self.beta.q1q2 * (self.q1.omega * self.q2.omega).sqrt(),
        )
    }

    pub fn dimension(&self) -> usize {
        self.levels.pow(3)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 3 {
            return Err(Error::InvalidParameter(format!("levels_per_transmon = {} < 3", self.levels)));
        }
        if self.dimension() > MAX_DIMENSION {
            return Err(Error::InvalidParameter(format!(
                "Hilbert-space dimension {} exceeds {MAX_DIMENSION}",
                self.dimension()
            )));
        }
        for site in Site::ALL {
            let m = self.mode(site);
            if !(m.omega > 0.0 && m.omega.is_finite() && m.alpha.is_finite()) {
                return Err(Error::InvalidParameter(format!("invalid mode for {site:?}")));
            }
        }
        let b = self.beta;
        if !(b.q1c >= 0.0 && b.q2c >= 0.0 && b.q1q2 >= 0.0) {
            return Err(Error::InvalidParameter("couplings must be non-negative".into()));
        }
        Ok(())
    }

    /// Departures from 0 < beta_q1q2 << beta_ic < 0.1.
    pub fn coupling_warnings(&self) -> Vec<String> {
        let b = self.beta;
        let mut w = Vec::new();
        if b.q1c >= 0.1 || b.q2c >= 0.1 {
            w.push(format!("qubit-coupler beta >= 0.1 ({}, {})", b.q1c, b.q2c));
        }
        if b.q1q2 >= b.q1c.min(b.q2c) {
            w.push("direct coupling not small compared with coupler couplings".into());
        }
        w
    }
}

/// Basis-state index of |q1, c, q2>.
pub fn state_index(levels: usize, q1: usize, c: usize, q2: usize) -> usize {
    (q1 * levels + c) * levels + q2
}

fn occupations(levels: usize, idx: usize) -> [usize; 3] {
    [idx / (levels * levels), (idx / levels) % levels, idx % levels]
}

/// Hamiltonian terms restricted to one excitation-parity block.
///
/// H(omega_c) = fixed + omega_c N_c - g_q1c(omega_c) X_1 X_c - g_q2c(omega_c) X_2 X_c.
#[derive(Debug, Clone)]
pub struct BlockTerms {
    pub indices: Vec<usize>,
    fixed: DMatrix<f64>,
    coupler_number: DVector<f64>,
    x_q1c: DMatrix<f64>,
    x_q2c: DMatrix<f64>,
    beta_q1c_sqrt_w: f64,
    beta_q2c_sqrt_w: f64,
}

fn ladder(n: usize, m: usize) -> f64 {
    // <m| (a^dag - a) |n>
    if m == n + 1 {
        (m as f64).sqrt()
    } else if n == m + 1 {
        -(n as f64).sqrt()
    } else {
        0.0
    }
}

fn pair_element(levels: usize, a: usize, b: usize, i: usize, j: usize) -> f64 {
    // <a| X_i X_j |b> for i != j
    let oa = occupations(levels, a);
    let ob = occupations(levels, b);
    for k in 0..3 {
        if k != i && k != j && oa[k] != ob[k] {
            return 0.0;
        }
    }
    ladder(ob[i], oa[i]) * ladder(ob[j], oa[j])
}

impl BlockTerms {
    pub fn new(circuit: &CircuitParams, indices: Vec<usize>) -> Self {
        let n = circuit.levels;
        let dim = indices.len();
        let (_, _, g12) = circuit.couplings(1.0);
        let mut fixed = DMatrix::<f64>::zeros(dim, dim);
        let mut coupler_number = DVector::<f64>::zeros(dim);
        let mut x_q1c = DMatrix::<f64>::zeros(dim, dim);
        let mut x_q2c = DMatrix::<f64>::zeros(dim, dim);
        for (r, &a) in indices.iter().enumerate() {
            let [n1, nc, n2] = occupations(n, a);
            let kerr = |k: usize| (k * k.saturating_sub(1)) as f64;
            fixed[(r, r)] = circuit.q1.omega * n1 as f64
                + circuit.q2.omega * n2 as f64
                + circuit.q1.alpha / 2.0 * kerr(n1)
                + circuit.coupler.alpha / 2.0 * kerr(nc)
                + circuit.q2.alpha / 2.0 * kerr(n2);
            coupler_number[r] = nc as f64;
            for (s, &b) in indices.iter().enumerate() {
                fixed[(r, s)] -= g12 * pair_element(n, a, b, 0, 2);
                x_q1c[(r, s)] = pair_element(n, a, b, 0, 1);
                x_q2c[(r, s)] = pair_element(n, a, b, 2, 1);
            }
        }
        Self {
            indices,
            fixed,
            coupler_number,
            x_q1c,
            x_q2c,
            beta_q1c_sqrt_w: circuit.beta.q1c * circuit.q1.omega.sqrt(),
            beta_q2c_sqrt_w: circuit.beta.q2c * circuit.q2.omega.sqrt(),
        }
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Block matrix at coupler frequency omega_c (rad/s).
    pub fn assemble(&self, omega_c: f64) -> DMatrix<f64> {
        let mut h = self.fixed.clone();
        self.assemble_into(omega_c, &mut h);
        h
    }

    pub fn assemble_into(&self, omega_c: f64, h: &mut DMatrix<f64>) {
        let sw = omega_c.sqrt();
        h.copy_from(&self.fixed);
        for r in 0..self.dim() {
            h[(r, r)] += omega_c * self.coupler_number[r];
        }
        *h -= &self.x_q1c * (self.beta_q1c_sqrt_w * sw);
        *h -= &self.x_q2c * (self.beta_q2c_sqrt_w * sw);
    }
}

/// Hamiltonian terms split by conserved total-excitation parity.
#[derive(Debug, Clone)]
pub struct SplitHamiltonian {
    pub levels: usize,
    pub blocks: [BlockTerms; 2],
    /// Full index -> (block, position in block).
    pub location: Vec<(usize, usize)>,
}

impl SplitHamiltonian {
    pub fn new(circuit: &CircuitParams) -> Result<Self> {
        circuit.validate()?;
        let n = circuit.levels;
        let dim = circuit.dimension();
        let mut sets = [Vec::new(), Vec::new()];
        let mut location = vec![(0, 0); dim];
        for idx in 0..dim {
            let o = occupations(n, idx);
            let b = (o[0] + o[1] + o[2]) % 2;
            location[idx] = (b, sets[b].len());
            sets[b].push(idx);
        }
        let [even, odd] = sets;
        Ok(Self {
            levels: n,
            blocks: [BlockTerms::new(circuit, even), BlockTerms::new(circuit, odd)],
            location,
        })
    }

    pub fn dimension(&self) -> usize {
        self.location.len()
    }
}

/// Full Hamiltonian matrix (rad/s) over the product Fock basis.
#[derive(Debug, Clone)]
pub struct CircuitHamiltonian {
    pub matrix: DMatrix<f64>,
    pub levels: usize,
    pub omega_c: f64,
    split: SplitHamiltonian,
}

impl CircuitHamiltonian {
    pub fn split(&self) -> &SplitHamiltonian {
        &self.split
    }
}

/// Assemble H of the three-transmon circuit at coupler frequency omega_c.
pub fn build_hamiltonian(circuit: &CircuitParams, omega_c: f64) -> Result<CircuitHamiltonian> {
    if !(omega_c > 0.0 && omega_c.is_finite()) {
        return Err(Error::InvalidParameter(format!("coupler frequency {omega_c} rad/s")));
    }
    let split = SplitHamiltonian::new(circuit)?;
    let dim = split.dimension();
    let mut matrix = DMatrix::<f64>::zeros(dim, dim);
    for block in &split.blocks {
        let h = block.assemble(omega_c);
        for (r, &a) in block.indices.iter().enumerate() {
            for (s, &b) in block.indices.iter().enumerate() {
                matrix[(a, b)] = h[(r, s)];
            }
        }
    }
    let asym = (&matrix - matrix.transpose()).amax();
    if asym > 1e-12 * matrix.amax().max(1.0) {
        return Err(Error::Internal(format!("Hamiltonian not symmetric ({asym})")));
    }
    Ok(CircuitHamiltonian { matrix, levels: circuit.levels, omega_c, split })
}

/// Computational labels |q1 q2> with the coupler in its ground state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "00")]
    L00,
    #[serde(rename = "01")]
    L01,
    #[serde(rename = "10")]
    L10,
    #[serde(rename = "11")]
    L11,
    #[serde(rename = "02")]
    L02,
}

impl Label {
    pub const ALL: [Label; 5] = [Label::L00, Label::L01, Label::L10, Label::L11, Label::L02];
    pub const COMPUTATIONAL: [Label; 4] = [Label::L00, Label::L01, Label::L10, Label::L11];

    pub fn occupations(self) -> (usize, usize) {
        match self {
            Label::L00 => (0, 0),
            Label::L01 => (0, 1),
            Label::L10 => (1, 0),
            Label::L11 => (1, 1),
            Label::L02 => (0, 2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::L00 => "00",
            Label::L01 => "01",
            Label::L10 => "10",
            Label::L11 => "11",
            Label::L02 => "02",
        }
    }

    pub fn bare_index(self, levels: usize) -> usize {
        let (a, b) = self.occupations();
        state_index(levels, a, 0, b)
    }
}

/// Dressed eigenstate assigned to a label.
#[derive(Debug, Clone)]
pub struct DressedState {
    pub label: Label,
    /// Eigenfrequency in rad/s.
    pub energy: f64,
    /// |<psi|i 0 j>|^2.
    pub population: f64,
    pub block: usize,
    /// Eigenvector in block coordinates, sign fixed so the bare component is positive.
    pub block_vector: DVector<f64>,
}

/// Dressed computational states {00, 01, 10, 11} plus 02.
#[derive(Debug, Clone)]
pub struct ComputationalBasis {
    pub states: Vec<DressedState>,
}

impl ComputationalBasis {
    pub fn get(&self, label: Label) -> &DressedState {
        self.states.iter().find(|s| s.label == label).expect("all labels present")
    }

    pub fn energy(&self, label: Label) -> f64 {
        self.get(label).energy
    }

    /// zeta = omega_11 - omega_01 - omega_10 + omega_00.
    pub fn zz(&self) -> f64 {
        self.energy(Label::L11) - self.energy(Label::L01) - self.energy(Label::L10) + self.energy(Label::L00)
    }
}

/// Eigen-decomposition of both parity blocks at one coupler frequency.
pub struct BlockEigen {
    pub values: [DVector<f64>; 2],
    pub vectors: [DMatrix<f64>; 2],
}

pub fn block_eigen(split: &SplitHamiltonian, omega_c: f64) -> BlockEigen {
    let e0 = SymmetricEigen::new(split.blocks[0].assemble(omega_c));
    let e1 = SymmetricEigen::new(split.blocks[1].assemble(omega_c));
    BlockEigen { values: [e0.eigenvalues, e1.eigenvalues], vectors: [e0.eigenvectors, e1.eigenvectors] }
}

pub fn identify_in(split: &SplitHamiltonian, eig: &BlockEigen) -> Result<ComputationalBasis> {
    let mut states = Vec::with_capacity(5);
    let mut taken: Vec<(usize, usize)> = Vec::new();
    for label in Label::ALL {
        let bare = label.bare_index(split.levels);
        let (b, pos) = split.location[bare];
        let row = eig.vectors[b].row(pos);
        let (best, amp) = row
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.abs().partial_cmp(&y.1.abs()).expect("finite"))
            .map(|(i, v)| (i, *v))
            .expect("non-empty block");
        let population = amp * amp;
        if population < MIN_LABEL_POPULATION || taken.contains(&(b, best)) {
            return Err(Error::AmbiguousBasis { label: label.name().into(), population });
        }
        taken.push((b, best));
        let mut v = eig.vectors[b].column(best).into_owned();
        if amp < 0.0 {
            v.neg_mut();
        }
        states.push(DressedState { label, energy: eig.values[b][best], population, block: b, block_vector: v });
    }
    Ok(ComputationalBasis { states })
}

/// Assign each label to the eigenstate of maximal overlap with |i 0 j>.
pub fn identify_computational_states(h: &CircuitHamiltonian) -> Result<ComputationalBasis> {
    let eig = block_eigen(&h.split, h.omega_c);
    identify_in(&h.split, &eig)
}

/// Dressed basis of `circuit` at omega_c.
pub fn dressed_basis(circuit: &CircuitParams, omega_c: f64) -> Result<ComputationalBasis> {
    let split = SplitHamiltonian::new(circuit)?;
    identify_in(&split, &block_eigen(&split, omega_c))
}

/// Exact ZZ rate (rad/s) at coupler frequency omega_c.
pub fn zz_rate(circuit: &CircuitParams, omega_c: f64) -> Result<f64> {
    Ok(dressed_basis(circuit, omega_c)?.zz())
}

fn zz_with(split: &SplitHamiltonian, omega_c: f64) -> Result<f64> {
    Ok(identify_in(split, &block_eigen(split, omega_c))?.zz())
}

/// Closed-form ZZ rate and its ingredients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbativeZz {
    pub zeta: f64,
    pub nu: f64,
    pub g_0110: f64,
    pub warnings: Vec<String>,
}

/// Fourth-order ZZ rate in the hierarchy Sigma >> Delta >> g_ic >> g_12.
pub fn zz_perturbative(circuit: &CircuitParams, omega_c: f64) -> Result<PerturbativeZz> {
    let eff = swt_parameters(circuit, omega_c)?;
    let (g1, g2, g12) = circuit.couplings(omega_c);
    let (w1, w2) = (circuit.q1.omega, circuit.q2.omega);
    let (a1, a2, ac) = (circuit.q1.alpha, circuit.q2.alpha, circuit.coupler.alpha);
    let d1 = w1 - omega_c;
    let d2 = w2 - omega_c;
    let nu = g1 * g2 / (2.0 * d1 * d2);
    let g = eff.g_0110_t;
    let d12 = w1 - w2;
    let den = (d12 + a1) * (d12 - a2);
    if den.abs() < 1e-9 * w2 * w2 * 1e-6 {
        return Err(Error::SingularDenominator("(Delta_12 + alpha_1)(Delta_12 - alpha_2) = 0".into()));
    }
    let zeta = 2.0 * ((a1 + a2) * g * g - 2.0 * nu * g * (2.0 * a1 * a2 + (a1 - a2) * d12)) / den
        + 2.0 * nu * nu * (4.0 * ac + (a1 + a2) * d12 * d12 / den);
    let mut warnings = Vec::new();
    for (name, gi, di, si) in [("q1", g1, d1, w1 + omega_c), ("q2", g2, d2, w2 + omega_c)] {
        if si.abs() / di.abs() <= 5.0 {
            warnings.push(format!("Sigma/Delta for {name}c = {:.2} <= 5", si.abs() / di.abs()));
        }
        if di.abs() / gi.abs().max(f64::MIN_POSITIVE) <= 5.0 {
            warnings.push(format!("Delta/g for {name}c = {:.2} <= 5", di.abs() / gi.abs()));
        }
        if g12 > 0.0 && gi / g12 <= 10.0 {
            warnings.push(format!("g_{name}c/g_12 = {:.2} <= 10", gi / g12));
        }
    }
    Ok(PerturbativeZz { zeta, nu, g_0110: g, warnings })
}

/// Idling search result: coupler frequencies (rad/s) with |zeta| at each.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdlingPoints {
    pub frequencies: Vec<f64>,
    pub residuals: Vec<f64>,
}

pub const IDLE_WINDOW_LOW_MHZ: f64 = 100.0;
pub const IDLE_WINDOW_HIGH_MHZ: f64 = 2500.0;
pub const IDLE_PRESCAN_MHZ: f64 = 5.0;
/// Root acceptance: |zeta|/2pi below 1 Hz.
pub const IDLE_RESIDUAL: f64 = TWO_PI * 1.0;

struct ZetaCost<'a> {
    split: &'a SplitHamiltonian,
}

impl CostFunction for ZetaCost<'_> {
    type Param = f64;
    type Output = f64;
    fn cost(&self, w: &f64) -> std::result::Result<f64, argmin::core::Error> {
        zz_with(self.split, *w).map_err(|e| argmin::core::Error::msg(e.to_string()))
    }
}

/// Coupler frequencies above both qubits at which the exact ZZ rate vanishes.
pub fn find_idling_frequency(circuit: &CircuitParams) -> Result<IdlingPoints> {
    let detuning = circuit.q1.omega - circuit.q2.omega;
    let (lo_d, hi_d) = (circuit.q2.alpha, -circuit.q1.alpha);
    if !(detuning >= lo_d && detuning <= hi_d) {
        return Err(Error::NoIdlingPoint(format!(
            "qubit detuning {:.1} MHz outside [alpha_q2, -alpha_q1] = [{:.1}, {:.1}] MHz",
            detuning / mhz_to_rad(1.0),
            lo_d / mhz_to_rad(1.0),
            hi_d / mhz_to_rad(1.0)
        )));
    }
    let split = SplitHamiltonian::new(circuit)?;
    let top = circuit.q1.omega.max(circuit.q2.omega);
    let lo = top + mhz_to_rad(IDLE_WINDOW_LOW_MHZ);
    let hi = top + mhz_to_rad(IDLE_WINDOW_HIGH_MHZ);
    let step = mhz_to_rad(IDLE_PRESCAN_MHZ);
    let n = ((hi - lo) / step).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    let values: Vec<Option<f64>> = grid.par_iter().map(|&w| zz_with(&split, w).ok()).collect();

    let mut points = IdlingPoints { frequencies: Vec::new(), residuals: Vec::new() };
    for i in 0..n {
        let (Some(za), Some(zb)) = (values[i], values[i + 1]) else { continue };
        if za == 0.0 {
            points.frequencies.push(grid[i]);
            points.residuals.push(0.0);
            continue;
        }
        if za * zb >= 0.0 {
            continue;
        }
        let solver = BrentRoot::new(grid[i], grid[i + 1], 1e-3);
        let run = Executor::new(ZetaCost { split: &split }, solver)
            .configure(|s| s.param(grid[i]).max_iters(200))
            .run();
        let Ok(run) = run else { continue };
        let Some(root) = run.state.best_param else { continue };
        let Ok(res) = zz_with(&split, root) else { continue };
        // sign changes across basis jumps at avoided crossings leave a large residual
        if res.abs() < IDLE_RESIDUAL {
            points.frequencies.push(root);
            points.residuals.push(res.abs());
        }
    }
    if points.frequencies.is_empty() {
        return Err(Error::NoIdlingPoint(format!(
            "no sign change of zeta in [{:.3}, {:.3}] GHz",
            rad_to_ghz(lo),
            rad_to_ghz(hi)
        )));
    }
    Ok(points)
}

/// Per-parity ZZ rates from the Taylor form and from exact rediagonalization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParityZz {
    pub parities: [Parity; 3],
    pub taylor: f64,
    pub exact: f64,
}

/// Parity-resolved ZZ analysis at one coupler frequency. All rates in rad/s.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZzReport {
    pub zeta_zz: f64,
    pub per_parity: Vec<ParityZz>,
    pub rms: f64,
    pub rms_exact: f64,
    /// d zeta / d alpha_i for (q1, c, q2).
    pub d_alpha: [f64; 3],
    /// d zeta / d omega_i for (q1, c, q2).
    pub d_omega: [f64; 3],
    pub warnings: Vec<String>,
}

/// Central-difference step for parameter derivatives of zeta.
pub const ZZ_DERIVATIVE_STEP_MHZ: f64 = 1.0;

fn zeta_at(circuit: &CircuitParams, omega_c: f64, shifts: &[ModeShift; 3]) -> Result<f64> {
    let (c, dwc) = circuit.shifted(shifts);
    zz_rate(&c, omega_c + dwc)
}

/// d zeta/d omega_i and d zeta/d alpha_i by central differences with step h (rad/s).
pub fn zz_derivatives(circuit: &CircuitParams, omega_c: f64, h: f64) -> Result<([f64; 3], [f64; 3])> {
    let mut d_alpha = [0.0; 3];
    let mut d_omega = [0.0; 3];
    for i in 0..3 {
        for (target, alpha) in [(&mut d_alpha, true), (&mut d_omega, false)] {
            let mut plus = [ModeShift::default(); 3];
            let mut minus = [ModeShift::default(); 3];
            if alpha {
                plus[i].d_alpha = h;
                minus[i].d_alpha = -h;
            } else {
                plus[i].d_omega = h;
                minus[i].d_omega = -h;
            }
            target[i] = (zeta_at(circuit, omega_c, &plus)? - zeta_at(circuit, omega_c, &minus)?) / (2.0 * h);
        }
    }
    Ok((d_alpha, d_omega))
}

/// Parity-resolved ZZ: first-order Taylor form and exact per-parity rediagonalization.
///
/// `dispersions` are (q1, coupler, q2) in GHz; parity P shifts omega by P eps1/2
/// and alpha by P eps2/2 (n_g = 0).
pub fn parity_zz_spread(circuit: &CircuitParams, omega_c: f64, dispersions: &[Dispersion; 3]) -> Result<ZzReport> {
    let zeta0 = zz_rate(circuit, omega_c)?;
    let h = mhz_to_rad(ZZ_DERIVATIVE_STEP_MHZ);
    let (d_alpha, d_omega) = zz_derivatives(circuit, omega_c, h)?;
    let mut warnings = Vec::new();
    for (i, d) in dispersions.iter().enumerate() {
        if ghz_to_rad(d.eps2.abs()) > h {
            warnings.push(format!("dispersion of site {i} exceeds the derivative step"));
        }
    }
    let per_parity = parity_states()
        .into_iter()
        .map(|ps| {
            let shifts = [
                dispersions[0].shift(ps[0], true),
                dispersions[1].shift(ps[1], true),
                dispersions[2].shift(ps[2], true),
            ];
            let taylor = zeta0
                + (0..3).map(|i| d_alpha[i] * shifts[i].d_alpha + d_omega[i] * shifts[i].d_omega).sum::<f64>();
            let exact = zeta_at(circuit, omega_c, &shifts)?;
            Ok(ParityZz { parities: ps, taylor, exact })
        })
        .collect::<Result<Vec<_>>>()?;
    let rms = (per_parity.iter().map(|p| p.taylor * p.taylor).sum::<f64>() / 8.0).sqrt();
    let rms_exact = (per_parity.iter().map(|p| p.exact * p.exact).sum::<f64>() / 8.0).sqrt();
    Ok(ZzReport { zeta_zz: zeta0, per_parity, rms, rms_exact, d_alpha, d_omega, warnings })
}

/// Parity sensitivity of an adiabatic CPHASE accumulated at constant omega_c.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdiabaticSensitivity {
    /// (d zeta / d alpha_q2) phi0 / |zeta0| in seconds.
    pub sensitivity: f64,
    pub fidelity: f64,
    pub zeta0: f64,
    pub d_zeta_d_alpha_q2: f64,
}

/// Fidelity of an adiabatic gate of phase phi0 after a parity switch of q2.
///
/// `eps2_q2` in GHz, `n_g` the offset charge of q2.
pub fn adiabatic_parity_sensitivity(
    circuit: &CircuitParams,
    omega_c: f64,
    phi0: f64,
    eps2_q2: f64,
    n_g: f64,
) -> Result<AdiabaticSensitivity> {
    let zeta0 = zz_rate(circuit, omega_c)?;
    if zeta0.abs() < IDLE_RESIDUAL {
        return Err(Error::Domain("zeta_ZZ vanishes: idling configuration, no adiabatic gate".into()));
    }
    let h = mhz_to_rad(ZZ_DERIVATIVE_STEP_MHZ);
    let mut plus = [ModeShift::default(); 3];
    let mut minus = [ModeShift::default(); 3];
    plus[2].d_alpha = h;
    minus[2].d_alpha = -h;
    let d = (zeta_at(circuit, omega_c, &plus)? - zeta_at(circuit, omega_c, &minus)?) / (2.0 * h);
    let sensitivity = d * phi0 / zeta0.abs();
    let x = sensitivity * ghz_to_rad(eps2_q2) * (TWO_PI * n_g).cos();
    Ok(AdiabaticSensitivity { sensitivity, fidelity: 1.0 - 3.0 / 80.0 * x * x, zeta0, d_zeta_d_alpha_q2: d })
}
