//! Error budget of the reference circuit as a function of the qubit-2 energies.

use serde::{Deserialize, Serialize};

use super::leakage::sqg_leakage;
use super::noise::{
    bias_for_shift, flux_dephasing_advanced, scale_rates, thermal_excitation, ModelKind, NoiseModel, IDLE_OFFSET_GHZ,
};
use crate::error::{Error, Result};
use crate::spectral::{duffing_frequency_ghz, eps2, josephson_for_frequency, DispersionMode};
use crate::units::{ghz_to_rad, NS};

/// Detuning margin added to the qubit-1 frequency and anharmonicity, GHz.
pub const DETUNING_MARGIN_GHZ: f64 = 0.01;

/// Gate durations and weights of the reference circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub t_sqg: f64,
    pub t_tqg: f64,
    pub weights: Weights,
}

/// Weights of each infidelity group; `state_prep = None` selects 10 (t_TQG + 2 t_SQG) / T_1,0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub tqg: f64,
    pub sqg_decoherence: f64,
    pub sqg_leakage: f64,
    pub state_prep: Option<f64>,
}

impl Default for Weights {
    fn default() -> Self {
        Self { tqg: 1.0, sqg_decoherence: 2.0, sqg_leakage: 1.0, state_prep: None }
    }
}

impl Default for CircuitSpec {
    fn default() -> Self {
        Self { t_sqg: 16.0 * NS, t_tqg: 50.0 * NS, weights: Weights::default() }
    }
}

impl CircuitSpec {
    /// Duration of one block of the circuit counted ten times per reference T1.
    fn block(&self) -> f64 {
        10.0 * (self.t_tqg + 2.0 * self.t_sqg)
    }

    pub fn state_prep_weight(&self, t1_ref: f64) -> f64 {
        self.weights.state_prep.unwrap_or(self.block() / t1_ref)
    }

    /// Repetitions N = floor(T_1,0 / (10 (t_TQG + 2 t_SQG))).
    pub fn n_repetitions(&self, t1_ref: f64) -> u64 {
        (t1_ref / self.block()).floor() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_sqg > 0.0 && self.t_tqg > 0.0) {
            return Err(Error::InvalidParameter("gate durations must be positive".into()));
        }
        Ok(())
    }
}

/// Per-term prefactors of the two-qubit and single-qubit infidelities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    /// Relaxation during the two-qubit gate for (q1, q2).
    pub t1_tqg: [f64; 2],
    pub tphi_tqg: [f64; 2],
    pub parity: f64,
    pub sqg_t1: f64,
    pub sqg_tphi: f64,
    pub leakage: f64,
}

pub const BASIC: Coefficients = Coefficients {
    t1_tqg: [2.0 / 5.0, 2.0 / 5.0],
    tphi_tqg: [1.0 / 5.0, 1.0 / 5.0],
    parity: 3.0 / 80.0,
    sqg_t1: 1.0 / 3.0,
    sqg_tphi: 1.0 / 6.0,
    leakage: 1.0 / 3.0,
};

pub const ADVANCED: Coefficients = Coefficients {
    t1_tqg: [3.0 / 10.0, 1.0 / 2.0],
    tphi_tqg: [3.0 / 8.0, 31.0 / 40.0],
    ..BASIC
};

impl ModelKind {
    pub fn coefficients(self) -> Coefficients {
        match self {
            ModelKind::Basic => BASIC,
            ModelKind::Advanced => ADVANCED,
        }
    }
}

/// Rates, dispersion and probabilities feeding the budget; index 0 is qubit 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TermInputs {
    pub gamma1: [f64; 2],
    pub gamma_phi_tqg: [f64; 2],
    pub gamma_phi_sqg: [f64; 2],
    /// Qubit-2 second-level charge dispersion in rad/s.
    pub eps2: f64,
    pub leakage: [f64; 2],
    pub thermal: [f64; 2],
}

/// Error source used for region labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSource {
    Parity,
    Decoherence,
    Leakage,
    Thermal,
}

impl ErrorSource {
    pub fn name(self) -> &'static str {
        match self {
            Self::Parity => "parity",
            Self::Decoherence => "decoherence",
            Self::Leakage => "leakage",
            Self::Thermal => "thermal",
        }
    }
}

/// Term-by-term contributions to 1 - P.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBreakdown {
    pub parity: f64,
    pub t1_tqg: f64,
    pub tphi_tqg: f64,
    pub sqg_t1: f64,
    pub sqg_tphi: f64,
    pub leakage: f64,
    pub thermal: f64,
    pub one_minus_p: f64,
    pub leakage_extrapolated: bool,
}

impl MetricBreakdown {
    /// Terms in fixed order with their names and sources.
    pub fn terms(&self) -> [(&'static str, ErrorSource, f64); 7] {
        [
            ("parity", ErrorSource::Parity, self.parity),
            ("t1_tqg", ErrorSource::Decoherence, self.t1_tqg),
            ("tphi_tqg", ErrorSource::Decoherence, self.tphi_tqg),
            ("sqg_t1", ErrorSource::Decoherence, self.sqg_t1),
            ("sqg_tphi", ErrorSource::Decoherence, self.sqg_tphi),
            ("leak", ErrorSource::Leakage, self.leakage),
            ("thermal", ErrorSource::Thermal, self.thermal),
        ]
    }

    /// Largest single term; ties go to the earlier term.
    pub fn dominant(&self) -> (&'static str, ErrorSource) {
        let mut best = self.terms()[0];
        for t in self.terms() {
            if t.2 > best.2 {
                best = t;
            }
        }
        (best.0, best.1)
    }

    /// Fraction of 1 - P carried by each source.
    pub fn fraction(&self, source: ErrorSource) -> f64 {
        let part: f64 = self.terms().iter().filter(|t| t.1 == source).map(|t| t.2).sum();
        part / self.one_minus_p
    }
}

/// Combine inputs with prefactors and weights.
pub fn evaluate_terms(inputs: &TermInputs, coeffs: &Coefficients, spec: &CircuitSpec, t1_ref: f64) -> MetricBreakdown {
    let w = spec.weights;
    let pair = |c: [f64; 2], v: [f64; 2]| c[0] * v[0] + c[1] * v[1];
    let half_phase = spec.t_tqg * inputs.eps2 / 2.0;
    let parity = w.tqg * coeffs.parity * half_phase * half_phase;
    let t1_tqg = w.tqg * pair(coeffs.t1_tqg, inputs.gamma1) * spec.t_tqg;
    let tphi_tqg = w.tqg * pair(coeffs.tphi_tqg, inputs.gamma_phi_tqg) * spec.t_tqg;
    let sqg_t1 = w.sqg_decoherence * coeffs.sqg_t1 * (inputs.gamma1[0] + inputs.gamma1[1]) * spec.t_sqg;
    let sqg_tphi = w.sqg_decoherence * coeffs.sqg_tphi * (inputs.gamma_phi_sqg[0] + inputs.gamma_phi_sqg[1]) * spec.t_sqg;
    let leakage = w.sqg_leakage * coeffs.leakage * (inputs.leakage[0] + inputs.leakage[1]);
    let thermal = spec.state_prep_weight(t1_ref) * (inputs.thermal[0] + inputs.thermal[1]);
    MetricBreakdown {
        parity,
        t1_tqg,
        tphi_tqg,
        sqg_t1,
        sqg_tphi,
        leakage,
        thermal,
        one_minus_p: parity + t1_tqg + tphi_tqg + sqg_t1 + sqg_tphi + leakage + thermal,
        leakage_extrapolated: false,
    }
}

/// Parity term (3/80)(t_TQG eps2 / 2 hbar)^2 with asymptotic dispersion.
pub fn parity_term(e_j: f64, e_c: f64, t_tqg: f64) -> Result<f64> {
    parity_term_with(e_j, e_c, t_tqg, DispersionMode::Asymptotic)
}

pub fn parity_term_with(e_j: f64, e_c: f64, t_tqg: f64, mode: DispersionMode) -> Result<f64> {
    let half_phase = t_tqg * ghz_to_rad(eps2(e_j, e_c, mode)?.abs()) / 2.0;
    Ok(BASIC.parity * half_phase * half_phase)
}

/// Energies and frequencies (GHz) of one transmon of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonDesign {
    pub e_j: f64,
    pub e_c: f64,
    pub omega_ghz: f64,
    pub alpha_ghz: f64,
}

impl TransmonDesign {
    pub fn from_energies(e_j: f64, e_c: f64) -> Self {
        Self { e_j, e_c, omega_ghz: duffing_frequency_ghz(e_j, e_c), alpha_ghz: -e_c }
    }
}

/// Qubit pair derived from the qubit-2 energies, with qubit-1 flux biases in the advanced model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPair {
    pub q1: TransmonDesign,
    pub q2: TransmonDesign,
    pub q1_idle_bias: Option<f64>,
    pub q1_gate_bias: Option<f64>,
}

/// Qubit 1 sits at alpha_q2 + 10 MHz (basic) or alpha_q2 / 2 (advanced) from qubit 2.
pub fn derive_pair(e_j: f64, e_c: f64, model: &NoiseModel) -> Result<DesignPair> {
    if !(e_j > 0.0 && e_c > DETUNING_MARGIN_GHZ) {
        return Err(Error::InvalidParameter(format!("E_J = {e_j}, E_C = {e_c} GHz out of range")));
    }
    let q2 = TransmonDesign::from_energies(e_j, e_c);
    let alpha_q1 = q2.alpha_ghz + DETUNING_MARGIN_GHZ;
    let e_c1 = -alpha_q1;
    match model.model_kind {
        ModelKind::Basic => {
            let omega_q1 = q2.omega_ghz + q2.alpha_ghz + DETUNING_MARGIN_GHZ;
            let q1 = TransmonDesign { e_j: josephson_for_frequency(omega_q1, e_c1), e_c: e_c1, omega_ghz: omega_q1, alpha_ghz: alpha_q1 };
            Ok(DesignPair { q1, q2, q1_idle_bias: None, q1_gate_bias: None })
        }
        ModelKind::Advanced => {
            let omega_q1 = q2.omega_ghz + q2.alpha_ghz / 2.0;
            // junction sum fixed by the sweet spot 10 MHz above idle
            let e_j_sigma = josephson_for_frequency(omega_q1 + IDLE_OFFSET_GHZ, e_c1);
            let d = model.junction_asymmetry_d;
            let idle = bias_for_shift(e_j_sigma, e_c1, d, IDLE_OFFSET_GHZ)?;
            let gate = bias_for_shift(e_j_sigma, e_c1, d, IDLE_OFFSET_GHZ - q2.alpha_ghz / 2.0)?;
            let q1 = TransmonDesign { e_j: e_j_sigma, e_c: e_c1, omega_ghz: omega_q1, alpha_ghz: alpha_q1 };
            Ok(DesignPair { q1, q2, q1_idle_bias: Some(idle), q1_gate_bias: Some(gate) })
        }
    }
}

/// Rates and probabilities of a derived pair under a noise model.
pub fn term_inputs(pair: &DesignPair, model: &NoiseModel) -> Result<(TermInputs, bool)> {
    let r1 = scale_rates(model, pair.q1.e_j, pair.q1.e_c)?;
    let r2 = scale_rates(model, pair.q2.e_j, pair.q2.e_c)?;
    let (phi_tqg_q1, phi_sqg_q1) = match (pair.q1_idle_bias, pair.q1_gate_bias) {
        (Some(idle), Some(gate)) => (
            flux_dephasing_advanced(model, pair.q1.e_j, pair.q1.e_c, gate)?,
            flux_dephasing_advanced(model, pair.q1.e_j, pair.q1.e_c, idle)?,
        ),
        _ => (r1.gamma_phi, r1.gamma_phi),
    };
    let l1 = sqg_leakage(&model.leakage, pair.q1.e_c)?;
    let l2 = sqg_leakage(&model.leakage, pair.q2.e_c)?;
    let inputs = TermInputs {
        gamma1: [r1.gamma1, r2.gamma1],
        gamma_phi_tqg: [phi_tqg_q1, r2.gamma_phi],
        gamma_phi_sqg: [phi_sqg_q1, r2.gamma_phi],
        eps2: ghz_to_rad(eps2(pair.q2.e_j, pair.q2.e_c, DispersionMode::Asymptotic)?.abs()),
        leakage: [l1.value, l2.value],
        thermal: [
            thermal_excitation(ghz_to_rad(pair.q1.omega_ghz), model.temperature)?,
            thermal_excitation(ghz_to_rad(pair.q2.omega_ghz), model.temperature)?,
        ],
    };
    Ok((inputs, l1.extrapolated || l2.extrapolated))
}

/// 1 - P and its breakdown at qubit-2 energies (e_j, e_c) in GHz.
pub fn performance_metric(e_j: f64, e_c: f64, model: &NoiseModel, spec: &CircuitSpec) -> Result<MetricBreakdown> {
    model.validate()?;
    spec.validate()?;
    let pair = derive_pair(e_j, e_c, model)?;
    let (inputs, extrapolated) = term_inputs(&pair, model)?;
    let mut b = evaluate_terms(&inputs, &model.model_kind.coefficients(), spec, model.t1_ref);
    b.leakage_extrapolated = extrapolated;
    Ok(b)
}
