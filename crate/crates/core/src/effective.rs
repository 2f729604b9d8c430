//! Schrieffer-Wolff effective model of the |11>-|02> gate block.

use nalgebra::Matrix5;
use serde::{Deserialize, Serialize};

use crate::circuit::CircuitParams;
use crate::error::{Error, Result};
use crate::units::{mhz_to_rad, wrap_phase, TWO_PI};

/// Perturbed frequencies and couplings, all in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub omega_q1_t: f64,
    pub omega_q2_t: f64,
    pub alpha_q1_t: f64,
    pub alpha_q2_t: f64,
    pub g_0110_t: f64,
    pub g_1102_t: f64,
    pub delta_t: f64,
    pub rabi: f64,
}

impl EffectiveParams {
    /// Rabi frequency recomputed from the stored fields.
    pub fn recomputed_rabi(&self) -> f64 {
        ((self.delta_t - self.alpha_q2_t).powi(2) + 4.0 * self.g_1102_t.powi(2)).sqrt()
    }

    /// Copy with a different alpha_q2_t and consistent rabi.
    pub fn with_alpha_q2_t(mut self, alpha: f64) -> Self {
        self.alpha_q2_t = alpha;
        self.rabi = self.recomputed_rabi();
        self
    }

    /// Detuning of |11> from |02>, Delta~ - alpha~_q2.
    pub fn block_detuning(&self) -> f64 {
        self.delta_t - self.alpha_q2_t
    }
}

/// Conditional phase, |11> population, duration and Rabi count of one gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub phi: f64,
    pub p11: f64,
    pub t_g: f64,
    pub n_rabi: u32,
}

fn checked(x: f64, scale: f64, what: &str) -> Result<f64> {
    if x.abs() <= 1e-12 * scale || !x.is_finite() {
        return Err(Error::SingularDenominator(what.into()));
    }
    Ok(x)
}

/// Second-order perturbed parameters at coupler frequency omega_c.
pub fn swt_parameters(circuit: &CircuitParams, omega_c: f64) -> Result<EffectiveParams> {
    let (w1, w2) = (circuit.q1.omega, circuit.q2.omega);
    let (a1, a2) = (circuit.q1.alpha, circuit.q2.alpha);
    let (g1, g2, g12) = circuit.couplings(omega_c);
    let scale = w1.max(w2).max(omega_c);
    let d1 = checked(w1 - omega_c, scale, "Delta_q1c = 0")?;
    let d2 = checked(w2 - omega_c, scale, "Delta_q2c = 0")?;
    let s1 = w1 + omega_c;
    let s2 = w2 + omega_c;
    let d1a = checked(d1 + a1, scale, "Delta_q1c + alpha_q1 = 0")?;
    let d2a = checked(d2 + a2, scale, "Delta_q2c + alpha_q2 = 0")?;

    let omega_t = |w: f64, g: f64, d: f64, s: f64, a: f64| w + g * g / d + 2.0 * g * g / (s + a) + g * g / s;
    let alpha_t = |g: f64, d: f64, da: f64, s: f64, a: f64| {
        a - 2.0 * g * g / d + 2.0 * g * g / da + 4.0 * g * g / (s + a) + g * g / s - 3.0 * g * g / (s + 2.0 * a)
    };
    let omega_q1_t = omega_t(w1, g1, d1, s1, a1);
    let omega_q2_t = omega_t(w2, g2, d2, s2, a2);
    let alpha_q1_t = alpha_t(g1, d1, d1a, s1, a1);
    let alpha_q2_t = alpha_t(g2, d2, d2a, s2, a2);
    let g_0110_t = g12 + g1 * g2 / 2.0 * (1.0 / d1 + 1.0 / d2 - 1.0 / s1 - 1.0 / s2);
    let g_1102_t = std::f64::consts::SQRT_2 * (g12 + g1 * g2 / 2.0 * (1.0 / d1 + 1.0 / d2a - 1.0 / s1 - 1.0 / (s2 + a2)));
    let delta_t = omega_q1_t - omega_q2_t;
    let rabi = ((delta_t - alpha_q2_t).powi(2) + 4.0 * g_1102_t * g_1102_t).sqrt();
    Ok(EffectiveParams { omega_q1_t, omega_q2_t, alpha_q1_t, alpha_q2_t, g_0110_t, g_1102_t, delta_t, rabi })
}

/// Effective Hamiltonian over (|00>, |01>, |10>, |11>, |02>), rad/s.
pub fn effective_hamiltonian(p: &EffectiveParams) -> Matrix5<f64> {
    let mut h = Matrix5::zeros();
    h[(1, 1)] = p.omega_q2_t;
    h[(2, 2)] = p.omega_q1_t;
    h[(3, 3)] = p.omega_q1_t + p.omega_q2_t;
    h[(4, 4)] = 2.0 * p.omega_q2_t + p.alpha_q2_t;
    h[(1, 2)] = p.g_0110_t;
    h[(2, 1)] = p.g_0110_t;
    h[(3, 4)] = p.g_1102_t;
    h[(4, 3)] = p.g_1102_t;
    h
}

/// Population remaining in |11> after a plateau of duration t.
pub fn effective_p11(p: &EffectiveParams, t: f64) -> f64 {
    if p.rabi == 0.0 {
        return 1.0;
    }
    1.0 - 2.0 * p.g_1102_t.powi(2) / p.rabi.powi(2) * (1.0 - (p.rabi * t).cos())
}

/// Conditional phase after a plateau of duration t.
///
/// The branch index follows the tan poles so the result is continuous in t
/// whenever the block is detuned; it equals the principal-branch form mod 2pi.
pub fn effective_phase(p: &EffectiveParams, t: f64) -> f64 {
    let half = p.rabi * t / 2.0;
    let ratio = if p.rabi == 0.0 { 0.0 } else { p.block_detuning() / p.rabi };
    // arg(cos h + i x sin h) stays within pi/2 of sign(x) h
    let principal = (ratio * half.sin()).atan2(half.cos());
    let track = if ratio < 0.0 { -half } else { half };
    let unwrapped = principal + TWO_PI * ((track - principal) / TWO_PI).round();
    -0.5 * p.block_detuning() * t + unwrapped
}

/// Gate outcome for n full |11>-|02> cycles.
pub fn effective_gate(p: &EffectiveParams, n_rabi: u32) -> Result<GateOutcome> {
    if n_rabi == 0 || p.rabi <= 0.0 {
        return Err(Error::InvalidParameter("n_rabi and rabi must be positive".into()));
    }
    let t_g = TWO_PI * n_rabi as f64 / p.rabi;
    Ok(GateOutcome { phi: wrap_phase(effective_phase(p, t_g)), p11: effective_p11(p, t_g).clamp(0.0, 1.0), t_g, n_rabi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SusceptibilityMode {
    #[default]
    Simplified,
    Full,
}

/// Finite-difference step for derivatives with respect to alpha_q2.
pub fn alpha_step() -> f64 {
    mhz_to_rad(0.1)
}

fn require_full_period(p: &EffectiveParams, t_g: f64) -> Result<u32> {
    let cycles = p.rabi * t_g / TWO_PI;
    let n = cycles.round();
    if n < 1.0 || ((cycles - n) / n).abs() > 1e-6 {
        return Err(Error::Contract(format!("Omega t_g / 2pi = {cycles:.9} is not an integer")));
    }
    Ok(n as u32)
}

fn shifted_alpha(circuit: &CircuitParams, omega_c: f64, d_alpha: f64) -> Result<EffectiveParams> {
    let mut c = *circuit;
    c.q2.alpha += d_alpha;
    swt_parameters(&c, omega_c)
}

/// d phi / d alpha_q2 in seconds.
///
/// Simplified mode returns t_g/2 at a full Rabi period. Full mode differentiates
/// the closed-form phase through the perturbed parameters at fixed t_g.
pub fn phase_susceptibility(
    circuit: &CircuitParams,
    omega_c: f64,
    t_g: f64,
    mode: SusceptibilityMode,
) -> Result<f64> {
    let p = swt_parameters(circuit, omega_c)?;
    match mode {
        SusceptibilityMode::Simplified => {
            require_full_period(&p, t_g)?;
            Ok(t_g / 2.0)
        }
        SusceptibilityMode::Full => {
            let h = alpha_step();
            let plus = effective_phase(&shifted_alpha(circuit, omega_c, h)?, t_g);
            let minus = effective_phase(&shifted_alpha(circuit, omega_c, -h)?, t_g);
            Ok(wrap_phase(plus - minus) / (2.0 * h))
        }
    }
}

/// Phase shift from a parity-induced anharmonicity change d_alpha (rad/s).
pub fn parity_phase_shift(susceptibility: f64, d_alpha: f64) -> f64 {
    susceptibility * d_alpha
}

/// Second derivative of P11 with respect to alpha_q2 (s^2) and the scale g~^2/(omega_q2 + alpha_q2 - omega_q1)^4.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LeakageSusceptibility {
    pub second_derivative: f64,
    pub first_derivative: f64,
    pub scale: f64,
}

/// d^2 P11 / d alpha_q2^2 at a calibrated duration.
pub fn leakage_susceptibility(circuit: &CircuitParams, omega_c: f64, t_g: f64) -> Result<LeakageSusceptibility> {
    let p = swt_parameters(circuit, omega_c)?;
    require_full_period(&p, t_g)?;
    let h = alpha_step();
    let plus = effective_p11(&shifted_alpha(circuit, omega_c, h)?, t_g);
    let mid = effective_p11(&p, t_g);
    let minus = effective_p11(&shifted_alpha(circuit, omega_c, -h)?, t_g);
    let det = circuit.q2.omega + circuit.q2.alpha - circuit.q1.omega;
    Ok(LeakageSusceptibility {
        second_derivative: (plus - 2.0 * mid + minus) / (h * h),
        first_derivative: (plus - minus) / (2.0 * h),
        scale: p.g_1102_t.powi(2) / det.powi(4),
    })
}

/// One assumption with its ratio and the threshold it must stay below.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub ratio: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const ASSUMPTION_THRESHOLD: f64 = 0.1;

/// Ratios that must be small for the effective model to hold.
pub fn validate_assumptions(circuit: &CircuitParams, omega_c: f64) -> Result<AssumptionReport> {
    let p = swt_parameters(circuit, omega_c)?;
    let (g1, g2, _) = circuit.couplings(omega_c);
    let d1 = circuit.q1.omega - omega_c;
    let d2 = circuit.q2.omega - omega_c;
    let s1 = circuit.q1.omega + omega_c;
    let s2 = circuit.q2.omega + omega_c;
    let single = (p.delta_t.powi(2) + 4.0 * p.g_0110_t.powi(2)).sqrt();
    let single_leak = p.g_0110_t.powi(2) / (p.delta_t.powi(2) + 4.0 * p.g_0110_t.powi(2));
    let double_swap = p.g_1102_t.powi(2) / p.rabi.powi(2);
    let entries = [
        ("perturbativity", ((g1 / d1).powi(2)).max((g2 / d2).powi(2))),
        ("single_excitation_rabi", p.rabi / single),
        ("single_excitation_swap", single_leak / double_swap),
        ("rotating_wave", (g1 / s1).abs().max((g2 / s2).abs())),
    ];
    Ok(AssumptionReport {
        checks: entries
            .into_iter()
            .map(|(name, ratio)| AssumptionCheck {
                name: name.into(),
                ratio,
                threshold: ASSUMPTION_THRESHOLD,
                passed: ratio.is_finite() && ratio < ASSUMPTION_THRESHOLD,
            })
            .collect(),
    })
}
