//! Parity-switch Kraus channel: operators, fidelities, N-gate scaling and quasiparticle bounds.

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

/// Computational-subspace dimension.
const DIM: f64 = 4.0;

/// Two-outcome channel mixing CPHASE(phi0 + delta_phi/2) and CPHASE(phi0 - delta_phi/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityChannel {
    pub phi0: f64,
    pub delta_phi: f64,
    pub delta_p11: f64,
    /// Probability of the even-parity operator.
    pub p_plus: f64,
}

/// Single-gate fidelity in exact and second-order form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelFidelity {
    pub exact: f64,
    pub quadratic: f64,
}

/// N-gate fidelity from the binomial sum and from the linear scaling law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NGateFidelity {
    pub n: u32,
    pub exact: f64,
    pub linear: f64,
}

impl NGateFidelity {
    pub fn infidelity_exact(&self) -> f64 {
        1.0 - self.exact
    }

    pub fn infidelity_linear(&self) -> f64 {
        1.0 - self.linear
    }
}

impl ParityChannel {
    /// Equal parity occupation.
    pub fn new(phi0: f64, delta_phi: f64, delta_p11: f64) -> Result<Self> {
        Self::with_occupation(phi0, delta_phi, delta_p11, 0.5)
    }

    pub fn with_occupation(phi0: f64, delta_phi: f64, delta_p11: f64, p_plus: f64) -> Result<Self> {
        let ch = Self { phi0, delta_phi, delta_p11, p_plus };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi0.is_finite() && self.delta_phi.is_finite()) {
            return Err(Error::InvalidParameter("channel phases must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.delta_p11) {
            return Err(Error::InvalidParameter(format!("delta_p11 = {} outside [0, 1)", self.delta_p11)));
        }
        if !(0.0..=1.0).contains(&self.p_plus) {
            return Err(Error::InvalidParameter(format!("p_plus = {} outside [0, 1]", self.p_plus)));
        }
        Ok(())
    }

    /// Amplitude kept in |11> by each operator.
    pub fn survival_amplitude(&self) -> f64 {
        (1.0 - self.delta_p11 / 4.0).sqrt()
    }

    /// Factor tr(sum_i K_i rho K_i^dag) / tr(rho) for rho = |11><11|; the minimum over inputs.
    pub fn trace_factor(&self) -> f64 {
        1.0 - self.delta_p11 / 4.0
    }

    fn weights(&self) -> [f64; 2] {
        [self.p_plus, 1.0 - self.p_plus]
    }
}

/// Ideal CPHASE(phi0) = diag(1, 1, 1, e^{i phi0}).
pub fn cphase(phi0: f64) -> Matrix4<Complex64> {
    let mut u = Matrix4::<Complex64>::identity();
    u[(3, 3)] = Complex64::from_polar(1.0, phi0);
    u
}

fn diagonal_operator(weight: f64, entry: Complex64) -> Matrix4<Complex64> {
    let mut u = Matrix4::<Complex64>::identity() * Complex64::new(weight.sqrt(), 0.0);
    u[(3, 3)] = entry * weight.sqrt();
    u
}

/// Kraus pair (U_+, U_-) with |11> entries sqrt(1 - dP11/4) e^{i(phi0 +- dphi/2)}.
pub fn kraus_operators(ch: &ParityChannel) -> Result<[Matrix4<Complex64>; 2]> {
    kraus_operators_offset(ch, 0.0)
}

/// Kraus pair with both phases shifted by `offset`; offset = dphi/2 puts the whole error on one parity.
pub fn kraus_operators_offset(ch: &ParityChannel, offset: f64) -> Result<[Matrix4<Complex64>; 2]> {
    ch.validate()?;
    let s = ch.survival_amplitude();
    let [w_plus, w_minus] = ch.weights();
    let half = ch.delta_phi / 2.0;
    Ok([
        diagonal_operator(w_plus, Complex64::from_polar(s, ch.phi0 + offset + half)),
        diagonal_operator(w_minus, Complex64::from_polar(s, ch.phi0 + offset - half)),
    ])
}

/// Average gate fidelity of a Kraus set against a target, with the leakage term L.
pub fn operator_fidelity(ops: &[Matrix4<Complex64>], target: &Matrix4<Complex64>) -> f64 {
    let mut overlap = 0.0;
    let mut kept = 0.0;
    for k in ops {
        overlap += (target.adjoint() * k).trace().norm_sqr();
        kept += (target.adjoint() * k * k.adjoint() * target).trace().re;
    }
    let leakage = 1.0 - kept / DIM;
    (overlap / DIM + 1.0 - leakage) / (DIM + 1.0)
}

/// Exact and quadratic single-gate fidelity.
pub fn channel_fidelity(ch: &ParityChannel) -> Result<ChannelFidelity> {
    let ops = kraus_operators(ch)?;
    Ok(ChannelFidelity {
        exact: operator_fidelity(&ops, &cphase(ch.phi0)),
        quadratic: 1.0 - 3.0 / 80.0 * ch.delta_phi.powi(2) - ch.delta_p11 / 16.0,
    })
}

/// Exact fidelity when the operator phases are centred at phi0 + offset instead of phi0.
pub fn miscalibrated_fidelity(ch: &ParityChannel, offset: f64) -> Result<f64> {
    let ops = kraus_operators_offset(ch, offset)?;
    Ok(operator_fidelity(&ops, &cphase(ch.phi0)))
}

/// Fidelity of N sequential gates, phase error only.
pub fn n_gate_infidelity(ch: &ParityChannel, n: u32) -> Result<NGateFidelity> {
    ch.validate()?;
    if ch.delta_p11 != 0.0 {
        return Err(Error::Contract("N-gate scaling requires delta_p11 = 0".into()));
    }
    let linear = 1.0 - 3.0 / 80.0 * f64::from(n) * ch.delta_phi.powi(2);
    if n == 0 {
        return Ok(NGateFidelity { n, exact: 1.0, linear: 1.0 });
    }
    let [w_plus, w_minus] = ch.weights();
    let half = ch.delta_phi / 2.0;
    // k operators of one parity and n - k of the other; |tr|^2 = 10 + 6 cos(half (n - 2k))
    let mut sum = 0.0;
    for k in 0..=n {
        let weight = binomial_weight(n, k, w_plus, w_minus);
        if weight == 0.0 {
            continue;
        }
        let angle = half * (f64::from(n) - 2.0 * f64::from(k));
        sum += weight * (10.0 + 6.0 * angle.cos());
    }
    Ok(NGateFidelity { n, exact: (DIM + sum) / (DIM * DIM + DIM), linear })
}

fn binomial_weight(n: u32, k: u32, p: f64, q: f64) -> f64 {
    let (n_f, k_f) = (u64::from(n), u64::from(k));
    let a = n_f - k_f;
    if (a > 0 && p == 0.0) || (k_f > 0 && q == 0.0) {
        return 0.0;
    }
    let log_p = if a > 0 { a as f64 * p.ln() } else { 0.0 };
    let log_q = if k_f > 0 { k_f as f64 * q.ln() } else { 0.0 };
    (ln_binomial(n_f, k_f) + log_p + log_q).exp()
}

/// Worst-case quasiparticle infidelity per two-qubit gate: Gamma_1 = 2 / T_P on each qubit,
/// inserted in (2/5)(Gamma_1^q1 + Gamma_1^q2) t.
pub fn qp_decoherence_bound(t_parity: f64, gate_duration: f64) -> Result<f64> {
    if !(t_parity > 0.0) {
        return Err(Error::InvalidParameter(format!("parity lifetime {t_parity} must be positive")));
    }
    if !(gate_duration >= 0.0) {
        return Err(Error::InvalidParameter(format!("gate duration {gate_duration} must be non-negative")));
    }
    if t_parity.is_infinite() {
        return Ok(0.0);
    }
    let gamma = 2.0 / t_parity;
    Ok(2.0 / 5.0 * (gamma + gamma) * gate_duration)
}

/// Phase split dphi = (d phi / d alpha) eps2 cos(2 pi n_g); eps2 in rad/s, susceptibility in s.
pub fn delta_phi(susceptibility: f64, eps2: f64, n_g: f64) -> f64 {
    susceptibility * eps2 * (std::f64::consts::TAU * n_g).cos()
}

/// Leakage split |d^2 P11 / d alpha^2| (eps2 cos(2 pi n_g))^2 / 2.
pub fn delta_p11(second_derivative: f64, eps2: f64, n_g: f64) -> f64 {
    let shift = eps2 * (std::f64::consts::TAU * n_g).cos();
    second_derivative.abs() * shift * shift / 2.0
}

/// Monte-Carlo estimate of the average state fidelity over Haar-random inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaarEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Haar-random pure state in four dimensions.
pub fn haar_state(rng: &mut ChaCha8Rng) -> [Complex64; 4] {
    let mut v = [Complex64::new(0.0, 0.0); 4];
    for z in v.iter_mut() {
        *z = Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
    }
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= norm);
    v
}

/// Mean of sum_k |<psi| U^dag K_k |psi>|^2 over `samples` Haar states drawn from `seed`.
pub fn haar_average_fidelity(
    ops: &[Matrix4<Complex64>],
    target: &Matrix4<Complex64>,
    samples: usize,
    seed: u64,
) -> Result<HaarEstimate> {
    if samples < 2 {
        return Err(Error::InvalidParameter("Haar average needs at least two samples".into()));
    }
    let rotated: Vec<Matrix4<Complex64>> = ops.iter().map(|k| target.adjoint() * k).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let psi = nalgebra::Vector4::from(haar_state(&mut rng));
        let f: f64 = rotated.iter().map(|m| psi.dotc(&(m * psi)).norm_sqr()).sum();
        sum += f;
        sum_sq += f * f;
    }
    let n = samples as f64;
    let mean = sum / n;
    let std_error = ((sum_sq / n - mean * mean).max(0.0) / (n - 1.0)).sqrt();
    Ok(HaarEstimate { mean, std_error, samples, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eps2, DispersionMode};
    use crate::units::{ghz_to_rad, NS, US};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn completeness(ops: &[Matrix4<Complex64>; 2]) -> Matrix4<Complex64> {
        ops.iter().map(|k| k.adjoint() * k).sum()
    }

    #[test]
    fn trivial_channel_is_cphase() {
        let ch = ParityChannel::new(std::f64::consts::PI, 0.0, 0.0).unwrap();
        let ops = kraus_operators(&ch).unwrap();
        let scaled = cphase(ch.phi0) / Complex64::new(2f64.sqrt(), 0.0);
        for k in &ops {
            assert!((k - scaled).norm() < 1e-15);
        }
        let f = channel_fidelity(&ch).unwrap();
        assert_relative_eq!(f.exact, 1.0, epsilon = 1e-15);
        assert_relative_eq!(f.quadratic, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn completeness_without_leakage() {
        for dphi in [0.0, 0.01, 0.3, 2.0] {
            let ch = ParityChannel::new(1.0, dphi, 0.0).unwrap();
            let sum = completeness(&kraus_operators(&ch).unwrap());
            assert!((sum - Matrix4::identity()).norm() < 1e-15);
        }
        let leaky = ParityChannel::new(1.0, 0.1, 0.05).unwrap();
        let sum = completeness(&kraus_operators(&leaky).unwrap());
        assert!((sum - Matrix4::identity()).norm() > 1e-3);
        assert!(leaky.trace_factor() < 1.0);
    }

    #[test]
    fn invalid_leakage_is_rejected() {
        assert!(ParityChannel::new(0.0, 0.1, 1.0).is_err());
        assert!(ParityChannel::new(0.0, 0.1, -0.1).is_err());
        assert!(ParityChannel::with_occupation(0.0, 0.1, 0.0, 1.5).is_err());
    }

    #[test]
    fn phase_coefficient() {
        let ch = ParityChannel::new(std::f64::consts::PI, 0.02, 0.0).unwrap();
        let f = channel_fidelity(&ch).unwrap();
        assert_relative_eq!(1.0 - f.quadratic, 1.5e-5, max_relative = 1e-12);
        assert_relative_eq!(1.0 - f.exact, 1.5e-5, max_relative = 1e-3);
    }

    #[test]
    fn exact_matches_closed_form() {
        // (12 + 6 s cos(dphi/2) + 2 s^2) / 20 for equal weights
        let ch = ParityChannel::new(0.7, 0.1, 0.02).unwrap();
        let s = ch.survival_amplitude();
        let oracle = (12.0 + 6.0 * s * (0.05f64).cos() + 2.0 * s * s) / 20.0;
        assert_relative_eq!(channel_fidelity(&ch).unwrap().exact, oracle, epsilon = 1e-15);
    }

    #[test]
    fn quadratic_residual_is_fourth_order() {
        let ch = ParityChannel::new(std::f64::consts::PI, 0.1, 0.0).unwrap();
        let f = channel_fidelity(&ch).unwrap();
        let residual = (f.exact - f.quadratic).abs();
        assert!(residual <= 3.0 / 80.0 * 0.1f64.powi(4), "residual {residual}");
    }

    #[test]
    fn dispersion_split_at_ratio_fifty() {
        let e_c = 4.8 / ((8.0f64 * 50.0).sqrt() - 1.0);
        let eps = ghz_to_rad(eps2(50.0 * e_c, e_c, DispersionMode::Exact).unwrap());
        let t_g = 50.0 * NS;
        let dphi = delta_phi(t_g / 2.0, eps, 0.0);
        assert_relative_eq!(dphi, t_g / 2.0 * eps, max_relative = 1e-15);
        assert!(dphi > 0.01 && dphi < 0.2, "dphi = {dphi}");
        assert_relative_eq!(delta_phi(t_g / 2.0, eps, 0.25), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn single_gate_matches_n_equals_one() {
        let ch = ParityChannel::new(std::f64::consts::PI, 0.07, 0.0).unwrap();
        let one = n_gate_infidelity(&ch, 1).unwrap();
        assert_relative_eq!(one.exact, channel_fidelity(&ch).unwrap().exact, epsilon = 1e-15);
        assert_eq!(n_gate_infidelity(&ch, 0).unwrap().exact, 1.0);
        let leaky = ParityChannel::new(0.0, 0.07, 0.01).unwrap();
        assert!(n_gate_infidelity(&leaky, 3).is_err());
    }

    #[test]
    fn n_gate_binomial_sum_matches_power_form() {
        // sum_k C(n,k) cos(a (n - 2k)) / 2^n = cos^n a
        let ch = ParityChannel::new(0.0, 0.3, 0.0).unwrap();
        for n in [1u32, 2, 5, 17, 100, 1000] {
            let oracle = (14.0 + 6.0 * (0.15f64).cos().powi(n as i32)) / 20.0;
            assert_relative_eq!(n_gate_infidelity(&ch, n).unwrap().exact, oracle, epsilon = 1e-11);
        }
    }

    #[test]
    fn hundred_gates_linear() {
        let ch = ParityChannel::new(std::f64::consts::PI, 0.02, 0.0).unwrap();
        let f = n_gate_infidelity(&ch, 100).unwrap();
        assert_relative_eq!(f.infidelity_linear(), 1.5e-3, max_relative = 1e-12);
        assert_relative_eq!(f.infidelity_exact(), 1.5e-3, max_relative = 0.01);
    }

    #[test]
    fn n_gate_log_slope_is_one() {
        let ch = ParityChannel::new(0.0, 0.01, 0.0).unwrap();
        let pts: Vec<(f64, f64)> = (1..=100)
            .map(|n| ((n as f64).ln(), n_gate_infidelity(&ch, n).unwrap().infidelity_exact().ln()))
            .collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        assert!((sxy / sxx - 1.0).abs() < 0.05);
    }

    #[test]
    fn qp_bound_values() {
        let t_g = 50.0 * NS;
        let short = qp_decoherence_bound(1250.0 * US, t_g).unwrap();
        assert_relative_eq!(short, 0.4 * 4.0 / 1.25e-3 * t_g, max_relative = 1e-15);
        let long = qp_decoherence_bound(20_000.0 * US, t_g).unwrap();
        assert!(long < short);
        assert_eq!(qp_decoherence_bound(f64::INFINITY, t_g).unwrap(), 0.0);
        assert!(qp_decoherence_bound(0.0, t_g).is_err());
    }

    #[test]
    fn haar_average_matches_closed_form() {
        let ch = ParityChannel::with_occupation(2.0, 0.6, 0.2, 0.4).unwrap();
        let ops = kraus_operators(&ch).unwrap();
        let mc = haar_average_fidelity(&ops, &cphase(ch.phi0), 100_000, 11).unwrap();
        let exact = channel_fidelity(&ch).unwrap().exact;
        assert!((mc.mean - exact).abs() < 3.0 * mc.std_error, "mc {} exact {exact} se {}", mc.mean, mc.std_error);
    }

    #[test]
    fn haar_states_are_normalised_and_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        let (x, y) = (haar_state(&mut a), haar_state(&mut b));
        assert_eq!(x, y);
        assert_relative_eq!(x.iter().map(|z| z.norm_sqr()).sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn even_in_phase_split(phi0 in -3.0f64..3.0, dphi in 0.0f64..1.0, dp in 0.0f64..0.5) {
            let plus = channel_fidelity(&ParityChannel::new(phi0, dphi, dp).unwrap()).unwrap().exact;
            let minus = channel_fidelity(&ParityChannel::new(phi0, -dphi, dp).unwrap()).unwrap().exact;
            prop_assert!((plus - minus).abs() < 1e-14);
        }

        #[test]
        fn equal_split_beats_one_sided(dphi in 1e-4f64..=0.2, phi0 in -3.0f64..3.0) {
            let ch = ParityChannel::new(phi0, dphi, 0.0).unwrap();
            let split = channel_fidelity(&ch).unwrap().exact;
            let one_sided = miscalibrated_fidelity(&ch, dphi / 2.0).unwrap();
            prop_assert!(split >= one_sided);
        }

        #[test]
        fn trace_never_increases(dphi in -2.0f64..2.0, dp in 0.0f64..0.99, p in 0.0f64..=1.0) {
            let ch = ParityChannel::with_occupation(0.3, dphi, dp, p).unwrap();
            let sum = completeness(&kraus_operators(&ch).unwrap());
            for i in 0..4 {
                prop_assert!(sum[(i, i)].re <= 1.0 + 1e-15);
            }
            prop_assert!((sum[(3, 3)].re - ch.trace_factor()).abs() < 1e-15);
        }

        #[test]
        fn n_gate_linear_within_ten_percent(frac in 0.01f64..=1.0, n in 1u32..200) {
            let dphi = frac * (0.04 / f64::from(n)).sqrt();
            let f = n_gate_infidelity(&ParityChannel::new(0.0, dphi, 0.0).unwrap(), n).unwrap();
            prop_assert!((f.infidelity_exact() / f.infidelity_linear() - 1.0).abs() < 0.1);
        }
    }
}
