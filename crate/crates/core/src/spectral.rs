//! Single-transmon spectra in the charge basis, charge dispersion and the
//! parity-split Duffing model.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{ghz_to_rad, TWO_PI};

pub const DEFAULT_CHARGE_CUTOFF: usize = 30;
pub const MIN_CHARGE_CUTOFF: usize = 20;

/// Charge parity of the junction, entering the Hamiltonian as the offset (P - 1)/4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub const BOTH: [Parity; 2] = [Parity::Even, Parity::Odd];

    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flipped(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

impl TryFrom<i32> for Parity {
    type Error = Error;
    fn try_from(p: i32) -> Result<Self> {
        match p {
            1 => Ok(Parity::Even),
            -1 => Ok(Parity::Odd),
            other => Err(Error::InvalidParameter(format!("parity must be +1 or -1, got {other}"))),
        }
    }
}

impl From<Parity> for i32 {
    fn from(p: Parity) -> i32 {
        match p {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }
}

/// One transmon: Josephson and charging energy (GHz), offset charge and parity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    pub e_j: f64,
    pub e_c: f64,
    pub n_g: f64,
    pub parity: Parity,
}

impl TransmonParams {
    /// Validates the energies and reduces `n_g` modulo 1.
    pub fn new(e_j: f64, e_c: f64, n_g: f64, parity: Parity) -> Result<Self> {
        if !(e_j > 0.0 && e_c > 0.0) || !e_j.is_finite() || !e_c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "energies must be positive and finite (E_J = {e_j}, E_C = {e_c})"
            )));
        }
        if !n_g.is_finite() {
            return Err(Error::InvalidParameter("offset charge must be finite".into()));
        }
        Ok(Self { e_j, e_c, n_g: n_g.rem_euclid(1.0), parity })
    }

    pub fn ratio(&self) -> f64 {
        self.e_j / self.e_c
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }

    pub fn with_offset(mut self, n_g: f64) -> Self {
        self.n_g = n_g.rem_euclid(1.0);
        self
    }
}

/// Sorted eigenenergies (GHz) of the charge-basis Hamiltonian.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransmonSpectrum {
    pub levels: Vec<f64>,
    pub params: TransmonParams,
    pub charge_cutoff: usize,
}

impl TransmonSpectrum {
    /// E_m - E_0 in GHz.
    pub fn transition(&self, m: usize) -> f64 {
        self.levels[m] - self.levels[0]
    }
}

/// Duffing oscillator parameters in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuffingParams {
    pub omega: f64,
    pub alpha: f64,
    pub delta_omega: f64,
    pub delta_alpha: f64,
}

/// Source of the charge dispersion used for the parity shift of the anharmonicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DispersionMode {
    #[default]
    Asymptotic,
    Exact,
}

fn charge_matrix(params: &TransmonParams, charge_cutoff: usize) -> DMatrix<f64> {
    let dim = 2 * charge_cutoff + 1;
    let offset = params.n_g - (params.parity.sign() - 1.0) / 4.0;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        let n = i as f64 - charge_cutoff as f64;
        let q = n - offset;
        h[(i, i)] = 4.0 * params.e_c * q * q;
        if i + 1 < dim {
            h[(i, i + 1)] = -params.e_j / 2.0;
            h[(i + 1, i)] = -params.e_j / 2.0;
        }
    }
    h
}

/// Lowest `n_levels` eigenenergies of 4E_C(n - n_g + (P-1)/4)^2 - E_J cos(phi)
/// on the charge states n in [-cutoff, cutoff].
pub fn diagonalize_charge_basis(
    params: &TransmonParams,
    n_levels: usize,
    charge_cutoff: usize,
) -> Result<TransmonSpectrum> {
    if !(params.e_j > 0.0 && params.e_c > 0.0) {
        return Err(Error::InvalidParameter("energies must be positive".into()));
    }
    if charge_cutoff < MIN_CHARGE_CUTOFF {
        return Err(Error::Configuration(format!(
            "charge_cutoff must be at least {MIN_CHARGE_CUTOFF}, got {charge_cutoff}"
        )));
    }
    if n_levels == 0 || n_levels > 2 * charge_cutoff - 2 {
        return Err(Error::Configuration(format!(
            "n_levels = {n_levels} not supported by charge_cutoff = {charge_cutoff}"
        )));
    }
    let eig = SymmetricEigen::new(charge_matrix(params, charge_cutoff));
    let mut levels: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    levels.truncate(n_levels);
    Ok(TransmonSpectrum { levels, params: *params, charge_cutoff })
}

/// Spectrum plus the largest relative change of E_0..E_4 when the cutoff grows by 10.
pub fn diagonalize_checked(
    params: &TransmonParams,
    n_levels: usize,
    charge_cutoff: usize,
) -> Result<(TransmonSpectrum, f64)> {
    let spec = diagonalize_charge_basis(params, n_levels, charge_cutoff)?;
    let wider = diagonalize_charge_basis(params, n_levels, charge_cutoff + 10)?;
    let drift = spec
        .levels
        .iter()
        .zip(&wider.levels)
        .take(5)
        .map(|(a, b)| ((a - b) / b.abs().max(1e-300)).abs())
        .fold(0.0, f64::max);
    Ok((spec, drift))
}

/// Exact charge dispersion E_m(P=-1) - E_m(P=+1) at n_g = 0, in GHz.
///
/// This sign convention reproduces the (-1)^m sign of the asymptotic formula.
pub fn charge_dispersion_exact(e_j: f64, e_c: f64, m: usize, charge_cutoff: usize) -> Result<f64> {
    let even = TransmonParams::new(e_j, e_c, 0.0, Parity::Even)?;
    let n = (m + 1).max(2);
    let plus = diagonalize_charge_basis(&even, n, charge_cutoff)?;
    let minus = diagonalize_charge_basis(&even.with_parity(Parity::Odd), n, charge_cutoff)?;
    Ok(minus.levels[m] - plus.levels[m])
}

/// Same quantity from the offset-charge path: E_m(n_g = 1/2) - E_m(n_g = 0) at fixed parity.
pub fn charge_dispersion_exact_offset(e_j: f64, e_c: f64, m: usize, charge_cutoff: usize) -> Result<f64> {
    let base = TransmonParams::new(e_j, e_c, 0.0, Parity::Even)?;
    let n = (m + 1).max(2);
    let zero = diagonalize_charge_basis(&base, n, charge_cutoff)?;
    let half = diagonalize_charge_basis(&base.with_offset(0.5), n, charge_cutoff)?;
    Ok(half.levels[m] - zero.levels[m])
}

/// Asymptotic charge dispersion of level m in GHz, including the (-1)^m sign.
pub fn charge_dispersion_asymptotic(e_j: f64, e_c: f64, m: u32) -> Result<f64> {
    if !(e_j > 0.0 && e_c > 0.0) {
        return Err(Error::InvalidParameter("energies must be positive".into()));
    }
    let r = e_j / e_c;
    if r < 1.0 {
        return Err(Error::Domain(format!("E_J/E_C = {r} < 1: asymptotic dispersion undefined")));
    }
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let factorial: f64 = (1..=m).map(f64::from).product();
    let power = 2f64.powi(4 * m as i32 + 5);
    Ok(sign
        * e_c
        * power
        / factorial
        * (2.0 / std::f64::consts::PI).sqrt()
        * (r / 2.0).powf(m as f64 / 2.0 + 0.75)
        * (-(8.0 * r).sqrt()).exp())
}

/// Second-level dispersion in GHz using the requested mode.
pub fn eps2(e_j: f64, e_c: f64, mode: DispersionMode) -> Result<f64> {
    match mode {
        DispersionMode::Asymptotic => charge_dispersion_asymptotic(e_j, e_c, 2),
        DispersionMode::Exact => charge_dispersion_exact(e_j, e_c, 2, DEFAULT_CHARGE_CUTOFF),
    }
}

/// Parity-split Duffing parameters. delta_omega is zero by construction.
pub fn duffing_parameters(params: &TransmonParams, mode: DispersionMode) -> Result<DuffingParams> {
    let e2 = eps2(params.e_j, params.e_c, mode)?;
    let omega_ghz = (8.0 * params.e_j * params.e_c).sqrt() - params.e_c;
    Ok(DuffingParams {
        omega: ghz_to_rad(omega_ghz),
        alpha: ghz_to_rad(-params.e_c),
        delta_omega: 0.0,
        delta_alpha: params.parity.sign() * ghz_to_rad(e2) * (TWO_PI * params.n_g).cos() / 2.0,
    })
}

/// Transmon frequency (GHz) of the asymptotic Duffing model.
pub fn duffing_frequency_ghz(e_j: f64, e_c: f64) -> f64 {
    (8.0 * e_j * e_c).sqrt() - e_c
}

/// Josephson energy (GHz) that places a transmon with charging energy `e_c` at `omega_ghz`.
pub fn josephson_for_frequency(omega_ghz: f64, e_c: f64) -> f64 {
    (omega_ghz + e_c).powi(2) / (8.0 * e_c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tp(r: f64, ec: f64, ng: f64, p: Parity) -> TransmonParams {
        TransmonParams::new(r * ec, ec, ng, p).unwrap()
    }

    #[test]
    fn levels_sorted_and_converged() {
        let p = tp(50.0, 0.25, 0.1, Parity::Even);
        let (s, drift) = diagonalize_checked(&p, 6, DEFAULT_CHARGE_CUTOFF).unwrap();
        assert!(s.levels.windows(2).all(|w| w[1] > w[0]));
        assert!(drift < 1e-10, "drift {drift}");
    }

    #[test]
    fn quarter_offset_kills_splitting() {
        let p = tp(50.0, 0.25, 0.25, Parity::Even);
        let a = diagonalize_charge_basis(&p, 4, 30).unwrap();
        let b = diagonalize_charge_basis(&p.with_parity(Parity::Odd), 4, 30).unwrap();
        for m in 0..4 {
            assert!((a.levels[m] - b.levels[m]).abs() < 1e-12, "m = {m}");
        }
    }

    #[test]
    fn both_exact_paths_agree() {
        for m in 0..4 {
            let a = charge_dispersion_exact(12.5, 0.25, m, 30).unwrap();
            let b = charge_dispersion_exact_offset(12.5, 0.25, m, 30).unwrap();
            assert!((a - b).abs() < 1e-12, "m = {m}: {a} vs {b}");
        }
    }

    #[test]
    fn exact_sign_alternates() {
        for m in 0..4 {
            let e = charge_dispersion_exact(12.5, 0.25, m, 30).unwrap();
            assert_eq!(e > 0.0, m % 2 == 0, "m = {m}, eps = {e}");
            let a = charge_dispersion_asymptotic(12.5, 0.25, m as u32).unwrap();
            assert_eq!(a > 0.0, m % 2 == 0);
        }
    }

    #[test]
    fn splitting_follows_cosine() {
        let (ej, ec) = (45.0 * 0.2, 0.2);
        let eps = charge_dispersion_exact(ej, ec, 2, 30).unwrap();
        for ng in [0.0, 0.1, 0.2, 0.35, 0.45] {
            let p = tp(45.0, ec, ng, Parity::Even);
            let plus = diagonalize_charge_basis(&p, 3, 30).unwrap();
            let minus = diagonalize_charge_basis(&p.with_parity(Parity::Odd), 3, 30).unwrap();
            let split = minus.levels[2] - plus.levels[2];
            let model = eps * (TWO_PI * ng).cos();
            assert!((split - model).abs() <= 0.05 * eps.abs(), "ng = {ng}");
        }
    }

    #[test]
    fn ratio_of_dispersions_near_forty() {
        let r = charge_dispersion_asymptotic(50.0, 1.0, 2).unwrap()
            / charge_dispersion_asymptotic(50.0, 1.0, 1).unwrap();
        assert!((r.abs() - 40.0).abs() < 1e-9);
    }

    #[test]
    fn second_level_dispersion_is_a_few_hundred_khz() {
        let e_c = 0.27;
        let exact_khz = charge_dispersion_exact(50.0 * e_c, e_c, 2, DEFAULT_CHARGE_CUTOFF).unwrap() * 1e6;
        assert!((125.0..=500.0).contains(&exact_khz), "{exact_khz}");
        let asymptotic_khz = charge_dispersion_asymptotic(50.0 * e_c, e_c, 2).unwrap() * 1e6;
        assert!(asymptotic_khz > exact_khz && asymptotic_khz < 2.0 * exact_khz);
    }

    #[test]
    fn reference_duffing_point() {
        let p = TransmonParams::new(12.0, 0.2, 0.0, Parity::Even).unwrap();
        let d = duffing_parameters(&p, DispersionMode::Asymptotic).unwrap();
        assert!((d.omega / ghz_to_rad(1.0) - (19.2f64.sqrt() - 0.2)).abs() < 1e-12);
        assert!((d.alpha / ghz_to_rad(1.0) + 0.2).abs() < 1e-12);
        assert_eq!(d.delta_omega, 0.0);
    }

    #[test]
    fn delta_alpha_flips_and_vanishes() {
        let p = tp(50.0, 0.25, 0.1, Parity::Even);
        let a = duffing_parameters(&p, DispersionMode::Asymptotic).unwrap();
        let b = duffing_parameters(&p.with_parity(Parity::Odd), DispersionMode::Asymptotic).unwrap();
        assert_eq!(a.delta_alpha, -b.delta_alpha);
        let q = duffing_parameters(&p.with_offset(0.25), DispersionMode::Asymptotic).unwrap();
        assert!(q.delta_alpha.abs() < 1e-9 * a.delta_alpha.abs().max(1.0));
    }

    #[test]
    fn errors() {
        assert!(TransmonParams::new(-1.0, 0.2, 0.0, Parity::Even).is_err());
        let p = tp(50.0, 0.2, 0.0, Parity::Even);
        assert!(matches!(diagonalize_charge_basis(&p, 4, 10), Err(Error::Configuration(_))));
        assert!(matches!(diagonalize_charge_basis(&p, 59, 30), Err(Error::Configuration(_))));
        assert!(matches!(charge_dispersion_asymptotic(0.5, 1.0, 2), Err(Error::Domain(_))));
        assert!(Parity::try_from(0).is_err());
    }

    proptest! {
        #[test]
        fn periodic_in_offset(ng in 0.0f64..1.0, r in 20.0f64..80.0) {
            let p = tp(r, 0.25, ng, Parity::Odd);
            let a = diagonalize_charge_basis(&p, 4, 30).unwrap();
            let shifted = TransmonParams { n_g: ng + 1.0, ..p };
            let b = diagonalize_charge_basis(&shifted, 4, 30).unwrap();
            for m in 0..4 {
                prop_assert!((a.levels[m] - b.levels[m]).abs() < 1e-9);
            }
        }

        #[test]
        fn symmetric_in_offset(ng in 0.0f64..0.5, r in 20.0f64..80.0) {
            let p = tp(r, 0.25, ng, Parity::Even);
            let a = diagonalize_charge_basis(&p, 4, 30).unwrap();
            let b = diagonalize_charge_basis(&p.with_offset(-ng), 4, 30).unwrap();
            for m in 0..4 {
                prop_assert!((a.levels[m] - b.levels[m]).abs() < 1e-9);
            }
        }
    }
}
