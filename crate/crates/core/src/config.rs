//! TOML run configurations with unit-checked quantities and strict schemas.
//!
//! Every numeric key names its unit (`omega_q2_ghz`, `t1_ref_us`). A value is
//! either a bare number in that unit or a string such as `"4800 MHz"`; strings
//! in another dimension, and angular frequencies given for cyclic keys, are
//! rejected with a unit error.

use std::fmt;
use std::marker::PhantomData;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::circuit::{Betas, CircuitParams, Mode};
use crate::design::leakage::{DragPulse, LeakageTable, TABLE_CHARGING_ENERGIES};
use crate::design::{CircuitSpec, Grid, LeakageModel, ModelKind, NoiseModel};
use crate::dynamics::{CalibrationOptions, Integrator, PropagationSettings};
use crate::error::{Error, Result};
use crate::pulse::FlattopGaussian;
use crate::units::{ghz_to_rad, mhz_to_rad, NS, US};

const UNIT_TAG: &str = "unit mismatch: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Frequency,
    Time,
    Temperature,
}

impl Dimension {
    fn scale(self, unit: &str) -> Option<f64> {
        let table: &[(&str, f64)] = match self {
            Dimension::Frequency => &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9)],
            Dimension::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6), ("ns", 1e-9)],
            Dimension::Temperature => &[("K", 1.0), ("mK", 1e-3)],
        };
        table.iter().find(|(name, _)| *name == unit).map(|(_, s)| *s)
    }

    fn name(self) -> &'static str {
        match self {
            Dimension::Frequency => "frequency",
            Dimension::Time => "time",
            Dimension::Temperature => "temperature",
        }
    }
}

/// Unit implied by a key suffix.
pub trait KeyUnit {
    const SYMBOL: &'static str;
    const DIMENSION: Dimension;
    const SCALE: f64;
}

macro_rules! key_unit {
    ($name:ident, $symbol:literal, $dim:ident, $scale:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name;
        impl KeyUnit for $name {
            const SYMBOL: &'static str = $symbol;
            const DIMENSION: Dimension = Dimension::$dim;
            const SCALE: f64 = $scale;
        }
    };
}

key_unit!(Ghz, "GHz", Frequency, 1e9);
key_unit!(Mhz, "MHz", Frequency, 1e6);
key_unit!(Ns, "ns", Time, 1e-9);
key_unit!(Us, "us", Time, 1e-6);
key_unit!(Mk, "mK", Temperature, 1e-3);

/// A number expressed in the unit named by its key.
#[derive(Clone, Copy, PartialEq)]
pub struct Quantity<U>(pub f64, PhantomData<U>);

impl<U> Quantity<U> {
    pub const fn new(value: f64) -> Self {
        Self(value, PhantomData)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl<U> fmt::Debug for Quantity<U> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl<U> Serialize for Quantity<U> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawQuantity {
    Number(f64),
    Text(String),
}

/// Convert `"<value> <unit>"` into a number in the unit `U`.
pub fn parse_quantity<U: KeyUnit>(text: &str) -> std::result::Result<f64, String> {
    let text = text.trim();
    let split = text.find(|c: char| c.is_whitespace()).unwrap_or(text.len());
    let (number, unit) = (text[..split].trim(), text[split..].trim());
    let value: f64 = number.parse().map_err(|_| format!("cannot read a number from {text:?}"))?;
    if unit.is_empty() {
        return Ok(value);
    }
    if unit.starts_with("rad/") {
        return Err(format!(
            "{UNIT_TAG}{text:?} is an angular frequency but the key expects {} (cyclic); divide by 2π",
            U::SYMBOL
        ));
    }
    match U::DIMENSION.scale(unit) {
        Some(scale) => Ok(value * scale / U::SCALE),
        None => Err(format!(
            "{UNIT_TAG}{text:?} is not a {} (key expects {})",
            U::DIMENSION.name(),
            U::SYMBOL
        )),
    }
}

impl<'de, U: KeyUnit> Deserialize<'de> for Quantity<U> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let value = match RawQuantity::deserialize(d)? {
            RawQuantity::Number(v) => v,
            RawQuantity::Text(t) => parse_quantity::<U>(&t).map_err(serde::de::Error::custom)?,
        };
        if !value.is_finite() {
            return Err(serde::de::Error::custom("quantity must be finite"));
        }
        Ok(Quantity::new(value))
    }
}

/// Parse TOML into `T`, reporting the key path of schema and unit errors.
pub fn from_toml_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().message().trim().to_string();
        classify(&path, &message)
    })
}

/// Parse JSON into `T` with the same error mapping.
pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        classify(&path, &message)
    })
}

fn classify(path: &str, message: &str) -> Error {
    if let Some(rest) = message.strip_prefix(UNIT_TAG) {
        return Error::Unit(format!("at `{path}`: {rest}"));
    }
    let full = match unknown_field(message) {
        Some(field) if path == "." => field.to_string(),
        Some(field) if path == field || path.ends_with(&format!(".{field}")) => path.to_string(),
        Some(field) => format!("{path}.{field}"),
        None => path.to_string(),
    };
    Error::Schema(format!("at `{full}`: {message}"))
}

fn unknown_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_toml_str(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Module records

fn default_charge_cutoff() -> usize {
    crate::spectral::DEFAULT_CHARGE_CUTOFF
}

/// Single transmon for the `spectrum` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonSection {
    pub e_j_ghz: Quantity<Ghz>,
    pub e_c_ghz: Quantity<Ghz>,
    #[serde(default)]
    pub n_g: f64,
    /// Number of levels reported, m = 0 .. levels - 1.
    pub levels: usize,
    #[serde(default = "default_charge_cutoff")]
    pub charge_cutoff: usize,
}

impl Default for TransmonSection {
    fn default() -> Self {
        Self { e_j_ghz: Quantity::new(12.5), e_c_ghz: Quantity::new(0.25), n_g: 0.0, levels: 5, charge_cutoff: 30 }
    }
}

fn default_omega_q2() -> Quantity<Ghz> {
    Quantity::new(4.8)
}
fn default_alpha_c() -> Quantity<Mhz> {
    Quantity::new(-110.0)
}
fn default_levels() -> usize {
    4
}

/// Three-transmon circuit. Exactly one of `alpha_q2_mhz` and `ejec_ratio_q2` fixes qubit 2;
/// qubit 1 follows omega_q2 + alpha_q2 + 10 MHz and alpha_q2 + 10 MHz unless overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    #[serde(default = "default_omega_q2")]
    pub omega_q2_ghz: Quantity<Ghz>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_q2_mhz: Option<Quantity<Mhz>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ejec_ratio_q2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_q1_ghz: Option<Quantity<Ghz>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_q1_mhz: Option<Quantity<Mhz>>,
    #[serde(default = "default_alpha_c")]
    pub alpha_c_mhz: Quantity<Mhz>,
    /// Coupler frequency; the lowest idling point is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c_ghz: Option<Quantity<Ghz>>,
    #[serde(default)]
    pub beta: BetaSection,
    #[serde(default = "default_levels")]
    pub levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSection {
    pub q1c: f64,
    pub q2c: f64,
    pub q1q2: f64,
}

impl Default for BetaSection {
    fn default() -> Self {
        let b = Betas::default();
        Self { q1c: b.q1c, q2c: b.q2c, q1q2: b.q1q2 }
    }
}

impl Default for CircuitSection {
    fn default() -> Self {
        Self {
            omega_q2_ghz: default_omega_q2(),
            alpha_q2_mhz: Some(Quantity::new(-270.0)),
            ejec_ratio_q2: None,
            omega_q1_ghz: None,
            alpha_q1_mhz: None,
            alpha_c_mhz: default_alpha_c(),
            omega_c_ghz: None,
            beta: BetaSection::default(),
            levels: 4,
        }
    }
}

impl CircuitSection {
    /// Circuit parameters; the coupler frequency is left at a nominal value.
    pub fn circuit(&self) -> Result<CircuitParams> {
        let w2 = self.omega_q2_ghz.value();
        let mut c = match (self.alpha_q2_mhz, self.ejec_ratio_q2) {
            (Some(a), None) => CircuitParams::table1_at(w2, a.value()),
            (None, Some(r)) => {
                if !(r > 1.0) {
                    return Err(Error::InvalidParameter(format!("ejec_ratio_q2 = {r} must exceed 1")));
                }
                CircuitParams::for_ratio(r, w2)
            }
            _ => {
                return Err(Error::Configuration(
                    "circuit needs exactly one of alpha_q2_mhz and ejec_ratio_q2".into(),
                ))
            }
        };
        if let Some(w1) = self.omega_q1_ghz {
            c.q1.omega = ghz_to_rad(w1.value());
        }
        if let Some(a1) = self.alpha_q1_mhz {
            c.q1.alpha = mhz_to_rad(a1.value());
        }
        c.coupler = Mode { omega: c.coupler.omega, alpha: mhz_to_rad(self.alpha_c_mhz.value()) };
        c.beta = Betas { q1c: self.beta.q1c, q2c: self.beta.q2c, q1q2: self.beta.q1q2 };
        c.levels = self.levels;
        if let Some(wc) = self.omega_c_ghz {
            c.coupler.omega = ghz_to_rad(wc.value());
        }
        c.validate()?;
        Ok(c)
    }

    /// Circuit with the coupler at `omega_c_ghz` or, if absent, at the lowest idling point.
    pub fn idling_circuit(&self) -> Result<CircuitParams> {
        let c = self.circuit()?;
        if self.omega_c_ghz.is_some() {
            Ok(c)
        } else {
            c.at_idle()
        }
    }
}

/// Coupler-frequency sweep for `zz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub omega_c_min_ghz: Quantity<Ghz>,
    pub omega_c_max_ghz: Quantity<Ghz>,
    pub points: usize,
}

impl SweepSection {
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        let (lo, hi) = (self.omega_c_min_ghz.value(), self.omega_c_max_ghz.value());
        if !(hi > lo && lo > 0.0) || self.points < 2 {
            return Err(Error::InvalidParameter("sweep needs 0 < min < max and at least two points".into()));
        }
        let n = self.points - 1;
        Ok((0..=n).map(|i| ghz_to_rad(lo + (hi - lo) * i as f64 / n as f64)).collect())
    }
}

/// Operating point for the effective model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveSection {
    /// Coupler frequency during the plateau.
    pub omega_c_ghz: Quantity<Ghz>,
    /// Number of |11> <-> |02> Rabi cycles; t_g = 2 pi n / Omega.
    #[serde(default = "one")]
    pub n_rabi: u32,
    #[serde(default)]
    pub n_g: f64,
}

fn one() -> u32 {
    1
}

/// Flattop-Gaussian flux pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub amplitude_ghz: Quantity<Ghz>,
    pub tau_c_ns: Quantity<Ns>,
    #[serde(default = "default_sigma")]
    pub sigma_ns: Quantity<Ns>,
}

fn default_sigma() -> Quantity<Ns> {
    Quantity::new(crate::pulse::DEFAULT_SIGMA / NS)
}

impl PulseSection {
    pub fn pulse(&self) -> Result<FlattopGaussian> {
        FlattopGaussian::new(ghz_to_rad(self.amplitude_ghz.value()), self.sigma_ns.value() * NS, self.tau_c_ns.value() * NS)
    }
}

/// Propagation and parity options shared by both gate subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_dt")]
    pub dt_ns: Quantity<Ns>,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "default_phase")]
    pub target_phase_rad: f64,
    /// Apply the charge-dispersion shifts of all eight parity states.
    #[serde(default = "yes")]
    pub parity_shifts: bool,
    /// Samples of the |11> trajectory written to CSV; 0 disables it.
    #[serde(default)]
    pub trajectory_samples: usize,
}

fn default_dt() -> Quantity<Ns> {
    Quantity::new(0.1)
}
fn default_phase() -> f64 {
    std::f64::consts::PI
}
fn yes() -> bool {
    true
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            dt_ns: default_dt(),
            integrator: Integrator::default(),
            target_phase_rad: default_phase(),
            parity_shifts: true,
            trajectory_samples: 0,
        }
    }
}

impl SimulationSection {
    pub fn settings(&self) -> Result<PropagationSettings> {
        let dt = self.dt_ns.value() * NS;
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("dt_ns must be positive".into()));
        }
        Ok(PropagationSettings { dt, integrator: self.integrator })
    }
}

/// Search window of `gate calibrate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub amplitude_min_ghz: Quantity<Ghz>,
    pub amplitude_max_ghz: Quantity<Ghz>,
    pub tau_c_min_ns: Quantity<Ns>,
    pub tau_c_max_ns: Quantity<Ns>,
    pub sigma_ns: Quantity<Ns>,
    pub grid_amplitude: usize,
    pub grid_tau_c: usize,
    pub tolerance: f64,
    pub max_iterations: u64,
    pub max_infidelity: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        let o = CalibrationOptions::default();
        Self {
            amplitude_min_ghz: Quantity::new(o.amplitude_ghz.0),
            amplitude_max_ghz: Quantity::new(o.amplitude_ghz.1),
            tau_c_min_ns: Quantity::new(o.tau_c_ns.0),
            tau_c_max_ns: Quantity::new(o.tau_c_ns.1),
            sigma_ns: Quantity::new(o.sigma / NS),
            grid_amplitude: o.grid.0,
            grid_tau_c: o.grid.1,
            tolerance: o.tolerance,
            max_iterations: o.max_iters,
            max_infidelity: o.max_infidelity,
        }
    }
}

impl CalibrationSection {
    pub fn options(&self, settings: PropagationSettings) -> Result<CalibrationOptions> {
        if self.grid_amplitude < 2 || self.grid_tau_c < 2 {
            return Err(Error::InvalidParameter("calibration grid needs at least 2 x 2 points".into()));
        }
        Ok(CalibrationOptions {
            sigma: self.sigma_ns.value() * NS,
            amplitude_ghz: (self.amplitude_min_ghz.value(), self.amplitude_max_ghz.value()),
            tau_c_ns: (self.tau_c_min_ns.value(), self.tau_c_max_ns.value()),
            grid: (self.grid_amplitude, self.grid_tau_c),
            tolerance: self.tolerance,
            max_iters: self.max_iterations,
            max_infidelity: self.max_infidelity,
            settings,
            ..CalibrationOptions::default()
        })
    }
}

/// Channel parameters; the CLI flags override these keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default = "default_phase")]
    pub phi0_rad: f64,
    #[serde(default)]
    pub delta_phi_rad: f64,
    #[serde(default)]
    pub delta_p11: f64,
    #[serde(default = "half")]
    pub p_plus: f64,
    #[serde(default = "one")]
    pub n_gates: u32,
    /// Haar samples for the Monte-Carlo cross-check; 0 skips it.
    #[serde(default)]
    pub haar_samples: usize,
}

fn half() -> f64 {
    0.5
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self { phi0_rad: default_phase(), delta_phi_rad: 0.0, delta_p11: 0.0, p_plus: 0.5, n_gates: 1, haar_samples: 0 }
    }
}

/// Leakage model choice for the design metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum LeakageSection {
    PowerLaw { gamma: f64, reference_ec_ghz: Quantity<Ghz>, reference_leakage: f64 },
    /// Explicit (E_C in GHz, leakage) pairs.
    Table { ec_ghz: Vec<f64>, leakage: Vec<f64> },
    /// Table from DRAG simulations at the default charging energies.
    Simulated,
}

impl Default for LeakageSection {
    fn default() -> Self {
        match LeakageModel::default() {
            LeakageModel::PowerLaw { gamma, reference_ec, reference_leakage } => {
                LeakageSection::PowerLaw { gamma, reference_ec_ghz: Quantity::new(reference_ec), reference_leakage }
            }
            LeakageModel::Table(_) => LeakageSection::Simulated,
        }
    }
}

impl LeakageSection {
    pub fn model(&self) -> Result<LeakageModel> {
        let model = match self {
            LeakageSection::PowerLaw { gamma, reference_ec_ghz, reference_leakage } => LeakageModel::PowerLaw {
                gamma: *gamma,
                reference_ec: reference_ec_ghz.value(),
                reference_leakage: *reference_leakage,
            },
            LeakageSection::Table { ec_ghz, leakage } => {
                if ec_ghz.len() != leakage.len() {
                    return Err(Error::Configuration("leakage table columns differ in length".into()));
                }
                LeakageModel::Table(LeakageTable::new(ec_ghz.iter().copied().zip(leakage.iter().copied()).collect())?)
            }
            LeakageSection::Simulated => {
                LeakageModel::Table(LeakageTable::simulate(&TABLE_CHARGING_ENERGIES, &DragPulse::default())?)
            }
        };
        model.validate()?;
        Ok(model)
    }
}

fn default_t_sqg() -> Quantity<Ns> {
    Quantity::new(16.0)
}
fn default_t_tqg() -> Quantity<Ns> {
    Quantity::new(50.0)
}

/// Reference circuit of the performance metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpecSection {
    #[serde(default = "default_t_sqg")]
    pub t_sqg_ns: Quantity<Ns>,
    #[serde(default = "default_t_tqg")]
    pub t_tqg_ns: Quantity<Ns>,
}

impl Default for CircuitSpecSection {
    fn default() -> Self {
        Self { t_sqg_ns: default_t_sqg(), t_tqg_ns: default_t_tqg() }
    }
}

impl CircuitSpecSection {
    pub fn spec(&self) -> Result<CircuitSpec> {
        let spec = CircuitSpec { t_sqg: self.t_sqg_ns.value() * NS, t_tqg: self.t_tqg_ns.value() * NS, ..CircuitSpec::default() };
        spec.validate()?;
        Ok(spec)
    }
}

fn default_temperature() -> Quantity<Mk> {
    Quantity::new(50.0)
}
fn default_ref_ej() -> Quantity<Ghz> {
    Quantity::new(12.0)
}
fn default_ref_ec() -> Quantity<Ghz> {
    Quantity::new(0.2)
}
fn default_percentile() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub ej_min: Quantity<Ghz>,
    pub ej_max: Quantity<Ghz>,
    pub ec_min: Quantity<Ghz>,
    pub ec_max: Quantity<Ghz>,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = Grid::default();
        Self {
            ej_min: Quantity::new(g.ej_min),
            ej_max: Quantity::new(g.ej_max),
            ec_min: Quantity::new(g.ec_min),
            ec_max: Quantity::new(g.ec_max),
            n: g.n,
        }
    }
}

impl GridSection {
    pub fn grid(&self) -> Result<Grid> {
        let g = Grid {
            ej_min: self.ej_min.value(),
            ej_max: self.ej_max.value(),
            ec_min: self.ec_min.value(),
            ec_max: self.ec_max.value(),
            n: self.n,
        };
        g.validate()?;
        Ok(g)
    }
}

/// Noise model and scan settings; the whole `landscape` config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    #[serde(default)]
    pub seed: u64,
    pub t1_ref_us: Quantity<Us>,
    pub tphi_ref_us: Quantity<Us>,
    #[serde(default = "default_ref_ej")]
    pub ref_ej_ghz: Quantity<Ghz>,
    #[serde(default = "default_ref_ec")]
    pub ref_ec_ghz: Quantity<Ghz>,
    #[serde(default = "default_temperature")]
    pub temperature_mk: Quantity<Mk>,
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default = "default_percentile")]
    pub percentile: f64,
    #[serde(default)]
    pub circuit: CircuitSpecSection,
    #[serde(default)]
    pub leakage: LeakageSection,
    /// Also run the density-matrix simulation on every cell.
    #[serde(default)]
    pub density_oracle: bool,
}

impl DesignSection {
    pub fn model(&self) -> Result<NoiseModel> {
        let model = NoiseModel {
            t1_ref: self.t1_ref_us.value() * US,
            tphi_ref: self.tphi_ref_us.value() * US,
            ref_ej: self.ref_ej_ghz.value(),
            ref_ec: self.ref_ec_ghz.value(),
            temperature: self.temperature_mk.value() * 1e-3,
            leakage: self.leakage.model()?,
            ..NoiseModel::reference(self.t1_ref_us.value() * US)
        }
        .with_kind(self.model);
        model.validate()?;
        Ok(model)
    }
}

/// Measured device for `optimize-step`, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredSection {
    pub t1_us: Quantity<Us>,
    pub tphi_us: Quantity<Us>,
    #[serde(default = "default_temperature")]
    pub temperature_mk: Quantity<Mk>,
    pub ej_ghz: Quantity<Ghz>,
    pub ec_ghz: Quantity<Ghz>,
}

// ---------------------------------------------------------------------------
// Subcommand configs

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub transmon: TransmonSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZzConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub circuit: CircuitSection,
    pub sweep: SweepSection,
}

/// Shared by `idle` and `parity-zz`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub circuit: CircuitSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub circuit: CircuitSection,
    pub operating_point: EffectiveSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSimulateConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub circuit: CircuitSection,
    pub pulse: PulseSection,
    #[serde(default)]
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateCalibrateConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub circuit: CircuitSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub channel: ChannelSection,
}

pub type LandscapeConfig = DesignSection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    #[serde(default)]
    pub seed: u64,
    pub design: DesignSection,
    /// Measured device; may instead be given as a separate JSON file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<MeasuredSection>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantities_accept_numbers_and_unit_strings() {
        assert!((parse_quantity::<Ghz>("4800 MHz").unwrap() - 4.8).abs() < 1e-15);
        assert!((parse_quantity::<Ns>("0.05 us").unwrap() - 50.0).abs() < 1e-12);
        assert!((parse_quantity::<Mk>("0.05 K").unwrap() - 50.0).abs() < 1e-12);
        assert_eq!(parse_quantity::<Ghz>("4.8").unwrap(), 4.8);
    }

    #[test]
    fn angular_frequency_is_a_unit_error() {
        let e = from_toml_str::<CircuitConfig>("[circuit]\nomega_q2_ghz = \"3.0e10 rad/s\"\nalpha_q2_mhz = -270\n");
        match e {
            Err(Error::Unit(msg)) => assert!(msg.contains("circuit.omega_q2_ghz"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let e = from_toml_str::<CircuitConfig>("[circuit]\nomega_q2_ghz = \"5 ns\"\nalpha_q2_mhz = -270\n");
        assert!(matches!(e, Err(Error::Unit(_))));
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let e = from_toml_str::<LandscapeConfig>("t1_ref_us = 50\ntphi_ref_us = 50\n[grid]\nej_min = 4\nej_max = 40\nec_min = 0.1\nec_max = 0.5\nn = 10\nnn = 3\n");
        match e {
            Err(Error::Schema(msg)) => assert!(msg.contains("grid.nn"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn circuit_needs_one_qubit_two_source() {
        let mut s = CircuitSection::default();
        s.ejec_ratio_q2 = Some(50.0);
        assert!(matches!(s.circuit(), Err(Error::Configuration(_))));
        s.alpha_q2_mhz = None;
        let c = s.circuit().unwrap();
        assert_eq!(c, CircuitParams::for_ratio(50.0, 4.8).with_levels(4));
    }

    #[test]
    fn default_circuit_is_table1() {
        let c = CircuitSection::default().circuit().unwrap();
        assert_eq!(c, CircuitParams::table1(-270.0));
    }

    #[test]
    fn serialized_config_reparses_identically() {
        let text = "t1_ref_us = \"0.15 ms\"\ntphi_ref_us = 150\nmodel = \"advanced\"\n[leakage]\nmode = \"table\"\nec_ghz = [0.1, 0.3]\nleakage = [1e-4, 1e-6]\n";
        let cfg: LandscapeConfig = from_toml_str(text).unwrap();
        assert_eq!(cfg.t1_ref_us.value(), 150.0);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: LandscapeConfig = from_json_str(&json).unwrap();
        assert_eq!(back, cfg);
        let toml_text = toml::to_string(&cfg).unwrap();
        assert_eq!(from_toml_str::<LandscapeConfig>(&toml_text).unwrap(), cfg);
    }
}
