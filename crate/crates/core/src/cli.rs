//! Command-line dispatch: configuration loading, module calls, file output and run manifests.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::channel::{
    channel_fidelity, cphase, haar_average_fidelity, kraus_operators, n_gate_infidelity, ParityChannel,
};
use crate::circuit::{
    find_idling_frequency, parity_zz_spread, state_index, zz_perturbative, zz_rate, CircuitParams, Dispersion, Label,
};
use crate::config::*;
use crate::design::{
    landscape_scan, mask_overlap, optimal_mask, optimize_loop, simulate_reference_circuit, ErrorSource, Landscape,
    MeasuredCoherence, MetricBreakdown,
};
use crate::dynamics::{calibrate_pulse, gate_dispersions, parity_averaged_gate_analysis, propagate_with, ParityAnalysis};
use crate::effective::{
    effective_gate, leakage_susceptibility, phase_susceptibility, swt_parameters, validate_assumptions,
    SusceptibilityMode,
};
use crate::error::{Error, Result};
use crate::pulse::FlattopGaussian;
use crate::spectral::{
    charge_dispersion_asymptotic, charge_dispersion_exact, diagonalize_checked, Parity, TransmonParams,
};
use crate::units::{ghz_to_rad, rad_to_ghz, rad_to_hz, rad_to_khz, NS, US};

/// Environment variable setting the worker-thread count of parallel scans.
pub const WORKERS_ENV: &str = "TPARITY_WORKERS";
pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "transmon-parity", version, about = "Charge-parity switching errors in tunable-coupler transmon gates")]
pub struct Cli {
    /// Output directory; created if missing.
    #[arg(short, long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for stochastic estimates; overrides the config value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Charge-basis spectrum and dispersions of one transmon (CSV).
    Spectrum(TableArgs),
    /// Exact and perturbative ZZ over a coupler sweep (CSV).
    Zz(TableArgs),
    /// Coupler idling frequencies (JSON).
    Idle(ConfigArgs),
    /// Parity-resolved residual ZZ at the idling point (JSON).
    ParityZz(ConfigArgs),
    /// Effective two-level model, susceptibilities and assumption checks (JSON).
    Effective(ConfigArgs),
    /// Time-domain CZ gate simulation and calibration.
    #[command(subcommand)]
    Gate(GateCommand),
    /// Parity Kraus-channel fidelities (JSON).
    Channel(ChannelArgs),
    /// Performance-metric landscape over (E_J, E_C) (CSV).
    Landscape(TableArgs),
    /// One iteration of the design loop from measured coherence (JSON).
    OptimizeStep(OptimizeArgs),
    /// Check a configuration against a subcommand schema without running it.
    Validate(ValidateArgs),
}

#[derive(Debug, Subcommand)]
pub enum GateCommand {
    /// Simulate a given pulse for all eight parity states.
    Simulate(ConfigArgs),
    /// Optimise the pulse amplitude and plateau length.
    Calibrate(ConfigArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(short, long)]
    pub config: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ChannelArgs {
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta_phi: Option<f64>,
    #[arg(long)]
    pub delta_p11: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi0: Option<f64>,
    /// Number of consecutive gates.
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub p_plus: Option<f64>,
    /// Haar samples for a Monte-Carlo cross-check.
    #[arg(long)]
    pub haar_samples: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[arg(short, long)]
    pub config: PathBuf,
    /// Measured coherence JSON: {t1_us, tphi_us, temperature_mk, ej_ghz, ec_ghz}.
    #[arg(short, long)]
    pub measured: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Spectrum,
    Zz,
    Idle,
    ParityZz,
    Effective,
    GateSimulate,
    GateCalibrate,
    Channel,
    Landscape,
    OptimizeStep,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(value_enum)]
    pub kind: Kind,
    #[arg(short, long)]
    pub config: PathBuf,
}

/// Record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub config: Value,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

/// Files written by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub manifest: Manifest,
    pub files: Vec<PathBuf>,
}

enum Output {
    Table { name: String, header: Vec<String>, rows: Vec<Vec<Cell>> },
    Json { name: String, value: Value },
}

#[derive(Debug, Clone)]
enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) if x.is_finite() => json!(x),
            Cell::Float(_) => Value::Null,
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }
}

struct Run {
    subcommand: String,
    seed: u64,
    config: Value,
    outputs: Vec<Output>,
    warnings: Vec<String>,
}

impl Run {
    fn new<C: Serialize>(subcommand: &str, seed: u64, config: &C) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(|e| Error::Internal(e.to_string()))?;
        Ok(Self { subcommand: subcommand.into(), seed, config, outputs: Vec::new(), warnings: Vec::new() })
    }

    fn json(&mut self, name: &str, value: Value) {
        self.outputs.push(Output::Json { name: name.into(), value });
    }

    fn table(&mut self, name: &str, header: &[&str], rows: Vec<Vec<Cell>>, format: Format) {
        let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        match format {
            Format::Csv => self.outputs.push(Output::Table { name: format!("{name}.csv"), header, rows }),
            Format::Json => {
                let records: Vec<Value> = rows
                    .iter()
                    .map(|r| Value::Object(header.iter().cloned().zip(r.iter().map(Cell::json)).collect()))
                    .collect();
                self.json(&format!("{name}.json"), Value::Array(records));
            }
        }
    }
}

/// Something with a `seed` key.
trait Seeded {
    fn seed_mut(&mut self) -> &mut u64;
}

macro_rules! seeded {
    ($($t:ty),*) => {$(impl Seeded for $t { fn seed_mut(&mut self) -> &mut u64 { &mut self.seed } })*};
}
seeded!(
    SpectrumConfig,
    ZzConfig,
    CircuitConfig,
    EffectiveConfig,
    GateSimulateConfig,
    GateCalibrateConfig,
    ChannelConfig,
    DesignSection,
    OptimizeConfig
);

/// Read a TOML config, or the `config` record of a manifest written by `subcommand`.
pub fn load_config<T: DeserializeOwned>(path: &Path, subcommand: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Schema(format!("manifest: {e}")))?;
        if manifest.subcommand != subcommand {
            return Err(Error::Configuration(format!(
                "manifest was written by `{}`, not `{subcommand}`",
                manifest.subcommand
            )));
        }
        return from_json_str(&manifest.config.to_string());
    }
    from_toml_str(&text)
}

fn load_seeded<T: DeserializeOwned + Seeded>(path: Option<&Path>, name: &str, seed: Option<u64>, fallback: impl FnOnce() -> Result<T>) -> Result<T> {
    let mut cfg = match path {
        Some(p) => load_config(p, name)?,
        None => fallback()?,
    };
    if let Some(s) = seed {
        *cfg.seed_mut() = s;
    }
    Ok(cfg)
}

fn required<T>(name: &str) -> impl FnOnce() -> Result<T> + '_ {
    move || Err(Error::Configuration(format!("`{name}` needs --config")))
}

/// Configure the global thread pool from `TPARITY_WORKERS`.
pub fn init_workers() -> Result<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let workers: usize = value
        .trim()
        .parse()
        .map_err(|_| Error::Configuration(format!("{WORKERS_ENV}={value:?} is not a worker count")))?;
    if workers == 0 {
        return Err(Error::Configuration(format!("{WORKERS_ENV} must be positive")));
    }
    // a pool built earlier in the process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    Ok(())
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = init_workers().and_then(|_| run(&cli));
    match result {
        Ok(summary) => {
            for w in &summary.manifest.warnings {
                eprintln!("warning: {w}");
            }
            for f in &summary.files {
                eprintln!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Execute one command and write its files.
pub fn run(cli: &Cli) -> Result<RunSummary> {
    let run = dispatch(&cli.command, cli.seed)?;
    write_run(&cli.out, run)
}

fn dispatch(command: &Command, seed: Option<u64>) -> Result<Run> {
    match command {
        Command::Spectrum(a) => {
            let cfg = load_seeded(a.config.as_deref(), "spectrum", seed, || Ok(SpectrumConfig::default()))?;
            spectrum(&cfg, a.format)
        }
        Command::Zz(a) => {
            let cfg: ZzConfig = load_seeded(a.config.as_deref(), "zz", seed, required("zz"))?;
            zz(&cfg, a.format)
        }
        Command::Idle(a) => idle(&load_seeded(Some(&a.config), "idle", seed, required("idle"))?),
        Command::ParityZz(a) => parity_zz(&load_seeded(Some(&a.config), "parity-zz", seed, required("parity-zz"))?),
        Command::Effective(a) => effective(&load_seeded(Some(&a.config), "effective", seed, required("effective"))?),
        Command::Gate(GateCommand::Simulate(a)) => {
            gate_simulate(&load_seeded(Some(&a.config), "gate simulate", seed, required("gate simulate"))?)
        }
        Command::Gate(GateCommand::Calibrate(a)) => {
            gate_calibrate(&load_seeded(Some(&a.config), "gate calibrate", seed, required("gate calibrate"))?)
        }
        Command::Channel(a) => {
            let mut cfg: ChannelConfig = load_seeded(a.config.as_deref(), "channel", seed, || Ok(ChannelConfig::default()))?;
            let ch = &mut cfg.channel;
            ch.delta_phi_rad = a.delta_phi.unwrap_or(ch.delta_phi_rad);
            ch.delta_p11 = a.delta_p11.unwrap_or(ch.delta_p11);
            ch.phi0_rad = a.phi0.unwrap_or(ch.phi0_rad);
            ch.n_gates = a.n.unwrap_or(ch.n_gates);
            ch.p_plus = a.p_plus.unwrap_or(ch.p_plus);
            ch.haar_samples = a.haar_samples.unwrap_or(ch.haar_samples);
            channel(&cfg)
        }
        Command::Landscape(a) => {
            let cfg: LandscapeConfig = load_seeded(a.config.as_deref(), "landscape", seed, required("landscape"))?;
            landscape(&cfg, a.format)
        }
        Command::OptimizeStep(a) => {
            let mut cfg: OptimizeConfig = load_seeded(Some(&a.config), "optimize-step", seed, required("optimize-step"))?;
            if let Some(path) = &a.measured {
                cfg.measured = Some(from_json_str(&std::fs::read_to_string(path)?)?);
            }
            optimize_step(&cfg)
        }
        Command::Validate(a) => validate(a.kind, &a.config, seed),
    }
}

fn write_run(dir: &Path, run: Run) -> Result<RunSummary> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut names = Vec::new();
    for out in &run.outputs {
        let (name, bytes) = match out {
            Output::Json { name, value } => (name.clone(), pretty(value)?),
            Output::Table { name, header, rows } => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(header).map_err(csv_error)?;
                for r in rows {
                    w.write_record(r.iter().map(Cell::csv)).map_err(csv_error)?;
                }
                (name.clone(), w.into_inner().map_err(|e| Error::Internal(e.to_string()))?)
            }
        };
        let path = dir.join(&name);
        std::fs::write(&path, bytes)?;
        files.push(path);
        names.push(name);
    }
    let manifest = Manifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        subcommand: run.subcommand,
        seed: run.seed,
        config: run.config,
        outputs: names,
        warnings: run.warnings,
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, pretty(&serde_json::to_value(&manifest).map_err(|e| Error::Internal(e.to_string()))?)?)?;
    files.push(path);
    Ok(RunSummary { manifest, files })
}

fn pretty(value: &Value) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Internal(e.to_string())
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

// ---------------------------------------------------------------------------
// Subcommands

fn spectrum(cfg: &SpectrumConfig, format: Format) -> Result<Run> {
    let t = &cfg.transmon;
    let mut run = Run::new("spectrum", cfg.seed, cfg)?;
    let (e_j, e_c) = (t.e_j_ghz.value(), t.e_c_ghz.value());
    let even = TransmonParams::new(e_j, e_c, t.n_g, Parity::Even)?;
    if even.ratio() < 20.0 {
        run.warnings.push(format!("E_J/E_C = {:.2} is below the asymptotic regime", even.ratio()));
    }
    let (plus, drift_plus) = diagonalize_checked(&even, t.levels, t.charge_cutoff)?;
    let (minus, drift_minus) = diagonalize_checked(&even.with_parity(Parity::Odd), t.levels, t.charge_cutoff)?;
    let drift = drift_plus.max(drift_minus);
    if drift > 1e-10 {
        run.warnings.push(format!("levels change by {drift:.1e} when the charge cutoff grows by 10"));
    }
    let rows = (0..t.levels)
        .map(|m| {
            Ok(vec![
                Cell::Int(m as i64),
                Cell::Float(plus.levels[m]),
                Cell::Float(minus.levels[m]),
                Cell::Float(charge_dispersion_exact(e_j, e_c, m, t.charge_cutoff)?),
                Cell::Float(charge_dispersion_asymptotic(e_j, e_c, m as u32)?),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    run.table(
        "spectrum",
        &["m", "E_m_plus_GHz", "E_m_minus_GHz", "eps_m_exact_GHz", "eps_m_asymptotic_GHz"],
        rows,
        format,
    );
    Ok(run)
}

/// Domain failures that make one sweep point undefined rather than the run invalid.
fn pointwise(e: &Error) -> bool {
    matches!(e, Error::AmbiguousBasis { .. } | Error::SingularDenominator(_) | Error::Domain(_))
}

fn zz(cfg: &ZzConfig, format: Format) -> Result<Run> {
    let mut run = Run::new("zz", cfg.seed, cfg)?;
    let circuit = cfg.circuit.circuit()?;
    run.warnings.extend(circuit.coupling_warnings());
    let points: Vec<(f64, Result<f64>, Result<f64>)> = cfg
        .sweep
        .frequencies()?
        .into_par_iter()
        .map(|w| (w, zz_rate(&circuit, w), zz_perturbative(&circuit, w).map(|p| p.zeta)))
        .collect();
    let mut rows = Vec::with_capacity(points.len());
    for (w, exact, pert) in points {
        let mut value = |r: Result<f64>, what: &str| -> Result<f64> {
            match r {
                Ok(z) => Ok(rad_to_khz(z)),
                Err(e) if pointwise(&e) => {
                    run.warnings.push(format!("{what} at {:.6} GHz: {e}", rad_to_ghz(w)));
                    Ok(f64::NAN)
                }
                Err(e) => Err(e),
            }
        };
        let exact = value(exact, "exact ZZ")?;
        let pert = value(pert, "perturbative ZZ")?;
        rows.push(vec![Cell::Float(rad_to_ghz(w)), Cell::Float(exact), Cell::Float(pert)]);
    }
    run.table("zz", &["omega_c_GHz", "zeta_exact_kHz", "zeta_pert_kHz"], rows, format);
    Ok(run)
}

fn idle(cfg: &CircuitConfig) -> Result<Run> {
    let mut run = Run::new("idle", cfg.seed, cfg)?;
    let circuit = cfg.circuit.circuit()?;
    run.warnings.extend(circuit.coupling_warnings());
    let points = find_idling_frequency(&circuit)?;
    run.json(
        "idle.json",
        json!({
            "levels_per_transmon": circuit.levels,
            "idling_frequencies_ghz": points.frequencies.iter().map(|w| rad_to_ghz(*w)).collect::<Vec<_>>(),
            "residuals_hz": points.residuals.iter().map(|z| rad_to_hz(*z)).collect::<Vec<_>>(),
        }),
    );
    Ok(run)
}

fn parity_label(p: Parity) -> i32 {
    i32::from(p)
}

fn dispersion_json(d: &[Dispersion; 3]) -> Value {
    let site = |x: &Dispersion| json!({"eps1_ghz": x.eps1, "eps2_ghz": x.eps2});
    json!({"q1": site(&d[0]), "c": site(&d[1]), "q2": site(&d[2])})
}

fn parity_zz(cfg: &CircuitConfig) -> Result<Run> {
    let mut run = Run::new("parity-zz", cfg.seed, cfg)?;
    let circuit = cfg.circuit.idling_circuit()?;
    let dispersions = gate_dispersions(&circuit)?;
    let report = parity_zz_spread(&circuit, circuit.coupler.omega, &dispersions)?;
    run.warnings.extend(report.warnings.iter().cloned());
    let per_parity: Vec<Value> = report
        .per_parity
        .iter()
        .map(|p| {
            json!({
                "p_q1": parity_label(p.parities[0]),
                "p_c": parity_label(p.parities[1]),
                "p_q2": parity_label(p.parities[2]),
                "taylor_hz": rad_to_hz(p.taylor),
                "exact_hz": rad_to_hz(p.exact),
            })
        })
        .collect();
    let sites = |v: [f64; 3]| json!({"q1": v[0], "c": v[1], "q2": v[2]});
    run.json(
        "parity_zz.json",
        json!({
            "omega_c_ghz": rad_to_ghz(circuit.coupler.omega),
            "zeta_zz_hz": rad_to_hz(report.zeta_zz),
            "rms_hz": rad_to_hz(report.rms),
            "rms_exact_hz": rad_to_hz(report.rms_exact),
            "per_parity": per_parity,
            "d_zeta_d_alpha": sites(report.d_alpha),
            "d_zeta_d_omega": sites(report.d_omega),
            "dispersions": dispersion_json(&dispersions),
        }),
    );
    Ok(run)
}

fn effective(cfg: &EffectiveConfig) -> Result<Run> {
    let mut run = Run::new("effective", cfg.seed, cfg)?;
    let circuit = cfg.circuit.circuit()?;
    let omega_c = ghz_to_rad(cfg.operating_point.omega_c_ghz.value());
    let n_g = cfg.operating_point.n_g;
    let p = swt_parameters(&circuit, omega_c)?;
    let gate = effective_gate(&p, cfg.operating_point.n_rabi)?;
    let simplified = phase_susceptibility(&circuit, omega_c, gate.t_g, SusceptibilityMode::Simplified)?;
    let full = phase_susceptibility(&circuit, omega_c, gate.t_g, SusceptibilityMode::Full)?;
    let leak = leakage_susceptibility(&circuit, omega_c, gate.t_g)?;
    let eps2 = ghz_to_rad(gate_dispersions(&circuit)?[2].eps2);
    let dphi = crate::channel::delta_phi(simplified, eps2, n_g);
    let dp11 = crate::channel::delta_p11(leak.second_derivative, eps2, n_g);
    let assumptions = validate_assumptions(&circuit, omega_c)?;
    for c in assumptions.checks.iter().filter(|c| !c.passed) {
        run.warnings.push(format!("assumption {} violated: ratio {:.3e} above {:.1e}", c.name, c.ratio, c.threshold));
    }
    run.json(
        "effective.json",
        json!({
            "omega_c_ghz": rad_to_ghz(omega_c),
            "effective_params_ghz": {
                "omega_q1": rad_to_ghz(p.omega_q1_t),
                "omega_q2": rad_to_ghz(p.omega_q2_t),
                "alpha_q1": rad_to_ghz(p.alpha_q1_t),
                "alpha_q2": rad_to_ghz(p.alpha_q2_t),
                "g_0110": rad_to_ghz(p.g_0110_t),
                "g_1102": rad_to_ghz(p.g_1102_t),
                "delta": rad_to_ghz(p.delta_t),
                "rabi": rad_to_ghz(p.rabi),
            },
            "gate": {"t_g_ns": gate.t_g / NS, "n_rabi": gate.n_rabi, "phi_rad": gate.phi, "p11": gate.p11},
            "susceptibilities": {
                "d_phi_d_alpha_simplified_ns": simplified / NS,
                "d_phi_d_alpha_full_ns": full / NS,
                "d2_p11_d_alpha2_ns2": leak.second_derivative / (NS * NS),
                "d_p11_d_alpha_ns": leak.first_derivative / NS,
            },
            "parity": {
                "eps2_q2_ghz": rad_to_ghz(eps2),
                "n_g": n_g,
                "delta_phi_rad": dphi,
                "delta_p11": dp11,
                "infidelity_phase_only": 3.0 / 80.0 * dphi * dphi,
            },
            "assumptions": assumptions.checks,
        }),
    );
    Ok(run)
}

fn gate_report(circuit: &CircuitParams, pulse: &FlattopGaussian, a: &ParityAnalysis) -> Value {
    let per_parity: Vec<Value> = a
        .per_parity
        .iter()
        .map(|r| {
            json!({
                "p_q1": parity_label(r.parities[0]),
                "p_c": parity_label(r.parities[1]),
                "p_q2": parity_label(r.parities[2]),
                "phi_rad": r.phi,
                "p11": r.p11,
                "fidelity": r.fidelity,
                "leakage": r.leakage,
            })
        })
        .collect();
    let pairs: Vec<Value> = a
        .pairs
        .iter()
        .map(|p| {
            json!({
                "p_q1": parity_label(p.parities_q1_c[0]),
                "p_c": parity_label(p.parities_q1_c[1]),
                "fidelity": p.fidelity,
                "phase_diff_rad": p.phase_diff,
            })
        })
        .collect();
    json!({
        "omega_c_idle_ghz": rad_to_ghz(circuit.coupler.omega),
        "pulse": {
            "amplitude_ghz": rad_to_ghz(pulse.amplitude_a),
            "tau_c_ns": pulse.tau_c / NS,
            "sigma_ns": pulse.sigma / NS,
            "total_ns": pulse.total_t / NS,
        },
        "per_parity": per_parity,
        "pairs": pairs,
        "averaged_fidelity": a.averaged_fidelity,
        "averaged_infidelity": a.averaged_infidelity,
        "phase_diff": a.phase_diff,
        "t_g_eff": a.t_g_eff / NS,
        "t_g_eff_unit": "ns",
        "n_rabi": a.n_rabi,
        "leakage": a.leakage,
        "virtual_z_rad": a.virtual_z,
    })
}

fn gate_dispersions_for(circuit: &CircuitParams, parity_shifts: bool) -> Result<[Dispersion; 3]> {
    if parity_shifts {
        gate_dispersions(circuit)
    } else {
        Ok([Dispersion::zero(); 3])
    }
}

fn trajectory(run: &mut Run, circuit: &CircuitParams, pulse: &FlattopGaussian, sim: &SimulationSection) -> Result<()> {
    if sim.trajectory_samples == 0 {
        return Ok(());
    }
    let settings = sim.settings()?;
    let levels = circuit.levels;
    let mut psi0 = nalgebra::DVector::<num_complex::Complex64>::zeros(circuit.dimension());
    psi0[Label::L11.bare_index(levels)] = num_complex::Complex64::new(1.0, 0.0);
    let traj = propagate_with(circuit, pulse, &psi0, sim.trajectory_samples.max(2), &settings)?;
    let labels = [(0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (2, 0)];
    let rows = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| {
            let mut row = vec![Cell::Float(t / NS)];
            row.extend(labels.iter().map(|&(a, b)| Cell::Float(s[state_index(levels, a, 0, b)].norm_sqr())));
            row
        })
        .collect();
    run.table("trajectory", &["t_ns", "p_00", "p_01", "p_10", "p_11", "p_02", "p_20"], rows, Format::Csv);
    Ok(())
}

fn gate_simulate(cfg: &GateSimulateConfig) -> Result<Run> {
    let mut run = Run::new("gate simulate", cfg.seed, cfg)?;
    let circuit = cfg.circuit.idling_circuit()?;
    let pulse = cfg.pulse.pulse()?;
    let dispersions = gate_dispersions_for(&circuit, cfg.simulation.parity_shifts)?;
    let analysis = parity_averaged_gate_analysis(
        &circuit,
        &pulse,
        &dispersions,
        cfg.simulation.target_phase_rad,
        &cfg.simulation.settings()?,
    )?;
    if analysis.leakage > 1e-3 {
        run.warnings.push(format!("leakage {:.2e} exceeds 1e-3", analysis.leakage));
    }
    run.json("gate.json", gate_report(&circuit, &pulse, &analysis));
    trajectory(&mut run, &circuit, &pulse, &cfg.simulation)?;
    Ok(run)
}

fn gate_calibrate(cfg: &GateCalibrateConfig) -> Result<Run> {
    let mut run = Run::new("gate calibrate", cfg.seed, cfg)?;
    let circuit = cfg.circuit.idling_circuit()?;
    let dispersions = gate_dispersions_for(&circuit, cfg.simulation.parity_shifts)?;
    let options = cfg.calibration.options(cfg.simulation.settings()?)?;
    let cal = calibrate_pulse(&circuit, cfg.simulation.target_phase_rad, &dispersions, &options)?;
    let mut report = gate_report(&circuit, &cal.pulse, &cal.analysis);
    report["calibration"] = json!({
        "amplitude_ghz": rad_to_ghz(cal.pulse.amplitude_a),
        "tau_c_ns": cal.pulse.tau_c / NS,
        "sigma_ns": cal.pulse.sigma / NS,
        "infidelity": cal.infidelity,
        "nominal_infidelity": cal.nominal_infidelity,
        "evaluations": cal.evaluations,
    });
    run.json("gate.json", report);
    trajectory(&mut run, &circuit, &cal.pulse, &cfg.simulation)?;
    Ok(run)
}

fn channel(cfg: &ChannelConfig) -> Result<Run> {
    let mut run = Run::new("channel", cfg.seed, cfg)?;
    let c = &cfg.channel;
    let ch = ParityChannel::with_occupation(c.phi0_rad, c.delta_phi_rad, c.delta_p11, c.p_plus)?;
    let single = channel_fidelity(&ch)?;
    let (n_exact, n_linear) = if c.delta_p11 == 0.0 {
        let n = n_gate_infidelity(&ch, c.n_gates)?;
        (json!(n.exact), json!(n.linear))
    } else {
        run.warnings.push("n-gate fidelity is defined for delta_p11 = 0 only".into());
        (Value::Null, Value::Null)
    };
    let mut report = json!({
        "fidelity_exact": single.exact,
        "fidelity_quadratic": single.quadratic,
        "n_gates": c.n_gates,
        "n_gate_exact": n_exact,
        "n_gate_linear": n_linear,
    });
    if c.haar_samples > 0 {
        let mc = haar_average_fidelity(&kraus_operators(&ch)?, &cphase(ch.phi0), c.haar_samples, cfg.seed)?;
        report["haar"] = json!({"mean": mc.mean, "std_error": mc.std_error, "samples": mc.samples, "seed": mc.seed});
    }
    run.json("channel.json", report);
    Ok(run)
}

fn breakdown_cells(b: Option<&MetricBreakdown>) -> Vec<Cell> {
    let nan = f64::NAN;
    let v = |f: fn(&MetricBreakdown) -> f64| Cell::Float(b.map_or(nan, f));
    vec![
        v(|b| b.one_minus_p),
        v(|b| b.parity),
        v(|b| b.t1_tqg),
        v(|b| b.tphi_tqg),
        v(|b| b.sqg_t1),
        v(|b| b.sqg_tphi),
        v(|b| b.leakage),
        v(|b| b.thermal),
    ]
}

const LANDSCAPE_HEADER: [&str; 12] = [
    "ej_ghz",
    "ec_ghz",
    "one_minus_p",
    "term_parity",
    "term_t1_tqg",
    "term_tphi_tqg",
    "term_sqg_t1",
    "term_sqg_tphi",
    "term_leak",
    "term_thermal",
    "dominant",
    "in_optimal_region",
];

fn landscape_rows(l: &Landscape) -> Vec<Vec<Cell>> {
    l.cells
        .iter()
        .map(|c| {
            let mut row = vec![Cell::Float(c.e_j), Cell::Float(c.e_c)];
            row.extend(breakdown_cells(c.breakdown.as_ref()));
            row.push(Cell::Text(c.dominant.map_or("none", |s| s.name()).into()));
            row.push(Cell::Bool(c.in_optimal_region));
            row
        })
        .collect()
}

fn landscape_summary(l: &Landscape) -> Value {
    let counts: serde_json::Map<String, Value> = [ErrorSource::Parity, ErrorSource::Decoherence, ErrorSource::Leakage, ErrorSource::Thermal]
        .iter()
        .map(|s| (s.name().to_string(), json!(l.labelled(*s).len())))
        .collect();
    let centroid = l.region_centroid();
    json!({
        "cells": l.cells.len(),
        "masked_cells": l.mask().iter().filter(|&&m| m).count(),
        "percentile": l.percentile,
        "threshold": finite(l.threshold),
        "centroid_ej_ghz": centroid.map(|c| c.0),
        "centroid_ec_ghz": centroid.map(|c| c.1),
        "dominant_counts": counts,
    })
}

fn landscape(cfg: &LandscapeConfig, format: Format) -> Result<Run> {
    let mut run = Run::new("landscape", cfg.seed, cfg)?;
    let model = cfg.model()?;
    let spec = cfg.circuit.spec()?;
    let grid = cfg.grid.grid()?;
    let l = landscape_scan(&grid, &model, &spec, cfg.percentile)?;
    run.warnings.extend(l.warnings.iter().cloned());
    run.table("landscape", &LANDSCAPE_HEADER, landscape_rows(&l), format);
    let mut summary = landscape_summary(&l);
    if cfg.density_oracle {
        let values: Vec<f64> = grid
            .points()
            .par_iter()
            .map(|&(ej, ec)| match simulate_reference_circuit(ej, ec, &model, &spec) {
                Err(Error::TuningRange(_)) => Ok(f64::NAN),
                other => other,
            })
            .collect::<Result<Vec<_>>>()?;
        let mask = optimal_mask(&values, cfg.percentile)?;
        summary["density_overlap"] = json!(mask_overlap(&l.mask(), &mask));
        let rows = grid
            .points()
            .iter()
            .zip(values.iter().zip(&mask))
            .map(|(&(ej, ec), (&v, &m))| vec![Cell::Float(ej), Cell::Float(ec), Cell::Float(v), Cell::Bool(m)])
            .collect();
        run.table("landscape_density", &["ej_ghz", "ec_ghz", "infidelity", "in_optimal_region"], rows, format);
    }
    run.json("landscape_summary.json", summary);
    Ok(run)
}

fn breakdown_json(e_j: f64, e_c: f64, b: &MetricBreakdown) -> Value {
    json!({
        "ej_ghz": e_j,
        "ec_ghz": e_c,
        "one_minus_p": b.one_minus_p,
        "dominant": b.dominant().1.name(),
        "terms": {
            "parity": b.parity,
            "t1_tqg": b.t1_tqg,
            "tphi_tqg": b.tphi_tqg,
            "sqg_t1": b.sqg_t1,
            "sqg_tphi": b.sqg_tphi,
            "leak": b.leakage,
            "thermal": b.thermal,
        },
    })
}

fn optimize_step(cfg: &OptimizeConfig) -> Result<Run> {
    let mut run = Run::new("optimize-step", cfg.seed, cfg)?;
    let m = cfg
        .measured
        .as_ref()
        .ok_or_else(|| Error::Configuration("optimize-step needs measured coherence (--measured or [measured])".into()))?;
    let design = &cfg.design;
    let measured = MeasuredCoherence {
        t1: m.t1_us.value() * US,
        tphi: m.tphi_us.value() * US,
        temperature: m.temperature_mk.value() * 1e-3,
    };
    let current = (m.ej_ghz.value(), m.ec_ghz.value());
    let p = optimize_loop(&measured, current, &design.model()?, &design.circuit.spec()?, &design.grid.grid()?, design.percentile)?;
    run.warnings.extend(p.landscape.warnings.iter().cloned());
    run.json(
        "proposal.json",
        json!({
            "converged": p.converged,
            "current": breakdown_json(current.0, current.1, &p.current),
            "proposed": breakdown_json(p.e_j, p.e_c, &p.proposed),
            "improvement": p.current.one_minus_p - p.proposed.one_minus_p,
            "anchored_model": {
                "t1_ref_us": p.model.t1_ref / US,
                "tphi_ref_us": p.model.tphi_ref / US,
                "ref_ej_ghz": p.model.ref_ej,
                "ref_ec_ghz": p.model.ref_ec,
                "temperature_mk": p.model.temperature * 1e3,
                "model": p.model.model_kind,
            },
            "region": landscape_summary(&p.landscape),
        }),
    );
    run.table("landscape", &LANDSCAPE_HEADER, landscape_rows(&p.landscape), Format::Csv);
    Ok(run)
}

fn validate(kind: Kind, path: &Path, seed: Option<u64>) -> Result<Run> {
    fn checked<T: DeserializeOwned + Serialize + Seeded>(
        path: &Path,
        name: &str,
        seed: Option<u64>,
        check: impl FnOnce(&T) -> Result<()>,
    ) -> Result<(Value, u64)> {
        let mut cfg: T = load_seeded(Some(path), name, seed, required(name))?;
        check(&cfg)?;
        let s = *cfg.seed_mut();
        Ok((serde_json::to_value(&cfg).map_err(|e| Error::Internal(e.to_string()))?, s))
    }
    let circuit_ok = |c: &CircuitSection| c.circuit().map(|_| ());
    let (name, (resolved, s)) = match kind {
        Kind::Spectrum => ("spectrum", checked(path, "spectrum", seed, |c: &SpectrumConfig| {
            TransmonParams::new(c.transmon.e_j_ghz.value(), c.transmon.e_c_ghz.value(), c.transmon.n_g, Parity::Even).map(|_| ())
        })?),
        Kind::Zz => ("zz", checked(path, "zz", seed, |c: &ZzConfig| {
            circuit_ok(&c.circuit)?;
            c.sweep.frequencies().map(|_| ())
        })?),
        Kind::Idle => ("idle", checked(path, "idle", seed, |c: &CircuitConfig| circuit_ok(&c.circuit))?),
        Kind::ParityZz => ("parity-zz", checked(path, "parity-zz", seed, |c: &CircuitConfig| circuit_ok(&c.circuit))?),
        Kind::Effective => ("effective", checked(path, "effective", seed, |c: &EffectiveConfig| circuit_ok(&c.circuit))?),
        Kind::GateSimulate => ("gate simulate", checked(path, "gate simulate", seed, |c: &GateSimulateConfig| {
            circuit_ok(&c.circuit)?;
            c.pulse.pulse()?;
            c.simulation.settings().map(|_| ())
        })?),
        Kind::GateCalibrate => ("gate calibrate", checked(path, "gate calibrate", seed, |c: &GateCalibrateConfig| {
            circuit_ok(&c.circuit)?;
            c.calibration.options(c.simulation.settings()?).map(|_| ())
        })?),
        Kind::Channel => ("channel", checked(path, "channel", seed, |c: &ChannelConfig| {
            let ch = &c.channel;
            ParityChannel::with_occupation(ch.phi0_rad, ch.delta_phi_rad, ch.delta_p11, ch.p_plus).map(|_| ())
        })?),
        Kind::Landscape => ("landscape", checked(path, "landscape", seed, |c: &LandscapeConfig| {
            c.model()?;
            c.circuit.spec()?;
            c.grid.grid().map(|_| ())
        })?),
        Kind::OptimizeStep => ("optimize-step", checked(path, "optimize-step", seed, |c: &OptimizeConfig| {
            c.design.model()?;
            c.design.circuit.spec()?;
            c.design.grid.grid().map(|_| ())
        })?),
    };
    let mut run = Run::new("validate", s, &json!({"subcommand": name, "config": path.display().to_string()}))?;
    run.json("validate.json", json!({"valid": true, "subcommand": name, "resolved": resolved}));
    Ok(run)
}
