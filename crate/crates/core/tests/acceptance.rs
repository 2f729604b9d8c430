//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release --test acceptance`. Gate calibrations take
//! about ten minutes on one core. Set `ACCEPTANCE_STRICT=1` to exit nonzero
//! when any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use transmon_parity::channel::{
    channel_fidelity, cphase, haar_average_fidelity, kraus_operators, miscalibrated_fidelity, n_gate_infidelity,
    qp_decoherence_bound, ParityChannel,
};
use transmon_parity::circuit::{
    adiabatic_parity_sensitivity, find_idling_frequency, parity_zz_spread, CircuitParams,
};
use transmon_parity::design::leakage::{DragPulse, LeakageTable, TABLE_CHARGING_ENERGIES};
use transmon_parity::design::{
    landscape_scan, mask_overlap, optimal_mask, simulate_reference_circuit, CircuitSpec, ErrorSource, Grid,
    ModelKind, NoiseModel,
};
use transmon_parity::dynamics::{calibrate_pulse, gate_dispersions, CalibrationOptions};
use transmon_parity::spectral::{charge_dispersion_asymptotic, charge_dispersion_exact, DEFAULT_CHARGE_CUTOFF};
use transmon_parity::units::{ghz_to_rad, rad_to_ghz, rad_to_hz, MS, NS, US};
use transmon_parity::Result;

struct Verdict {
    checks: Vec<(String, bool)>,
}

impl Verdict {
    fn new() -> Self {
        Self { checks: Vec::new() }
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.checks.push((label.into(), ok));
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    fn report(&self, id: &str, title: &str, elapsed: f64) -> bool {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let detail: Vec<String> =
            self.checks.iter().map(|(l, ok)| format!("{}{l}", if *ok { "" } else { "FAILED " })).collect();
        println!("{status} {id} {title} [{elapsed:.1}s]: {}", detail.join("; "));
        self.passed()
    }
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx, sxy * sxy / (sxx * syy))
}

fn criterion_1() -> Result<Verdict> {
    let mut v = Verdict::new();
    let e_c = 0.25;
    let ratios: Vec<f64> = (0..=12).map(|k| 40.0 + 5.0 * k as f64).collect();
    for m in [1usize, 2] {
        let mut deviations = Vec::new();
        let mut in_band = true;
        let mut worst = (0.0, 1.0);
        for &r in &ratios {
            let exact = charge_dispersion_exact(r * e_c, e_c, m, DEFAULT_CHARGE_CUTOFF)?;
            let asymptotic = charge_dispersion_asymptotic(r * e_c, e_c, m as u32)?;
            let q = asymptotic / exact;
            if !(0.5..=1.5).contains(&q) {
                in_band = false;
            }
            if (q - 1.0).abs() > (worst.1 - 1.0f64).abs() {
                worst = (r, q);
            }
            deviations.push((q - 1.0).abs());
        }
        let monotone = deviations.windows(2).all(|w| w[1] <= w[0]);
        v.check(format!("m={m} ratio in [0.5,1.5] (worst {:.3} at E_J/E_C={})", worst.1, worst.0), in_band);
        v.check(format!("m={m} |ratio-1| decreasing ({:.3} -> {:.3})", deviations[0], deviations[12]), monotone);
    }
    let e1 = charge_dispersion_asymptotic(50.0 * e_c, e_c, 1)?;
    let e2 = charge_dispersion_asymptotic(50.0 * e_c, e_c, 2)?;
    let ratio = (e2 / e1).abs();
    v.check(format!("|eps2/eps1| at 50 = {ratio:.2} within 40 +/- 25%"), (ratio - 40.0).abs() <= 10.0);
    Ok(v)
}

struct GatePoint {
    ratio: f64,
    amplitude_ghz: f64,
    t_g: f64,
    phase_sim: f64,
    phase_analytic: f64,
    infidelity: f64,
    predicted: f64,
}

fn calibrated_point(ratio: f64) -> Result<GatePoint> {
    let circuit = CircuitParams::for_ratio(ratio, 4.8).at_idle()?;
    let dispersions = gate_dispersions(&circuit)?;
    let cal = calibrate_pulse(&circuit, PI, &dispersions, &CalibrationOptions::default())?;
    let eps2 = ghz_to_rad(dispersions[2].eps2);
    let t_g = cal.analysis.t_g_eff;
    Ok(GatePoint {
        ratio,
        amplitude_ghz: rad_to_ghz(cal.pulse.amplitude_a),
        t_g,
        phase_sim: cal.analysis.phase_diff.abs(),
        phase_analytic: (t_g / 2.0 * eps2).abs(),
        infidelity: cal.infidelity,
        predicted: 3.0 / 320.0 * (eps2 * t_g).powi(2),
    })
}

fn criterion_2(points: &[GatePoint]) -> Verdict {
    let mut v = Verdict::new();
    let window: Vec<&GatePoint> = points.iter().filter(|p| p.ratio <= 60.0).collect();
    for p in &window {
        let rel = (p.phase_sim - p.phase_analytic) / p.phase_analytic;
        v.check(format!("r={} dphi sim {:.4e} vs {:.4e} rel {:+.3}", p.ratio, p.phase_sim, p.phase_analytic, rel), rel.abs() <= 0.25);
    }
    let xs: Vec<f64> = window.iter().map(|p| p.ratio.sqrt()).collect();
    let ys: Vec<f64> = window.iter().map(|p| p.phase_sim.ln()).collect();
    let (_, _, r2) = linear_fit(&xs, &ys);
    v.check(format!("log dphi vs sqrt(E_J/E_C) R^2 = {r2:.5}"), r2 > 0.99);
    v
}

fn criterion_3(points: &[GatePoint], failures: &[(f64, String)]) -> Verdict {
    let mut v = Verdict::new();
    for (r, e) in failures {
        v.check(format!("r={r} calibration error: {e}"), false);
    }
    for p in points {
        let q = p.infidelity / p.predicted;
        if p.ratio <= 60.0 {
            v.check(format!("r={} 1-F {:.3e} / predicted {:.3e} = {q:.3}", p.ratio, p.infidelity, p.predicted), (0.5..=2.0).contains(&q));
        } else {
            v.check(format!("r={} floor: 1-F / predicted = {q:.3e} > 2", p.ratio), q > 2.0);
        }
        let t_g_ns = p.t_g / NS;
        v.check(format!("r={} t_g {t_g_ns:.2} ns in [40.5, 66]", p.ratio), (40.5..=66.0).contains(&t_g_ns));
        v.check(format!("r={} A {:.4} GHz in [0.8, 1.4]", p.ratio, p.amplitude_ghz), (0.8..=1.4).contains(&p.amplitude_ghz));
    }
    v
}

fn criterion_4() -> Result<Verdict> {
    let mut v = Verdict::new();
    let ch = ParityChannel::new(PI, 0.1, 0.0)?;
    let exact = channel_fidelity(&ch)?.exact;
    let mc = haar_average_fidelity(&kraus_operators(&ch)?, &cphase(ch.phi0), 100_000, 11)?;
    let sigmas = (mc.mean - exact).abs() / mc.std_error;
    v.check(format!("Haar 1e5 seed 11 within {sigmas:.2} sigma"), sigmas <= 3.0);

    let mut worst: f64 = 0.0;
    for k in 1..=20 {
        let dphi = 0.005 * k as f64;
        let f = channel_fidelity(&ParityChannel::new(PI, dphi, 0.0)?)?;
        worst = worst.max(((1.0 - f.quadratic) - (1.0 - f.exact)).abs() / (1.0 - f.exact));
    }
    v.check(format!("quadratic form worst rel. deviation {worst:.2e} for dphi <= 0.1"), worst <= 0.05);

    let ch = ParityChannel::new(PI, 0.01, 0.0)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in 1..=100 {
        xs.push((n as f64).ln());
        ys.push((1.0 - n_gate_infidelity(&ch, n)?.exact).ln());
    }
    let (slope, _, _) = linear_fit(&xs, &ys);
    v.check(format!("N-gate log-log slope {slope:.4}"), (slope - 1.0).abs() <= 0.05);

    let mut dominated = true;
    for k in 1..=40 {
        let dphi = 0.005 * k as f64;
        let ch = ParityChannel::new(PI, dphi, 0.0)?;
        if miscalibrated_fidelity(&ch, dphi / 2.0)? > channel_fidelity(&ch)?.exact {
            dominated = false;
        }
    }
    v.check("equal split >= one-sided for dphi in (0, 0.2]", dominated);
    Ok(v)
}

fn criterion_5() -> Result<Verdict> {
    let mut v = Verdict::new();
    let circuit = CircuitParams::table1(-270.0).with_levels(5);
    let idle = find_idling_frequency(&circuit)?;
    for (w, z) in idle.frequencies.iter().zip(&idle.residuals) {
        let hz = rad_to_hz(*z).abs();
        v.check(format!("idle {:.5} GHz |zeta| {hz:.2e} Hz", rad_to_ghz(*w)), hz < 1.0);
    }
    let omega_c = idle.frequencies[0];
    let dispersions = gate_dispersions(&circuit)?;
    let report = parity_zz_spread(&circuit, omega_c, &dispersions)?;
    let rel = (report.rms - report.rms_exact).abs() / report.rms_exact;
    v.check(
        format!("Taylor RMS {:.2} Hz vs exact {:.2} Hz rel {rel:.3}", rad_to_hz(report.rms), rad_to_hz(report.rms_exact)),
        rel <= 0.30,
    );

    // largest change of the exact rate when one site's parity flips
    let flip = |site: usize| -> f64 {
        let mut largest: f64 = 0.0;
        for a in &report.per_parity {
            for b in &report.per_parity {
                let others_same = (0..3).all(|s| s == site || a.parities[s] == b.parities[s]);
                if others_same && a.parities[site] != b.parities[site] {
                    largest = largest.max((a.exact - b.exact).abs());
                }
            }
        }
        rad_to_hz(largest)
    };
    let (q1, c, q2) = (flip(0), flip(1), flip(2));
    v.check(format!("flip shifts q1 {q1:.2} Hz, c {c:.2} Hz, q2 {q2:.2} Hz"), q2 > q1 && q2 > c);
    Ok(v)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn criterion_6() -> Result<Verdict> {
    let mut v = Verdict::new();
    let base = CircuitParams::for_ratio(50.0, 4.8);
    let eps2 = gate_dispersions(&base)?[2].eps2;
    let alpha_q2 = base.q2.alpha;
    let n = 40;
    let mut infidelities = Vec::new();
    for i in 0..n {
        let omega_c = ghz_to_rad(5.0 + 2.0 * i as f64 / (n - 1) as f64);
        for j in 0..n {
            let fraction = 0.1 + (0.995 - 0.1) * j as f64 / (n - 1) as f64;
            let circuit = base.clone().with_detuning(fraction * alpha_q2);
            match adiabatic_parity_sensitivity(&circuit, omega_c, PI, eps2, 0.0) {
                Ok(s) => infidelities.push(1.0 - s.fidelity),
                Err(_) => continue,
            }
        }
    }
    infidelities.retain(|x| x.is_finite());
    infidelities.sort_by(|a, b| a.total_cmp(b));
    let best = quantile(&infidelities, 0.05);
    let worst = quantile(&infidelities, 0.95);
    v.check(format!("{} points, 5th pct {best:.2e} <= 1e-6", infidelities.len()), best <= 1e-6);
    v.check(format!("95th pct {worst:.2e} >= 1e-3"), worst >= 1e-3);
    v.check("best edge within a decade of 1e-7", (best.log10() + 7.0).abs() <= 1.0);
    v.check("worst edge within a decade of 1e-2", (worst.log10() + 2.0).abs() <= 1.0);

    let omega_c = ghz_to_rad(5.6);
    let mut previous = 0.0;
    let mut diverging = true;
    let mut trace = Vec::new();
    for fraction in [0.9, 0.95, 0.97, 0.98] {
        let s = adiabatic_parity_sensitivity(&base.clone().with_detuning(fraction * alpha_q2), omega_c, PI, eps2, 0.0)?;
        let magnitude = s.sensitivity.abs();
        diverging &= magnitude > previous;
        previous = magnitude;
        trace.push(format!("{:.2e}", magnitude));
    }
    v.check(format!("sensitivity grows towards resonance ({})", trace.join(" < ")), diverging);
    Ok(v)
}

fn criterion_7() -> Result<Verdict> {
    let mut v = Verdict::new();
    let spec = CircuitSpec::default();
    let grid = Grid::default();
    let mut centroids = Vec::new();
    for t1_us in [50.0, 150.0, 500.0] {
        let model = NoiseModel::reference(t1_us * US);
        let landscape = landscape_scan(&grid, &model, &spec, 0.1)?;
        let (_, ec) = landscape.region_centroid().unwrap_or((f64::NAN, f64::NAN));
        centroids.push(ec);
        let counts: Vec<usize> = [ErrorSource::Parity, ErrorSource::Decoherence, ErrorSource::Leakage, ErrorSource::Thermal]
            .iter()
            .map(|s| landscape.labelled(*s).len())
            .collect();
        v.check(format!("T1={t1_us}us labels {counts:?}"), counts.iter().all(|&c| c > 0));
        let oracle: Vec<f64> = grid
            .points()
            .iter()
            .map(|&(ej, ec)| simulate_reference_circuit(ej, ec, &model, &spec))
            .collect::<Result<_>>()?;
        let overlap = mask_overlap(&landscape.mask(), &optimal_mask(&oracle, 0.1)?);
        v.check(format!("T1={t1_us}us oracle overlap {overlap:.3}"), overlap >= 0.7);
    }
    v.check(
        format!("centroid E_C {:.3} -> {:.3} -> {:.3} GHz", centroids[0], centroids[1], centroids[2]),
        centroids[0] < centroids[1] && centroids[1] < centroids[2],
    );
    let c = ModelKind::Basic.coefficients();
    let audit = c.t1_tqg == [2.0 / 5.0; 2]
        && c.tphi_tqg == [1.0 / 5.0; 2]
        && c.parity == 3.0 / 80.0
        && c.sqg_t1 == 1.0 / 3.0
        && c.sqg_tphi == 1.0 / 6.0;
    v.check("coefficients 2/5, 1/5, 3/80, 1/3, 1/6", audit);
    Ok(v)
}

fn criterion_8(points: &[GatePoint]) -> Result<Verdict> {
    let mut v = Verdict::new();
    for t_parity_ms in [1.25, 2.5, 20.0] {
        let mut above = false;
        let mut below = false;
        for p in points {
            let bound = qp_decoherence_bound(t_parity_ms * MS, p.t_g)?;
            above |= p.predicted > bound;
            below |= p.predicted < bound;
        }
        v.check(format!("T_P={t_parity_ms}ms bound crosses predicted curve"), above && below);
    }
    let low = points.iter().find(|p| p.ratio == 45.0);
    let dominated = match low {
        Some(p) => p.predicted > qp_decoherence_bound(20.0 * MS, p.t_g)?,
        None => false,
    };
    v.check("parity term dominates the 20 ms bound at E_J/E_C = 45", dominated);
    Ok(v)
}

fn supplementary_drag() -> Result<Verdict> {
    let mut v = Verdict::new();
    let table = LeakageTable::simulate(&TABLE_CHARGING_ENERGIES, &DragPulse::default())?;
    let gamma = table.fitted_exponent(0.15, 0.35)?;
    v.check(format!("DRAG leakage exponent {gamma:.3} in [5, 6]"), (5.0..=6.0).contains(&gamma));
    Ok(v)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn show(id: &str, title: &str, outcome: (Result<Verdict>, f64)) -> bool {
    match outcome {
        (Ok(v), t) => v.report(id, title, t),
        (Err(e), t) => {
            println!("FAIL {id} {title} [{t:.1}s]: error {e}");
            false
        }
    }
}

fn main() -> ExitCode {
    // gate calibrations shared by criteria 2, 3 and 8
    let ((points, failures), gate_time) = timed(|| {
        let mut points = Vec::new();
        let mut failures = Vec::new();
        for ratio in [45.0, 50.0, 55.0, 60.0, 75.0, 90.0] {
            match calibrated_point(ratio) {
                Ok(p) => points.push(p),
                Err(e) => failures.push((ratio, e.to_string())),
            }
        }
        (points, failures)
    });

    let mut all = Vec::new();
    all.push(show("1", "charge dispersion oracle", timed(criterion_1)));
    all.push(show("2", "parity phase split", (Ok(criterion_2(&points)), gate_time)));
    all.push(show("3", "parity infidelity formula", (Ok(criterion_3(&points, &failures)), gate_time)));
    all.push(show("4", "Kraus channel algebra", timed(criterion_4)));
    all.push(show("5", "idling and parity ZZ", timed(criterion_5)));
    all.push(show("6", "adiabatic sensitivity", timed(criterion_6)));
    all.push(show("7", "metric landscape", timed(criterion_7)));
    all.push(show("8", "quasiparticle bound overlay", timed(|| criterion_8(&points))));
    show("S1", "supplementary: DRAG leakage exponent", timed(supplementary_drag));

    let failed = all.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} of {} criteria passed", all.len() - failed, all.len());
    // a failed criterion is reported, not fatal, unless strict mode is requested
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
