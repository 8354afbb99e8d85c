//! Command implementations for the `tppq` binary.
//!
//! Each command loads the run config (or the built-in defaults), builds the
//! device model, runs one workflow and writes plot-ready CSV plus a JSON
//! result into the output directory. The resolved config is echoed alongside
//! every output and results carry a hash of the device section, so any file
//! can be traced back to the exact run that produced it.
//!
//! Exit codes: 0 success, 1 usage/config errors, 2 numerical failures.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig, ScheduleConfig};
use crate::device::{
    build_qubit, calibrate_flux, CompositeModel, DeviceError, TunnelingKind,
};
use crate::evolve::{EvolveError, TrotterEngine};
use crate::metrics::{ideal_cnot_tp, ideal_rx_p, ideal_rx_t, GateReport, MetricsError, TomographyRow};
use crate::optimize::{
    gate_infidelity, optimize_gate, score_schedule, GateTemplate, NelderMeadOptions,
    OptimizeError, OptimizeGateOptions,
};
use crate::pulses::{Channel, PulseSchedule};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
}

impl CliError {
    /// 1 for usage/config problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Device(_) | CliError::Evolve(_) | CliError::Metrics(_) | CliError::Optimize(_) => 2,
        }
    }
}

/// Global options shared by every command.
#[derive(Debug, Clone)]
pub struct GlobalArgs {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    /// Overrides `run.rng_seed` when set.
    pub seed: Option<u64>,
    /// Overrides `run.tau_ns` when set.
    pub tau: Option<f64>,
}

/// Config after applying command-line overrides.
pub struct Resolved {
    pub config: RunConfig,
    pub out: PathBuf,
}

impl Resolved {
    pub fn new(args: &GlobalArgs) -> Result<Self, CliError> {
        let mut config = match &args.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = args.seed {
            config.run.rng_seed = seed;
        }
        if let Some(tau) = args.tau {
            config.run.tau_ns = tau;
        }
        Ok(Self { config, out: args.out.clone() })
    }

    fn write_file(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.out)
            .map_err(|source| CliError::Io { path: self.out.display().to_string(), source })?;
        let path = self.out.join(name);
        std::fs::write(&path, contents)
            .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        Ok(path)
    }

    /// Echo the resolved config next to the outputs.
    fn echo_config(&self) -> Result<(), CliError> {
        let text = self.config.to_toml()?;
        self.write_file("resolved_config.toml", &text)?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("result serialization");
        text.push('\n');
        self.write_file(name, &text)
    }

    fn model(&self) -> Result<CompositeModel, CliError> {
        Ok(CompositeModel::from_spec(&self.config.device.to_spec())?)
    }
}

/// Which gate a command addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateChoice {
    Cnot,
    RxT,
    RxP,
}

impl GateChoice {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "cnot" => Ok(Self::Cnot),
            "rx-t" => Ok(Self::RxT),
            "rx-p" => Ok(Self::RxP),
            other => Err(CliError::Usage(format!(
                "unknown gate '{other}' (expected cnot, rx-t or rx-p)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Cnot => "cnot",
            Self::RxT => "rx-t",
            Self::RxP => "rx-p",
        }
    }

    pub fn template(&self, config: &RunConfig) -> GateTemplate {
        match self {
            Self::Cnot => config.schedule.to_template(),
            Self::RxT => config.single_qubit.rx_t.to_template(Channel::Transmon),
            Self::RxP => config.single_qubit.rx_p.to_template(Channel::Ppq),
        }
    }

    pub fn ideal(&self) -> crate::metrics::IdealGate {
        match self {
            Self::Cnot => ideal_cnot_tp(),
            Self::RxT => ideal_rx_t(std::f64::consts::FRAC_PI_2),
            Self::RxP => ideal_rx_p(std::f64::consts::FRAC_PI_2),
        }
    }
}

/// `spectrum`: subsystem levels to CSV, qubit frequencies to stdout.
pub fn cmd_spectrum(resolved: &Resolved) -> Result<(), CliError> {
    let spec = resolved.config.device.to_spec();
    spec.validate()?;
    let transmon = build_qubit(
        TunnelingKind::SinglePair,
        spec.e_c_t,
        spec.transmon_e_j(),
        0.0,
        spec.n_max,
        spec.d_trunc,
    )?;
    let ppq = build_qubit(TunnelingKind::PairOfPairs, spec.e_c_p, spec.e_j_p, 0.0, spec.n_max, spec.d_trunc)?;
    let model = resolved.model()?;
    let dressed = model.dressed_frequencies()?;

    let mut csv = String::from("subsystem,level,energy_GHz,parity\n");
    for (name, qubit) in [("transmon", &transmon), ("ppq", &ppq)] {
        for (level, (energy, parity)) in qubit.energies.iter().zip(&qubit.parity).enumerate() {
            writeln!(csv, "{name},{level},{},{}", energy / crate::device::GHZ, parity.label()).unwrap();
        }
    }
    for (level, energy) in model.resonator.energies.iter().enumerate() {
        writeln!(csv, "resonator,{level},{},none", energy / crate::device::GHZ).unwrap();
    }
    resolved.write_file("spectrum.csv", &csv)?;
    resolved.echo_config()?;

    #[derive(Serialize)]
    struct SpectrumResult {
        command: &'static str,
        device_hash: String,
        f01_t_bare_ghz: f64,
        f12_p_bare_ghz: f64,
        f01_t_dressed_ghz: f64,
        f12_p_dressed_ghz: f64,
        zz_mhz: f64,
        transmon_anharmonicity_ghz: f64,
    }
    let result = SpectrumResult {
        command: "spectrum",
        device_hash: resolved.config.device.content_hash(),
        f01_t_bare_ghz: transmon.f01_ghz(),
        f12_p_bare_ghz: ppq.f12_ghz(),
        f01_t_dressed_ghz: dressed.f01_t_ghz,
        f12_p_dressed_ghz: dressed.f12_p_ghz,
        zz_mhz: dressed.zz_mhz,
        transmon_anharmonicity_ghz: transmon.anharmonicity_ghz(),
    };
    resolved.write_json("spectrum.json", &result)?;
    println!(
        "f01_T = {:.6} GHz (dressed {:.6}), f12_P = {:.6} GHz (dressed {:.6})",
        result.f01_t_bare_ghz, result.f01_t_dressed_ghz, result.f12_p_bare_ghz, result.f12_p_dressed_ghz
    );
    Ok(())
}

/// `calibrate`: find φ_e for a target transmon f01 and write the updated
/// config.
pub fn cmd_calibrate(resolved: &Resolved, target_f01_ghz: f64) -> Result<(), CliError> {
    let spec = resolved.config.device.to_spec();
    let phi = calibrate_flux(&spec, target_f01_ghz)?;
    let mut updated = resolved.config.clone();
    updated.device.phi_e = phi;
    resolved.write_file("calibrated_config.toml", &updated.to_toml()?)?;
    resolved.echo_config()?;
    println!("phi_e = {phi} rad for f01_T target {target_f01_ghz} GHz");
    Ok(())
}

fn parse_initial(model: &CompositeModel, label: &str) -> Result<Vec<C64>, CliError> {
    match label {
        "00" => Ok(model.basis_state(0, 0)),
        "01" => Ok(model.basis_state(0, 1)),
        "10" => Ok(model.basis_state(1, 0)),
        "11" => Ok(model.basis_state(1, 1)),
        path => {
            // Amplitude file: JSON list of [re, im] pairs, length 64.
            let file = Path::new(path);
            if !file.exists() {
                return Err(CliError::Usage(format!(
                    "unknown initial state '{label}' (expected 00, 01, 10, 11 or an amplitude file)"
                )));
            }
            let text = std::fs::read_to_string(file)
                .map_err(|source| CliError::Io { path: path.to_string(), source })?;
            let pairs: Vec<[f64; 2]> = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad amplitude file {path}: {e}")))?;
            if pairs.len() != model.dim {
                return Err(CliError::Usage(format!(
                    "amplitude file holds {} entries, need {}",
                    pairs.len(),
                    model.dim
                )));
            }
            let mut psi: Vec<C64> = pairs.iter().map(|a| C64::new(a[0], a[1])).collect();
            let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(CliError::Usage("amplitude file is all zeros".into()));
            }
            for a in psi.iter_mut() {
                *a /= norm;
            }
            Ok(psi)
        }
    }
}

/// `simulate`: propagate an initial state under a gate schedule, recording
/// Bloch trajectories and leakage.
pub fn cmd_simulate(
    resolved: &Resolved,
    gate: &str,
    initial: &str,
    free_duration: Option<f64>,
    dump_amplitudes: bool,
) -> Result<(), CliError> {
    let model = resolved.model()?;
    let engine = TrotterEngine::new(&model)?;
    let (schedule, duration, gate_name) = if gate == "free" {
        let d = free_duration.unwrap_or(100.0);
        (PulseSchedule::free_evolution(d), d, "free".to_string())
    } else {
        let choice = GateChoice::parse(gate)?;
        let template = choice.template(&resolved.config);
        let d = template.total_duration();
        (template.schedule(), d, choice.name().to_string())
    };
    let psi0 = parse_initial(&model, initial)?;
    let tau = resolved.config.run.tau_ns;
    let stride = resolved.config.run.record_stride;
    let (final_state, record) =
        engine.propagate_state_recorded(&schedule, 0.0, duration, tau, &psi0, stride)?;

    let mut csv = String::from("t_ns");
    if dump_amplitudes {
        for i in 0..model.dim {
            write!(csv, ",re_{i},im_{i}").unwrap();
        }
    }
    csv.push_str(",bloch_T_x,bloch_T_y,bloch_T_z,bloch_P_x,bloch_P_y,bloch_P_z,leakage\n");
    for (i, t) in record.times.iter().enumerate() {
        write!(csv, "{t}").unwrap();
        if dump_amplitudes {
            for a in &record.states[i] {
                write!(csv, ",{},{}", a.re, a.im).unwrap();
            }
        }
        let bt = record.bloch_t[i];
        let bp = record.bloch_p[i];
        writeln!(
            csv,
            ",{},{},{},{},{},{},{}",
            bt[0], bt[1], bt[2], bp[0], bp[1], bp[2], record.leakage[i]
        )
        .unwrap();
    }
    resolved.write_file("trajectory.csv", &csv)?;
    resolved.echo_config()?;

    #[derive(Serialize)]
    struct SimulateResult {
        command: &'static str,
        gate: String,
        initial: String,
        device_hash: String,
        tau_ns: f64,
        duration_ns: f64,
        final_bloch_t: [f64; 3],
        final_bloch_p: [f64; 3],
        final_leakage: f64,
        final_norm: f64,
        amplitudes: Vec<[f64; 2]>,
    }
    let result = SimulateResult {
        command: "simulate",
        gate: gate_name,
        initial: initial.to_string(),
        device_hash: resolved.config.device.content_hash(),
        tau_ns: tau,
        duration_ns: duration,
        final_bloch_t: *record.bloch_t.last().unwrap(),
        final_bloch_p: *record.bloch_p.last().unwrap(),
        final_leakage: *record.leakage.last().unwrap(),
        final_norm: final_state.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt(),
        amplitudes: final_state.iter().map(|a| [a.re, a.im]).collect(),
    };
    resolved.write_json("final_state.json", &result)?;
    println!(
        "final bloch_P_z = {:+.4}, leakage = {:.2e} ({} samples)",
        result.final_bloch_p[2],
        result.final_leakage,
        record.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct FidelityResult {
    command: &'static str,
    gate: &'static str,
    device_hash: String,
    schedule: GateTemplate,
    unitarity_defect: f64,
    report: GateReport,
}

/// `fidelity`: evaluate a schedule end to end and write the gate report.
pub fn cmd_fidelity(resolved: &Resolved, gate: &str) -> Result<(), CliError> {
    let choice = GateChoice::parse(gate)?;
    let model = resolved.model()?;
    let engine = TrotterEngine::new(&model)?;
    let template = choice.template(&resolved.config);
    let run = &resolved.config.run;
    let (report, propagator) = score_schedule(
        &engine,
        &template,
        &choice.ideal(),
        run.tau_ns,
        run.fidelity_samples,
        run.rng_seed,
    )?;
    let result = FidelityResult {
        command: "fidelity",
        gate: choice.name(),
        device_hash: resolved.config.device.content_hash(),
        schedule: template,
        unitarity_defect: propagator.unitarity_defect(),
        report,
    };
    resolved.write_json(&format!("fidelity_{}.json", choice.name()), &result)?;
    resolved.echo_config()?;
    println!("F({}) = {:.6}", choice.name(), result.report.fidelity);
    Ok(())
}

/// `optimize`: Nelder-Mead over masked schedule parameters.
pub fn cmd_optimize(
    resolved: &Resolved,
    gate: &str,
    mask_arg: Option<&str>,
    max_evals: Option<usize>,
    tau_coarse: Option<f64>,
) -> Result<(), CliError> {
    let choice = GateChoice::parse(gate)?;
    let model = resolved.model()?;
    let engine = TrotterEngine::new(&model)?;
    let template = choice.template(&resolved.config);
    let default_mask = match choice {
        GateChoice::Cnot => "f1,omega_S,gamma2,theta_T,theta_P",
        GateChoice::RxT | GateChoice::RxP => "omega_G",
    };
    let mask_string = mask_arg.unwrap_or(default_mask).to_string();
    let mask: Vec<&str> = mask_string.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if mask.is_empty() {
        return Err(CliError::Usage("mask must name at least one parameter".into()));
    }
    let run = &resolved.config.run;
    let options = OptimizeGateOptions {
        tau_coarse: tau_coarse.unwrap_or(1e-2),
        tau_fine: run.tau_ns,
        fidelity_samples: run.fidelity_samples,
        rng_seed: run.rng_seed,
        nelder_mead: NelderMeadOptions {
            max_evals: max_evals.unwrap_or(300),
            ..Default::default()
        },
    };
    let seed_infidelity = gate_infidelity(
        &engine,
        &template,
        &choice.ideal(),
        options.tau_coarse,
        options.fidelity_samples,
        options.rng_seed,
    )?;
    let outcome = optimize_gate(&engine, &template, &choice.ideal(), &mask, &options)?;

    let mut trace_csv = String::from("iteration,best_infidelity,simplex_diameter,evals\n");
    for row in &outcome.trace.rows {
        writeln!(
            trace_csv,
            "{},{},{},{}",
            row.iteration, row.best_objective, row.simplex_diameter, row.evals
        )
        .unwrap();
    }
    resolved.write_file(&format!("optimize_{}_trace.csv", choice.name()), &trace_csv)?;

    // Optimized parameters back into config form when the gate is the CNOT.
    if let Some(sched) = ScheduleConfig::from_template(&outcome.optimized) {
        let mut updated = resolved.config.clone();
        updated.schedule = sched;
        resolved.write_file("optimized_config.toml", &updated.to_toml()?)?;
    }

    #[derive(Serialize)]
    struct OptimizeResult {
        command: &'static str,
        gate: &'static str,
        device_hash: String,
        mask: Vec<String>,
        seed_infidelity_coarse: f64,
        best_infidelity_coarse: f64,
        final_infidelity_fine: f64,
        evals: usize,
        penalty_evals: usize,
        unitarity_defect: f64,
        optimized_parameters: Vec<(String, f64)>,
        optimized_schedule: GateTemplate,
        report: GateReport,
    }
    let result = OptimizeResult {
        command: "optimize",
        gate: choice.name(),
        device_hash: resolved.config.device.content_hash(),
        mask: mask.iter().map(|s| s.to_string()).collect(),
        seed_infidelity_coarse: seed_infidelity,
        best_infidelity_coarse: outcome.coarse_infidelity,
        final_infidelity_fine: outcome.fine_infidelity,
        evals: outcome.trace.rows.last().map(|r| r.evals).unwrap_or(0),
        penalty_evals: outcome.trace.penalty_evals,
        unitarity_defect: outcome.propagator.unitarity_defect(),
        optimized_parameters: mask
            .iter()
            .map(|name| (name.to_string(), outcome.optimized.get(name).unwrap()))
            .collect(),
        optimized_schedule: outcome.optimized.clone(),
        report: outcome.report,
    };
    resolved.write_json(&format!("optimize_{}.json", choice.name()), &result)?;
    resolved.echo_config()?;
    println!(
        "I: seed {:.6} -> coarse best {:.6} -> fine {:.6} (F = {:.6})",
        result.seed_infidelity_coarse,
        result.best_infidelity_coarse,
        result.final_infidelity_fine,
        result.report.fidelity
    );
    Ok(())
}

/// `trotter-scan`: state error of the Suzuki-Trotter propagation against the
/// exact-diagonalization reference over a τ list.
pub fn cmd_trotter_scan(
    resolved: &Resolved,
    taus_arg: Option<&str>,
    duration: f64,
) -> Result<(), CliError> {
    let taus: Vec<f64> = match taus_arg {
        Some(list) => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad tau value '{s}'")))
            })
            .collect::<Result<_, _>>()?,
        // Log-spaced default covering the reference scan window.
        None => (0..=12)
            .map(|k| 10f64.powf(-3.0 + 2.0 * k as f64 / 12.0))
            .collect(),
    };
    let model = resolved.model()?;
    let engine = TrotterEngine::new(&model)?;
    let scan = engine.trotter_error_scan(&taus, duration)?;
    let mut csv = String::from("tau_ns,state_error\n");
    for (tau, err) in &scan {
        writeln!(csv, "{tau},{err}").unwrap();
    }
    resolved.write_file("trotter_scan.csv", &csv)?;
    resolved.echo_config()?;
    for (tau, err) in &scan {
        println!("tau = {tau:.3e} ns -> state error {err:.3e}");
    }
    Ok(())
}

/// `tomography`: basis-input tomography table of a gate.
pub fn cmd_tomography(resolved: &Resolved, gate: &str) -> Result<(), CliError> {
    let choice = GateChoice::parse(gate)?;
    let model = resolved.model()?;
    let engine = TrotterEngine::new(&model)?;
    let template = choice.template(&resolved.config);
    let run = &resolved.config.run;
    let (report, _) = score_schedule(
        &engine,
        &template,
        &choice.ideal(),
        run.tau_ns,
        run.fidelity_samples,
        run.rng_seed,
    )?;

    let mut csv = String::from("input,p00,p01,p10,p11,leakage,dominant,dominant_phase_rad\n");
    for row in &report.tomography {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            row.input,
            row.populations[0],
            row.populations[1],
            row.populations[2],
            row.populations[3],
            row.leakage,
            row.dominant,
            row.dominant_phase
        )
        .unwrap();
    }
    resolved.write_file(&format!("tomography_{}.csv", choice.name()), &csv)?;

    #[derive(Serialize)]
    struct TomographyResult {
        command: &'static str,
        gate: &'static str,
        device_hash: String,
        schedule: GateTemplate,
        fidelity: f64,
        tau_ns: f64,
        rows: Vec<TomographyRow>,
    }
    let result = TomographyResult {
        command: "tomography",
        gate: choice.name(),
        device_hash: resolved.config.device.content_hash(),
        schedule: template,
        fidelity: report.fidelity,
        tau_ns: run.tau_ns,
        rows: report.tomography.clone(),
    };
    resolved.write_json(&format!("tomography_{}.json", choice.name()), &result)?;
    resolved.echo_config()?;
    for row in &result.rows {
        println!(
            "|{}> -> dominant |{}>, P = {:.4}, dphi = {:+.4} rad, leakage {:.2e}",
            row.input,
            ["00", "01", "10", "11"][row.dominant],
            row.populations[row.dominant],
            row.dominant_phase,
            row.leakage
        );
    }
    Ok(())
}
