//! Command line front end for the device model: steady-state reports,
//! parameter sweeps, target calibration, and single-point entanglement
//! measures.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 solver or calibration
//! failure, 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fanocomb::fluctuations::{drift_diffusion, solve_lyapunov};
use fanocomb::measures::{entanglement_potential, logneg, output_covariance};
use fanocomb::params::{make_params, ConfigError, SystemParams};
use fanocomb::steady::{enhancement_factor, probe_multistability, solve_steady_state_report};
use fanocomb::sweep::{
    calibrate_defaults, emit_csv, emit_json, run_sweep, CalibrationTargets, OutputFormat,
    RunManifest, SweepAxis, SweepError, SweepMode, SweepSpec,
};

/// Environment variable overriding the sweep worker thread count.
const THREADS_ENV: &str = "FANOCOMB_THREADS";

#[derive(Parser)]
#[command(
    name = "fanocomb",
    version,
    about = "Electrically tunable four-wave-mixing device model: steady states, \
             enhancement sweeps, calibration, and Gaussian entanglement measures."
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Solve the semiclassical steady state and print a JSON report.
    Steady(SteadyArgs),
    /// Sweep one parameter axis and emit per-point records (CSV or JSON).
    Sweep(SweepArgs),
    /// Search coupling and drive settings that meet enhancement targets.
    Calibrate(CalibrateArgs),
    /// Evaluate the output-mode entanglement measures at one operating point.
    Measures(MeasuresArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; the built-in calibrated defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SteadyArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Axis to sweep: omega_qe, volts, f, chi_fwm, eps_l1, or eps_l2.
    #[arg(long, default_value = "omega_qe")]
    axis: String,
    /// Axis start; defaults to the idler resonance for omega_qe.
    #[arg(long)]
    from: Option<f64>,
    /// Axis end; defaults to the idler resonance plus the standard window.
    #[arg(long)]
    to: Option<f64>,
    /// Number of grid points (endpoints included).
    #[arg(long, default_value_t = 101)]
    steps: usize,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Evaluate grid points in parallel with N workers (0 = automatic).
    #[arg(long, value_name = "N", num_args = 0..=1, default_missing_value = "0")]
    parallel: Option<usize>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Largest acceptable enhancement factor exactly on the idler resonance.
    #[arg(long, default_value_t = 1e-3)]
    dip_max: f64,
    /// Smallest acceptable peak enhancement factor inside the scan window.
    #[arg(long, default_value_t = 10.0)]
    peak_min: f64,
}

#[derive(Args)]
struct MeasuresArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output format: csv or json.
    #[arg(long, default_value = "json")]
    format: String,
}

/// Failure classified by exit code.
enum CliError {
    Usage(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Solver(m) | CliError::Io(m) => m,
        }
    }
}

fn usage(msg: impl ToString) -> CliError {
    CliError::Usage(msg.to_string())
}

fn solver(msg: impl ToString) -> CliError {
    CliError::Solver(msg.to_string())
}

fn config_err(e: ConfigError) -> CliError {
    CliError::Usage(format!("config: {e}"))
}

/// Sweep errors split by cause: bad arguments exit 1, numerical trouble
/// exits 2, filesystem trouble exits 3.
fn sweep_err(e: SweepError) -> CliError {
    match e {
        SweepError::Io(inner) => CliError::Io(inner.to_string()),
        SweepError::TooManyFailures { .. }
        | SweepError::CalibrationExhausted { .. }
        | SweepError::ThreadPool { .. } => CliError::Solver(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

fn load_params(config: &Option<PathBuf>) -> Result<SystemParams, CliError> {
    match config {
        None => Ok(SystemParams::calibrated()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Io(format!("reading {}: {e}", path.display()))
            })?;
            make_params(&text).map_err(config_err)
        }
    }
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// 17 significant digits, enough to reconstruct the exact binary64 value.
fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

fn complex_pair(z: num_complex::Complex64) -> serde_json::Value {
    json!([z.re, z.im])
}

fn cmd_steady(args: &SteadyArgs) -> Result<(), CliError> {
    let p = load_params(&args.common.config)?;
    let report = solve_steady_state_report(&p, None).map_err(solver)?;
    let multistable = probe_multistability(&p, &report.state);
    let ef = enhancement_factor(&p).map_err(solver)?;
    let s = &report.state;
    let doc = json!({
        "omega_qe": p.omega_qe,
        "alpha_c": [complex_pair(s.alpha_c[0]), complex_pair(s.alpha_c[1]), complex_pair(s.alpha_c[2])],
        "alpha_a": [complex_pair(s.alpha_a[0]), complex_pair(s.alpha_a[1]), complex_pair(s.alpha_a[2])],
        "rho_ge": complex_pair(s.rho_ge),
        "rho_ee": s.rho_ee,
        "population_inversion": s.y(),
        "residual_norm": s.residual_norm,
        "newton_iterations": report.newton_iterations,
        "continuation_steps": report.continuation_steps,
        "multistable": multistable,
        "enhancement_factor": ef,
        "config_sha256": p.config_sha256(),
    });
    let text = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";
    write_out(&args.common.out, &text)
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let p = load_params(&args.common.config)?;
    let axis = SweepAxis::parse(&args.axis).map_err(sweep_err)?;
    let format = OutputFormat::parse(&args.format).map_err(sweep_err)?;

    let (from, to) = match (args.from, args.to) {
        (Some(a), Some(b)) => (a, b),
        (None, None) if axis == SweepAxis::OmegaQe => {
            let w = SweepSpec::default_window(&p);
            (w.from, w.to)
        }
        _ => {
            return Err(usage(format!(
                "axis {} needs both --from and --to",
                axis.as_str()
            )));
        }
    };

    // --parallel switches modes; the environment variable overrides the
    // worker count and also enables parallel mode when the flag is absent.
    let env_threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
            usage(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))
        })?),
        Err(_) => None,
    };
    let mode = match (args.parallel, env_threads) {
        (_, Some(n)) => SweepMode::Parallel { threads: (n > 0).then_some(n) },
        (Some(n), None) => SweepMode::Parallel { threads: (n > 0).then_some(n) },
        (None, None) => SweepMode::Warm,
    };

    let spec = SweepSpec { axis, from, to, steps: args.steps, mode };
    let records = run_sweep(&p, &spec).map_err(sweep_err)?;
    let manifest = RunManifest::new(&p, &spec, &records);
    let text = match format {
        OutputFormat::Csv => emit_csv(&records).map_err(sweep_err)?,
        OutputFormat::Json => emit_json(&records, &manifest).map_err(sweep_err)?,
    };
    write_out(&args.common.out, &text)
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let base = load_params(&args.common.config)?;
    let targets = CalibrationTargets { ef_dip_max: args.dip_max, ef_peak_min: args.peak_min };
    let (cal, report) = calibrate_defaults(&base, &targets).map_err(sweep_err)?;

    eprintln!(
        "calibrated: f={} eps_l1={} eps_l2={} (dip {:.3e}, peak {:.3})",
        sig17(cal.f),
        sig17(cal.eps_l[0]),
        sig17(cal.eps_l[1]),
        report.dip,
        report.peak
    );

    let mut map = cal.to_flat_map();
    map.insert(
        "provenance".into(),
        serde_json::Value::from(format!(
            "calibrated by fanocomb {} for dip <= {:e} and peak >= {:e}; achieved dip {:e}, peak {:e} on [{}, {}]",
            env!("CARGO_PKG_VERSION"),
            targets.ef_dip_max,
            targets.ef_peak_min,
            report.dip,
            report.peak,
            sig17(report.window[0]),
            sig17(report.window[1]),
        )),
    );
    let text = serde_json::to_string_pretty(&map).expect("config serializes") + "\n";
    write_out(&args.common.out, &text)
}

fn cmd_measures(args: &MeasuresArgs) -> Result<(), CliError> {
    let p = load_params(&args.common.config)?;
    let format = OutputFormat::parse(&args.format).map_err(sweep_err)?;

    let report = solve_steady_state_report(&p, None).map_err(solver)?;
    let dd = drift_diffusion(&p, &report.state);
    if !dd.hurwitz {
        return Err(solver(
            "linearized dynamics are unstable at this operating point; no stationary covariance exists",
        ));
    }
    let v = solve_lyapunov(&dd.a, &dd.d).map_err(solver)?;
    let vout = output_covariance(&v, &dd.a, &dd.d, &p).map_err(solver)?;

    // Log-negativity and entanglement potential come out of the library in
    // nats; the configured logarithm base rescales them here.
    let unit = p.logneg_base.ln();
    let en = [
        logneg(&vout, (0, 1)).map_err(solver)? / unit,
        logneg(&vout, (0, 2)).map_err(solver)? / unit,
        logneg(&vout, (1, 2)).map_err(solver)? / unit,
    ];
    let mut ep = [0.0_f64; 3];
    for (i, slot) in ep.iter_mut().enumerate() {
        *slot = entanglement_potential(&vout.mode_block(i)).map_err(solver)? / unit;
    }
    let ef = enhancement_factor(&p).map_err(solver)?;

    let text = match format {
        OutputFormat::Json => {
            let doc = json!({
                "omega_qe": p.omega_qe,
                "enhancement_factor": ef,
                "en_12": en[0],
                "en_13": en[1],
                "en_23": en[2],
                "ep_1": ep[0],
                "ep_2": ep[1],
                "ep_3": ep[2],
                "logneg_base": p.logneg_base.as_str(),
                "stable": true,
                "residual_norm": report.state.residual_norm,
                "config_sha256": p.config_sha256(),
            });
            serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
        }
        OutputFormat::Csv => {
            let mut text = String::from("quantity,value\n");
            let rows: [(&str, f64); 9] = [
                ("omega_qe", p.omega_qe),
                ("enhancement_factor", ef),
                ("en_12", en[0]),
                ("en_13", en[1]),
                ("en_23", en[2]),
                ("ep_1", ep[0]),
                ("ep_2", ep[1]),
                ("ep_3", ep[2]),
                ("residual_norm", report.state.residual_norm),
            ];
            for (name, value) in rows {
                text.push_str(name);
                text.push(',');
                text.push_str(&sig17(value));
                text.push('\n');
            }
            text.push_str(&format!("logneg_base,{}\n", p.logneg_base.as_str()));
            text
        }
    };
    write_out(&args.common.out, &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap formats its own help, version, and usage diagnostics.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.verb {
        Verb::Steady(args) => cmd_steady(args),
        Verb::Sweep(args) => cmd_sweep(args),
        Verb::Calibrate(args) => cmd_calibrate(args),
        Verb::Measures(args) => cmd_measures(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fanocomb: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
