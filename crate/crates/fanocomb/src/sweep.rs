//! Deterministic parameter sweeps, the calibration search for the shipped
//! defaults, and CSV/JSON emission.
//!
//! A sweep walks one whitelisted parameter over a uniform grid and records,
//! at every point, the enhancement factor, the three pairwise output
//! log-negativities, the three entanglement potentials, a stability flag,
//! and the steady-state residual. Solver failures flag the row and the
//! sweep continues; the run only errors if more than half of the grid
//! fails.

use crate::fluctuations::drift_diffusion;
use crate::measures::{entanglement_potential, logneg, output_covariance, MeasureError};
use crate::params::{volt_to_omega, SystemParams};
use crate::steady::{solve_steady_state, SteadyState, EF_UNDERFLOW_FLOOR};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Fixed CSV column contract. Consumers key on this exact header.
pub const CSV_HEADER: &str =
    "omega_qe,volts,ef,en_12,en_13,en_23,ep_1,ep_2,ep_3,stable,residual_norm";

/// Width of the default emitter-frequency window, in pump units above the
/// idler frequency.
pub const DEFAULT_WINDOW: f64 = 5e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    OmegaQe,
    Volts,
    F,
    ChiFwm,
    EpsL1,
    EpsL2,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self, SweepError> {
        Ok(match name {
            "omega_qe" => SweepAxis::OmegaQe,
            "volts" => SweepAxis::Volts,
            "f" => SweepAxis::F,
            "chi_fwm" => SweepAxis::ChiFwm,
            "eps_l1" => SweepAxis::EpsL1,
            "eps_l2" => SweepAxis::EpsL2,
            _ => return Err(SweepError::UnknownAxis { name: name.to_string() }),
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::OmegaQe => "omega_qe",
            SweepAxis::Volts => "volts",
            SweepAxis::F => "f",
            SweepAxis::ChiFwm => "chi_fwm",
            SweepAxis::EpsL1 => "eps_l1",
            SweepAxis::EpsL2 => "eps_l2",
        }
    }
}

/// Evaluation strategy. Warm starting reuses the previous grid point's
/// solution as the Newton guess and is strictly sequential; the parallel
/// mode cold-starts every point so the result cannot depend on scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    #[default]
    Warm,
    Parallel {
        threads: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub mode: SweepMode,
}

impl SweepSpec {
    /// The default emitter-frequency window: from the idler resonance up
    /// `DEFAULT_WINDOW` pump units, 101 points, warm-started.
    pub fn default_window(p: &SystemParams) -> Self {
        SweepSpec {
            axis: SweepAxis::OmegaQe,
            from: p.omega3,
            to: p.omega3 + DEFAULT_WINDOW,
            steps: 101,
            mode: SweepMode::Warm,
        }
    }
}

/// One sweep grid point. Empty optionals mark values that could not be
/// computed; `stable == false` rows never carry entanglement values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub omega_qe: f64,
    pub volts: Option<f64>,
    pub ef: Option<f64>,
    pub en_12: Option<f64>,
    pub en_13: Option<f64>,
    pub en_23: Option<f64>,
    pub ep_1: Option<f64>,
    pub ep_2: Option<f64>,
    pub ep_3: Option<f64>,
    pub stable: bool,
    pub residual_norm: Option<f64>,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep needs at least 2 grid points, got {steps}")]
    TooFewSteps { steps: usize },
    #[error("unknown sweep axis `{name}` (expected omega_qe, volts, f, chi_fwm, eps_l1, or eps_l2)")]
    UnknownAxis { name: String },
    #[error("unknown output format `{name}` (expected csv or json)")]
    UnknownFormat { name: String },
    #[error("sweep range [{from}, {to}] must be finite")]
    NonFiniteRange { from: f64, to: f64 },
    #[error("axis {axis} requires non-negative values, got {value}")]
    NegativeAxisValue { axis: &'static str, value: f64 },
    #[error("emitter frequency must stay positive across the sweep, got {value}")]
    NonPositiveFrequency { value: f64 },
    #[error("{failed} of {total} sweep points failed to solve")]
    TooManyFailures { failed: usize, total: usize },
    #[error("calibration search exhausted; nearest achieved dip {best_dip:.3e}, peak {best_peak:.3e}")]
    CalibrationExhausted { best_dip: f64, best_peak: f64 },
    #[error("could not build the worker pool: {msg}")]
    ThreadPool { msg: String },
    #[error("no records to emit")]
    NoRecords,
    #[error("CSV parse error on line {line}: {msg}")]
    CsvParse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a * (1.0 - t) + b * t
}

struct GridPoint {
    params: SystemParams,
    volts: Option<f64>,
}

/// Builds the per-point parameter sets. The voltage axis maps its endpoints
/// through the affine voltage model and then interpolates in frequency, so
/// a voltage sweep and the equivalent emitter-frequency sweep hit exactly
/// the same floating-point grid.
fn build_grid(p: &SystemParams, spec: &SweepSpec) -> Result<Vec<GridPoint>, SweepError> {
    if spec.steps < 2 {
        return Err(SweepError::TooFewSteps { steps: spec.steps });
    }
    if !spec.from.is_finite() || !spec.to.is_finite() {
        return Err(SweepError::NonFiniteRange { from: spec.from, to: spec.to });
    }
    if matches!(spec.axis, SweepAxis::F | SweepAxis::ChiFwm | SweepAxis::EpsL1 | SweepAxis::EpsL2)
    {
        for value in [spec.from, spec.to] {
            if value < 0.0 {
                return Err(SweepError::NegativeAxisValue { axis: spec.axis.as_str(), value });
            }
        }
    }

    let denom = (spec.steps - 1) as f64;
    let mut grid = Vec::with_capacity(spec.steps);
    for i in 0..spec.steps {
        let t = i as f64 / denom;
        let mut params = p.clone();
        let mut volts = None;
        match spec.axis {
            SweepAxis::OmegaQe => {
                params.omega_qe = lerp(spec.from, spec.to, t);
            }
            SweepAxis::Volts => {
                let a = volt_to_omega(spec.from, p.volt_anchor, p.volt_slope);
                let b = volt_to_omega(spec.to, p.volt_anchor, p.volt_slope);
                params.omega_qe = lerp(a, b, t);
                volts = Some(lerp(spec.from, spec.to, t));
            }
            SweepAxis::F => params.f = lerp(spec.from, spec.to, t),
            SweepAxis::ChiFwm => params.chi_fwm = lerp(spec.from, spec.to, t),
            SweepAxis::EpsL1 => params.eps_l[0] = lerp(spec.from, spec.to, t),
            SweepAxis::EpsL2 => params.eps_l[1] = lerp(spec.from, spec.to, t),
        }
        if params.omega_qe <= 0.0 {
            return Err(SweepError::NonPositiveFrequency { value: params.omega_qe });
        }
        grid.push(GridPoint { params, volts });
    }
    Ok(grid)
}

struct PointOutcome {
    record: SweepRecord,
    main: Option<SteadyState>,
    reference: Option<SteadyState>,
    failed: bool,
}

/// Evaluates one grid point: steady state, enhancement factor against the
/// decoupled-emitter reference, stability, and the output-mode measures.
fn evaluate_point(
    p: &SystemParams,
    volts: Option<f64>,
    warm_main: Option<&SteadyState>,
    warm_ref: Option<&SteadyState>,
) -> PointOutcome {
    let mut record = SweepRecord {
        omega_qe: p.omega_qe,
        volts,
        ef: None,
        en_12: None,
        en_13: None,
        en_23: None,
        ep_1: None,
        ep_2: None,
        ep_3: None,
        stable: false,
        residual_norm: None,
    };

    let main = match solve_steady_state(p, warm_main) {
        Ok(s) => s,
        Err(_) => {
            return PointOutcome { record, main: None, reference: None, failed: true };
        }
    };
    record.residual_norm = Some(main.residual_norm);

    let mut ref_params = p.clone();
    ref_params.f = 0.0;
    let reference = match solve_steady_state(&ref_params, warm_ref) {
        Ok(s) => s,
        Err(_) => {
            return PointOutcome { record, main: Some(main), reference: None, failed: true };
        }
    };
    let bare = reference.alpha_a[2].norm_sqr();
    if bare < EF_UNDERFLOW_FLOOR {
        return PointOutcome { record, main: Some(main), reference: Some(reference), failed: true };
    }
    record.ef = Some(main.alpha_a[2].norm_sqr() / bare);

    let dd = drift_diffusion(p, &main);
    record.stable = dd.hurwitz;
    if !dd.hurwitz {
        // A genuinely unstable operating point is an answer, not a failure.
        return PointOutcome { record, main: Some(main), reference: Some(reference), failed: false };
    }

    let measured = (|| -> Result<([f64; 3], [f64; 3]), MeasureError> {
        let v = crate::fluctuations::solve_lyapunov(&dd.a, &dd.d)?;
        let out = output_covariance(&v, &dd.a, &dd.d, p)?;
        let en = [logneg(&out, (0, 1))?, logneg(&out, (0, 2))?, logneg(&out, (1, 2))?];
        let ep = [
            entanglement_potential(&out.mode_block(0))?,
            entanglement_potential(&out.mode_block(1))?,
            entanglement_potential(&out.mode_block(2))?,
        ];
        Ok((en, ep))
    })();
    let failed = match measured {
        Ok((en, ep)) => {
            record.en_12 = Some(en[0]);
            record.en_13 = Some(en[1]);
            record.en_23 = Some(en[2]);
            record.ep_1 = Some(ep[0]);
            record.ep_2 = Some(ep[1]);
            record.ep_3 = Some(ep[2]);
            false
        }
        Err(_) => true,
    };
    PointOutcome { record, main: Some(main), reference: Some(reference), failed }
}

/// Runs a sweep and returns one record per grid point, in grid order.
///
/// Identical inputs produce bit-identical records in either mode; the
/// parallel mode additionally guarantees independence from the thread
/// count because every point is cold-started.
pub fn run_sweep(p: &SystemParams, spec: &SweepSpec) -> Result<Vec<SweepRecord>, SweepError> {
    let grid = build_grid(p, spec)?;
    let outcomes: Vec<(SweepRecord, bool)> = match spec.mode {
        SweepMode::Warm => {
            let mut warm_main: Option<SteadyState> = None;
            let mut warm_ref: Option<SteadyState> = None;
            let mut out = Vec::with_capacity(grid.len());
            for gp in &grid {
                let o =
                    evaluate_point(&gp.params, gp.volts, warm_main.as_ref(), warm_ref.as_ref());
                if let Some(s) = o.main {
                    warm_main = Some(s);
                }
                if let Some(s) = o.reference {
                    warm_ref = Some(s);
                }
                out.push((o.record, o.failed));
            }
            out
        }
        SweepMode::Parallel { threads } => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| SweepError::ThreadPool { msg: e.to_string() })?;
            pool.install(|| {
                grid.par_iter()
                    .map(|gp| {
                        let o = evaluate_point(&gp.params, gp.volts, None, None);
                        (o.record, o.failed)
                    })
                    .collect()
            })
        }
    };

    let failed = outcomes.iter().filter(|(_, f)| *f).count();
    let total = outcomes.len();
    if failed * 2 > total {
        return Err(SweepError::TooManyFailures { failed, total });
    }
    Ok(outcomes.into_iter().map(|(r, _)| r).collect())
}

/// Number of records where the numerics failed: either the steady solve
/// produced nothing, or a stable point could not be measured.
pub fn failed_points(records: &[SweepRecord]) -> usize {
    records
        .iter()
        .filter(|r| r.ef.is_none() || (r.stable && r.en_12.is_none()))
        .count()
}

/// Provenance block attached to JSON output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub axis: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub warm_start: bool,
    pub failed_points: usize,
}

impl RunManifest {
    pub fn new(p: &SystemParams, spec: &SweepSpec, records: &[SweepRecord]) -> Self {
        RunManifest {
            tool: "fanocomb".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: p.config_sha256(),
            axis: spec.axis.as_str().to_string(),
            from: spec.from,
            to: spec.to,
            steps: spec.steps,
            warm_start: matches!(spec.mode, SweepMode::Warm),
            failed_points: failed_points(records),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(name: &str) -> Result<Self, SweepError> {
        match name {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(SweepError::UnknownFormat { name: name.to_string() }),
        }
    }
}

/// 17 significant digits: enough for an exact f64 round-trip, so emitted
/// files parse back to the bit-identical value.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn emit_csv(records: &[SweepRecord]) -> Result<String, SweepError> {
    if records.is_empty() {
        return Err(SweepError::NoRecords);
    }
    let mut out = String::with_capacity(64 + records.len() * 256);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(r.omega_qe),
            fmt_opt(r.volts),
            fmt_opt(r.ef),
            fmt_opt(r.en_12),
            fmt_opt(r.en_13),
            fmt_opt(r.en_23),
            fmt_opt(r.ep_1),
            fmt_opt(r.ep_2),
            fmt_opt(r.ep_3),
            r.stable,
            fmt_opt(r.residual_norm),
        ));
    }
    Ok(out)
}

fn parse_req_f64(field: &str, line: usize, name: &str) -> Result<f64, SweepError> {
    field.parse::<f64>().map_err(|e| SweepError::CsvParse {
        line,
        msg: format!("bad {name} value `{field}`: {e}"),
    })
}

fn parse_opt_f64(field: &str, line: usize, name: &str) -> Result<Option<f64>, SweepError> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_req_f64(field, line, name).map(Some)
    }
}

/// Parses CSV produced by [`emit_csv`]; `parse_csv(emit_csv(r)) == r`.
pub fn parse_csv(text: &str) -> Result<Vec<SweepRecord>, SweepError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SweepError::CsvParse { line: 1, msg: "empty input".to_string() })?;
    if header != CSV_HEADER {
        return Err(SweepError::CsvParse {
            line: 1,
            msg: format!("unexpected header `{header}`"),
        });
    }
    let mut records = Vec::new();
    for (idx, raw) in lines.enumerate() {
        let line = idx + 2;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 11 {
            return Err(SweepError::CsvParse {
                line,
                msg: format!("expected 11 fields, got {}", fields.len()),
            });
        }
        let stable = match fields[9] {
            "true" => true,
            "false" => false,
            other => {
                return Err(SweepError::CsvParse {
                    line,
                    msg: format!("bad stable flag `{other}`"),
                })
            }
        };
        records.push(SweepRecord {
            omega_qe: parse_req_f64(fields[0], line, "omega_qe")?,
            volts: parse_opt_f64(fields[1], line, "volts")?,
            ef: parse_opt_f64(fields[2], line, "ef")?,
            en_12: parse_opt_f64(fields[3], line, "en_12")?,
            en_13: parse_opt_f64(fields[4], line, "en_13")?,
            en_23: parse_opt_f64(fields[5], line, "en_23")?,
            ep_1: parse_opt_f64(fields[6], line, "ep_1")?,
            ep_2: parse_opt_f64(fields[7], line, "ep_2")?,
            ep_3: parse_opt_f64(fields[8], line, "ep_3")?,
            stable,
            residual_norm: parse_opt_f64(fields[10], line, "residual_norm")?,
        });
    }
    Ok(records)
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    manifest: &'a RunManifest,
    records: &'a [SweepRecord],
}

pub fn emit_json(records: &[SweepRecord], manifest: &RunManifest) -> Result<String, SweepError> {
    if records.is_empty() {
        return Err(SweepError::NoRecords);
    }
    let doc = JsonDocument { manifest, records };
    let mut text = serde_json::to_string_pretty(&doc).expect("sweep records serialize");
    text.push('\n');
    Ok(text)
}

/// Serializes the records in the chosen format and writes them to `path`.
pub fn emit(
    records: &[SweepRecord],
    manifest: &RunManifest,
    format: OutputFormat,
    path: &Path,
) -> Result<(), SweepError> {
    let text = match format {
        OutputFormat::Csv => emit_csv(records)?,
        OutputFormat::Json => emit_json(records, manifest)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTargets {
    /// Largest acceptable enhancement factor exactly on the idler resonance.
    pub ef_dip_max: f64,
    /// Smallest acceptable peak enhancement factor inside the window.
    pub ef_peak_min: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets { ef_dip_max: 1e-3, ef_peak_min: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub f: f64,
    pub eps_l: [f64; 2],
    pub dip: f64,
    pub peak: f64,
    pub window: [f64; 2],
}

const CAL_PEAK_STEPS: usize = 41;
const CAL_SEED_EPS: [f64; 2] = [6.33e-6, 2.98e-5];
const CAL_DRIVE_SCALES: [f64; 6] = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125];
// Multiplicative grid over roughly two decades of emitter coupling. Built
// from literals and repeated multiplication only, so the grid (and with it
// the calibrated output) is bit-identical across platforms.
const CAL_F_START: f64 = 1e-3;
const CAL_F_RATIO: f64 = 1.122018454301963;
const CAL_F_COUNT: usize = 41;

fn ef_at(p: &SystemParams, omega_qe: f64) -> Option<f64> {
    let mut pp = p.clone();
    pp.omega_qe = omega_qe;
    let main = solve_steady_state(&pp, None).ok()?;
    pp.f = 0.0;
    let reference = solve_steady_state(&pp, None).ok()?;
    let bare = reference.alpha_a[2].norm_sqr();
    if bare < EF_UNDERFLOW_FLOOR {
        return None;
    }
    Some(main.alpha_a[2].norm_sqr() / bare)
}

struct PeakScan {
    peak: f64,
    argmax: usize,
    argmin: usize,
}

/// Warm-started enhancement-factor profile over the default window,
/// tracking where the extrema fall. Returns `None` if any point fails to
/// solve or is linearly unstable: a usable default must support the
/// fluctuation analysis everywhere in the window, and instability at high
/// drive also flags the saturation regime where the semiclassical response
/// folds over and the swept branch becomes ambiguous.
fn scan_peak(p: &SystemParams) -> Option<PeakScan> {
    let mut warm_main: Option<SteadyState> = None;
    let mut warm_ref: Option<SteadyState> = None;
    let mut best = f64::NEG_INFINITY;
    let mut worst = f64::INFINITY;
    let mut argmax = 0;
    let mut argmin = 0;
    let denom = (CAL_PEAK_STEPS - 1) as f64;
    for i in 0..CAL_PEAK_STEPS {
        let t = i as f64 / denom;
        let mut pp = p.clone();
        pp.omega_qe = lerp(p.omega3, p.omega3 + DEFAULT_WINDOW, t);
        let main = solve_steady_state(&pp, warm_main.as_ref()).ok()?;
        if !drift_diffusion(&pp, &main).hurwitz {
            return None;
        }
        let mut pr = pp.clone();
        pr.f = 0.0;
        let reference = solve_steady_state(&pr, warm_ref.as_ref()).ok()?;
        let bare = reference.alpha_a[2].norm_sqr();
        if bare < EF_UNDERFLOW_FLOOR {
            return None;
        }
        let ef = main.alpha_a[2].norm_sqr() / bare;
        if ef > best {
            best = ef;
            argmax = i;
        }
        if ef < worst {
            worst = ef;
            argmin = i;
        }
        warm_main = Some(main);
        warm_ref = Some(reference);
    }
    Some(PeakScan { peak: best, argmax, argmin })
}

/// Deterministic grid search for an emitter coupling and drive strength
/// meeting the enhancement-factor targets on the default window.
///
/// The search walks drive scales strongest first and, within a scale, a
/// fixed multiplicative coupling grid. A candidate passes when the on-dip
/// enhancement is at or below `ef_dip_max`, the window maximum reaches
/// `ef_peak_min`, the minimum sits on the first grid point, the maximum is
/// interior, and the linearized dynamics are stable at every scanned
/// point. The middle of the passing coupling set is returned, keeping the
/// pick away from either cliff edge. Exhaustion reports the
/// nearest-achieved dip and peak.
pub fn calibrate_defaults(
    base: &SystemParams,
    targets: &CalibrationTargets,
) -> Result<(SystemParams, CalibrationReport), SweepError> {
    let mut best_dip = f64::INFINITY;
    let mut best_peak = 0.0_f64;
    for &scale in &CAL_DRIVE_SCALES {
        let amp = scale.sqrt();
        let eps = [CAL_SEED_EPS[0] * amp, CAL_SEED_EPS[1] * amp];
        let mut working: Vec<(f64, f64, f64)> = Vec::new();
        let mut f = CAL_F_START;
        for _ in 0..CAL_F_COUNT {
            let mut p = base.clone();
            p.eps_l = eps;
            p.f = f;
            if let Some(dip) = ef_at(&p, p.omega3) {
                best_dip = best_dip.min(dip);
                if dip <= targets.ef_dip_max {
                    if let Some(scan) = scan_peak(&p) {
                        best_peak = best_peak.max(scan.peak);
                        let interior = scan.argmax > 0 && scan.argmax < CAL_PEAK_STEPS - 1;
                        if scan.peak >= targets.ef_peak_min && interior && scan.argmin == 0 {
                            working.push((f, dip, scan.peak));
                        }
                    }
                }
            }
            f *= CAL_F_RATIO;
        }
        if !working.is_empty() {
            let (f, dip, peak) = working[working.len() / 2];
            let mut p = base.clone();
            p.eps_l = eps;
            p.f = f;
            let report = CalibrationReport {
                f,
                eps_l: eps,
                dip,
                peak,
                window: [p.omega3, p.omega3 + DEFAULT_WINDOW],
            };
            return Ok((p, report));
        }
    }
    Err(SweepError::CalibrationExhausted { best_dip, best_peak })
}
