//! The `spin2-ramsey` command line.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 fit did not converge
//! (the report is still written). Errors go to stderr as a single line
//! `error[<kind>]: <message>`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use crate::error::Error;
use crate::fit::{
    fit_fringe, neighbor_average, sensitivity, FitConfig, FitResult, FitTarget, ParamSetting,
    SensitivityReport, DEFAULT_DELTA_KHZ,
};
use crate::io::{
    parse_sequence, read_scan, write_scan, write_table, FitOptions, FringeOptions, Merge, Mode,
    RabiOptions, RunConfig, SequenceOptions,
};
use crate::ramsey::{
    ensemble_average, fringe_scan, phase_scan, rabi_populations, sequence_evolve_with_offsets,
    FrequencySpread, FringeParams, FringeScan, PhaseConvention,
};
use crate::spin2::{SpinState, Sublevel, DIM};

/// Relative T mismatch above which the fit report flags a nominal-vs-fit discrepancy.
const T_DISCREPANCY: f64 = 0.03;

#[derive(Parser, Debug)]
#[command(
    name = "spin2-ramsey",
    version,
    about = "Spin-2 Ramsey interferometry: simulate, fit and analyse five-port fringes",
    after_help = "Units: frequencies in kHz, times in us, angles in rad.\n\
                  Without --out, results go to stdout. A --config TOML file supplies any flag; \
                  flags given on the command line win."
)]
struct Cli {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Populations after a single pulse versus pulse width (t_us grid)
    SimulateRabi(RabiOptions),
    /// Simulated Ramsey fringe scan (f_khz grid) or phase scan (--vs-phase)
    SimulateFringe(FringeOptions),
    /// Fit the closed-form fringe to a scan CSV
    Fit(FitOptions),
    /// Average phase sensitivity at the fringe peaks of a scan CSV
    Sensitivity(FitOptions),
    /// Evolve a pulse sequence file, optionally over a dephasing ensemble
    Sequence(SequenceOptions),
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
    NotConverged(String),
}

impl Failure {
    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Lib(e) => e.kind(),
            Failure::NotConverged(_) => "non-converged",
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            Failure::NotConverged(_) => 2,
            _ => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::NotConverged(m) => m.clone(),
            Failure::Lib(e) => e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .try_init();

    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let rendered = e.render().to_string();
            let first = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!(
                "error[usage]: {}",
                one_line(first.trim_start_matches("error:").trim())
            );
            return 1;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error[{}]: {}", f.kind(), one_line(&f.message()));
            f.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            Error::Parse { line, message } => Failure::Lib(Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            }),
            other => Failure::Lib(other),
        })?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(config.seed);
    let out = cli.out.clone().or(config.out.clone());
    let out = out.as_deref();

    let command = match cli.command {
        Some(c) => {
            if let Some(mode) = config.mode {
                if mode != mode_of(&c) {
                    warn!("config mode {mode:?} overridden by subcommand");
                }
            }
            c
        }
        None => match config.mode {
            Some(Mode::SimulateRabi) => Command::SimulateRabi(RabiOptions::default()),
            Some(Mode::SimulateFringe) => Command::SimulateFringe(FringeOptions::default()),
            Some(Mode::Fit) => Command::Fit(FitOptions::default()),
            Some(Mode::Sensitivity) => Command::Sensitivity(FitOptions::default()),
            Some(Mode::Sequence) => Command::Sequence(SequenceOptions::default()),
            None => return Err(usage("no subcommand given (and no `mode` in --config)")),
        },
    };
    match command {
        Command::SimulateRabi(o) => simulate_rabi(o.merge(config.simulate_rabi), out),
        Command::SimulateFringe(o) => simulate_fringe(o.merge(config.simulate_fringe), seed, out),
        Command::Fit(o) => fit(o.merge(config.fit), out),
        Command::Sensitivity(o) => run_sensitivity(o.merge(config.sensitivity), out),
        Command::Sequence(o) => sequence(o.merge(config.sequence), seed, out),
    }
}

fn mode_of(c: &Command) -> Mode {
    match c {
        Command::SimulateRabi(_) => Mode::SimulateRabi,
        Command::SimulateFringe(_) => Mode::SimulateFringe,
        Command::Fit(_) => Mode::Fit,
        Command::Sensitivity(_) => Mode::Sensitivity,
        Command::Sequence(_) => Mode::Sequence,
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| {
            Failure::Lib(Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            )))
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    bytes
}

/// `start, start + step, ...` up to and including `stop` (within rounding).
fn grid(start: f64, stop: f64, step: f64, what: &str) -> Result<Vec<f64>, Failure> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err(usage(format!("{what} grid bounds must be finite")));
    }
    if step <= 0.0 {
        return Err(usage(format!(
            "{what} grid step must be positive, got {step}"
        )));
    }
    if stop < start {
        return Err(usage(format!(
            "{what} grid is empty (stop {stop} < start {start})"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

fn parse_convention(s: Option<&str>) -> Result<PhaseConvention, Failure> {
    match s.unwrap_or("sum") {
        "sum" => Ok(PhaseConvention::Sum),
        "difference" => Ok(PhaseConvention::Difference),
        other => Err(usage(format!(
            "unknown convention {other:?} (expected sum or difference)"
        ))),
    }
}

fn parse_level(s: &str) -> Result<Sublevel, Failure> {
    s.parse().map_err(|e: Error| usage(e.to_string()))
}

fn simulate_rabi(o: RabiOptions, out: Option<&Path>) -> Result<(), Failure> {
    let rabi_khz = o.rabi_khz.unwrap_or(8.8);
    let omega = 2.0 * std::f64::consts::PI * rabi_khz * 1e3;
    let times = grid(
        o.t_start_us.unwrap_or(0.0),
        o.t_stop_us.unwrap_or(230.0),
        o.t_step_us.unwrap_or(1.0),
        "t_us",
    )?;
    let rows = times
        .iter()
        .map(|&t| Ok((t, *rabi_populations(omega, t * 1e-6)?.as_array())))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut buf = Vec::new();
    write_table(&mut buf, "t_us", &rows)?;
    emit(out, &buf)
}

fn simulate_fringe(o: FringeOptions, seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    let initial = SpinState::basis(parse_level(o.initial.as_deref().unwrap_or("+2"))?);
    let mut buf = Vec::new();
    if o.vs_phase.unwrap_or(false) {
        if o.noise.is_some() || o.stddev.is_some() {
            return Err(usage(
                "--noise and --stddev apply to frequency scans, not --vs-phase",
            ));
        }
        let scan = phase_scan(o.phase_points.unwrap_or(64), o.eta.unwrap_or(1.0), &initial)?;
        let rows: Vec<(f64, [f64; DIM])> =
            scan.phases.iter().copied().zip(scan.populations).collect();
        write_table(&mut buf, "phi_rad", &rows)?;
        return emit(out, &buf);
    }
    let params = FringeParams {
        f0_khz: o.f0_khz.unwrap_or(195.0),
        t_us: o.t_us.unwrap_or(290.0),
        delta_khz: o.delta_khz.unwrap_or(DEFAULT_DELTA_KHZ),
        phi: o.phi.unwrap_or(0.14),
    };
    let step = o.f_step_khz.unwrap_or(0.25);
    let freqs = grid(
        o.f_start_khz.unwrap_or(175.0),
        o.f_stop_khz.unwrap_or(210.0),
        step,
        "f_khz",
    )?;
    info!("frequency grid: {} points, step {step} kHz", freqs.len());
    let convention = parse_convention(o.convention.as_deref())?;
    let mut scan = fringe_scan(&freqs, &params, &initial, convention)?;
    if let Some(sigma) = o.noise {
        let seed = seed.ok_or_else(|| usage("--noise needs an explicit --seed"))?;
        scan = scan.with_population_noise(sigma, seed)?;
    }
    if let Some(s) = o.stddev {
        if !(s.is_finite() && s >= 0.0) {
            return Err(usage(format!("--stddev must be non-negative, got {s}")));
        }
        scan = scan.with_stddev(Some([s; DIM]));
    }
    write_scan(&mut buf, &scan)?;
    emit(out, &buf)
}

#[derive(Serialize)]
struct ScanSummary {
    path: String,
    rows: usize,
    grid_step_khz: Option<f64>,
    has_stddev: bool,
    window: Option<usize>,
}

#[derive(Serialize)]
struct TCheck {
    nominal_t_us: f64,
    fitted_t_us: f64,
    relative_difference: f64,
    discrepancy: bool,
}

#[derive(Serialize)]
struct FitReport<'a> {
    mode: &'static str,
    scan: ScanSummary,
    fit: &'a FitResult,
    t_check: Option<TCheck>,
}

#[derive(Serialize)]
struct SensitivityOutput<'a> {
    mode: &'static str,
    scan: ScanSummary,
    fit: FitSummary<'a>,
    sensitivity: &'a SensitivityReport,
}

#[derive(Serialize)]
struct FitSummary<'a> {
    params: &'a FringeParams,
    amplitude_scale: f64,
    converged: bool,
    ill_conditioned: bool,
    sse: f64,
}

/// Loads the scan and applies the optional neighbour average.
fn prepare_scan(o: &FitOptions) -> Result<(FringeScan, ScanSummary), Failure> {
    let path = o.scan.as_ref().ok_or_else(|| usage("no scan file given"))?;
    let file = fs::File::open(path).map_err(|e| {
        Failure::Lib(Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        )))
    })?;
    let raw = read_scan(std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, message } => Failure::Lib(Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        }),
        other => Failure::Lib(other),
    })?;
    let scan = match o.window {
        Some(w) => neighbor_average(&raw, w)?,
        None => raw,
    };
    let summary = ScanSummary {
        path: path.display().to_string(),
        rows: scan.len(),
        grid_step_khz: scan.grid_step(),
        has_stddev: scan.has_stddev(),
        window: o.window,
    };
    Ok((scan, summary))
}

fn fit_config(o: &FitOptions) -> Result<FitConfig, Failure> {
    let f0 = o
        .f0_khz
        .ok_or_else(|| usage("--f0-khz (initial guess) is required"))?;
    let t = o
        .t_us
        .ok_or_else(|| usage("--t-us (initial guess) is required"))?;
    let mut config = FitConfig::new(f0, t);
    config.phi.guess = o.phi.unwrap_or(0.0);
    let delta = o.delta_khz.unwrap_or(DEFAULT_DELTA_KHZ);
    config.delta = if o.free_delta.unwrap_or(false) {
        ParamSetting::free(delta, 0.2 * delta, 5.0 * delta)
    } else {
        ParamSetting::fixed(delta)
    };
    if o.free_amplitude.unwrap_or(false) {
        config.amplitude_scale = ParamSetting::free(1.0, 0.5, 1.5);
    }
    config.target = match o.target.as_deref().unwrap_or("+2") {
        "all" => FitTarget::All,
        label => FitTarget::Component(parse_level(label)?),
    };
    config.weighted = o.weighted.unwrap_or(false);
    config.multistart = o.multistart.unwrap_or(true);
    if let Some(n) = o.max_iter {
        config.max_iterations = n;
    }
    if let Some(tol) = o.tol {
        config.tolerance = tol;
    }
    config.convention = parse_convention(o.convention.as_deref())?;
    Ok(config)
}

fn overlay_path(o: &FitOptions, out: Option<&Path>) -> Option<PathBuf> {
    o.overlay
        .clone()
        .or_else(|| out.map(|p| p.with_extension("overlay.csv")))
}

fn fit(o: FitOptions, out: Option<&Path>) -> Result<(), Failure> {
    let (scan, summary) = prepare_scan(&o)?;
    let config = fit_config(&o)?;
    let result = fit_fringe(&scan, &config)?;

    let t_check = o.nominal_t_us.map(|nominal| {
        let relative_difference = (result.params.t_us - nominal) / nominal;
        TCheck {
            nominal_t_us: nominal,
            fitted_t_us: result.params.t_us,
            relative_difference,
            discrepancy: relative_difference.abs() > T_DISCREPANCY,
        }
    });
    if let Some(c) = t_check.as_ref().filter(|c| c.discrepancy) {
        warn!(
            "fitted T {:.1} us differs from nominal {:.1} us by {:.1}%",
            c.fitted_t_us,
            c.nominal_t_us,
            100.0 * c.relative_difference
        );
    }
    let report = FitReport {
        mode: "fit",
        scan: summary,
        fit: &result,
        t_check,
    };
    emit(out, &to_json(&report))?;

    if let Some(path) = overlay_path(&o, out) {
        let rows: Vec<(f64, [f64; DIM])> = scan
            .frequencies()
            .into_iter()
            .map(|f| (f, Sublevel::ALL.map(|l| result.model(f, l))))
            .collect();
        let mut buf = Vec::new();
        write_table(&mut buf, "f_khz", &rows)?;
        emit(Some(&path), &buf)?;
    }

    if !result.converged {
        return Err(Failure::NotConverged(format!(
            "fit did not converge after {} iterations",
            result.iterations
        )));
    }
    if result.ill_conditioned {
        return Err(Failure::NotConverged(
            "fit is ill-conditioned (parameters not identifiable from this scan)".into(),
        ));
    }
    Ok(())
}

fn run_sensitivity(o: FitOptions, out: Option<&Path>) -> Result<(), Failure> {
    let (scan, summary) = prepare_scan(&o)?;
    if !scan.has_stddev() {
        return Err(usage(
            "scan has no stddev columns; pass --window 3 to estimate the spread",
        ));
    }
    let config = fit_config(&o)?;
    let result = fit_fringe(&scan, &config)?;
    if !result.converged || result.ill_conditioned {
        return Err(Failure::NotConverged(
            "fit did not converge; sensitivity not computed".into(),
        ));
    }
    let report = sensitivity(&scan, &result)?;
    let output = SensitivityOutput {
        mode: "sensitivity",
        scan: summary,
        fit: FitSummary {
            params: &result.params,
            amplitude_scale: result.amplitude_scale,
            converged: result.converged,
            ill_conditioned: result.ill_conditioned,
            sse: result.sse,
        },
        sensitivity: &report,
    };
    emit(out, &to_json(&output))
}

#[derive(Serialize)]
struct SequenceOutput {
    mode: &'static str,
    labels: [String; DIM],
    populations: [f64; DIM],
    offset_khz: f64,
    spread: Option<FrequencySpread>,
    samples: Option<usize>,
    seed: Option<u64>,
}

fn sequence(o: SequenceOptions, seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    let path = o
        .file
        .as_ref()
        .ok_or_else(|| usage("no sequence file given"))?;
    let text = fs::read_to_string(path).map_err(|e| {
        Failure::Lib(Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        )))
    })?;
    let seq = parse_sequence(&text)?;
    let offset = o.offset_khz.unwrap_or(0.0);
    let labels = Sublevel::ALL.map(|l| l.to_string());

    let output = if o.gradient_khz.is_some() || o.fluctuation_khz.is_some() {
        if offset != 0.0 {
            return Err(usage(
                "--offset-khz cannot be combined with an ensemble spread",
            ));
        }
        let seed = seed.ok_or_else(|| usage("an ensemble run needs an explicit --seed"))?;
        let spread = FrequencySpread {
            gradient_khz: o.gradient_khz.unwrap_or(0.0),
            fluctuation_khz: o.fluctuation_khz.unwrap_or(0.0),
        };
        let samples = o.samples.unwrap_or(1000);
        let p = ensemble_average(&seq, spread, samples, seed)?;
        SequenceOutput {
            mode: "sequence",
            labels,
            populations: *p.as_array(),
            offset_khz: offset,
            spread: Some(spread),
            samples: Some(samples),
            seed: Some(seed),
        }
    } else {
        if o.samples.is_some() {
            warn!("--samples ignored without a spread");
        }
        let p = sequence_evolve_with_offsets(&seq, offset, &[])?.populations();
        SequenceOutput {
            mode: "sequence",
            labels,
            populations: *p.as_array(),
            offset_khz: offset,
            spread: None,
            samples: None,
            seed: None,
        }
    };
    emit(out, &to_json(&output))
}
