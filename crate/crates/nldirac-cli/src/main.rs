//! Command-line driver: solve the limiting ground state, solitary waves,
//! linearized spectra, charge curves, and the nonrelativistic-limit
//! eigenvalue certification, persisting deterministic CSV/JSON/SVG
//! artifacts plus a hashed run record per invocation.
//!
//! Exit codes: 0 on success, 1 on numerical failure (a solver or an
//! artifact write failed), 2 on usage errors (bad flags, bad config,
//! parameters outside the admissibility table).

mod config;
mod report;
mod svg;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use nldirac::grid::{build_grid, value_at_origin, Parity, RadialGrid};
use nldirac::lin::{
    assemble_linearization, point_spectrum_with_params, ClassifyParams, EigenvalueClass,
    SpectrumResult, WaveBuilderFn,
};
use nldirac::nls::{assemble_nls_linearization, nls_unstable_eigenvalue, solve_ground_state};
use nldirac::ops::interp;
use nldirac::perturb::{assemble_w, fixed_point_mz, grid_consistent_lambda, limit_kernel_data};
use nldirac::sweep::map_sweep;
use nldirac::vk::{charge_sweep_with_span, dirac_charge, find_charge_minimum};
use nldirac::waves::{
    polish_wave, solve_1d_closed, solve_continuation, turning_point, SolitaryWave,
    WaveConstruction,
};
use nldirac::NldError;

use config::{ExperimentConfig, RmaxRule};
use report::{fmt_float, ArtifactSink, Timings};

#[derive(Parser)]
#[command(
    name = "nldirac",
    version,
    about = "Solitary waves of the Soler-type nonlinear Dirac equation: profiles, spectra, charge curves, and nonrelativistic-limit diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the limiting (Schrödinger-type) ground state and report its
    /// unstable eigenvalue, when one exists.
    Nls(CommonArgs),
    /// Solve one solitary wave and export its profile.
    Wave(CommonArgs),
    /// Assemble the linearization at one wave and classify its spectrum.
    Spectrum(CommonArgs),
    /// Sweep the charge over a frequency range and locate its minimum.
    Vk(CommonArgs),
    /// Certify the real eigenvalue pair against the limiting problem over a
    /// list of epsilon values.
    Limit(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (flat key-value with sections); flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Spatial dimension (1, 2, or 3).
    #[arg(long)]
    n: Option<usize>,
    /// Nonlinearity power in f(s) = s^k.
    #[arg(long)]
    k: Option<u32>,
    /// Mass parameter m > 0.
    #[arg(long)]
    m: Option<f64>,
    /// Single frequency, 0 < omega < m.
    #[arg(long, conflicts_with = "omega_range")]
    omega: Option<f64>,
    /// Frequency range LO:HI:COUNT, e.g. 0.9:0.99:7.
    #[arg(long = "omega-range", value_name = "LO:HI:COUNT")]
    omega_range: Option<String>,
    /// Comma-separated epsilon values, e.g. 0.2,0.1,0.05.
    #[arg(long = "epsilon-list", value_name = "E1,E2,...")]
    epsilon_list: Option<String>,
    /// Lattice points per parity class.
    #[arg(long = "grid-n", value_name = "NPTS")]
    grid_n: Option<usize>,
    /// Domain half-width (interpreted per the configured r_max rule).
    #[arg(long)]
    rmax: Option<f64>,
    /// Output directory for artifacts.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also render SVG plots.
    #[arg(long)]
    svg: bool,
    /// Re-solve spectra on refined grids to mark refinement-stable
    /// eigenvalues.
    #[arg(long)]
    refine: bool,
}

/// CLI failure modes, mapped onto the exit-code contract.
enum CliError {
    /// Exit code 2: bad flags, bad config, inadmissible parameters.
    Usage(String),
    /// Exit code 1: a solve or an artifact write failed.
    Failure(String),
}

impl From<NldError> for CliError {
    fn from(e: NldError) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Failure(format!("artifact write failed: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Nls(a) => ("nls", a),
        Command::Wave(a) => ("wave", a),
        Command::Spectrum(a) => ("spectrum", a),
        Command::Vk(a) => ("vk", a),
        Command::Limit(a) => ("limit", a),
    };
    match run_command(name, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run_command(name: &'static str, args: &CommonArgs) -> Result<(), CliError> {
    let cfg = effective_config(name, args)?;
    match name {
        "nls" => cmd_nls(&cfg),
        "wave" => cmd_wave(&cfg),
        "spectrum" => cmd_spectrum(&cfg),
        "vk" => cmd_vk(&cfg),
        "limit" => cmd_limit(&cfg),
        _ => unreachable!("subcommand set is closed"),
    }
}

/// Merge defaults, config file, and flags; validate the result.
fn effective_config(command: &'static str, args: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = config::default_for(command);
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config '{}': {e}", path.display()))
        })?;
        config::apply_text(&mut cfg, &text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    if let Some(n) = args.n {
        cfg.n_dim = n;
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(m) = args.m {
        cfg.mass = m;
    }
    if let Some(omega) = args.omega {
        cfg.omega = Some(omega);
    }
    if let Some(s) = &args.omega_range {
        cfg.omega_range = Some(config::parse_omega_range(s).map_err(CliError::Usage)?);
    }
    if let Some(s) = &args.epsilon_list {
        cfg.epsilon_list = config::parse_epsilon_list(s).map_err(CliError::Usage)?;
    }
    if let Some(npts) = args.grid_n {
        cfg.npts = npts;
    }
    if let Some(r) = args.rmax {
        cfg.r_max = r;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.display().to_string();
    }
    if args.svg {
        cfg.svg = true;
    }
    if args.refine {
        cfg.refine = true;
    }
    config::validate(&cfg).map_err(CliError::Usage)?;
    Ok(cfg)
}

/// Enforce the configured residual bound on a solved profile.
fn residual_gate(kind: &str, residual: f64, bound: f64) -> Result<(), CliError> {
    if residual <= bound {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "{kind} residual {residual:.3e} exceeds the newton tolerance {bound:.3e}"
        )))
    }
}

fn classify_params(cfg: &ExperimentConfig) -> ClassifyParams {
    ClassifyParams {
        tol_real: cfg.tolerances.eig_real,
        tol_imag: cfg.tolerances.eig_imag,
        band_margin_frac: cfg.tolerances.band_margin,
        refine_match_frac: cfg.tolerances.refine_match,
    }
}

fn class_tag(class: EigenvalueClass) -> &'static str {
    match class {
        EigenvalueClass::PointReal => "point-real",
        EigenvalueClass::PointImaginaryGap => "point-imaginary-gap",
        EigenvalueClass::EssentialBandArtifact => "essential-band-artifact",
        EigenvalueClass::Unresolved => "unresolved",
    }
}

/// Physical domain half-width for single-frequency commands.
fn physical_r_max(cfg: &ExperimentConfig, epsilon: f64) -> f64 {
    match cfg.r_max_rule {
        RmaxRule::Fixed => cfg.r_max,
        RmaxRule::Rescaled => cfg.r_max / epsilon,
        RmaxRule::SweepSpan => unreachable!("sweep-span is validated away for this command"),
    }
}

/// Solve one wave on a physical grid of the given half-width: the exact 1D
/// construction in one dimension (Newton-polished so the profile satisfies
/// the discrete system to rounding), Newton continuation from the limiting
/// ground state otherwise.
fn build_wave(cfg: &ExperimentConfig, omega: f64, phys_r_max: f64) -> nldirac::Result<SolitaryWave> {
    let scheme = cfg.scheme.to_library();
    if cfg.n_dim == 1 {
        let grid = build_grid(1, cfg.npts, phys_r_max, scheme)?;
        let (wave, _) = solve_1d_closed(omega, cfg.k, cfg.mass, &grid)?;
        polish_wave(&wave)
    } else {
        let epsilon = (cfg.mass * cfg.mass - omega * omega).sqrt();
        let rescaled = build_grid(cfg.n_dim, cfg.npts, epsilon * phys_r_max, scheme)?;
        let state = solve_ground_state(cfg.n_dim, cfg.k, cfg.mass, &rescaled)?;
        solve_continuation(omega, &state)
    }
}

fn finish(
    sink: ArtifactSink,
    cfg: &ExperimentConfig,
    config_text: &str,
    t_start: Instant,
    t_solved: Instant,
) -> Result<(), CliError> {
    let dir = sink.dir().display().to_string();
    let solve_ms = t_solved.duration_since(t_start).as_millis() as u64;
    let total_ms = t_start.elapsed().as_millis() as u64;
    sink.finish(
        &cfg.command,
        config_text,
        Timings { solve_ms, emit_ms: total_ms - solve_ms, total_ms },
    )?;
    println!("{}: artifacts written to {}", cfg.command, dir);
    Ok(())
}

// ---------------------------------------------------------------------------
// nls

#[derive(Serialize)]
struct NlsLambdaSummary<'a> {
    schema: &'static str,
    config: &'a ExperimentConfig,
    config_text: &'a str,
    residual_norm: f64,
    /// True when a refinement-stable positive real eigenvalue exists.
    present: bool,
    lambda: Option<f64>,
    coarse: Option<f64>,
    fine: Option<f64>,
    flagged_artifact: bool,
}

fn cmd_nls(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let t_start = Instant::now();
    let grid = build_grid(cfg.n_dim, cfg.npts, cfg.r_max, cfg.scheme.to_library())?;
    let state = solve_ground_state(cfg.n_dim, cfg.k, cfg.mass, &grid)?;
    residual_gate("ground state", state.residual_norm, cfg.tolerances.newton)?;
    let lin = assemble_nls_linearization(&state);
    let eig_report = nls_unstable_eigenvalue(&lin)?;
    let t_solved = Instant::now();

    let config_text = config::canonical_text(cfg);
    let mut sink = ArtifactSink::new(Path::new(&cfg.out_dir))?;

    let rows: Vec<Vec<String>> = grid
        .nodes_even
        .iter()
        .zip(state.f.values.iter())
        .map(|(&r, &f)| vec![fmt_float(r), fmt_float(f)])
        .collect();
    sink.write_csv("nls_profile.csv", "nls_profile", &["r", "f"], &rows)?;

    sink.write_json(
        "nls_lambda.json",
        &NlsLambdaSummary {
            schema: "nls_lambda/1",
            config: cfg,
            config_text: &config_text,
            residual_norm: state.residual_norm,
            present: eig_report.lambda.is_some(),
            lambda: eig_report.lambda,
            coarse: eig_report.coarse,
            fine: eig_report.fine,
            flagged_artifact: eig_report.has_flagged_artifact(),
        },
    )?;

    if cfg.svg {
        let points: Vec<(f64, f64)> = grid
            .nodes_even
            .iter()
            .zip(state.f.values.iter())
            .map(|(&r, &f)| (r, f))
            .collect();
        let doc = svg::line_plot(
            &format!(
                "limiting ground state: n={}, k={}, m={:?}",
                cfg.n_dim, cfg.k, cfg.mass
            ),
            "r",
            "F(r)",
            &[svg::Series {
                label: "F",
                color: "#1a73e8",
                points,
                dashed: false,
                markers: false,
            }],
            &[],
        );
        sink.write_bytes("nls_profile.svg", doc.as_bytes())?;
    }

    finish(sink, cfg, &config_text, t_start, t_solved)
}

// ---------------------------------------------------------------------------
// wave

#[derive(Serialize)]
struct WaveSummary<'a> {
    schema: &'static str,
    config: &'a ExperimentConfig,
    config_text: &'a str,
    omega: f64,
    epsilon: f64,
    epsilon_over_m: f64,
    construction: &'static str,
    r_max_physical: f64,
    residual_norm: f64,
    charge: f64,
    amplitude_at_origin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    turning_point: Option<f64>,
}

fn construction_tag(c: WaveConstruction) -> &'static str {
    match c {
        WaveConstruction::ClosedForm1d => "closed-form-1d",
        WaveConstruction::Continuation => "continuation",
    }
}

/// Profile rows (r, v, u) at the even lattice; the odd-lattice component is
/// interpolated to the shared abscissas at the stencil's order.
fn profile_rows(wave: &SolitaryWave) -> Vec<Vec<String>> {
    let u_at_even = interp(&wave.grid, Parity::Odd).apply(&wave.u.values);
    wave.grid
        .nodes_even
        .iter()
        .zip(wave.v.values.iter().zip(u_at_even.iter()))
        .map(|(&r, (&v, &u))| vec![fmt_float(r), fmt_float(v), fmt_float(u)])
        .collect()
}

fn cmd_wave(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let t_start = Instant::now();
    let omega = cfg.omega.expect("validated");
    let epsilon = (cfg.mass * cfg.mass - omega * omega).sqrt();
    let phys_r_max = physical_r_max(cfg, epsilon);
    let wave = build_wave(cfg, omega, phys_r_max)?;
    residual_gate("wave", wave.residual_norm, cfg.tolerances.newton)?;
    let t_solved = Instant::now();

    let config_text = config::canonical_text(cfg);
    let mut sink = ArtifactSink::new(Path::new(&cfg.out_dir))?;
    sink.write_csv(
        "wave_profile.csv",
        "wave_profile",
        &["r", "v", "u"],
        &profile_rows(&wave),
    )?;

    let turning = if cfg.n_dim == 1 {
        Some(turning_point(omega, cfg.k, cfg.mass)?)
    } else {
        None
    };
    sink.write_json(
        "summary.json",
        &WaveSummary {
            schema: "wave_summary/1",
            config: cfg,
            config_text: &config_text,
            omega,
            epsilon,
            epsilon_over_m: epsilon / cfg.mass,
            construction: construction_tag(wave.construction),
            r_max_physical: phys_r_max,
            residual_norm: wave.residual_norm,
            charge: dirac_charge(&wave),
            amplitude_at_origin: value_at_origin(&wave.v),
            turning_point: turning,
        },
    )?;

    if cfg.svg {
        let v_pts: Vec<(f64, f64)> = wave
            .grid
            .nodes_even
            .iter()
            .zip(wave.v.values.iter())
            .map(|(&r, &v)| (r, v))
            .collect();
        let u_pts: Vec<(f64, f64)> = wave
            .grid
            .nodes_odd
            .iter()
            .zip(wave.u.values.iter())
            .map(|(&r, &u)| (r, u))
            .collect();
        let doc = svg::line_plot(
            &format!(
                "solitary wave: n={}, k={}, omega={omega:?}, m={:?}",
                cfg.n_dim, cfg.k, cfg.mass
            ),
            "r",
            "profile",
            &[
                svg::Series {
                    label: "v (major)",
                    color: "#1a73e8",
                    points: v_pts,
                    dashed: false,
                    markers: false,
                },
                svg::Series {
                    label: "u (minor)",
                    color: "#d93025",
                    points: u_pts,
                    dashed: false,
                    markers: false,
                },
            ],
            &[],
        );
        sink.write_bytes("wave_profile.svg", doc.as_bytes())?;
    }

    finish(sink, cfg, &config_text, t_start, t_solved)
}

// ---------------------------------------------------------------------------
// spectrum

#[derive(Serialize)]
struct ClassCounts {
    point_real: usize,
    point_imaginary_gap: usize,
    essential_band_artifact: usize,
    unresolved: usize,
}

#[derive(Serialize)]
struct SpectrumSummary<'a> {
    schema: &'static str,
    config: &'a ExperimentConfig,
    config_text: &'a str,
    omega: f64,
    epsilon: f64,
    band_edge: f64,
    embedded_threshold: f64,
    refined: bool,
    residual_norm: f64,
    counts: ClassCounts,
    /// Positive members of refinement-surviving real pairs, descending.
    real_pairs: Vec<f64>,
}

fn count_classes(spectrum: &SpectrumResult) -> ClassCounts {
    let mut counts = ClassCounts {
        point_real: 0,
        point_imaginary_gap: 0,
        essential_band_artifact: 0,
        unresolved: 0,
    };
    for e in &spectrum.eigenvalues {
        match e.class {
            EigenvalueClass::PointReal => counts.point_real += 1,
            EigenvalueClass::PointImaginaryGap => counts.point_imaginary_gap += 1,
            EigenvalueClass::EssentialBandArtifact => counts.essential_band_artifact += 1,
            EigenvalueClass::Unresolved => counts.unresolved += 1,
        }
    }
    counts
}

fn cmd_spectrum(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let t_start = Instant::now();
    let omega = cfg.omega.expect("validated");
    let epsilon = (cfg.mass * cfg.mass - omega * omega).sqrt();
    let phys_r_max = physical_r_max(cfg, epsilon);
    let wave = build_wave(cfg, omega, phys_r_max)?;
    residual_gate("wave", wave.residual_norm, cfg.tolerances.newton)?;

    let lin = assemble_linearization(&wave);
    let params = classify_params(cfg);
    let (n_dim, k, mass, scheme) = (cfg.n_dim, cfg.k, cfg.mass, cfg.scheme.to_library());
    let builder = move |g: &Arc<RadialGrid>| -> nldirac::Result<SolitaryWave> {
        if n_dim == 1 {
            let (w, _) = solve_1d_closed(omega, k, mass, g)?;
            polish_wave(&w)
        } else {
            let rescaled = build_grid(n_dim, g.npts, epsilon * g.r_max, scheme)?;
            let state = solve_ground_state(n_dim, k, mass, &rescaled)?;
            solve_continuation(omega, &state)
        }
    };
    let refine: Option<&WaveBuilderFn<'_>> = if cfg.refine { Some(&builder) } else { None };
    let spectrum = point_spectrum_with_params(&lin, refine, &params)?;
    let t_solved = Instant::now();

    let config_text = config::canonical_text(cfg);
    let mut sink = ArtifactSink::new(Path::new(&cfg.out_dir))?;

    let rows: Vec<Vec<String>> = spectrum
        .eigenvalues
        .iter()
        .map(|e| {
            let stable = match e.refinement_stable {
                Some(true) => "true",
                Some(false) => "false",
                None => "",
            };
            vec![
                fmt_float(e.lambda.re),
                fmt_float(e.lambda.im),
                class_tag(e.class).to_string(),
                stable.to_string(),
            ]
        })
        .collect();
    sink.write_csv(
        "spectrum.csv",
        "spectrum",
        &["re", "im", "classification", "refinement_stable"],
        &rows,
    )?;

    sink.write_json(
        "summary.json",
        &SpectrumSummary {
            schema: "spectrum_summary/1",
            config: cfg,
            config_text: &config_text,
            omega,
            epsilon,
            band_edge: spectrum.band_edge,
            embedded_threshold: spectrum.embedded_threshold,
            refined: cfg.refine,
            residual_norm: wave.residual_norm,
            counts: count_classes(&spectrum),
            real_pairs: spectrum.real_pairs.clone(),
        },
    )?;

    if cfg.svg {
        let pts: Vec<(f64, f64, &str)> = spectrum
            .eigenvalues
            .iter()
            .map(|e| (e.lambda.re, e.lambda.im, class_tag(e.class)))
            .collect();
        let doc = svg::spectrum_svg(
            &format!(
                "linearization spectrum: n={}, k={}, omega={omega:?}",
                cfg.n_dim, cfg.k
            ),
            &pts,
            spectrum.band_edge,
            &spectrum.real_pairs,
        );
        sink.write_bytes("spectrum.svg", doc.as_bytes())?;
    }

    finish(sink, cfg, &config_text, t_start, t_solved)
}

// ---------------------------------------------------------------------------
// vk

#[derive(Serialize)]
struct VkPoint {
    omega: f64,
    epsilon: f64,
    npts: usize,
    r_max: f64,
    rescaled_r_max: f64,
    residual_norm: f64,
}

#[derive(Serialize)]
struct VkFailure {
    omega: f64,
    reason: String,
}

#[derive(Serialize)]
struct VkSummary<'a> {
    schema: &'static str,
    config: &'a ExperimentConfig,
    config_text: &'a str,
    points_solved: usize,
    points_failed: usize,
    max_residual_norm: f64,
    /// Interior charge minimum, when the curve has one.
    omega_min: Option<f64>,
    points: Vec<VkPoint>,
    failures: Vec<VkFailure>,
}

fn cmd_vk(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let t_start = Instant::now();
    let range = cfg.omega_range.expect("validated");
    let curve = charge_sweep_with_span(
        cfg.n_dim,
        cfg.k,
        cfg.mass,
        range.lo,
        range.hi,
        range.count,
        cfg.npts,
        cfg.r_max,
    )?;
    if curve.omegas.is_empty() {
        let first = curve
            .failures
            .first()
            .map(|f| format!("omega = {:?}: {}", f.omega, f.reason))
            .unwrap_or_else(|| "no points requested".into());
        return Err(CliError::Failure(format!(
            "every sweep point failed ({first})"
        )));
    }
    let omega_min = find_charge_minimum(&curve);
    let t_solved = Instant::now();

    let config_text = config::canonical_text(cfg);
    let mut sink = ArtifactSink::new(Path::new(&cfg.out_dir))?;

    let rows: Vec<Vec<String>> = curve
        .omegas
        .iter()
        .zip(curve.q_values.iter().zip(curve.dq_domega.iter()))
        .map(|(&omega, (&q, &dq))| vec![fmt_float(omega), fmt_float(q), fmt_float(dq)])
        .collect();
    sink.write_csv(
        "charge_curve.csv",
        "charge_curve",
        &["omega", "q", "dq_domega"],
        &rows,
    )?;

    let max_residual = curve
        .notes
        .iter()
        .fold(0.0_f64, |a, n| a.max(n.residual_norm));
    sink.write_json(
        "summary.json",
        &VkSummary {
            schema: "vk_summary/1",
            config: cfg,
            config_text: &config_text,
            points_solved: curve.omegas.len(),
            points_failed: curve.failures.len(),
            max_residual_norm: max_residual,
            omega_min,
            points: curve
                .notes
                .iter()
                .map(|n| VkPoint {
                    omega: n.omega,
                    epsilon: n.epsilon,
                    npts: n.npts,
                    r_max: n.r_max,
                    rescaled_r_max: n.rescaled_r_max,
                    residual_norm: n.residual_norm,
                })
                .collect(),
            failures: curve
                .failures
                .iter()
                .map(|f| VkFailure { omega: f.omega, reason: f.reason.clone() })
                .collect(),
        },
    )?;

    if cfg.svg {
        let q_pts: Vec<(f64, f64)> = curve
            .omegas
            .iter()
            .zip(curve.q_values.iter())
            .map(|(&o, &q)| (o, q))
            .collect();
        let guides: Vec<svg::GuideLine> = omega_min
            .map(|w| svg::GuideLine {
                value: w,
                label: format!("omega_min = {w:.4}"),
                vertical: true,
            })
            .into_iter()
            .collect();
        let doc = svg::line_plot(
            &format!(
                "charge curve: n={}, k={}, m={:?}",
                cfg.n_dim, cfg.k, cfg.mass
            ),
            "omega",
            "Q(omega)",
            &[svg::Series {
                label: "Q",
                color: "#1a73e8",
                points: q_pts,
                dashed: false,
                markers: true,
            }],
            &guides,
        );
        sink.write_bytes("charge_curve.svg", doc.as_bytes())?;
    }

    finish(sink, cfg, &config_text, t_start, t_solved)
}

// ---------------------------------------------------------------------------
// limit

#[derive(Serialize, Clone)]
struct LimitRowOut {
    epsilon: f64,
    omega: f64,
    lambda_direct: f64,
    lambda_predicted: f64,
    /// lambda_predicted / lambda_direct: 1 means perfect certification.
    ratio: f64,
    mu0: f64,
    contraction_factor: f64,
    gamma_metric: f64,
    iterations: usize,
    remainder_sup: f64,
}

#[derive(Serialize, Clone)]
struct LimitFailure {
    epsilon: f64,
    reason: String,
}

#[derive(Serialize)]
struct LimitSummary<'a> {
    schema: &'static str,
    config: &'a ExperimentConfig,
    config_text: &'a str,
    /// The limiting eigenvalue on this grid.
    lambda_nls: f64,
    /// Non-degeneracy pairing of the limit kernel bundle.
    pairing: f64,
    rows: Vec<LimitRowOut>,
    failures: Vec<LimitFailure>,
}

type TraceOut = (f64, usize, f64, f64, f64);

fn cmd_limit(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let t_start = Instant::now();
    let scheme = cfg.scheme.to_library();
    let rescaled = build_grid(cfg.n_dim, cfg.npts, cfg.r_max, scheme)?;
    let state = solve_ground_state(cfg.n_dim, cfg.k, cfg.mass, &rescaled)?;
    residual_gate("ground state", state.residual_norm, cfg.tolerances.newton)?;
    let lambda_nls = grid_consistent_lambda(&state)?;
    let kd = limit_kernel_data(&state, lambda_nls)?;
    let params = classify_params(cfg);

    let (n_dim, k, mass) = (cfg.n_dim, cfg.k, cfg.mass);
    let newton_bound = cfg.tolerances.newton;
    let want_refine = cfg.refine;
    let state_ref = &state;
    let kd_ref = &kd;
    let per_row = |epsilon: f64| -> Result<(LimitRowOut, Vec<TraceOut>), LimitFailure> {
        let fail = |reason: String| LimitFailure { epsilon, reason };
        let omega = (mass * mass - epsilon * epsilon).sqrt();
        let wave = solve_continuation(omega, state_ref)
            .map_err(|e| fail(format!("wave solve failed: {e}")))?;
        if wave.residual_norm > newton_bound {
            return Err(fail(format!(
                "wave residual {:.3e} exceeds the newton tolerance {newton_bound:.3e}",
                wave.residual_norm
            )));
        }
        let (w_op, remainder_sup) =
            assemble_w(&wave, state_ref).map_err(|e| fail(format!("remainder assembly: {e}")))?;
        let fp = fixed_point_mz(kd_ref, &w_op, epsilon)
            .map_err(|e| fail(format!("fixed point failed: {e}")))?;

        let lin = assemble_linearization(&wave);
        let builder = |g: &Arc<RadialGrid>| -> nldirac::Result<SolitaryWave> {
            let refined = build_grid(n_dim, g.npts, epsilon * g.r_max, scheme)?;
            let st = solve_ground_state(n_dim, k, mass, &refined)?;
            solve_continuation(omega, &st)
        };
        let refine: Option<&WaveBuilderFn<'_>> = if want_refine { Some(&builder) } else { None };
        let spectrum = point_spectrum_with_params(&lin, refine, &params)
            .map_err(|e| fail(format!("eigensolve failed: {e}")))?;
        let lambda_direct = spectrum
            .real_pairs
            .first()
            .copied()
            .ok_or_else(|| fail("no real eigenvalue pair in the spectrum".into()))?;

        let trace: Vec<TraceOut> = fp
            .trace
            .iter()
            .map(|t| (epsilon, t.iteration, t.mu, t.zeta_norm, t.step))
            .collect();
        Ok((
            LimitRowOut {
                epsilon,
                omega,
                lambda_direct,
                lambda_predicted: fp.predicted_lambda,
                ratio: fp.predicted_lambda / lambda_direct,
                mu0: fp.mu0,
                contraction_factor: fp.contraction_factor,
                gamma_metric: fp.gamma_metric,
                iterations: fp.iterations,
                remainder_sup,
            },
            trace,
        ))
    };
    let outcomes = map_sweep(cfg.epsilon_list.clone(), per_row);

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut trace_rows: Vec<TraceOut> = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok((row, trace)) => {
                rows.push(row);
                trace_rows.extend(trace);
            }
            Err(f) => failures.push(f),
        }
    }
    if rows.is_empty() {
        let first = failures
            .first()
            .map(|f| format!("epsilon = {:?}: {}", f.epsilon, f.reason))
            .unwrap_or_else(|| "no epsilon values requested".into());
        return Err(CliError::Failure(format!("every epsilon row failed ({first})")));
    }
    let t_solved = Instant::now();

    let config_text = config::canonical_text(cfg);
    let mut sink = ArtifactSink::new(Path::new(&cfg.out_dir))?;

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_float(r.epsilon),
                fmt_float(r.lambda_direct),
                fmt_float(r.lambda_predicted),
                fmt_float(r.ratio),
            ]
        })
        .collect();
    sink.write_csv(
        "limit_table.csv",
        "limit_table",
        &["epsilon", "lambda_direct", "lambda_predicted", "ratio"],
        &table,
    )?;

    let trace_table: Vec<Vec<String>> = trace_rows
        .iter()
        .map(|&(eps, it, mu, zeta, step)| {
            vec![
                fmt_float(eps),
                it.to_string(),
                fmt_float(mu),
                fmt_float(zeta),
                fmt_float(step),
            ]
        })
        .collect();
    sink.write_csv(
        "fixed_point_trace.csv",
        "fixed_point_trace",
        &["epsilon", "iteration", "mu", "zeta_norm", "step"],
        &trace_table,
    )?;

    sink.write_json(
        "summary.json",
        &LimitSummary {
            schema: "limit_summary/1",
            config: cfg,
            config_text: &config_text,
            lambda_nls,
            pairing: kd.pairing,
            rows: rows.clone(),
            failures: failures.clone(),
        },
    )?;

    if cfg.svg {
        let mut by_eps = rows.clone();
        by_eps.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
        let direct: Vec<(f64, f64)> = by_eps
            .iter()
            .map(|r| (r.epsilon, r.lambda_direct / (r.epsilon * r.epsilon)))
            .collect();
        let predicted: Vec<(f64, f64)> = by_eps
            .iter()
            .map(|r| (r.epsilon, r.lambda_predicted / (r.epsilon * r.epsilon)))
            .collect();
        let doc = svg::line_plot(
            &format!(
                "eigenvalue over epsilon^2: n={}, k={}, m={:?}",
                cfg.n_dim, cfg.k, cfg.mass
            ),
            "epsilon",
            "lambda / epsilon^2",
            &[
                svg::Series {
                    label: "direct",
                    color: "#1a73e8",
                    points: direct,
                    dashed: false,
                    markers: true,
                },
                svg::Series {
                    label: "predicted",
                    color: "#d93025",
                    points: predicted,
                    dashed: false,
                    markers: true,
                },
            ],
            &[svg::GuideLine {
                value: lambda_nls,
                label: "limiting eigenvalue".into(),
                vertical: false,
            }],
        );
        sink.write_bytes("limit_convergence.svg", doc.as_bytes())?;
    }

    finish(sink, cfg, &config_text, t_start, t_solved)
}
