//! Batch command-line front end.
//!
//! Every subcommand reads one JSON [`RunConfig`] and writes deterministic
//! artifacts into an output directory: CSV for trajectories and ladders
//! (the canonical data format), JSON for summaries and audits, and a
//! self-contained SVG for the overlay figure.  Re-running a subcommand
//! with the same configuration on the same platform reproduces the output
//! files byte for byte; no randomness is involved (the `SHB_SEED`
//! environment variable is reserved but unused).
//!
//! Exit codes: 0 success; 2 unusable configuration or invalid parameters;
//! 3 failed run (integration or sequence analysis); 4 periodic bracketing
//! failed; 5 no gap contraction.  1 is reserved for filesystem failures.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::blowup::detect_blowup;
use crate::integrator::{
    energy_audit, integrate, Direction, StopPolicy, StopReason, Tolerances, Trajectory,
};
use crate::ladder::{extract_ladder, sequence_diagnostics, write_ladder_csv};
use crate::model::{Problem, ProblemSpec, State};
use crate::shooting::{build_symmetric_extension, find_periodic, ScanGrid};
use crate::transforms::{mu_form_residual_at, mu_to_problem, pull_back};
use crate::Error;

/// One experiment, fully described: the JSON config format.
///
/// Parsing and serialization round-trip losslessly; unknown fields are
/// rejected so a typo cannot silently change a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Governing equation parameters.
    pub problem: ProblemSpec,
    /// Initial state (w, w', w'', w''') at s = 0.
    pub ic: [f64; 4],
    /// Orientation of the run; default forward.
    #[serde(default)]
    pub direction: Direction,
    /// Distance from s = 0 to the horizon; default 40.
    #[serde(default = "default_span")]
    pub span: f64,
    /// Integration tolerances; default rel 1e-10, abs 1e-12.
    #[serde(default)]
    pub tol: Tolerances,
    /// Optional stop-policy overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopTuning>,
    /// Where artifacts go; default the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Amplitude scan for `shoot`; default six decades around 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanGrid>,
    /// Eigenvalue parameter for `rescale` (mu <= 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Where the ladder extraction starts; default the run's start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder_start: Option<f64>,
}

fn default_span() -> f64 {
    40.0
}

/// Optional overrides of the default stop policy (the horizon itself comes
/// from `span` and `direction`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct StopTuning {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escape_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_events: Option<usize>,
}

impl RunConfig {
    fn load(path: &Path) -> Result<RunConfig, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        cfg.validate().map_err(Failure::Config)?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if !self.ic.iter().all(|v| v.is_finite()) {
            return Err("initial state components must be finite".to_string());
        }
        if !(self.span.is_finite() && self.span > 0.0) {
            return Err(format!(
                "span must be positive and finite, got {}",
                self.span
            ));
        }
        Ok(())
    }
}

#[derive(Parser)]
#[command(
    name = "shb",
    version,
    about = "Fourth-order stationary dynamics: simulation, finite-space escape \
             verification, critical-point ladders, periodic orbits, and \
             rescaling maps"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory; writes trajectory.csv and energy.json.
    Simulate(CommonArgs),
    /// Extract the critical-point ladder; writes ladder.csv and report.json.
    Ladder(CommonArgs),
    /// Classify finite-space escape; writes blowup.json.
    Blowup(CommonArgs),
    /// Find a periodic solution; writes periodic.csv and periodic.json.
    Shoot(CommonArgs),
    /// Pull a run back to the eigenvalue form; writes rescaled.csv and
    /// rescale.json.
    Rescale(CommonArgs),
    /// Overlay the k = 1.5 and k = 3.5 reference runs; writes figure.svg.
    Figure(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override both tolerances: relative = TOL, absolute = TOL / 100.
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Why a subcommand failed, carrying its exit code.
enum Failure {
    Config(String),
    Run(Error),
    Io(std::io::Error),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(msg) => write!(f, "configuration: {msg}"),
            Failure::Run(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 1,
            Failure::Run(e) => match e {
                Error::BracketingFailed { .. } => 4,
                Error::NoContraction { .. } => 5,
                Error::InvalidInput(_) | Error::OutOfDomain(_) | Error::NonFiniteInput(_) => 2,
                _ => 3,
            },
        }
    }
}

/// Parses the process arguments, runs the subcommand, and reports failures
/// on stderr with the documented exit codes.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn execute(cmd: &Command) -> Result<(), Failure> {
    let (Command::Simulate(args)
    | Command::Ladder(args)
    | Command::Blowup(args)
    | Command::Shoot(args)
    | Command::Rescale(args)
    | Command::Figure(args)) = cmd;
    let cfg = RunConfig::load(&args.config)?;
    let su = Setup::assemble(&cfg, args)?;
    match cmd {
        Command::Simulate(_) => cmd_simulate(&cfg, &su),
        Command::Ladder(_) => cmd_ladder(&cfg, &su),
        Command::Blowup(_) => cmd_blowup(&cfg, &su),
        Command::Shoot(_) => cmd_shoot(&cfg, &su),
        Command::Rescale(_) => cmd_rescale(&cfg, &su),
        Command::Figure(_) => cmd_figure(&su),
    }
}

/// Everything a subcommand needs, resolved from config plus flags.
struct Setup {
    prob: Problem,
    ic: State,
    tol: Tolerances,
    stop: StopPolicy,
    out: PathBuf,
}

impl Setup {
    fn assemble(cfg: &RunConfig, args: &CommonArgs) -> Result<Setup, Failure> {
        let prob = cfg.problem.build().map_err(Failure::Run)?;
        let ic = State::new(0.0, cfg.ic);
        let tol = match args.tol {
            Some(x) => Tolerances::new(x, x * 1e-2),
            None => cfg.tol,
        };
        let horizon = match cfg.direction {
            Direction::Forward => cfg.span,
            Direction::Backward => -cfg.span,
        };
        let mut stop = StopPolicy::to(horizon);
        if let Some(t) = &cfg.stop {
            if let Some(v) = t.escape_threshold {
                stop.escape_threshold = v;
            }
            if let Some(v) = t.min_step {
                stop.min_step = v;
            }
            if let Some(v) = t.max_events {
                stop.max_events = v;
            }
        }
        let out = args
            .out
            .clone()
            .or_else(|| cfg.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&out).map_err(Failure::Io)?;
        Ok(Setup {
            prob,
            ic,
            tol,
            stop,
            out,
        })
    }

    fn integrate(&self, dir: Direction) -> Result<Trajectory, Failure> {
        integrate(&self.prob, &self.ic, dir, self.tol, &self.stop).map_err(Failure::Run)
    }
}

fn write_csv_file(path: &Path, traj: &Trajectory) -> Result<(), Failure> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).map_err(Failure::Io)?;
    fs::write(path, buf).map_err(Failure::Io)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(Failure::Io)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, su: &Setup) -> Result<(), Failure> {
    let traj = su.integrate(cfg.direction)?;
    write_csv_file(&su.out.join("trajectory.csv"), &traj)?;
    let audit = energy_audit(&traj);
    write_json_file(&su.out.join("energy.json"), &audit)?;
    println!(
        "stop: {:?}; {} steps; max energy drift {:.3e}",
        traj.meta.stop_reason, traj.meta.naccept, audit.max_drift
    );
    Ok(())
}

fn cmd_ladder(cfg: &RunConfig, su: &Setup) -> Result<(), Failure> {
    let traj = su.integrate(cfg.direction)?;
    let start = cfg.ladder_start.unwrap_or_else(|| traj.s_start());
    let lad = extract_ladder(&traj, start).map_err(Failure::Run)?;
    let mut buf = Vec::new();
    write_ladder_csv(&lad, &mut buf).map_err(Failure::Io)?;
    let csv_path = su.out.join("ladder.csv");
    fs::write(&csv_path, buf).map_err(Failure::Io)?;
    println!("wrote {}", csv_path.display());
    let report = sequence_diagnostics(&lad).map_err(Failure::Run)?;
    write_json_file(&su.out.join("report.json"), &report)?;
    println!(
        "{} extrema, {} rungs; amplitude slope {:.4}",
        lad.extrema.len(),
        lad.rungs.len(),
        report.amp_fit.slope
    );
    Ok(())
}

fn cmd_blowup(cfg: &RunConfig, su: &Setup) -> Result<(), Failure> {
    let report =
        detect_blowup(&su.prob, &su.ic, cfg.direction, su.tol, &su.stop).map_err(Failure::Run)?;
    write_json_file(&su.out.join("blowup.json"), &report)?;
    println!("verdict: {:?}", report.verdict);
    Ok(())
}

fn cmd_shoot(cfg: &RunConfig, su: &Setup) -> Result<(), Failure> {
    let scan = cfg.scan.unwrap_or_default();
    let sol = find_periodic(&su.prob, &scan, su.tol).map_err(Failure::Run)?;
    let one_period = build_symmetric_extension(&sol.half_wave, sol.m, su.prob.nl.is_odd())
        .map_err(Failure::Run)?;
    write_csv_file(&su.out.join("periodic.csv"), &one_period)?;
    write_json_file(&su.out.join("periodic.json"), &sol.summary())?;
    println!("a* = {:.12}, period = {:.12}", sol.a_star, sol.period);
    Ok(())
}

/// Summary sidecar of a pull-back run.
#[derive(Debug, Serialize)]
struct RescaleSummary {
    mu: f64,
    amplitude_factor: f64,
    abscissa_factor: f64,
    /// k of the problem the input run must solve.
    canonical_k: f64,
    /// Largest finite-difference residual of the pulled-back equation over
    /// nine interior checkpoints.
    max_form_residual: f64,
}

fn cmd_rescale(cfg: &RunConfig, su: &Setup) -> Result<(), Failure> {
    let mu = cfg
        .mu
        .ok_or_else(|| Failure::Config("rescale needs a \"mu\" field".to_string()))?;
    let map = mu_to_problem(mu).map_err(Failure::Run)?;
    let traj = su.integrate(cfg.direction)?;
    let pulled = pull_back(&traj, mu).map_err(Failure::Run)?;
    write_csv_file(&su.out.join("rescaled.csv"), &pulled)?;
    let (a, b) = (pulled.s_start(), pulled.s_end());
    let h = (b - a) / 500.0;
    let mut max_res = 0.0f64;
    for i in 1..=9 {
        let s = a + (b - a) * (i as f64) / 10.0;
        if let Ok(r) = mu_form_residual_at(&pulled, mu, s, h) {
            max_res = max_res.max(r);
        }
    }
    let summary = RescaleSummary {
        mu,
        amplitude_factor: map.amplitude_factor,
        abscissa_factor: map.abscissa_factor,
        canonical_k: map.problem.k,
        max_form_residual: max_res,
    };
    write_json_file(&su.out.join("rescale.json"), &summary)?;
    println!("mu = {mu}; max pulled-back residual {max_res:.3e}");
    Ok(())
}

fn cmd_figure(su: &Setup) -> Result<(), Failure> {
    let ic = State::new(0.0, [0.8, 0.0, 0.0, 0.0]);
    let stop = StopPolicy::to(FIGURE_SPAN);
    let escape = integrate(
        &Problem::prototype(1.0, 1.0, 3.0, 1.5).map_err(Failure::Run)?,
        &ic,
        Direction::Forward,
        su.tol,
        &stop,
    )
    .map_err(Failure::Run)?;
    let bounded = integrate(
        &Problem::prototype(1.0, 1.0, 3.0, 3.5).map_err(Failure::Run)?,
        &ic,
        Direction::Forward,
        su.tol,
        &stop,
    )
    .map_err(Failure::Run)?;
    let r_plus = match escape.meta.stop_reason {
        StopReason::Escape { s } => s,
        _ => escape.s_end(),
    };
    let svg = figure_svg(&escape, &bounded, r_plus);
    let path = su.out.join("figure.svg");
    fs::write(&path, svg).map_err(Failure::Io)?;
    println!("wrote {}", path.display());
    println!("escape abscissa {r_plus:.6}");
    Ok(())
}

const FIGURE_SPAN: f64 = 40.0;
const FIGURE_Y_LIM: f64 = 8.0;

/// Contiguous stretches of the curve inside |w| <= y_lim, sampled on a
/// uniform grid of n+1 points over [start, min(s_hi, end)].
fn visible_runs(traj: &Trajectory, s_hi: f64, n: usize, y_lim: f64) -> Vec<Vec<(f64, f64)>> {
    let lo = traj.s_start();
    let hi = s_hi.min(traj.s_end());
    let mut runs = Vec::new();
    let mut cur: Vec<(f64, f64)> = Vec::new();
    for i in 0..=n {
        let s = lo + (hi - lo) * (i as f64) / (n as f64);
        match traj.state_at(s).map(|st| st.y[0]) {
            Some(w) if w.abs() <= y_lim => cur.push((s, w)),
            _ => {
                if cur.len() >= 2 {
                    runs.push(std::mem::take(&mut cur));
                } else {
                    cur.clear();
                }
            }
        }
    }
    if cur.len() >= 2 {
        runs.push(cur);
    }
    runs
}

/// Renders the overlay figure: both curves on one axis system, the
/// escaping one clipped to the view band and marked with a dashed vertical
/// at its escape abscissa.  Pure string assembly — the SVG references no
/// external resource.
fn figure_svg(escape: &Trajectory, bounded: &Trajectory, r_plus: f64) -> String {
    const W: f64 = 880.0;
    const H: f64 = 520.0;
    const ML: f64 = 64.0;
    const MR: f64 = 16.0;
    const MT: f64 = 44.0;
    const MB: f64 = 48.0;
    let (pw, ph) = (W - ML - MR, H - MT - MB);
    let xpx = |s: f64| ML + s / FIGURE_SPAN * pw;
    let ypx = |w: f64| MT + (1.0 - (w + FIGURE_Y_LIM) / (2.0 * FIGURE_Y_LIM)) * ph;

    let mut svg = String::new();
    writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" font-family="Helvetica, Arial, sans-serif">"##
    )
    .unwrap();
    writeln!(svg, r##"<rect width="{W}" height="{H}" fill="#ffffff"/>"##).unwrap();

    // Grid and ticks.
    for i in 0..=8 {
        let s = FIGURE_SPAN * (i as f64) / 8.0;
        let x = xpx(s);
        writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{MT}" x2="{x:.2}" y2="{:.2}" stroke="#e5e5e5" stroke-width="1"/>"##,
            MT + ph
        )
        .unwrap();
        writeln!(
            svg,
            r##"<text x="{x:.2}" y="{:.2}" font-size="13" text-anchor="middle" fill="#333">{s:.0}</text>"##,
            MT + ph + 18.0
        )
        .unwrap();
    }
    for i in 0..=4 {
        let w = -FIGURE_Y_LIM + 2.0 * FIGURE_Y_LIM * (i as f64) / 4.0;
        let y = ypx(w);
        writeln!(
            svg,
            r##"<line x1="{ML}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5" stroke-width="1"/>"##,
            ML + pw
        )
        .unwrap();
        writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="end" fill="#333">{w:.0}</text>"##,
            ML - 8.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r##"<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="#333" stroke-width="1"/>"##
    )
    .unwrap();

    // Curves.
    for (traj, n, color) in [(escape, 8000usize, "#1f6fb4"), (bounded, 4000, "#c23b22")] {
        for run in visible_runs(traj, FIGURE_SPAN, n, FIGURE_Y_LIM) {
            let mut pts = String::with_capacity(run.len() * 14);
            for &(s, w) in &run {
                write!(pts, "{:.2},{:.2} ", xpx(s), ypx(w)).unwrap();
            }
            writeln!(
                svg,
                r##"<polyline fill="none" stroke="{color}" stroke-width="1.4" points="{}"/>"##,
                pts.trim_end()
            )
            .unwrap();
        }
    }

    // Escape marker.
    let xr = xpx(r_plus);
    writeln!(
        svg,
        r##"<line x1="{xr:.2}" y1="{MT}" x2="{xr:.2}" y2="{:.2}" stroke="#777" stroke-width="1.2" stroke-dasharray="6 4"/>"##,
        MT + ph
    )
    .unwrap();
    writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="13" fill="#555">R⁺ ≈ {r_plus:.4}</text>"##,
        xr + 6.0,
        MT + 16.0
    )
    .unwrap();

    // Legend and titles.
    let (lx, ly) = (ML + pw - 250.0, MT + 14.0);
    writeln!(
        svg,
        r##"<rect x="{lx:.2}" y="{ly:.2}" width="238" height="46" fill="#ffffff" fill-opacity="0.85" stroke="#ccc"/>"##
    )
    .unwrap();
    for (i, (color, label)) in [
        ("#1f6fb4", "k = 1.5 (finite-space escape)"),
        ("#c23b22", "k = 3.5 (bounded)"),
    ]
    .iter()
    .enumerate()
    {
        let y = ly + 16.0 + 20.0 * (i as f64);
        writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"##,
            lx + 10.0,
            lx + 38.0
        )
        .unwrap();
        writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" font-size="13" fill="#333">{label}</text>"##,
            lx + 46.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r##"<text x="{:.2}" y="26" font-size="15" text-anchor="middle" fill="#111">d⁴w/ds⁴ + k d²w/ds² + w + w³ = 0,  w(0) = 0.8</text>"##,
        ML + pw / 2.0
    )
    .unwrap();
    writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle" fill="#333">s</text>"##,
        ML + pw / 2.0,
        H - 10.0
    )
    .unwrap();
    writeln!(
        svg,
        r##"<text x="18" y="{:.2}" font-size="14" text-anchor="middle" fill="#333" transform="rotate(-90 18 {:.2})">w</text>"##,
        MT + ph / 2.0,
        MT + ph / 2.0
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}
