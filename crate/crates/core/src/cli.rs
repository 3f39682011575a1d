//! The `cocoonlab` command line.
//!
//! Exit codes: 0 success, 1 a symmetry check failed, 2 usage error
//! (bad flags, unreadable config, unwritable output), 3 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bifurcation::{find_critical_g, pitchfork_trace, CriticalSearch, Direction, QuartetSelector};
use crate::error::{Error, Result};
use crate::io::config::{env_workers, GridSize, Overrides, RunConfig};
use crate::io::dataset::{serialize_dataset, track_points, EventRow, Format};
use crate::io::svg::{emit_panels_svg, emit_scatter_svg, Mark, Panel, Series, Style};
use crate::operator::{Boundary, OperatorSpec, PotentialKind};
use crate::sweep::{
    build_pool, distinct_momenta, flux_sweep, full_range, g_grid, g_sweep, spectrum_for, FluxSweep, SweepPoint,
};
use crate::symmetry::{random_grid, verify_point, SymmetryReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "cocoonlab", version, about = "Spectra of the non-Hermitian Harper chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Flux sweep, real parts against flux
    Butterfly(Flags),
    /// Flux sweep, imaginary parts against flux
    Cocoon(Flags),
    /// Spectra on a grid of g at fixed flux
    Fan(Flags),
    /// Follow the quartet born at the first transition
    Pitchfork(Flags),
    /// Locate the changes in the number of complex eigenvalues
    #[command(name = "critical-g")]
    CriticalG(Flags),
    /// Eigenvalues at a single parameter point
    Spectrum(Flags),
    /// Run every symmetry check on a parameter grid
    Verify(VerifyFlags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    g: Option<f64>,
    #[arg(long = "g-min", allow_negative_numbers = true)]
    g_min: Option<f64>,
    #[arg(long = "g-max", allow_negative_numbers = true)]
    g_max: Option<f64>,
    #[arg(long = "g-step")]
    g_step: Option<f64>,
    /// periodic or open
    #[arg(long)]
    boundary: Option<Boundary>,
    /// harper, constant:c or random:seed:W
    #[arg(long)]
    potential: Option<PotentialKind>,
    #[arg(long = "tol-im")]
    tol_im: Option<f64>,
    #[arg(long = "refine-tol")]
    refine_tol: Option<f64>,
    /// Comma-separated flux numerators
    #[arg(long, value_delimiter = ',')]
    fluxes: Option<Vec<usize>>,
    /// Comma-separated momentum indices
    #[arg(long, value_delimiter = ',')]
    momenta: Option<Vec<usize>>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<Format>,
    /// Flat key = value file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyFlags {
    #[command(flatten)]
    flags: Flags,
    /// small (around --L) or full (randomised, L in 4, 6, 10, 50)
    #[arg(long)]
    grid: Option<GridSize>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            l: self.l,
            q: self.q,
            p: self.p,
            g: self.g,
            g_min: self.g_min,
            g_max: self.g_max,
            g_step: self.g_step,
            boundary: self.boundary,
            potential: self.potential,
            tol_im: self.tol_im,
            refine_tol: self.refine_tol,
            fluxes: self.fluxes.clone(),
            momenta: self.momenta.clone(),
            workers: self.workers,
            out: self.out.clone(),
            svg: self.svg.clone(),
            format: self.format,
            grid: None,
        }
    }
}

/// Failure of one invocation, already mapped to an exit code.
struct Failure {
    code: i32,
    message: String,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) | Error::Parse(_) | Error::OddLattice(_) | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

struct Context<'a> {
    cfg: RunConfig,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Context<'_> {
    /// Dataset text to `--out`, or to standard output.
    fn emit(&mut self, text: &str) -> Result<()> {
        match &self.cfg.out {
            Some(path) => write_file(path, text),
            None => self.stdout.write_all(text.as_bytes()).map_err(Error::from),
        }
    }

    fn emit_svg(&mut self, make: impl FnOnce() -> Result<String>) -> Result<()> {
        if let Some(path) = self.cfg.svg.clone() {
            write_file(&path, &make()?)?;
        }
        Ok(())
    }

    fn note(&mut self, msg: &str) {
        let _ = writeln!(self.stderr, "{msg}");
    }

    fn base_spec(&self) -> Result<OperatorSpec> {
        let c = &self.cfg;
        let spec = OperatorSpec::harper(c.l, c.q as i64, c.p as i64, c.g)?
            .with_boundary(c.boundary)
            .with_potential(c.potential);
        spec.validate()?;
        Ok(spec)
    }

    fn search(&self) -> Result<CriticalSearch> {
        let c = &self.cfg;
        let base = self.base_spec()?.with_g(0.0).with_p(0);
        Ok(CriticalSearch {
            base,
            momenta: c
                .momenta
                .clone()
                .unwrap_or_else(|| distinct_momenta(c.l, c.q % c.l, c.boundary, c.potential)),
            g_min: c.g_min,
            g_max: c.g_max,
            scan_step: c.g_step,
            refine_tol: c.refine_tol,
            tol_im: c.tol_im,
        })
    }
}

fn flux_projection(ctx: &mut Context, imaginary: bool) -> std::result::Result<i32, Failure> {
    let c = ctx.cfg.clone();
    let sweep = FluxSweep {
        l: c.l,
        g: c.g,
        boundary: c.boundary,
        potential: c.potential,
        fluxes: c.fluxes.clone().unwrap_or_else(|| full_range(c.l)),
        momenta: c.momenta.clone().unwrap_or_else(|| full_range(c.l)),
        workers: c.workers,
    };
    let data = flux_sweep(&sweep)?;
    ctx.emit(&serialize_dataset(&data.points, c.format, &c))?;
    let l = c.l as f64;
    ctx.emit_svg(|| {
        let pts: Vec<(f64, f64)> = data
            .points
            .iter()
            .map(|pt| (pt.q as f64 / l, if imaginary { pt.im } else { pt.re }))
            .collect();
        let (name, y) = if imaginary { ("cocoon", "Im E") } else { ("butterfly", "Re E") };
        let title = format!("{name}, L = {}, g = {}", c.l, c.g);
        emit_scatter_svg(&pts, &Style::default().labels(&title, "flux q/L", y))
    })?;
    let failed: Vec<_> = data.cells.iter().filter(|s| s.error.is_some()).collect();
    if let Some(first) = failed.first() {
        ctx.note(&format!(
            "{} of {} cells failed; first (q={}, p={}): {}",
            failed.len(),
            data.cells.len(),
            first.q,
            first.p,
            first.error.as_deref().unwrap_or("")
        ));
        return Ok(EXIT_NUMERICAL);
    }
    Ok(EXIT_OK)
}

fn fan(ctx: &mut Context) -> std::result::Result<i32, Failure> {
    let c = ctx.cfg.clone();
    if c.boundary != Boundary::Periodic || c.potential != PotentialKind::Harper {
        return Err(Error::InvalidParameter("fan supports the periodic Harper chain only".into()).into());
    }
    let grid = g_grid(c.g_min, c.g_max, c.g_step)?;
    let momenta = c.momenta.clone().unwrap_or_else(|| full_range(c.l));
    let data = g_sweep(c.l, c.q % c.l, &grid, &momenta, c.workers)?;
    ctx.emit(&serialize_dataset(&data.points, c.format, &c))?;
    ctx.emit_svg(|| {
        let pts: Vec<(f64, f64)> = data.points.iter().map(|pt| (pt.g, pt.im)).collect();
        let title = format!("L = {}, flux = {}/{}", c.l, c.q % c.l, c.l);
        emit_scatter_svg(&pts, &Style::default().labels(&title, "g", "Im E"))
    })?;
    if let Some(s) = data.slices.iter().find(|s| !s.failed_momenta.is_empty()) {
        ctx.note(&format!("solver failed at g = {} for momenta {:?}", s.g, s.failed_momenta));
        return Ok(EXIT_NUMERICAL);
    }
    Ok(EXIT_OK)
}

fn critical_g(ctx: &mut Context) -> std::result::Result<i32, Failure> {
    let search = ctx.search()?;
    let events = build_pool(ctx.cfg.workers)?.install(|| find_critical_g(&search))?;
    let rows: Vec<EventRow> = events.iter().map(EventRow::from).collect();
    let c = ctx.cfg.clone();
    ctx.emit(&serialize_dataset(&rows, c.format, &c))?;
    ctx.note(&format!("{} events in [{}, {}]", rows.len(), c.g_min, c.g_max));
    if rows.iter().any(|r| !r.resolved) {
        ctx.note("some brackets held more than one change and were not resolved");
        return Ok(EXIT_NUMERICAL);
    }
    Ok(EXIT_OK)
}

const TRACK_COLORS: [&str; 4] = ["#1f3a93", "#c0392b", "#27ae60", "#8e44ad"];

fn pitchfork(ctx: &mut Context) -> std::result::Result<i32, Failure> {
    let c = ctx.cfg.clone();
    if c.boundary != Boundary::Periodic || c.potential != PotentialKind::Harper {
        return Err(Error::InvalidParameter("pitchfork supports the periodic Harper chain only".into()).into());
    }
    if c.l % 2 != 0 {
        return Err(Error::OddLattice(c.l).into());
    }
    let search = ctx.search()?;
    let events = build_pool(c.workers)?.install(|| find_critical_g(&search))?;
    let Some(event) = events.iter().find(|e| e.direction() == Direction::Complexifying) else {
        ctx.note(&format!("no transition to complex eigenvalues in [{}, {}]", c.g_min, c.g_max));
        return Ok(EXIT_NUMERICAL);
    };
    let p = event.seed_momentum;
    let grid = g_grid(c.g_min, c.g_max, c.g_step)?;
    let trace = pitchfork_trace(c.l, c.q % c.l, (p, (p + c.l / 2) % c.l), &grid, QuartetSelector::from_event(event))?;
    let rows = track_points(&trace);
    ctx.emit(&serialize_dataset(&rows, c.format, &c))?;
    ctx.note(&format!("transition at g = {} (sector p = {p})", event.g_critical));
    ctx.emit_svg(|| {
        let panel = |title: &str, y: &str, pick: fn(num_complex::Complex64) -> f64| Panel {
            series: (0..4)
                .map(|k| Series {
                    points: trace.g_grid.iter().zip(&trace.tracks[k]).map(|(&g, &z)| (g, pick(z))).collect(),
                    color: TRACK_COLORS[k].into(),
                    mark: Mark::Line,
                })
                .collect(),
            title: title.into(),
            x_label: "g".into(),
            y_label: y.into(),
        };
        emit_panels_svg(
            &[panel("real parts", "Re E", |z| z.re), panel("imaginary parts", "Im E", |z| z.im)],
            480.0,
            400.0,
            1.0,
        )
    })?;
    Ok(EXIT_OK)
}

fn spectrum(ctx: &mut Context) -> std::result::Result<i32, Failure> {
    let spec = ctx.base_spec()?;
    let s = spectrum_for(&spec)?;
    let rows: Vec<SweepPoint> = s
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, z)| SweepPoint {
            q: spec.q(),
            p: spec.p,
            eigen_index: i,
            re: z.re,
            im: z.im,
        })
        .collect();
    let c = ctx.cfg.clone();
    ctx.emit(&serialize_dataset(&rows, c.format, &c))?;
    ctx.emit_svg(|| {
        let pts: Vec<(f64, f64)> = s.eigenvalues.iter().map(|z| (z.re, z.im)).collect();
        emit_scatter_svg(&pts, &Style { radius: 2.5, ..Style::default() }.labels("spectrum", "Re E", "Im E"))
    })?;
    Ok(EXIT_OK)
}

/// Points checked by `verify`.
pub fn verification_points(grid: GridSize, l: usize) -> Result<Vec<OperatorSpec>> {
    match grid {
        GridSize::Small => {
            let mut out = Vec::new();
            for q in 0..l.min(4) {
                for p in [0, 1 % l] {
                    for g in [0.0, 0.35, -0.8] {
                        out.push(OperatorSpec::harper(l, q as i64, p as i64, g)?);
                    }
                }
            }
            for g in [0.5, -1.0] {
                out.push(OperatorSpec::harper(l, 1, 0, g)?.with_boundary(Boundary::Open));
            }
            Ok(out)
        }
        GridSize::Full => {
            let mut out = random_grid(20_240_611, 100, &[4, 6, 10, 50], 1.0)?;
            out.extend(
                random_grid(7_777, 20, &[4, 6, 10, 50], 1.0)?
                    .into_iter()
                    .map(|s| s.with_boundary(Boundary::Open)),
            );
            Ok(out)
        }
    }
}

fn verify(ctx: &mut Context) -> std::result::Result<i32, Failure> {
    let c = ctx.cfg.clone();
    let points = verification_points(c.grid, c.l)?;
    let reports: Vec<Result<Vec<SymmetryReport>>> =
        build_pool(c.workers)?.install(|| {
            use rayon::prelude::*;
            points.par_iter().map(verify_point).collect()
        });
    let mut text = String::new();
    let (mut total, mut failed) = (0, 0);
    for r in reports {
        for report in r? {
            total += 1;
            if !report.pass {
                failed += 1;
            }
            text.push_str(&report.to_string());
            text.push('\n');
        }
    }
    text.push_str(&format!("{total} checks on {} points, {failed} failed\n", points.len()));
    ctx.emit(&text)?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VERIFY })
}

fn dispatch(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> std::result::Result<i32, Failure> {
    let (name, flags, grid) = match command {
        Command::Butterfly(f) => ("butterfly", f, None),
        Command::Cocoon(f) => ("cocoon", f, None),
        Command::Fan(f) => ("fan", f, None),
        Command::Pitchfork(f) => ("pitchfork", f, None),
        Command::CriticalG(f) => ("critical-g", f, None),
        Command::Spectrum(f) => ("spectrum", f, None),
        Command::Verify(v) => ("verify", v.flags, v.grid),
    };
    let file = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
            Overrides::from_config_text(&text)?
        }
        None => Overrides::default(),
    };
    let mut over = flags.overrides();
    over.grid = grid;
    let cfg = RunConfig::resolve(name, file.merge(over), env_workers()?)?;
    let mut ctx = Context { cfg, stdout, stderr };
    match name {
        "butterfly" => flux_projection(&mut ctx, false),
        "cocoon" => flux_projection(&mut ctx, true),
        "fan" => fan(&mut ctx),
        "pitchfork" => pitchfork(&mut ctx),
        "critical-g" => critical_g(&mut ctx),
        "spectrum" => spectrum(&mut ctx),
        _ => verify(&mut ctx),
    }
}

/// Runs one invocation with the given streams and returns the exit code.
/// `argv[0]` is the program name.
pub fn run_cli_with<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    return EXIT_OK;
                }
                _ => EXIT_USAGE,
            };
            let _ = write!(stderr, "{e}");
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

/// [`run_cli_with`] on the process streams.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let code = run_cli_with(argv, &mut out, &mut stderr.lock());
    if out.flush().is_err() {
        return EXIT_USAGE;
    }
    code
}
