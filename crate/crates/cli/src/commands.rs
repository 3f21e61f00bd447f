//! Subcommand bodies. Each writes its human-readable summary to `out`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use codazzi_core::diagnostics::{evaluate_run, loglog_slope, SweepRow, TestFunction};
use codazzi_core::immersion::{
    export_obj, frame_integrate, path_independence_for, realize_from_levels, ExactCatenoid, ExactHelicoid,
    ExactSurface, GridGeometry, SurfaceMesh,
};
use codazzi_core::solver::{run, uniform_levels, Trajectory};
use codazzi_core::state_space::StateField;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::init::initial_data;
use crate::CliError;

/// The ε values of the standard sweep.
pub const DEFAULT_SWEEP: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];

/// Stored levels used by the sweep quadrature.
pub const SWEEP_LEVELS: usize = 129;

fn header(command: &str, cfg: &RunConfig) -> Vec<String> {
    let mut h = vec![format!("codazzi {command}")];
    h.extend(cfg.to_lines());
    h
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    out.write_fmt(text).map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

/// Tabulated metric over `[-y0, 0]`.
pub fn metric(cfg: &RunConfig, points: usize, dest: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let (spec, _) = cfg.validate()?;
    if points < 5 {
        return Err(CliError::Config(format!("need at least 5 points, got {points}")));
    }
    let text = spec.to_table(points).to_text(&header("metric", cfg));
    match dest {
        Some(p) => {
            write_file(p, &text)?;
            say(out, format_args!("wrote {} ({points} points)\n", p.display()))
        }
        None => say(out, format_args!("{text}")),
    }
}

pub fn region(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let (_, region) = cfg.validate()?;
    say(out, format_args!("{region}\n"))
}

fn solve_config(cfg: &RunConfig) -> Result<Trajectory, CliError> {
    let (spec, region) = cfg.validate()?;
    let (u, v) = initial_data(cfg, &spec, &region)?;
    Ok(run(&u, &v, &spec, &cfg.solver_config(), &uniform_levels(cfg.y0, cfg.levels))?)
}

pub fn level_path(prefix: &str, k: usize) -> PathBuf {
    PathBuf::from(format!("{prefix}_level{k}.txt"))
}

/// Runs the solver and writes `PREFIX_levelN.txt` and `PREFIX_log.csv`.
pub fn solve(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let traj = solve_config(cfg)?;
    let head = header("solve", cfg);
    for (k, level) in traj.levels.iter().enumerate() {
        write_file(&level_path(&cfg.prefix, k), &level.to_text(&head))?;
    }
    let mut csv: String = head.iter().map(|l| format!("# {l}\n")).collect();
    csv.push_str("step,y,dy,max_lambda,violation\n");
    for (k, r) in traj.step_log.iter().enumerate() {
        csv.push_str(&format!("{},{:e},{:e},{:e},{:e}\n", k + 1, r.y, r.dy, r.max_lambda, r.violation));
    }
    let log = PathBuf::from(format!("{}_log.csv", cfg.prefix));
    write_file(&log, &csv)?;
    let last = traj.final_level().expect("at least one stored level");
    let max_u = last.u.iter().fold(0.0f64, |m, u| m.max(u.abs()));
    let min_v = last.v.iter().cloned().fold(f64::INFINITY, f64::min);
    say(
        out,
        format_args!(
            "steps {}\nstored levels {}\nmax region violation {:e}\ninitial data inside region {}\nfinal max|u| {:e}\nfinal min v {:e}\nlog {}\n",
            traj.step_log.len(),
            traj.levels.len(),
            traj.max_violation(),
            !traj.initial_outside_region(),
            max_u,
            min_v,
            log.display()
        ),
    )
}

/// Runs every ε in parallel and evaluates the standard diagnostics.
pub fn sweep_rows(cfg: &RunConfig, eps: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    let (spec, region) = cfg.validate()?;
    let (u, v) = initial_data(cfg, &spec, &region)?;
    let phi = TestFunction::standard(cfg.y0, cfg.period);
    eps.par_iter()
        .map(|&e| {
            let sc = codazzi_core::solver::SolverConfig { epsilon: e, ..cfg.solver_config() };
            let traj = run(&u, &v, &spec, &sc, &uniform_levels(cfg.y0, SWEEP_LEVELS))?;
            Ok(evaluate_run(&traj, &spec, &phi)?)
        })
        .collect()
}

/// Summary of a sweep: visc-residual slope and dissipation max/min ratio.
pub fn sweep_summary(rows: &[SweepRow]) -> (Option<f64>, f64) {
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let visc: Vec<f64> = rows.iter().map(|r| r.visc_residual).collect();
    let slope = loglog_slope(&eps, &visc).ok();
    let max = rows.iter().map(|r| r.dissipation).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.dissipation).fold(f64::INFINITY, f64::min);
    (slope, max / min)
}

pub fn sweep(cfg: &RunConfig, eps: &[f64], out: &mut dyn Write) -> Result<(), CliError> {
    if eps.len() < 2 {
        return Err(CliError::Config("a sweep needs at least two epsilon values".into()));
    }
    let rows = sweep_rows(cfg, eps)?;
    let mut head = header("sweep", cfg);
    head.push(format!("eps_list = {}", eps.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")));
    let mut csv: String = head.iter().map(|l| format!("# {l}\n")).collect();
    csv.push_str("eps,dissipation,bound_estimate,visc_residual,r1,r2\n");
    for r in &rows {
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e}\n",
            r.epsilon, r.dissipation, r.bound_estimate, r.visc_residual, r.r1, r.r2
        ));
    }
    let (slope, ratio) = sweep_summary(&rows);
    let slope_text = slope.map_or_else(|| "undefined".to_string(), |s| format!("{s:.6}"));
    csv.push_str(&format!("# visc_residual_slope = {slope_text}\n# dissipation_max_over_min = {ratio:e}\n"));
    let path = PathBuf::from(format!("{}_sweep.csv", cfg.prefix));
    write_file(&path, &csv)?;
    say(out, format_args!("{csv}"))
}

/// Where an immersion takes its forms from.
#[derive(Debug, Clone, PartialEq)]
pub enum ImmerseSource {
    ExactCatenoid,
    ExactHelicoid,
    Run(String),
}

impl std::str::FromStr for ImmerseSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact-catenoid" => Ok(ImmerseSource::ExactCatenoid),
            "exact-helicoid" => Ok(ImmerseSource::ExactHelicoid),
            _ => match s.strip_prefix("run:") {
                Some(p) if !p.is_empty() => Ok(ImmerseSource::Run(p.to_string())),
                _ => Err(format!("expected exact-catenoid, exact-helicoid or run:PREFIX, got `{s}`")),
            },
        }
    }
}

/// Stored levels `PREFIX_level0.txt, PREFIX_level1.txt, ...` and their config.
pub fn load_levels(prefix: &str) -> Result<(RunConfig, Vec<StateField>), CliError> {
    let mut levels = Vec::new();
    let mut cfg = None;
    loop {
        let path = level_path(prefix, levels.len());
        if !path.exists() {
            break;
        }
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        if cfg.is_none() {
            cfg = Some(RunConfig::from_header(&text, &path.display().to_string())?);
        }
        levels.push(StateField::from_text(&text)?);
    }
    let cfg = cfg.ok_or_else(|| CliError::Config(format!("no level files found for prefix `{prefix}`")))?;
    Ok((cfg, levels))
}

fn exact_report<S: ExactSurface>(surface: &S, grid: &GridGeometry) -> Result<(SurfaceMesh, Vec<String>), CliError> {
    let seed = surface.seed(grid.x_start, grid.y_start);
    let mesh = frame_integrate(surface, grid, &seed)?;
    let err = mesh.max_distance(&surface.mesh(grid))?;
    let path = path_independence_for(surface, grid, &seed)?;
    Ok((mesh, vec![format!("max vertex error {err:e}"), format!("path independence {path:e}")]))
}

pub fn immerse(source: &ImmerseSource, grid_n: usize, dest: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let strip = || GridGeometry::spanning(0.0, std::f64::consts::TAU, grid_n, -1.0, 0.0, grid_n);
    let (mesh, mut notes, mut head) = match source {
        ImmerseSource::ExactCatenoid => {
            let (m, n) = exact_report(&ExactCatenoid, &strip()?)?;
            (m, n, vec!["codazzi immerse --from exact-catenoid".to_string()])
        }
        ImmerseSource::ExactHelicoid => {
            let (m, n) = exact_report(&ExactHelicoid { c: 1.0 }, &strip()?)?;
            (m, n, vec!["codazzi immerse --from exact-helicoid".to_string()])
        }
        ImmerseSource::Run(prefix) => {
            let (cfg, levels) = load_levels(prefix)?;
            let (spec, _) = cfg.validate()?;
            let m = realize_from_levels(&levels, &spec, None)?;
            let mut h = vec![format!("codazzi immerse --from run:{prefix}")];
            h.extend(cfg.to_lines());
            (m, Vec::new(), h)
        }
    };
    head.push(format!("grid {} x {}", mesh.grid.nx, mesh.grid.ny));
    export_obj(&mesh, &head, dest)?;
    notes.push(format!("max gram correction {:e}", mesh.max_correction));
    say(
        out,
        format_args!(
            "wrote {} ({} vertices, {} faces)\n{}\n",
            dest.display(),
            mesh.positions.len(),
            mesh.face_count(),
            notes.join("\n")
        ),
    )
}
