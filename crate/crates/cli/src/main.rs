use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use codazzi_cli::commands::{self, ImmerseSource, DEFAULT_SWEEP};
use codazzi_cli::config::{parse_config_text, Assignment, RunConfig};
use codazzi_cli::validation::{run_suite, Fault, Options};
use codazzi_cli::{exit, CliError};

#[derive(Parser)]
#[command(
    name = "codazzi",
    version,
    about = "Viscous Gauss–Codazzi lab: metrics, invariant regions, solves, immersions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the metric `E, E', G, K, gamma` on [-y0, 0].
    Metric {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 257)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Invariant-region queries.
    Region {
        #[command(subcommand)]
        action: RegionAction,
    },
    /// Solve and write PREFIX_levelN.txt and PREFIX_log.csv.
    Solve {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output prefix; same as --prefix.
        #[arg(long, value_name = "PREFIX")]
        out: Option<String>,
    },
    /// Epsilon sweep with entropy and weak-residual diagnostics (PREFIX_sweep.csv).
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output prefix; same as --prefix.
        #[arg(long, value_name = "PREFIX")]
        out: Option<String>,
        /// Comma-separated epsilon values.
        #[arg(long, value_delimiter = ',')]
        eps_list: Option<Vec<f64>>,
    },
    /// Integrate the frame equations and export a Wavefront OBJ mesh.
    Immerse {
        /// exact-catenoid, exact-helicoid or run:PREFIX
        #[arg(long)]
        from: ImmerseSource,
        #[arg(long)]
        out: PathBuf,
        /// Nodes per side for the exact families.
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
    /// Run the acceptance suite; exit 4 unless every criterion passes.
    Validate {
        #[arg(long)]
        quick: bool,
        #[arg(long, hide = true, value_parser = ["gamma-sign"])]
        inject_fault: Option<String>,
    },
}

#[derive(Subcommand)]
enum RegionAction {
    /// Print the square's corners and bounds.
    Print {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// key = value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
    /// catenoid, helicoid, ode-catenoid, ode-helicoid or tabulated:PATH
    #[arg(long)]
    metric: Option<String>,
    /// Class of a tabulated metric: catenoid or helicoid.
    #[arg(long)]
    table_class: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    k0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    w0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    w0p: Option<String>,
    #[arg(long)]
    y0: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    nx: Option<String>,
    #[arg(long)]
    period: Option<String>,
    #[arg(long)]
    cfl_advect: Option<String>,
    #[arg(long)]
    cfl_source: Option<String>,
    #[arg(long)]
    mollifier: Option<String>,
    #[arg(long)]
    v_floor: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    /// stationary, perturbed, perturb:AMP, random or file:PATH
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    amplitude: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    /// Output prefix.
    #[arg(long)]
    prefix: Option<String>,
}

impl ConfigArgs {
    fn with_out(mut self, out: Option<String>) -> Self {
        if out.is_some() {
            self.prefix = out;
        }
        self
    }

    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut assignments = Vec::new();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            assignments.extend(parse_config_text(&text, &path.display().to_string())?);
        }
        let flags = [
            ("metric", &self.metric),
            ("table-class", &self.table_class),
            ("beta", &self.beta),
            ("c", &self.c),
            ("k0", &self.k0),
            ("a", &self.a),
            ("w0", &self.w0),
            ("w0p", &self.w0p),
            ("y0", &self.y0),
            ("eps", &self.eps),
            ("nx", &self.nx),
            ("period", &self.period),
            ("cfl-advect", &self.cfl_advect),
            ("cfl-source", &self.cfl_source),
            ("mollifier", &self.mollifier),
            ("v-floor", &self.v_floor),
            ("scheme", &self.scheme),
            ("delta", &self.delta),
            ("init", &self.init),
            ("amplitude", &self.amplitude),
            ("mode", &self.mode),
            ("seed", &self.seed),
            ("levels", &self.levels),
            ("prefix", &self.prefix),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                assignments.push(Assignment { key: key.into(), value: v.clone(), origin: format!("flag --{key}") });
            }
        }
        let cfg = RunConfig::from_assignments(&assignments)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Resolves the config; `Ok(None)` after a dry run.
fn prepare(args: &ConfigArgs, out: &mut dyn Write) -> Result<Option<RunConfig>, CliError> {
    let cfg = args.resolve()?;
    if args.dry_run {
        write!(out, "{cfg}").map_err(|e| CliError::Config(e.to_string()))?;
        return Ok(None);
    }
    Ok(Some(cfg))
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Metric { cfg, points, out: dest } => match prepare(&cfg, out)? {
            Some(c) => commands::metric(&c, points, dest.as_deref(), out),
            None => Ok(()),
        },
        Command::Region { action: RegionAction::Print { cfg } } => match prepare(&cfg, out)? {
            Some(c) => commands::region(&c, out),
            None => Ok(()),
        },
        Command::Solve { cfg, out: prefix } => match prepare(&cfg.with_out(prefix), out)? {
            Some(c) => commands::solve(&c, out),
            None => Ok(()),
        },
        Command::Sweep { cfg, out: prefix, eps_list } => match prepare(&cfg.with_out(prefix), out)? {
            Some(c) => commands::sweep(&c, eps_list.as_deref().unwrap_or(&DEFAULT_SWEEP), out),
            None => Ok(()),
        },
        Command::Immerse { from, out: dest, grid } => commands::immerse(&from, grid, &dest, out),
        Command::Validate { quick, inject_fault } => {
            let fault = inject_fault.map(|_| Fault::GammaSign);
            let report = run_suite(&Options { quick, fault });
            writeln!(out, "{report}").map_err(|e| CliError::Config(e.to_string()))?;
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Validation(report.failures()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            return ExitCode::from(code as u8);
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match dispatch(cli.command, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("codazzi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
