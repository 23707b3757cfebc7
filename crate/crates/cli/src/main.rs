use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sirwave_cli::config::{RunConfig, Solver, SweepTask};
use sirwave_cli::error::{CliError, RunStatus, EXIT_CONFIG};
use sirwave_cli::replay::{replay, FileCheck};
use sirwave_cli::sweep::{default_jobs, SweepSpec, Vary};
use sirwave_cli::{commands, sweep};
use sirwave_core::verification::Level;

/// Traveling waves of a diffusive SIR model: speed analysis, wave profiles,
/// PDE runs, sweeps and consolidated checks.
#[derive(Parser)]
#[command(name = "sirwave", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config with a `params` block; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $SIRWAVE_OUTPUT_ROOT/<command>, root `sirwave-out`].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// R0, minimal speed, lambda0 table, d3 condition and Phi samples.
    Analyze {
        /// Speeds for the lambda0 table (comma separated).
        #[arg(long = "c", value_delimiter = ',')]
        c: Vec<f64>,
        /// Also write phi.csv.
        #[arg(long)]
        phi_csv: bool,
    },
    /// Solve for the wave profile at speed c.
    Profile {
        #[arg(long)]
        c: Option<f64>,
        /// Half-width of the window [-L, L].
        #[arg(long = "L")]
        half_width: Option<f64>,
        #[arg(long)]
        dx: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long, value_enum)]
        solver: Option<Solver>,
        /// Anderson mixing depth (0 = plain Picard).
        #[arg(long)]
        anderson: Option<usize>,
        /// Solve even where no wave is expected (c <= c*, R0 <= 1).
        #[arg(long)]
        force: bool,
    },
    /// Integrate the PDE from a localized pulse and measure the front.
    Simulate {
        #[arg(long)]
        t_end: Option<f64>,
        /// Time step, or `auto` for the stable step.
        #[arg(long)]
        dt: Option<String>,
        /// Half-width of the window [-L, L].
        #[arg(long = "L")]
        half_width: Option<f64>,
        #[arg(long)]
        dx: Option<f64>,
    },
    /// Run profile (or simulate) jobs over one or two varied keys.
    Sweep {
        /// key=lo:hi:n; give once or twice.
        #[arg(long, required = true)]
        vary: Vec<Vary>,
        /// Worker count [default: $SIRWAVE_JOBS or the number of CPUs].
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum)]
        task: Option<SweepTask>,
    },
    /// Run the consolidated checks; exits 3 if any check fails.
    Verify {
        #[arg(long, value_enum)]
        level: Option<LevelArg>,
        /// Sampling seed (decimal or 0x-prefixed hex).
        #[arg(long, value_parser = parse_seed)]
        seed: Option<u64>,
        #[arg(long)]
        c: Option<f64>,
    },
    /// Re-run a manifest and compare content hashes; exits 3 on any difference.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid seed `{s}`: {e}"))
}

fn default_out(name: &str) -> PathBuf {
    let root = std::env::var_os("SIRWAVE_OUTPUT_ROOT").map_or_else(|| PathBuf::from("sirwave-out"), PathBuf::from);
    root.join(name)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn run(cli: Cli) -> Result<RunStatus, CliError> {
    let common = cli.common;
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let out = |name: &str| common.out.clone().unwrap_or_else(|| default_out(name));
    let status = match cli.command {
        Command::Analyze { c, phi_csv } => {
            if !c.is_empty() {
                cfg.c_values = c;
            }
            cfg.phi_csv |= phi_csv;
            commands::analyze(&cfg, &out("analyze"))?
        }
        Command::Profile {
            c,
            half_width,
            dx,
            tol,
            max_iter,
            solver,
            anderson,
            force,
        } => {
            set(&mut cfg.c, c);
            set(&mut cfg.half_width, half_width);
            set(&mut cfg.dx, dx);
            set(&mut cfg.tol, tol);
            set(&mut cfg.max_iter, max_iter);
            set(&mut cfg.solver, solver);
            set(&mut cfg.anderson_depth, anderson);
            cfg.force |= force;
            commands::profile(&cfg, &out("profile"))?
        }
        Command::Simulate {
            t_end,
            dt,
            half_width,
            dx,
        } => {
            set(&mut cfg.t_end, t_end);
            set(&mut cfg.sim_half_width, half_width);
            set(&mut cfg.sim_dx, dx);
            if let Some(dt) = dt {
                cfg.dt = match dt.trim().to_ascii_lowercase().as_str() {
                    "auto" => None,
                    v => Some(
                        v.parse()
                            .map_err(|_| CliError::Config(format!("`--dt {dt}`: expected a number or `auto`")))?,
                    ),
                };
            }
            commands::simulate(&cfg, &out("simulate"))?
        }
        Command::Sweep { vary, jobs, task } => {
            set(&mut cfg.sweep_task, task);
            let spec = SweepSpec::new(vary, &cfg)?;
            sweep::sweep(&cfg, &spec, jobs.unwrap_or_else(default_jobs), &out("sweep"))?
        }
        Command::Verify { level, seed, c } => {
            if let Some(l) = level {
                cfg.level = match l {
                    LevelArg::Quick => Level::Quick,
                    LevelArg::Full => Level::Full,
                };
            }
            set(&mut cfg.seed, seed);
            set(&mut cfg.c, c);
            commands::verify(&cfg, &out("verify"))?
        }
        Command::Replay { manifest, jobs } => {
            if common.config.is_some() {
                return Err(CliError::Config("replay takes its config from the manifest; drop --config".into()));
            }
            let dir = out("replay");
            let report = replay(&manifest, &dir, jobs.unwrap_or_else(default_jobs))?;
            for f in &report.files {
                match f {
                    FileCheck::Match(p) => println!("ok        {p}"),
                    FileCheck::Mismatch(p) => println!("MISMATCH  {p}"),
                    FileCheck::Missing(p) => println!("MISSING   {p}"),
                    FileCheck::Extra(p) => println!("EXTRA     {p}"),
                }
            }
            if report.reproduced() {
                println!("reproduced {} files into {}", report.files.len(), dir.display());
                report.status
            } else {
                println!("replay differs from {}", manifest.display());
                RunStatus::VerifyFailed
            }
        }
    };
    Ok(status)
}

fn main() -> ExitCode {
    // Usage errors exit 1 like other config errors; exit 2 is reserved
    // for non-convergence.
    let matches = match Cli::try_parse() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(matches) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("sirwave: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
