use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use isoforge::theta::LatticeKind;

mod commands;
mod config;
mod export;
mod report;

use config::{KindConfig, OmegaMode, RunConfig};
use report::Report;

/// Exit codes.
const EXIT_USAGE: u8 = 1;
const EXIT_MATH: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "isoforge", version, about = "Synthesize and verify isothermic surfaces with planar curvature lines")]
struct Cli {
    /// Frame integrator tolerance (overrides tolerances.frame).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Directory for meshes, curves and reports.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print lambda0 or the critical omega of a rhombic lattice.
    Solve {
        #[arg(long)]
        lambda0: bool,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, value_enum, default_value = "rhombic")]
        kind: Kind,
        /// Take the lattice from a configuration file instead.
        config: Option<PathBuf>,
    },
    /// Export curves of the family as CSV and SVG.
    Curves(RunArgs),
    /// Build a surface, write an OBJ mesh and a report.
    Surface(RunArgs),
    /// Run the full verification battery and write a report.
    Verify(RunArgs),
    /// Build a surface with spherical second family and check its sphere centers and axis.
    Spherical(RunArgs),
    /// Tune the amplitude to a rational rotation angle and assemble the closed surface.
    CloseTorus(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Rhombic,
    Rectangular,
}

impl From<Kind> for KindConfig {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Rhombic => KindConfig::Rhombic,
            Kind::Rectangular => KindConfig::Rectangular,
        }
    }
}

/// Configuration path plus overrides for individual keys.
#[derive(Args)]
struct RunArgs {
    /// TOML configuration; defaults apply when omitted.
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Use an explicit omega instead of the critical one.
    #[arg(long)]
    omega: Option<f64>,
    /// Use the omega -> 0 limit family.
    #[arg(long)]
    limit: bool,
    #[arg(long)]
    mean: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    root_factor: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    nu: Option<usize>,
    #[arg(long)]
    nv: Option<usize>,
    #[arg(long)]
    periods: Option<usize>,
}

impl RunArgs {
    fn load(&self, tol: Option<f64>) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(k) = self.kind {
            cfg.lattice.kind = k.into();
        }
        if let Some(l) = self.lambda {
            cfg.lattice.lambda = l;
        }
        if let Some(w) = self.omega {
            cfg.omega.mode = OmegaMode::Explicit;
            cfg.omega.value = Some(w);
        }
        if self.limit {
            cfg.omega.mode = OmegaMode::Limit;
            cfg.omega.value = None;
        }
        if self.mean.is_some() {
            cfg.reparam.mean = self.mean;
        }
        if let Some(a) = self.amplitude {
            cfg.reparam.amplitude = a;
        }
        if let Some(r) = self.root_factor {
            cfg.reparam.root_factor = r;
        }
        if self.delta.is_some() {
            cfg.reparam.delta = self.delta;
        }
        if let Some(n) = self.nu {
            cfg.grid.nu = n;
        }
        if let Some(n) = self.nv {
            cfg.grid.nv = n;
        }
        if let Some(n) = self.periods {
            cfg.grid.periods = n;
        }
        if let Some(t) = tol {
            cfg.tolerances.frame = t;
        }
        cfg.check()?;
        Ok(cfg)
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ISOFORGE_THREADS") {
        let n: usize = v.parse().with_context(|| format!("ISOFORGE_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().context("cannot configure the thread pool")?;
    }
    Ok(())
}

/// Mathematical preconditions map to exit code 2, everything else to 1.
fn error_code(e: &anyhow::Error) -> u8 {
    if e.chain().any(|c| c.downcast_ref::<isoforge::error::Error>().is_some()) {
        EXIT_MATH
    } else {
        EXIT_USAGE
    }
}

fn finish(report: Result<Report>) -> ExitCode {
    match report {
        Ok(r) if r.pass => {
            println!("all checks passed");
            ExitCode::SUCCESS
        }
        Ok(r) => {
            for f in r.failures() {
                println!("FAILED {f}");
            }
            ExitCode::from(EXIT_VERIFY)
        }
        Err(e) => fail(e),
    }
}

fn fail(e: anyhow::Error) -> ExitCode {
    eprintln!("error: {e:#}");
    ExitCode::from(error_code(&e))
}

fn run_with(args: &RunArgs, cli: &Cli, f: fn(&RunConfig, &Path) -> Result<Report>) -> ExitCode {
    let cfg = match args.load(cli.tol) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cli.out_dir) {
        eprintln!("error: cannot create {}: {e}", cli.out_dir.display());
        return ExitCode::from(EXIT_USAGE);
    }
    finish(f(&cfg, &cli.out_dir))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_USAGE);
    }
    match &cli.command {
        Command::Solve { lambda0, lambda, kind, config } => {
            let (lambda, kind) = match config {
                Some(p) => match RunConfig::load(p) {
                    Ok(c) => (lambda.or(Some(c.lattice.lambda)), LatticeKind::from(c.lattice.kind)),
                    Err(e) => {
                        eprintln!("error: {e:#}");
                        return ExitCode::from(EXIT_USAGE);
                    }
                },
                None => (*lambda, LatticeKind::from(KindConfig::from(*kind))),
            };
            match commands::solve(lambda, *lambda0, kind) {
                Ok(s) => {
                    for l in s.lines {
                        println!("{l}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Curves(a) => run_with(a, &cli, commands::cmd_curves),
        Command::Surface(a) => run_with(a, &cli, commands::cmd_surface),
        Command::Verify(a) => run_with(a, &cli, commands::cmd_verify),
        Command::Spherical(a) => run_with(a, &cli, commands::cmd_spherical),
        Command::CloseTorus(a) => run_with(a, &cli, commands::cmd_close_torus),
    }
}
