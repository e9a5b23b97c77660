//! Argument parsing and dispatch for the `cfs` binary.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error.
//! The worker pool size is read from `CFS_THREADS`.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

use crate::commands::{
    cmd_check_grad, cmd_minimize, cmd_oracle, cmd_plot, cmd_sweep, OracleRequest, SweepGrid,
};
use crate::error::Error;
use crate::geometry::DEFAULT_RESCALE_EXPONENT;
use crate::io::RunSpec;
use crate::optimize::OptimizerSettings;
use crate::parametrize::Shape;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const THREADS_ENV: &str = "CFS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "cfs", version, about = "Minimize the causal action for weighted counting measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multi-restart two-stage minimization for one (n, f, m).
    Minimize(MinimizeArgs),
    /// Build and evaluate an analytic reference configuration.
    Oracle(OracleArgs),
    /// Write projected spacetime plot rows for a stored n = 1 configuration.
    Plot(PlotArgs),
    /// Compare the analytic gradient with central differences.
    CheckGrad(CheckGradArgs),
    /// Minimize over a grid of shapes and fit log-log slopes.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    /// Explicit comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// First seed when `--seeds` is not given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of sequential seeds when `--seeds` is not given.
    #[arg(long, default_value_t = 10)]
    pub restarts: u64,
}

impl SeedArgs {
    pub fn resolve(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (self.seed..self.seed + self.restarts).collect(),
        }
    }
}

#[derive(Debug, Args)]
pub struct SettingsArgs {
    #[arg(long)]
    pub mu0: Option<f64>,
    #[arg(long)]
    pub ftol: Option<f64>,
    /// Gradient tolerance for both stages.
    #[arg(long)]
    pub gtol: Option<f64>,
    #[arg(long = "max-iters-1")]
    pub max_iters_1: Option<usize>,
    #[arg(long = "max-iters-2")]
    pub max_iters_2: Option<usize>,
    /// L-BFGS memory.
    #[arg(long)]
    pub memory: Option<usize>,
    /// Wall-clock limit per run in seconds.
    #[arg(long)]
    pub wall_clock: Option<f64>,
}

impl SettingsArgs {
    pub fn settings(&self) -> OptimizerSettings {
        let mut s = OptimizerSettings::default();
        s.mu0 = self.mu0.or(s.mu0);
        s.ftol = self.ftol.unwrap_or(s.ftol);
        if let Some(g) = self.gtol {
            s.gtol_stage1 = g;
            s.gtol_stage2 = g;
        }
        s.max_iter_stage1 = self.max_iters_1.unwrap_or(s.max_iter_stage1);
        s.max_iter_stage2 = self.max_iters_2.unwrap_or(s.max_iter_stage2);
        s.memory = self.memory.unwrap_or(s.memory);
        s.wall_clock_limit = self.wall_clock.or(s.wall_clock_limit);
        s
    }
}

#[derive(Debug, Args)]
pub struct MinimizeArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub f: usize,
    #[arg(long)]
    pub m: usize,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[command(flatten)]
    pub settings: SettingsArgs,
    /// Result file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write plot rows relative to point 0 (n = 1 only).
    #[arg(long)]
    pub export_plot: bool,
    /// Store the full matrix of pair Lagrangians.
    #[arg(long)]
    pub export_pairs: bool,
    /// Keep the per-run action traces.
    #[arg(long)]
    pub export_trace: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OracleKind {
    Dirac2d,
    Dirac4d,
    Orthogonal,
    Iso,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(value_enum)]
    pub kind: OracleKind,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long)]
    pub f: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Bloch lengths for the isotropic table.
    #[arg(long, value_delimiter = ',', default_value = "1,1.25,1.5,2,3,5")]
    pub taus: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Result file holding an n = 1 configuration.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub ref_index: usize,
    /// Divide coordinates by |hat_y0|^exponent.
    #[arg(long)]
    pub rescale: bool,
    #[arg(long, default_value_t = DEFAULT_RESCALE_EXPONENT)]
    pub exponent: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckGradArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub f: usize,
    #[arg(long)]
    pub m: usize,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub f: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub m: Vec<usize>,
    /// Tie f to m in every cell.
    #[arg(long)]
    pub f_equals_m: bool,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[command(flatten)]
    pub settings: SettingsArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn emit(file: &crate::io::ResultFile, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(p) => {
            file.save(p)?;
            log::info!("wrote {}", p.display());
        }
        None => print!("{}", file.to_json()?),
    }
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = v
        .trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    if threads == 0 {
        return Err(Failure::Usage(format!("{THREADS_ENV} must be positive")));
    }
    // A second call within one process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Minimize(a) => {
            let mut spec = RunSpec::new(a.n, a.f, a.m, a.seeds.resolve());
            spec.settings = a.settings.settings();
            spec.output_path = a.out.clone();
            spec.export_plot = a.export_plot;
            spec.export_pairs = a.export_pairs;
            spec.export_trace = a.export_trace;
            spec.validate().map_err(usage)?;
            let file = cmd_minimize(&spec)?;
            log::info!("best S = {:.12e}", file.action.unwrap_or(f64::NAN));
            if spec.output_path.is_none() {
                emit(&file, None)?;
            }
        }
        Command::Oracle(a) => {
            let need_m = || a.m.ok_or_else(|| Failure::Usage("--m is required for this oracle".into()));
            let request = match a.kind {
                OracleKind::Dirac2d => OracleRequest::Dirac2d { m: need_m()?, seed: a.seed },
                OracleKind::Dirac4d => OracleRequest::Dirac4d { m: need_m()?, seed: a.seed },
                OracleKind::Orthogonal => {
                    let m = need_m()?;
                    OracleRequest::Orthogonal { n: a.n, f: a.f.unwrap_or(m * a.n), m }
                }
                OracleKind::Iso => OracleRequest::Iso { taus: a.taus.clone() },
            };
            emit(&cmd_oracle(&request)?, a.out.as_ref())?;
        }
        Command::Plot(a) => {
            let rescale = a.rescale.then_some(a.exponent);
            let rows = cmd_plot(&a.input, a.ref_index, rescale, &a.out)?;
            log::info!("wrote {} rows to {}", rows.len(), a.out.display());
        }
        Command::CheckGrad(a) => {
            let shape = Shape::new(a.n, a.f, a.m).map_err(usage)?;
            if !(a.step > 0.0) {
                return Err(Failure::Usage(format!("step must be positive, got {}", a.step)));
            }
            let entries = cmd_check_grad(shape, &a.seeds.resolve(), a.step)?;
            let text = serde_json::to_string_pretty(&entries).map_err(Error::from)?;
            println!("{text}");
        }
        Command::Sweep(a) => {
            let grid = SweepGrid { ns: a.n, fs: a.f, ms: a.m, f_equals_m: a.f_equals_m };
            if grid.cells().is_empty() {
                return Err(Failure::Usage("empty sweep grid".into()));
            }
            let settings = a.settings.settings();
            settings.validate().map_err(usage)?;
            let summary = cmd_sweep(&grid, &a.seeds.resolve(), &settings, &a.out)?;
            let text = serde_json::to_string_pretty(&summary).map_err(Error::from)?;
            println!("{text}");
        }
    }
    Ok(())
}

/// Parse `args` (including the program name) and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}
