mod commands;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use sta_core::report::{csv_string, Provenance, Report, Table};
use sta_core::trajectory::TrajectoryFamily;
use sta_core::validation::VALIDATION_SEED;
use sta_core::{Error, PhysicalConfig};

/// Force-noise visibility analysis for STA-guided atom interferometers.
#[derive(Debug, Parser)]
#[command(name = "sta", version)]
struct Cli {
    /// TOML file with physical parameters (SI mass, µm/µs/zN otherwise).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Emit JSON instead of CSV.
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true, default_value_t = VALIDATION_SEED)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Significant digits for numbers in CSV output.
    #[arg(long, global = true, default_value_t = 10)]
    precision: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample trajectories α, α̇, α̈ and the compensating force.
    Traj(TrajArgs),
    /// Interference populations versus sensitivity for two forces.
    Sweep(SweepArgs),
    /// Fringe data P↑(S) with optional noise envelope and measured periods.
    Fringes(FringeArgs),
    /// Monte Carlo estimate of the noise-averaged overlap.
    Mc(McArgs),
    /// δ sweep of the scaled optimal-trajectory problem and quartic fit.
    Optimize(OptimizeArgs),
    /// W(S) curves for the polynomial families and the optimal bound.
    Bound(BoundArgs),
    /// Run the acceptance suite.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct TrajArgs {
    #[arg(long, default_value = "sixth", value_parser = parse_family)]
    pub family: TrajectoryFamily,
    /// Amplitudes M in µm (repeat or comma-separate).
    #[arg(long = "amplitude", value_delimiter = ',')]
    pub amplitudes: Vec<f64>,
    /// Final time in µs (defaults to the configured t_f).
    #[arg(long)]
    pub tf: Option<f64>,
    /// Number of time intervals; rows = samples + 1.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Four sixth-order curves at t_f = 0.7 µs, M = λ/8 … λ/2 (λ = 0.866 µm).
    #[arg(long)]
    pub figure1: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value = "sixth", value_parser = parse_family)]
    pub family: TrajectoryFamily,
    #[arg(long = "c-zN", value_delimiter = ',', default_values_t = [10.0, 20.0])]
    pub c_zn: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub m_min: f64,
    #[arg(long, default_value_t = 0.5)]
    pub m_max: f64,
    #[arg(long, default_value_t = 501)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct FringeArgs {
    #[arg(long, default_value = "sixth", value_parser = parse_family)]
    pub family: TrajectoryFamily,
    #[arg(long = "c-zN", value_delimiter = ',', default_values_t = [10.0, 20.0])]
    pub c_zn: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub m_max: f64,
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    /// Include the visibility envelope from the configured λ²γ.
    #[arg(long)]
    pub noise: bool,
    /// Override λ²γ (µs) for the envelope.
    #[arg(long)]
    pub lambda_sq_gamma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, default_value = "sixth", value_parser = parse_family)]
    pub family: TrajectoryFamily,
    /// Amplitude M in µm (default λ/4).
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Target perturbative loss D; sets λ²γ accordingly.
    #[arg(long, conflicts_with = "lambda_sq_gamma")]
    pub loss: Option<f64>,
    /// Noise strength λ²γ in µs (defaults to the configured value).
    #[arg(long)]
    pub lambda_sq_gamma: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub realizations: usize,
    /// Noise step in µs (default t_f/2000).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Also write every realization's overlap to this CSV file.
    #[arg(long)]
    pub samples_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, default_value_t = 1.0)]
    pub delta_min: f64,
    #[arg(long, default_value_t = 1e7)]
    pub delta_max: f64,
    #[arg(long, default_value_t = 40)]
    pub points: usize,
    #[arg(long, default_value_t = sta_core::optimizer::DEFAULT_GRID_N)]
    pub grid_n: usize,
    #[arg(long, default_value_t = sta_core::optimizer::DEFAULT_FIT_SMIN)]
    pub fit_smin: f64,
    /// `log` or `linear`.
    #[arg(long, default_value = "log")]
    pub spacing: String,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Use this k instead of running the optimizer.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub tf: f64,
    #[arg(long, default_value_t = 1.0)]
    pub s_max: f64,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = sta_core::optimizer::DEFAULT_GRID_N)]
    pub grid_n: usize,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Run only these criteria (comma-separated ids).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
}

fn parse_family(s: &str) -> Result<TrajectoryFamily, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure classes mapped onto process exit codes.
pub enum Failure {
    Config(String),
    Numerical(String),
    Acceptance(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Acceptance(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Acceptance(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Continuation { .. }
            | Error::Integrator(_)
            | Error::SingularTheta { .. }
            | Error::SingularMatrix(_)
            | Error::Quadrature { .. }
            | Error::GridEscape { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("I/O error: {e}"))
    }
}

/// What a subcommand produced.
pub struct Output {
    pub tables: Vec<Table>,
    pub seeds: Vec<u64>,
    /// Pre-rendered JSON (used by `validate`).
    pub json: Option<serde_json::Value>,
    pub failure: Option<Failure>,
}

impl Output {
    pub fn tables(tables: Vec<Table>) -> Self {
        Self { tables, seeds: Vec::new(), json: None, failure: None }
    }
}

pub struct Context {
    pub cfg: PhysicalConfig,
    pub seed: u64,
}

fn load_config(path: Option<&Path>) -> Result<PhysicalConfig, Failure> {
    match path {
        None => Ok(PhysicalConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", p.display())))?;
            Ok(PhysicalConfig::from_config_str(&text)?)
        }
    }
}

fn config_hash(cfg: &PhysicalConfig, command: &Command) -> String {
    let mut h = Sha256::new();
    h.update(cfg.to_config_string().as_bytes());
    h.update(format!("{command:?}").as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Traj(_) => "traj",
        Command::Sweep(_) => "sweep",
        Command::Fringes(_) => "fringes",
        Command::Mc(_) => "mc",
        Command::Optimize(_) => "optimize",
        Command::Bound(_) => "bound",
        Command::Validate(_) => "validate",
    }
}

fn numbered(path: &Path, index: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{index}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{index}"),
    };
    path.with_file_name(name)
}

fn emit(cli: &Cli, prov: &Provenance, out: &Output) -> Result<(), Failure> {
    let chunks: Vec<String> = if cli.json {
        let value = match &out.json {
            Some(v) => serde_json::json!({ "provenance": prov, "result": v }),
            None => serde_json::to_value(Report { provenance: prov, tables: &out.tables })
                .map_err(|e| Failure::Config(e.to_string()))?,
        };
        vec![serde_json::to_string_pretty(&value).map_err(|e| Failure::Config(e.to_string()))? + "\n"]
    } else {
        out.tables.iter().map(|t| csv_string(prov, t, cli.precision)).collect()
    };
    match &cli.out {
        // Several CSV tables go to numbered files next to the requested path.
        Some(path) if chunks.len() > 1 => {
            for (i, c) in chunks.iter().enumerate() {
                fs::write(numbered(path, i + 1), c)?;
            }
        }
        Some(path) => fs::write(path, chunks.concat())?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(chunks.join("\n").as_bytes())?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    if cli.precision == 0 || cli.precision > 17 {
        return Err(Failure::Config("--precision must be in 1..=17".into()));
    }
    let cfg = load_config(cli.config.as_deref())?;
    let ctx = Context { cfg, seed: cli.seed };
    let mut out = match &cli.command {
        Command::Traj(a) => commands::traj(&ctx, a)?,
        Command::Sweep(a) => commands::sweep(&ctx, a)?,
        Command::Fringes(a) => commands::fringes(&ctx, a)?,
        Command::Mc(a) => commands::mc(&ctx, a)?,
        Command::Optimize(a) => commands::optimize(&ctx, a)?,
        Command::Bound(a) => commands::bound(&ctx, a)?,
        Command::Validate(a) => commands::validate(&ctx, a)?,
    };
    let prov = Provenance::new(
        command_name(&cli.command),
        std::mem::take(&mut out.seeds),
        config_hash(&ctx.cfg, &cli.command),
    );
    emit(cli, &prov, &out)?;
    match out.failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
