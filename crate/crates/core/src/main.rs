use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sptraj::config::{Experiment, OracleSpec, ProfileSpec, RunConfig};
use sptraj::oracles::{tla_table, TwoLevelAtomSpec};
use sptraj::{runner, Error, Result};

const DEFAULT_OUT: &str = "sptraj-out";

#[derive(Parser)]
#[command(name = "sptraj", version, about = "Quantum trajectories driven by a single-photon wave packet")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base seed; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config value.
    #[arg(long, global = true, env = "SPTRAJ_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Worker threads for trajectory batches and quadrature.
    #[arg(long, global = true, env = "SPTRAJ_THREADS")]
    threads: Option<usize>,
    /// Rescale homodyne states to unit trace after each step.
    #[arg(long, global = true)]
    renormalize: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run any experiment described by a config file.
    Run { config: PathBuf },
    /// Discrete-to-continuum convergence report.
    Convergence { config: PathBuf },
    /// Count-number probabilities table.
    CountingStats { config: PathBuf },
    /// Closed-form oracles.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Two-level atom starting in the ground state; prints JSON rows.
    Tla(TlaArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileName {
    MatchedExponential,
    ConstantWindow,
    Gaussian,
    Vacuum,
}

#[derive(Args)]
struct TlaArgs {
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, value_enum, default_value = "matched-exponential")]
    profile: ProfileName,
    /// Packet decay rate of the matched exponential.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, default_value_t = 1.0)]
    t1: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Comma-separated evaluation times.
    #[arg(long, value_delimiter = ',', required = true)]
    times: Vec<f64>,
}

impl TlaArgs {
    fn profile_spec(&self) -> ProfileSpec {
        match self.profile {
            ProfileName::MatchedExponential => ProfileSpec::MatchedExponential { gamma: self.rate },
            ProfileName::ConstantWindow => ProfileSpec::ConstantWindow { t0: self.t0, t1: self.t1 },
            ProfileName::Gaussian => ProfileSpec::Gaussian { t0: self.t0, sigma: self.sigma },
            ProfileName::Vacuum => ProfileSpec::Vacuum,
        }
    }
}

fn load(path: &Path, g: &Global, expect: Option<Experiment>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(e) = expect {
        if cfg.experiment != e {
            return Err(Error::Config(format!(
                "{}: experiment is `{}`, this subcommand needs `{}`",
                path.display(),
                cfg.experiment,
                e
            )));
        }
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.renormalize |= g.renormalize;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig, g: &Global) -> PathBuf {
    g.out_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let g = &cli.global;
    let (path, expect) = match &cli.command {
        Command::Run { config } => (config, None),
        Command::Convergence { config } => (config, Some(Experiment::Convergence)),
        Command::CountingStats { config } => (config, Some(Experiment::CountingStats)),
        Command::Oracle(OracleCommand::Tla(a)) => {
            let spec = TwoLevelAtomSpec::new(a.gamma, a.profile_spec().build()?)?;
            let rows = tla_table(&spec, &a.times)?;
            println!("{}", serde_json::to_string_pretty(&rows)?);
            if let Some(dir) = &g.out_dir {
                let cfg = RunConfig::oracle(a.profile_spec(), OracleSpec { gamma: a.gamma, times: a.times.clone() });
                runner::run(&cfg, dir)?;
            }
            return Ok(());
        }
    };
    let cfg = load(path, g, expect)?;
    let dir = out_dir(&cfg, g);
    let files = runner::run(&cfg, &dir)?;
    for f in files {
        println!("{}", dir.join(&f.path).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
