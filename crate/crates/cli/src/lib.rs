//! Command-line front end: parse flags, load the experiment file, size
//! the worker pool, run one command, map failures to exit codes. Exit 0
//! on success, 2 when the config cannot produce a runnable experiment, 1
//! when the experiment itself fails.

pub mod cluster;
pub mod commands;
pub mod config;

use clap::{Args, Parser, Subcommand};
use commands::{CliError, RunContext};
use config::load_config;
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "evodyn",
    version,
    about = "Simulation and analysis of evolving birth-death-competition populations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Individual-based trajectories (trait distribution over time)
    SimulateIbm(CommonArgs),
    /// Polymorphic evolution sequence with branching detection
    SimulatePes(CommonArgs),
    /// Trait substitution sequence
    SimulateTss(CommonArgs),
    /// Deterministic canonical trajectory
    Canonical(CommonArgs),
    /// Locate singularities, classify them, verify the local expansions
    Analyze(CommonArgs),
    /// Pairwise invasibility plot data
    Pip(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::SimulateIbm(a)
            | Command::SimulatePes(a)
            | Command::SimulateTss(a)
            | Command::Canonical(a)
            | Command::Analyze(a)
            | Command::Pip(a) => a,
        }
    }

    fn is_simulation(&self) -> bool {
        matches!(
            self,
            Command::SimulateIbm(_) | Command::SimulatePes(_) | Command::SimulateTss(_)
        )
    }
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Experiment file (TOML)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Master seed, overriding the experiment file
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Replicate count for the active command, overriding its section
    #[arg(long, value_name = "N")]
    replicates: Option<u64>,
    /// Output directory, overriding the experiment file
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for replicate batches and grid sweeps
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
}

#[cfg(feature = "parallel")]
fn configure_workers(workers: Option<usize>) {
    if let Some(n) = workers {
        // a second configuration attempt in the same process is fine; the
        // pool is already running
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_workers(workers: Option<usize>) {
    if workers.is_some() {
        eprintln!("note: built without the parallel feature; --workers has no effect");
    }
}

/// Run the program on the given argument list and return the exit code.
/// Split from `main` so tests can drive the full pipeline in-process.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports usage problems on stderr with code 2, which
            // lines up with invalid-config semantics; --help and
            // --version land here too, with code 0
            let _ = e.print();
            return e.exit_code();
        }
    };
    let args = cli.command.args();
    configure_workers(args.workers);

    let loaded = match load_config(&args.config) {
        Ok(loaded) => loaded,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    let mut config = loaded.config;
    if let Some(n) = args.replicates {
        if n == 0 {
            eprintln!("invalid config: --replicates must be at least 1");
            return 2;
        }
        config.ibm.replicates = n;
        config.pes.replicates = n;
        config.tss.replicates = n;
    }
    let seed = args.seed.or(config.seed).unwrap_or_else(evodyn_core::rng::entropy_seed);
    let out = args
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = RunContext { config, hash: loaded.hash, seed, out };

    if cli.command.is_simulation() {
        match ctx.model() {
            Ok(model) => {
                if let Some(note) = commands::scaling_advisory(&model) {
                    eprintln!("{note}");
                }
            }
            Err(e) => {
                eprintln!("{e}");
                return 2;
            }
        }
    }

    let result = match cli.command {
        Command::SimulateIbm(_) => commands::cmd_simulate_ibm(&ctx).map(|_| ()),
        Command::SimulatePes(_) => commands::cmd_simulate_pes(&ctx).map(|_| ()),
        Command::SimulateTss(_) => commands::cmd_simulate_tss(&ctx).map(|_| ()),
        Command::Canonical(_) => commands::cmd_canonical(&ctx).map(|_| ()),
        Command::Analyze(_) => commands::cmd_analyze(&ctx).map(|_| ()),
        Command::Pip(_) => commands::cmd_pip(&ctx).map(|_| ()),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Config(e)) => {
            eprintln!("{e}");
            2
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}
