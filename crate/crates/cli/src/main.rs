//! `levelset-uq`: experiments on level-set uncertainty quantification.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 protocol error.

mod commands;
mod config;
mod error;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levelset_core::Exec;

use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "levelset-uq",
    version,
    about = "Level-set uncertainty quantification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Three-Gaussian demo: contour data, label map and equivalence audit.
    GaussianDemo(Common),
    /// Probe a classifier at points and write interval records.
    Probe(Common),
    /// Audit interval records for self-consistency.
    Audit(Common),
    /// Train pairwise families and optionally probe and audit them.
    Train(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn with_jobs(jobs: Option<usize>, f: impl FnOnce(Exec) -> CliResult<()> + Send) -> CliResult<()> {
    let n = jobs.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    if n == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    if n == 1 {
        return f(Exec::Sequential);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| f(Exec::Parallel))
}

fn dispatch(run: fn(&Path, &Path, Exec) -> CliResult<()>, c: Common) -> CliResult<()> {
    with_jobs(c.jobs, |exec| run(&c.config, &c.out, exec))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::GaussianDemo(c) => dispatch(commands::demo::run, c),
        Command::Probe(c) => dispatch(commands::probe::run, c),
        Command::Audit(c) => dispatch(commands::audit::run, c),
        Command::Train(c) => dispatch(commands::train::run, c),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("levelset-uq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
