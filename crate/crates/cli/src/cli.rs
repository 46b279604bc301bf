//! Argument parsing and command dispatch.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::commands;
use crate::config::RunConfig;
use crate::Failure;

#[derive(Debug, Parser)]
#[command(name = "mrock", version, about = "Multirate stabilized solvers for stiff SDEs")]
pub struct Cli {
    /// Declarative run configuration (TOML, `version = 1`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for all randomness; overrides the config. Stochastic commands
    /// refuse to run without a seed from one of the two sources.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for path-parallel commands (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory for CSV tables and metadata; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Integrate one trajectory, recording per-step stage choices and work.
    Integrate,
    /// Monte-Carlo strong/weak error table over a ladder of step sizes.
    Converge,
    /// Tabulate stability polynomials and certify the mean-square domain.
    StabilityScan,
    /// Compare multirate and single-rate stepping costs across a sweep.
    Speedup,
    /// Certify mean-square contraction on a parameter grid.
    Certify,
}

/// Resolved run environment: parsed config plus the flag overrides already
/// applied. `out` exists by the time a command runs.
pub struct RunEnv {
    pub config: RunConfig,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

/// Loads the config, resolves overrides, and runs the command inside a local
/// thread pool when `--threads` is given. Returns the in-run failure list;
/// an `Err` means the run could not be carried out at all.
pub fn execute(cli: &Cli) -> Result<Vec<Failure>> {
    let config_path =
        cli.config.as_ref().context("no config: pass --config PATH (TOML, `version = 1`)")?;
    let config = RunConfig::load(config_path)?;
    let seed = cli.seed.or(config.seed);
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .context("no output directory: pass --out DIR or set `out` in the config")?;
    std::fs::create_dir_all(&out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    let env = RunEnv { config, seed, out };

    let run = || match cli.command {
        Command::Integrate => commands::integrate::run(&env),
        Command::Converge => commands::converge::run(&env),
        Command::StabilityScan => commands::stability::run_scan(&env),
        Command::Speedup => commands::speedup::run(&env),
        Command::Certify => commands::stability::run_certify(&env),
    };
    let failures = match cli.threads {
        // A local pool keeps --threads from mutating global process state.
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("cannot build thread pool")?
            .install(run)?,
        None => run()?,
    };

    // failures.txt always exists after a completed run; exit code 0 iff it
    // is empty. One line per failed check: "<check>\t<detail>".
    let listing: String = failures.iter().map(|f| format!("{}\t{}\n", f.check, f.detail)).collect();
    std::fs::write(env.out.join("failures.txt"), listing).context("cannot write failures.txt")?;
    Ok(failures)
}

/// Process entry point; returns the exit code. 0: ran, all in-run checks
/// passed. 1: ran, some checks failed (listed on stderr and in
/// failures.txt). 2: could not run.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version surface as clap "errors" but exit 0.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(failures) if failures.is_empty() => 0,
        Ok(failures) => {
            for f in &failures {
                eprintln!("FAIL {}: {}", f.check, f.detail);
            }
            1
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
