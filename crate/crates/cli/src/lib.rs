//! Batch front-end for the `flowlab` library.

pub mod commands;
pub mod config;
pub mod error;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use flowlab::estimators::CSV_HEADER;

pub use commands::{execute, Command, CommandOutput};
pub use config::{parse_config, parse_config_str, ExperimentConfig, Resolved, SCHEMA};
pub use error::CliError;

pub const OUT_ENV: &str = "FLOWLAB_OUT";
const DEFAULT_OUT: &str = "flowlab-out";

#[derive(Debug, Parser)]
#[command(name = "flowlab", version, about = "Monte Carlo experiments on stochastic flows")]
pub struct Cli {
    /// Experiment to run
    #[arg(value_enum)]
    pub command: Command,
    /// JSON experiment config
    pub config: PathBuf,
    /// Overrides mc.master_seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory; falls back to output.directory, then $FLOWLAB_OUT
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn output_dir(cli: &Cli, resolved: &Resolved) -> PathBuf {
    if let Some(p) = &cli.out {
        return p.clone();
    }
    if let Some(d) = &resolved.config.output.directory {
        return PathBuf::from(d);
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT),
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match run_inner(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("flowlab: {e}");
            e.exit_code()
        }
    }
}

fn run_inner(cli: &Cli) -> Result<i32, CliError> {
    let mut resolved = parse_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        resolved.config.mc.master_seed = seed;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Validation("--workers: must be positive".into()));
        }
        resolved.config.mc.workers = Some(w);
    }
    let dir = output_dir(cli, &resolved);
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let hash = resolved.config.hash();
    write(&dir.join("config.echo.json"), resolved.config.echo().as_bytes())?;

    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut log = format!(
        "flowlab {}\ncommand: {}\nconfig: {}\nparams_hash: {hash}\nmaster_seed: {}\nworkers: {}\nstarted_unix: {started}\n",
        env!("CARGO_PKG_VERSION"),
        cli.command.name(),
        cli.config.display(),
        resolved.config.mc.master_seed,
        resolved
            .config
            .mc
            .workers
            .map(|w| w.to_string())
            .unwrap_or_else(|| "default".into()),
    );
    let clock = Instant::now();
    let result = execute(cli.command, &resolved);
    let elapsed = clock.elapsed().as_secs_f64();
    let output = match result {
        Ok(o) => o,
        Err(e) => {
            log.push_str(&format!("elapsed_s: {elapsed:.3}\nerror: {e}\n"));
            write(&dir.join("run.log"), log.as_bytes())?;
            return Err(e);
        }
    };

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for row in &output.rows {
        csv.push_str(&row.csv_row(&hash));
        csv.push('\n');
    }
    for (name, contents) in &output.files {
        write(&dir.join(name), contents)?;
    }
    write(&dir.join("result.csv"), csv.as_bytes())?;
    let unreliable = output.unreliable();
    log.push_str(&output.log);
    log.push_str(&format!("elapsed_s: {elapsed:.3}\nrows: {}\nunreliable: {unreliable}\n", output.rows.len()));
    write(&dir.join("run.log"), log.as_bytes())?;
    Ok(if unreliable { 3 } else { 0 })
}
