//! `omega-pricer`: runs one task from a config file or a bundled preset
//! and writes CSV files, a summary and the resolved config.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when the numerics fail.

mod config;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use thiserror::Error;

use config::RunConfig;

const PRESETS: [(&str, &str); 3] = [
    ("bs_negative_rational", include_str!("../presets/bs_negative_rational.ini")),
    ("crash_linear", include_str!("../presets/crash_linear.ini")),
    ("gold_loan", include_str!("../presets/gold_loan.ini")),
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] omega_pricer::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_validation() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "omega-pricer", version, about = "Perpetual American options with asset-dependent discounting")]
struct Args {
    /// Run configuration (`[section]` blocks of `key = value` lines).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Bundled configuration: bs_negative_rational, crash_linear or gold_loan.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides `[numerics] seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let text = match (&args.config, &args.preset) {
        (Some(path), _) => std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        (None, Some(name)) => PRESETS
            .iter()
            .find(|p| p.0 == name)
            .map(|p| p.1.to_string())
            .ok_or_else(|| CliError::Config(format!("unknown preset '{name}'")))?,
        (None, None) => return Err(CliError::Config("need --config or --preset".into())),
    };
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.numerics.seed = seed;
    }
    Ok(cfg)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("OMEGA_PRICER_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("OMEGA_PRICER_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
}

fn run(args: &Args) -> Result<String, CliError> {
    configure_threads()?;
    let cfg = load(args)?;
    let start = Instant::now();
    let out = tasks::run(&cfg)?;
    let elapsed = start.elapsed();
    std::fs::create_dir_all(&args.out_dir).map_err(|source| CliError::Io {
        path: args.out_dir.clone(),
        source,
    })?;
    let resolved = cfg.to_ini();
    let mut summary = String::from("[result]\n");
    for (k, v) in &out.result {
        summary.push_str(&format!("{k} = {v}\n"));
    }
    summary.push('\n');
    summary.push_str(&resolved);
    for (name, contents) in &out.files {
        write(&args.out_dir, name, contents)?;
    }
    write(&args.out_dir, "summary.ini", &summary)?;
    write(&args.out_dir, "resolved.ini", &resolved)?;
    // Kept apart so that the other outputs repeat bit for bit.
    write(&args.out_dir, "timing.txt", &format!("runtime_seconds = {}\n", elapsed.as_secs_f64()))?;
    Ok(summary)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(summary) => {
            if !args.quiet {
                print!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("omega-pricer: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
