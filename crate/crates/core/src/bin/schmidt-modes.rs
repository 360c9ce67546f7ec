use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use schmidt_modes::io::{OutputFormat, RunConfig};
use schmidt_modes::pipeline::{run_pipeline, Command};

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "SCHMIDT_MODES_THREADS";

#[derive(Parser)]
#[command(version, about = "Simulate and reconstruct spatial Schmidt modes of an SU(1,1) interferometer")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of frames to synthesize.
    #[arg(long, global = true)]
    frames: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic frame stack.
    Simulate,
    /// Total photon number over a uniform grid of interferometer phases.
    PhaseSweep,
    /// Azimuthal covariance, OAM spectra and speckle widths.
    Oam {
        /// Analyse a stored FSTK stack instead of synthesizing frames.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Radial covariance matrix and radial Schmidt modes.
    Radial {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// All analyses plus mode counts and model tables.
    Report {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Closed-loop comparison against the configured source.
    Verify,
}

fn configure(cli: &Cli) -> Result<RunConfig, schmidt_modes::io::ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.synthesis.seed = s;
    }
    if let Some(n) = cli.frames {
        cfg.synthesis.n_frames = n;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn threads() -> Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{THREADS_ENV} must be a positive integer, got {v:?}")),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match threads() {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match configure(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let (cmd, input) = match &cli.command {
        Cmd::Simulate => (Command::Simulate, None),
        Cmd::PhaseSweep => (Command::PhaseSweep, None),
        Cmd::Oam { input } => (Command::Oam, input.as_deref()),
        Cmd::Radial { input } => (Command::Radial, input.as_deref()),
        Cmd::Report { input } => (Command::Report, input.as_deref()),
        Cmd::Verify => (Command::Verify, None),
    };
    match run_pipeline(cmd, &cfg, input) {
        Ok(summary) => {
            // A closed stdout (e.g. piped into `head`) is not an error.
            let mut out = std::io::stdout().lock();
            for m in &summary.messages {
                let _ = writeln!(out, "{}", m.trim_end());
            }
            for f in &summary.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
