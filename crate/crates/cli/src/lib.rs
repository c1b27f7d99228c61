//! `leechsim`: simulate, summarise, fit, calibrate, render and track.
//!
//! Exit codes are 0 on success, 2 for configuration or usage errors and 3
//! for runtime failures.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use leech_core::trackio::DEFAULT_THRESHOLD;
use leech_core::{EnvironmentTemplate, PowerLawFit};

pub use commands::{
    cmd_calibrate, cmd_fit, cmd_render, cmd_simulate, cmd_stats, cmd_track, RenderMode, SimulateOutcome,
};
pub use config::{CorridorConfig, EnvironmentConfig, MazeConfig, RunConfig, StartPosition};

pub const DEFAULT_OUTPUT_DIR: &str = "leechsim-out";
pub const DEFAULT_PX_PER_MM: f64 = 4.0;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    /// Unparseable command line; the text is clap's own message.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "leechsim", version, about = "Leech exploration simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Where a run configuration comes from.
#[derive(Debug, Args)]
pub struct ConfigSource {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "manifest")]
    pub config: Option<PathBuf>,
    /// `manifest.json` of an earlier run; its configuration is reused.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl ConfigSource {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        match (&self.config, &self.manifest) {
            (Some(p), _) => RunConfig::load(p),
            (None, Some(p)) => RunConfig::from_manifest(p),
            (None, None) => Ok(RunConfig::default()),
        }
    }

    fn environment(&self) -> Result<EnvironmentTemplate, CliError> {
        self.load()?.environment.build()
    }

    fn given(&self) -> bool {
        self.config.is_some() || self.manifest.is_some()
    }
}

/// Overrides applied on top of the configuration.
#[derive(Debug, Args)]
pub struct RunOverrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Trial length in ticks.
    #[arg(long)]
    pub duration: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl RunOverrides {
    fn apply(&self, mut config: RunConfig) -> RunConfig {
        if let Some(s) = self.seed {
            config.base_seed = s;
        }
        if let Some(n) = self.trials {
            config.n_trials = n;
        }
        if let Some(d) = self.duration {
            config.duration_ticks = d;
        }
        config
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an ensemble and write per-trial CSVs and a manifest.
    Simulate {
        #[command(flatten)]
        source: ConfigSource,
        #[command(flatten)]
        overrides: RunOverrides,
        /// Output directory (default: `output_dir` from the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Visit, time and dwell statistics for a directory of trajectories.
    Stats {
        dir: PathBuf,
        /// Output directory (default: `<dir>/stats`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Room count when the directory has no manifest.
        #[arg(long)]
        rooms: Option<u32>,
    },
    /// Fit a power law to the visit frequencies of a stats CSV.
    Fit {
        stats: PathBuf,
        /// JSON output file (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tune `q_scale` against a target power law.
    Calibrate {
        #[command(flatten)]
        source: ConfigSource,
        #[command(flatten)]
        overrides: RunOverrides,
        #[arg(long, default_value_t = 0.35, allow_negative_numbers = true)]
        target_a: f64,
        #[arg(long, default_value_t = -0.82, allow_negative_numbers = true)]
        target_b: f64,
        /// JSON output file (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a trajectory as an overlay, an activity map or camera frames.
    Render {
        csv: PathBuf,
        #[command(flatten)]
        source: ConfigSource,
        #[arg(long, value_enum, default_value_t = RenderMode::Overlay)]
        mode: RenderMode,
        #[arg(long, default_value_t = DEFAULT_PX_PER_MM)]
        px_per_mm: f64,
        /// Trial id to render (default: the first in the file).
        #[arg(long)]
        trial: Option<u64>,
        /// Image file, or a directory for `frames`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover a trajectory from a directory of `frame_NNNNNN.ppm` files.
    Track {
        frames: PathBuf,
        /// Environment for `y` orientation and region labels.
        #[command(flatten)]
        source: ConfigSource,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: u8,
        #[arg(long, default_value_t = DEFAULT_PX_PER_MM)]
        px_per_mm: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_json(value: &serde_json::Value, out: Option<&Path>) -> Result<(), CliError> {
    let text = commands::json_text(value);
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            source,
            overrides,
            out,
        } => {
            let config = overrides.apply(source.load()?);
            let out = out
                .or_else(|| config.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
            let outcome = cmd_simulate(&config, &out, overrides.workers)?;
            eprintln!(
                "wrote {} trajectories and {}",
                outcome.files.len(),
                outcome.manifest.display()
            );
            Ok(())
        }
        Command::Stats { dir, out, rooms } => {
            let out = out.unwrap_or_else(|| dir.join("stats"));
            cmd_stats(&dir, &out, rooms)?;
            eprintln!("wrote statistics to {}", out.display());
            Ok(())
        }
        Command::Fit { stats, out } => write_json(&cmd_fit(&stats)?, out.as_deref()),
        Command::Calibrate {
            source,
            overrides,
            target_a,
            target_b,
            out,
        } => {
            let config = overrides.apply(source.load()?);
            let report = cmd_calibrate(&config, PowerLawFit::target(target_a, target_b), overrides.workers)?;
            write_json(&report, out.as_deref())
        }
        Command::Render {
            csv,
            source,
            mode,
            px_per_mm,
            trial,
            out,
        } => {
            if !(px_per_mm.is_finite() && px_per_mm > 0.0) {
                return Err(CliError::Config(format!("invalid px-per-mm {px_per_mm}")));
            }
            cmd_render(&csv, &source.environment()?, mode, px_per_mm, trial, &out)
        }
        Command::Track {
            frames,
            source,
            threshold,
            px_per_mm,
            out,
        } => {
            let env = if source.given() {
                Some(source.environment()?)
            } else {
                None
            };
            cmd_track(&frames, threshold, px_per_mm, env.as_ref(), &out)?;
            Ok(())
        }
    }
}

/// Parse `args` (program name first) and run. Help and version output count
/// as success.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            Ok(())
        }
        Err(e) => Err(CliError::Usage(e.to_string().trim_end().to_string())),
    }
}
