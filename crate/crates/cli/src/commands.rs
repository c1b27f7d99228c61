use std::fs;
use std::path::{Path, PathBuf};

use leech_core::fitstats::{calibrate_entry_prob, fit_power_law};
use leech_core::montecarlo::{run_ensemble, trial_seed, EnsembleSpec, EnsembleStats};
use leech_core::trackio::{
    frames_to_trajectory, read_frame_dir, render_activity_map, render_frames, render_time_overlay,
    write_frame_dir, TrackOptions,
};
use leech_core::trajectory::{read_csv, Trajectory};
use leech_core::{CalibrationSettings, EnvironmentTemplate, PowerLawFit};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const STATS_FILE: &str = "stats.csv";
pub const DWELL_FILE: &str = "dwell.csv";
pub const SEED_DERIVATION: &str =
    "trial i uses ChaCha8 seeded with splitmix64_finalize(base_seed + (i + 1) * 0x9E3779B97F4A7C15), wrapping";

pub fn trial_file_name(trial: u64) -> String {
    format!("trial_{trial:06}.csv")
}

fn runtime(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| runtime(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| runtime(path, e))
}

/// Pretty JSON with a trailing newline. Object keys come out sorted.
pub fn json_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialise");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// The manifest holds the resolved configuration and the per-trial seeds;
/// `config` alone reproduces the run.
pub fn manifest(config: &RunConfig, env: &EnvironmentTemplate) -> Value {
    let mut recorded = config.clone();
    recorded.output_dir = None;
    let seeds: Vec<String> = (0..config.n_trials)
        .map(|i| format!("{:#018x}", trial_seed(config.base_seed, i)))
        .collect();
    let files: Vec<String> = (0..config.n_trials).map(trial_file_name).collect();
    json!({
        "generator": concat!("leechsim ", env!("CARGO_PKG_VERSION")),
        "config": serde_json::to_value(&recorded).expect("config serialises"),
        "environment": env.to_json(),
        "seed_derivation": SEED_DERIVATION,
        "trial_seeds": seeds,
        "files": files,
    })
}

/// Run the ensemble and write one CSV per trial plus `manifest.json`.
pub fn cmd_simulate(config: &RunConfig, out: &Path, workers: Option<usize>) -> Result<SimulateOutcome, CliError> {
    let env = config.validate()?;
    let spec = EnsembleSpec {
        n_trials: config.n_trials,
        base_seed: config.base_seed,
        duration: config.duration_ticks,
        workers,
    };
    let trajs = run_ensemble(&env, &config.motion, &config.automaton, &spec)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    create_dir(out)?;
    let mut files = Vec::with_capacity(trajs.len());
    for t in &trajs {
        let path = out.join(trial_file_name(t.trial_id));
        write_file(&path, t.to_csv())?;
        files.push(path);
    }
    let manifest_path = out.join(MANIFEST_FILE);
    write_file(&manifest_path, json_text(&manifest(config, &env)))?;
    Ok(SimulateOutcome {
        output_dir: out.to_path_buf(),
        files,
        manifest: manifest_path,
    })
}

/// Trajectory CSVs in `dir`, sorted by name.
fn trajectory_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| runtime(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

/// Room count from the directory's manifest, else `rooms`.
fn room_count(dir: &Path, rooms: Option<u32>) -> Result<u32, CliError> {
    let manifest = dir.join(MANIFEST_FILE);
    if manifest.is_file() {
        let env = RunConfig::from_manifest(&manifest)?.environment.build()?;
        return Ok(env.room_count());
    }
    rooms.ok_or_else(|| {
        CliError::Config(format!(
            "{}: no {MANIFEST_FILE}; pass the room count explicitly",
            dir.display()
        ))
    })
}

pub fn load_trajectories(dir: &Path, rooms: Option<u32>) -> Result<Vec<Trajectory>, CliError> {
    let rooms = room_count(dir, rooms)?;
    let mut trajs = Vec::new();
    for path in trajectory_files(dir)? {
        trajs.extend(read_csv(&path, rooms).map_err(|e| CliError::Runtime(e.to_string()))?);
    }
    if trajs.is_empty() {
        return Err(runtime(dir, "no trajectory CSVs"));
    }
    Ok(trajs)
}

/// Write `stats.csv` and `dwell.csv` for the trajectories in `dir`.
pub fn cmd_stats(dir: &Path, out: &Path, rooms: Option<u32>) -> Result<EnsembleStats, CliError> {
    let trajs = load_trajectories(dir, rooms)?;
    let stats = EnsembleStats::from_trajectories(&trajs).map_err(|e| runtime(dir, e))?;
    create_dir(out)?;
    write_file(&out.join(STATS_FILE), stats.to_csv())?;
    write_file(&out.join(DWELL_FILE), stats.mode_dwell.to_csv())?;
    Ok(stats)
}

#[derive(Debug, Deserialize)]
struct StatsRow {
    distance_x: u32,
    visit_freq: f64,
}

/// Fit `a·x^b` to the visit frequencies of a stats CSV, averaged over rooms
/// at equal `distance_x`.
pub fn cmd_fit(stats_csv: &Path) -> Result<Value, CliError> {
    let mut rdr = csv::Reader::from_path(stats_csv).map_err(|e| runtime(stats_csv, e))?;
    let mut groups: std::collections::BTreeMap<u32, (f64, u32)> = Default::default();
    for row in rdr.deserialize::<StatsRow>() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Runtime(format!("{}:{line}: {e}", stats_csv.display()))
        })?;
        let g = groups.entry(row.distance_x).or_insert((0.0, 0));
        g.0 += row.visit_freq;
        g.1 += 1;
    }
    let points: Vec<(f64, f64)> = groups
        .into_iter()
        .map(|(x, (sum, n))| (x as f64, sum / n as f64))
        .collect();
    let fit = fit_power_law(&points).map_err(|e| runtime(stats_csv, e))?;
    Ok(fit.report(&points))
}

pub fn cmd_calibrate(
    config: &RunConfig,
    target: PowerLawFit,
    workers: Option<usize>,
) -> Result<Value, CliError> {
    let env = config.validate()?;
    if !(target.a > 0.0 && target.b < 0.0) {
        return Err(CliError::Config(format!(
            "target needs a > 0 and b < 0, got a = {}, b = {}",
            target.a, target.b
        )));
    }
    let settings = CalibrationSettings {
        n_trials: config.n_trials,
        base_seed: config.base_seed,
        duration: config.duration_ticks,
        workers,
        ..CalibrationSettings::default()
    };
    let report = calibrate_entry_prob(&env, &config.motion, &config.automaton, &target, &settings)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut value = report.to_json();
    value["target_power_law"] = json!({ "a": target.a, "b": target.b });
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RenderMode {
    /// Time-coloured overlay (PPM).
    Overlay,
    /// Grey dwell-count map (PGM).
    Activity,
    /// One synthetic camera frame per sample, written into a directory.
    Frames,
}

/// Render one trial of a trajectory CSV.
pub fn cmd_render(
    csv: &Path,
    env: &EnvironmentTemplate,
    mode: RenderMode,
    px_per_mm: f64,
    trial: Option<u64>,
    out: &Path,
) -> Result<(), CliError> {
    let trajs = read_csv(csv, env.room_count()).map_err(|e| CliError::Runtime(e.to_string()))?;
    let traj = match trial {
        Some(id) => trajs.iter().find(|t| t.trial_id == id),
        None => trajs.first(),
    }
    .ok_or_else(|| runtime(csv, "requested trial not found"))?;
    let track = |e: leech_core::TrackError| runtime(csv, e);
    match mode {
        RenderMode::Overlay => {
            let img = render_time_overlay(traj, env, px_per_mm).map_err(track)?;
            write_file(out, img.to_ppm())
        }
        RenderMode::Activity => {
            let img = render_activity_map(traj, env, px_per_mm).map_err(track)?;
            write_file(out, img.to_pgm())
        }
        RenderMode::Frames => {
            let frames = render_frames(traj, env, px_per_mm).map_err(track)?;
            write_frame_dir(out, &frames).map_err(|e| runtime(out, e))
        }
    }
}

/// Track the dark blob through `frame_dir` and write a trajectory CSV.
pub fn cmd_track(
    frame_dir: &Path,
    threshold: u8,
    px_per_mm: f64,
    env: Option<&EnvironmentTemplate>,
    out: &Path,
) -> Result<Trajectory, CliError> {
    if threshold == 0 {
        return Err(CliError::Config("threshold must lie in 1..=255".into()));
    }
    if !(px_per_mm.is_finite() && px_per_mm > 0.0) {
        return Err(CliError::Config(format!("invalid px-per-mm {px_per_mm}")));
    }
    let frames = read_frame_dir(frame_dir).map_err(|e| runtime(frame_dir, e))?;
    let opts = TrackOptions {
        threshold,
        mm_per_px: 1.0 / px_per_mm,
        frame_ticks: 1,
        env,
    };
    let traj = frames_to_trajectory(&frames, &opts).map_err(|e| runtime(frame_dir, e))?;
    write_file(out, traj.to_csv())?;
    Ok(traj)
}
