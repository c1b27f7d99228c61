//! Run configuration. Every key carries its unit (`*_mm`, `*_ticks`) and
//! unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use leech_core::geometry::{build_corridor_template, build_square_maze};
use leech_core::{AutomatonParams, CorridorSpec, EnvironmentTemplate, MazeSpec, MotionParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Where the leech is released in a corridor template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPosition {
    #[default]
    RightEnd,
    Center,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorridorConfig {
    pub rooms: u32,
    pub room_size_mm: f64,
    pub wall_mm: f64,
    pub corridor_width_mm: f64,
    pub opening_mm: f64,
    pub start: StartPosition,
}

impl Default for CorridorConfig {
    fn default() -> Self {
        let spec = CorridorSpec::default();
        Self {
            rooms: spec.rooms,
            room_size_mm: spec.room_size_mm,
            wall_mm: spec.wall_mm,
            corridor_width_mm: spec.corridor_width_mm,
            opening_mm: spec.opening_mm,
            start: StartPosition::RightEnd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MazeConfig {
    pub cells: u32,
    pub cell_size_mm: f64,
    pub wall_mm: f64,
    pub wall_mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    Corridor(CorridorConfig),
    SquareMaze(MazeConfig),
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig::Corridor(CorridorConfig::default())
    }
}

impl EnvironmentConfig {
    pub fn build(&self) -> Result<EnvironmentTemplate, CliError> {
        let config = |e: leech_core::GeometryError| CliError::Config(format!("environment: {e}"));
        match self {
            EnvironmentConfig::Corridor(c) => {
                let env = build_corridor_template(&CorridorSpec {
                    rooms: c.rooms,
                    room_size_mm: c.room_size_mm,
                    wall_mm: c.wall_mm,
                    corridor_width_mm: c.corridor_width_mm,
                    opening_mm: c.opening_mm,
                })
                .map_err(config)?;
                match c.start {
                    StartPosition::RightEnd => Ok(env),
                    StartPosition::Center => {
                        let p = env
                            .centered_start()
                            .ok_or_else(|| CliError::Config("environment: no corridor centre".into()))?;
                        env.with_start(p).map_err(config)
                    }
                }
            }
            EnvironmentConfig::SquareMaze(m) => build_square_maze(&MazeSpec {
                cells: m.cells,
                cell_size_mm: m.cell_size_mm,
                wall_mm: m.wall_mm,
                wall_mask: m.wall_mask.clone(),
            })
            .map_err(config),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub environment: EnvironmentConfig,
    pub automaton: AutomatonParams,
    pub motion: MotionParams,
    pub n_trials: u64,
    pub base_seed: u64,
    pub duration_ticks: u64,
    /// Not recorded in the manifest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            environment: EnvironmentConfig::default(),
            automaton: AutomatonParams::default(),
            motion: MotionParams::default(),
            n_trials: 1000,
            base_seed: 0,
            duration_ticks: 1800,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Read the `config` object of a run manifest.
    pub fn from_manifest(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut manifest: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config = manifest
            .get_mut("config")
            .map(Value::take)
            .ok_or_else(|| CliError::Config(format!("{}: no `config` object", path.display())))?;
        serde_json::from_value(config).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Check every parameter and build the environment.
    pub fn validate(&self) -> Result<EnvironmentTemplate, CliError> {
        if self.n_trials == 0 {
            return Err(CliError::Config("n_trials must be at least 1".into()));
        }
        if self.duration_ticks == 0 {
            return Err(CliError::Config("duration_ticks must be at least 1".into()));
        }
        self.automaton
            .validate()
            .map_err(|e| CliError::Config(format!("automaton: {e}")))?;
        self.motion
            .validate()
            .map_err(|e| CliError::Config(format!("motion: {e}")))?;
        self.environment.build()
    }
}
