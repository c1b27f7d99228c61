//! Simulation and analysis of leech exploration in a corridor of rooms.
//!
//! * [`geometry`]: corridor-with-rooms and square-maze templates.
//! * [`automaton`]: the Still / Crawl / Explore automaton with timer hazards.
//! * [`locomotion`]: per-tick kinematics and single trials.
//! * [`montecarlo`]: seeded ensembles and room statistics.
//! * [`fitstats`]: power-law fitting, chi-square, trigger calibration.
//! * [`trackio`]: dark-pixel tracking, overlays, activity maps, PPM/PGM.

pub mod automaton;
pub mod error;
pub mod fitstats;
pub mod geometry;
pub mod locomotion;
pub mod montecarlo;
pub mod trackio;
pub mod trajectory;

pub use automaton::{AutomatonParams, AutomatonState, Mode, ModeDistribution};
pub use error::{AutomatonError, CsvError, FitError, GeometryError, SimError, StatsError, TrackError};
pub use fitstats::{CalibrationReport, CalibrationSettings, PowerLawFit};
pub use geometry::{CorridorSpec, EnvironmentTemplate, MazeSpec, Point, Rect, RegionId};
pub use locomotion::{LeechState, MotionParams};
pub use montecarlo::{EnsembleSpec, EnsembleStats};
pub use trajectory::{Sample, Trajectory};
