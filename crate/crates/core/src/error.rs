use thiserror::Error;

use crate::geometry::RegionId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid dimension {name} = {value}")]
    InvalidDimension { name: &'static str, value: f64 },
    #[error("opening width {opening} mm exceeds room size {room} mm")]
    OpeningTooWide { opening: f64, room: f64 },
    #[error("maze wall mask has {got} bits, expected {expected}")]
    WallMaskLength { expected: usize, got: usize },
    #[error("maze is disconnected: {reached} of {total} cells reachable from cell 1")]
    Disconnected { reached: usize, total: usize },
    #[error("point ({x}, {y}) lies outside the interior")]
    OutsideInterior { x: f64, y: f64 },
    #[error("start point ({x}, {y}) is not strictly inside the corridor")]
    BadStart { x: f64, y: f64 },
    #[error("room {0} does not exist")]
    InvalidRoom(u32),
    #[error("operation requires a corridor template")]
    NotCorridor,
    #[error("unrecognised region label {0:?}")]
    BadRegionLabel(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutomatonError {
    #[error("timer {t} exceeds cap {cap}")]
    TimerOverflow { t: u32, cap: u32 },
    #[error("invalid parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("distance x = {0} is below 1")]
    DistanceBelowOne(f64),
    #[error("probability {name} = {value} outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error("leech escaped to ({x}, {y}) in {region} at tick {tick}")]
    Escaped {
        x: f64,
        y: f64,
        region: RegionId,
        tick: u64,
    },
    #[error("invalid motion parameter {name} = {value}")]
    InvalidMotion { name: &'static str, value: f64 },
    #[error("duration must be at least one tick")]
    EmptyDuration,
    #[error("ensemble needs at least one trial")]
    EmptyEnsemble,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty ensemble")]
    Empty,
    #[error("trajectories come from different environments ({0} vs {1} rooms)")]
    MixedEnvironments(u32, u32),
    #[error("trajectory tick count is zero")]
    NoTicks,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("non-positive value at point {index}: ({x}, {y})")]
    NonPositive { index: usize, x: f64, y: f64 },
    #[error("all x values are equal; slope undefined")]
    Singular,
    #[error("expected probabilities must be positive (cell {0})")]
    ZeroExpected(usize),
    #[error("observed and expected lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no observations")]
    NoObservations,
    #[error("expected probabilities sum to {0}, not 1")]
    NotNormalised(f64),
    #[error("invalid calibration setting: {0}")]
    BadCalibration(String),
    #[error("calibration infeasible: q_scale = 1 reaches mean visit frequency {achieved_mean:.4} below target {target_mean:.4}")]
    Infeasible {
        achieved: Vec<f64>,
        achieved_mean: f64,
        target_mean: f64,
    },
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("first frame contains no dark pixels")]
    EmptyFirstFrame,
    #[error("frame {index} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    SizeMismatch {
        index: usize,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("no frames supplied")]
    NoFrames,
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("frame buffer holds {got} bytes, expected {expected}")]
    BufferLength { expected: usize, got: usize },
    #[error("invalid threshold {0}; must lie in 1..=255")]
    Threshold(u16),
    #[error("invalid scale {0}")]
    Scale(f64),
    #[error("malformed image: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
