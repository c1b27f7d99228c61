//! Trial ensembles with order-independent seeding and the room-visit /
//! time-share / dwell statistics computed over them.
//!
//! Trial `i` of an ensemble with base seed `s` is seeded with
//! `mix64(s + (i + 1)·γ)` where `γ = 0x9E3779B97F4A7C15` and `mix64` is the
//! splitmix64 finaliser. Both steps are bijections on `u64`, so distinct
//! trial indices never share a seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::automaton::{AutomatonParams, Mode};
use crate::error::{SimError, StatsError};
use crate::geometry::{EnvironmentTemplate, RegionId};
use crate::locomotion::{run_trial, MotionParams};
use crate::trajectory::Trajectory;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 output finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(base_seed: u64, trial: u64) -> u64 {
    mix64(base_seed.wrapping_add(trial.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Static description of an ensemble run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub n_trials: u64,
    pub base_seed: u64,
    pub duration: u64,
    /// Worker threads; `None` uses the ambient rayon pool.
    pub workers: Option<usize>,
}

fn with_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(job),
            Err(_) => job(),
        },
        None => job(),
    }
}

fn check_spec(spec: &EnsembleSpec) -> Result<(), SimError> {
    if spec.n_trials == 0 {
        return Err(SimError::EmptyEnsemble);
    }
    if spec.duration == 0 {
        return Err(SimError::EmptyDuration);
    }
    Ok(())
}

/// Run every trial of the ensemble; results are in trial order whatever the
/// schedule.
pub fn run_ensemble(
    env: &EnvironmentTemplate,
    motion: &MotionParams,
    auto: &AutomatonParams,
    spec: &EnsembleSpec,
) -> Result<Vec<Trajectory>, SimError> {
    check_spec(spec)?;
    with_pool(spec.workers, || {
        (0..spec.n_trials)
            .into_par_iter()
            .map(|i| {
                let mut t = run_trial(env, motion, auto, trial_seed(spec.base_seed, i), spec.duration)?;
                t.trial_id = i;
                Ok(t)
            })
            .collect()
    })
}

/// Per-trial reduction used when full trajectories are not needed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialSummary {
    pub visited: Vec<bool>,
    pub room_ticks: Vec<u64>,
    pub total_ticks: u64,
}

impl TrialSummary {
    pub fn of(traj: &Trajectory) -> Self {
        let rooms = traj.rooms as usize;
        let mut room_ticks = vec![0u64; rooms];
        for s in &traj.samples {
            if let Some(RegionId::Room(i)) = s.region {
                if let Some(slot) = room_ticks.get_mut(i as usize - 1) {
                    *slot += 1;
                }
            }
        }
        Self {
            visited: room_ticks.iter().map(|&n| n > 0).collect(),
            room_ticks,
            total_ticks: traj.samples.len() as u64,
        }
    }
}

/// Run the ensemble keeping only per-trial summaries.
pub fn run_ensemble_summaries(
    env: &EnvironmentTemplate,
    motion: &MotionParams,
    auto: &AutomatonParams,
    spec: &EnsembleSpec,
) -> Result<Vec<TrialSummary>, SimError> {
    check_spec(spec)?;
    with_pool(spec.workers, || {
        (0..spec.n_trials)
            .into_par_iter()
            .map(|i| {
                let t = run_trial(env, motion, auto, trial_seed(spec.base_seed, i), spec.duration)?;
                Ok(TrialSummary::of(&t))
            })
            .collect()
    })
}

fn common_rooms(trajs: &[Trajectory]) -> Result<u32, StatsError> {
    let first = trajs.first().ok_or(StatsError::Empty)?.rooms;
    for t in trajs {
        if t.rooms != first {
            return Err(StatsError::MixedEnvironments(first, t.rooms));
        }
    }
    Ok(first)
}

/// Fraction of trials with at least one tick in each room (index 0 is room 1).
pub fn visit_frequencies(trajs: &[Trajectory]) -> Result<Vec<f64>, StatsError> {
    common_rooms(trajs)?;
    let summaries: Vec<TrialSummary> = trajs.iter().map(TrialSummary::of).collect();
    Ok(visit_frequencies_from(&summaries))
}

pub fn visit_frequencies_from(summaries: &[TrialSummary]) -> Vec<f64> {
    let rooms = summaries.first().map_or(0, |s| s.visited.len());
    let mut counts = vec![0u64; rooms];
    for s in summaries {
        for (c, &v) in counts.iter_mut().zip(&s.visited) {
            *c += v as u64;
        }
    }
    let n = summaries.len() as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// Ticks spent in each room over all ticks of the ensemble.
pub fn time_fractions(trajs: &[Trajectory]) -> Result<Vec<f64>, StatsError> {
    common_rooms(trajs)?;
    let summaries: Vec<TrialSummary> = trajs.iter().map(TrialSummary::of).collect();
    time_fractions_from(&summaries)
}

pub fn time_fractions_from(summaries: &[TrialSummary]) -> Result<Vec<f64>, StatsError> {
    let rooms = summaries.first().ok_or(StatsError::Empty)?.room_ticks.len();
    let total: u64 = summaries.iter().map(|s| s.total_ticks).sum();
    if total == 0 {
        return Err(StatsError::NoTicks);
    }
    let mut ticks = vec![0u64; rooms];
    for s in summaries {
        for (acc, &n) in ticks.iter_mut().zip(&s.room_ticks) {
            *acc += n;
        }
    }
    Ok(ticks.into_iter().map(|n| n as f64 / total as f64).collect())
}

/// Maximal constant-mode runs, per mode, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DwellHistograms {
    pub runs: BTreeMap<Mode, Vec<u64>>,
}

impl DwellHistograms {
    pub fn get(&self, mode: Mode) -> &[u64] {
        self.runs.get(&mode).map_or(&[], Vec::as_slice)
    }

    /// `(mode, duration) → count`.
    pub fn counts(&self) -> BTreeMap<(Mode, u64), u64> {
        let mut out = BTreeMap::new();
        for (&mode, runs) in &self.runs {
            for &d in runs {
                *out.entry((mode, d)).or_insert(0) += 1;
            }
        }
        out
    }

    pub fn mean(&self, mode: Mode) -> Option<f64> {
        let runs = self.get(mode);
        (!runs.is_empty()).then(|| runs.iter().sum::<u64>() as f64 / runs.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,duration_ticks,count\n");
        for ((mode, d), n) in self.counts() {
            let _ = writeln!(out, "{mode},{d},{n}");
        }
        out
    }
}

pub fn mode_dwell_histograms(trajs: &[Trajectory]) -> DwellHistograms {
    let mut runs: BTreeMap<Mode, Vec<u64>> = BTreeMap::new();
    for t in trajs {
        let mut current: Option<(Mode, u64)> = None;
        for s in &t.samples {
            current = match (current, s.mode) {
                (Some((m, n)), Some(mode)) if m == mode => Some((m, n + 1)),
                (prev, mode) => {
                    if let Some((m, n)) = prev {
                        runs.entry(m).or_default().push(n);
                    }
                    mode.map(|m| (m, 1))
                }
            };
        }
        if let Some((m, n)) = current {
            runs.entry(m).or_default().push(n);
        }
    }
    for v in runs.values_mut() {
        v.sort_unstable();
    }
    DwellHistograms { runs }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub n_trials: usize,
    pub visit_freq: Vec<f64>,
    pub time_fraction: Vec<f64>,
    pub corridor_fraction: f64,
    pub mode_dwell: DwellHistograms,
}

impl EnsembleStats {
    pub fn from_trajectories(trajs: &[Trajectory]) -> Result<Self, StatsError> {
        common_rooms(trajs)?;
        let summaries: Vec<TrialSummary> = trajs.iter().map(TrialSummary::of).collect();
        let total: u64 = summaries.iter().map(|s| s.total_ticks).sum();
        let corridor: u64 = trajs
            .iter()
            .flat_map(|t| &t.samples)
            .filter(|s| s.region == Some(RegionId::Corridor))
            .count() as u64;
        Ok(Self {
            n_trials: trajs.len(),
            visit_freq: visit_frequencies_from(&summaries),
            time_fraction: time_fractions_from(&summaries)?,
            corridor_fraction: corridor as f64 / total.max(1) as f64,
            mode_dwell: mode_dwell_histograms(trajs),
        })
    }

    /// `room,distance_x,visit_freq,time_fraction`.
    pub fn to_csv(&self) -> String {
        let rooms = self.visit_freq.len() as u32;
        let mut out = String::from("room,distance_x,visit_freq,time_fraction\n");
        for (k, (f, tf)) in self.visit_freq.iter().zip(&self.time_fraction).enumerate() {
            let i = k as u32 + 1;
            let x = i.min(rooms + 1 - i);
            let _ = writeln!(out, "{i},{x},{f:.6},{tf:.6}");
        }
        out
    }
}

/// Average a per-room statistic over rooms at equal distance from the ends.
/// Returns `(x, mean)` for `x = 1..=⌈R/2⌉`.
pub fn group_by_distance(per_room: &[f64]) -> Vec<(u32, f64)> {
    let rooms = per_room.len() as u32;
    let mut groups: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
    for (k, &v) in per_room.iter().enumerate() {
        let i = k as u32 + 1;
        let g = groups.entry(i.min(rooms + 1 - i)).or_insert((0.0, 0));
        g.0 += v;
        g.1 += 1;
    }
    groups
        .into_iter()
        .map(|(x, (sum, n))| (x, sum / n as f64))
        .collect()
}
