//! Power-law fitting of visit frequencies, Pearson's chi-square statistic,
//! and calibration of the room-entry trigger against a target power law.

use serde_json::{json, Value};

use crate::automaton::AutomatonParams;
use crate::error::FitError;
use crate::geometry::EnvironmentTemplate;
use crate::locomotion::MotionParams;
use crate::montecarlo::{run_ensemble_summaries, visit_frequencies_from, EnsembleSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    /// Residual sum of squares in log-log space.
    pub rss: f64,
}

impl PowerLawFit {
    /// A target curve with no fit residual attached.
    pub fn target(a: f64, b: f64) -> Self {
        Self { a, b, rss: 0.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.a * x.powf(self.b)
    }

    /// `{a, b, rss, points: [{x, y}]}` with keys sorted.
    pub fn report(&self, points: &[(f64, f64)]) -> Value {
        json!({
            "a": self.a,
            "b": self.b,
            "rss": self.rss,
            "points": points.iter().map(|&(x, y)| json!({"x": x, "y": y})).collect::<Vec<_>>(),
        })
    }
}

/// Ordinary least squares of `ln y` on `ln x`; `a = e^intercept`, `b = slope`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit, FitError> {
    if points.len() < 2 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    for (index, &(x, y)) in points.iter().enumerate() {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(FitError::NonPositive { index, x, y });
        }
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(lx, ly) in &logs {
        let dx = lx - mean_x;
        sxx += dx * dx;
        sxy += dx * (ly - mean_y);
    }
    if sxx == 0.0 {
        return Err(FitError::Singular);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let rss = logs
        .iter()
        .map(|&(lx, ly)| {
            let r = ly - (intercept + slope * lx);
            r * r
        })
        .sum();
    Ok(PowerLawFit {
        a: intercept.exp(),
        b: slope,
        rss,
    })
}

/// Pearson statistic `Σ (O_i − N·p_i)² / (N·p_i)`.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> Result<f64, FitError> {
    if observed.len() != expected.len() {
        return Err(FitError::LengthMismatch(observed.len(), expected.len()));
    }
    if let Some(i) = expected.iter().position(|&p| p.is_nan() || p <= 0.0) {
        return Err(FitError::ZeroExpected(i));
    }
    let total: f64 = expected.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(FitError::NotNormalised(total));
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(FitError::NoObservations);
    }
    let n = n as f64;
    Ok(observed
        .iter()
        .zip(expected)
        .map(|(&o, &p)| {
            let e = n * p;
            let d = o as f64 - e;
            d * d / e
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSettings {
    pub n_trials: u64,
    pub base_seed: u64,
    pub duration: u64,
    /// Stop once the `q_scale` bracket is narrower than this.
    pub tol: f64,
    pub max_evaluations: usize,
    pub workers: Option<usize>,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            n_trials: 1000,
            base_seed: 0,
            duration: 1800,
            tol: 2e-3,
            max_evaluations: 24,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub q_scale: f64,
    pub visit_freq: Vec<f64>,
    pub mean_freq: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub q_scale: f64,
    pub error: f64,
    pub visit_freq: Vec<f64>,
    /// Target probability per room.
    pub target: Vec<f64>,
    /// Every candidate evaluated, in evaluation order.
    pub evaluations: Vec<Evaluation>,
    /// Mean visit frequency was non-decreasing in `q_scale` across all
    /// evaluations.
    pub monotone: bool,
}

impl CalibrationReport {
    pub fn to_json(&self) -> Value {
        json!({
            "q_scale": self.q_scale,
            "error": self.error,
            "visit_freq": self.visit_freq,
            "target": self.target,
            "monotone": self.monotone,
            "evaluations": self.evaluations.iter().map(|e| json!({
                "q_scale": e.q_scale,
                "mean_freq": e.mean_freq,
                "error": e.error,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Per-room target `a·x^b` at each room's distance from the nearer end.
pub fn room_targets(env: &EnvironmentTemplate, target: &PowerLawFit) -> Result<Vec<f64>, FitError> {
    let rooms = env.room_count();
    (1..=rooms)
        .map(|i| {
            let x = env
                .room_distance_to_end(i)
                .map_err(|e| FitError::BadCalibration(e.to_string()))?;
            let p = target.eval(x as f64);
            if p > 0.0 && p <= 1.0 {
                Ok(p)
            } else {
                Err(FitError::BadCalibration(format!(
                    "target {p} at x = {x} is outside (0, 1]"
                )))
            }
        })
        .collect()
}

/// Fit `q_scale` so simulated at-least-once visit frequencies follow the
/// target power law.
///
/// Bisection on the sign of `mean(f) − mean(target)`, which increases with
/// `q_scale`. Every candidate runs the same trial seeds, so the comparison
/// between candidates is not blurred by sampling noise. The candidate with
/// the smallest equally weighted squared error is returned.
pub fn calibrate_entry_prob(
    env: &EnvironmentTemplate,
    motion: &MotionParams,
    auto: &AutomatonParams,
    target: &PowerLawFit,
    settings: &CalibrationSettings,
) -> Result<CalibrationReport, FitError> {
    if settings.tol.is_nan() || settings.tol <= 0.0 {
        return Err(FitError::BadCalibration(format!("tol = {}", settings.tol)));
    }
    let targets = room_targets(env, target)?;
    let target_mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let spec = EnsembleSpec {
        n_trials: settings.n_trials,
        base_seed: settings.base_seed,
        duration: settings.duration,
        workers: settings.workers,
    };

    let evaluate = |q: f64| -> Result<Evaluation, FitError> {
        let summaries = run_ensemble_summaries(env, &motion.with_q_scale(q), auto, &spec)?;
        let f = visit_frequencies_from(&summaries);
        let error = f.iter().zip(&targets).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(Evaluation {
            q_scale: q,
            mean_freq: f.iter().sum::<f64>() / f.len() as f64,
            visit_freq: f,
            error,
        })
    };

    let mut evaluations = vec![evaluate(0.0)?];
    let top = evaluate(1.0)?;
    if top.mean_freq < target_mean {
        return Err(FitError::Infeasible {
            achieved: top.visit_freq,
            achieved_mean: top.mean_freq,
            target_mean,
        });
    }
    evaluations.push(top);

    let (mut lo, mut hi) = (0usize, 1usize);
    while evaluations[hi].q_scale - evaluations[lo].q_scale >= settings.tol
        && evaluations.len() < settings.max_evaluations
    {
        // No change across the bracket: the error has plateaued.
        if evaluations[hi].visit_freq == evaluations[lo].visit_freq {
            break;
        }
        let mid = 0.5 * (evaluations[lo].q_scale + evaluations[hi].q_scale);
        let e = evaluate(mid)?;
        let below = e.mean_freq < target_mean;
        evaluations.push(e);
        if below {
            lo = evaluations.len() - 1;
        } else {
            hi = evaluations.len() - 1;
        }
    }

    let mut by_q: Vec<&Evaluation> = evaluations.iter().collect();
    by_q.sort_by(|a, b| a.q_scale.total_cmp(&b.q_scale));
    let monotone = by_q.windows(2).all(|w| w[0].mean_freq <= w[1].mean_freq);

    let best = evaluations
        .iter()
        .min_by(|a, b| a.error.total_cmp(&b.error).then(a.q_scale.total_cmp(&b.q_scale)))
        .expect("at least two evaluations")
        .clone();
    Ok(CalibrationReport {
        q_scale: best.q_scale,
        error: best.error,
        visit_freq: best.visit_freq,
        target: targets,
        evaluations,
        monotone,
    })
}
