//! The three-mode leech automaton: behavioural mode, a timer driving the
//! Still/active exit hazards, and a binary mechanoreceptor input.
//!
//! The transition kernel is the normalised form of the published table:
//!
//! ```text
//!            Still      Crawl                    Explore
//! Still      1 − p1     p1/2                     p1/2
//! Crawl      p2         (1−p2)(1−m)(1−q)         (1−p2)(m + (1−m)q)
//! Explore    p2         (1−p2)(1−m)              (1−p2)m
//! ```
//!
//! with `p1 = 1/(τs − t + 1)`, `p2 = 1/(τa − t + 1)` and `q` the per-tick
//! exploration trigger supplied by the locomotion layer.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::AutomatonError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Still,
    Crawl,
    Explore,
}

impl Mode {
    /// Fixed inverse-CDF sampling order.
    pub const ALL: [Mode; 3] = [Mode::Still, Mode::Crawl, Mode::Explore];

    pub fn is_active(self) -> bool {
        !matches!(self, Mode::Still)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Still => "STILL",
            Mode::Crawl => "CRAWL",
            Mode::Explore => "EXPLORE",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "STILL" => Ok(Mode::Still),
            "CRAWL" => Ok(Mode::Crawl),
            "EXPLORE" => Ok(Mode::Explore),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutomatonParams {
    /// Still-mode timer cap τs.
    #[serde(rename = "tau_s_ticks")]
    pub tau_s: u32,
    /// Active-mode timer cap τa.
    #[serde(rename = "tau_a_ticks")]
    pub tau_a: u32,
    /// Visit power-law coefficient.
    #[serde(rename = "p3_a")]
    pub a: f64,
    /// Visit power-law exponent.
    #[serde(rename = "p3_b")]
    pub b: f64,
    #[serde(rename = "tick_seconds")]
    pub tick: f64,
}

impl Default for AutomatonParams {
    fn default() -> Self {
        Self {
            tau_s: 600,
            tau_a: 900,
            a: 0.35,
            b: -0.82,
            tick: 1.0,
        }
    }
}

impl AutomatonParams {
    pub fn validate(&self) -> Result<(), AutomatonError> {
        if self.tau_s < 1 {
            return Err(AutomatonError::InvalidParam {
                name: "tau_s_ticks",
                value: self.tau_s as f64,
            });
        }
        if self.tau_a < 1 {
            return Err(AutomatonError::InvalidParam {
                name: "tau_a_ticks",
                value: self.tau_a as f64,
            });
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(AutomatonError::InvalidParam {
                name: "p3_a",
                value: self.a,
            });
        }
        if !(self.b.is_finite() && self.b < 0.0) {
            return Err(AutomatonError::InvalidParam {
                name: "p3_b",
                value: self.b,
            });
        }
        if !(self.tick.is_finite() && self.tick > 0.0) {
            return Err(AutomatonError::InvalidParam {
                name: "tick_seconds",
                value: self.tick,
            });
        }
        Ok(())
    }

    /// Timer cap for the given mode.
    pub fn cap(&self, mode: Mode) -> u32 {
        if mode.is_active() {
            self.tau_a
        } else {
            self.tau_s
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AutomatonState {
    pub mode: Mode,
    /// Ticks since the last Still/active boundary crossing.
    pub t: u32,
}

impl AutomatonState {
    pub const fn new(mode: Mode) -> Self {
        Self { mode, t: 0 }
    }
}

/// Probability vector over `(Still, Crawl, Explore)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDistribution {
    pub still: f64,
    pub crawl: f64,
    pub explore: f64,
}

impl ModeDistribution {
    pub fn as_array(&self) -> [f64; 3] {
        [self.still, self.crawl, self.explore]
    }

    pub fn probability(&self, mode: Mode) -> f64 {
        self.as_array()[mode.index()]
    }

    pub fn sum(&self) -> f64 {
        self.still + self.crawl + self.explore
    }

    /// Inverse-CDF sample for a uniform draw `u ∈ [0, 1)`, scanning modes in
    /// the fixed order. Rounding slack at the top falls to the last mode with
    /// positive mass, so zero-probability modes are never returned.
    pub fn sample(&self, u: f64) -> Mode {
        let probs = self.as_array();
        let mut cumulative = 0.0;
        let mut last_positive = Mode::Still;
        for mode in Mode::ALL {
            let p = probs[mode.index()];
            if p <= 0.0 {
                continue;
            }
            last_positive = mode;
            cumulative += p;
            if u < cumulative {
                return mode;
            }
        }
        last_positive
    }
}

fn hazard(t: u32, cap: u32) -> Result<f64, AutomatonError> {
    if t > cap {
        return Err(AutomatonError::TimerOverflow { t, cap });
    }
    Ok(1.0 / (cap - t + 1) as f64)
}

/// Still-exit hazard `p1 = 1/(τs − t + 1)`.
pub fn p_still_exit(t: u32, params: &AutomatonParams) -> Result<f64, AutomatonError> {
    hazard(t, params.tau_s)
}

/// Active-exit hazard `p2 = 1/(τa − t + 1)`.
pub fn p_active_exit(t: u32, params: &AutomatonParams) -> Result<f64, AutomatonError> {
    hazard(t, params.tau_a)
}

/// At-least-once room visit probability `min(1, a·x^b)` at distance `x ≥ 1`
/// (room-index units) from the nearer corridor end.
pub fn p_visit(x: f64, params: &AutomatonParams) -> Result<f64, AutomatonError> {
    if x.is_nan() || x < 1.0 || x.is_infinite() {
        return Err(AutomatonError::DistanceBelowOne(x));
    }
    Ok((params.a * x.powf(params.b)).min(1.0))
}

pub fn transition_kernel(
    state: AutomatonState,
    contact: bool,
    params: &AutomatonParams,
    q_enter: f64,
) -> Result<ModeDistribution, AutomatonError> {
    if !(0.0..=1.0).contains(&q_enter) {
        return Err(AutomatonError::Probability {
            name: "q_enter",
            value: q_enter,
        });
    }
    let m = if contact { 1.0 } else { 0.0 };
    Ok(match state.mode {
        Mode::Still => {
            let p1 = p_still_exit(state.t, params)?;
            ModeDistribution {
                still: 1.0 - p1,
                crawl: 0.5 * p1,
                explore: 0.5 * p1,
            }
        }
        Mode::Crawl => {
            let p2 = p_active_exit(state.t, params)?;
            let stay = 1.0 - p2;
            ModeDistribution {
                still: p2,
                crawl: stay * (1.0 - m) * (1.0 - q_enter),
                explore: stay * (m + (1.0 - m) * q_enter),
            }
        }
        Mode::Explore => {
            let p2 = p_active_exit(state.t, params)?;
            let stay = 1.0 - p2;
            ModeDistribution {
                still: p2,
                crawl: stay * (1.0 - m),
                explore: stay * m,
            }
        }
    })
}

/// Timer update: reset on Still↔active crossings, increment otherwise.
pub fn advance_timer(from: AutomatonState, next: Mode) -> AutomatonState {
    let t = if from.mode.is_active() != next.is_active() {
        0
    } else {
        from.t + 1
    };
    AutomatonState { mode: next, t }
}

/// One automaton tick, consuming exactly one uniform draw from `rng`.
pub fn step<R: Rng + ?Sized>(
    state: AutomatonState,
    contact: bool,
    q_enter: f64,
    params: &AutomatonParams,
    rng: &mut R,
) -> Result<AutomatonState, AutomatonError> {
    let dist = transition_kernel(state, contact, params, q_enter)?;
    let u: f64 = rng.gen();
    Ok(advance_timer(state, dist.sample(u)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> AutomatonParams {
        AutomatonParams::default()
    }

    #[test]
    fn still_hazard_examples() {
        let p = params();
        assert_eq!(p_still_exit(600, &p).unwrap(), 1.0);
        assert_eq!(p_still_exit(0, &p).unwrap(), 1.0 / 601.0);
        assert_eq!(p_still_exit(599, &p).unwrap(), 0.5);
        assert!(matches!(
            p_still_exit(601, &p),
            Err(AutomatonError::TimerOverflow { t: 601, cap: 600 })
        ));
    }

    #[test]
    fn active_hazard_examples() {
        let p = params();
        assert_eq!(p_active_exit(900, &p).unwrap(), 1.0);
        assert_eq!(p_active_exit(0, &p).unwrap(), 1.0 / 901.0);
        assert_eq!(p_active_exit(899, &p).unwrap(), 0.5);
        assert!(p_active_exit(901, &p).is_err());
    }

    #[test]
    fn visit_probability_examples() {
        let p = params();
        assert_eq!(p_visit(1.0, &p).unwrap(), 0.35);
        assert!((p_visit(4.0, &p).unwrap() - 0.1123).abs() < 1e-4);
        assert!((p_visit(2.0, &p).unwrap() - 0.1983).abs() < 1e-4);
        assert!(matches!(p_visit(0.5, &p), Err(AutomatonError::DistanceBelowOne(_))));
        assert!(p_visit(f64::NAN, &p).is_err());
        let big = AutomatonParams { a: 3.0, ..p };
        assert_eq!(p_visit(1.0, &big).unwrap(), 1.0);
    }

    #[test]
    fn kernel_examples() {
        let p = params();
        let d = transition_kernel(AutomatonState { mode: Mode::Still, t: 600 }, false, &p, 0.0).unwrap();
        assert_eq!(d.as_array(), [0.0, 0.5, 0.5]);

        let d = transition_kernel(AutomatonState::new(Mode::Explore), true, &p, 0.0).unwrap();
        assert_eq!(d.still, 1.0 / 901.0);
        assert_eq!(d.crawl, 0.0);
        assert!((d.explore - 900.0 / 901.0).abs() < 1e-15);

        let d = transition_kernel(AutomatonState::new(Mode::Crawl), false, &p, 0.0).unwrap();
        let p2 = 1.0 / 901.0;
        assert_eq!(d.still, p2);
        assert_eq!(d.explore, 0.0);
        assert!((d.crawl - (1.0 - p2)).abs() < 1e-15);
    }

    #[test]
    fn crawl_with_contact_never_stays_crawling() {
        let p = params();
        for t in [0, 1, 450, 900] {
            let d = transition_kernel(AutomatonState { mode: Mode::Crawl, t }, true, &p, 0.0).unwrap();
            assert_eq!(d.crawl, 0.0);
        }
    }

    #[test]
    fn rejects_bad_trigger() {
        let p = params();
        assert!(transition_kernel(AutomatonState::new(Mode::Crawl), false, &p, 1.5).is_err());
        assert!(transition_kernel(AutomatonState::new(Mode::Crawl), false, &p, -0.1).is_err());
    }

    #[test]
    fn forced_still_exit_resets_timer() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let next = step(AutomatonState { mode: Mode::Still, t: 600 }, false, 0.0, &p, &mut rng).unwrap();
            assert!(next.mode.is_active());
            assert_eq!(next.t, 0);
        }
    }

    #[test]
    fn crawl_to_explore_keeps_counting() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = 0;
        for t in 0..200 {
            let next = step(AutomatonState { mode: Mode::Crawl, t }, true, 0.0, &p, &mut rng).unwrap();
            if next.mode == Mode::Explore {
                assert_eq!(next.t, t + 1);
                seen += 1;
            }
        }
        assert!(seen > 150);
        let back = advance_timer(AutomatonState { mode: Mode::Explore, t: 7 }, Mode::Crawl);
        assert_eq!(back.t, 8);
        let rest = advance_timer(AutomatonState { mode: Mode::Explore, t: 7 }, Mode::Still);
        assert_eq!(rest.t, 0);
    }

    #[test]
    fn step_is_deterministic() {
        let p = params();
        let state = AutomatonState { mode: Mode::Crawl, t: 40 };
        let a = step(state, false, 0.25, &p, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = step(state, false, 0.25, &p, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_skips_zero_mass_on_rounding() {
        let d = ModeDistribution {
            still: 0.3,
            crawl: 0.7 - 1e-16,
            explore: 0.0,
        };
        assert_eq!(d.sample(0.999_999_999_999_999_9), Mode::Crawl);
        assert_eq!(d.sample(0.0), Mode::Still);
    }

    #[test]
    fn params_validation() {
        assert!(params().validate().is_ok());
        assert!(AutomatonParams { tau_s: 0, ..params() }.validate().is_err());
        assert!(AutomatonParams { a: 0.0, ..params() }.validate().is_err());
        assert!(AutomatonParams { b: 0.1, ..params() }.validate().is_err());
        let json = serde_json::to_string(&params()).unwrap();
        assert!(json.contains("\"tau_s_ticks\":600"));
        assert!(serde_json::from_str::<AutomatonParams>("{\"tau_x\":1}").is_err());
    }

    #[test]
    fn dwell_never_exceeds_cap_plus_one() {
        let p = AutomatonParams {
            tau_s: 20,
            tau_a: 30,
            ..params()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut state = AutomatonState::new(Mode::Crawl);
        let mut run = 1u32;
        for _ in 0..200_000 {
            let next = step(state, false, 0.1, &p, &mut rng).unwrap();
            if next.mode.is_active() == state.mode.is_active() {
                run += 1;
            } else {
                run = 1;
            }
            let cap = p.cap(next.mode);
            assert!(run <= cap + 1, "run {run} exceeds cap {cap}");
            state = next;
        }
    }

    proptest! {
        #[test]
        fn kernel_rows_are_stochastic(
            mode_idx in 0usize..3,
            contact: bool,
            frac in 0.0f64..=1.0,
            q in 0.0f64..=1.0,
            tau_s in 1u32..2000,
            tau_a in 1u32..2000,
        ) {
            let p = AutomatonParams { tau_s, tau_a, ..AutomatonParams::default() };
            let mode = Mode::ALL[mode_idx];
            let t = (frac * p.cap(mode) as f64).floor() as u32;
            let d = transition_kernel(AutomatonState { mode, t }, contact, &p, q).unwrap();
            prop_assert!((d.sum() - 1.0).abs() <= 1e-12);
            for v in d.as_array() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
