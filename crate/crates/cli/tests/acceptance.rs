//! Acceptance checks, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always shown.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use leech_cli::{cmd_simulate, CorridorConfig, EnvironmentConfig, RunConfig, StartPosition};
use leech_core::automaton::{p_still_exit, step, transition_kernel};
use leech_core::fitstats::{calibrate_entry_prob, chi_square, fit_power_law, CalibrationReport};
use leech_core::locomotion::run_trial;
use leech_core::montecarlo::{
    group_by_distance, run_ensemble_summaries, time_fractions_from, trial_seed, visit_frequencies_from,
};
use leech_core::trackio::{frames_to_trajectory, render_frames, render_time_overlay, time_color, PixelMap, TrackOptions};
use leech_core::{
    AutomatonParams, AutomatonState, CalibrationSettings, EnsembleSpec, EnvironmentTemplate, Mode, MotionParams,
    PowerLawFit, RegionId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn kernel_soundness() -> Outcome {
    let params = AutomatonParams::default();
    let mut worst = 0.0f64;
    let mut rows = 0;
    for mode in Mode::ALL {
        let cap = params.cap(mode);
        for t in [0, 1, cap / 2, cap] {
            for contact in [false, true] {
                for q in [0.0, 0.25, 1.0] {
                    let d = transition_kernel(AutomatonState { mode, t }, contact, &params, q)
                        .map_err(|e| format!("{mode:?} t={t}: {e}"))?;
                    let p = d.as_array();
                    if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                        return Err(format!("{mode:?} t={t} m={contact} q={q}: {p:?}"));
                    }
                    worst = worst.max((d.sum() - 1.0).abs());
                    rows += 1;
                }
            }
        }
    }
    check(worst <= 1e-12, format!("{rows} rows, max |sum - 1| = {worst:.1e}"))
}

/// Ticks spent in the starting bout before the first Still/active crossing.
fn bout<R: Rng>(start: Mode, params: &AutomatonParams, rng: &mut R) -> Result<u64, String> {
    let mut state = AutomatonState::new(start);
    let mut ticks = 1;
    loop {
        let contact = rng.gen::<bool>();
        let q = if rng.gen::<bool>() { 0.25 } else { 0.0 };
        let next = step(state, contact, q, params, rng).map_err(|e| e.to_string())?;
        if next.mode.is_active() != start.is_active() {
            return Ok(ticks);
        }
        state = next;
        ticks += 1;
    }
}

fn hazard_caps() -> Outcome {
    let params = AutomatonParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 10_000;
    let still: Vec<u64> = (0..n).map(|_| bout(Mode::Still, &params, &mut rng)).collect::<Result<_, _>>()?;
    let active: Vec<u64> = (0..n)
        .map(|k| bout(if k % 2 == 0 { Mode::Crawl } else { Mode::Explore }, &params, &mut rng))
        .collect::<Result<_, _>>()?;
    let max_still = *still.iter().max().unwrap();
    let max_active = *active.iter().max().unwrap();

    // Σ k·P(dwell = k) with P(dwell = k) = p1(k−1)·Π_{j<k−1} (1 − p1(j)).
    let mut survive = 1.0;
    let mut expected = 0.0;
    for t in 0..=params.tau_s {
        let p1 = p_still_exit(t, &params).map_err(|e| e.to_string())?;
        expected += (t as f64 + 1.0) * survive * p1;
        survive *= 1.0 - p1;
    }
    let mean = still.iter().sum::<u64>() as f64 / n as f64;
    let rel = (mean - expected).abs() / expected;
    check(
        max_still <= params.tau_s as u64 + 1 && max_active <= params.tau_a as u64 + 1 && rel <= 0.02,
        format!(
            "max still {max_still} (cap {}), max active {max_active} (cap {}), mean still {mean:.2} vs {expected:.2} ({:.2}%)",
            params.tau_s + 1,
            params.tau_a + 1,
            100.0 * rel
        ),
    )
}

fn sampling_fidelity() -> Outcome {
    let params = AutomatonParams::default();
    let cases = [
        (Mode::Still, 0, false, 0.0),
        (Mode::Still, 590, true, 0.25),
        (Mode::Crawl, 0, false, 0.25),
        (Mode::Crawl, 850, true, 0.0),
        (Mode::Explore, 880, false, 1.0),
        (Mode::Explore, 450, true, 0.25),
    ];
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = String::new();
    let mut worst_ratio = 0.0f64;
    for (mode, t, contact, q) in cases {
        let state = AutomatonState { mode, t };
        let probs = transition_kernel(state, contact, &params, q).map_err(|e| e.to_string())?.as_array();
        let mut counts = [0u64; 3];
        for _ in 0..n {
            let next = step(state, contact, q, &params, &mut rng).map_err(|e| e.to_string())?;
            counts[next.mode.index()] += 1;
        }
        let mut observed = Vec::new();
        let mut expected = Vec::new();
        for k in 0..3 {
            if probs[k] > 0.0 {
                observed.push(counts[k]);
                expected.push(probs[k]);
            } else if counts[k] > 0 {
                return Err(format!("{mode:?} t={t}: {} draws in a zero-probability cell", counts[k]));
            }
        }
        if observed.len() < 2 {
            continue;
        }
        let stat = chi_square(&observed, &expected).map_err(|e| e.to_string())?;
        let df = (observed.len() - 1) as f64;
        let critical = ChiSquared::new(df).map_err(|e| e.to_string())?.inverse_cdf(0.999);
        if stat >= critical {
            return Err(format!("{mode:?} t={t} m={contact} q={q}: chi2 {stat:.2} >= {critical:.2}"));
        }
        if stat / critical > worst_ratio {
            worst_ratio = stat / critical;
            worst = format!("largest chi2 {stat:.2} vs {critical:.2} ({mode:?} t={t})");
        }
    }
    Ok(format!("6 tuples x {n} draws; {worst}"))
}

fn power_law_recovery() -> Outcome {
    let points: Vec<(f64, f64)> = (1..=4).map(|x| (x as f64, 0.35 * (x as f64).powf(-0.82))).collect();
    let fit = fit_power_law(&points).map_err(|e| e.to_string())?;
    check(
        (fit.a - 0.35).abs() <= 1e-3 && (fit.b + 0.82).abs() <= 1e-2,
        format!("a = {:.6}, b = {:.6}", fit.a, fit.b),
    )
}

struct Calibrated {
    report: CalibrationReport,
    settings: CalibrationSettings,
    env: EnvironmentTemplate,
}

fn calibrate_defaults() -> Result<Calibrated, String> {
    let env = EnvironmentTemplate::default_corridor();
    let settings = CalibrationSettings::default();
    let report = calibrate_entry_prob(
        &env,
        &MotionParams::default(),
        &AutomatonParams::default(),
        &PowerLawFit::target(0.35, -0.82),
        &settings,
    )
    .map_err(|e| e.to_string())?;
    Ok(Calibrated { report, settings, env })
}

fn calibration_self_consistency(cal: &Calibrated) -> Outcome {
    let converged = cal.report.evaluations.len() < cal.settings.max_evaluations;
    let grouped = group_by_distance(&cal.report.visit_freq);
    let points: Vec<(f64, f64)> = grouped.iter().map(|&(x, f)| (x as f64, f)).collect();
    let fit = fit_power_law(&points).map_err(|e| e.to_string())?;
    let decreasing = grouped.windows(2).all(|w| w[1].1 < w[0].1);
    let freqs: Vec<String> = grouped.iter().map(|(_, f)| format!("{f:.3}")).collect();
    check(
        converged && decreasing && (-0.97..=-0.67).contains(&fit.b),
        format!(
            "q_scale = {:.4} after {} runs; grouped visit freq [{}]; refit a = {:.3}, b = {:.3}",
            cal.report.q_scale,
            cal.report.evaluations.len(),
            freqs.join(", "),
            fit.a,
            fit.b
        ),
    )
}

fn dwell_ratio(cal: &Calibrated) -> Outcome {
    let spec = EnsembleSpec {
        n_trials: cal.settings.n_trials,
        base_seed: cal.settings.base_seed,
        duration: cal.settings.duration,
        workers: None,
    };
    let motion = MotionParams::default().with_q_scale(cal.report.q_scale);
    let summaries = run_ensemble_summaries(&cal.env, &motion, &AutomatonParams::default(), &spec)
        .map_err(|e| e.to_string())?;
    if visit_frequencies_from(&summaries) != cal.report.visit_freq {
        return Err("rerun does not reproduce the calibrated ensemble".into());
    }
    let grouped = group_by_distance(&time_fractions_from(&summaries).map_err(|e| e.to_string())?);
    let (end, inner) = (grouped[0].1, grouped[3].1);
    let ratio = end / inner;
    check(
        ratio >= 2.0,
        format!("time fraction x=1 {end:.2e}, x=4 {inner:.2e}, ratio {ratio:.2}"),
    )
}

fn symmetry() -> Outcome {
    let config = RunConfig {
        environment: EnvironmentConfig::Corridor(CorridorConfig {
            start: StartPosition::Center,
            ..CorridorConfig::default()
        }),
        ..RunConfig::default()
    };
    let env = config.validate().map_err(|e| e.to_string())?;
    let n = 2000u64;
    let spec = EnsembleSpec {
        n_trials: n,
        base_seed: 7,
        duration: 1800,
        workers: None,
    };
    let summaries = run_ensemble_summaries(&env, &config.motion, &config.automaton, &spec).map_err(|e| e.to_string())?;
    let f = visit_frequencies_from(&summaries);
    let rooms = f.len();
    let mut worst = 0.0f64;
    for i in 0..rooms / 2 {
        let (a, b) = (f[i], f[rooms - 1 - i]);
        let p = 0.5 * (a + b);
        let sigma = (2.0 * p * (1.0 - p) / n as f64).sqrt();
        let z = if sigma > 0.0 { (a - b).abs() / sigma } else if a == b { 0.0 } else { f64::INFINITY };
        if z > 3.0 {
            return Err(format!("rooms {} and {}: {a:.4} vs {b:.4} ({z:.2} sigma)", i + 1, rooms - i));
        }
        worst = worst.max(z);
    }
    let shown: Vec<String> = f.iter().map(|v| format!("{v:.3}")).collect();
    Ok(format!("visit freq [{}]; largest gap {worst:.2} sigma", shown.join(", ")))
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .expect("output directory")
        .map(|e| e.expect("entry").path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).expect("file")))
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let config = RunConfig {
        n_trials: 64,
        base_seed: 2024,
        duration_ticks: 1800,
        ..RunConfig::default()
    };
    let mut runs = Vec::new();
    for (k, workers) in [1usize, 8, 1, 8].into_iter().enumerate() {
        let dir = tmp.path().join(format!("run{k}"));
        cmd_simulate(&config, &dir, Some(workers)).map_err(|e| e.to_string())?;
        runs.push(read_dir_bytes(&dir));
    }
    let csvs = runs[0].iter().filter(|(n, _)| n.ends_with(".csv")).count();
    let bytes: usize = runs[0].iter().map(|(_, b)| b.len()).sum();
    check(
        runs.iter().all(|r| *r == runs[0]) && csvs == 64,
        format!("4 runs (workers 1, 8, 1, 8): {csvs} CSVs, {bytes} bytes each, identical"),
    )
}

fn tracking_round_trip() -> Outcome {
    let env = EnvironmentTemplate::default_corridor();
    let motion = MotionParams::default().with_q_scale(0.5);
    let auto = AutomatonParams::default();
    let px_per_mm = 4.0;
    let mut worst = 0.0f64;
    let mut total = 0;
    let mut rooms_seen = 0;
    for i in 0..50 {
        let traj = run_trial(&env, &motion, &auto, trial_seed(99, i), 240).map_err(|e| e.to_string())?;
        let frames = render_frames(&traj, &env, px_per_mm).map_err(|e| e.to_string())?;
        let opts = TrackOptions {
            threshold: 40,
            mm_per_px: 1.0 / px_per_mm,
            frame_ticks: 1,
            env: Some(&env),
        };
        let tracked = frames_to_trajectory(&frames, &opts).map_err(|e| e.to_string())?;
        let sq: f64 = traj
            .samples
            .iter()
            .zip(&tracked.samples)
            .map(|(a, b)| {
                let d = a.pos.distance(&b.pos) * px_per_mm;
                d * d
            })
            .sum();
        worst = worst.max((sq / traj.len() as f64).sqrt());
        total += traj.len();
        if traj.samples.iter().any(|s| matches!(s.region, Some(RegionId::Room(_)))) {
            rooms_seen += 1;
        }
    }
    let first = time_color(0.0);
    let last = time_color(1.0);

    // The final sample is drawn last, so its centre pixel carries the end colour.
    let traj = run_trial(&env, &motion, &auto, trial_seed(99, 0), 240).map_err(|e| e.to_string())?;
    let overlay = render_time_overlay(&traj, &env, px_per_mm).map_err(|e| e.to_string())?;
    let map = PixelMap::new(&env, px_per_mm).map_err(|e| e.to_string())?;
    let (cx, cy) = map.to_px(traj.samples.last().unwrap().pos);
    let end_pixel = overlay.get(cx.round() as usize, cy.round() as usize);

    check(
        worst <= 1.0 && first == [0, 0, 255] && last == [255, 0, 0] && end_pixel == [255, 0, 0],
        format!(
            "50 trajectories ({total} frames, {rooms_seen} with room visits), worst RMS {worst:.3} px; colours {first:?} -> {last:?}"
        ),
    )
}

fn zero_trigger_isolation() -> Outcome {
    let spec = EnsembleSpec {
        n_trials: 500,
        base_seed: 10,
        duration: 1800,
        workers: None,
    };
    let summaries = run_ensemble_summaries(
        &EnvironmentTemplate::default_corridor(),
        &MotionParams::default().with_q_scale(0.0),
        &AutomatonParams::default(),
        &spec,
    )
    .map_err(|e| e.to_string())?;
    let room_ticks: u64 = summaries.iter().flat_map(|s| &s.room_ticks).sum();
    check(room_ticks == 0, format!("500 trials, {room_ticks} ticks in rooms"))
}

fn run(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let (pass, detail) = match outcome {
        Ok(d) if elapsed <= limit => (true, d),
        Ok(d) => (false, format!("{d}; over the {:.0} s budget", limit.as_secs_f64())),
        Err(d) => (false, d),
    };
    println!(
        "{} {id:>2} {name} [{:.2} s]: {detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    pass
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut ok = true;
    ok &= run(1, "kernel soundness", secs(1), kernel_soundness);
    ok &= run(2, "hazard caps", secs(10), hazard_caps);
    ok &= run(3, "kernel sampling fidelity", secs(10), sampling_fidelity);
    ok &= run(4, "power-law recovery", secs(1), power_law_recovery);

    // The dwell-ratio check reuses the calibrated ensemble.
    let mut calibrated = None;
    ok &= run(5, "calibration self-consistency", secs(120), || {
        let cal = calibrate_defaults()?;
        let outcome = calibration_self_consistency(&cal);
        calibrated = Some(cal);
        outcome
    });
    match &calibrated {
        Some(cal) => ok &= run(6, "dwell-ratio direction", secs(120), || dwell_ratio(cal)),
        None => {
            println!("FAIL  6 dwell-ratio direction: no calibrated ensemble");
            ok = false;
        }
    }
    ok &= run(7, "symmetry", secs(120), symmetry);
    ok &= run(8, "determinism", secs(30), determinism);
    ok &= run(9, "tracking round-trip", secs(30), tracking_round_trip);
    ok &= run(10, "zero-trigger isolation", secs(30), zero_trigger_isolation);

    if ok {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: some criteria fail");
        ExitCode::FAILURE
    }
}
