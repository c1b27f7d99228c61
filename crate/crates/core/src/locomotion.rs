//! Per-tick kinematics closing the loop between the environment and the
//! automaton.
//!
//! One tick of [`advance`]:
//!
//! 1. move according to the current mode: Still holds position; Crawl in the
//!    corridor advances along the heading and turns around at the corridor
//!    ends; every other active case is a random walk with a fresh uniform
//!    direction each tick at the exploration speed, clipped to the region;
//! 2. read the mechanoreceptor;
//! 3. compute the exploration trigger: `q_scale` (attenuated by the contact
//!    memory, if enabled) when a crawl in the corridor sweeps the body
//!    interval `[x − r, x + r]` over a room opening, else 0. The trigger is
//!    armed once per pass, so the step length does not alias against the
//!    opening positions;
//! 4. step the automaton;
//! 5. Crawl→Explore next to an opening moves the leech 2 mm into that room;
//!    Explore→Crawl inside a room puts it back on the corridor centre line in
//!    front of the opening with a uniformly chosen left/right heading.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::automaton::{self, AutomatonParams, AutomatonState, Mode};
use crate::error::SimError;
use crate::geometry::{EnvironmentTemplate, Layout, Opening, Point, Rect, RegionId, WallAxis};
use crate::trajectory::{Sample, Trajectory};

/// Depth at which an entering leech is placed inside the target region.
pub const ENTRY_DEPTH_MM: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionParams {
    #[serde(rename = "v_crawl_mm_per_s")]
    pub v_crawl: f64,
    #[serde(rename = "v_explore_mm_per_s")]
    pub v_explore: f64,
    #[serde(rename = "contact_radius_mm")]
    pub contact_radius: f64,
    /// Room-entry trigger probability per adjacent crawling tick.
    pub q_scale: f64,
    /// Length scale `L` of the contact memory: the trigger is scaled by
    /// `L / (L + d)` where `d` is the path length since the last wall
    /// contact. `None` keeps the trigger constant.
    #[serde(rename = "contact_memory_mm")]
    pub contact_memory: Option<f64>,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            v_crawl: 3.2,
            v_explore: 1.5,
            contact_radius: crate::geometry::DEFAULT_CONTACT_RADIUS_MM,
            q_scale: DEFAULT_Q_SCALE,
            contact_memory: Some(DEFAULT_CONTACT_MEMORY_MM),
        }
    }
}

pub const DEFAULT_CONTACT_MEMORY_MM: f64 = 3.0;

/// Trigger scale obtained by calibrating the default template and motion
/// against `0.35·x^−0.82` (1000 trials of 1800 ticks).
pub const DEFAULT_Q_SCALE: f64 = 0.11;

impl MotionParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |name: &'static str, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(SimError::InvalidMotion { name, value })
            }
        };
        positive("v_crawl_mm_per_s", self.v_crawl)?;
        positive("v_explore_mm_per_s", self.v_explore)?;
        if !(self.contact_radius.is_finite() && self.contact_radius >= 0.0) {
            return Err(SimError::InvalidMotion {
                name: "contact_radius_mm",
                value: self.contact_radius,
            });
        }
        if !(0.0..=1.0).contains(&self.q_scale) {
            return Err(SimError::InvalidMotion {
                name: "q_scale",
                value: self.q_scale,
            });
        }
        if let Some(l) = self.contact_memory {
            positive("contact_memory_mm", l)?;
        }
        Ok(())
    }

    pub fn with_q_scale(self, q_scale: f64) -> Self {
        Self { q_scale, ..self }
    }

    fn memory_factor(&self, since_contact: f64) -> f64 {
        match self.contact_memory {
            Some(l) => l / (l + since_contact),
            None => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeechState {
    pub automaton: AutomatonState,
    /// Mechanoreceptor bit at `pos`.
    pub contact: bool,
    pub pos: Point,
    /// Unit heading; horizontal while crawling in the corridor.
    pub heading: Point,
    pub region: RegionId,
    /// Path length travelled since the last tick with wall contact.
    pub since_contact: f64,
    /// Room whose opening the crawling body overlapped on the previous tick.
    pub adjacent_room: Option<u32>,
}

impl LeechState {
    /// Crawling leech at the release point, heading toward the far corridor
    /// end. A release point at the exact centre picks left or right with one
    /// draw from `rng`.
    pub fn released<R: Rng + ?Sized>(
        env: &EnvironmentTemplate,
        motion: &MotionParams,
        rng: &mut R,
    ) -> Result<Self, SimError> {
        let pos = env.start_point;
        let region = env.locate(pos)?;
        let mid = 0.5 * env.interior_width;
        let dir = if pos.x > mid {
            -1.0
        } else if pos.x < mid || rng.gen::<bool>() {
            1.0
        } else {
            -1.0
        };
        Ok(Self {
            automaton: AutomatonState::new(Mode::Crawl),
            contact: env.wall_contact(pos, motion.contact_radius),
            pos,
            heading: Point::new(dir, 0.0),
            region,
            since_contact: 0.0,
            adjacent_room: None,
        })
    }
}

/// Opening whose span overlaps the body interval `[x − r, x + r]`, for a
/// leech in the corridor of a corridor template.
pub fn adjacent_opening(env: &EnvironmentTemplate, pos: Point, radius: f64) -> Option<&Opening> {
    swept_opening(env, pos.x, pos.x, radius)
}

/// Opening overlapped by the body at any point of a move from `x_from` to
/// `x_to` along the corridor.
pub fn swept_opening(env: &EnvironmentTemplate, x_from: f64, x_to: f64, radius: f64) -> Option<&Opening> {
    let (a, b) = if x_from <= x_to { (x_from, x_to) } else { (x_to, x_from) };
    let mut hits = env.openings.iter().filter(|o| {
        o.neighbor == RegionId::Corridor && o.axis == WallAxis::Horizontal && {
            let (lo, hi) = o.span();
            a - radius <= hi && b + radius >= lo
        }
    });
    let first = hits.next()?;
    // A long stride may sweep several openings; the last one reached wins.
    Some(hits.fold(first, |best, o| {
        let key = |o: &Opening| (o.gap.center().x - x_to).abs();
        if key(o) < key(best) {
            o
        } else {
            best
        }
    }))
}

fn crawl_corridor(env: &EnvironmentTemplate, leech: &mut LeechState, step: f64, radius: f64) -> f64 {
    let width = env.interior_width;
    let margin = (0.5 * radius).min(0.5 * width);
    let (lo, hi) = (margin, width - margin);
    let start = leech.pos.x;
    let mut x = start + leech.heading.x.signum() * step;
    if x <= lo {
        x = lo;
        leech.heading = Point::new(1.0, 0.0);
    } else if x >= hi {
        x = hi;
        leech.heading = Point::new(-1.0, 0.0);
    }
    leech.pos.x = x;
    (x - start).abs()
}

/// Where a straight move from `from` to `to` leaves `rect` through an
/// opening into another cell (maze layouts only), return the landing point.
fn pass_through(
    env: &EnvironmentTemplate,
    region: RegionId,
    rect: &Rect,
    from: Point,
    to: Point,
) -> Option<(Point, RegionId)> {
    if !matches!(env.layout, Layout::SquareMaze(_)) {
        return None;
    }
    let d = Point::new(to.x - from.x, to.y - from.y);
    for o in &env.openings {
        let other = if RegionId::Room(o.room) == region {
            o.neighbor
        } else if o.neighbor == region {
            RegionId::Room(o.room)
        } else {
            continue;
        };
        let target = env.region(other)?.rect;
        let (lo, hi) = o.span();
        let hit = match o.axis {
            WallAxis::Vertical => {
                let line = if (o.gap.x0 - rect.x1).abs() < 1e-9 { rect.x1 } else { rect.x0 };
                let crosses = (to.x - line) * (from.x - line) < 0.0 || (to.x - line).abs() < 1e-12;
                if !crosses || d.x == 0.0 {
                    continue;
                }
                let s = (line - from.x) / d.x;
                let y = from.y + s * d.y;
                (y >= lo && y <= hi).then(|| {
                    let x = if line == rect.x1 {
                        target.x0 + ENTRY_DEPTH_MM.min(target.width())
                    } else {
                        target.x1 - ENTRY_DEPTH_MM.min(target.width())
                    };
                    Point::new(x, y)
                })
            }
            WallAxis::Horizontal => {
                let line = if (o.gap.y0 - rect.y1).abs() < 1e-9 { rect.y1 } else { rect.y0 };
                let crosses = (to.y - line) * (from.y - line) < 0.0 || (to.y - line).abs() < 1e-12;
                if !crosses || d.y == 0.0 {
                    continue;
                }
                let s = (line - from.y) / d.y;
                let x = from.x + s * d.x;
                (x >= lo && x <= hi).then(|| {
                    let y = if line == rect.y1 {
                        target.y0 + ENTRY_DEPTH_MM.min(target.height())
                    } else {
                        target.y1 - ENTRY_DEPTH_MM.min(target.height())
                    };
                    Point::new(x, y)
                })
            }
        };
        if let Some(p) = hit {
            return Some((target.clamp(p), other));
        }
    }
    None
}

fn random_walk<R: Rng + ?Sized>(
    env: &EnvironmentTemplate,
    leech: &mut LeechState,
    step: f64,
    rng: &mut R,
) -> Result<f64, SimError> {
    let rect = env
        .region(leech.region)
        .ok_or(SimError::Escaped {
            x: leech.pos.x,
            y: leech.pos.y,
            region: leech.region,
            tick: 0,
        })?
        .rect;
    let angle = TAU * rng.gen::<f64>();
    let from = leech.pos;
    let to = Point::new(from.x + step * angle.cos(), from.y + step * angle.sin());
    let (pos, region) = match pass_through(env, leech.region, &rect, from, to) {
        Some(hit) => hit,
        None => (rect.clamp(to), leech.region),
    };
    leech.pos = pos;
    leech.region = region;
    Ok(from.distance(&pos))
}

fn refresh_contact(env: &EnvironmentTemplate, leech: &mut LeechState, radius: f64) {
    leech.contact = env.wall_contact(leech.pos, radius);
    if leech.contact {
        leech.since_contact = 0.0;
    }
}

/// Advance one tick.
pub fn advance<R: Rng + ?Sized>(
    leech: &LeechState,
    env: &EnvironmentTemplate,
    motion: &MotionParams,
    auto: &AutomatonParams,
    rng: &mut R,
) -> Result<LeechState, SimError> {
    let mut next = leech.clone();
    let mode = leech.automaton.mode;
    let in_corridor = leech.region == RegionId::Corridor;
    let x_before = leech.pos.x;

    // 1. motion
    let moved = match mode {
        Mode::Still => 0.0,
        Mode::Crawl if in_corridor => crawl_corridor(env, &mut next, motion.v_crawl * auto.tick, motion.contact_radius),
        Mode::Crawl | Mode::Explore => random_walk(env, &mut next, motion.v_explore * auto.tick, rng)?,
    };
    next.since_contact += moved;

    // 2. mechanoreceptor
    refresh_contact(env, &mut next, motion.contact_radius);

    // 3. exploration trigger, armed once per pass over an opening
    let adjacent = if mode == Mode::Crawl && in_corridor && env.is_corridor() {
        swept_opening(env, x_before, next.pos.x, motion.contact_radius)
    } else {
        None
    };
    let fresh = adjacent.is_some_and(|o| leech.adjacent_room != Some(o.room));
    let q_enter = if fresh {
        motion.q_scale * motion.memory_factor(next.since_contact)
    } else {
        0.0
    };
    next.adjacent_room = adjacent.map(|o| o.room);

    // 4. automaton
    next.automaton = automaton::step(leech.automaton, next.contact, q_enter, auto, rng)?;
    let new_mode = next.automaton.mode;

    // 5. entering and leaving rooms
    // Only an armed trigger leads through an opening; contact-driven
    // exploration stays in the corridor.
    if mode == Mode::Crawl && new_mode == Mode::Explore && q_enter > 0.0 {
        if let Some(o) = adjacent {
            let room = RegionId::Room(o.room);
            let rect = env.region(room).ok_or(SimError::Geometry(
                crate::error::GeometryError::InvalidRoom(o.room),
            ))?;
            let x = o.gap.center().x;
            let y = (rect.rect.y1 - ENTRY_DEPTH_MM).max(rect.rect.y0);
            next.since_contact += next.pos.distance(&Point::new(x, y));
            next.pos = Point::new(x, y);
            next.region = room;
            next.adjacent_room = None;
            refresh_contact(env, &mut next, motion.contact_radius);
        }
    } else if mode == Mode::Explore && new_mode == Mode::Crawl && env.is_corridor() {
        if let RegionId::Room(i) = next.region {
            let corridor = env.corridor().expect("corridor layout").rect;
            let o = env
                .corridor_opening(i)
                .ok_or(SimError::Geometry(crate::error::GeometryError::InvalidRoom(i)))?;
            let exit = Point::new(o.gap.center().x, corridor.center().y);
            next.since_contact += next.pos.distance(&exit);
            next.pos = exit;
            next.region = RegionId::Corridor;
            let dir = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            next.heading = Point::new(dir, 0.0);
            refresh_contact(env, &mut next, motion.contact_radius);
        }
    }

    match env.locate(next.pos) {
        Ok(RegionId::Wall) | Err(_) => Err(SimError::Escaped {
            x: next.pos.x,
            y: next.pos.y,
            region: next.region,
            tick: 0,
        }),
        Ok(_) => Ok(next),
    }
}

/// Run one trial of `duration` ticks. Sample `k` records the state at the
/// start of tick `k`; sample 0 is the release state.
pub fn run_trial(
    env: &EnvironmentTemplate,
    motion: &MotionParams,
    auto: &AutomatonParams,
    seed: u64,
    duration: u64,
) -> Result<Trajectory, SimError> {
    if duration == 0 {
        return Err(SimError::EmptyDuration);
    }
    motion.validate()?;
    auto.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut leech = LeechState::released(env, motion, &mut rng)?;
    let mut samples = Vec::with_capacity(duration as usize);
    for tick in 0..duration {
        samples.push(Sample {
            tick,
            pos: leech.pos,
            mode: Some(leech.automaton.mode),
            region: Some(leech.region),
            contact: leech.contact,
        });
        if tick + 1 < duration {
            leech = advance(&leech, env, motion, auto, &mut rng).map_err(|e| match e {
                SimError::Escaped { x, y, region, .. } => SimError::Escaped {
                    x,
                    y,
                    region,
                    tick: tick + 1,
                },
                other => other,
            })?;
        }
    }
    Ok(Trajectory {
        trial_id: 0,
        rooms: env.room_count(),
        samples,
    })
}
