//! Planar environment templates: the corridor with a row of rooms, and the
//! square grid maze.
//!
//! All coordinates are millimetres in the interior frame, origin at the
//! interior lower-left corner, `y` pointing up. Walls are the complement of
//! the free regions inside the interior rectangle, minus the opening gaps.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::error::GeometryError;

/// Tolerance used when deciding whether an opening gap abuts a region side.
const EDGE_EPS: f64 = 1e-9;

/// Distance of the default release point from the right interior wall.
pub const START_OFFSET_MM: f64 = 4.0;

/// Default mechanoreceptor contact radius (leech body half-width).
pub const DEFAULT_CONTACT_RADIUS_MM: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned closed rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn contains_strictly(&self, p: Point) -> bool {
        p.x > self.x0 && p.x < self.x1 && p.y > self.y0 && p.y < self.y1
    }

    /// Clamp a point into the rectangle.
    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.x0, self.x1), p.y.clamp(self.y0, self.y1))
    }

    pub fn interiors_overlap(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }
}

/// Identity of a free region (or the wall material).
///
/// The derived ordering `Corridor < Room(1) < … < Room(n) < Wall` is the
/// tie-break used by [`EnvironmentTemplate::locate`] for boundary points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RegionId {
    Corridor,
    Room(u32),
    Wall,
}

impl RegionId {
    pub fn room_index(&self) -> Option<u32> {
        match self {
            RegionId::Room(i) => Some(*i),
            _ => None,
        }
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionId::Corridor => f.write_str("C"),
            RegionId::Room(i) => write!(f, "R{i}"),
            RegionId::Wall => f.write_str("W"),
        }
    }
}

impl FromStr for RegionId {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "C" => Ok(RegionId::Corridor),
            "W" => Ok(RegionId::Wall),
            _ => s
                .strip_prefix('R')
                .and_then(|n| n.parse::<u32>().ok())
                .filter(|&n| n >= 1)
                .map(RegionId::Room)
                .ok_or_else(|| GeometryError::BadRegionLabel(s.to_string())),
        }
    }
}

impl Serialize for RegionId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RegionId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: RegionId,
    pub rect: Rect,
}

/// Orientation of the wall an opening is cut into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallAxis {
    /// Wall runs along `x`; the gap's span is an `x` interval.
    Horizontal,
    /// Wall runs along `y`; the gap's span is a `y` interval.
    Vertical,
}

/// A gap through a dividing wall joining `room` to `neighbor`.
#[derive(Debug, Clone, PartialEq)]
pub struct Opening {
    pub room: u32,
    pub neighbor: RegionId,
    pub axis: WallAxis,
    /// The gap itself, spanning the full wall thickness.
    pub gap: Rect,
}

impl Opening {
    /// Interval of the gap along its wall.
    pub fn span(&self) -> (f64, f64) {
        match self.axis {
            WallAxis::Horizontal => (self.gap.x0, self.gap.x1),
            WallAxis::Vertical => (self.gap.y0, self.gap.y1),
        }
    }

    pub fn width(&self) -> f64 {
        let (lo, hi) = self.span();
        hi - lo
    }

    fn connects(&self, id: RegionId) -> bool {
        self.neighbor == id || RegionId::Room(self.room) == id
    }
}

/// Dimensions of the corridor-with-rooms template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorridorSpec {
    pub rooms: u32,
    pub room_size_mm: f64,
    pub wall_mm: f64,
    pub corridor_width_mm: f64,
    pub opening_mm: f64,
}

impl Default for CorridorSpec {
    /// The 138 × 31 mm printed template: eight 15 mm rooms, 2 mm walls,
    /// a 10 mm corridor and 2 mm openings.
    fn default() -> Self {
        Self {
            rooms: 8,
            room_size_mm: 15.0,
            wall_mm: 2.0,
            corridor_width_mm: 10.0,
            opening_mm: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeSpec {
    pub cells: u32,
    pub cell_size_mm: f64,
    pub wall_mm: f64,
    /// Presence bits for interior walls; see [`build_square_maze`].
    pub wall_mask: Vec<bool>,
}

impl MazeSpec {
    pub fn mask_len(cells: u32) -> usize {
        let n = cells as usize;
        2 * n * n.saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Corridor(CorridorSpec),
    SquareMaze(MazeSpec),
}

/// An immutable planar environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentTemplate {
    pub interior_width: f64,
    pub interior_height: f64,
    /// Free regions sorted by id.
    pub regions: Vec<Region>,
    pub openings: Vec<Opening>,
    pub start_point: Point,
    pub layout: Layout,
}

fn check_positive(name: &'static str, value: f64) -> Result<(), GeometryError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidDimension { name, value })
    }
}

/// Build the corridor-with-rooms template.
///
/// Rooms sit along the bottom of the interior (`y ∈ [0, room_size]`), the
/// dividing wall above them, then the corridor. Room `i` (1-based) starts at
/// `x = (i − 1)·(room_size + wall)`. Each room's opening is centred on its
/// `x` extent.
pub fn build_corridor_template(spec: &CorridorSpec) -> Result<EnvironmentTemplate, GeometryError> {
    if spec.rooms == 0 {
        return Err(GeometryError::InvalidDimension {
            name: "rooms",
            value: 0.0,
        });
    }
    check_positive("room_size_mm", spec.room_size_mm)?;
    check_positive("wall_mm", spec.wall_mm)?;
    check_positive("corridor_width_mm", spec.corridor_width_mm)?;
    check_positive("opening_mm", spec.opening_mm)?;
    if spec.opening_mm > spec.room_size_mm {
        return Err(GeometryError::OpeningTooWide {
            opening: spec.opening_mm,
            room: spec.room_size_mm,
        });
    }

    let pitch = spec.room_size_mm + spec.wall_mm;
    let width = spec.rooms as f64 * spec.room_size_mm + (spec.rooms - 1) as f64 * spec.wall_mm;
    let divider_top = spec.room_size_mm + spec.wall_mm;
    let height = divider_top + spec.corridor_width_mm;

    let mut regions = Vec::with_capacity(spec.rooms as usize + 1);
    regions.push(Region {
        id: RegionId::Corridor,
        rect: Rect::new(0.0, divider_top, width, height),
    });
    let mut openings = Vec::with_capacity(spec.rooms as usize);
    for i in 1..=spec.rooms {
        let x0 = (i - 1) as f64 * pitch;
        let rect = Rect::new(x0, 0.0, x0 + spec.room_size_mm, spec.room_size_mm);
        let cx = rect.center().x;
        regions.push(Region {
            id: RegionId::Room(i),
            rect,
        });
        openings.push(Opening {
            room: i,
            neighbor: RegionId::Corridor,
            axis: WallAxis::Horizontal,
            gap: Rect::new(
                cx - 0.5 * spec.opening_mm,
                spec.room_size_mm,
                cx + 0.5 * spec.opening_mm,
                divider_top,
            ),
        });
    }

    let start_x = (width - START_OFFSET_MM).max(0.5 * width);
    let start_point = Point::new(start_x, divider_top + 0.5 * spec.corridor_width_mm);

    let env = EnvironmentTemplate {
        interior_width: width,
        interior_height: height,
        regions,
        openings,
        start_point,
        layout: Layout::Corridor(*spec),
    };
    env.check_start(start_point)?;
    Ok(env)
}

/// Build an `n × n` grid maze.
///
/// `wall_mask` holds `2·n·(n−1)` presence bits (true = wall present). The
/// first `n·(n−1)` bits are the vertical walls between cell `(r, c)` and
/// `(r, c+1)` at index `r·(n−1) + c`; the remaining bits are the horizontal
/// walls between `(r, c)` and `(r+1, c)` at index `n·(n−1) + r·n + c`.
/// Cell `(r, c)` is region `Room(r·n + c + 1)`; row 0 is at the bottom.
pub fn build_square_maze(spec: &MazeSpec) -> Result<EnvironmentTemplate, GeometryError> {
    if spec.cells == 0 {
        return Err(GeometryError::InvalidDimension {
            name: "cells",
            value: 0.0,
        });
    }
    check_positive("cell_size_mm", spec.cell_size_mm)?;
    check_positive("wall_mm", spec.wall_mm)?;
    let n = spec.cells as usize;
    let expected = MazeSpec::mask_len(spec.cells);
    if spec.wall_mask.len() != expected {
        return Err(GeometryError::WallMaskLength {
            expected,
            got: spec.wall_mask.len(),
        });
    }

    let pitch = spec.cell_size_mm + spec.wall_mm;
    let side = n as f64 * spec.cell_size_mm + (n - 1) as f64 * spec.wall_mm;
    let cell_rect = |r: usize, c: usize| {
        let x0 = c as f64 * pitch;
        let y0 = r as f64 * pitch;
        Rect::new(x0, y0, x0 + spec.cell_size_mm, y0 + spec.cell_size_mm)
    };
    let id_of = |r: usize, c: usize| (r * n + c + 1) as u32;

    let mut regions = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            regions.push(Region {
                id: RegionId::Room(id_of(r, c)),
                rect: cell_rect(r, c),
            });
        }
    }

    let mut openings = Vec::new();
    let mut adjacency = vec![Vec::new(); n * n];
    let vertical_count = n * (n - 1);
    for r in 0..n {
        for c in 0..n.saturating_sub(1) {
            if spec.wall_mask[r * (n - 1) + c] {
                continue;
            }
            let left = cell_rect(r, c);
            openings.push(Opening {
                room: id_of(r, c),
                neighbor: RegionId::Room(id_of(r, c + 1)),
                axis: WallAxis::Vertical,
                gap: Rect::new(left.x1, left.y0, left.x1 + spec.wall_mm, left.y1),
            });
            adjacency[r * n + c].push(r * n + c + 1);
            adjacency[r * n + c + 1].push(r * n + c);
        }
    }
    for r in 0..n.saturating_sub(1) {
        for c in 0..n {
            if spec.wall_mask[vertical_count + r * n + c] {
                continue;
            }
            let below = cell_rect(r, c);
            openings.push(Opening {
                room: id_of(r, c),
                neighbor: RegionId::Room(id_of(r + 1, c)),
                axis: WallAxis::Horizontal,
                gap: Rect::new(below.x0, below.y1, below.x1, below.y1 + spec.wall_mm),
            });
            adjacency[r * n + c].push((r + 1) * n + c);
            adjacency[(r + 1) * n + c].push(r * n + c);
        }
    }

    let mut seen = vec![false; n * n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(cell) = queue.pop_front() {
        for &next in &adjacency[cell] {
            if !seen[next] {
                seen[next] = true;
                queue.push_back(next);
            }
        }
    }
    let reached = seen.iter().filter(|&&s| s).count();
    if reached != n * n {
        return Err(GeometryError::Disconnected {
            reached,
            total: n * n,
        });
    }

    Ok(EnvironmentTemplate {
        interior_width: side,
        interior_height: side,
        regions,
        openings,
        start_point: cell_rect(0, 0).center(),
        layout: Layout::SquareMaze(spec.clone()),
    })
}

/// Gaps of `[lo, hi]` not covered by `spans`.
fn uncovered(lo: f64, hi: f64, spans: &mut [(f64, f64)]) -> Vec<(f64, f64)> {
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut cursor = lo;
    for &(s0, s1) in spans.iter() {
        if s1 <= cursor {
            continue;
        }
        if s0 > cursor {
            out.push((cursor, s0.min(hi)));
        }
        cursor = cursor.max(s1);
        if cursor >= hi {
            break;
        }
    }
    if cursor < hi {
        out.push((cursor, hi));
    }
    out
}

fn interval_distance(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        lo - v
    } else if v > hi {
        v - hi
    } else {
        0.0
    }
}

impl EnvironmentTemplate {
    /// The 138 × 31 mm template with its default release point.
    pub fn default_corridor() -> Self {
        build_corridor_template(&CorridorSpec::default()).expect("default corridor is valid")
    }

    pub fn interior(&self) -> Rect {
        Rect::new(0.0, 0.0, self.interior_width, self.interior_height)
    }

    pub fn corridor_spec(&self) -> Option<&CorridorSpec> {
        match &self.layout {
            Layout::Corridor(spec) => Some(spec),
            Layout::SquareMaze(_) => None,
        }
    }

    pub fn is_corridor(&self) -> bool {
        self.corridor_spec().is_some()
    }

    pub fn room_count(&self) -> u32 {
        self.regions
            .iter()
            .filter(|r| matches!(r.id, RegionId::Room(_)))
            .count() as u32
    }

    pub fn region(&self, id: RegionId) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    pub fn corridor(&self) -> Option<&Region> {
        self.region(RegionId::Corridor)
    }

    /// The opening joining room `room` to the corridor, for corridor layouts.
    pub fn corridor_opening(&self, room: u32) -> Option<&Opening> {
        self.openings
            .iter()
            .find(|o| o.room == room && o.neighbor == RegionId::Corridor)
    }

    /// Move the release point. It must lie strictly inside the corridor
    /// (or strictly inside a cell for mazes).
    pub fn with_start(mut self, p: Point) -> Result<Self, GeometryError> {
        self.check_start(p)?;
        self.start_point = p;
        Ok(self)
    }

    /// Release point at the corridor's horizontal centre, mid-height.
    pub fn centered_start(&self) -> Option<Point> {
        self.corridor().map(|c| c.rect.center())
    }

    fn check_start(&self, p: Point) -> Result<(), GeometryError> {
        let ok = match &self.layout {
            Layout::Corridor(_) => self
                .corridor()
                .is_some_and(|c| c.rect.contains_strictly(p)),
            Layout::SquareMaze(_) => self.regions.iter().any(|r| r.rect.contains_strictly(p)),
        };
        if ok {
            Ok(())
        } else {
            Err(GeometryError::BadStart { x: p.x, y: p.y })
        }
    }

    /// Region containing `p`. Boundary points resolve to the lowest id.
    pub fn locate(&self, p: Point) -> Result<RegionId, GeometryError> {
        if !(p.x.is_finite() && p.y.is_finite()) || !self.interior().contains(p) {
            return Err(GeometryError::OutsideInterior { x: p.x, y: p.y });
        }
        Ok(self
            .regions
            .iter()
            .find(|r| r.rect.contains(p))
            .map_or(RegionId::Wall, |r| r.id))
    }

    /// Distance of `room` from the nearer corridor end, in room-index units:
    /// `min(i, R + 1 − i)`.
    pub fn room_distance_to_end(&self, room: u32) -> Result<u32, GeometryError> {
        let spec = self.corridor_spec().ok_or(GeometryError::NotCorridor)?;
        if room == 0 || room > spec.rooms {
            return Err(GeometryError::InvalidRoom(room));
        }
        Ok(room.min(spec.rooms + 1 - room))
    }

    /// Distance from `p` to the nearest wall surface. Zero on or inside walls.
    pub fn wall_distance(&self, p: Point) -> f64 {
        let region = match self.locate(p) {
            Ok(RegionId::Wall) | Err(_) => return 0.0,
            Ok(id) => self.region(id).expect("located region exists"),
        };
        let r = region.rect;
        let mut best = f64::INFINITY;
        // (perpendicular distance, side line coordinate, along-coordinate, side extent, axis)
        let sides = [
            (p.y - r.y0, r.y0, p.x, (r.x0, r.x1), WallAxis::Horizontal),
            (r.y1 - p.y, r.y1, p.x, (r.x0, r.x1), WallAxis::Horizontal),
            (p.x - r.x0, r.x0, p.y, (r.y0, r.y1), WallAxis::Vertical),
            (r.x1 - p.x, r.x1, p.y, (r.y0, r.y1), WallAxis::Vertical),
        ];
        for (perp, line, along, (lo, hi), axis) in sides {
            if perp >= best {
                continue;
            }
            let mut spans: Vec<(f64, f64)> = self
                .openings
                .iter()
                .filter(|o| o.axis == axis && o.connects(region.id))
                .filter(|o| {
                    let (a, b) = match axis {
                        WallAxis::Horizontal => (o.gap.y0, o.gap.y1),
                        WallAxis::Vertical => (o.gap.x0, o.gap.x1),
                    };
                    (a - line).abs() < EDGE_EPS || (b - line).abs() < EDGE_EPS
                })
                .map(|o| o.span())
                .collect();
            for (u0, u1) in uncovered(lo, hi, &mut spans) {
                let d = perp.hypot(interval_distance(along, u0, u1));
                best = best.min(d);
            }
        }
        best
    }

    /// True for wall material: inside the interior, outside every free region
    /// and outside every opening gap. Points outside the interior count too.
    pub fn is_solid(&self, p: Point) -> bool {
        match self.locate(p) {
            Ok(RegionId::Wall) => !self.openings.iter().any(|o| o.gap.contains(p)),
            Ok(_) => false,
            Err(_) => true,
        }
    }

    /// Mechanoreceptor reading: true iff a wall surface lies within `radius`.
    pub fn wall_contact(&self, p: Point, radius: f64) -> bool {
        self.wall_distance(p) <= radius
    }

    /// JSON description: interior, regions, openings and start, in mm
    /// rounded to three decimals. Keys are emitted sorted.
    pub fn to_json(&self) -> Value {
        let mm = |v: f64| json!((v * 1000.0).round() / 1000.0);
        let regions: Vec<Value> = self
            .regions
            .iter()
            .map(|r| {
                json!({
                    "id": r.id.to_string(),
                    "rect": [mm(r.rect.x0), mm(r.rect.y0), mm(r.rect.x1), mm(r.rect.y1)],
                })
            })
            .collect();
        let openings: Vec<Value> = self
            .openings
            .iter()
            .map(|o| {
                let (lo, hi) = o.span();
                json!({
                    "room": o.room,
                    "neighbor": o.neighbor.to_string(),
                    "axis": match o.axis {
                        WallAxis::Horizontal => "horizontal",
                        WallAxis::Vertical => "vertical",
                    },
                    "span": [mm(lo), mm(hi)],
                    "width": mm(o.width()),
                })
            })
            .collect();
        json!({
            "interior": [mm(self.interior_width), mm(self.interior_height)],
            "regions": regions,
            "openings": openings,
            "start": [mm(self.start_point.x), mm(self.start_point.y)],
        })
    }
}
