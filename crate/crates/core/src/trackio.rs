//! Offline tracking and rendering.
//!
//! Frames are thresholded for dark pixels (a pixel is dark only when every
//! channel is below the threshold), the dark-pixel centroid becomes the
//! position for that frame, and trajectories render back to time-coloured
//! overlays or dwell-count activity maps. Images are read and written as
//! binary PPM (`P6`) and PGM (`P5`) with maxval 255.
//!
//! Pixel `(i, j)` has image coordinates `(i, j)`, row 0 at the top. With an
//! environment of interior height `H`, millimetre point `(x, y)` maps to
//! pixel coordinates `(x·k, (H − y)·k)` for a scale of `k` px/mm.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::TrackError;
use crate::geometry::{EnvironmentTemplate, Point};
use crate::trajectory::{Sample, Trajectory};

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];
pub const BLACK: Rgb = [0, 0, 0];
/// Wall shade in synthetic frames; bright enough to never count as dark.
pub const FRAME_WALL: Rgb = [190, 190, 190];
/// Body shade in synthetic frames.
pub const FRAME_BODY: Rgb = [20, 20, 20];
/// Radius of the disc drawn for one trajectory sample.
pub const DISC_RADIUS_PX: f64 = 2.0;
pub const DEFAULT_THRESHOLD: u8 = 40;

/// Row-major RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

pub type Frame = RgbImage;
pub type OverlayImage = RgbImage;

impl RgbImage {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: vec![color; width * height],
        }
    }

    /// Build from packed `RGBRGB…` bytes.
    pub fn from_raw(width: usize, height: usize, bytes: &[u8]) -> Result<Self, TrackError> {
        let expected = width * height * 3;
        if bytes.len() != expected {
            return Err(TrackError::BufferLength {
                expected,
                got: bytes.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels: bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        })
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        self.pixels[y * self.width + x] = c;
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    /// Grey raster from the red channel.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|p| p[0]));
        out
    }

    /// Pixels of a disc of radius `r` around pixel coordinates `(cx, cy)`,
    /// clipped to the image.
    fn disc(&self, cx: f64, cy: f64, r: f64) -> impl Iterator<Item = (usize, usize)> + '_ {
        let x0 = (cx - r).ceil().max(0.0) as usize;
        let y0 = (cy - r).ceil().max(0.0) as usize;
        let x1 = ((cx + r).floor().max(-1.0) as isize).min(self.width as isize - 1);
        let y1 = ((cy + r).floor().max(-1.0) as isize).min(self.height as isize - 1);
        (y0 as isize..=y1)
            .flat_map(move |y| (x0 as isize..=x1).map(move |x| (x, y)))
            .filter(move |&(x, y)| {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                dx * dx + dy * dy <= r * r
            })
            .map(|(x, y)| (x as usize, y as usize))
    }
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<(usize, usize, usize), TrackError> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(TrackError::Format(format!(
            "expected magic {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(TrackError::Format("truncated header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| TrackError::Format("bad header number".into()))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(TrackError::Format("missing separator after maxval".into()));
    }
    if fields[2] != 255 {
        return Err(TrackError::Format(format!("unsupported maxval {}", fields[2])));
    }
    Ok((fields[0], fields[1], pos + 1))
}

pub fn read_ppm(bytes: &[u8]) -> Result<RgbImage, TrackError> {
    let (w, h, offset) = parse_header(bytes, b"P6")?;
    let body = &bytes[offset..];
    if body.len() < w * h * 3 {
        return Err(TrackError::Format("truncated pixel data".into()));
    }
    RgbImage::from_raw(w, h, &body[..w * h * 3])
}

/// Read a `P5` graymap into a grey RGB image.
pub fn read_pgm(bytes: &[u8]) -> Result<RgbImage, TrackError> {
    let (w, h, offset) = parse_header(bytes, b"P5")?;
    let body = &bytes[offset..];
    if body.len() < w * h {
        return Err(TrackError::Format("truncated pixel data".into()));
    }
    Ok(RgbImage {
        width: w,
        height: h,
        pixels: body[..w * h].iter().map(|&v| [v, v, v]).collect(),
    })
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.ppm")
}

/// Load every `frame_NNNNNN.ppm` in `dir`, ordered by frame number.
pub fn read_frame_dir(dir: &Path) -> Result<Vec<Frame>, TrackError> {
    let mut files: Vec<(u64, PathBuf)> = fs::read_dir(dir)?
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            let name = path.file_name()?.to_str()?;
            let digits = name.strip_prefix("frame_")?.strip_suffix(".ppm")?;
            if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            Some((digits.parse().ok()?, path.clone()))
        })
        .collect();
    files.sort();
    files
        .iter()
        .map(|(_, p)| read_ppm(&fs::read(p)?))
        .collect()
}

pub fn write_frame_dir(dir: &Path, frames: &[Frame]) -> Result<(), TrackError> {
    fs::create_dir_all(dir)?;
    for (i, f) in frames.iter().enumerate() {
        fs::write(dir.join(frame_file_name(i)), f.to_ppm())?;
    }
    Ok(())
}

/// Coordinates `(x, y)` of pixels whose channels are all below `threshold`.
pub fn extract_dark_pixels(frame: &Frame, threshold: u8) -> Vec<(usize, usize)> {
    frame
        .pixels
        .iter()
        .enumerate()
        .filter(|(_, p)| p.iter().all(|&c| c < threshold))
        .map(|(i, _)| (i % frame.width, i / frame.width))
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct TrackOptions<'a> {
    pub threshold: u8,
    pub mm_per_px: f64,
    /// Ticks between consecutive frames.
    pub frame_ticks: u64,
    /// When set, `y` is flipped into the interior frame and regions are
    /// filled in by lookup.
    pub env: Option<&'a EnvironmentTemplate>,
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Recover a trajectory from frames via dark-pixel centroids. A frame with
/// no dark pixels repeats the previous position.
pub fn frames_to_trajectory(frames: &[Frame], opts: &TrackOptions<'_>) -> Result<Trajectory, TrackError> {
    if opts.threshold == 0 {
        return Err(TrackError::Threshold(0));
    }
    if !(opts.mm_per_px.is_finite() && opts.mm_per_px > 0.0) {
        return Err(TrackError::Scale(opts.mm_per_px));
    }
    let first = frames.first().ok_or(TrackError::NoFrames)?;
    let (w, h) = (first.width, first.height);
    let mut samples = Vec::with_capacity(frames.len());
    let mut last: Option<Point> = None;
    for (index, frame) in frames.iter().enumerate() {
        if frame.width != w || frame.height != h {
            return Err(TrackError::SizeMismatch {
                index,
                got_w: frame.width,
                got_h: frame.height,
                want_w: w,
                want_h: h,
            });
        }
        let dark = extract_dark_pixels(frame, opts.threshold);
        let pos = if dark.is_empty() {
            last.ok_or(TrackError::EmptyFirstFrame)?
        } else {
            let n = dark.len() as f64;
            let cx = dark.iter().map(|p| p.0 as f64).sum::<f64>() / n;
            let cy = dark.iter().map(|p| p.1 as f64).sum::<f64>() / n;
            let x = cx * opts.mm_per_px;
            let y = match opts.env {
                Some(env) => env.interior_height - cy * opts.mm_per_px,
                None => cy * opts.mm_per_px,
            };
            Point::new(round3(x), round3(y))
        };
        last = Some(pos);
        samples.push(Sample {
            tick: index as u64 * opts.frame_ticks,
            pos,
            mode: None,
            region: opts.env.and_then(|e| e.locate(pos).ok()),
            contact: false,
        });
    }
    Ok(Trajectory {
        trial_id: 0,
        rooms: opts.env.map_or(0, EnvironmentTemplate::room_count),
        samples,
    })
}

/// Blue → green → red colour ramp over normalised time; `u` is clamped to
/// `[0, 1]`.
pub fn time_color(u: f64) -> Rgb {
    let u = if u.is_nan() { 0.0 } else { u.clamp(0.0, 1.0) };
    let level = |v: f64| (255.0 * v).round() as u8;
    if u <= 0.5 {
        let s = u / 0.5;
        [0, level(s), level(1.0 - s)]
    } else {
        let s = (u - 0.5) / 0.5;
        [level(s), level(1.0 - s), 0]
    }
}

/// Millimetre ↔ pixel mapping for one environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelMap {
    pub px_per_mm: f64,
    pub width_mm: f64,
    pub height_mm: f64,
}

impl PixelMap {
    pub fn new(env: &EnvironmentTemplate, px_per_mm: f64) -> Result<Self, TrackError> {
        if !(px_per_mm.is_finite() && px_per_mm > 0.0) {
            return Err(TrackError::Scale(px_per_mm));
        }
        Ok(Self {
            px_per_mm,
            width_mm: env.interior_width,
            height_mm: env.interior_height,
        })
    }

    pub fn image_size(&self) -> (usize, usize) {
        (
            (self.width_mm * self.px_per_mm).ceil() as usize + 1,
            (self.height_mm * self.px_per_mm).ceil() as usize + 1,
        )
    }

    pub fn to_px(&self, p: Point) -> (f64, f64) {
        (p.x * self.px_per_mm, (self.height_mm - p.y) * self.px_per_mm)
    }

    pub fn to_mm(&self, px: f64, py: f64) -> Point {
        Point::new(px / self.px_per_mm, self.height_mm - py / self.px_per_mm)
    }
}

fn blank_with_walls(env: &EnvironmentTemplate, map: &PixelMap, wall: Rgb, outline_only: bool) -> RgbImage {
    let (w, h) = map.image_size();
    let solid: Vec<bool> = (0..w * h)
        .map(|i| env.is_solid(map.to_mm((i % w) as f64, (i / w) as f64)))
        .collect();
    let mut img = RgbImage::filled(w, h, WHITE);
    for y in 0..h {
        for x in 0..w {
            let border = x == 0 || y == 0 || x + 1 == w || y + 1 == h;
            let paint = if outline_only {
                border
                    || (solid[y * w + x]
                        && [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
                            .iter()
                            .any(|&(nx, ny)| !solid[ny * w + nx]))
            } else {
                solid[y * w + x]
            };
            if paint {
                img.set(x, y, wall);
            }
        }
    }
    img
}

/// White canvas, walls outlined in black, one disc per sample coloured by
/// `time_color(tick / last_tick)`; later samples draw over earlier ones.
pub fn render_time_overlay(
    traj: &Trajectory,
    env: &EnvironmentTemplate,
    px_per_mm: f64,
) -> Result<OverlayImage, TrackError> {
    let last = traj.last_tick().ok_or(TrackError::EmptyTrajectory)?;
    let first = traj.samples[0].tick;
    let map = PixelMap::new(env, px_per_mm)?;
    let mut img = blank_with_walls(env, &map, BLACK, true);
    let span = (last - first) as f64;
    for s in &traj.samples {
        let u = if span > 0.0 {
            (s.tick - first) as f64 / span
        } else {
            0.0
        };
        let color = time_color(u);
        let (cx, cy) = map.to_px(s.pos);
        let disc: Vec<_> = img.disc(cx, cy, DISC_RADIUS_PX).collect();
        for (x, y) in disc {
            img.set(x, y, color);
        }
    }
    Ok(img)
}

/// Per-pixel dwell counts: each sample adds one to every pixel of its disc.
pub fn dwell_counts(traj: &Trajectory, env: &EnvironmentTemplate, px_per_mm: f64) -> Result<(usize, usize, Vec<u64>), TrackError> {
    let map = PixelMap::new(env, px_per_mm)?;
    let (w, h) = map.image_size();
    let probe = RgbImage::filled(w, h, BLACK);
    let mut counts = vec![0u64; w * h];
    for s in &traj.samples {
        let (cx, cy) = map.to_px(s.pos);
        for (x, y) in probe.disc(cx, cy, DISC_RADIUS_PX) {
            counts[y * w + x] += 1;
        }
    }
    Ok((w, h, counts))
}

/// Grey activity map: intensity `round(255·count / max_count)`.
pub fn render_activity_map(
    traj: &Trajectory,
    env: &EnvironmentTemplate,
    px_per_mm: f64,
) -> Result<OverlayImage, TrackError> {
    if traj.is_empty() {
        return Err(TrackError::EmptyTrajectory);
    }
    let (w, h, counts) = dwell_counts(traj, env, px_per_mm)?;
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    Ok(RgbImage {
        width: w,
        height: h,
        pixels: counts
            .iter()
            .map(|&c| {
                let v = (255.0 * c as f64 / max).round() as u8;
                [v, v, v]
            })
            .collect(),
    })
}

/// Synthetic camera frame: white floor, grey walls, dark body disc at `pos`.
pub fn render_frame(pos: Point, env: &EnvironmentTemplate, px_per_mm: f64) -> Result<Frame, TrackError> {
    let map = PixelMap::new(env, px_per_mm)?;
    let mut img = blank_with_walls(env, &map, FRAME_WALL, false);
    let (cx, cy) = map.to_px(pos);
    let disc: Vec<_> = img.disc(cx, cy, DISC_RADIUS_PX).collect();
    for (x, y) in disc {
        img.set(x, y, FRAME_BODY);
    }
    Ok(img)
}

/// One synthetic frame per sample.
pub fn render_frames(traj: &Trajectory, env: &EnvironmentTemplate, px_per_mm: f64) -> Result<Vec<Frame>, TrackError> {
    let map = PixelMap::new(env, px_per_mm)?;
    let background = blank_with_walls(env, &map, FRAME_WALL, false);
    Ok(traj
        .samples
        .iter()
        .map(|s| {
            let mut img = background.clone();
            let (cx, cy) = map.to_px(s.pos);
            let disc: Vec<_> = img.disc(cx, cy, DISC_RADIUS_PX).collect();
            for (x, y) in disc {
                img.set(x, y, FRAME_BODY);
            }
            img
        })
        .collect())
}
