//! Region-based shape control.
//!
//! A target region is a set of lattice cells carried around by a moving
//! center. Robots outside the region are attracted to the nearest cell;
//! robots inside are pushed by mean shift toward the locally least-occupied
//! part of the region.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::positive;
use crate::vec2::Vec2;

/// Cells per bucket side in the nearest-cell index.
const BUCKET: i64 = 16;
/// Below this many cells nearest-cell queries scan linearly.
const LINEAR_SCAN_MAX: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub k_ro: f64,
    pub k_ri: f64,
    /// Radius (m) within which a robot occupies cells.
    pub r_occupy: f64,
    /// Sensing radius (m) for the mean-shift target.
    pub r_sen: f64,
}

impl ShapeParams {
    pub fn validate(&self) -> Result<()> {
        positive("k_ro", self.k_ro)?;
        // k_ri = 0 disables mean-shift exploration
        if !(self.k_ri.is_finite() && self.k_ri >= 0.0) {
            return Err(Error::validation("k_ri", "must be finite and >= 0"));
        }
        positive("r_occupy", self.r_occupy)?;
        positive("r_sen", self.r_sen)?;
        if self.r_sen <= self.r_occupy {
            return Err(Error::validation(
                "r_sen",
                format!(
                    "must exceed r_occupy ({}), got {}",
                    self.r_occupy, self.r_sen
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Bucket {
    lo: Vec2,
    hi: Vec2,
    cells: Vec<usize>,
}

/// Grid cells of a target shape, stored as integer lattice coordinates.
///
/// Cell `(i, j)` sits at offset `origin + (i·cell_size, j·cell_size)` from
/// the region center.
#[derive(Debug, Clone)]
pub struct RegionPattern {
    cell_size: f64,
    origin: Vec2,
    coords: Vec<(i64, i64)>,
    offsets: Vec<Vec2>,
    lookup: HashMap<(i64, i64), usize>,
    buckets: Vec<Bucket>,
}

impl PartialEq for RegionPattern {
    fn eq(&self, other: &Self) -> bool {
        self.cell_size == other.cell_size
            && self.origin == other.origin
            && self.coords == other.coords
    }
}

impl RegionPattern {
    pub fn new(cell_size: f64, origin: Vec2, coords: Vec<(i64, i64)>) -> Result<Self> {
        positive("cell_size", cell_size)?;
        if !origin.is_finite() {
            return Err(Error::validation("origin", "must be finite"));
        }
        if coords.is_empty() {
            return Err(Error::EmptyPattern { cell_size });
        }
        let mut lookup = HashMap::with_capacity(coords.len());
        for (k, &c) in coords.iter().enumerate() {
            if lookup.insert(c, k).is_some() {
                return Err(Error::validation(
                    "cells",
                    format!("duplicate lattice cell ({}, {})", c.0, c.1),
                ));
            }
        }
        let offsets: Vec<Vec2> = coords
            .iter()
            .map(|&(i, j)| origin + Vec2::new(i as f64 * cell_size, j as f64 * cell_size))
            .collect();

        let mut by_key: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (k, &(i, j)) in coords.iter().enumerate() {
            by_key
                .entry((i.div_euclid(BUCKET), j.div_euclid(BUCKET)))
                .or_default()
                .push(k);
        }
        let mut keys: Vec<_> = by_key.keys().copied().collect();
        keys.sort_unstable();
        let buckets = keys
            .into_iter()
            .map(|key| {
                let cells = by_key.remove(&key).unwrap_or_default();
                let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
                let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for &k in &cells {
                    let o = offsets[k];
                    lo = Vec2::new(lo.x.min(o.x), lo.y.min(o.y));
                    hi = Vec2::new(hi.x.max(o.x), hi.y.max(o.y));
                }
                Bucket { lo, hi, cells }
            })
            .collect();

        Ok(RegionPattern {
            cell_size,
            origin,
            coords,
            offsets,
            lookup,
            buckets,
        })
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn coords(&self) -> &[(i64, i64)] {
        &self.coords
    }

    /// Cell centers relative to the region center, in cell-list order.
    pub fn offsets(&self) -> &[Vec2] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Continuous lattice coordinates of a point given relative to the center.
    fn lattice(&self, rel: Vec2) -> (f64, f64) {
        (
            (rel.x - self.origin.x) / self.cell_size,
            (rel.y - self.origin.y) / self.cell_size,
        )
    }

    /// Whether `rel` lies within `cell_size/√2` of some cell center.
    pub fn covers(&self, rel: Vec2) -> bool {
        let (fi, fj) = self.lattice(rel);
        if !fi.is_finite() || !fj.is_finite() {
            return false;
        }
        let (ci, cj) = (fi.round() as i64, fj.round() as i64);
        let reach2 = 0.5 * self.cell_size * self.cell_size;
        for j in cj - 1..=cj + 1 {
            for i in ci - 1..=ci + 1 {
                if let Some(&k) = self.lookup.get(&(i, j)) {
                    if rel.distance_squared(self.offsets[k]) <= reach2 {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Index of the cell nearest to `rel`; ties go to the earlier cell.
    pub fn nearest_index(&self, rel: Vec2) -> usize {
        let better = |d: f64, k: usize, best: (f64, usize)| d < best.0 || (d == best.0 && k < best.1);
        let mut best = (f64::INFINITY, usize::MAX);
        if self.len() <= LINEAR_SCAN_MAX {
            for (k, o) in self.offsets.iter().enumerate() {
                let d = rel.distance_squared(*o);
                if better(d, k, best) {
                    best = (d, k);
                }
            }
            return best.1;
        }
        let mut order: Vec<(f64, usize)> = self
            .buckets
            .iter()
            .enumerate()
            .map(|(b, bk)| {
                let dx = (bk.lo.x - rel.x).max(0.0).max(rel.x - bk.hi.x);
                let dy = (bk.lo.y - rel.y).max(0.0).max(rel.y - bk.hi.y);
                (dx * dx + dy * dy, b)
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (lb, b) in order {
            if lb > best.0 {
                break;
            }
            for &k in &self.buckets[b].cells {
                let d = rel.distance_squared(self.offsets[k]);
                if better(d, k, best) {
                    best = (d, k);
                }
            }
        }
        best.1
    }

    /// Indices of cells within `radius` of `rel`, in ascending cell order.
    pub fn cells_within(&self, rel: Vec2, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let span = (radius / self.cell_size).ceil() as i64 + 1;
        let side = (2 * span + 1) as usize;
        let mut out: Vec<usize> = if side.saturating_mul(side) >= self.len() {
            (0..self.len())
                .filter(|&k| rel.distance_squared(self.offsets[k]) <= r2)
                .collect()
        } else {
            let (fi, fj) = self.lattice(rel);
            let (ci, cj) = (fi.round() as i64, fj.round() as i64);
            let mut v = Vec::new();
            for j in cj - span..=cj + span {
                for i in ci - span..=ci + span {
                    if let Some(&k) = self.lookup.get(&(i, j)) {
                        if rel.distance_squared(self.offsets[k]) <= r2 {
                            v.push(k);
                        }
                    }
                }
            }
            v.sort_unstable();
            v
        };
        out.shrink_to_fit();
        out
    }

    /// Serializes to the plain-text pattern format:
    ///
    /// ```text
    /// # gibbsflock pattern v1
    /// cell_size <f64>
    /// origin <f64> <f64>
    /// cells <count>
    /// <i> <j>        (one line per cell)
    /// ```
    ///
    /// Floats are written in shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(16 * self.len() + 64);
        s.push_str("# gibbsflock pattern v1\n");
        let _ = writeln!(s, "cell_size {}", self.cell_size);
        let _ = writeln!(s, "origin {} {}", self.origin.x, self.origin.y);
        let _ = writeln!(s, "cells {}", self.len());
        for &(i, j) in &self.coords {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: &str| Error::parse(path, format!("line {line}: {msg}"));
        let mut cell_size = None;
        let mut origin = None;
        let mut count = None;
        let mut coords = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap_or_default();
            match head {
                "cell_size" => {
                    let v = parts.next().and_then(|t| t.parse::<f64>().ok());
                    cell_size = Some(v.ok_or_else(|| err(line_no, "expected `cell_size <number>`"))?);
                }
                "origin" => {
                    let x = parts.next().and_then(|t| t.parse::<f64>().ok());
                    let y = parts.next().and_then(|t| t.parse::<f64>().ok());
                    match (x, y) {
                        (Some(x), Some(y)) => origin = Some(Vec2::new(x, y)),
                        _ => return Err(err(line_no, "expected `origin <x> <y>`")),
                    }
                }
                "cells" => {
                    let v = parts.next().and_then(|t| t.parse::<usize>().ok());
                    count = Some(v.ok_or_else(|| err(line_no, "expected `cells <count>`"))?);
                }
                _ => {
                    let i = head.parse::<i64>().ok();
                    let j = parts.next().and_then(|t| t.parse::<i64>().ok());
                    match (i, j, parts.next()) {
                        (Some(i), Some(j), None) => coords.push((i, j)),
                        _ => return Err(err(line_no, "expected two integer lattice coordinates")),
                    }
                }
            }
        }
        let cell_size = cell_size.ok_or_else(|| Error::parse(path, "missing `cell_size`"))?;
        let origin = origin.unwrap_or(Vec2::ZERO);
        if let Some(c) = count {
            if c != coords.len() {
                return Err(Error::parse(
                    path,
                    format!("header declares {c} cells but {} were listed", coords.len()),
                ));
            }
        }
        RegionPattern::new(cell_size, origin, coords)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text, path)
    }
}

/// A closed shape to be rasterized into a [`RegionPattern`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outline {
    /// Outer ring with optional holes; vertices in either winding.
    Polygon {
        outer: Vec<Vec2>,
        #[serde(default)]
        holes: Vec<Vec<Vec2>>,
    },
    /// ASCII bitmap, first row on top. `set` characters mark filled pixels.
    Bitmap {
        pixel_size: f64,
        rows: Vec<String>,
        #[serde(default = "default_set_char")]
        set: char,
    },
    Disk { radius: f64 },
}

fn default_set_char() -> char {
    '#'
}

fn ring_area_centroid(ring: &[Vec2]) -> (f64, Vec2) {
    let n = ring.len();
    let mut a2 = 0.0;
    let mut c = Vec2::ZERO;
    for k in 0..n {
        let p = ring[k];
        let q = ring[(k + 1) % n];
        let cross = p.x * q.y - q.x * p.y;
        a2 += cross;
        c += (p + q) * cross;
    }
    if a2 == 0.0 {
        return (0.0, Vec2::ZERO);
    }
    (0.5 * a2.abs(), c / (3.0 * a2))
}

fn point_in_ring(p: Vec2, ring: &[Vec2]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

impl Outline {
    pub fn validate(&self) -> Result<()> {
        match self {
            Outline::Polygon { outer, holes } => {
                for ring in std::iter::once(outer).chain(holes) {
                    if ring.len() < 3 || ring.iter().any(|p| !p.is_finite()) {
                        return Err(Error::validation(
                            "polygon",
                            "rings need at least 3 finite vertices",
                        ));
                    }
                }
                if ring_area_centroid(outer).0 <= 0.0 {
                    return Err(Error::validation("polygon", "outer ring has zero area"));
                }
            }
            Outline::Bitmap {
                pixel_size, rows, set,
            } => {
                positive("pixel_size", *pixel_size)?;
                if !rows.iter().any(|r| r.contains(*set)) {
                    return Err(Error::validation("bitmap", "no pixel is set"));
                }
            }
            Outline::Disk { radius } => positive("radius", *radius)?,
        }
        Ok(())
    }

    /// Uniformly scales the outline about the frame origin.
    pub fn scaled(&self, factor: f64) -> Outline {
        match self {
            Outline::Polygon { outer, holes } => Outline::Polygon {
                outer: outer.iter().map(|&p| p * factor).collect(),
                holes: holes
                    .iter()
                    .map(|h| h.iter().map(|&p| p * factor).collect())
                    .collect(),
            },
            Outline::Bitmap {
                pixel_size, rows, set,
            } => Outline::Bitmap {
                pixel_size: pixel_size * factor,
                rows: rows.clone(),
                set: *set,
            },
            Outline::Disk { radius } => Outline::Disk {
                radius: radius * factor,
            },
        }
    }

    fn bounds(&self) -> (Vec2, Vec2) {
        match self {
            Outline::Polygon { outer, .. } => {
                let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
                let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for p in outer {
                    lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                    hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
                }
                (lo, hi)
            }
            Outline::Bitmap {
                pixel_size, rows, ..
            } => {
                let w = rows.iter().map(|r| r.chars().count()).max().unwrap_or(0);
                (
                    Vec2::ZERO,
                    Vec2::new(w as f64 * pixel_size, rows.len() as f64 * pixel_size),
                )
            }
            Outline::Disk { radius } => (Vec2::new(-radius, -radius), Vec2::new(*radius, *radius)),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Outline::Polygon { outer, holes } => {
                point_in_ring(p, outer) && !holes.iter().any(|h| point_in_ring(p, h))
            }
            Outline::Bitmap {
                pixel_size, rows, set,
            } => {
                let h = rows.len() as f64;
                let col = (p.x / pixel_size).floor();
                let row_from_bottom = (p.y / pixel_size).floor();
                if col < 0.0 || row_from_bottom < 0.0 || row_from_bottom >= h {
                    return false;
                }
                let row = (h - 1.0 - row_from_bottom) as usize;
                rows[row].chars().nth(col as usize) == Some(*set)
            }
            Outline::Disk { radius } => p.norm_squared() < radius * radius,
        }
    }

    /// Area centroid of the filled region.
    pub fn centroid(&self) -> Vec2 {
        match self {
            Outline::Polygon { outer, holes } => {
                let (ao, co) = ring_area_centroid(outer);
                let mut a = ao;
                let mut m = co * ao;
                for h in holes {
                    let (ah, ch) = ring_area_centroid(h);
                    a -= ah;
                    m -= ch * ah;
                }
                if a > 0.0 {
                    m / a
                } else {
                    co
                }
            }
            Outline::Bitmap {
                pixel_size, rows, set,
            } => {
                let h = rows.len();
                let mut sum = Vec2::ZERO;
                let mut n = 0usize;
                for (r, line) in rows.iter().enumerate() {
                    for (c, ch) in line.chars().enumerate() {
                        if ch == *set {
                            sum += Vec2::new(
                                (c as f64 + 0.5) * pixel_size,
                                ((h - 1 - r) as f64 + 0.5) * pixel_size,
                            );
                            n += 1;
                        }
                    }
                }
                if n == 0 {
                    Vec2::ZERO
                } else {
                    sum / n as f64
                }
            }
            Outline::Disk { .. } => Vec2::ZERO,
        }
    }

    pub fn load(path: &Path) -> Result<Outline> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct OutlineFile {
            #[serde(default = "one")]
            scale: f64,
            #[serde(flatten)]
            outline: Outline,
        }
        fn one() -> f64 {
            1.0
        }
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: OutlineFile =
            toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        positive("scale", file.scale)?;
        let outline = if file.scale == 1.0 {
            file.outline
        } else {
            file.outline.scaled(file.scale)
        };
        outline.validate()?;
        Ok(outline)
    }
}

/// Lattice cell centers `((i + ½)·s, (j + ½)·s)` inside the outline,
/// expressed relative to the outline centroid.
///
/// Cells are listed row by row from the bottom, left to right.
pub fn rasterize(outline: &Outline, cell_size: f64) -> Result<RegionPattern> {
    positive("cell_size", cell_size)?;
    outline.validate()?;
    let (lo, hi) = outline.bounds();
    let i0 = (lo.x / cell_size - 0.5).floor() as i64;
    let i1 = (hi.x / cell_size - 0.5).ceil() as i64;
    let j0 = (lo.y / cell_size - 0.5).floor() as i64;
    let j1 = (hi.y / cell_size - 0.5).ceil() as i64;
    let mut coords = Vec::new();
    for j in j0..=j1 {
        for i in i0..=i1 {
            let c = Vec2::new((i as f64 + 0.5) * cell_size, (j as f64 + 0.5) * cell_size);
            if outline.contains(c) {
                coords.push((i, j));
            }
        }
    }
    if coords.is_empty() {
        return Err(Error::EmptyPattern { cell_size });
    }
    let centroid = outline.centroid();
    let origin = Vec2::new(0.5 * cell_size, 0.5 * cell_size) - centroid;
    RegionPattern::new(cell_size, origin, coords)
}

#[derive(Debug, Clone)]
pub struct PatternSwitch {
    pub time: f64,
    pub pattern: Arc<RegionPattern>,
}

/// Preset motion of the region: piecewise-constant velocity segments and
/// timed pattern switches.
#[derive(Debug, Clone)]
pub struct RegionSchedule {
    pub initial_center: Vec2,
    /// `(velocity, duration)` pairs applied in order.
    pub segments: Vec<(Vec2, f64)>,
    pub initial_pattern: Arc<RegionPattern>,
    /// Sorted by time.
    pub switches: Vec<PatternSwitch>,
}

#[derive(Debug, Clone)]
pub struct RegionState {
    pub center: Vec2,
    pub active_pattern: Arc<RegionPattern>,
    pub t: f64,
}

impl RegionSchedule {
    pub fn stationary(center: Vec2, pattern: RegionPattern) -> Self {
        RegionSchedule {
            initial_center: center,
            segments: Vec::new(),
            initial_pattern: Arc::new(pattern),
            switches: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.initial_center.is_finite() {
            return Err(Error::validation("region.center", "must be finite"));
        }
        for (k, (v, d)) in self.segments.iter().enumerate() {
            if !v.is_finite() || !(d.is_finite() && *d > 0.0) {
                return Err(Error::validation(
                    format!("region.segments[{k}]"),
                    "velocity must be finite and duration > 0",
                ));
            }
        }
        for w in self.switches.windows(2) {
            if w[1].time < w[0].time {
                return Err(Error::validation(
                    "region.switches",
                    "switch times must be non-decreasing",
                ));
            }
        }
        if self.switches.iter().any(|s| !(s.time >= 0.0)) {
            return Err(Error::validation("region.switches", "times must be >= 0"));
        }
        Ok(())
    }

    /// Region velocity at time `t`; zero after the last segment.
    pub fn velocity_at(&self, t: f64) -> Vec2 {
        let mut start = 0.0;
        for &(v, d) in &self.segments {
            if t < start + d {
                return v;
            }
            start += d;
        }
        Vec2::ZERO
    }

    pub fn region_at(&self, t: f64) -> RegionState {
        let t = t.max(0.0);
        let mut center = self.initial_center;
        let mut start = 0.0;
        for &(v, d) in &self.segments {
            if t >= start + d {
                center += v * d;
                start += d;
            } else {
                center += v * (t - start);
                break;
            }
        }
        let active_pattern = self
            .switches
            .iter()
            .rev()
            .find(|s| s.time <= t)
            .map(|s| Arc::clone(&s.pattern))
            .unwrap_or_else(|| Arc::clone(&self.initial_pattern));
        RegionState {
            center,
            active_pattern,
            t,
        }
    }
}

impl RegionState {
    pub fn contains(&self, p: Vec2) -> bool {
        self.active_pattern.covers(p - self.center)
    }

    pub fn cell_position(&self, k: usize) -> Vec2 {
        self.center + self.active_pattern.offsets()[k]
    }

    pub fn cell_positions(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.active_pattern.offsets().iter().map(|&o| self.center + o)
    }
}

/// Absolute position of the cell nearest to `p`.
pub fn nearest_grid(p: Vec2, region: &RegionState) -> Vec2 {
    let k = region.active_pattern.nearest_index(p - region.center);
    region.cell_position(k)
}

/// Cells within `r_sen` of `p` that no other robot occupies. `others` must
/// not contain the querying robot.
pub fn unoccupied_cells(
    p: Vec2,
    others: &[Vec2],
    region: &RegionState,
    params: &ShapeParams,
) -> Vec<Vec2> {
    let reach = params.r_sen + params.r_occupy;
    let near: Vec<Vec2> = others
        .iter()
        .copied()
        .filter(|q| q.distance_squared(p) <= reach * reach)
        .collect();
    let occ2 = params.r_occupy * params.r_occupy;
    region
        .active_pattern
        .cells_within(p - region.center, params.r_sen)
        .into_iter()
        .map(|k| region.cell_position(k))
        .filter(|c| near.iter().all(|q| q.distance_squared(*c) > occ2))
        .collect()
}

/// Mean-shift kernel: 1 for `z ≤ 0`, `½(1 + cos πz)` on `(0, 1)`, 0 for `z ≥ 1`.
pub fn kernel(z: f64) -> f64 {
    if z <= 0.0 {
        1.0
    } else if z < 1.0 {
        0.5 * (1.0 + (PI * z).cos())
    } else {
        0.0
    }
}

/// Kernel-weighted mean of `cells`; falls back to `p` when every weight is 0.
pub fn mean_shift_target(p: Vec2, cells: &[Vec2], r_sen: f64) -> Vec2 {
    let mut wsum = 0.0;
    let mut acc = Vec2::ZERO;
    for &c in cells {
        let w = kernel(p.distance(c) / r_sen);
        if w > 0.0 {
            wsum += w;
            acc += c * w;
        }
    }
    if wsum > 0.0 {
        acc / wsum
    } else {
        p
    }
}

/// The two halves of the shape energy. Exactly one is non-zero-gated at a
/// time: attraction outside the region, exploration inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeEnergy {
    pub attraction: f64,
    pub exploration: f64,
}

impl ShapeEnergy {
    pub fn total(&self) -> f64 {
        self.attraction + self.exploration
    }
}

/// Region-attraction energy `k_ro·(exp‖p − p_target‖ − 1)`, zero inside.
pub fn psi_ro(p: Vec2, region: &RegionState, params: &ShapeParams) -> f64 {
    if region.active_pattern.is_empty() || region.contains(p) {
        return 0.0;
    }
    params.k_ro * (p.distance(nearest_grid(p, region)).exp() - 1.0)
}

pub fn shape_energy(
    p: Vec2,
    region: &RegionState,
    others: &[Vec2],
    params: &ShapeParams,
) -> ShapeEnergy {
    if region.active_pattern.is_empty() {
        log::warn!("empty region pattern; shape control disabled");
        return ShapeEnergy {
            attraction: 0.0,
            exploration: 0.0,
        };
    }
    if !region.contains(p) {
        let target = nearest_grid(p, region);
        return ShapeEnergy {
            attraction: params.k_ro * (p.distance(target).exp() - 1.0),
            exploration: 0.0,
        };
    }
    let exploration = if params.k_ri > 0.0 {
        let free = unoccupied_cells(p, others, region, params);
        let ms = mean_shift_target(p, &free, params.r_sen);
        params.k_ri * (p.distance(ms).exp() - 1.0)
    } else {
        0.0
    };
    ShapeEnergy {
        attraction: 0.0,
        exploration,
    }
}

/// Shape energy for many nearby query points of one robot.
///
/// Occupancy by the other robots does not depend on the query point, so the
/// free cells are collected once over `r_sen + reach` around `center_p` and
/// narrowed per query. Results equal [`shape_energy`] for any query within
/// `reach` of `center_p`.
#[derive(Debug, Clone)]
pub struct ShapeEnergyCache<'a> {
    region: &'a RegionState,
    params: &'a ShapeParams,
    /// Free cell indices in ascending order.
    free: Vec<usize>,
}

impl<'a> ShapeEnergyCache<'a> {
    pub fn new(
        center_p: Vec2,
        reach: f64,
        others: &[Vec2],
        region: &'a RegionState,
        params: &'a ShapeParams,
    ) -> Self {
        let free = if params.k_ri > 0.0 && !region.active_pattern.is_empty() {
            let radius = params.r_sen + reach + 1e-9;
            let around = radius + params.r_occupy;
            let near: Vec<Vec2> = others
                .iter()
                .copied()
                .filter(|q| q.distance_squared(center_p) <= around * around)
                .collect();
            let occ2 = params.r_occupy * params.r_occupy;
            region
                .active_pattern
                .cells_within(center_p - region.center, radius)
                .into_iter()
                .filter(|&k| {
                    let c = region.cell_position(k);
                    near.iter().all(|q| q.distance_squared(c) > occ2)
                })
                .collect()
        } else {
            Vec::new()
        };
        ShapeEnergyCache {
            region,
            params,
            free,
        }
    }

    pub fn energy(&self, p: Vec2) -> ShapeEnergy {
        let region = self.region;
        let params = self.params;
        if region.active_pattern.is_empty() || !region.contains(p) || params.k_ri <= 0.0 {
            return shape_energy(p, region, &[], params);
        }
        let rel = p - region.center;
        let r2 = params.r_sen * params.r_sen;
        let offsets = region.active_pattern.offsets();
        let cells: Vec<Vec2> = self
            .free
            .iter()
            .filter(|&&k| rel.distance_squared(offsets[k]) <= r2)
            .map(|&k| region.cell_position(k))
            .collect();
        let ms = mean_shift_target(p, &cells, params.r_sen);
        ShapeEnergy {
            attraction: 0.0,
            exploration: params.k_ri * (p.distance(ms).exp() - 1.0),
        }
    }
}

/// Total shape-control energy for a robot at `p`.
pub fn psi_r(p: Vec2, region: &RegionState, others: &[Vec2], params: &ShapeParams) -> f64 {
    shape_energy(p, region, others, params).total()
}

/// Standard deviation over mean of per-cell occupancy counts; `+∞` when no
/// cell is occupied.
pub fn occupancy_cv(positions: &[Vec2], region: &RegionState, r_occupy: f64) -> f64 {
    let pat = &region.active_pattern;
    let mut counts = vec![0u32; pat.len()];
    for &p in positions {
        for k in pat.cells_within(p - region.center, r_occupy) {
            counts[k] += 1;
        }
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return f64::INFINITY;
    }
    let var = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    var.sqrt() / mean
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: f64) -> Outline {
        Outline::Polygon {
            outer: vec![
                Vec2::ZERO,
                Vec2::new(side, 0.0),
                Vec2::new(side, side),
                Vec2::new(0.0, side),
            ],
            holes: vec![],
        }
    }

    fn bar() -> RegionPattern {
        RegionPattern::new(0.1, Vec2::new(-0.5, 0.0), (0..11).map(|i| (i, 0)).collect()).unwrap()
    }

    #[test]
    fn unit_square_has_four_cells() {
        let pat = rasterize(&square(1.0), 0.5).unwrap();
        assert_eq!(pat.len(), 4);
        let mut offs: Vec<_> = pat.offsets().to_vec();
        offs.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        assert_eq!(offs[0], Vec2::new(-0.25, -0.25));
        assert_eq!(offs[3], Vec2::new(0.25, 0.25));
    }

    #[test]
    fn rasterize_is_deterministic() {
        let o = Outline::Disk { radius: 0.7 };
        assert_eq!(rasterize(&o, 0.05).unwrap(), rasterize(&o, 0.05).unwrap());
    }

    #[test]
    fn tiny_outline_is_an_error() {
        let err = rasterize(&square(0.01), 1.0).unwrap_err();
        assert!(matches!(err, Error::EmptyPattern { .. }));
    }

    #[test]
    fn bitmap_rasterizes_pixels() {
        let o = Outline::Bitmap {
            pixel_size: 1.0,
            rows: vec!["#.".into(), "##".into()],
            set: '#',
        };
        let pat = rasterize(&o, 0.5).unwrap();
        assert_eq!(pat.len(), 12);
    }

    #[test]
    fn polygon_hole_is_excluded() {
        let o = Outline::Polygon {
            outer: vec![
                Vec2::ZERO,
                Vec2::new(3.0, 0.0),
                Vec2::new(3.0, 3.0),
                Vec2::new(0.0, 3.0),
            ],
            holes: vec![vec![
                Vec2::new(1.0, 1.0),
                Vec2::new(2.0, 1.0),
                Vec2::new(2.0, 2.0),
                Vec2::new(1.0, 2.0),
            ]],
        };
        assert_eq!(rasterize(&o, 1.0).unwrap().len(), 8);
        assert!(o.centroid().distance(Vec2::new(1.5, 1.5)) < 1e-12);
    }

    #[test]
    fn pattern_text_roundtrip() {
        let pat = rasterize(&Outline::Disk { radius: 0.33 }, 0.07).unwrap();
        let back = RegionPattern::from_text(&pat.to_text(), Path::new("mem")).unwrap();
        assert_eq!(pat, back);
    }

    #[test]
    fn pattern_text_errors() {
        let p = Path::new("mem");
        assert!(RegionPattern::from_text("cells 1\n0 0\n", p).is_err());
        assert!(RegionPattern::from_text("cell_size 0.1\ncells 2\n0 0\n", p).is_err());
        assert!(RegionPattern::from_text("cell_size 0.1\n0 0\n0 0\n", p).is_err());
        assert!(RegionPattern::from_text("cell_size 0.1\n0 x\n", p).is_err());
    }

    #[test]
    fn schedule_positions_and_switches() {
        let a = bar();
        let b = rasterize(&square(1.0), 0.5).unwrap();
        let sched = RegionSchedule {
            initial_center: Vec2::new(1.0, 2.0),
            segments: vec![(Vec2::new(0.12, 0.0), 20.0), (Vec2::new(0.0, -0.1), 10.0)],
            initial_pattern: Arc::new(a.clone()),
            switches: vec![PatternSwitch {
                time: 30.0,
                pattern: Arc::new(b.clone()),
            }],
        };
        assert_eq!(sched.region_at(0.0).center, Vec2::new(1.0, 2.0));
        let c = sched.region_at(10.0).center;
        assert!(c.distance(Vec2::new(2.2, 2.0)) < 1e-12);
        let end = sched.region_at(25.0).center;
        assert!(end.distance(Vec2::new(3.4, 1.5)) < 1e-12);
        let late = sched.region_at(100.0);
        assert!(late.center.distance(Vec2::new(3.4, 1.0)) < 1e-12);
        assert_eq!(*sched.region_at(29.999).active_pattern, a);
        assert_eq!(*sched.region_at(30.0).active_pattern, b);
        assert_eq!(sched.velocity_at(5.0), Vec2::new(0.12, 0.0));
        assert_eq!(sched.velocity_at(31.0), Vec2::ZERO);
    }

    #[test]
    fn nearest_grid_basic() {
        let sched = RegionSchedule::stationary(Vec2::new(5.0, 0.0), bar());
        let r = sched.region_at(0.0);
        let cell = r.cell_position(3);
        assert_eq!(nearest_grid(cell, &r), cell);
        let left = nearest_grid(Vec2::new(-10.0, 0.3), &r);
        assert_eq!(left, r.cell_position(0));
    }

    #[test]
    fn kernel_shape() {
        assert_eq!(kernel(-1.0), 1.0);
        assert_eq!(kernel(0.0), 1.0);
        assert!((kernel(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(kernel(1.0), 0.0);
        assert_eq!(kernel(3.0), 0.0);
        assert!(kernel(1e-9) > 1.0 - 1e-15);
        assert!(kernel(1.0 - 1e-9) < 1e-15);
    }

    #[test]
    fn mean_shift_cases() {
        let p = Vec2::new(1.0, 1.0);
        let c = Vec2::new(1.2, 1.1);
        assert_eq!(mean_shift_target(p, &[c], 0.5), c);
        let pair = [Vec2::new(0.8, 1.0), Vec2::new(1.2, 1.0)];
        assert!(mean_shift_target(p, &pair, 0.5).distance(p) < 1e-15);
        let edge = Vec2::new(1.5, 1.0);
        assert_eq!(mean_shift_target(p, &[edge, c], 0.5), c);
        assert_eq!(mean_shift_target(p, &[edge], 0.5), p);
    }

    #[test]
    fn unoccupied_excludes_others() {
        let sched = RegionSchedule::stationary(Vec2::ZERO, bar());
        let r = sched.region_at(0.0);
        let params = ShapeParams {
            k_ro: 25.0,
            k_ri: 10.0,
            r_occupy: 0.05,
            r_sen: 0.25,
        };
        let p = r.cell_position(5);
        let all = unoccupied_cells(p, &[], &r, &params);
        assert_eq!(all.len(), 5);
        let blocked = unoccupied_cells(p, &[r.cell_position(6)], &r, &params);
        assert_eq!(blocked.len(), 4);
        assert!(!blocked.contains(&r.cell_position(6)));
    }

    #[test]
    fn shape_energy_gating() {
        let sched = RegionSchedule::stationary(Vec2::ZERO, bar());
        let r = sched.region_at(0.0);
        let params = ShapeParams {
            k_ro: 25.0,
            k_ri: 10.0,
            r_occupy: 0.3,
            r_sen: 0.5,
        };
        let outside = r.cell_position(0) + Vec2::new(0.0, 1.0);
        let e = shape_energy(outside, &r, &[], &params);
        assert_eq!(e.exploration, 0.0);
        assert!((e.attraction - 25.0 * (1f64.exp() - 1.0)).abs() < 1e-9);
        assert!((e.attraction - 42.957).abs() < 1e-3);

        // center of a symmetric bar with no neighbors: mean shift is a no-op
        let mid = r.cell_position(5);
        let e = shape_energy(mid, &r, &[], &params);
        assert_eq!(e.attraction, 0.0);
        assert!(e.exploration.abs() < 1e-12);
        assert_eq!(psi_ro(mid, &r, &params), 0.0);
    }

    #[test]
    fn occupancy_cv_cases() {
        let sched = RegionSchedule::stationary(Vec2::ZERO, bar());
        let r = sched.region_at(0.0);
        assert!(occupancy_cv(&[], &r, 0.05).is_infinite());
        let even: Vec<Vec2> = r.cell_positions().collect();
        assert!(occupancy_cv(&even, &r, 0.01) < 1e-12);
        let corner = vec![r.cell_position(0); 4];
        assert!(occupancy_cv(&corner, &r, 0.01) > 1.0);
    }

    #[test]
    fn energy_cache_matches_direct_evaluation() {
        let pat = rasterize(&Outline::Disk { radius: 0.9 }, 0.05).unwrap();
        let region = RegionState {
            center: Vec2::new(0.2, -0.1),
            active_pattern: Arc::new(pat),
            t: 0.0,
        };
        let params = ShapeParams {
            k_ro: 25.0,
            k_ri: 10.0,
            r_occupy: 0.3,
            r_sen: 0.5,
        };
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..200 {
            let p = Vec2::new(next() * 1.3, next() * 1.3);
            let others: Vec<Vec2> = (0..6).map(|_| Vec2::new(next(), next())).collect();
            let cache = ShapeEnergyCache::new(p, 0.01, &others, &region, &params);
            for _ in 0..10 {
                let q = p + Vec2::new(next(), next()) * 0.007;
                assert_eq!(cache.energy(q), shape_energy(q, &region, &others, &params));
            }
        }
    }
}
