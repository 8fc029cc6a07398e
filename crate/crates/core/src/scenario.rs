//! Scenario files: a TOML description of robots, obstacles, the target
//! region and all parameters, resolved against an optional preset.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::controller::ControllerParams;
use crate::error::{Error, Result};
use crate::model::{RobotSpec, RobotState};
use crate::neighbors::Obstacle;
use crate::potentials::PotentialParams;
use crate::presets::Preset;
use crate::shape::{rasterize, Outline, PatternSwitch, RegionPattern, RegionSchedule, ShapeParams};
use crate::vec2::Vec2;

/// Rejection-sampling attempts allowed per requested robot.
pub const PLACEMENT_ATTEMPTS_PER_ROBOT: usize = 10_000;

type Xy = [f64; 2];

fn v(xy: Xy) -> Vec2 {
    Vec2::new(xy[0], xy[1])
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    description: Option<String>,
    preset: Option<String>,
    #[serde(default)]
    seed: u64,
    dt: Option<f64>,
    steps: usize,
    robot: RobotSection,
    placement: PlacementSection,
    #[serde(default)]
    params: ParamsSection,
    desired_velocity: Option<VelocitySchedule>,
    #[serde(default)]
    obstacles: Vec<ObstacleSection>,
    region: Option<RegionSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotSection {
    r_coll: f64,
    v_max: f64,
    u_max: f64,
    k_neighbors: usize,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum PlacementSection {
    Line {
        count: usize,
        start: Xy,
        spacing: f64,
        #[serde(default = "default_direction")]
        direction: Xy,
        #[serde(default)]
        velocity: Xy,
    },
    Random {
        count: usize,
        min: Xy,
        max: Xy,
        min_sep: Option<f64>,
        #[serde(default)]
        velocity: Xy,
    },
    Explicit {
        positions: Vec<Xy>,
        #[serde(default)]
        velocities: Vec<Xy>,
    },
}

fn default_direction() -> Xy {
    [1.0, 0.0]
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsSection {
    k_a: Option<f64>,
    r_a: Option<f64>,
    r_f: Option<f64>,
    k_align: Option<f64>,
    k_l: Option<f64>,
    k_o: Option<f64>,
    d_beta: Option<f64>,
    h: Option<f64>,
    k_acc: Option<f64>,
    k_c: Option<f64>,
    k_d: Option<f64>,
    k_vel: Option<f64>,
    k_v: Option<f64>,
    range_phi_beta: Option<f64>,
    t_p: Option<f64>,
    k_ro: Option<f64>,
    k_ri: Option<f64>,
    r_occupy: Option<f64>,
    r_sen: Option<f64>,
    n_a: Option<usize>,
    delta_u: Option<f64>,
    alpha: Option<f64>,
    mf_iterations: Option<usize>,
    mf_tolerance: Option<f64>,
    beta_from_predicted: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Segment {
    velocity: Xy,
    duration: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VelocitySchedule {
    velocity: Option<Xy>,
    #[serde(default)]
    segments: Vec<Segment>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ObstacleSection {
    Circle { center: Xy, radius: f64 },
    Segment { a: Xy, b: Xy },
    /// Open polyline split into one segment obstacle per edge.
    Wall { points: Vec<Xy> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternSource {
    /// Pre-rasterized pattern file.
    file: Option<PathBuf>,
    /// Outline file to rasterize.
    outline: Option<PathBuf>,
    /// Disk radius (m) to rasterize.
    disk: Option<f64>,
    cell_size: Option<f64>,
    #[serde(default = "one")]
    scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SwitchSection {
    time: f64,
    pattern: PatternSource,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionSection {
    center: Xy,
    #[serde(default)]
    segments: Vec<Segment>,
    pattern: PatternSource,
    #[serde(default)]
    switches: Vec<SwitchSection>,
}

/// How initial positions were produced, kept for the manifest.
#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    Line,
    Random { min: Vec2, max: Vec2, min_sep: f64 },
    Explicit,
}

/// Piecewise-constant desired flocking velocity; zero past the end.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    pub segments: Vec<(Vec2, f64)>,
    /// Used after the segments run out.
    pub tail: Vec2,
}

impl VelocityProfile {
    pub fn at(&self, t: f64) -> Vec2 {
        let mut start = 0.0;
        for &(v, d) in &self.segments {
            if t < start + d {
                return v;
            }
            start += d;
        }
        self.tail
    }
}

/// Fully resolved run description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub preset: Option<Preset>,
    pub seed: u64,
    pub dt: f64,
    pub steps: usize,
    pub spec: RobotSpec,
    pub potentials: PotentialParams,
    pub shape: ShapeParams,
    pub controller: ControllerParams,
    pub placement: Placement,
    pub robots: Vec<RobotState>,
    pub obstacles: Vec<Obstacle>,
    pub region: Option<RegionSchedule>,
    /// Explicit desired velocity. When absent the region velocity is used,
    /// or zero without a region.
    pub desired_velocity: Option<VelocityProfile>,
}

impl Scenario {
    /// Desired flocking velocity at time `t`.
    pub fn v_d(&self, t: f64) -> Vec2 {
        if let Some(p) = &self.desired_velocity {
            return p.at(t);
        }
        match &self.region {
            Some(r) => r.velocity_at(t),
            None => Vec2::ZERO,
        }
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Scenario::from_toml(&text, path, base, None)
    }

    /// Parses and resolves a scenario. Relative pattern paths resolve
    /// against `base_dir`; `seed_override` replaces the file's seed before
    /// random placement.
    pub fn from_toml(
        text: &str,
        path: &Path,
        base_dir: &Path,
        seed_override: Option<u64>,
    ) -> Result<Scenario> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::parse(path, e.to_string()))?;
        resolve(file, base_dir, seed_override)
    }

    /// Re-resolves random placement under a new seed.
    pub fn with_seed(mut self, seed: u64) -> Result<Scenario> {
        self.seed = seed;
        if let Placement::Random { min, max, min_sep } = self.placement {
            let vel = self.robots.first().map(|r| r.v).unwrap_or(Vec2::ZERO);
            let ps = place_random(self.robots.len(), min, max, min_sep, seed)?;
            self.robots = robots_from(ps, |_| vel);
        }
        Ok(self)
    }

    /// First invariant violation, if any.
    pub fn validate(&self) -> Result<()> {
        match self.validation_errors().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Every invariant violation across parameter blocks, placement,
    /// obstacles and the region schedule.
    pub fn validation_errors(&self) -> Vec<Error> {
        let mut errs: Vec<Error> = [
            self.spec.validate(),
            self.potentials.validate(),
            self.shape.validate(),
            self.controller.validate(),
        ]
        .into_iter()
        .filter_map(Result::err)
        .collect();
        if !(self.dt.is_finite() && self.dt > 0.0) {
            errs.push(Error::validation("dt", "must be > 0"));
        }
        if self.steps < 1 {
            errs.push(Error::validation("steps", "must be at least 1"));
        }
        if self.robots.is_empty() {
            errs.push(Error::validation("placement", "no robots"));
        }
        for r in &self.robots {
            if !r.p.is_finite() || !r.v.is_finite() {
                errs.push(Error::validation(
                    "placement",
                    format!("robot {} has a non-finite state", r.id),
                ));
            } else if r.v.norm() > self.spec.v_max + crate::model::CAP_SLACK {
                errs.push(Error::validation(
                    "placement.velocity",
                    format!("initial speed of robot {} exceeds v_max", r.id),
                ));
            }
        }
        for (a, ra) in self.robots.iter().enumerate() {
            for rb in &self.robots[a + 1..] {
                let d = ra.p.distance(rb.p);
                if d < self.spec.r_coll {
                    errs.push(Error::validation(
                        "placement",
                        format!(
                            "robots {} and {} start {d:.4} m apart, closer than r_coll = {}",
                            ra.id, rb.id, self.spec.r_coll
                        ),
                    ));
                }
            }
        }
        errs.extend(self.obstacles.iter().filter_map(|o| o.validate().err()));
        if let Some(Err(e)) = self.region.as_ref().map(RegionSchedule::validate) {
            errs.push(e);
        }
        if let Some(p) = &self.desired_velocity {
            for (k, (vel, d)) in p.segments.iter().enumerate() {
                if !vel.is_finite() || !(*d > 0.0) {
                    errs.push(Error::validation(
                        format!("desired_velocity.segments[{k}]"),
                        "velocity must be finite and duration > 0",
                    ));
                }
            }
        }
        errs
    }

    /// Canonical JSON of the resolved scenario, defaults applied.
    pub fn canonical_json(&self) -> serde_json::Value {
        let region = self.region.as_ref().map(|r| {
            json!({
                "initial_center": r.initial_center,
                "segments": r.segments,
                "initial_pattern": pattern_digest(&r.initial_pattern),
                "switches": r.switches.iter().map(|s| json!({
                    "time": s.time,
                    "pattern": pattern_digest(&s.pattern),
                })).collect::<Vec<_>>(),
            })
        });
        json!({
            "name": self.name,
            "preset": self.preset.map(|p| p.name()),
            "seed": self.seed,
            "dt": self.dt,
            "steps": self.steps,
            "robot": self.spec,
            "potentials": self.potentials,
            "shape": self.shape,
            "controller": self.controller,
            "robots": self.robots,
            "obstacles": self.obstacles,
            "region": region,
            "desired_velocity": self.desired_velocity.as_ref().map(|p| json!({
                "segments": p.segments,
                "tail": p.tail,
            })),
        })
    }

    /// SHA-256 of [`Scenario::canonical_json`], hex encoded.
    pub fn config_hash(&self) -> String {
        sha256_hex(self.canonical_json().to_string().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn pattern_digest(p: &RegionPattern) -> String {
    sha256_hex(p.to_text().as_bytes())
}

/// Uniform `[0, 1)` double from the top 53 bits of a ChaCha8 word.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Rejection-samples `n` points in the box `[min, max]` with pairwise
/// separation at least `min_sep`.
///
/// The generator is ChaCha8 seeded through `seed_from_u64(seed)`; each
/// candidate draws x then y, each as `(next_u64 >> 11)·2⁻⁵³` scaled onto
/// the box side.
pub fn place_random(n: usize, min: Vec2, max: Vec2, min_sep: f64, seed: u64) -> Result<Vec<Vec2>> {
    if !(max.x > min.x && max.y > min.y) {
        return Err(Error::validation("placement", "box max must exceed min on both axes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = PLACEMENT_ATTEMPTS_PER_ROBOT.saturating_mul(n.max(1));
    let sep2 = min_sep * min_sep;
    let mut out: Vec<Vec2> = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        if attempts >= limit {
            return Err(Error::Placement {
                requested: n,
                min_sep,
                attempts,
            });
        }
        attempts += 1;
        let x = min.x + (max.x - min.x) * unit(&mut rng);
        let y = min.y + (max.y - min.y) * unit(&mut rng);
        let p = Vec2::new(x, y);
        if out.iter().all(|q| q.distance_squared(p) >= sep2) {
            out.push(p);
        }
    }
    Ok(out)
}

fn robots_from(ps: Vec<Vec2>, vel: impl Fn(usize) -> Vec2) -> Vec<RobotState> {
    ps.into_iter()
        .enumerate()
        .map(|(id, p)| RobotState {
            id,
            p,
            v: vel(id),
            u_last: Vec2::ZERO,
        })
        .collect()
}

fn required<T: Copy>(field: &str, value: Option<T>, fallback: Option<T>) -> Result<T> {
    value.or(fallback).ok_or_else(|| {
        Error::validation(field, "missing required parameter (no preset supplies it)")
    })
}

fn resolve_params(
    p: &ParamsSection,
    preset: Option<Preset>,
) -> Result<(PotentialParams, ShapeParams, ControllerParams)> {
    let pp = preset.map(|x| x.potential_params());
    let sp = preset.map(|x| x.shape_params());
    let cp = preset.map(|x| x.controller_params());

    let k_a = required("k_a", p.k_a, pp.as_ref().map(|x| x.k_a))?;
    let r_a = p
        .r_a
        .or(p.r_f)
        .or(pp.as_ref().map(|x| x.r_a))
        .ok_or_else(|| Error::validation("r_a", "missing required parameter (set r_a or r_f)"))?;
    let t_p = required("t_p", p.t_p, pp.as_ref().map(|x| x.t_p))?;

    let potentials = PotentialParams {
        k_a,
        r_a,
        k_align: required("k_align", p.k_align, pp.as_ref().map(|x| x.k_align))?,
        k_l: required("k_l", p.k_l, pp.as_ref().map(|x| x.k_l))?,
        k_o: required("k_o", p.k_o, pp.as_ref().map(|x| x.k_o))?,
        d_beta: required("d_beta", p.d_beta, pp.as_ref().map(|x| x.d_beta))?,
        h: required("h", p.h, pp.as_ref().map(|x| x.h))?,
        k_acc: required("k_acc", p.k_acc, pp.as_ref().map(|x| x.k_acc))?,
        k_c: required("k_c", p.k_c, pp.as_ref().map(|x| x.k_c))?,
        k_d: required("k_d", p.k_d, pp.as_ref().map(|x| x.k_d))?,
        k_vel: required("k_vel", p.k_vel, pp.as_ref().map(|x| x.k_vel))?,
        k_v: required("k_v", p.k_v, pp.as_ref().map(|x| x.k_v))?,
        range_phi_beta: p.range_phi_beta.unwrap_or(2.0),
        v_d: Vec2::ZERO,
        t_p,
    };
    let shape = ShapeParams {
        k_ro: required("k_ro", p.k_ro, sp.as_ref().map(|x| x.k_ro))?,
        k_ri: required("k_ri", p.k_ri, sp.as_ref().map(|x| x.k_ri))?,
        // occupancy radius follows r_f / r_a unless set explicitly
        r_occupy: p.r_occupy.or(p.r_f).unwrap_or(r_a),
        r_sen: required("r_sen", p.r_sen, sp.as_ref().map(|x| x.r_sen))?,
    };
    let controller = ControllerParams {
        n_a: required("n_a", p.n_a, cp.as_ref().map(|x| x.n_a))?,
        delta_u: required("delta_u", p.delta_u, cp.as_ref().map(|x| x.delta_u))?,
        t_p,
        mf_iterations: p.mf_iterations.unwrap_or(3),
        mf_tolerance: p.mf_tolerance.unwrap_or(1e-6),
        alpha: required("alpha", p.alpha, cp.as_ref().map(|x| x.alpha))?,
        beta_from_predicted: p.beta_from_predicted.unwrap_or(false),
    };
    Ok((potentials, shape, controller))
}

fn load_pattern(src: &PatternSource, base: &Path, field: &str) -> Result<RegionPattern> {
    let chosen = [src.file.is_some(), src.outline.is_some(), src.disk.is_some()]
        .iter()
        .filter(|&&b| b)
        .count();
    if chosen != 1 {
        return Err(Error::validation(
            field,
            "give exactly one of `file`, `outline` or `disk`",
        ));
    }
    if let Some(f) = &src.file {
        return RegionPattern::load(&base.join(f));
    }
    let cell_size = src
        .cell_size
        .ok_or_else(|| Error::validation(format!("{field}.cell_size"), "required to rasterize"))?;
    let outline = match (&src.outline, src.disk) {
        (Some(o), _) => Outline::load(&base.join(o))?,
        (None, Some(r)) => Outline::Disk { radius: r },
        _ => unreachable!(),
    };
    let outline = if src.scale == 1.0 {
        outline
    } else {
        outline.scaled(src.scale)
    };
    rasterize(&outline, cell_size)
}

fn resolve(f: ScenarioFile, base: &Path, seed_override: Option<u64>) -> Result<Scenario> {
    let preset = match &f.preset {
        Some(name) => Some(Preset::from_name(name).ok_or_else(|| {
            Error::validation(
                "preset",
                format!("unknown preset `{name}` (expected sim1, sim2 or realexp)"),
            )
        })?),
        None => None,
    };
    let (potentials, shape, controller) = resolve_params(&f.params, preset)?;
    let spec = RobotSpec {
        r_coll: f.robot.r_coll,
        v_max: f.robot.v_max,
        u_max: f.robot.u_max,
        k_neighbors: f.robot.k_neighbors,
    };
    let seed = seed_override.unwrap_or(f.seed);

    let (placement, robots) = match f.placement {
        PlacementSection::Line {
            count,
            start,
            spacing,
            direction,
            velocity,
        } => {
            let dir = v(direction);
            let n = dir.norm();
            if !(n > 0.0) {
                return Err(Error::validation("placement.direction", "must be non-zero"));
            }
            let step = dir * (spacing / n);
            let ps = (0..count).map(|k| v(start) + step * k as f64).collect();
            (Placement::Line, robots_from(ps, |_| v(velocity)))
        }
        PlacementSection::Random {
            count,
            min,
            max,
            min_sep,
            velocity,
        } => {
            let min_sep = min_sep.unwrap_or(2.0 * spec.r_coll);
            let ps = place_random(count, v(min), v(max), min_sep, seed)?;
            (
                Placement::Random {
                    min: v(min),
                    max: v(max),
                    min_sep,
                },
                robots_from(ps, |_| v(velocity)),
            )
        }
        PlacementSection::Explicit {
            positions,
            velocities,
        } => {
            if !velocities.is_empty() && velocities.len() != positions.len() {
                return Err(Error::validation(
                    "placement.velocities",
                    "must be empty or match positions in length",
                ));
            }
            let ps = positions.iter().map(|&p| v(p)).collect();
            (
                Placement::Explicit,
                robots_from(ps, |k| velocities.get(k).map(|&x| v(x)).unwrap_or(Vec2::ZERO)),
            )
        }
    };

    let mut obstacles = Vec::new();
    for o in f.obstacles {
        match o {
            ObstacleSection::Circle { center, radius } => {
                obstacles.push(Obstacle::circle(obstacles.len(), v(center), radius))
            }
            ObstacleSection::Segment { a, b } => {
                obstacles.push(Obstacle::segment(obstacles.len(), v(a), v(b)))
            }
            ObstacleSection::Wall { points } => {
                if points.len() < 2 {
                    return Err(Error::validation("obstacles.wall", "needs at least 2 points"));
                }
                for w in points.windows(2) {
                    obstacles.push(Obstacle::segment(obstacles.len(), v(w[0]), v(w[1])));
                }
            }
        }
    }

    let region = match f.region {
        Some(r) => {
            let initial = load_pattern(&r.pattern, base, "region.pattern")?;
            let mut switches = Vec::new();
            for (k, s) in r.switches.iter().enumerate() {
                switches.push(PatternSwitch {
                    time: s.time,
                    pattern: Arc::new(load_pattern(
                        &s.pattern,
                        base,
                        &format!("region.switches[{k}].pattern"),
                    )?),
                });
            }
            switches.sort_by(|a, b| a.time.total_cmp(&b.time));
            Some(RegionSchedule {
                initial_center: v(r.center),
                segments: r.segments.iter().map(|s| (v(s.velocity), s.duration)).collect(),
                initial_pattern: Arc::new(initial),
                switches,
            })
        }
        None => None,
    };

    let desired_velocity = f.desired_velocity.map(|d| VelocityProfile {
        segments: d.segments.iter().map(|s| (v(s.velocity), s.duration)).collect(),
        tail: d.velocity.map(v).unwrap_or(Vec2::ZERO),
    });

    let scenario = Scenario {
        name: f.name.unwrap_or_else(|| "unnamed".into()),
        description: f.description.unwrap_or_default(),
        preset,
        seed,
        dt: f.dt.unwrap_or(controller.t_p),
        steps: f.steps,
        spec,
        potentials,
        shape,
        controller,
        placement,
        robots,
        obstacles,
        region,
        desired_velocity,
    };
    Ok(scenario)
}
