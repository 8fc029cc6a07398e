//! Neighbor perception: the k nearest robots and the virtual β-agents that
//! stand in for nearby obstacles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RobotState;
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Circle { center: Vec2, radius: f64 },
    Segment { a: Vec2, b: Vec2 },
}

/// Static obstacle. Long walls are declared as several segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: usize,
    #[serde(flatten)]
    pub shape: Shape,
}

impl Obstacle {
    pub fn circle(id: usize, center: Vec2, radius: f64) -> Self {
        Obstacle {
            id,
            shape: Shape::Circle { center, radius },
        }
    }

    pub fn segment(id: usize, a: Vec2, b: Vec2) -> Self {
        Obstacle {
            id,
            shape: Shape::Segment { a, b },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let field = format!("obstacles[{}]", self.id);
        match self.shape {
            Shape::Circle { center, radius } => {
                if !center.is_finite() || !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::validation(
                        field,
                        "circle needs a finite center and radius > 0",
                    ));
                }
            }
            Shape::Segment { a, b } => {
                if !a.is_finite() || !b.is_finite() || a == b {
                    return Err(Error::validation(
                        field,
                        "segment endpoints must be finite and distinct",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Point of the obstacle boundary closest to `p`.
    ///
    /// For a point strictly inside a circle this is still the nearest point
    /// on the rim.
    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        match self.shape {
            Shape::Circle { center, radius } => {
                let d = p - center;
                let n = d.norm();
                if n == 0.0 {
                    // every rim point is equidistant; pick the +x one
                    center + Vec2::new(radius, 0.0)
                } else {
                    center + d * (radius / n)
                }
            }
            Shape::Segment { a, b } => closest_point_on_segment(p, a, b),
        }
    }
}

pub fn closest_point_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Virtual agent sitting at an obstacle's closest point. Obstacles are static,
/// so no velocity is carried.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaAgent {
    pub p: Vec2,
    pub source_obstacle: usize,
    /// Distance from the querying robot.
    pub distance: f64,
}

/// Ids of the `k` robots nearest to robot `i` (excluding `i`), ordered by
/// increasing distance with ties going to the lower id.
///
/// Returns an empty list when `i` is not in `robots`.
pub fn knn(i: usize, robots: &[RobotState], k: usize) -> Vec<usize> {
    let Some(me) = robots.iter().find(|r| r.id == i) else {
        return Vec::new();
    };
    let mut cand: Vec<(f64, usize)> = robots
        .iter()
        .filter(|r| r.id != i)
        .map(|r| (me.p.distance_squared(r.p), r.id))
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.truncate(k);
    cand.into_iter().map(|(_, id)| id).collect()
}

/// k-NN sets for every robot, indexed by position in `robots` and holding
/// indices into `robots`.
pub fn knn_all(robots: &[RobotState], k: usize) -> Vec<Vec<usize>> {
    (0..robots.len())
        .map(|a| {
            let mut cand: Vec<(f64, usize, usize)> = robots
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(b, r)| (robots[a].p.distance_squared(r.p), r.id, b))
                .collect();
            cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            cand.truncate(k);
            cand.into_iter().map(|(_, _, b)| b).collect()
        })
        .collect()
}

/// One β-agent per obstacle whose closest point lies within `d_beta` of `p`.
pub fn beta_agents_at(p: Vec2, obstacles: &[Obstacle], d_beta: f64) -> Vec<BetaAgent> {
    obstacles
        .iter()
        .filter_map(|o| {
            let q = o.closest_point(p);
            let d = p.distance(q);
            (d <= d_beta).then_some(BetaAgent {
                p: q,
                source_obstacle: o.id,
                distance: d,
            })
        })
        .collect()
}

pub fn beta_agents(robot: &RobotState, obstacles: &[Obstacle], d_beta: f64) -> Vec<BetaAgent> {
    beta_agents_at(robot.p, obstacles, d_beta)
}
