//! Flocking performance measures evaluated on a single snapshot.

use serde::Serialize;

use crate::model::RobotState;
use crate::neighbors::{beta_agents_at, Obstacle};
use crate::shape::{occupancy_cv, psi_ro, RegionState, ShapeParams};
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub t: f64,
    pub order: f64,
    pub d_min: f64,
    pub d_max_of_min: f64,
    pub d_avg: f64,
    pub d_beta_min: Option<f64>,
    pub region_attraction_energy: Option<f64>,
    pub coverage_cv: Option<f64>,
}

/// Mean neighbor-pair heading cosine. `neighbor_sets[i]` indexes into
/// `robots`. Pairs involving a zero velocity count as 0, and robots without
/// neighbors contribute 0.
pub fn order_metric(robots: &[RobotState], neighbor_sets: &[Vec<usize>]) -> f64 {
    let n = robots.len();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for (i, set) in neighbor_sets.iter().enumerate().take(n) {
        if set.is_empty() {
            log::debug!("robot {} has no neighbors; order contribution 0", robots[i].id);
            continue;
        }
        let s: f64 = set
            .iter()
            .map(|&j| robots[i].v.cos_angle(robots[j].v).unwrap_or(0.0))
            .sum();
        // N_i − 1 = |N_i(t)|
        total += s / set.len() as f64;
    }
    total / n as f64
}

/// Per-robot nearest-neighbor distances.
pub fn nearest_neighbor_distances(robots: &[RobotState]) -> Vec<f64> {
    robots
        .iter()
        .enumerate()
        .map(|(i, a)| {
            robots
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| a.p.distance(b.p))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `(min, max, mean)` of the nearest-neighbor distances. Requires two or
/// more robots; returns infinities otherwise.
pub fn distance_metric(robots: &[RobotState]) -> (f64, f64, f64) {
    if robots.len() < 2 {
        return (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    }
    let d = nearest_neighbor_distances(robots);
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let avg = d.iter().sum::<f64>() / d.len() as f64;
    // keep min ≤ mean ≤ max under rounding
    (min, max, avg.clamp(min, max))
}

/// Smallest robot–β-agent distance over in-range β-agents, if any.
pub fn obstacle_metric(robots: &[RobotState], obstacles: &[Obstacle], d_beta: f64) -> Option<f64> {
    robots
        .iter()
        .flat_map(|r| beta_agents_at(r.p, obstacles, d_beta))
        .map(|b| b.distance)
        .min_by(f64::total_cmp)
}

/// Sum of the region-attraction energy over robots outside the region.
pub fn region_attraction_energy(
    robots: &[RobotState],
    region: &RegionState,
    params: &ShapeParams,
) -> f64 {
    robots.iter().map(|r| psi_ro(r.p, region, params)).sum()
}

/// Coefficient of variation of per-cell occupancy counts; `+∞` when no robot
/// occupies any cell.
pub fn coverage_cv(robots: &[RobotState], region: &RegionState, r_occupy: f64) -> f64 {
    let ps: Vec<Vec2> = robots.iter().map(|r| r.p).collect();
    occupancy_cv(&ps, region, r_occupy)
}
