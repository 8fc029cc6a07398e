//! Synchronous simulation loop.
//!
//! Each step plans every robot against the same snapshot, low-pass filters
//! the chosen inputs, integrates all robots by `dt`, and records the
//! committed state with its metrics.

use crate::controller::{apply_filter, FlockController, GrfController, World};
use crate::error::{Error, Result};
use crate::metrics::{
    coverage_cv, distance_metric, obstacle_metric, order_metric, region_attraction_energy,
    MetricRecord,
};
use crate::model::{integrate_step, RobotState};
use crate::neighbors::knn_all;
use crate::scenario::Scenario;
use crate::shape::RegionState;
use crate::vec2::Vec2;

/// One committed step. `robots[k].u_last` is the input applied during it.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: f64,
    pub robots: Vec<RobotState>,
    pub region_center: Option<Vec2>,
    pub metrics: MetricRecord,
}

#[derive(Debug, Clone, Default)]
pub struct TrajectoryLog {
    pub steps: Vec<StepRecord>,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn metrics(&self) -> impl Iterator<Item = &MetricRecord> {
        self.steps.iter().map(|s| &s.metrics)
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.steps.last()
    }
}

/// Metrics for a committed snapshot.
pub fn evaluate(
    t: f64,
    robots: &[RobotState],
    scenario: &Scenario,
    region: Option<&RegionState>,
) -> MetricRecord {
    let neighbor_sets = knn_all(robots, scenario.spec.k_neighbors);
    let (d_min, d_max_of_min, d_avg) = distance_metric(robots);
    MetricRecord {
        t,
        order: order_metric(robots, &neighbor_sets),
        d_min,
        d_max_of_min,
        d_avg,
        d_beta_min: obstacle_metric(robots, &scenario.obstacles, scenario.potentials.d_beta),
        region_attraction_energy: region
            .map(|r| region_attraction_energy(robots, r, &scenario.shape)),
        coverage_cv: region.map(|r| coverage_cv(robots, r, scenario.shape.r_occupy)),
    }
}

/// Runs the scenario with the GRF controller.
pub fn run(scenario: &Scenario) -> Result<TrajectoryLog> {
    let controller = GrfController::new(scenario.controller.clone(), scenario.spec.u_max);
    run_with(scenario, &controller)
}

/// Runs the scenario with any controller. Validation happens before the
/// first step.
pub fn run_with(scenario: &Scenario, controller: &dyn FlockController) -> Result<TrajectoryLog> {
    scenario.validate()?;
    let mut robots = scenario.robots.clone();
    let mut potentials = scenario.potentials.clone();
    let mut log = TrajectoryLog {
        steps: Vec::with_capacity(scenario.steps),
    };
    for step in 0..scenario.steps {
        let t = step as f64 * scenario.dt;
        let region = scenario.region.as_ref().map(|r| r.region_at(t));
        potentials.v_d = scenario.v_d(t);
        let world = World {
            robots: &robots,
            obstacles: &scenario.obstacles,
            region: region.as_ref(),
            spec: &scenario.spec,
            potentials: &potentials,
            shape: &scenario.shape,
        };
        let planned = controller.plan(&world);
        if planned.len() != robots.len() {
            return Err(Error::Numeric {
                step,
                message: format!(
                    "controller `{}` returned {} inputs for {} robots",
                    controller.name(),
                    planned.len(),
                    robots.len()
                ),
            });
        }
        let mut next = Vec::with_capacity(robots.len());
        for (r, u_star) in robots.iter().zip(planned) {
            let u = apply_filter(u_star, r.u_last, scenario.controller.alpha, scenario.spec.u_max);
            let x = integrate_step(r, u, scenario.dt, &scenario.spec).map_err(|e| Error::Numeric {
                step,
                message: e.to_string(),
            })?;
            if !x.p.is_finite() || !x.v.is_finite() {
                return Err(Error::Numeric {
                    step,
                    message: format!("robot {} left the finite domain", x.id),
                });
            }
            next.push(x);
        }
        robots = next;

        let t_next = (step + 1) as f64 * scenario.dt;
        let region_next = scenario.region.as_ref().map(|r| r.region_at(t_next));
        let metrics = evaluate(t_next, &robots, scenario, region_next.as_ref());
        log.steps.push(StepRecord {
            t: t_next,
            robots: robots.clone(),
            region_center: region_next.map(|r| r.center),
            metrics,
        });
    }
    Ok(log)
}
