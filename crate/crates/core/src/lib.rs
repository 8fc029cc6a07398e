//! Deterministic planar swarm flocking with a Gibbs-random-field predictive
//! controller.
//!
//! Robots are double integrators choosing accelerations from a discrete
//! candidate set. The controller scores each candidate's predicted state
//! with interaction, obstacle, smoothness and shape-control potentials,
//! refines per-robot beliefs with mean-field rounds, and applies the most
//! probable candidate through a low-pass filter.
//!
//! Modules map onto the pieces of the system:
//!
//! * [`model`]: kinematics and state prediction
//! * [`neighbors`]: k-nearest neighbors and obstacle β-agents
//! * [`potentials`]: scalar energy terms
//! * [`shape`]: region patterns, mean shift, shape energy
//! * [`controller`]: candidate enumeration and mean-field MAP selection
//! * [`sim`], [`scenario`], [`output`]: the run loop, its inputs and outputs
//! * [`metrics`]: order, distance, obstacle and coverage measures

pub mod controller;
pub mod error;
pub mod metrics;
pub mod model;
pub mod neighbors;
pub mod output;
pub mod potentials;
pub mod presets;
pub mod scenario;
pub mod shape;
pub mod sim;
pub mod vec2;

pub use controller::{
    accel_to_velocity_cmd, apply_filter, candidate_energy, enumerate_inputs, mean_field_update,
    plan_step, BeliefDistribution, CandidateSet, ControllerParams, FlockController, GrfController,
    World,
};
pub use error::{Error, Result};
pub use metrics::MetricRecord;
pub use model::{integrate_step, predict_state, RobotSpec, RobotState};
pub use neighbors::{beta_agents, knn, BetaAgent, Obstacle};
pub use potentials::PotentialParams;
pub use presets::Preset;
pub use scenario::{place_random, Scenario};
pub use shape::{
    mean_shift_target, nearest_grid, rasterize, unoccupied_cells, Outline, RegionPattern,
    RegionSchedule, RegionState, ShapeParams,
};
pub use sim::{run, run_with, StepRecord, TrajectoryLog};
pub use vec2::Vec2;
