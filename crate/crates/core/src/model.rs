//! Robot kinematics: a planar double integrator `ṗ = v, v̇ = u` with
//! speed and acceleration caps.
//!
//! Propagation over a duration `t` under constant input `u` is exact:
//!
//! ```text
//! v' = v + u·t
//! p' = p + v·t + ½·u·t²
//! ```
//!
//! after which `v'` is scaled back onto the `v_max` disk. The controller's
//! one-step prediction and the simulator's integration share this routine so
//! the two never disagree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Slack allowed when checking committed states against their caps.
pub const CAP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub id: usize,
    pub p: Vec2,
    pub v: Vec2,
    /// Acceleration applied during the previous step.
    pub u_last: Vec2,
}

impl RobotState {
    pub fn at_rest(id: usize, p: Vec2) -> Self {
        RobotState {
            id,
            p,
            v: Vec2::ZERO,
            u_last: Vec2::ZERO,
        }
    }
}

/// Physical limits shared by every robot in a swarm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    /// Safety radius (m).
    pub r_coll: f64,
    pub v_max: f64,
    pub u_max: f64,
    /// Number of nearest robots each robot perceives.
    pub k_neighbors: usize,
}

impl RobotSpec {
    pub fn validate(&self) -> Result<()> {
        positive("r_coll", self.r_coll)?;
        positive("v_max", self.v_max)?;
        positive("u_max", self.u_max)?;
        if self.k_neighbors < 1 {
            return Err(Error::validation("k_neighbors", "must be at least 1"));
        }
        Ok(())
    }
}

pub(crate) fn positive(field: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::validation(
            field,
            format!("must be a finite positive number, got {value}"),
        ));
    }
    Ok(())
}

/// Predicted position and velocity after holding `u` for `t_p` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub p: Vec2,
    pub v: Vec2,
}

/// Same as [`predict_state`] without input validation, for hot loops whose
/// inputs are finite by construction.
#[inline]
pub(crate) fn propagate(p: Vec2, v: Vec2, u: Vec2, t: f64, v_max: f64) -> Prediction {
    let v_next = v + u * t;
    let p_next = p + v * t + u * (0.5 * t * t);
    Prediction {
        p: p_next,
        v: v_next.clamp_norm(v_max),
    }
}

pub fn predict_state(x: &RobotState, u: Vec2, t_p: f64, v_max: f64) -> Result<Prediction> {
    if !(t_p.is_finite() && t_p > 0.0) {
        return Err(Error::validation("t_p", format!("must be > 0, got {t_p}")));
    }
    if !u.is_finite() {
        return Err(Error::validation("u", "acceleration is not finite"));
    }
    if !x.p.is_finite() || !x.v.is_finite() {
        return Err(Error::validation(
            "state",
            format!("robot {} has a non-finite position or velocity", x.id),
        ));
    }
    Ok(propagate(x.p, x.v, u, t_p, v_max))
}

/// Advances one robot by `dt` under `u` and records `u` as its last input.
/// The controller is expected to have clamped `u` already.
pub fn integrate_step(x: &RobotState, u: Vec2, dt: f64, spec: &RobotSpec) -> Result<RobotState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::validation("dt", format!("must be > 0, got {dt}")));
    }
    if !u.is_finite() {
        return Err(Error::validation("u", "acceleration is not finite"));
    }
    let un = u.norm();
    if un > spec.u_max + CAP_SLACK {
        return Err(Error::validation(
            "u",
            format!(
                "robot {}: |u| = {un} exceeds u_max = {}",
                x.id, spec.u_max
            ),
        ));
    }
    let next = predict_state(x, u, dt, spec.v_max)?;
    Ok(RobotState {
        id: x.id,
        p: next.p,
        v: next.v,
        u_last: u,
    })
}
