//! Potential energies for robot–robot interaction, obstacle avoidance and
//! motion smoothness. Every function here is pure; parameters are passed in.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::positive;
use crate::vec2::Vec2;

/// Zero-norm threshold for velocities (m/s) when measuring heading angles.
pub const EPS_V: f64 = 1e-9;
/// Zero-norm threshold for accelerations (m/s²) when measuring turn angles.
pub const EPS_U: f64 = 1e-9;

/// Gains and ranges of the interaction, obstacle and smoothness energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub k_a: f64,
    /// Repulsion range (m).
    pub r_a: f64,
    pub k_align: f64,
    pub k_l: f64,
    pub k_o: f64,
    /// Obstacle influence radius (m).
    pub d_beta: f64,
    /// Bump-function plateau, `0 < h < 1`.
    pub h: f64,
    pub k_acc: f64,
    pub k_c: f64,
    pub k_d: f64,
    pub k_vel: f64,
    pub k_v: f64,
    /// Upper bound on `|φ_β|`; normalizes the obstacle weight.
    pub range_phi_beta: f64,
    /// Desired flocking velocity (m/s).
    pub v_d: Vec2,
    /// Prediction horizon (s).
    pub t_p: f64,
}

impl PotentialParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k_a", self.k_a),
            ("r_a", self.r_a),
            ("k_align", self.k_align),
            ("k_l", self.k_l),
            ("k_o", self.k_o),
            ("d_beta", self.d_beta),
            ("k_acc", self.k_acc),
            ("k_c", self.k_c),
            ("k_d", self.k_d),
            ("k_vel", self.k_vel),
            ("k_v", self.k_v),
            ("range_phi_beta", self.range_phi_beta),
            ("t_p", self.t_p),
        ] {
            positive(name, v)?;
        }
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(Error::validation(
                "h",
                format!("must satisfy 0 < h < 1, got {}", self.h),
            ));
        }
        // |φ_β| < 2 on its whole domain, so any smaller bound can be exceeded.
        if self.range_phi_beta < 2.0 {
            log::warn!(
                "range_phi_beta = {} is below sup|phi_beta| = 2; obstacle weights may clamp",
                self.range_phi_beta
            );
        }
        if !self.v_d.is_finite() {
            return Err(Error::validation("v_d", "must be finite"));
        }
        Ok(())
    }
}

/// Repulsion `k_a·(1 − sin(π·d/(2·r_a)))` inside `r_a`, zero beyond.
pub fn psi_a(d_ij: f64, params: &PotentialParams) -> f64 {
    if d_ij < params.r_a {
        params.k_a * (1.0 - (PI * d_ij / (2.0 * params.r_a)).sin())
    } else {
        0.0
    }
}

/// Alignment energy `k_align·exp(‖v_i‖·t_p·|Δθ|/k_l)`.
///
/// Only robot `i`'s speed enters the exponent, so the function is not
/// symmetric in its arguments.
pub fn psi_align(v_i: Vec2, v_j: Vec2, params: &PotentialParams) -> f64 {
    let d_i = v_i.norm() * params.t_p;
    let dtheta = v_i.angle_between(v_j, EPS_V);
    params.k_align * (d_i * dtheta / params.k_l).exp()
}

pub fn psi_inter(p_i: Vec2, v_i: Vec2, p_j: Vec2, v_j: Vec2, params: &PotentialParams) -> f64 {
    psi_a(p_i.distance(p_j), params) + psi_align(v_i, v_j, params)
}

/// Smooth bump: 1 on `[0, h)`, cosine roll-off on `[h, 1)`, 0 elsewhere
/// (negative arguments included).
pub fn rho_h(z: f64, h: f64) -> f64 {
    if (0.0..h).contains(&z) {
        1.0
    } else if (h..1.0).contains(&z) {
        0.5 * (1.0 + (PI * (z - h) / (1.0 - h)).cos())
    } else {
        0.0
    }
}

#[inline]
pub fn sigma(z: f64) -> f64 {
    z / (1.0 + z * z).sqrt()
}

/// Obstacle action function `ρ_h(z/d_β)·(σ(z − d_β) − 1)`; lies in `(−2, 0]`.
pub fn phi_beta(z: f64, params: &PotentialParams) -> f64 {
    rho_h(z / params.d_beta, params.h) * (sigma(z - params.d_beta) - 1.0)
}

/// Obstacle energy `k_o·exp(−φ_β(d))`, never below `k_o`.
pub fn psi_o(d_i_beta: f64, params: &PotentialParams) -> f64 {
    params.k_o * (-phi_beta(d_i_beta, params)).exp()
}

/// Weight `1 − |φ|/range(φ_β)` damping robot–robot interaction near
/// obstacles. Values of `|φ|` beyond the range clamp the weight to 0.
pub fn obstacle_weight(phi: f64, params: &PotentialParams) -> f64 {
    let a = phi.abs();
    if a > params.range_phi_beta {
        log::warn!(
            "|phi_beta| = {a} exceeds range_phi_beta = {}; obstacle weight clamped to 0",
            params.range_phi_beta
        );
        return 0.0;
    }
    1.0 - a / params.range_phi_beta
}

/// Obstacle weight for a robot from the distance to its nearest in-range
/// β-agent, or 1 when no obstacle is in range.
pub fn obstacle_weight_for(nearest_beta: Option<f64>, params: &PotentialParams) -> f64 {
    match nearest_beta {
        Some(d) => obstacle_weight(phi_beta(d, params), params),
        None => 1.0,
    }
}

/// Penalizes input size and turning relative to the last applied input.
pub fn psi_acc(u: Vec2, u_last: Vec2, params: &PotentialParams) -> f64 {
    let dtheta = u.angle_between(u_last, EPS_U);
    params.k_acc * ((u.norm() / params.k_c).exp() + (dtheta / params.k_d).exp())
}

/// Penalizes deviation from the desired flocking velocity; zero at `v_d`.
pub fn psi_vel(v: Vec2, params: &PotentialParams) -> f64 {
    params.k_vel * (((v - params.v_d).norm() / params.k_v).exp() - 1.0)
}

pub fn psi_s(v: Vec2, u: Vec2, u_last: Vec2, params: &PotentialParams) -> f64 {
    psi_acc(u, u_last, params) + psi_vel(v, params)
}
