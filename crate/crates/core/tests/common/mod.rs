//! Reference energies written straight from the definitions, shared by the
//! oracle and acceptance targets.
#![allow(dead_code)]

use std::f64::consts::PI;

use gibbsflock_core::neighbors::Shape;
use gibbsflock_core::{Obstacle, PotentialParams, RobotState, Vec2};

pub fn hypot(v: Vec2) -> f64 {
    v.x.hypot(v.y)
}

pub fn psi_a(d: f64, k_a: f64, r_a: f64) -> f64 {
    if d < r_a {
        k_a * (1.0 - (PI * d / (2.0 * r_a)).sin())
    } else {
        0.0
    }
}

/// Angle between two vectors, 0 when either is (near) zero.
pub fn angle(a: Vec2, b: Vec2) -> f64 {
    let (na, nb) = (hypot(a), hypot(b));
    if na < 1e-9 || nb < 1e-9 {
        return 0.0;
    }
    ((a.x * b.x + a.y * b.y) / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Constant-acceleration prediction with the speed cap on the end velocity.
pub fn predict(r: &RobotState, u: Vec2, t: f64, v_max: f64) -> (Vec2, Vec2) {
    let p = Vec2::new(
        r.p.x + r.v.x * t + 0.5 * u.x * t * t,
        r.p.y + r.v.y * t + 0.5 * u.y * t * t,
    );
    let mut vel = Vec2::new(r.v.x + u.x * t, r.v.y + u.y * t);
    let n = hypot(vel);
    if n > v_max {
        vel = Vec2::new(vel.x * v_max / n, vel.y * v_max / n);
    }
    (p, vel)
}

pub fn phi_beta(z: f64, d_beta: f64, h: f64) -> f64 {
    let s = z / d_beta;
    let rho = if s < 0.0 {
        0.0
    } else if s < h {
        1.0
    } else if s < 1.0 {
        0.5 * (1.0 + (PI * (s - h) / (1.0 - h)).cos())
    } else {
        0.0
    };
    let w = z - d_beta;
    rho * (w / (1.0 + w * w).sqrt() - 1.0)
}

pub fn psi_s(v: Vec2, u: Vec2, u_last: Vec2, pp: &PotentialParams) -> f64 {
    let acc = pp.k_acc * ((hypot(u) / pp.k_c).exp() + (angle(u, u_last) / pp.k_d).exp());
    let dv = (v.x - pp.v_d.x).hypot(v.y - pp.v_d.y);
    acc + pp.k_vel * ((dv / pp.k_v).exp() - 1.0)
}

/// Closest boundary point of an obstacle and its distance.
pub fn closest(o: &Obstacle, p: Vec2) -> (Vec2, f64) {
    match o.shape.clone() {
        Shape::Circle { center, radius } => {
            let dc = p.distance(center);
            let q = center + (p - center) * (radius / dc);
            (q, (dc - radius).abs())
        }
        Shape::Segment { a, b } => {
            let ab = b - a;
            let t = (((p - a).x * ab.x + (p - a).y * ab.y) / (ab.x * ab.x + ab.y * ab.y))
                .clamp(0.0, 1.0);
            let q = Vec2::new(a.x + ab.x * t, a.y + ab.y * t);
            (q, p.distance(q))
        }
    }
}

/// Energies of every candidate of robot 0 against robot 1 holding belief
/// `q` over the same candidate list; no region.
pub fn two_robot_energies(
    robots: &[RobotState; 2],
    obstacles: &[Obstacle],
    inputs: &[Vec2],
    q: &[f64],
    pp: &PotentialParams,
    v_max: f64,
) -> Vec<f64> {
    let betas: Vec<(Vec2, f64)> = obstacles
        .iter()
        .map(|o| closest(o, robots[0].p))
        .filter(|&(_, d)| d <= pp.d_beta)
        .collect();
    let nearest = betas.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
    let w_o = if betas.is_empty() {
        1.0
    } else {
        (1.0 - phi_beta(nearest, pp.d_beta, pp.h).abs() / pp.range_phi_beta).max(0.0)
    };
    inputs
        .iter()
        .map(|&u| {
            let (pi, vi) = predict(&robots[0], u, pp.t_p, v_max);
            let mut inter = 0.0;
            for (k, &u2) in inputs.iter().enumerate() {
                let (pj, vj) = predict(&robots[1], u2, pp.t_p, v_max);
                let align =
                    pp.k_align * (hypot(vi) * pp.t_p * angle(vi, vj) / pp.k_l).exp();
                inter += q[k] * (psi_a(pi.distance(pj), pp.k_a, pp.r_a) + align);
            }
            let mut obstacle = 0.0;
            for &(bp, _) in &betas {
                let d = pi.distance(bp);
                obstacle += pp.k_o * (-phi_beta(d, pp.d_beta, pp.h)).exp() / betas.len() as f64;
            }
            w_o * inter + obstacle + psi_s(vi, u, robots[0].u_last, pp)
        })
        .collect()
}
