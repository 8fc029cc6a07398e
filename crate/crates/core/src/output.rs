//! Plain-text run outputs.
//!
//! * trajectory CSV: header `t,id,px,py,vx,vy,ux,uy`, one row per
//!   (step, robot), robots in id order within a step.
//! * metrics CSV: header
//!   `t,order,d_min,d_max_of_min,d_avg,d_beta_min,region_attraction_energy,coverage_cv`,
//!   one row per step. Absent values are empty fields; an unoccupied region
//!   writes `inf` for `coverage_cv`.
//! * plot data: whitespace-separated columns
//!   `t order d_min d_max_of_min d_avg d_beta_min region_energy coverage_cv region_cx region_cy`
//!   under a `#` header line, absent values written as `nan`.
//!
//! Floats use Rust's shortest round-trip formatting, switching to exponent
//! notation below 1e-6 or from 1e16 upward, so identical runs give identical
//! bytes.

use std::fmt::Write as _;

use crate::sim::TrajectoryLog;

/// Shortest round-trip text for `x`; exponent form outside [1e-6, 1e16).
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-6..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => "inf".into(),
        Some(x) => num(x),
        None => String::new(),
    }
}

fn nan(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => "inf".into(),
        Some(x) => num(x),
        None => "nan".into(),
    }
}

pub fn trajectory_csv(log: &TrajectoryLog) -> String {
    let rows: usize = log.steps.iter().map(|s| s.robots.len()).sum();
    let mut s = String::with_capacity(64 * rows + 32);
    s.push_str("t,id,px,py,vx,vy,ux,uy\n");
    for step in &log.steps {
        for r in &step.robots {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                num(step.t),
                r.id,
                num(r.p.x),
                num(r.p.y),
                num(r.v.x),
                num(r.v.y),
                num(r.u_last.x),
                num(r.u_last.y)
            );
        }
    }
    s
}

pub fn metrics_csv(log: &TrajectoryLog) -> String {
    let mut s = String::new();
    s.push_str("t,order,d_min,d_max_of_min,d_avg,d_beta_min,region_attraction_energy,coverage_cv\n");
    for m in log.metrics() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            num(m.t),
            num(m.order),
            num(m.d_min),
            num(m.d_max_of_min),
            num(m.d_avg),
            opt(m.d_beta_min),
            opt(m.region_attraction_energy),
            opt(m.coverage_cv)
        );
    }
    s
}

pub fn plot_data(log: &TrajectoryLog) -> String {
    let mut s = String::new();
    s.push_str("# t order d_min d_max_of_min d_avg d_beta_min region_energy coverage_cv region_cx region_cy\n");
    for step in &log.steps {
        let m = &step.metrics;
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {} {}",
            num(m.t),
            num(m.order),
            num(m.d_min),
            num(m.d_max_of_min),
            num(m.d_avg),
            nan(m.d_beta_min),
            nan(m.region_attraction_energy),
            nan(m.coverage_cv),
            nan(step.region_center.map(|c| c.x)),
            nan(step.region_center.map(|c| c.y)),
        );
    }
    s
}
