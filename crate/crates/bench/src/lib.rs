//! Fixtures shared by the benchmarks under `benches/`.

use gibbsflock_core::shape::RegionState;
use gibbsflock_core::{rasterize, Outline, RobotSpec, RobotState, Vec2};

pub fn spec() -> RobotSpec {
    RobotSpec {
        r_coll: 0.1,
        v_max: 0.4,
        u_max: 0.7,
        k_neighbors: 3,
    }
}

/// `n` robots on a jittered square lattice with 0.4 m spacing, all moving
/// roughly along +x.
pub fn lattice_swarm(n: usize) -> Vec<RobotState> {
    let side = (n as f64).sqrt().ceil() as usize;
    (0..n)
        .map(|id| {
            let (i, j) = ((id % side) as f64, (id / side) as f64);
            let jitter = ((id * 7919) % 97) as f64 / 97.0 - 0.5;
            let mut r = RobotState::at_rest(id, Vec2::new(0.4 * i + 0.05 * jitter, 0.4 * j));
            r.v = Vec2::new(0.2, 0.03 * jitter);
            r.u_last = Vec2::new(0.05, 0.0);
            r
        })
        .collect()
}

/// Static disk region of the given radius centered on the swarm.
pub fn disk_region(radius: f64, cell_size: f64, center: Vec2) -> RegionState {
    let pattern = rasterize(&Outline::Disk { radius }, cell_size).expect("non-empty disk");
    RegionState {
        center,
        active_pattern: pattern.into(),
        t: 0.0,
    }
}


