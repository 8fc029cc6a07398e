use std::path::Path;

use gibbsflock_core::metrics::{distance_metric, order_metric};
use gibbsflock_core::neighbors::knn_all;
use gibbsflock_core::potentials::{
    phi_beta, psi_a, psi_acc, psi_align, psi_o, psi_s, psi_vel, rho_h,
};
use gibbsflock_core::{
    apply_filter, integrate_step, knn, mean_field_update, predict_state, Preset, RegionPattern,
    RobotSpec, RobotState, Vec2,
};
use proptest::prelude::*;

fn vec2(r: f64) -> impl Strategy<Value = Vec2> {
    (-r..r, -r..r).prop_map(|(x, y)| Vec2::new(x, y))
}

fn robot(id: usize) -> impl Strategy<Value = RobotState> {
    (vec2(3.0), vec2(0.4), vec2(0.5)).prop_map(move |(p, v, u)| RobotState {
        id,
        p,
        v: v.clamp_norm(0.4),
        u_last: u.clamp_norm(0.7),
    })
}

fn swarm(max: usize) -> impl Strategy<Value = Vec<RobotState>> {
    (2..max).prop_flat_map(|n| {
        (0..n)
            .map(robot)
            .collect::<Vec<_>>()
    })
}

fn spec() -> RobotSpec {
    RobotSpec {
        r_coll: 0.1,
        v_max: 0.4,
        u_max: 0.7,
        k_neighbors: 3,
    }
}

proptest! {
    #[test]
    fn potentials_respect_their_floors(d in 0.0..5.0f64, v in vec2(1.0), u in vec2(0.7), w in vec2(0.7)) {
        let p = Preset::Sim1.potential_params();
        prop_assert!(psi_o(d, &p) >= p.k_o);
        prop_assert!(psi_vel(v, &p) >= 0.0);
        prop_assert!(psi_acc(u, w, &p) >= 2.0 * p.k_acc - 1e-12);
        prop_assert!(psi_s(v, u, w, &p) >= 2.0 * p.k_acc - 1e-12);
        prop_assert!(psi_a(d, &p) >= 0.0 && psi_a(d, &p) <= p.k_a);
        prop_assert!(psi_align(v, u, &p) >= p.k_align);
        let phi = phi_beta(d, &p);
        prop_assert!(phi <= 0.0);
        if d >= p.d_beta {
            prop_assert_eq!(phi, 0.0);
        }
    }

    #[test]
    fn repulsion_is_non_increasing(a in 0.0..0.5f64, b in 0.0..0.5f64) {
        let p = Preset::Sim1.potential_params();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(psi_a(lo, &p) >= psi_a(hi, &p));
        prop_assert!(psi_o(lo, &p) >= psi_o(hi, &p) - 1e-12);
    }

    #[test]
    fn bump_stays_in_unit_interval(z in -1.0..2.0f64, h in 0.01..0.99f64) {
        let r = rho_h(z, h);
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn prediction_caps_speed(x in robot(0), u in vec2(0.7), t in 0.01..2.0f64) {
        let next = predict_state(&x, u, t, 0.4).unwrap();
        prop_assert!(next.v.norm() <= 0.4 + 1e-12);
    }

    #[test]
    fn filtered_input_is_admissible(a in vec2(1.0), b in vec2(1.0), alpha in 0.0..=1.0f64) {
        let u = apply_filter(a.clamp_norm(0.7), b.clamp_norm(0.7), alpha, 0.7);
        prop_assert!(u.norm() <= 0.7 + 1e-12);
        let x = RobotState::at_rest(0, Vec2::ZERO);
        let next = integrate_step(&x, u, 0.15, &spec()).unwrap();
        prop_assert!(next.v.norm() <= 0.4 + 1e-12);
        prop_assert_eq!(next.u_last, u);
    }

    #[test]
    fn beliefs_are_a_distribution(e in prop::collection::vec(-50.0..50.0f64, 1..40)) {
        let q = mean_field_update(&e);
        let sum: f64 = q.q.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(q.q.iter().all(|&x| x >= 0.0));
        let best = e.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(e[q.argmax()], best);
    }

    #[test]
    fn neighbor_sets_are_well_formed(robots in swarm(12), k in 0usize..6) {
        let all = knn_all(&robots, k);
        for (i, set) in all.iter().enumerate() {
            prop_assert_eq!(set.len(), k.min(robots.len() - 1));
            prop_assert!(!set.contains(&i));
            let ids: Vec<usize> = set.iter().map(|&j| robots[j].id).collect();
            prop_assert_eq!(ids, knn(robots[i].id, &robots, k));
        }
    }

    #[test]
    fn metrics_stay_in_range(robots in swarm(10)) {
        let sets = knn_all(&robots, 3);
        let order = order_metric(&robots, &sets);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&order));
        let (min, max, avg) = distance_metric(&robots);
        prop_assert!(min <= avg + 1e-12 && avg <= max + 1e-12);
    }

    #[test]
    fn pattern_text_round_trips(
        cells in prop::collection::btree_set((-40i64..40, -40i64..40), 1..60),
        cs in 0.01..0.5f64,
        origin in vec2(2.0),
    ) {
        let pat = RegionPattern::new(cs, origin, cells.into_iter().collect()).unwrap();
        let back = RegionPattern::from_text(&pat.to_text(), Path::new("mem")).unwrap();
        prop_assert_eq!(back.coords(), pat.coords());
        prop_assert_eq!(back.cell_size(), pat.cell_size());
        prop_assert_eq!(back.origin(), pat.origin());
    }
}
