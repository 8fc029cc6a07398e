//! The three bundled parameter sets: `sim1` (narrow passage), `sim2`
//! (pattern formation) and `realexp` (velocity-commanded quadrotors).

use serde::{Deserialize, Serialize};

use crate::controller::ControllerParams;
use crate::potentials::PotentialParams;
use crate::shape::ShapeParams;
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Sim1,
    Sim2,
    Realexp,
}

impl Preset {
    pub fn from_name(name: &str) -> Option<Preset> {
        match name {
            "sim1" => Some(Preset::Sim1),
            "sim2" => Some(Preset::Sim2),
            "realexp" => Some(Preset::Realexp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Sim1 => "sim1",
            Preset::Sim2 => "sim2",
            Preset::Realexp => "realexp",
        }
    }

    fn k_a(self) -> f64 {
        match self {
            Preset::Sim1 => 0.8,
            _ => 0.7,
        }
    }

    fn k_ro(self) -> f64 {
        match self {
            Preset::Sim1 => 5.0,
            _ => 25.0,
        }
    }

    fn t_p(self) -> f64 {
        match self {
            Preset::Realexp => 0.2,
            _ => 0.15,
        }
    }

    /// `r_f`: repulsion range and grid-occupancy radius.
    fn r_f(self) -> f64 {
        match self {
            Preset::Realexp => 0.4,
            _ => 0.3,
        }
    }

    pub fn potential_params(self) -> PotentialParams {
        PotentialParams {
            k_a: self.k_a(),
            r_a: self.r_f(),
            k_align: 0.2,
            k_l: 4.0,
            k_o: 1.0,
            d_beta: 0.2,
            h: 1.0 / 3.0,
            k_acc: 10.0,
            k_c: 7.0,
            k_d: 15.0,
            k_vel: 0.07,
            k_v: 2.0,
            range_phi_beta: 2.0,
            v_d: Vec2::ZERO,
            t_p: self.t_p(),
        }
    }

    pub fn shape_params(self) -> ShapeParams {
        ShapeParams {
            k_ro: self.k_ro(),
            k_ri: 10.0,
            r_occupy: self.r_f(),
            r_sen: 0.5,
        }
    }

    pub fn controller_params(self) -> ControllerParams {
        ControllerParams {
            n_a: 6,
            delta_u: 1.0 / 6.0,
            t_p: self.t_p(),
            mf_iterations: 3,
            mf_tolerance: 1e-6,
            alpha: 0.9,
            beta_from_predicted: false,
        }
    }
}
