//! Predictive flocking control by approximate MAP inference on a Gibbs
//! random field.
//!
//! Every robot owns a discrete variable ranging over its candidate inputs
//! (zero plus `n_a` directions × `M` magnitudes). For each candidate the
//! controller predicts the state one horizon `t_p` ahead and scores it with
//! the potential energies. Beliefs over candidates are refined with
//! synchronous mean-field rounds:
//!
//! ```text
//! E_i(c) = w_o · Σ_{j∈N_i} Σ_{c'} Q_j(c')·ψ_inter(x_i^c, x_j^{c'})
//!        + Σ_{β∈N_i^β} ψ_o(x_i^c, β) / |N_i^β|
//!        + ψ_s(x_i^c, u^c) + ψ_r(x_i^c)
//! Q_i(c) ∝ exp(−E_i(c))
//! ```
//!
//! and each robot picks the candidate of highest belief.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{positive, propagate, Prediction, RobotSpec, RobotState};
use crate::neighbors::{beta_agents_at, knn_all, BetaAgent, Obstacle};
use crate::potentials::{
    obstacle_weight_for, psi_inter, psi_o, psi_s, PotentialParams,
};
use crate::shape::{RegionState, ShapeEnergyCache, ShapeParams};
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    /// Number of non-zero input directions.
    pub n_a: usize,
    /// Magnitude step as a fraction of `u_max`.
    pub delta_u: f64,
    /// Prediction horizon (s).
    pub t_p: f64,
    pub mf_iterations: usize,
    /// Early-stop threshold on the largest belief change between rounds.
    pub mf_tolerance: f64,
    /// Low-pass filter gain in `(0, 1]`.
    pub alpha: f64,
    /// Recompute β-agents from each candidate's predicted position instead
    /// of the robot's current position.
    #[serde(default)]
    pub beta_from_predicted: bool,
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_a < 2 {
            return Err(Error::validation("n_a", format!("must be >= 2, got {}", self.n_a)));
        }
        if !(self.delta_u > 0.0 && self.delta_u <= 1.0) {
            return Err(Error::validation(
                "delta_u",
                format!("must lie in (0, 1], got {}", self.delta_u),
            ));
        }
        positive("t_p", self.t_p)?;
        if self.mf_iterations < 1 {
            return Err(Error::validation("mf_iterations", "must be at least 1"));
        }
        if !(self.mf_tolerance.is_finite() && self.mf_tolerance >= 0.0) {
            return Err(Error::validation("mf_tolerance", "must be finite and >= 0"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::validation(
                "alpha",
                format!("must lie in (0, 1], got {}", self.alpha),
            ));
        }
        Ok(())
    }

    /// Number of magnitude rungs, `round(1 / delta_u)`.
    pub fn magnitudes(&self) -> usize {
        ((1.0 / self.delta_u).round() as usize).max(1)
    }
}

/// Discrete inputs: the zero input first, then for each magnitude rung
/// `ℓ = 1..=M` the directions `(sin mθ, cos mθ)` for `m = 1..=n_a`.
pub fn enumerate_inputs(params: &ControllerParams, u_max: f64) -> Vec<Vec2> {
    let m_count = params.magnitudes();
    let theta_min = 2.0 * std::f64::consts::PI / params.n_a as f64;
    let mut inputs = Vec::with_capacity(1 + params.n_a * m_count);
    inputs.push(Vec2::ZERO);
    for l in 1..=m_count {
        let mag = (l as f64 * params.delta_u * u_max).min(u_max);
        for m in 1..=params.n_a {
            let a = m as f64 * theta_min;
            inputs.push(Vec2::new(a.sin(), a.cos()) * mag);
        }
    }
    inputs
}

/// Candidate inputs of one robot with their predicted states.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub inputs: Vec<Vec2>,
    pub predicted: Vec<Prediction>,
}

impl CandidateSet {
    pub fn new(robot: &RobotState, inputs: &[Vec2], t_p: f64, v_max: f64) -> Self {
        let predicted = inputs
            .iter()
            .map(|&u| propagate(robot.p, robot.v, u, t_p, v_max))
            .collect();
        CandidateSet {
            inputs: inputs.to_vec(),
            predicted,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// A robot's mean-field belief over its candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefDistribution {
    pub q: Vec<f64>,
}

impl BeliefDistribution {
    pub fn uniform(n: usize) -> Self {
        BeliefDistribution {
            q: vec![1.0 / n as f64; n],
        }
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &BeliefDistribution) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Index of the highest belief; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.q.iter().enumerate().skip(1) {
            if v > self.q[best] {
                best = k;
            }
        }
        best
    }
}

/// `q_c ∝ exp(−E_c)`, shifted by `min E` so the largest term is exactly 1.
pub fn mean_field_update(energies: &[f64]) -> BeliefDistribution {
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut q: Vec<f64> = energies.iter().map(|&e| (-(e - e_min)).exp()).collect();
    let z: f64 = q.iter().sum();
    for v in &mut q {
        *v /= z;
    }
    BeliefDistribution { q }
}

/// Index of the smallest energy; ties go to the lowest index, so the zero
/// input wins under indifference.
pub fn argmin(energies: &[f64]) -> usize {
    let mut best = 0;
    for (k, &e) in energies.iter().enumerate().skip(1) {
        if e < energies[best] {
            best = k;
        }
    }
    best
}

/// `(1 − α)·u_last + α·u*`, clamped to `u_max`.
pub fn apply_filter(u_star: Vec2, u_last: Vec2, alpha: f64, u_max: f64) -> Vec2 {
    (u_last * (1.0 - alpha) + u_star * alpha).clamp_norm(u_max)
}

/// Velocity set-point for platforms that only accept velocity commands.
pub fn accel_to_velocity_cmd(v: Vec2, u: Vec2, t_p: f64, v_max: f64) -> Vec2 {
    (v + u * t_p).clamp_norm(v_max)
}

/// Everything a controller needs to plan one step.
#[derive(Debug, Clone, Copy)]
pub struct World<'a> {
    pub robots: &'a [RobotState],
    pub obstacles: &'a [Obstacle],
    pub region: Option<&'a RegionState>,
    pub spec: &'a RobotSpec,
    pub potentials: &'a PotentialParams,
    pub shape: &'a ShapeParams,
}

/// Seam for swapping in other flocking controllers.
pub trait FlockController: Send + Sync {
    /// Returns one acceleration per robot, in the order of `world.robots`,
    /// before any low-pass filtering.
    fn plan(&self, world: &World<'_>) -> Vec<Vec2>;

    fn name(&self) -> &str;
}

/// Belief-independent part of one robot's energy landscape.
#[derive(Debug, Clone)]
pub struct LocalProblem {
    /// ψ_o + ψ_s + ψ_r per candidate.
    pub unary: Vec<f64>,
    pub w_o: f64,
    /// `(neighbor index, ψ_inter matrix)`; the matrix is row-major
    /// `[own candidate][neighbor candidate]`.
    pub pairs: Vec<(usize, Vec<f64>)>,
}

impl LocalProblem {
    pub fn energy(&self, c: usize, beliefs: &[BeliefDistribution]) -> f64 {
        let mut inter = 0.0;
        for (j, m) in &self.pairs {
            let q = &beliefs[*j].q;
            let row = &m[c * q.len()..(c + 1) * q.len()];
            inter += row.iter().zip(q).map(|(e, p)| e * p).sum::<f64>();
        }
        self.w_o * inter + self.unary[c]
    }

    pub fn energies(&self, beliefs: &[BeliefDistribution]) -> Vec<f64> {
        (0..self.unary.len()).map(|c| self.energy(c, beliefs)).collect()
    }
}

/// Result of one planning call, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub inputs: Vec<Vec2>,
    pub beliefs: Vec<BeliefDistribution>,
    pub rounds: usize,
    pub last_change: f64,
}

/// The Gibbs-random-field controller.
#[derive(Debug, Clone)]
pub struct GrfController {
    pub params: ControllerParams,
    inputs: Vec<Vec2>,
}

impl GrfController {
    pub fn new(params: ControllerParams, u_max: f64) -> Self {
        let inputs = enumerate_inputs(&params, u_max);
        GrfController { params, inputs }
    }

    pub fn inputs(&self) -> &[Vec2] {
        &self.inputs
    }

    pub fn candidate_sets(&self, world: &World<'_>) -> Vec<CandidateSet> {
        world
            .robots
            .iter()
            .map(|r| CandidateSet::new(r, &self.inputs, self.params.t_p, world.spec.v_max))
            .collect()
    }

    /// Builds robot `i`'s local energy terms. `i` and `neighbors` index
    /// into `world.robots`.
    pub fn local_problem(
        &self,
        i: usize,
        neighbors: &[usize],
        cands: &[CandidateSet],
        world: &World<'_>,
    ) -> LocalProblem {
        let pp = world.potentials;
        let me = &world.robots[i];
        let own = &cands[i];

        let current_betas = beta_agents_at(me.p, world.obstacles, pp.d_beta);
        let nearest = current_betas
            .iter()
            .map(|b| b.distance)
            .min_by(f64::total_cmp);
        let w_o = obstacle_weight_for(nearest, pp);

        let others: Vec<Vec2> = world
            .robots
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .map(|(_, r)| r.p)
            .collect();

        let reach = own
            .predicted
            .iter()
            .map(|x| x.p.distance(me.p))
            .fold(0.0, f64::max);
        let shape_cache = world
            .region
            .map(|r| ShapeEnergyCache::new(me.p, reach, &others, r, world.shape));

        let unary = own
            .inputs
            .iter()
            .zip(&own.predicted)
            .map(|(&u, x)| {
                let obstacle = if self.params.beta_from_predicted {
                    obstacle_term(x.p, &beta_agents_at(x.p, world.obstacles, pp.d_beta), pp)
                } else {
                    obstacle_term(x.p, &current_betas, pp)
                };
                let smooth = psi_s(x.v, u, me.u_last, pp);
                let shape = shape_cache
                    .as_ref()
                    .map(|c| c.energy(x.p).total())
                    .unwrap_or(0.0);
                obstacle + smooth + shape
            })
            .collect();

        let pairs = neighbors
            .iter()
            .map(|&j| {
                let theirs = &cands[j];
                let mut m = Vec::with_capacity(own.len() * theirs.len());
                for xi in &own.predicted {
                    for xj in &theirs.predicted {
                        m.push(psi_inter(xi.p, xi.v, xj.p, xj.v, pp));
                    }
                }
                (j, m)
            })
            .collect();

        LocalProblem { unary, w_o, pairs }
    }

    /// Full planning call with diagnostics.
    pub fn plan_detailed(&self, world: &World<'_>) -> PlanOutcome {
        let n = world.robots.len();
        if n == 0 {
            return PlanOutcome {
                inputs: Vec::new(),
                beliefs: Vec::new(),
                rounds: 0,
                last_change: 0.0,
            };
        }
        let cands = self.candidate_sets(world);
        let neighbor_sets = knn_all(world.robots, world.spec.k_neighbors);
        let problems: Vec<LocalProblem> = (0..n)
            .into_par_iter()
            .map(|i| self.local_problem(i, &neighbor_sets[i], &cands, world))
            .collect();

        let mut beliefs: Vec<BeliefDistribution> = cands
            .iter()
            .map(|c| BeliefDistribution::uniform(c.len()))
            .collect();
        let mut energies: Vec<Vec<f64>> = Vec::new();
        let mut rounds = 0;
        let mut last_change = f64::INFINITY;
        for _ in 0..self.params.mf_iterations {
            energies = problems.par_iter().map(|p| p.energies(&beliefs)).collect();
            let next: Vec<BeliefDistribution> =
                energies.iter().map(|e| mean_field_update(e)).collect();
            last_change = next
                .iter()
                .zip(&beliefs)
                .map(|(a, b)| a.max_abs_diff(b))
                .fold(0.0, f64::max);
            beliefs = next;
            rounds += 1;
            if last_change < self.params.mf_tolerance {
                break;
            }
        }
        log::trace!("mean field: {rounds} rounds, last belief change {last_change:.3e}");

        let inputs = energies
            .iter()
            .zip(&cands)
            .map(|(e, c)| c.inputs[argmin(e)])
            .collect();
        PlanOutcome {
            inputs,
            beliefs,
            rounds,
            last_change,
        }
    }
}

fn obstacle_term(p: Vec2, betas: &[BetaAgent], pp: &PotentialParams) -> f64 {
    if betas.is_empty() {
        return 0.0;
    }
    let q_beta = 1.0 / betas.len() as f64;
    betas
        .iter()
        .map(|b| q_beta * psi_o(p.distance(b.p), pp))
        .sum()
}

impl FlockController for GrfController {
    fn plan(&self, world: &World<'_>) -> Vec<Vec2> {
        self.plan_detailed(world).inputs
    }

    fn name(&self) -> &str {
        "grf"
    }
}

/// Total energy of candidate `c` for robot `i` (indices into
/// `world.robots`) given every robot's current belief.
pub fn candidate_energy(
    controller: &GrfController,
    i: usize,
    c: usize,
    beliefs: &[BeliefDistribution],
    world: &World<'_>,
) -> f64 {
    let cands = controller.candidate_sets(world);
    let neighbors = knn_all(world.robots, world.spec.k_neighbors);
    controller
        .local_problem(i, &neighbors[i], &cands, world)
        .energy(c, beliefs)
}

/// Plans accelerations for every robot in `world` with the GRF controller.
pub fn plan_step(controller: &GrfController, world: &World<'_>) -> Vec<Vec2> {
    controller.plan(world)
}
