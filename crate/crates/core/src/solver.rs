//! Bound-constrained Levenberg-Marquardt over the joint commands of one arm.
//!
//! Robust losses enter through iteratively reweighted normal equations:
//! every block contributes `w * rho'(s) * J^T J` and `w * rho'(s) * J^T r`.
//! Steps are clipped to an infinity-norm radius derived from the arm's jerk
//! limit and trial points are projected onto the joint bounds, so returned
//! commands always lie inside them.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ad::{Jet, Scalar, MAX_VARS};
use crate::costs::{
    apply_robust_loss, collision_residual, ee_terms, gap_between, joint_limit_residuals, kinodynamic_residuals,
    preferred_position_residuals, CostFamily, CostWeights, GoalSpec, Loss, ResidualBlock,
};
use crate::error::{check_len, Error, Result};
use crate::geom::V3;
use crate::kinematics::{Arm, ArmState, WorldSphere};
use crate::model::{AllowedCollisionMatrix, JointLimits};
use crate::proximity::{ActivePair, ProximityConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepLimit {
    /// One radius for all joints: the smallest per-joint displacement bound.
    Uniform,
    /// Each joint clipped to its own displacement bound.
    PerJoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Converged when the applied step's infinity norm falls below this (rad).
    pub step_tolerance: f64,
    pub cost_tolerance: f64,
    pub gradient_tolerance: f64,
    pub initial_lambda: f64,
    /// Upper bound on the step radius regardless of the jerk rule (rad).
    pub radius_cap: f64,
    pub step_limit: StepLimit,
    /// Box on the whole command's displacement from the current configuration.
    pub displacement_box: DisplacementBox,
}

/// Per-tick limit on `|q_cmd - q|`, on top of the per-iteration radius.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplacementBox {
    None,
    /// The jerk-rule displacement of each joint.
    Jerk,
    /// Velocity limit times the tick period.
    Velocity,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            step_tolerance: 1e-7,
            cost_tolerance: 1e-9,
            gradient_tolerance: 1e-10,
            initial_lambda: 1e-3,
            radius_cap: 0.1,
            step_limit: StepLimit::Uniform,
            displacement_box: DisplacementBox::Velocity,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.radius_cap > 0.0) || !(self.initial_lambda > 0.0) {
            return Err(Error::Config("radius_cap and initial_lambda must be positive".into()));
        }
        Ok(())
    }
}

pub const LAMBDA_MIN: f64 = 1e-9;
pub const LAMBDA_MAX: f64 = 1e9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// The current configuration already penetrates an obstacle.
    InfeasibleStart,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrustRegionState {
    pub lambda: f64,
    /// Infinity-norm bound on a step (rad).
    pub radius: f64,
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveResult {
    pub q_cmd: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Weighted robust cost per family at `q_cmd`.
    pub cost_breakdown: BTreeMap<CostFamily, f64>,
    pub cost: f64,
    /// Total cost of the start point and of every accepted iterate.
    pub accepted_costs: Vec<f64>,
    pub trust_region: TrustRegionState,
    pub active_pairs: Vec<ActivePair>,
    pub wall_time: f64,
}

/// Largest displacement per joint reachable in one tick without exceeding
/// `j_max`, given the current velocity and acceleration.
pub fn max_step_from_jerk(state: &ArmState, dt: f64, j_max: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    Ok(state
        .qdot
        .iter()
        .zip(&state.qddot)
        .map(|(v, a)| v.abs() * dt + a.abs() * dt * dt / 2.0 + j_max * dt.powi(3) / 6.0)
        .collect())
}

/// `clamp(q_curr + u)` with `u` uniform in `[-noise, noise]` per joint.
pub fn initialize_variables<R: Rng>(q_curr: &[f64], lower: &[f64], upper: &[f64], noise: f64, rng: &mut R) -> Vec<f64> {
    q_curr
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let u = if noise > 0.0 { rng.gen_range(-noise..=noise) } else { 0.0 };
            (q + u).clamp(lower[i], upper[i])
        })
        .collect()
}

/// Collision pair seen from the solver: the first sphere always moves with
/// the controlled arm, the second either too (self-collision) or is fixed.
#[derive(Clone, Copy, Debug)]
enum PairGeometry {
    Cross { a: usize, r_a: f64, center_b: nalgebra::Vector3<f64>, r_b: f64 },
    SelfPair { a: usize, r_a: f64, b: usize, r_b: f64 },
}

/// The objective of one tick: fixed goal, state, obstacles and active pairs.
pub struct Objective<'a> {
    pub arm: &'a Arm,
    pub state: &'a ArmState,
    pub goal: &'a GoalSpec,
    pub weights: &'a CostWeights,
    pub dt: f64,
    limits: Vec<JointLimits>,
    q_pref: Vec<f64>,
    pairs: Vec<PairGeometry>,
}

impl<'a> Objective<'a> {
    /// `active` holds pairs with ids in a scene where the controlled arm's
    /// spheres come first (ids `0..num_controlled`).
    pub fn new(
        arm: &'a Arm,
        state: &'a ArmState,
        goal: &'a GoalSpec,
        weights: &'a CostWeights,
        dt: f64,
        active: &[ActivePair],
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        check_len(arm.dof(), state.dof())?;
        goal.validate()?;
        weights.validate()?;
        let limits = arm.model.limits();
        let q_pref = weights.preferred_posture(&limits)?;
        let own = arm.model.spheres.len();
        let pairs = active
            .iter()
            .map(|p| {
                if p.id_a >= own {
                    return Err(Error::Config(format!("active pair {} does not start on the controlled arm", p.id_a)));
                }
                Ok(if p.id_b < own {
                    PairGeometry::SelfPair { a: p.id_a, r_a: p.r_a, b: p.id_b, r_b: p.r_b }
                } else {
                    PairGeometry::Cross { a: p.id_a, r_a: p.r_a, center_b: p.center_b, r_b: p.r_b }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { arm, state, goal, weights, dt, limits, q_pref, pairs })
    }

    pub fn limits(&self) -> &[JointLimits] {
        &self.limits
    }

    pub fn blocks<S: Scalar>(&self, q: &[S]) -> Vec<ResidualBlock<S>> {
        let w = self.weights;
        let frames = self.arm.frames(q);
        let ee = ResidualBlock {
            label: CostFamily::EndEffector,
            residuals: ee_terms(&frames[self.arm.model.end_effector], self.goal),
            loss: Loss::Identity,
            weight: w.w_ee,
        };

        let centers: Vec<V3<S>> = if self.pairs.is_empty() {
            Vec::new()
        } else {
            self.arm.model.spheres.iter().map(|(link, s)| frames[link].apply(&V3::cst(&s.center))).collect()
        };
        let collision = ResidualBlock {
            label: CostFamily::Collision,
            residuals: self
                .pairs
                .iter()
                .map(|p| {
                    let gap = match *p {
                        PairGeometry::Cross { a, r_a, center_b, r_b } => {
                            gap_between(&centers[a], r_a, &V3::cst(&center_b), r_b)
                        }
                        PairGeometry::SelfPair { a, r_a, b, r_b } => gap_between(&centers[a], r_a, &centers[b], r_b),
                    };
                    collision_residual(gap, w.eps_coll, w.gap_floor)
                })
                .collect(),
            loss: Loss::Identity,
            weight: w.w_coll,
        };

        let mut pref = preferred_position_residuals(q, &self.q_pref, w.w_pref).expect("checked at construction");
        pref.weight = w.w_pref;
        let mut limit = joint_limit_residuals(q, &self.limits, w.eps_limit).expect("checked at construction");
        limit.weight = w.w_poslim;
        let mut kino = kinodynamic_residuals(q, self.state, self.dt, &self.limits, w.j_max, w.tukey_a)
            .expect("checked at construction");
        kino.weight = w.w_kino;
        vec![ee, collision, pref, limit, kino]
    }

    pub fn cost(&self, q: &[f64]) -> f64 {
        self.blocks(q).iter().map(|b| apply_robust_loss(b).cost).sum()
    }

    pub fn breakdown(&self, q: &[f64]) -> BTreeMap<CostFamily, f64> {
        self.blocks(q).iter().map(|b| (b.label, apply_robust_loss(b).cost)).collect()
    }

    /// Cost, reweighted gradient `J^T W r` and Gauss-Newton matrix `J^T W J`.
    pub fn linearize(&self, q: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let n = q.len();
        let jets = Jet::variables(q);
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        let mut cost = 0.0;
        for block in self.blocks(&jets) {
            let term = apply_robust_loss(&block);
            cost += term.cost;
            let w = block.weight * term.rho_prime;
            if w == 0.0 {
                continue;
            }
            for r in &block.residuals {
                let row = &r.d[..n];
                for i in 0..n {
                    if row[i] == 0.0 {
                        continue;
                    }
                    g[i] += w * row[i] * r.v;
                    for j in 0..n {
                        h[(i, j)] += w * row[i] * row[j];
                    }
                }
            }
        }
        (cost, g, h)
    }
}

/// One controlled arm's solver. Owns its noise stream, so consecutive solves
/// draw fresh noise while the whole sequence stays reproducible.
#[derive(Clone, Debug)]
pub struct Solver {
    pub arm: Arm,
    /// Controlled arm first, then the external arms whose spheres a solve sees.
    pub acm: AllowedCollisionMatrix,
    pub weights: CostWeights,
    pub proximity: ProximityConfig,
    pub config: SolverConfig,
    rng: ChaCha8Rng,
}

impl Solver {
    pub fn new(
        arm: Arm,
        acm: AllowedCollisionMatrix,
        weights: CostWeights,
        proximity: ProximityConfig,
        config: SolverConfig,
        seed: u64,
    ) -> Result<Self> {
        if arm.dof() > MAX_VARS {
            return Err(Error::Config(format!("{} joints exceed the supported {MAX_VARS}", arm.dof())));
        }
        if acm.num_arms() == 0
            || acm.arm_offset(0) != 0
            || acm.objects().iter().filter(|o| o.arm == 0).count() != arm.model.spheres.len()
        {
            return Err(Error::Config("the ACM must list the controlled arm first".into()));
        }
        weights.validate()?;
        proximity.validate()?;
        config.validate()?;
        Ok(Self { arm, acm, weights, proximity, config, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    /// Active pairs at the current configuration. `externals` holds the world
    /// spheres of the other arms in ACM order (ids from the first external).
    pub fn active_pairs(&self, q: &[f64], externals: &[WorldSphere]) -> Result<Vec<ActivePair>> {
        let mut scene = self.arm.spheres(q, 0, 0);
        scene.extend_from_slice(externals);
        self.proximity.active_pairs(&scene, &self.acm)
    }

    pub fn solve(
        &mut self,
        state: &ArmState,
        externals: &[WorldSphere],
        goal: &GoalSpec,
        dt: f64,
    ) -> Result<SolveResult> {
        let start = Instant::now();
        check_len(self.arm.dof(), state.dof())?;
        let active = self.active_pairs(&state.q, externals)?;
        let objective = Objective::new(&self.arm, state, goal, &self.weights, dt, &active)?;
        let step_bounds = max_step_from_jerk(state, dt, self.weights.j_max)?;
        let mut lower = self.arm.model.lower_bounds();
        let mut upper = self.arm.model.upper_bounds();
        if self.config.displacement_box != DisplacementBox::None {
            for (i, limits) in self.arm.model.limits().iter().enumerate() {
                let reach = match self.config.displacement_box {
                    DisplacementBox::Jerk => step_bounds[i],
                    _ => limits.velocity * dt,
                }
                .min(self.config.radius_cap);
                lower[i] = lower[i].max(state.q[i] - reach);
                upper[i] = upper[i].min(state.q[i] + reach);
                // a start beyond a joint limit is pulled back onto it
                lower[i] = lower[i].min(upper[i]);
            }
        }
        let q_init = initialize_variables(&state.q, &lower, &upper, self.weights.noise_magnitude, &mut self.rng);
        let mut result = minimize(&objective, q_init, &lower, &upper, &step_bounds, &self.config);
        if active.iter().any(|p| p.gap < 0.0) {
            result.status = SolveStatus::InfeasibleStart;
        }
        result.active_pairs = active;
        result.wall_time = start.elapsed().as_secs_f64();
        Ok(result)
    }
}

/// Levenberg-Marquardt from `q_init`; `step_bounds` are the per-joint
/// displacement limits of the jerk rule.
pub fn minimize(
    objective: &Objective,
    q_init: Vec<f64>,
    lower: &[f64],
    upper: &[f64],
    step_bounds: &[f64],
    config: &SolverConfig,
) -> SolveResult {
    let n = q_init.len();
    let uniform = step_bounds.iter().copied().fold(config.radius_cap, f64::min);
    let bounds: Vec<f64> = match config.step_limit {
        StepLimit::Uniform => vec![uniform; n],
        StepLimit::PerJoint => step_bounds.iter().map(|b| b.min(config.radius_cap)).collect(),
    };
    let mut tr = TrustRegionState {
        lambda: config.initial_lambda,
        radius: bounds.iter().copied().fold(f64::INFINITY, f64::min),
        accepted: 0,
        rejected: 0,
    };

    let mut q = q_init;
    let (mut cost, mut g, mut h) = objective.linearize(&q);
    let mut accepted_costs = vec![cost];
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        if g.amax() < config.gradient_tolerance {
            status = SolveStatus::Converged;
            break;
        }
        iterations += 1;
        let mut a = h.clone();
        for i in 0..n {
            a[(i, i)] += tr.lambda * h[(i, i)].max(1e-12);
        }
        let Some(chol) = a.cholesky() else {
            tr.lambda = (tr.lambda * 2.0).min(LAMBDA_MAX);
            tr.rejected += 1;
            continue;
        };
        let mut delta = chol.solve(&(-&g));
        // keep the direction, shrink until every joint fits its bound
        let scale = (0..n).map(|i| bounds[i] / delta[i].abs().max(f64::MIN_POSITIVE)).fold(1.0, f64::min);
        delta *= scale;
        let candidate: Vec<f64> = (0..n).map(|i| (q[i] + delta[i]).clamp(lower[i], upper[i])).collect();
        let step = (0..n).map(|i| (candidate[i] - q[i]).abs()).fold(0.0, f64::max);
        if step < config.step_tolerance {
            status = SolveStatus::Converged;
            break;
        }
        let new_cost = objective.cost(&candidate);
        if new_cost < cost {
            let relative = (cost - new_cost) / cost.abs().max(f64::MIN_POSITIVE);
            q = candidate;
            tr.lambda = (tr.lambda / 3.0).max(LAMBDA_MIN);
            tr.accepted += 1;
            (cost, g, h) = objective.linearize(&q);
            accepted_costs.push(cost);
            if relative < config.cost_tolerance {
                status = SolveStatus::Converged;
                break;
            }
        } else {
            tr.lambda = (tr.lambda * 2.0).min(LAMBDA_MAX);
            tr.rejected += 1;
        }
    }

    SolveResult {
        cost_breakdown: objective.breakdown(&q),
        q_cmd: q,
        status,
        iterations,
        cost,
        accepted_costs,
        trust_region: tr,
        active_pairs: Vec::new(),
        wall_time: 0.0,
    }
}
