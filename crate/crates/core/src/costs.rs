//! Residual blocks and robust losses.
//!
//! Every residual function is generic over [`Scalar`]: evaluated on `f64` it
//! gives the cost, on [`crate::ad::Jet`] it also gives the exact Jacobian.
//! The objective is `sum_k weight_k * rho_k(|r_k|^2)`.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::ad::Scalar;
use crate::error::{check_len, Error, Result};
use crate::geom::{rotation_vector, Frame, M3, V3};
use crate::kinematics::{ArmState, Pose};
use crate::model::JointLimits;
use crate::proximity::ActivePair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostFamily {
    EndEffector,
    Collision,
    PreferredPosture,
    JointLimit,
    Kinodynamic,
}

impl CostFamily {
    pub const ALL: [CostFamily; 5] = [
        CostFamily::EndEffector,
        CostFamily::Collision,
        CostFamily::PreferredPosture,
        CostFamily::JointLimit,
        CostFamily::Kinodynamic,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Identity,
    Cauchy,
    /// Biweight with scale `a`: quadratic near zero, constant for `s > a²`.
    Tukey {
        a: f64,
    },
}

impl Loss {
    /// `(rho(s), rho'(s))`, normalized so that `rho'(0) = 1`.
    pub fn evaluate(&self, s: f64) -> (f64, f64) {
        match *self {
            Loss::Identity => (s, 1.0),
            Loss::Cauchy => (s.ln_1p(), 1.0 / (1.0 + s)),
            Loss::Tukey { a } => {
                let a2 = a * a;
                if s <= a2 {
                    let t = 1.0 - s / a2;
                    (a2 / 3.0 * (1.0 - t * t * t), t * t)
                } else {
                    (a2 / 3.0, 0.0)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualBlock<S = f64> {
    pub label: CostFamily,
    pub residuals: Vec<S>,
    pub loss: Loss,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobustTerm {
    /// Squared residual norm.
    pub s: f64,
    /// `weight * rho(s)`.
    pub cost: f64,
    /// `rho'(s)`, the reweighting factor of the block.
    pub rho_prime: f64,
}

pub fn apply_robust_loss<S: Scalar>(block: &ResidualBlock<S>) -> RobustTerm {
    let s: f64 = block.residuals.iter().map(|r| r.value() * r.value()).sum();
    let (rho, rho_prime) = block.loss.evaluate(s);
    RobustTerm { s, cost: block.weight * rho, rho_prime }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalMode {
    Position,
    Orientation,
    Pose,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub mode: GoalMode,
    pub target: Pose,
    /// Position weight.
    pub w11: f64,
    /// Orientation weight.
    pub w12: f64,
}

impl GoalSpec {
    pub fn position(p: Vector3<f64>, w: f64) -> Self {
        Self { mode: GoalMode::Position, target: Pose::new(p, UnitQuaternion::identity()), w11: w, w12: 0.0 }
    }

    pub fn orientation(q: UnitQuaternion<f64>, w: f64) -> Self {
        Self { mode: GoalMode::Orientation, target: Pose::new(Vector3::zeros(), q), w11: 0.0, w12: w }
    }

    pub fn pose(target: Pose, w11: f64, w12: f64) -> Self {
        Self { mode: GoalMode::Pose, target: Pose::new(target.position, target.orientation), w11, w12 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.mode {
            GoalMode::Position => self.w11 >= 0.0 && self.w12 == 0.0,
            GoalMode::Orientation => self.w11 == 0.0 && self.w12 >= 0.0,
            GoalMode::Pose => self.w11 > 0.0 && self.w12 > 0.0,
        };
        if ok && self.w11.is_finite() && self.w12.is_finite() {
            Ok(())
        } else {
            Err(Error::param("goal", format!("weights ({}, {}) do not fit mode {:?}", self.w11, self.w12, self.mode)))
        }
    }
}

/// Weights and shape parameters of the objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    pub w_ee: f64,
    pub w_coll: f64,
    pub w_pref: f64,
    pub w_poslim: f64,
    pub w_kino: f64,
    /// Collision scale (m).
    pub eps_coll: f64,
    /// Joint-limit barrier offset (rad).
    pub eps_limit: f64,
    /// Preferred posture; the center of the joint ranges when absent.
    pub q_pref: Option<Vec<f64>>,
    /// rad/s³
    pub j_max: f64,
    /// Half-width of the uniform noise added to the initial guess (rad).
    pub noise_magnitude: f64,
    /// Smallest gap the collision residual divides by (m).
    pub gap_floor: f64,
    /// Scale of the kinodynamic Tukey loss.
    pub tukey_a: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            w_ee: 1.0e4,
            w_coll: 5.0,
            w_pref: 0.1,
            w_poslim: 1.0,
            w_kino: 1.0,
            eps_coll: 0.02,
            eps_limit: 0.01,
            q_pref: None,
            j_max: 10.0,
            noise_magnitude: 0.005,
            gap_floor: 1.0e-4,
            tukey_a: 0.5,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.w_ee, self.w_coll, self.w_pref, self.w_poslim, self.w_kino, self.noise_magnitude];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::param("weights", "must be finite and non-negative"));
        }
        for (name, v) in [
            ("eps_coll", self.eps_coll),
            ("eps_limit", self.eps_limit),
            ("j_max", self.j_max),
            ("gap_floor", self.gap_floor),
            ("tukey_a", self.tukey_a),
        ] {
            if !(v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn preferred_posture(&self, limits: &[JointLimits]) -> Result<Vec<f64>> {
        match &self.q_pref {
            Some(q) => {
                check_len(limits.len(), q.len())?;
                Ok(q.clone())
            }
            None => Ok(limits.iter().map(|l| 0.5 * (l.lower + l.upper)).collect()),
        }
    }
}

/// Six residuals: weighted position error, then weighted rotation vector of
/// `R_des * R_curr^T`. Components of a zero weight are exactly zero.
pub fn ee_terms<S: Scalar>(current: &Frame<S>, goal: &GoalSpec) -> Vec<S> {
    let mut out = vec![S::zero(); 6];
    if goal.w11 > 0.0 {
        let w = goal.w11.sqrt();
        let d = current.pos.sub(&V3::cst(&goal.target.position));
        out[0] = d.x.scale(w);
        out[1] = d.y.scale(w);
        out[2] = d.z.scale(w);
    }
    if goal.w12 > 0.0 {
        let w = goal.w12.sqrt();
        let desired = M3::cst(goal.target.orientation.to_rotation_matrix().matrix());
        let e = rotation_vector(&desired.mul(&current.rot.transpose()));
        out[3] = e.x.scale(w);
        out[4] = e.y.scale(w);
        out[5] = e.z.scale(w);
    }
    out
}

pub fn ee_residuals(current: &Pose, goal: &GoalSpec) -> ResidualBlock {
    let frame = Frame::cst(&current.to_isometry());
    ResidualBlock {
        label: CostFamily::EndEffector,
        residuals: ee_terms(&frame, goal),
        loss: Loss::Identity,
        weight: 1.0,
    }
}

/// Gap between two spheres. Coincident centers get a constant distance so the
/// derivative stays finite.
pub fn gap_between<S: Scalar>(ca: &V3<S>, ra: f64, cb: &V3<S>, rb: f64) -> S {
    let d2 = ca.sub(cb).norm_squared();
    let d = if d2.value() > 1e-24 { d2.sqrt() } else { S::zero() };
    d - S::cst(ra + rb)
}

/// `eps / gap`, with `gap` floored at `gap_floor`; penetration grows the
/// residual linearly in depth so it is always worse than contact.
pub fn collision_residual<S: Scalar>(gap: S, eps: f64, gap_floor: f64) -> S {
    let g = gap.value();
    if g >= gap_floor {
        S::cst(eps) / gap
    } else if g >= 0.0 {
        S::cst(eps / gap_floor)
    } else {
        (S::cst(1.0) - gap.scale(1.0 / gap_floor)).scale(eps / gap_floor)
    }
}

pub fn collision_residuals(active: &[ActivePair], eps_coll: f64, gap_floor: f64) -> ResidualBlock {
    ResidualBlock {
        label: CostFamily::Collision,
        residuals: active.iter().map(|p| collision_residual(p.gap, eps_coll, gap_floor)).collect(),
        loss: Loss::Identity,
        weight: 1.0,
    }
}

pub fn preferred_position_residuals<S: Scalar>(q_cmd: &[S], q_pref: &[f64], w_pref: f64) -> Result<ResidualBlock<S>> {
    check_len(q_pref.len(), q_cmd.len())?;
    Ok(ResidualBlock {
        label: CostFamily::PreferredPosture,
        residuals: q_cmd.iter().zip(q_pref).map(|(q, p)| *q - S::cst(*p)).collect(),
        loss: Loss::Cauchy,
        weight: w_pref,
    })
}

/// Distance below which the lower barrier stops following `eps / d` and
/// continues linearly, keeping it finite up to and past the bound.
pub const BARRIER_FLOOR: f64 = 1.0e-4;

/// Lower and upper barrier residuals per joint, interleaved:
/// `eps / (q - q_l - eps)` and `eps / (q - q_u - eps)`.
pub fn joint_limit_residuals<S: Scalar>(q_cmd: &[S], limits: &[JointLimits], eps: f64) -> Result<ResidualBlock<S>> {
    check_len(limits.len(), q_cmd.len())?;
    let mut residuals = Vec::with_capacity(2 * q_cmd.len());
    for (q, l) in q_cmd.iter().zip(limits) {
        let lower = *q - S::cst(l.lower + eps);
        let r_l = if lower.value() >= BARRIER_FLOOR {
            S::cst(eps) / lower
        } else {
            (S::cst(2.0) - lower.scale(1.0 / BARRIER_FLOOR)).scale(eps / BARRIER_FLOOR)
        };
        residuals.push(r_l);
        residuals.push(S::cst(eps) / (*q - S::cst(l.upper + eps)));
    }
    Ok(ResidualBlock { label: CostFamily::JointLimit, residuals, loss: Loss::Identity, weight: 1.0 })
}

fn hinge<S: Scalar>(x: S, limit: f64) -> S {
    let excess = x.abs() - S::cst(limit);
    if excess.value() > 0.0 {
        excess
    } else {
        S::zero()
    }
}

/// Per joint: velocity, acceleration and jerk excess over their limits for
/// the motion `q_curr -> q_cmd`, then the displacement `q_cmd - q_curr`.
pub fn kinodynamic_residuals<S: Scalar>(
    q_cmd: &[S],
    state: &ArmState,
    dt: f64,
    limits: &[JointLimits],
    j_max: f64,
    tukey_a: f64,
) -> Result<ResidualBlock<S>> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    check_len(state.dof(), q_cmd.len())?;
    check_len(limits.len(), q_cmd.len())?;
    let mut residuals = Vec::with_capacity(4 * q_cmd.len());
    for i in 0..q_cmd.len() {
        let disp = q_cmd[i] - S::cst(state.q[i]);
        let vel = disp.scale(1.0 / dt);
        let acc = (vel - S::cst(state.qdot[i])).scale(1.0 / dt);
        let jerk = (acc - S::cst(state.qddot[i])).scale(1.0 / dt);
        residuals.push(hinge(vel, limits[i].velocity));
        residuals.push(hinge(acc, limits[i].acceleration));
        residuals.push(hinge(jerk, j_max));
        residuals.push(disp);
    }
    Ok(ResidualBlock { label: CostFamily::Kinodynamic, residuals, loss: Loss::Tukey { a: tukey_a }, weight: 1.0 })
}
