//! Link states, collision-sphere placement and command-history derivatives.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{Isometry3, Point3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::ad::Scalar;
use crate::error::{check_len, Error, Result};
use crate::geom::{Frame, M3, V3};
use crate::model::{JointKind, RobotModel};

/// End-effector pose; the quaternion is kept with a non-negative scalar part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        let orientation =
            if orientation.w < 0.0 { UnitQuaternion::new_unchecked(-orientation.into_inner()) } else { orientation };
        Self { position, orientation }
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(self.position.into(), self.orientation)
    }
}

/// World frame of every link of a chain, generic over the scalar so the same
/// code yields exact derivatives.
pub fn link_frames<S: Scalar>(model: &RobotModel, base: &Frame<S>, q: &[S]) -> Vec<Frame<S>> {
    let mut frames = Vec::with_capacity(model.links.len());
    frames.push(*base);
    let mut next_q = 0;
    for joint in &model.joints {
        let parent = frames[joint.parent_link];
        let mut frame = parent.compose(&Frame::cst(&joint.origin));
        if joint.kind == JointKind::Revolute {
            frame = frame.rotate(&M3::axis_angle(&joint.axis, q[next_q]));
            next_q += 1;
        }
        frames.push(frame);
    }
    frames
}

/// Link transforms relative to the model root.
pub fn forward_kinematics(model: &RobotModel, q: &[f64]) -> Result<Vec<Isometry3<f64>>> {
    check_len(model.dof(), q.len())?;
    Ok(link_frames(model, &Frame::identity(), q).iter().map(Frame::value).collect())
}

pub fn end_effector_pose(model: &RobotModel, q: &[f64]) -> Result<Pose> {
    check_len(model.dof(), q.len())?;
    let frames = link_frames(model, &Frame::identity(), q);
    Ok(Pose::from_isometry(&frames[model.end_effector].value()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WorldSphere {
    /// Global collision-object id (see [`crate::model::AllowedCollisionMatrix`]).
    pub object: usize,
    pub arm: usize,
    pub link: usize,
    pub center: Vector3<f64>,
    pub radius: f64,
}

pub type WorldSpheres = Vec<WorldSphere>;

/// Sphere centers of a root-mounted model, arm 0, ids equal to model ids.
pub fn sphere_world_positions(model: &RobotModel, q: &[f64]) -> Result<WorldSpheres> {
    check_len(model.dof(), q.len())?;
    Ok(Arm::new(Arc::new(model.clone()), Isometry3::identity()).spheres(q, 0, 0))
}

/// A robot model mounted at a base pose in the world.
#[derive(Clone, Debug)]
pub struct Arm {
    pub model: Arc<RobotModel>,
    pub base: Isometry3<f64>,
}

impl Arm {
    pub fn new(model: Arc<RobotModel>, base: Isometry3<f64>) -> Self {
        Self { model, base }
    }

    pub fn dof(&self) -> usize {
        self.model.dof()
    }

    pub fn frames<S: Scalar>(&self, q: &[S]) -> Vec<Frame<S>> {
        link_frames(&self.model, &Frame::cst(&self.base), q)
    }

    pub fn end_effector_pose(&self, q: &[f64]) -> Pose {
        Pose::from_isometry(&self.frames(q)[self.model.end_effector].value())
    }

    /// World spheres with ids offset by `first_object`.
    pub fn spheres(&self, q: &[f64], arm: usize, first_object: usize) -> WorldSpheres {
        let frames: Vec<Isometry3<f64>> = self.frames(q).iter().map(Frame::value).collect();
        self.model
            .spheres
            .iter()
            .map(|(link, s)| WorldSphere {
                object: first_object + s.id,
                arm,
                link,
                center: frames[link].transform_point(&Point3::from(s.center)).coords,
                radius: s.radius,
            })
            .collect()
    }

    /// Sphere centers in generic scalars, model id order.
    pub fn sphere_centers<S: Scalar>(&self, q: &[S]) -> Vec<V3<S>> {
        let frames = self.frames(q);
        self.model.spheres.iter().map(|(link, s)| frames[link].apply(&V3::cst(&s.center))).collect()
    }
}

/// Flags for derivatives that could not be formed yet for lack of history.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WarmUp {
    pub velocity: bool,
    pub acceleration: bool,
    pub jerk: bool,
}

impl WarmUp {
    pub fn any(&self) -> bool {
        self.velocity || self.acceleration || self.jerk
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Derivatives {
    pub qdot: Vec<f64>,
    pub qddot: Vec<f64>,
    pub qdddot: Vec<f64>,
    pub warm_up: WarmUp,
}

/// Backward-difference velocity, acceleration and jerk.
///
/// `samples` holds positions most recent first: `[q_t, q_{t-1}, q_{t-2}, q_{t-3}]`.
/// Orders lacking history are reported as zero and flagged.
pub fn backward_difference_derivatives(samples: &[&[f64]], dt: f64) -> Result<Derivatives> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let Some(first) = samples.first() else {
        return Err(Error::param("samples", "need at least the current position"));
    };
    let n = first.len();
    for s in samples {
        check_len(n, s.len())?;
    }
    let depth = samples.len() - 1;
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| (x - y) / dt).collect() };
    // velocities at t, t-1, t-2 as far as history allows
    let vel: Vec<Vec<f64>> = (0..depth.min(3)).map(|k| diff(samples[k], samples[k + 1])).collect();
    let acc: Vec<Vec<f64>> = (0..vel.len().saturating_sub(1)).map(|k| diff(&vel[k], &vel[k + 1])).collect();
    let jerk: Vec<Vec<f64>> = (0..acc.len().saturating_sub(1)).map(|k| diff(&acc[k], &acc[k + 1])).collect();
    let zeros = vec![0.0; n];
    Ok(Derivatives {
        qdot: vel.first().cloned().unwrap_or_else(|| zeros.clone()),
        qddot: acc.first().cloned().unwrap_or_else(|| zeros.clone()),
        qdddot: jerk.first().cloned().unwrap_or(zeros),
        warm_up: WarmUp { velocity: vel.is_empty(), acceleration: acc.is_empty(), jerk: jerk.is_empty() },
    })
}

/// Exponential moving average `alpha * raw + (1 - alpha) * previous`.
pub fn filter_derivatives(raw: &[f64], previous: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("must lie in [0, 1], got {alpha}")));
    }
    check_len(raw.len(), previous.len())?;
    Ok(raw.iter().zip(previous).map(|(r, p)| alpha * r + (1.0 - alpha) * p).collect())
}

pub const DEFAULT_FILTER_ALPHA: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct Command {
    pub stamp: f64,
    pub q: Vec<f64>,
}

/// Current joint state of one arm plus the history the kinodynamic terms need.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmState {
    pub q: Vec<f64>,
    pub stamp: f64,
    /// Previous commands, most recent first, at most three.
    pub history: VecDeque<Command>,
    pub qdot: Vec<f64>,
    pub qddot: Vec<f64>,
    pub qdddot: Vec<f64>,
    pub warm_up: WarmUp,
}

impl ArmState {
    pub const HISTORY_DEPTH: usize = 3;

    /// Arm at rest at `q`.
    pub fn new(q: Vec<f64>, stamp: f64) -> Self {
        let n = q.len();
        Self {
            q,
            stamp,
            history: VecDeque::with_capacity(Self::HISTORY_DEPTH),
            qdot: vec![0.0; n],
            qddot: vec![0.0; n],
            qdddot: vec![0.0; n],
            warm_up: WarmUp { velocity: true, acceleration: true, jerk: true },
        }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    /// Applies a new command as the current position and refreshes the
    /// filtered derivative estimates.
    pub fn commit(&mut self, q: Vec<f64>, stamp: f64, alpha: f64) -> Result<()> {
        check_len(self.q.len(), q.len())?;
        if !(stamp > self.stamp) {
            return Err(Error::param("stamp", format!("must increase ({stamp} after {})", self.stamp)));
        }
        let dt = stamp - self.stamp;
        let previous = std::mem::replace(&mut self.q, q);
        self.history.push_front(Command { stamp: self.stamp, q: previous });
        self.history.truncate(Self::HISTORY_DEPTH);
        self.stamp = stamp;

        let mut samples: Vec<&[f64]> = vec![&self.q];
        samples.extend(self.history.iter().map(|c| c.q.as_slice()));
        let raw = backward_difference_derivatives(&samples, dt)?;
        let blend = |raw: &[f64], prev: &[f64], was_warming: bool| -> Result<Vec<f64>> {
            // the first available estimate seeds the filter
            if was_warming {
                Ok(raw.to_vec())
            } else {
                filter_derivatives(raw, prev, alpha)
            }
        };
        if !raw.warm_up.velocity {
            self.qdot = blend(&raw.qdot, &self.qdot, self.warm_up.velocity)?;
        }
        if !raw.warm_up.acceleration {
            self.qddot = blend(&raw.qddot, &self.qddot, self.warm_up.acceleration)?;
        }
        if !raw.warm_up.jerk {
            self.qdddot = blend(&raw.qdddot, &self.qdddot, self.warm_up.jerk)?;
        }
        self.warm_up = raw.warm_up;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_robot_description;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn planar() -> RobotModel {
        parse_robot_description(crate::model::tests::PLANAR2).unwrap()
    }

    /// The planar fixture's end link frame sits at the second joint; add a
    /// 0.5 m tool offset to reach the tip.
    fn tip(model: &RobotModel, q: &[f64]) -> Vector3<f64> {
        let frames = forward_kinematics(model, q).unwrap();
        frames[2].transform_point(&Point3::new(0.5, 0.0, 0.0)).coords
    }

    #[test]
    fn zero_configuration() {
        let m = planar();
        assert_relative_eq!(tip(&m, &[0.0, 0.0]), Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        let frames = forward_kinematics(&m, &[0.0, 0.0]).unwrap();
        assert_eq!(frames[0], Isometry3::identity());
        assert_relative_eq!(frames[2].rotation.angle(), 0.0);
    }

    #[test]
    fn quarter_turn_of_the_base() {
        let m = planar();
        assert_relative_eq!(tip(&m, &[FRAC_PI_2, 0.0]), Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let m = planar();
        assert!(matches!(forward_kinematics(&m, &[0.0]), Err(Error::Dimension { expected: 2, got: 1 })));
        assert!(end_effector_pose(&m, &[0.0; 3]).is_err());
        assert!(sphere_world_positions(&m, &[]).is_err());
    }

    #[test]
    fn pose_is_hemisphere_normalized() {
        let q = UnitQuaternion::from_euler_angles(0.3, -1.0, 2.0);
        let neg = UnitQuaternion::new_unchecked(-q.into_inner());
        assert_eq!(Pose::new(Vector3::zeros(), q), Pose::new(Vector3::zeros(), neg));
        assert!(Pose::new(Vector3::zeros(), neg).orientation.w >= 0.0);
    }

    #[test]
    fn base_rotation_by_pi_negates_x_and_y() {
        let m = planar();
        let at_zero = sphere_world_positions(&m, &[0.0, 0.0]).unwrap();
        let turned = sphere_world_positions(&m, &[PI, 0.0]).unwrap();
        for (a, b) in at_zero.iter().zip(&turned) {
            assert_relative_eq!(b.center, Vector3::new(-a.center.x, -a.center.y, a.center.z), epsilon = 1e-15);
            assert_eq!(a.radius, b.radius);
        }
        assert_relative_eq!(at_zero[0].center, Vector3::new(0.25, 0.0, 0.0));
    }

    #[test]
    fn constant_history_has_zero_derivatives() {
        let q = [0.4, -0.2];
        let d = backward_difference_derivatives(&[&q, &q, &q, &q], 0.01).unwrap();
        assert_eq!(d.qdot, vec![0.0, 0.0]);
        assert_eq!(d.qddot, vec![0.0, 0.0]);
        assert_eq!(d.qdddot, vec![0.0, 0.0]);
        assert!(!d.warm_up.any());
    }

    #[test]
    fn hand_evaluated_sequence() {
        let s: [&[f64]; 4] = [&[0.06], &[0.03], &[0.01], &[0.0]];
        let d = backward_difference_derivatives(&s, 0.01).unwrap();
        assert_relative_eq!(d.qdot[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(d.qddot[0], 100.0, epsilon = 1e-9);
        assert!(d.qdddot[0].abs() < 1e-6);
    }

    #[test]
    fn warm_up_reports_zero() {
        let d = backward_difference_derivatives(&[&[1.0], &[0.5]], 0.1).unwrap();
        assert_relative_eq!(d.qdot[0], 5.0);
        assert_eq!(d.qddot[0], 0.0);
        assert!(d.warm_up.acceleration && d.warm_up.jerk && !d.warm_up.velocity);
        assert!(backward_difference_derivatives(&[&[1.0]], 0.0).is_err());
    }

    #[test]
    fn ema_filter() {
        assert_eq!(filter_derivatives(&[10.0], &[0.0], 0.2).unwrap(), vec![2.0]);
        assert_eq!(filter_derivatives(&[3.0], &[7.0], 1.0).unwrap(), vec![3.0]);
        assert_eq!(filter_derivatives(&[3.0], &[7.0], 0.0).unwrap(), vec![7.0]);
        assert!(filter_derivatives(&[3.0], &[7.0], 1.5).is_err());
    }

    #[test]
    fn state_commit_tracks_history_and_derivatives() {
        let mut s = ArmState::new(vec![0.0], 0.0);
        for (k, q) in [0.01, 0.03, 0.06].iter().enumerate() {
            s.commit(vec![*q], 0.01 * (k + 1) as f64, 1.0).unwrap();
        }
        assert_eq!(s.history.len(), 3);
        assert_relative_eq!(s.qdot[0], 3.0, epsilon = 1e-9);
        assert_relative_eq!(s.qddot[0], 100.0, epsilon = 1e-7);
        assert!(!s.warm_up.any());
        assert!(s.commit(vec![0.0], 0.0, 0.5).is_err());
    }
}
