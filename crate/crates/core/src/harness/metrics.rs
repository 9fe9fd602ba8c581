//! Tracking-error statistics.

use serde::{Deserialize, Serialize};

use super::run::{record_pose, RunLog};
use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::geom::{rotation_vector, M3};
use crate::kinematics::Pose;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AxisStats {
    pub mean: f64,
    pub std: f64,
}

impl AxisStats {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// Absolute end-effector error of one controlled arm: position in mm,
/// rotation-vector components in mrad.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub arm: String,
    pub samples: usize,
    pub x: AxisStats,
    pub y: AxisStats,
    pub z: AxisStats,
    pub roll: AxisStats,
    pub pitch: AxisStats,
    pub yaw: AxisStats,
    pub collisions: usize,
}

impl RunMetrics {
    pub fn mean_position(&self) -> f64 {
        (self.x.mean + self.y.mean + self.z.mean) / 3.0
    }

    pub fn mean_orientation(&self) -> f64 {
        (self.roll.mean + self.pitch.mean + self.yaw.mean) / 3.0
    }
}

/// Reference pose per tick for one arm.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSchedule {
    pub arm: String,
    pub stamps: Vec<f64>,
    pub poses: Vec<Pose>,
}

impl ReferenceSchedule {
    /// The waypoint in force at every tick of a scenario.
    pub fn for_scenario(scenario: &Scenario) -> Vec<Self> {
        let ticks = scenario.num_ticks();
        scenario
            .controlled
            .iter()
            .map(|c| {
                let stamps: Vec<f64> = (0..ticks).map(|k| scenario.tick_stamp(k)).collect();
                let poses = stamps.iter().map(|t| c.goal(c.waypoint_at(*t)).target).collect();
                Self { arm: c.name.clone(), stamps, poses }
            })
            .collect()
    }
}

/// Per-axis errors of one pose against a reference.
pub fn pose_error(actual: &Pose, reference: &Pose) -> [f64; 6] {
    let p = actual.position - reference.position;
    let desired = M3::cst(reference.orientation.to_rotation_matrix().matrix());
    let current = M3::cst(actual.orientation.to_rotation_matrix().matrix());
    let r = rotation_vector(&desired.mul(&current.transpose()));
    [p.x, p.y, p.z, r.x, r.y, r.z]
}

/// Statistics over all ticks of all trials. `collisions` is attached to
/// every arm's row.
pub fn compute_metrics(
    logs: &[RunLog],
    references: &[ReferenceSchedule],
    collisions: usize,
) -> Result<Vec<RunMetrics>> {
    let mut out = Vec::with_capacity(references.len());
    for reference in references {
        let mut axes: [Vec<f64>; 6] = Default::default();
        for log in logs {
            let records: Vec<_> = log.arm_records(&reference.arm).collect();
            if records.len() != reference.stamps.len() {
                return Err(Error::MisalignedStamps(format!(
                    "arm {} trial {}: {} records for {} reference ticks",
                    reference.arm,
                    log.trial,
                    records.len(),
                    reference.stamps.len()
                )));
            }
            for (r, (stamp, pose)) in records.iter().zip(reference.stamps.iter().zip(&reference.poses)) {
                if (r.stamp - stamp).abs() > 1e-9 {
                    return Err(Error::MisalignedStamps(format!(
                        "arm {} trial {} tick {}: log stamp {} vs reference {}",
                        reference.arm, log.trial, r.tick, r.stamp, stamp
                    )));
                }
                let e = pose_error(&record_pose(r), pose);
                for (axis, v) in axes.iter_mut().zip(e) {
                    axis.push(v.abs() * 1e3);
                }
            }
        }
        let [x, y, z, roll, pitch, yaw] = axes.each_ref().map(|v| AxisStats::of(v));
        out.push(RunMetrics {
            arm: reference.arm.clone(),
            samples: axes[0].len(),
            x,
            y,
            z,
            roll,
            pitch,
            yaw,
            collisions,
        });
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "scenario,arm,x_mean,x_std,y_mean,y_std,z_mean,z_std,roll_mean,roll_std,pitch_mean,pitch_std,yaw_mean,yaw_std,collisions";

/// One CSV row per arm, columns ordered x, y, z, roll, pitch, yaw, collisions.
pub fn metrics_csv(scenario: &str, metrics: &[RunMetrics]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for m in metrics {
        out.push_str(&format!("{scenario},{}", m.arm));
        for a in [m.x, m.y, m.z, m.roll, m.pitch, m.yaw] {
            out.push_str(&format!(",{:.6},{:.6}", a.mean, a.std));
        }
        out.push_str(&format!(",{}\n", m.collisions));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::TickRecord;
    use nalgebra::{UnitQuaternion, Vector3};

    fn record(tick: usize, position: Vector3<f64>) -> TickRecord {
        TickRecord {
            trial: 0,
            tick,
            stamp: tick as f64 * 0.01,
            arm: "a".into(),
            controlled: true,
            q_observed: vec![],
            q_cmd: vec![],
            ee_position: position.into(),
            ee_orientation: [1.0, 0.0, 0.0, 0.0],
            waypoint: None,
            reference_position: None,
            reference_orientation: None,
            min_gap: None,
            active_pairs: 0,
            status: None,
            iterations: None,
            error: None,
            wall_time: None,
            active: None,
        }
    }

    fn schedule(n: usize) -> ReferenceSchedule {
        ReferenceSchedule {
            arm: "a".into(),
            stamps: (0..n).map(|k| k as f64 * 0.01).collect(),
            poses: vec![Pose::new(Vector3::zeros(), UnitQuaternion::identity()); n],
        }
    }

    #[test]
    fn perfect_and_constant_offsets() {
        let log = RunLog { trial: 0, records: (0..10).map(|k| record(k, Vector3::zeros())).collect() };
        let m = &compute_metrics(&[log], &[schedule(10)], 0).unwrap()[0];
        assert_eq!(m.x, AxisStats::default());
        assert_eq!(m.yaw, AxisStats::default());

        let log = RunLog { trial: 0, records: (0..10).map(|k| record(k, Vector3::new(0.005, 0.0, 0.0))).collect() };
        let m = &compute_metrics(&[log], &[schedule(10)], 0).unwrap()[0];
        assert!((m.x.mean - 5.0).abs() < 1e-12);
        assert!(m.x.std < 1e-12);
    }

    #[test]
    fn misaligned_stamps_are_rejected() {
        let log = RunLog { trial: 0, records: (0..9).map(|k| record(k, Vector3::zeros())).collect() };
        assert!(matches!(compute_metrics(&[log], &[schedule(10)], 0), Err(Error::MisalignedStamps(_))));
        let mut log = RunLog { trial: 0, records: (0..10).map(|k| record(k, Vector3::zeros())).collect() };
        log.records[3].stamp = 0.5;
        assert!(compute_metrics(&[log], &[schedule(10)], 0).is_err());
    }
}
