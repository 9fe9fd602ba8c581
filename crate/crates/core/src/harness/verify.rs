//! Offline collision check of recorded runs on refined sphere geometry.

use serde::Serialize;

use super::run::RunLog;
use crate::error::{Error, Result};
use crate::kinematics::{Arm, WorldSphere};
use crate::model::{AllowedCollisionMatrix, ArmRole};
use crate::proximity::{broad_phase, compute_aabbs, narrow_phase};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    /// Ticks in which some checked pair penetrates.
    pub collisions: usize,
    pub first_collision_tick: Option<usize>,
    /// Smallest gap seen over all checked states (m).
    pub min_gap: f64,
    pub states_checked: usize,
}

/// Arms of a scenario with their roles, in log order.
#[derive(Clone, Debug)]
pub struct VerificationArm {
    pub name: String,
    pub arm: Arm,
    pub role: ArmRole,
}

/// Rebuilds every arm at `sphere_factor` times its sphere budget, then checks
/// each recorded tick and `substeps` interpolated states leading up to it.
/// A tick counts once however many pairs penetrate.
pub fn verify_collisions_offline(
    log: &RunLog,
    arms: &[VerificationArm],
    sphere_factor: usize,
    substeps: usize,
) -> Result<VerificationReport> {
    if sphere_factor == 0 || substeps == 0 {
        return Err(Error::Config("sphere_factor and substeps must be at least 1".into()));
    }
    let refined: Vec<Arm> = arms
        .iter()
        .map(|a| {
            let m = a.arm.model.with_max_spheres(a.arm.model.spheres.max_per_link * sphere_factor);
            Arm::new(std::sync::Arc::new(m), a.arm.base)
        })
        .collect();
    let roles: Vec<(&crate::model::RobotModel, ArmRole)> =
        refined.iter().zip(arms).map(|(r, a)| (r.model.as_ref(), a.role)).collect();
    let acm = AllowedCollisionMatrix::build(&roles);

    let ticks = log.num_ticks();
    // (observed, commanded) per tick and arm
    type Slot<'a> = Option<(&'a [f64], &'a [f64])>;
    let mut per_tick: Vec<Vec<Slot>> = vec![vec![None; arms.len()]; ticks];
    for r in &log.records {
        let Some(a) = arms.iter().position(|a| a.name == r.arm) else {
            return Err(Error::Config(format!("log names unknown arm {}", r.arm)));
        };
        per_tick[r.tick][a] = Some((&r.q_observed, &r.q_cmd));
    }

    let min_gap_at = |configs: &[Vec<f64>]| -> f64 {
        let mut scene: Vec<WorldSphere> = Vec::with_capacity(acm.len());
        for (i, (arm, q)) in refined.iter().zip(configs).enumerate() {
            scene.extend(arm.spheres(q, i, acm.arm_offset(i)));
        }
        let boxes = compute_aabbs(&scene, 0.0).expect("zero inflation");
        narrow_phase(&broad_phase(&boxes, &acm), &scene).first().map_or(f64::INFINITY, |p| p.gap)
    };

    let mut report =
        VerificationReport { collisions: 0, first_collision_tick: None, min_gap: f64::INFINITY, states_checked: 0 };
    for (k, row) in per_tick.iter().enumerate() {
        let mut before = Vec::with_capacity(arms.len());
        let mut after = Vec::with_capacity(arms.len());
        for (a, entry) in row.iter().enumerate() {
            let Some((observed, cmd)) = entry else {
                return Err(Error::Config(format!("tick {k} has no record for arm {}", arms[a].name)));
            };
            before.push(observed.to_vec());
            after.push(cmd.to_vec());
        }
        let first = if k == 0 { 0 } else { 1 };
        let mut hit = false;
        for j in first..=substeps {
            let f = j as f64 / substeps as f64;
            let configs: Vec<Vec<f64>> = before
                .iter()
                .zip(&after)
                .map(|(b, a)| b.iter().zip(a).map(|(x, y)| x + f * (y - x)).collect())
                .collect();
            let gap = min_gap_at(&configs);
            report.states_checked += 1;
            report.min_gap = report.min_gap.min(gap);
            hit |= gap < 0.0;
        }
        if hit {
            report.collisions += 1;
            report.first_collision_tick.get_or_insert(k);
        }
    }
    Ok(report)
}
