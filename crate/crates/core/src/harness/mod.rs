//! Scenario simulation: reference paths, external-arm playback, ticking the
//! controlled arms' solvers, offline collision checks and error metrics.

mod metrics;
mod path;
mod run;
mod scenario;
mod trajectory;
mod verify;

pub use metrics::{compute_metrics, metrics_csv, pose_error, AxisStats, ReferenceSchedule, RunMetrics, CSV_HEADER};
pub use path::{generate_path, waypoint_index, PathShape, PathSpec, Plane, Waypoint, DEFAULT_SAMPLE_PERIOD};
pub use run::{record_pose, run_scenario, run_trials, settle_start, RunLog, RunOptions, TickRecord};
pub use scenario::{
    arm_seed, ControlledArm, ControlledArmConfig, ExternalArm, ExternalArmConfig, Scenario, ScenarioConfig, ScenarioId,
    VerificationConfig,
};
pub use trajectory::JointTrajectory;
pub use verify::{verify_collisions_offline, VerificationArm, VerificationReport};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::ArmRole;

/// Everything the metrics file holds. Contains no wall-clock data, so equal
/// seeds give byte-identical documents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub scenario: ScenarioId,
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub ticks: usize,
    pub collisions: usize,
    pub collisions_per_trial: Vec<usize>,
    pub min_gap: f64,
    pub arms: Vec<RunMetrics>,
}

pub struct ScenarioReport {
    pub logs: Vec<RunLog>,
    pub verification: Vec<VerificationReport>,
    pub metrics: MetricsDocument,
}

impl Scenario {
    pub fn verification_arms(&self) -> Vec<VerificationArm> {
        let controlled = self.controlled.iter().map(|c| VerificationArm {
            name: c.name.clone(),
            arm: c.arm.clone(),
            role: ArmRole::Controlled,
        });
        let external = self.external.iter().map(|e| VerificationArm {
            name: e.name.clone(),
            arm: e.arm.clone(),
            role: ArmRole::External,
        });
        controlled.chain(external).collect()
    }

    pub fn verify(&self, log: &RunLog) -> Result<VerificationReport> {
        let v = &self.config.verification;
        verify_collisions_offline(log, &self.verification_arms(), v.sphere_factor, v.substeps)
    }

    pub fn metrics(&self, logs: &[RunLog], verification: &[VerificationReport]) -> Result<MetricsDocument> {
        let collisions_per_trial: Vec<usize> = verification.iter().map(|v| v.collisions).collect();
        let collisions = collisions_per_trial.iter().sum();
        let arms = compute_metrics(logs, &ReferenceSchedule::for_scenario(self), collisions)?;
        Ok(MetricsDocument {
            scenario: self.config.id,
            name: self.config.name.clone(),
            seed: self.config.seed,
            trials: logs.len(),
            ticks: self.num_ticks(),
            collisions,
            collisions_per_trial,
            min_gap: verification.iter().map(|v| v.min_gap).fold(f64::INFINITY, f64::min),
            arms,
        })
    }

    /// Runs all trials, verifies each and computes the metrics.
    pub fn evaluate(&self, options: RunOptions) -> Result<ScenarioReport> {
        use rayon::prelude::*;
        let logs = run_trials(self, options)?;
        let verification = logs.par_iter().map(|l| self.verify(l)).collect::<Result<Vec<_>>>()?;
        let metrics = self.metrics(&logs, &verification)?;
        Ok(ScenarioReport { logs, verification, metrics })
    }
}
