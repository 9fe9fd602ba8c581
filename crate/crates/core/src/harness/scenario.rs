//! Scenario configuration files and their loaded form.
//!
//! Relative model and trajectory paths are resolved against the directory of
//! the configuration file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use super::path::{generate_path, PathSpec, Waypoint};
use super::trajectory::JointTrajectory;
use crate::costs::{CostWeights, GoalMode, GoalSpec};
use crate::error::{Error, Result};
use crate::geom::XyzRpy;
use crate::kinematics::{Arm, Pose, DEFAULT_FILTER_ALPHA};
use crate::model::RobotModel;
use crate::proximity::ProximityConfig;
use crate::solver::SolverConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    S4,
}

impl ScenarioId {
    /// Required `(controlled, external)` arm counts.
    pub fn arm_counts(self) -> (usize, usize) {
        match self {
            ScenarioId::S1 => (1, 0),
            ScenarioId::S2 => (1, 1),
            ScenarioId::S3 => (1, 2),
            ScenarioId::S4 => (2, 0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlledArmConfig {
    pub name: String,
    pub model: PathBuf,
    #[serde(default)]
    pub base: XyzRpy,
    /// Configuration the arm settles from onto the first waypoint.
    pub home: Vec<f64>,
    pub path: PathSpec,
    /// Fixed tool orientation along the path (world frame roll, pitch, yaw).
    #[serde(default)]
    pub orientation_rpy: [f64; 3],
    #[serde(default = "default_goal_mode")]
    pub goal_mode: GoalMode,
    #[serde(default = "one")]
    pub w11: f64,
    #[serde(default = "one")]
    pub w12: f64,
    #[serde(default)]
    pub weights: CostWeights,
    /// Shifts the arm along its path by this many seconds.
    #[serde(default)]
    pub path_offset: f64,
}

fn default_goal_mode() -> GoalMode {
    GoalMode::Pose
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalArmConfig {
    pub name: String,
    pub model: PathBuf,
    #[serde(default)]
    pub base: XyzRpy,
    pub trajectory: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationConfig {
    /// Sphere budget multiplier for the refined geometry.
    pub sphere_factor: usize,
    /// Interpolation substeps between consecutive ticks.
    pub substeps: usize,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        Self { sphere_factor: 2, substeps: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: ScenarioId,
    pub name: String,
    #[serde(default = "default_tick_rate")]
    pub tick_rate: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Simulated time; defaults to the longest controlled path.
    #[serde(default)]
    pub duration: Option<f64>,
    #[serde(default)]
    pub expect_no_collisions: bool,
    pub controlled: Vec<ControlledArmConfig>,
    #[serde(default)]
    pub external: Vec<ExternalArmConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub proximity: ProximityConfig,
    #[serde(default = "default_alpha")]
    pub filter_alpha: f64,
    #[serde(default)]
    pub verification: VerificationConfig,
}

fn default_tick_rate() -> f64 {
    100.0
}

fn default_trials() -> usize {
    5
}

fn default_alpha() -> f64 {
    DEFAULT_FILTER_ALPHA
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::from_json)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[derive(Clone, Debug)]
pub struct ControlledArm {
    pub name: String,
    pub arm: Arm,
    pub home: Vec<f64>,
    pub path: PathSpec,
    pub waypoints: Vec<Waypoint>,
    pub orientation: UnitQuaternion<f64>,
    pub goal_mode: GoalMode,
    pub w11: f64,
    pub w12: f64,
    pub weights: CostWeights,
    pub path_offset: f64,
}

impl ControlledArm {
    /// Index of the waypoint in force at simulated time `t`.
    pub fn waypoint_at(&self, t: f64) -> usize {
        let n = self.waypoints.len();
        let shifted = t + self.path_offset;
        let period = self.path.sample_period;
        // offset paths wrap around the closed curve
        let k = ((shifted / period) + 1e-9).floor() as usize;
        if self.path_offset != 0.0 && n > 1 {
            k % (n - 1)
        } else {
            k.min(n - 1)
        }
    }

    pub fn goal(&self, waypoint: usize) -> GoalSpec {
        let pose = Pose::new(self.waypoints[waypoint].position, self.orientation);
        GoalSpec { mode: self.goal_mode, target: pose, w11: self.w11, w12: self.w12 }
    }
}

#[derive(Clone, Debug)]
pub struct ExternalArm {
    pub name: String,
    pub arm: Arm,
    pub trajectory: JointTrajectory,
}

/// A validated scenario with every file loaded.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub controlled: Vec<ControlledArm>,
    pub external: Vec<ExternalArm>,
    pub duration: f64,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let config = ScenarioConfig::from_file(path)?;
        Self::from_config(config, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_config(config: ScenarioConfig, base_dir: &Path) -> Result<Self> {
        let (nc, ne) = config.id.arm_counts();
        if config.controlled.len() != nc || config.external.len() != ne {
            return Err(Error::Config(format!(
                "{:?} needs {nc} controlled and {ne} external arms, got {} and {}",
                config.id,
                config.controlled.len(),
                config.external.len()
            )));
        }
        if !(config.tick_rate > 0.0) {
            return Err(Error::Config("tick_rate must be positive".into()));
        }
        if config.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&config.filter_alpha) {
            return Err(Error::Config("filter_alpha must lie in [0, 1]".into()));
        }
        if config.verification.sphere_factor == 0 || config.verification.substeps == 0 {
            return Err(Error::Config("verification sphere_factor and substeps must be at least 1".into()));
        }
        config.solver.validate()?;
        config.proximity.validate()?;
        let mut names: Vec<&str> = config.controlled.iter().map(|c| c.name.as_str()).collect();
        names.extend(config.external.iter().map(|e| e.name.as_str()));
        let mut sorted = names.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(Error::Config("arm names must be unique".into()));
        }

        let mut controlled = Vec::new();
        for c in &config.controlled {
            let model = Arc::new(RobotModel::from_file(resolve(base_dir, &c.model))?);
            if c.home.len() != model.dof() {
                return Err(Error::Config(format!(
                    "arm {}: home has {} values, model has {} joints",
                    c.name,
                    c.home.len(),
                    model.dof()
                )));
            }
            c.weights.validate()?;
            c.weights.preferred_posture(&model.limits())?;
            let waypoints = generate_path(&c.path)?;
            let [r, p, y] = c.orientation_rpy;
            let arm = ControlledArm {
                name: c.name.clone(),
                arm: Arm::new(model, c.base.to_isometry()),
                home: c.home.clone(),
                path: c.path,
                waypoints,
                orientation: UnitQuaternion::from_euler_angles(r, p, y),
                goal_mode: c.goal_mode,
                w11: c.w11,
                w12: c.w12,
                weights: c.weights.clone(),
                path_offset: c.path_offset,
            };
            arm.goal(0).validate()?;
            controlled.push(arm);
        }
        let mut external = Vec::new();
        for e in &config.external {
            let model = Arc::new(RobotModel::from_file(resolve(base_dir, &e.model))?);
            let trajectory = JointTrajectory::from_file(&resolve(base_dir, &e.trajectory))?;
            if trajectory.dof() != model.dof() {
                return Err(Error::Config(format!(
                    "arm {}: trajectory has {} joints, model has {}",
                    e.name,
                    trajectory.dof(),
                    model.dof()
                )));
            }
            external.push(ExternalArm { name: e.name.clone(), arm: Arm::new(model, e.base.to_isometry()), trajectory });
        }
        let duration = match config.duration {
            Some(d) if d > 0.0 => d,
            Some(d) => return Err(Error::Config(format!("duration must be positive, got {d}"))),
            None => controlled.iter().map(|c| c.path.duration).fold(0.0, f64::max),
        };
        Ok(Self { config, controlled, external, duration })
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.config.tick_rate
    }

    /// `ceil(tick_rate * duration)`, robust to the rounding of the product.
    pub fn num_ticks(&self) -> usize {
        let x = self.config.tick_rate * self.duration;
        (x - 1e-9).ceil().max(1.0) as usize
    }

    pub fn tick_stamp(&self, k: usize) -> f64 {
        k as f64 / self.config.tick_rate
    }
}

/// Seed of one arm's noise stream in one trial, independent of which other
/// arms take part.
pub fn arm_seed(seed: u64, trial: usize, name: &str) -> u64 {
    // FNV-1a over the name, mixed with the scenario seed and trial
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut x = seed ^ h ^ (trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}
