//! Decentralized multi-arm simulation on a fixed-rate simulated clock.
//!
//! Every tick, external arms advance along their trajectories, each
//! controlled arm's solver receives a snapshot of all other arms' current
//! joint positions, and the commands are applied together at tick end (a
//! kinematic plant). No solver ever sees another solver's command before it
//! is applied.

use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{arm_seed, ControlledArm, Scenario};
use crate::costs::CostWeights;
use crate::error::{Error, Result};
use crate::kinematics::{Arm, ArmState, Pose, WorldSphere};
use crate::model::{AllowedCollisionMatrix, ArmRole};
use crate::proximity::ProximityConfig;
use crate::solver::{SolveStatus, Solver, SolverConfig, StepLimit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub trial: usize,
    pub tick: usize,
    /// Tick time; `q_cmd` is the arm's position from `stamp + dt` on.
    pub stamp: f64,
    pub arm: String,
    pub controlled: bool,
    /// Position every solver saw at `stamp`.
    pub q_observed: Vec<f64>,
    pub q_cmd: Vec<f64>,
    /// End-effector pose of `q_cmd`: position, then quaternion `[w, x, y, z]`.
    pub ee_position: [f64; 3],
    pub ee_orientation: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoint: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_position: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_orientation: Option<[f64; 4]>,
    /// Smallest active-pair gap at `stamp` (m), absent when nothing is near.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_gap: Option<f64>,
    #[serde(default)]
    pub active_pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<SolveStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
    /// `(id_a, id_b, gap)` of every active pair, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<Vec<(usize, usize, f64)>>,
}

/// Records of one trial, tick-major, arms in scenario order within a tick.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RunLog {
    pub trial: usize,
    pub records: Vec<TickRecord>,
}

impl RunLog {
    pub fn arm_names(&self) -> Vec<String> {
        let first = self.records.first().map(|r| r.tick);
        self.records.iter().take_while(|r| Some(r.tick) == first).map(|r| r.arm.clone()).collect()
    }

    pub fn num_ticks(&self) -> usize {
        self.records.last().map_or(0, |r| r.tick + 1)
    }

    pub fn arm_records<'a>(&'a self, arm: &'a str) -> impl Iterator<Item = &'a TickRecord> + 'a {
        self.records.iter().filter(move |r| r.arm == arm)
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(|e| Error::Config(e.to_string()))?;
            out.write_all(b"\n").map_err(|e| Error::io("<log>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<log>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: TickRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Syntax { location: format!("line {}", i + 1), message: e.to_string() })?;
            records.push(r);
        }
        let trial = records.first().map_or(0, |r| r.trial);
        Ok(Self { trial, records })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Record active pairs in every controlled record.
    pub dump_active_pairs: bool,
}

fn quat_array(q: &nalgebra::UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

/// Offline settle from `home` onto the first goal: repeated solves from rest
/// with kinodynamic limits and noise off. `obstacles` are the other arms'
/// spheres at the start, numbered for `acm`.
pub fn settle_start(
    arm: &ControlledArm,
    acm: &AllowedCollisionMatrix,
    obstacles: &[WorldSphere],
    solver: &SolverConfig,
    proximity: &ProximityConfig,
    dt: f64,
) -> Result<Vec<f64>> {
    let weights = CostWeights { noise_magnitude: 0.0, j_max: 1e12, w_kino: 0.0, ..arm.weights.clone() };
    let config = SolverConfig { step_limit: StepLimit::PerJoint, ..solver.clone() };
    let mut s = Solver::new(arm.arm.clone(), acm.clone(), weights, *proximity, config, 0)?;
    let goal = arm.goal(arm.waypoint_at(0.0));
    let mut q = arm.home.clone();
    for _ in 0..400 {
        let state = ArmState::new(q.clone(), 0.0);
        let r = s.solve(&state, obstacles, &goal, dt)?;
        let moved = r.q_cmd.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = r.q_cmd;
        if moved < 1e-10 {
            break;
        }
    }
    Ok(q)
}

/// One arm as another arm's solver sees it: model, base and ACM slot.
struct Other {
    /// Index into the scenario's arm list (controlled first, then external).
    arm: usize,
    offset: usize,
}

/// The spheres of `others` renumbered into the observing solver's ACM.
fn obstacle_spheres(others: &[Other], spheres: &[Option<Vec<WorldSphere>>]) -> Vec<WorldSphere> {
    others
        .iter()
        .enumerate()
        .flat_map(|(slot, o)| {
            spheres[o.arm].iter().flatten().map(move |s| WorldSphere {
                object: o.offset + s.object,
                arm: slot + 1,
                ..*s
            })
        })
        .collect()
}

struct ControlledRuntime {
    solver: Solver,
    state: ArmState,
    others: Vec<Other>,
}

/// Runs one trial.
pub fn run_scenario(scenario: &Scenario, trial: usize, options: RunOptions) -> Result<RunLog> {
    let cfg = &scenario.config;
    let dt = scenario.dt();
    let arms: Vec<&Arm> =
        scenario.controlled.iter().map(|c| &c.arm).chain(scenario.external.iter().map(|e| &e.arm)).collect();
    let nc = scenario.controlled.len();

    // arms settle in order, each around the externals and the arms already placed
    let mut placed: Vec<Option<Vec<WorldSphere>>> = vec![None; arms.len()];
    for (j, e) in scenario.external.iter().enumerate() {
        placed[nc + j] = Some(e.arm.spheres(&e.trajectory.sample(0.0), 0, 0));
    }
    let mut runtimes = Vec::with_capacity(nc);
    for (i, c) in scenario.controlled.iter().enumerate() {
        let mut acm_arms = vec![(c.arm.model.as_ref(), ArmRole::Controlled)];
        let other_ids: Vec<usize> = (0..arms.len()).filter(|&j| j != i).collect();
        acm_arms.extend(other_ids.iter().map(|&j| (arms[j].model.as_ref(), ArmRole::External)));
        let acm = AllowedCollisionMatrix::build(&acm_arms);
        let others: Vec<Other> =
            other_ids.iter().enumerate().map(|(slot, &j)| Other { arm: j, offset: acm.arm_offset(slot + 1) }).collect();
        let ready: Vec<usize> = other_ids.iter().copied().filter(|&j| placed[j].is_some()).collect();
        let mut settle_arms = vec![(c.arm.model.as_ref(), ArmRole::Controlled)];
        settle_arms.extend(ready.iter().map(|&j| (arms[j].model.as_ref(), ArmRole::External)));
        let settle_acm = AllowedCollisionMatrix::build(&settle_arms);
        let ready: Vec<Other> = ready
            .iter()
            .enumerate()
            .map(|(slot, &j)| Other { arm: j, offset: settle_acm.arm_offset(slot + 1) })
            .collect();
        let obstacles = obstacle_spheres(&ready, &placed);
        let start = settle_start(c, &settle_acm, &obstacles, &cfg.solver, &cfg.proximity, dt)?;
        placed[i] = Some(c.arm.spheres(&start, 0, 0));
        let seed = arm_seed(cfg.seed, trial, &c.name);
        let solver = Solver::new(c.arm.clone(), acm, c.weights.clone(), cfg.proximity, cfg.solver.clone(), seed)?;
        runtimes.push(ControlledRuntime { solver, state: ArmState::new(start, 0.0), others });
    }

    let ticks = scenario.num_ticks();
    let mut records = Vec::with_capacity(ticks * arms.len());
    for k in 0..ticks {
        let t = scenario.tick_stamp(k);
        let t_next = scenario.tick_stamp(k + 1);
        let mut snapshot: Vec<Vec<f64>> = runtimes.iter().map(|r| r.state.q.clone()).collect();
        snapshot.extend(scenario.external.iter().map(|e| e.trajectory.sample(t)));
        let spheres: Vec<Option<Vec<WorldSphere>>> =
            arms.iter().zip(&snapshot).map(|(a, q)| Some(a.spheres(q, 0, 0))).collect();

        let outcomes: Vec<_> = runtimes
            .par_iter_mut()
            .zip(scenario.controlled.par_iter())
            .map(|(rt, c)| {
                let externals = obstacle_spheres(&rt.others, &spheres);
                let waypoint = c.waypoint_at(t);
                let goal = c.goal(waypoint);
                (waypoint, goal, rt.solver.solve(&rt.state, &externals, &goal, dt))
            })
            .collect();

        for (i, (waypoint, goal, outcome)) in outcomes.into_iter().enumerate() {
            let rt = &mut runtimes[i];
            let q_observed = rt.state.q.clone();
            let mut rec = TickRecord {
                trial,
                tick: k,
                stamp: t,
                arm: scenario.controlled[i].name.clone(),
                controlled: true,
                q_observed: q_observed.clone(),
                q_cmd: q_observed.clone(),
                ee_position: [0.0; 3],
                ee_orientation: [1.0, 0.0, 0.0, 0.0],
                waypoint: Some(waypoint),
                reference_position: Some(goal.target.position.into()),
                reference_orientation: Some(quat_array(&goal.target.orientation)),
                min_gap: None,
                active_pairs: 0,
                status: None,
                iterations: None,
                error: None,
                wall_time: None,
                active: None,
            };
            match outcome {
                Ok(r) => {
                    rec.q_cmd = r.q_cmd;
                    rec.min_gap = r.active_pairs.first().map(|p| p.gap);
                    rec.active_pairs = r.active_pairs.len();
                    rec.status = Some(r.status);
                    rec.iterations = Some(r.iterations);
                    rec.wall_time = Some(r.wall_time);
                    if options.dump_active_pairs {
                        rec.active = Some(r.active_pairs.iter().map(|p| (p.id_a, p.id_b, p.gap)).collect());
                    }
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            let pose = rt.solver.arm.end_effector_pose(&rec.q_cmd);
            rec.ee_position = pose.position.into();
            rec.ee_orientation = quat_array(&pose.orientation);
            rt.state.commit(rec.q_cmd.clone(), t_next, cfg.filter_alpha)?;
            records.push(rec);
        }
        for (j, e) in scenario.external.iter().enumerate() {
            let q_cmd = e.trajectory.sample(t_next);
            let pose = e.arm.end_effector_pose(&q_cmd);
            records.push(TickRecord {
                trial,
                tick: k,
                stamp: t,
                arm: e.name.clone(),
                controlled: false,
                q_observed: snapshot[nc + j].clone(),
                q_cmd,
                ee_position: pose.position.into(),
                ee_orientation: quat_array(&pose.orientation),
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
            });
        }
    }
    Ok(RunLog { trial, records })
}

/// Runs every trial, in parallel.
pub fn run_trials(scenario: &Scenario, options: RunOptions) -> Result<Vec<RunLog>> {
    (0..scenario.config.trials).into_par_iter().map(|t| run_scenario(scenario, t, options)).collect()
}

/// Pose helper for records.
pub fn record_pose(r: &TickRecord) -> Pose {
    let [w, x, y, z] = r.ee_orientation;
    Pose::new(r.ee_position.into(), nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z)))
}
