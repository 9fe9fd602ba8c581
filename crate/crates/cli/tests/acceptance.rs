//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any hard criterion fails. The timing budget (9) is reported
//! but never fails the run.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use dcik::ad::Jet;
use dcik::costs::{
    collision_residual, gap_between, joint_limit_residuals, CostFamily, CostWeights, GoalMode, GoalSpec,
};
use dcik::geom::V3;
use dcik::harness::{
    run_scenario, RunMetrics, RunOptions, Scenario, ScenarioConfig, ScenarioId, ScenarioReport, VerificationArm,
};
use dcik::kinematics::{backward_difference_derivatives, Arm, ArmState, Pose, WorldSphere};
use dcik::model::{build_acm, AllowedCollisionMatrix, ArmRole, JointLimits, RobotModel};
use dcik::proximity::{sphere_gap, ProximityConfig};
use dcik::solver::{Objective, Solver, SolverConfig};
use nalgebra::{Isometry3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn model(name: &str) -> Arc<RobotModel> {
    Arc::new(RobotModel::from_file(scenarios().join("models").join(name)).unwrap())
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Corpus {
    reports: Vec<(ScenarioConfig, ScenarioReport)>,
    scenarios: Vec<Scenario>,
    seconds: f64,
}

fn run_corpus() -> Corpus {
    let mut files: Vec<PathBuf> = std::fs::read_dir(scenarios())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let start = Instant::now();
    let scenarios: Vec<Scenario> = files.iter().map(|f| Scenario::load(f).unwrap()).collect();
    let reports = scenarios.iter().map(|s| (s.config.clone(), s.evaluate(RunOptions::default()).unwrap())).collect();
    Corpus { reports, scenarios, seconds: start.elapsed().as_secs_f64() }
}

fn shape_key(config: &ScenarioConfig) -> &str {
    // names are s<k>_<shape>_<plane>
    &config.name[3..]
}

fn worst_axes(m: &RunMetrics) -> (f64, f64) {
    (m.x.mean.max(m.y.mean).max(m.z.mean), m.roll.mean.max(m.pitch.mean).max(m.yaw.mean))
}

fn zero_collisions(corpus: &Corpus) -> Outcome {
    let trials: usize = corpus.reports.iter().map(|(_, r)| r.verification.len()).sum();
    let colliding: Vec<String> = corpus
        .reports
        .iter()
        .filter(|(_, r)| r.metrics.collisions > 0)
        .map(|(c, r)| format!("{} ({})", c.name, r.metrics.collisions))
        .collect();
    let ticks: usize = corpus.reports.iter().map(|(_, r)| r.metrics.collisions).sum();
    let pass = colliding.is_empty() && trials == 5 * corpus.reports.len() && corpus.seconds < 300.0;
    let mut detail = format!(
        "{ticks} colliding ticks in {trials} trials over {} scenarios, {:.1} s (limit 300 s)",
        corpus.reports.len(),
        corpus.seconds
    );
    if !colliding.is_empty() {
        detail.push_str(&format!("; colliding: {}", colliding.join(", ")));
    }
    outcome(pass, detail)
}

fn free_space_tracking(corpus: &Corpus) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (c, r) in corpus.reports.iter().filter(|(c, _)| c.id == ScenarioId::S1) {
        let (pos, rot) = worst_axes(&r.metrics.arms[0]);
        pass &= pos < 10.0 && rot < 5.0;
        parts.push(format!("{} {pos:.2} mm/{rot:.2} mrad", shape_key(c)));
    }
    pass &= parts.len() == 6;
    outcome(pass, format!("worst per-axis means (limits 10 mm, 5 mrad): {}", parts.join(", ")))
}

fn obstruction_tradeoff(corpus: &Corpus) -> Outcome {
    let s1 = |key: &str| {
        corpus
            .reports
            .iter()
            .find(|(c, _)| c.id == ScenarioId::S1 && shape_key(c) == key)
            .map(|(_, r)| r.metrics.arms[0].mean_position())
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (c, r) in corpus.reports.iter().filter(|(c, _)| c.id == ScenarioId::S3) {
        let key = shape_key(c);
        let obstructed = r.metrics.arms[0].mean_position();
        let free = s1(key).unwrap_or(f64::INFINITY);
        pass &= r.metrics.collisions == 0 && obstructed > free;
        parts.push(format!("{key} {obstructed:.2} vs {free:.2} mm, {} collisions", r.metrics.collisions));
    }
    pass &= parts.len() == 6;
    outcome(pass, format!("S3 vs S1 mean position error: {}", parts.join("; ")))
}

/// Smallest gap between the controlled arm `own` and anything else, other
/// controlled arms counting as obstacles, on the solver's own geometry.
fn controlled_min_gap(arms: &[VerificationArm], own: usize, configs: &[&[f64]]) -> f64 {
    let roles: Vec<(&RobotModel, ArmRole)> = arms
        .iter()
        .enumerate()
        .map(|(i, a)| (a.arm.model.as_ref(), if i == own { ArmRole::Controlled } else { ArmRole::External }))
        .collect();
    let acm = AllowedCollisionMatrix::build(&roles);
    let mut scene = Vec::with_capacity(acm.len());
    for (i, (a, q)) in arms.iter().zip(configs).enumerate() {
        scene.extend(a.arm.spheres(q, i, acm.arm_offset(i)));
    }
    let pairs =
        ProximityConfig { max_pairs: usize::MAX, ..ProximityConfig::default() }.active_pairs(&scene, &acm).unwrap();
    pairs.first().map_or(f64::INFINITY, |p| p.gap)
}

/// Every corpus solve that started with all gaps non-negative also ended so.
fn collision_priority(corpus: &Corpus) -> Outcome {
    let (mut solves, mut clear_starts, mut broken) = (0, 0, Vec::new());
    for (scenario, (_, report)) in corpus.scenarios.iter().zip(&corpus.reports) {
        let arms = scenario.verification_arms();
        for log in &report.logs {
            for tick in log.records.chunks(arms.len()) {
                let observed: Vec<&[f64]> = tick.iter().map(|r| r.q_observed.as_slice()).collect();
                for (own, r) in tick.iter().enumerate().filter(|(_, r)| r.controlled) {
                    solves += 1;
                    if controlled_min_gap(&arms, own, &observed) < 0.0 {
                        continue;
                    }
                    clear_starts += 1;
                    let mut after = observed.clone();
                    after[own] = &r.q_cmd;
                    if controlled_min_gap(&arms, own, &after) < 0.0 {
                        broken.push(format!("{} trial {} tick {} {}", scenario.config.name, log.trial, r.tick, r.arm));
                    }
                }
            }
        }
    }
    let mut detail =
        format!("{solves} corpus solves, {clear_starts} from clear starts, {} ending in contact", broken.len());
    if let Some(b) = broken.first() {
        detail.push_str(&format!("; first: {b}"));
    }
    outcome(broken.is_empty() && clear_starts > 0, detail)
}

fn random_q(rng: &mut ChaCha8Rng, arm: &Arm) -> Vec<f64> {
    let lo = arm.model.lower_bounds();
    let hi = arm.model.upper_bounds();
    lo.iter().zip(&hi).map(|(l, h)| rng.gen_range(*l..*h)).collect()
}

fn random_state(rng: &mut ChaCha8Rng, arm: &Arm) -> ArmState {
    let n = arm.dof();
    let mut state = ArmState::new(random_q(rng, arm), 0.0);
    state.qdot = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
    state.qddot = (0..n).map(|_| rng.gen_range(-20.0..20.0)).collect();
    state
}

fn random_goal(rng: &mut ChaCha8Rng, arm: &Arm) -> GoalSpec {
    let q = random_q(rng, arm);
    let pose = arm.end_effector_pose(&q);
    let target = Pose::new(
        pose.position + Vector3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)),
        pose.orientation,
    );
    match rng.gen_range(0..3) {
        0 => GoalSpec::position(target.position, rng.gen_range(0.5..4.0)),
        1 => GoalSpec::orientation(target.orientation, rng.gen_range(0.5..4.0)),
        _ => GoalSpec::pose(target, rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0)),
    }
}

/// A controlled arm at the origin with a second arm standing across from it.
struct Setup {
    arm: Arm,
    other: Arm,
}

impl Setup {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let (own, other) = if rng.gen_bool(0.5) { ("s6.json", "s7.json") } else { ("s7.json", "s6.json") };
        let arm = Arm::new(model(own), Isometry3::identity());
        let base = Isometry3::new(
            Vector3::new(rng.gen_range(0.5..0.9), rng.gen_range(-0.3..0.3), 0.0),
            Vector3::new(0.0, 0.0, std::f64::consts::PI + rng.gen_range(-0.5..0.5)),
        );
        Self { arm, other: Arm::new(model(other), base) }
    }

    fn solver(&self, weights: CostWeights, seed: u64) -> Solver {
        let acm = build_acm(&self.arm.model, &[&self.other.model]);
        Solver::new(self.arm.clone(), acm, weights, ProximityConfig::default(), SolverConfig::default(), seed).unwrap()
    }

    fn obstacle(&self, q: &[f64]) -> Vec<WorldSphere> {
        self.other.spheres(q, 1, self.arm.model.spheres.len())
    }
}

fn relative_jacobian_error(objective: &Objective, q: &[f64], block: usize) -> f64 {
    let n = q.len();
    let jets = Jet::variables(q);
    let ad = &objective.blocks(&jets)[block].residuals;
    let (mut diff, mut norm) = (0.0, 0.0);
    for i in 0..n {
        let h = 1e-6 * q[i].abs().max(1.0);
        let mut plus = q.to_vec();
        let mut minus = q.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let rp = &objective.blocks(&plus)[block].residuals;
        let rm = &objective.blocks(&minus)[block].residuals;
        for (k, r) in ad.iter().enumerate() {
            let fd = (rp[k] - rm[k]) / (2.0 * h);
            diff += (r.d[i] - fd).powi(2);
            norm += fd * fd;
        }
    }
    diff.sqrt() / norm.sqrt().max(1e-12)
}

fn gradient_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let weights = CostWeights::default();
    let start = Instant::now();
    let mut worst = [0.0f64; 5];
    let mut counts = [0usize; 5];
    let mut draws = 0;
    while counts.iter().any(|c| *c < 100) && draws < 100_000 {
        draws += 1;
        let setup = Setup::new(&mut rng);
        let state = random_state(&mut rng, &setup.arm);
        let goal = random_goal(&mut rng, &setup.arm);
        let q = random_q(&mut rng, &setup.arm);
        let obstacle = setup.obstacle(&random_q(&mut rng, &setup.other));
        let solver = setup.solver(weights.clone(), 0);
        let active = solver.active_pairs(&q, &obstacle).unwrap();
        // the collision residual switches branches at contact and at the gap floor
        if active.iter().any(|p| p.gap > -1e-5 && p.gap < weights.gap_floor + 1e-5) {
            continue;
        }
        let objective = Objective::new(&setup.arm, &state, &goal, &weights, 0.01, &active).unwrap();
        for (b, block) in objective.blocks(&q).iter().enumerate() {
            if counts[b] >= 100 || block.residuals.is_empty() {
                continue;
            }
            counts[b] += 1;
            worst[b] = worst[b].max(relative_jacobian_error(&objective, &q, b));
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let pass = counts.iter().all(|c| *c == 100) && worst.iter().all(|w| *w < 1e-5) && seconds < 30.0;
    let parts: Vec<String> = CostFamily::ALL
        .iter()
        .zip(worst.iter().zip(&counts))
        .map(|(f, (w, c))| format!("{f:?} {w:.1e} ({c})"))
        .collect();
    outcome(pass, format!("worst relative error per block (limit 1e-5, states): {}; {seconds:.1} s", parts.join(", ")))
}

fn proximity_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = ProximityConfig::default();
    let unlimited = ProximityConfig { max_pairs: usize::MAX, ..config };
    let start = Instant::now();
    let (mut misses, mut truncation_errors, mut checked) = (0, 0, 0);
    for _ in 0..1000 {
        let setup = Setup::new(&mut rng);
        let mut others: Vec<&RobotModel> = vec![&setup.other.model];
        let mut scene = setup.arm.spheres(&random_q(&mut rng, &setup.arm), 0, 0);
        scene.extend(setup.obstacle(&random_q(&mut rng, &setup.other)));
        let third;
        if rng.gen_bool(0.5) {
            let base =
                Isometry3::new(Vector3::new(rng.gen_range(-0.3..0.3), rng.gen_range(0.5..0.9), 0.0), Vector3::zeros());
            third = Arm::new(model("s6.json"), base);
            scene.extend(third.spheres(&random_q(&mut rng, &third), 2, scene.len()));
            others.push(&third.model);
        }
        let acm = build_acm(&setup.arm.model, &others);

        let mut brute = Vec::new();
        for a in 0..scene.len() {
            for b in a + 1..scene.len() {
                let gap = sphere_gap(&scene[a].center, scene[a].radius, &scene[b].center, scene[b].radius);
                if !acm.allowed(a, b) && gap <= config.activation_distance {
                    brute.push((gap, a, b));
                }
            }
        }
        brute.sort_by(|x, y| x.0.total_cmp(&y.0));
        checked += brute.len();

        let full: BTreeSet<(usize, usize)> = unlimited
            .active_pairs(&scene, &acm)
            .unwrap()
            .iter()
            .map(|p| (p.id_a.min(p.id_b), p.id_a.max(p.id_b)))
            .collect();
        misses += brute.iter().filter(|(_, a, b)| !full.contains(&(*a, *b))).count();

        // truncated to the closest pairs
        let capped: Vec<f64> = config.active_pairs(&scene, &acm).unwrap().iter().map(|p| p.gap).collect();
        let expected: Vec<f64> = brute.iter().take(config.max_pairs).map(|p| p.0).collect();
        if capped.len() != expected.len() || capped.iter().zip(&expected).any(|(x, y)| (x - y).abs() > 1e-12) {
            truncation_errors += 1;
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    outcome(
        misses == 0 && truncation_errors == 0 && seconds < 30.0,
        format!(
            "1000 scenes, {checked} brute-force pairs, {misses} missed, {truncation_errors} scenes with a wrong {}-pair cut; {seconds:.1} s",
            config.max_pairs
        ),
    )
}

fn unit_oracles() -> Outcome {
    let mut failures = Vec::new();

    let gap = gap_between(&V3::cst(&Vector3::zeros()), 0.05, &V3::cst(&Vector3::new(0.2, 0.0, 0.0)), 0.05);
    let r: f64 = collision_residual(gap, 0.02, 1e-4);
    if (r - 0.2).abs() > 4.0 * f64::EPSILON * 0.2 {
        failures.push(format!("collision residual {r}"));
    }

    let pi = std::f64::consts::PI;
    let limits = [JointLimits { lower: -pi, upper: pi, velocity: 1.0, acceleration: 1.0 }];
    let b = joint_limit_residuals(&[0.0], &limits, 0.01).unwrap();
    let (lower, upper) = (0.01 / (pi - 0.01), 0.01 / (-pi - 0.01));
    if (b.residuals[0] - lower).abs() > 1e-12 || (b.residuals[1] - upper).abs() > 1e-12 {
        failures.push(format!("barrier {:?}", b.residuals));
    }

    // q = t^2 on a dyadic grid is exact in floating point, so the
    // differences must be too
    let dt = 1.0 / 64.0;
    let q: Vec<[f64; 1]> = (0..4).rev().map(|k| [(k as f64 * dt).powi(2)]).collect();
    let samples: Vec<&[f64]> = q.iter().map(|s| s.as_slice()).collect();
    let d = backward_difference_derivatives(&samples, dt).unwrap();
    if d.qddot[0] != 2.0 || d.qdddot[0] != 0.0 || d.qdot[0] != 6.0 * dt - dt {
        failures.push(format!("quadratic differences {:?} {:?} {:?}", d.qdot, d.qddot, d.qdddot));
    }
    let d = backward_difference_derivatives(&[&[0.06], &[0.03], &[0.01], &[0.0]], 0.01).unwrap();
    if (d.qdot[0] - 3.0).abs() > 1e-12 || (d.qddot[0] - 100.0).abs() > 1e-9 || d.qdddot[0].abs() > 1e-6 {
        failures.push(format!("hand sequence {:?} {:?} {:?}", d.qdot, d.qddot, d.qdddot));
    }

    let pass = failures.is_empty();
    let detail = if pass {
        format!("collision residual {r}, barriers {lower:.6e}/{upper:.6e}, quadratic acceleration 2 exactly")
    } else {
        failures.join("; ")
    };
    outcome(pass, detail)
}

fn bounds_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    let mut errors = Vec::new();
    let mut at_bound = 0;
    let start = Instant::now();
    for k in 0..10_000 {
        let setup = Setup::new(&mut rng);
        let mut state = random_state(&mut rng, &setup.arm);
        let (lo, hi) = (setup.arm.model.lower_bounds(), setup.arm.model.upper_bounds());
        // some starts sit exactly on a limit
        if rng.gen_bool(0.2) {
            let j = rng.gen_range(0..lo.len());
            state.q[j] = if rng.gen_bool(0.5) { lo[j] } else { hi[j] };
        }
        let goal = if rng.gen_bool(0.5) {
            random_goal(&mut rng, &setup.arm)
        } else {
            // anywhere, reachable or not
            let p = Vector3::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-0.5..1.5));
            let o = UnitQuaternion::from_euler_angles(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-3.0..3.0),
            );
            GoalSpec { mode: GoalMode::Pose, target: Pose::new(p, o), w11: 1.0, w12: 1.0 }
        };
        let obstacle = if rng.gen_bool(0.5) { setup.obstacle(&random_q(&mut rng, &setup.other)) } else { Vec::new() };
        let mut solver = if obstacle.is_empty() {
            let acm = build_acm(&setup.arm.model, &[]);
            Solver::new(
                setup.arm.clone(),
                acm,
                CostWeights::default(),
                ProximityConfig::default(),
                SolverConfig::default(),
                k,
            )
            .unwrap()
        } else {
            setup.solver(CostWeights::default(), k)
        };
        match solver.solve(&state, &obstacle, &goal, 0.01) {
            Ok(r) => {
                let inside =
                    r.q_cmd.iter().zip(lo.iter().zip(&hi)).all(|(q, (l, h))| q.is_finite() && q >= l && q <= h);
                violations += usize::from(!inside);
                at_bound += usize::from(r.q_cmd.iter().zip(lo.iter().zip(&hi)).any(|(q, (l, h))| q == l || q == h));
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let mut detail = format!(
        "10000 solves, {violations} outside limits, {} errors, {at_bound} commands on a bound; {seconds:.1} s",
        errors.len()
    );
    if let Some(e) = errors.first() {
        detail.push_str(&format!("; first error: {e}"));
    }
    outcome(violations == 0 && errors.is_empty(), detail)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios().join("s4_square_xy.json");
    let mut docs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_dcik"))
            .args(["run", "--quiet", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        let metrics = std::fs::read(out.join("s4_square_xy/metrics.json")).unwrap_or_default();
        docs.push((status.code(), metrics));
    }
    let same = !docs[0].1.is_empty() && docs[0].1 == docs[1].1;
    outcome(
        same && docs[0].0 == Some(0),
        format!(
            "two `dcik run` of s4_square_xy: exit {:?}/{:?}, metrics.json {} ({} bytes)",
            docs[0].0,
            docs[1].0,
            if same { "identical" } else { "differ" },
            docs[0].1.len()
        ),
    )
}

fn solve_budget(path: &Path) -> Outcome {
    let scenario = Scenario::load(path).unwrap();
    let log = run_scenario(&scenario, 0, RunOptions::default()).unwrap();
    let mut ms: Vec<f64> = log.records.iter().filter_map(|r| r.wall_time).map(|t| t * 1e3).collect();
    ms.sort_by(f64::total_cmp);
    let at = |p: f64| ms[((ms.len() - 1) as f64 * p).round() as usize];
    outcome(
        at(0.5) < 10.0,
        format!(
            "{} solves of {}: median {:.3} ms, p90 {:.3}, p99 {:.3}, max {:.3} (limit 10 ms median)",
            ms.len(),
            scenario.config.name,
            at(0.5),
            at(0.9),
            at(0.99),
            at(1.0)
        ),
    )
}

fn main() {
    let corpus = run_corpus();
    #[allow(clippy::type_complexity)]
    let criteria: Vec<(&str, bool, Box<dyn FnOnce() -> Outcome + '_>)> = vec![
        ("zero collisions across the corpus", true, Box::new(|| zero_collisions(&corpus))),
        ("free-space tracking (S1)", true, Box::new(|| free_space_tracking(&corpus))),
        ("obstruction trade-off (S3)", true, Box::new(|| obstruction_tradeoff(&corpus))),
        ("residual Jacobians vs finite differences", true, Box::new(gradient_suite)),
        ("proximity pipeline vs brute force", true, Box::new(proximity_oracle)),
        ("unit oracles", true, Box::new(unit_oracles)),
        ("bounds fuzz", true, Box::new(bounds_fuzz)),
        ("determinism of `dcik run`", true, Box::new(determinism)),
        ("100 Hz budget (S2, logged only)", false, Box::new(|| solve_budget(&scenarios().join("s2_square_yz.json")))),
    ];
    let mut failed = 0;
    for (k, (name, hard, check)) in criteria.into_iter().enumerate() {
        let o = check();
        let verdict = match (o.pass, hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "FAIL (soft)",
        };
        if !o.pass && hard {
            failed += 1;
        }
        println!("criterion {}: {verdict}: {name}: {}", k + 1, o.detail);
    }
    let o = collision_priority(&corpus);
    failed += usize::from(!o.pass);
    println!("invariant: {}: collision priority: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
