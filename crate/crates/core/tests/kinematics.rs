//! Forward kinematics against an independent nalgebra composition of the raw
//! description files.

use std::collections::HashMap;
use std::path::PathBuf;

use approx::assert_relative_eq;
use dcik::harness::{settle_start, Scenario};
use dcik::kinematics::{forward_kinematics, sphere_world_positions};
use dcik::model::{AllowedCollisionMatrix, ArmRole, RobotModel};
use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion, Vector3};
use proptest::prelude::*;
use serde_json::Value;

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn vec3(v: Option<&Value>) -> Vector3<f64> {
    match v {
        Some(Value::Array(a)) => Vector3::new(a[0].as_f64().unwrap(), a[1].as_f64().unwrap(), a[2].as_f64().unwrap()),
        _ => Vector3::zeros(),
    }
}

/// Link name -> world pose. The shipped arms are serial chains listed root
/// first, so each joint hangs off the previous joint's child.
fn oracle(doc: &Value, q: &[f64]) -> HashMap<String, Isometry3<f64>> {
    let mut poses = HashMap::new();
    let mut pose = Isometry3::identity();
    poses.insert("base".to_string(), pose);
    let links = doc["links"].as_array().unwrap();
    let mut k = 0;
    for joint in doc["joints"].as_array().unwrap() {
        let origin = &joint["origin"];
        let rpy = vec3(origin.get("rpy"));
        pose *= Isometry3::from_parts(
            Translation3::from(vec3(origin.get("xyz"))),
            UnitQuaternion::from_euler_angles(rpy.x, rpy.y, rpy.z),
        );
        if joint["kind"] == "revolute" {
            let axis = Unit::new_normalize(vec3(joint.get("axis")));
            pose *= UnitQuaternion::from_axis_angle(&axis, q[k]);
            k += 1;
        }
        let child = links.iter().find(|l| l["parent_joint"] == joint["name"]).unwrap();
        poses.insert(child["name"].as_str().unwrap().to_string(), pose);
    }
    poses
}

fn load(name: &str) -> (RobotModel, Value) {
    let path = scenarios().join("models").join(name);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    (RobotModel::from_file(&path).unwrap(), doc)
}

fn check_against_oracle(model: &RobotModel, doc: &Value, q: &[f64]) {
    let frames = forward_kinematics(model, q).unwrap();
    let expected = oracle(doc, q);
    for (i, link) in model.links.iter().enumerate() {
        let e = expected[&link.name];
        assert_relative_eq!(frames[i].translation.vector, e.translation.vector, epsilon = 1e-12);
        assert_relative_eq!(frames[i].rotation.to_rotation_matrix(), e.rotation.to_rotation_matrix(), epsilon = 1e-12);
    }
}

#[test]
fn shipped_arms_at_zero() {
    for name in ["s6.json", "s7.json"] {
        let (model, doc) = load(name);
        check_against_oracle(&model, &doc, &vec![0.0; model.dof()]);
    }
    // straight out along x at the column height
    let (model, _) = load("s6.json");
    let tool = forward_kinematics(&model, &[0.0; 6]).unwrap()[model.end_effector];
    assert_relative_eq!(tool.translation.vector, Vector3::new(0.78, 0.0, 0.35), epsilon = 1e-12);
}

#[test]
fn settled_start_of_s1_matches_oracle_and_first_waypoint() {
    let scenario = Scenario::load(&scenarios().join("s1_square_yz.json")).unwrap();
    let c = &scenario.controlled[0];
    let acm = AllowedCollisionMatrix::build(&[(c.arm.model.as_ref(), ArmRole::Controlled)]);
    let q = settle_start(c, &acm, &[], &scenario.config.solver, &scenario.config.proximity, scenario.dt()).unwrap();
    let (_, doc) = load("s6.json");
    check_against_oracle(&c.arm.model, &doc, &q);
    let tool = c.arm.end_effector_pose(&q);
    assert!((tool.position - c.waypoints[0].position).norm() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_configurations_match_oracle(q in prop::collection::vec(-3.0f64..3.0, 7)) {
        let (s7, doc) = load("s7.json");
        check_against_oracle(&s7, &doc, &q);
        let (s6, doc) = load("s6.json");
        check_against_oracle(&s6, &doc, &q[..6]);
    }

    #[test]
    fn spheres_ride_on_their_links(q in prop::collection::vec(-3.0f64..3.0, 6)) {
        let (model, doc) = load("s6.json");
        let expected = oracle(&doc, &q);
        let world = sphere_world_positions(&model, &q).unwrap();
        let mut k = 0;
        for (link, spheres) in model.spheres.per_link.iter().enumerate() {
            for s in spheres {
                let c = expected[&model.links[link].name] * nalgebra::Point3::from(s.center);
                prop_assert!((world[k].center - c.coords).norm() < 1e-12);
                prop_assert_eq!(world[k].radius, s.radius);
                k += 1;
            }
        }
        prop_assert_eq!(k, world.len());
    }
}
